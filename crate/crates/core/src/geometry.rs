//! Linear array geometries and their difference co-arrays.
//!
//! Sensor positions live on an integer lattice in units of the base spacing
//! `d1`, so co-array lags are exact integers. Physical lengths only enter when
//! a steering phase is computed.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A linear array with sensors on an integer lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<i64>,
    base_spacing: f64,
    wavelength: f64,
    label: String,
}

impl ArrayGeometry {
    /// Builds a geometry from explicit lattice positions.
    ///
    /// Positions must be strictly increasing; `base_spacing` and `wavelength`
    /// must be positive and finite.
    pub fn new(
        positions: Vec<i64>,
        base_spacing: f64,
        wavelength: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidGeometry("no sensors".into()));
        }
        if let Some(w) = positions.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGeometry(format!(
                "positions must be strictly increasing, found {} before {}",
                w[0], w[1]
            )));
        }
        if !(base_spacing.is_finite() && base_spacing > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "base spacing must be positive, got {base_spacing}"
            )));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        Ok(Self {
            positions,
            base_spacing,
            wavelength,
            label: label.into(),
        })
    }

    /// Explicit positions at half-wavelength base spacing.
    pub fn from_positions(positions: Vec<i64>, spacing: f64) -> Result<Self> {
        let label = format!("explicit{positions:?}");
        Self::new(positions, spacing, 2.0 * spacing, label)
    }

    /// Uniform linear array with `n` sensors at positions `0..n`.
    pub fn ula(n: usize, spacing: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGeometry(format!(
                "a ULA needs at least 2 sensors, got {n}"
            )));
        }
        Self::new((0..n as i64).collect(), spacing, 2.0 * spacing, format!("ula-{n}"))
    }

    /// Two-level nested array with outer spacing `n1 * d1` and the origin on
    /// the first inner sensor: inner `{0, .., n1-1}`, outer `{(n+1) n1 : n = 1..=n2}`.
    pub fn nested_proposed(n1: usize, n2: usize, spacing: f64) -> Result<Self> {
        if n1 < 2 {
            return Err(Error::InvalidGeometry(format!(
                "inner level needs at least 2 sensors, got {n1}"
            )));
        }
        if n2 < 2 {
            return Err(Error::InvalidGeometry(format!(
                "outer level needs at least 2 sensors for a hole-free co-array, got {n2}"
            )));
        }
        let (a, b) = (n1 as i64, n2 as i64);
        let positions = (0..a).chain((1..=b).map(|n| (n + 1) * a)).collect();
        Self::new(
            positions,
            spacing,
            2.0 * spacing,
            format!("nested-{n1}-{n2}"),
        )
    }

    /// Classic two-level nested array with outer spacing `(n1 + 1) d1`,
    /// shifted so the first sensor sits at 0.
    pub fn nested_pal(n1: usize, n2: usize, spacing: f64) -> Result<Self> {
        if n1 < 1 {
            return Err(Error::InvalidGeometry("inner level is empty".into()));
        }
        if n2 < 2 {
            return Err(Error::InvalidGeometry(format!(
                "outer level needs at least 2 sensors, got {n2}"
            )));
        }
        let (a, b) = (n1 as i64, n2 as i64);
        // Original layout is {1..=n1} and {(n1+1) n : n = 1..=n2}; shift by -1.
        let positions = (0..a).chain((1..=b).map(|n| (a + 1) * n - 1)).collect();
        Self::new(
            positions,
            spacing,
            2.0 * spacing,
            format!("pal-{n1}-{n2}"),
        )
    }

    /// Replaces the wavelength, keeping positions and base spacing.
    pub fn with_wavelength(mut self, wavelength: f64) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        self.wavelength = wavelength;
        Ok(self)
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    pub fn num_sensors(&self) -> usize {
        self.positions.len()
    }

    pub fn base_spacing(&self) -> f64 {
        self.base_spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// True when the sensors occupy consecutive lattice points.
    pub fn is_uniform(&self) -> bool {
        self.positions.windows(2).all(|w| w[1] - w[0] == 1)
    }

    /// Phase advance per lattice unit, `2 pi d1 / lambda * sin(theta)`.
    pub fn phase_per_unit(&self, theta_deg: f64) -> f64 {
        2.0 * PI * self.base_spacing / self.wavelength * theta_deg.to_radians().sin()
    }
}

/// Difference co-array of a geometry.
///
/// `pair_lag` is laid out in column-major `vec` order: the entry for sensor
/// pair `(i, j)` sits at `i + j * n` and holds the index into `lags` of
/// `p_i - p_j`. This is the same ordering as `vec(R)`, so it doubles as the
/// row selection used to average the vectorized covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CoArrayMap {
    lags: Vec<i64>,
    multiplicity: Vec<usize>,
    pair_lag: Vec<usize>,
    num_sensors: usize,
}

impl CoArrayMap {
    pub fn lags(&self) -> &[i64] {
        &self.lags
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicity
    }

    pub fn multiplicity(&self, lag: i64) -> Option<usize> {
        self.lags
            .binary_search(&lag)
            .ok()
            .map(|i| self.multiplicity[i])
    }

    /// Index into [`lags`](Self::lags) for the pair `(i, j)`.
    pub fn lag_index(&self, i: usize, j: usize) -> usize {
        self.pair_lag[i + j * self.num_sensors]
    }

    /// Lag indices for every pair in column-major `vec` order.
    pub fn pair_lags(&self) -> &[usize] {
        &self.pair_lag
    }

    pub fn num_sensors(&self) -> usize {
        self.num_sensors
    }

    /// Largest lag, `M~`.
    pub fn max_lag(&self) -> i64 {
        *self.lags.last().expect("co-array always contains lag 0")
    }

    /// Number of distinct lags.
    pub fn dof(&self) -> usize {
        self.lags.len()
    }

    /// Lags in `-M~..=M~` that no sensor pair produces.
    pub fn holes(&self) -> Vec<i64> {
        let m = self.max_lag();
        (-m..=m)
            .filter(|l| self.lags.binary_search(l).is_err())
            .collect()
    }

    pub fn is_hole_free(&self) -> bool {
        self.lags.len() as i64 == 2 * self.max_lag() + 1
    }
}

pub fn difference_coarray(geometry: &ArrayGeometry) -> CoArrayMap {
    let p = geometry.positions();
    let n = p.len();
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &pj in p {
        for &pi in p {
            *counts.entry(pi - pj).or_default() += 1;
        }
    }
    let (lags, multiplicity): (Vec<i64>, Vec<usize>) = counts.into_iter().unzip();
    let mut pair_lag = Vec::with_capacity(n * n);
    for &pj in p {
        for &pi in p {
            let idx = lags
                .binary_search(&(pi - pj))
                .expect("lag was inserted above");
            pair_lag.push(idx);
        }
    }
    CoArrayMap {
        lags,
        multiplicity,
        pair_lag,
        num_sensors: n,
    }
}

pub fn is_hole_free(coarray: &CoArrayMap) -> bool {
    coarray.is_hole_free()
}

/// Array families with a closed-form DOF count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArrayFamily {
    UlaKr,
    Coprime,
    PalNested,
    ProposedNested,
}

impl ArrayFamily {
    pub const ALL: [ArrayFamily; 4] = [
        ArrayFamily::UlaKr,
        ArrayFamily::Coprime,
        ArrayFamily::PalNested,
        ArrayFamily::ProposedNested,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ArrayFamily::UlaKr => "ula-kr",
            ArrayFamily::Coprime => "coprime",
            ArrayFamily::PalNested => "pal-nested",
            ArrayFamily::ProposedNested => "proposed-nested",
        }
    }
}

impl fmt::Display for ArrayFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ArrayFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ArrayFamily::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// Closed-form DOF for `n1 + n2` sensors.
pub fn dof_formula(family: ArrayFamily, n1: usize, n2: usize) -> Result<usize> {
    if n1 < 1 || n2 < 1 {
        return Err(Error::InvalidGeometry(format!(
            "sensor counts must be at least 1, got {n1}+{n2}"
        )));
    }
    Ok(match family {
        ArrayFamily::UlaKr => 2 * (n1 + n2) - 1,
        ArrayFamily::Coprime => n1 * n2,
        ArrayFamily::PalNested => 2 * n2 * (n1 + 1) - 1,
        ArrayFamily::ProposedNested => 2 * (n2 + 1) * n1 + 1,
    })
}

/// Published minimum-redundancy array DOF for the `(n1, n2)` splits of the
/// comparison table. These arrays have no closed-form construction, so only
/// the counts are kept.
pub const MRA_DOF_REFERENCE: [((usize, usize), usize); 4] =
    [((3, 2), 19), ((5, 2), 35), ((5, 3), 47), ((7, 3), 73)];

pub fn mra_dof(n1: usize, n2: usize) -> Option<usize> {
    MRA_DOF_REFERENCE
        .iter()
        .find(|(k, _)| *k == (n1, n2))
        .map(|(_, v)| *v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    const HALF: f64 = 0.5;

    fn brute_lags(p: &[i64]) -> BTreeSet<i64> {
        p.iter()
            .flat_map(|a| p.iter().map(move |b| a - b))
            .collect()
    }

    #[test]
    fn ula_positions() {
        assert_eq!(ArrayGeometry::ula(3, HALF).unwrap().positions(), &[0, 1, 2]);
        assert_eq!(
            ArrayGeometry::ula(6, HALF).unwrap().positions(),
            &[0, 1, 2, 3, 4, 5]
        );
        assert!(matches!(
            ArrayGeometry::ula(1, HALF),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn canonical_half_wavelength() {
        let g = ArrayGeometry::ula(4, 0.25).unwrap();
        assert_eq!(g.wavelength(), 0.5);
        assert!((g.phase_per_unit(90.0) - PI).abs() < 1e-15);
    }

    #[test]
    fn proposed_nested_positions() {
        let g = ArrayGeometry::nested_proposed(3, 3, HALF).unwrap();
        assert_eq!(g.positions(), &[0, 1, 2, 6, 9, 12]);
        let g = ArrayGeometry::nested_proposed(3, 2, HALF).unwrap();
        assert_eq!(g.positions(), &[0, 1, 2, 6, 9]);
        assert!(ArrayGeometry::nested_proposed(3, 1, HALF).is_err());
        assert!(ArrayGeometry::nested_proposed(1, 3, HALF).is_err());
    }

    #[test]
    fn one_outer_sensor_leaves_a_hole() {
        let g = ArrayGeometry::from_positions(vec![0, 1, 2, 6], HALF).unwrap();
        let c = difference_coarray(&g);
        assert!(!is_hole_free(&c));
        assert_eq!(c.holes(), vec![-3, 3]);
    }

    #[test]
    fn pal_nested_dof_matches_table_values() {
        for (n1, n2, dof) in [(3, 2, 15), (5, 3, 35), (5, 2, 23), (7, 3, 47)] {
            let g = ArrayGeometry::nested_pal(n1, n2, HALF).unwrap();
            let c = difference_coarray(&g);
            assert_eq!(g.positions()[0], 0);
            assert!(c.is_hole_free());
            assert_eq!(c.dof(), dof, "pal {n1}+{n2}");
        }
    }

    #[test]
    fn ula_multiplicity_pattern() {
        let c = difference_coarray(&ArrayGeometry::ula(3, HALF).unwrap());
        assert_eq!(c.lags(), &[-2, -1, 0, 1, 2]);
        assert_eq!(c.multiplicities(), &[1, 2, 3, 2, 1]);
        for n in 2..10 {
            let c = difference_coarray(&ArrayGeometry::ula(n, HALF).unwrap());
            let expect: Vec<usize> = (1..n).chain((1..=n).rev()).collect();
            assert_eq!(c.multiplicities(), expect.as_slice());
            assert!(c.is_hole_free());
        }
    }

    #[test]
    fn proposed_nested_coarrays() {
        let c = difference_coarray(&ArrayGeometry::nested_proposed(3, 2, HALF).unwrap());
        assert_eq!(c.lags(), (-9..=9).collect::<Vec<_>>().as_slice());
        let c = difference_coarray(&ArrayGeometry::nested_proposed(3, 3, HALF).unwrap());
        assert_eq!(c.lags(), (-12..=12).collect::<Vec<_>>().as_slice());
        assert_eq!(c.max_lag(), 12);
        assert_eq!(c.dof(), dof_formula(ArrayFamily::ProposedNested, 3, 3).unwrap());
        assert_eq!(c.dof(), 25);
    }

    #[test]
    fn pair_index_points_at_difference() {
        let g = ArrayGeometry::nested_proposed(3, 3, HALF).unwrap();
        let c = difference_coarray(&g);
        let p = g.positions();
        for j in 0..p.len() {
            for i in 0..p.len() {
                assert_eq!(c.lags()[c.lag_index(i, j)], p[i] - p[j]);
            }
        }
    }

    #[test]
    fn exhaustive_nested_dof() {
        for n1 in 2..=8 {
            for n2 in 2..=8 {
                let c = difference_coarray(&ArrayGeometry::nested_proposed(n1, n2, HALF).unwrap());
                assert!(c.is_hole_free(), "proposed {n1}+{n2}");
                assert_eq!(
                    c.dof(),
                    dof_formula(ArrayFamily::ProposedNested, n1, n2).unwrap()
                );
                let c = difference_coarray(&ArrayGeometry::nested_pal(n1, n2, HALF).unwrap());
                assert!(c.is_hole_free(), "pal {n1}+{n2}");
                assert_eq!(c.dof(), 2 * n2 * (n1 + 1) - 1);
            }
        }
    }

    #[test]
    fn dof_formulas() {
        assert_eq!(dof_formula(ArrayFamily::ProposedNested, 7, 3).unwrap(), 57);
        assert_eq!(dof_formula(ArrayFamily::Coprime, 5, 3).unwrap(), 15);
        assert_eq!(dof_formula(ArrayFamily::ProposedNested, 3, 3).unwrap(), 25);
        assert_eq!(dof_formula(ArrayFamily::UlaKr, 3, 2).unwrap(), 9);
        assert!(dof_formula(ArrayFamily::UlaKr, 0, 2).is_err());
        assert!(matches!(
            "mra".parse::<ArrayFamily>(),
            Err(Error::UnknownFamily(_))
        ));
        assert_eq!(
            "proposed-nested".parse::<ArrayFamily>().unwrap(),
            ArrayFamily::ProposedNested
        );
        assert_eq!(mra_dof(7, 3), Some(73));
        assert_eq!(mra_dof(2, 2), None);
    }

    #[test]
    fn proposed_gain_over_pal() {
        for n1 in 1..=12 {
            for n2 in 1..=n1 {
                let gain = dof_formula(ArrayFamily::ProposedNested, n1, n2).unwrap() as i64
                    - dof_formula(ArrayFamily::PalNested, n1, n2).unwrap() as i64;
                assert_eq!(gain, 2 * (n1 as i64 - n2 as i64) + 2);
            }
        }
    }

    #[test]
    fn rejects_unsorted_positions() {
        assert!(ArrayGeometry::from_positions(vec![0, 2, 1], HALF).is_err());
        assert!(ArrayGeometry::from_positions(vec![0, 0], HALF).is_err());
        assert!(ArrayGeometry::new(vec![0, 1], 0.0, 1.0, "x").is_err());
        assert!(ArrayGeometry::new(vec![0, 1], 0.5, -1.0, "x").is_err());
    }

    proptest! {
        #[test]
        fn coarray_matches_brute_force(raw in proptest::collection::btree_set(-40i64..40, 1..12)) {
            let positions: Vec<i64> = raw.into_iter().collect();
            let n = positions.len();
            let g = ArrayGeometry::from_positions(positions.clone(), HALF).unwrap();
            let c = difference_coarray(&g);
            let brute: Vec<i64> = brute_lags(&positions).into_iter().collect();
            prop_assert_eq!(c.lags(), brute.as_slice());
            prop_assert_eq!(c.multiplicities().iter().sum::<usize>(), n * n);
            prop_assert_eq!(c.multiplicity(0), Some(n));
            for &l in c.lags() {
                prop_assert_eq!(c.multiplicity(l), c.multiplicity(-l));
            }
            prop_assert_eq!(c.is_hole_free(), c.holes().is_empty());
        }
    }
}
