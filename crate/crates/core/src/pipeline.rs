//! From frame covariances to the denoised real-valued KR observation.
//!
//! The vectorized covariances are reduced to one row per co-array lag, sorted
//! by ascending lag `-M~..=M~` (for `R_ij` the lag is `p_i - p_j`, so row 0
//! carries `exp(+j M~ phi)`). Two reductions are supported:
//!
//! * [`Reduction::UlaWeighted`]: `W^{-1/2} G^T Y` on a ULA, i.e. each lag row
//!   is the pair sum divided by `sqrt(multiplicity)`.
//! * [`Reduction::CoarrayAverage`]: plain averaging over the pairs of each
//!   lag, valid for any hole-free co-array.
//!
//! The real transform then keeps `sqrt(2) Re` and `sqrt(2) Im` of rows
//! `0..M~`, which drops the lag-0 row where all white noise lives.

use std::f64::consts::SQRT_2;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{difference_coarray, ArrayGeometry, CoArrayMap};
use crate::simulate::{CMatrix, FrameCovariances};

/// `vec(R_m)` stacked as columns, `N^2 x M`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrObservation(pub CMatrix);

/// Lag-sorted co-array observation, `(2 M~ + 1) x M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedCoarrayObservation(pub CMatrix);

/// Real-valued observation `[H1 Z; H2 Z]`, `2 M~ x M`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealKrMatrix(pub DMatrix<f64>);

impl RealKrMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Rows are channels, columns are frames.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for row in self.0.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Column-major vectorization, so `vec(A D A^H) = (A* ⊙ A) d`.
pub fn vectorize(fc: &FrameCovariances) -> KrObservation {
    let n = fc.num_sensors();
    let mut y = CMatrix::zeros(n * n, fc.frames());
    for (m, r) in fc.matrices.iter().enumerate() {
        y.column_mut(m).copy_from_slice(r.as_slice());
    }
    KrObservation(y)
}

/// Explicit ULA selection matrix `G` (`N^2 x (2N-1)`) and the diagonal of
/// `W = G^T G`.
#[derive(Debug, Clone, PartialEq)]
pub struct UlaSelection {
    pub g: DMatrix<f64>,
    pub w: DVector<f64>,
}

pub fn ula_selection(n: usize) -> UlaSelection {
    let mut g = DMatrix::zeros(n * n, 2 * n - 1);
    // Block i (1-based) holds I_N in columns N+1-i ..= 2N-i.
    for i in 1..=n {
        for r in 0..n {
            g[((i - 1) * n + r, n - i + r)] = 1.0;
        }
    }
    let w = DVector::from_iterator(2 * n - 1, g.column_iter().map(|c| c.sum()));
    UlaSelection { g, w }
}

/// Vec-order indices of the pairs behind each lag, ordered by
/// `(min(i, j), max(i, j))` so that mirrored lags are summed in the same
/// order and stay exact conjugates of each other.
fn lag_groups(coarray: &CoArrayMap) -> Vec<Vec<usize>> {
    let n = coarray.num_sensors();
    let mut keyed: Vec<Vec<((usize, usize), usize)>> = vec![Vec::new(); coarray.dof()];
    for j in 0..n {
        for i in 0..n {
            keyed[coarray.lag_index(i, j)].push(((i.min(j), i.max(j)), i + j * n));
        }
    }
    keyed
        .into_iter()
        .map(|mut g| {
            g.sort_unstable();
            g.into_iter().map(|(_, idx)| idx).collect()
        })
        .collect()
}

fn reduce_rows(y: &CMatrix, groups: &[Vec<usize>], scale: &[f64]) -> CMatrix {
    let mut out = CMatrix::zeros(groups.len(), y.ncols());
    for (m, col) in y.column_iter().enumerate() {
        for (row, (group, &s)) in groups.iter().zip(scale).enumerate() {
            let sum: Complex64 = group.iter().map(|&idx| col[idx]).sum();
            out[(row, m)] = sum * s;
        }
    }
    out
}

fn check_rows(y: &KrObservation, n: usize) -> Result<()> {
    if y.0.nrows() != n * n {
        return Err(Error::DimensionMismatch(format!(
            "observation has {} rows, expected {} for {n} sensors",
            y.0.nrows(),
            n * n
        )));
    }
    Ok(())
}

/// `W^{-1/2} G^T Y` for an `n`-sensor ULA, rows ordered `+(N-1)` phase
/// exponent first.
pub fn reduce_ula(y: &KrObservation, n: usize) -> Result<CMatrix> {
    check_rows(y, n)?;
    let coarray = difference_coarray(&ArrayGeometry::ula(n, 0.5)?);
    let scale: Vec<f64> = coarray
        .multiplicities()
        .iter()
        .map(|&w| 1.0 / (w as f64).sqrt())
        .collect();
    Ok(reduce_rows(&y.0, &lag_groups(&coarray), &scale))
}

/// Averages the `Y` rows of each lag and sorts them by ascending lag.
pub fn average_sort(y: &KrObservation, coarray: &CoArrayMap) -> Result<SortedCoarrayObservation> {
    check_rows(y, coarray.num_sensors())?;
    if !coarray.is_hole_free() {
        return Err(Error::CoarrayHoles(coarray.holes()));
    }
    let scale: Vec<f64> = coarray
        .multiplicities()
        .iter()
        .map(|&w| 1.0 / w as f64)
        .collect();
    Ok(SortedCoarrayObservation(reduce_rows(
        &y.0,
        &lag_groups(coarray),
        &scale,
    )))
}

/// Left-multiplication by `[H1; H2]` for conjugate-symmetric input, done as
/// `sqrt(2) Re` / `sqrt(2) Im` of the first `M~` rows.
pub fn real_transform(sorted: &CMatrix) -> Result<RealKrMatrix> {
    let rows = sorted.nrows();
    if rows.is_multiple_of(2) {
        return Err(Error::DimensionMismatch(format!(
            "sorted observation needs an odd row count, got {rows}"
        )));
    }
    let half = rows / 2;
    let mut out = DMatrix::zeros(2 * half, sorted.ncols());
    for (m, col) in sorted.column_iter().enumerate() {
        for i in 0..half {
            out[(i, m)] = SQRT_2 * col[i].re;
            out[(half + i, m)] = SQRT_2 * col[i].im;
        }
    }
    Ok(RealKrMatrix(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    UlaWeighted,
    CoarrayAverage,
}

/// Virtual co-array seen by the KR estimators: row reduction, per-row
/// manifold weights and the steering vectors that go with them.
#[derive(Debug, Clone)]
pub struct VirtualArray {
    geometry: ArrayGeometry,
    coarray: CoArrayMap,
    reduction: Reduction,
    groups: Vec<Vec<usize>>,
    row_scale: Vec<f64>,
    weights: Vec<f64>,
}

impl VirtualArray {
    /// ULA geometries use the weighted reduction, everything else averages.
    pub fn new(geometry: &ArrayGeometry) -> Result<Self> {
        let reduction = if geometry.is_uniform() {
            Reduction::UlaWeighted
        } else {
            Reduction::CoarrayAverage
        };
        Self::with_reduction(geometry, reduction)
    }

    pub fn with_reduction(geometry: &ArrayGeometry, reduction: Reduction) -> Result<Self> {
        if reduction == Reduction::UlaWeighted && !geometry.is_uniform() {
            return Err(Error::InvalidGeometry(format!(
                "weighted ULA reduction needs a uniform array, got {:?}",
                geometry.positions()
            )));
        }
        let coarray = difference_coarray(geometry);
        if !coarray.is_hole_free() {
            return Err(Error::CoarrayHoles(coarray.holes()));
        }
        if coarray.max_lag() < 1 {
            return Err(Error::InvalidGeometry("co-array has no nonzero lag".into()));
        }
        let mult = coarray.multiplicities();
        let (row_scale, weights) = match reduction {
            Reduction::UlaWeighted => (
                mult.iter().map(|&w| 1.0 / (w as f64).sqrt()).collect(),
                mult.iter().map(|&w| (w as f64).sqrt()).collect(),
            ),
            Reduction::CoarrayAverage => (
                mult.iter().map(|&w| 1.0 / w as f64).collect(),
                vec![1.0; mult.len()],
            ),
        };
        Ok(Self {
            geometry: geometry.clone(),
            groups: lag_groups(&coarray),
            coarray,
            reduction,
            row_scale,
            weights,
        })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn coarray(&self) -> &CoArrayMap {
        &self.coarray
    }

    pub fn reduction(&self) -> Reduction {
        self.reduction
    }

    /// `M~`.
    pub fn max_lag(&self) -> usize {
        self.coarray.max_lag() as usize
    }

    /// Rows of the complex (sorted) observation, `2 M~ + 1`.
    pub fn complex_rows(&self) -> usize {
        2 * self.max_lag() + 1
    }

    /// Rows of the real observation, `2 M~`.
    pub fn real_rows(&self) -> usize {
        2 * self.max_lag()
    }

    /// Per-row manifold weights of the sorted observation.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(2 M~ + 1) x M` lag-sorted observation.
    pub fn reduce(&self, y: &KrObservation) -> Result<CMatrix> {
        check_rows(y, self.geometry.num_sensors())?;
        Ok(reduce_rows(&y.0, &self.groups, &self.row_scale))
    }

    pub fn real_observation(&self, fc: &FrameCovariances) -> Result<RealKrMatrix> {
        real_transform(&self.reduce(&vectorize(fc))?)
    }

    /// Phase step per lag for a given DOA.
    pub fn phase(&self, theta_deg: f64) -> Result<f64> {
        if !(theta_deg.is_finite() && (-90.0..=90.0).contains(&theta_deg)) {
            return Err(Error::AngleOutOfRange(theta_deg));
        }
        Ok(self.geometry.phase_per_unit(theta_deg))
    }

    /// Writes `[b_R; b_I]` for phase step `phi` into `out` (length `2 M~`).
    pub fn real_steering_into(&self, phi: f64, out: &mut [f64]) {
        let half = self.max_lag();
        debug_assert_eq!(out.len(), 2 * half);
        let (re, im) = out.split_at_mut(half);
        for i in 0..half {
            let (s, c) = (((half - i) as f64) * phi).sin_cos();
            let w = SQRT_2 * self.weights[i];
            re[i] = w * c;
            im[i] = w * s;
        }
    }

    /// Writes the weighted complex manifold `w_r exp(j (M~ - r) phi)` into
    /// `out` (length `2 M~ + 1`).
    pub fn complex_steering_into(&self, phi: f64, out: &mut [Complex64]) {
        let half = self.max_lag();
        debug_assert_eq!(out.len(), 2 * half + 1);
        out[half] = Complex64::new(self.weights[half], 0.0);
        for i in 0..half {
            let (s, c) = (((half - i) as f64) * phi).sin_cos();
            out[i] = Complex64::new(c, s) * self.weights[i];
            out[2 * half - i] = Complex64::new(c, -s) * self.weights[2 * half - i];
        }
    }

    /// `(b_R, b_I)`, each of length `M~`.
    pub fn real_steering(&self, theta_deg: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let phi = self.phase(theta_deg)?;
        let mut buf = vec![0.0; self.real_rows()];
        self.real_steering_into(phi, &mut buf);
        let half = self.max_lag();
        Ok((
            DVector::from_column_slice(&buf[..half]),
            DVector::from_column_slice(&buf[half..]),
        ))
    }

    /// Stacked real steering vector `[b_R; b_I]`.
    pub fn stacked_real_steering(&self, theta_deg: f64) -> Result<DVector<f64>> {
        let phi = self.phase(theta_deg)?;
        let mut v = DVector::zeros(self.real_rows());
        self.real_steering_into(phi, v.as_mut_slice());
        Ok(v)
    }

    pub fn complex_steering(&self, theta_deg: f64) -> Result<DVector<Complex64>> {
        let phi = self.phase(theta_deg)?;
        let mut v = DVector::zeros(self.complex_rows());
        self.complex_steering_into(phi, v.as_mut_slice());
        Ok(v)
    }
}

pub fn virtual_steering(
    array: &VirtualArray,
    theta_deg: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    array.real_steering(theta_deg)
}

/// Full pipeline: vectorize, reduce (ULA weighting or co-array averaging),
/// real transform.
pub fn build_real_observation(fc: &FrameCovariances, geometry: &ArrayGeometry) -> Result<RealKrMatrix> {
    VirtualArray::new(geometry)?.real_observation(fc)
}
