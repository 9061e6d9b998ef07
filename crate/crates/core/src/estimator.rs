//! Noise-subspace estimation, MUSIC scanning and peak picking for the
//! real-valued KR estimator and the complex-valued KR baseline.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{ComplexField, DMatrix, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::pipeline::{vectorize, VirtualArray};
use crate::simulate::{CMatrix, FrameCovariances};

/// Left singular vectors `k+1 ..= rows` of an observation matrix.
#[derive(Debug, Clone)]
pub struct NoiseSubspace<T: ComplexField<RealField = f64>> {
    basis: DMatrix<T>,
    singular_values: Vec<f64>,
    num_sources: usize,
}

impl<T: ComplexField<RealField = f64>> NoiseSubspace<T> {
    pub fn basis(&self) -> &DMatrix<T> {
        &self.basis
    }

    /// All singular values of the observation, descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `||U_n^H v||`.
    pub fn projection_norm(&self, v: &nalgebra::DVector<T>) -> f64 {
        (self.basis.adjoint() * v).norm()
    }
}

/// SVD-based noise subspace for `k` sources.
///
/// Wide observations (rows <= frames) are decomposed as-is; tall ones are
/// zero-padded to square so the left factor spans the whole row space.
pub fn noise_subspace<T: ComplexField<RealField = f64>>(
    obs: &DMatrix<T>,
    k: usize,
) -> Result<NoiseSubspace<T>> {
    let (rows, cols) = obs.shape();
    if k >= rows {
        return Err(Error::NotIdentifiable { sources: k, rows });
    }
    if k > cols {
        return Err(Error::RankDeficient {
            sources: k,
            frames: cols,
        });
    }
    let input = if rows > cols {
        let mut padded = DMatrix::zeros(rows, rows);
        padded.columns_mut(0, cols).copy_from(obs);
        padded
    } else {
        obs.clone()
    };
    let svd = SVD::new(input, true, false);
    let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    let top = singular_values.first().copied().unwrap_or(0.0);
    if !(top.is_finite() && top > 0.0) {
        return Err(Error::DegenerateObservation);
    }
    let u = svd.u.expect("left singular vectors were requested");
    Ok(NoiseSubspace {
        basis: u.columns(k, rows - k).into_owned(),
        singular_values,
        num_sources: k,
    })
}

/// Scalars the MUSIC scan can run on: `f64` uses the stacked real manifold
/// `[b_R; b_I]`, `Complex64` the weighted complex co-array manifold.
pub trait ManifoldScalar: ComplexField<RealField = f64> + Copy {
    fn manifold_len(array: &VirtualArray) -> usize;
    fn fill_manifold(array: &VirtualArray, phi: f64, out: &mut [Self]);
}

impl ManifoldScalar for f64 {
    fn manifold_len(array: &VirtualArray) -> usize {
        array.real_rows()
    }

    fn fill_manifold(array: &VirtualArray, phi: f64, out: &mut [f64]) {
        array.real_steering_into(phi, out);
    }
}

impl ManifoldScalar for Complex64 {
    fn manifold_len(array: &VirtualArray) -> usize {
        array.complex_rows()
    }

    fn fill_manifold(array: &VirtualArray, phi: f64, out: &mut [Complex64]) {
        array.complex_steering_into(phi, out);
    }
}

/// Uniform search grid in degrees, inclusive of both ends when the step
/// divides the span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for AngleGrid {
    fn default() -> Self {
        Self {
            start: -90.0,
            stop: 90.0,
            step: 0.05,
        }
    }
}

impl AngleGrid {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        let g = Self { start, stop, step };
        g.validate()?;
        Ok(g)
    }

    pub fn with_step(step: f64) -> Result<Self> {
        Self::new(-90.0, 90.0, step)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidGrid(format!("step must be positive, got {}", self.step)));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.start <= self.stop) {
            return Err(Error::InvalidGrid(format!(
                "empty range [{}, {}]",
                self.start, self.stop
            )));
        }
        if self.start < -90.0 || self.stop > 90.0 {
            return Err(Error::InvalidGrid(format!(
                "range [{}, {}] leaves [-90, 90]",
                self.start, self.stop
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| (self.start + i as f64 * self.step).min(self.stop))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub angle: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub peaks: Vec<Peak>,
}

impl SpectrumResult {
    /// Fills [`peaks`](Self::peaks) with the `k` largest local maxima.
    pub fn with_peaks(mut self, k: usize, refine: bool) -> Self {
        self.peaks = if refine {
            find_peaks_refined(&self, k)
        } else {
            find_peaks(&self, k)
        };
        self
    }

    /// Grid angle of the global maximum.
    pub fn argmax(&self) -> f64 {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        self.grid[i]
    }

    /// `10 log10(P / max P)`.
    pub fn values_db(&self) -> Vec<f64> {
        let max = self.values.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
        self.values.iter().map(|v| 10.0 * (v / max).log10()).collect()
    }

    /// Two columns, `angle_deg,spectrum_db`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "angle_deg,spectrum_db")?;
        for (a, db) in self.grid.iter().zip(self.values_db()) {
            writeln!(out, "{a:.4},{db:.6}")?;
        }
        Ok(())
    }
}

/// MUSIC pseudo-spectrum `1 / ||U_n^H b(theta)||^2` over `grid`.
pub fn music_spectrum<T: ManifoldScalar>(
    noise: &NoiseSubspace<T>,
    array: &VirtualArray,
    grid: &AngleGrid,
) -> Result<SpectrumResult> {
    grid.validate()?;
    let rows = T::manifold_len(array);
    if noise.basis.nrows() != rows {
        return Err(Error::DimensionMismatch(format!(
            "noise subspace has {} rows, manifold has {rows}",
            noise.basis.nrows()
        )));
    }
    let points = grid.points();
    let basis = noise.basis.as_slice();
    let mut b = vec![T::zero(); rows];
    let values = points
        .iter()
        .map(|&theta| {
            T::fill_manifold(array, array.geometry().phase_per_unit(theta), &mut b);
            let mut denom = 0.0;
            for u in basis.chunks_exact(rows) {
                let mut acc = T::zero();
                for (ui, bi) in u.iter().zip(&b) {
                    acc += ui.conjugate() * *bi;
                }
                denom += acc.modulus_squared();
            }
            1.0 / denom.max(f64::MIN_POSITIVE)
        })
        .collect();
    Ok(SpectrumResult {
        grid: points,
        values,
        peaks: Vec::new(),
    })
}

fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
        .collect()
}

/// The `k` highest strict interior local maxima, in ascending angle.
pub fn find_peaks(spectrum: &SpectrumResult, k: usize) -> Vec<Peak> {
    let mut idx = local_maxima(&spectrum.values);
    idx.sort_by(|&a, &b| spectrum.values[b].total_cmp(&spectrum.values[a]));
    idx.truncate(k);
    idx.sort_unstable();
    idx.into_iter()
        .map(|i| Peak {
            angle: spectrum.grid[i],
            height: spectrum.values[i],
        })
        .collect()
}

/// As [`find_peaks`], with a three-point parabolic fit on `log P` around
/// each grid maximum.
pub fn find_peaks_refined(spectrum: &SpectrumResult, k: usize) -> Vec<Peak> {
    let grid = &spectrum.grid;
    find_peaks(spectrum, k)
        .into_iter()
        .map(|p| {
            let i = grid.iter().position(|&a| a == p.angle).expect("peak is on the grid");
            let (y0, y1, y2) = (
                spectrum.values[i - 1].ln(),
                spectrum.values[i].ln(),
                spectrum.values[i + 1].ln(),
            );
            let curv = y0 - 2.0 * y1 + y2;
            if curv >= 0.0 {
                return p;
            }
            let offset = 0.5 * (y0 - y2) / curv;
            let step = grid[i + 1] - grid[i];
            Peak {
                angle: p.angle + offset * step,
                height: (y1 - 0.25 * (y0 - y2) * offset).exp(),
            }
        })
        .collect()
}

/// Lag-sorted observation with the frame mean removed (right-multiplied by
/// the projector onto the orthogonal complement of the all-ones vector).
pub fn complex_observation(fc: &FrameCovariances, array: &VirtualArray) -> Result<CMatrix> {
    let mut z = array.reduce(&vectorize(fc))?;
    let frames = z.ncols();
    if frames == 0 {
        return Err(Error::Empty("no frames"));
    }
    for mut row in z.row_iter_mut() {
        let mean = row.sum() / Complex64::new(frames as f64, 0.0);
        row.iter_mut().for_each(|v| *v -= mean);
    }
    Ok(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RealKr,
    ComplexKr,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::RealKr, Method::ComplexKr];

    pub fn tag(self) -> &'static str {
        match self {
            Method::RealKr => "real-kr",
            Method::ComplexKr => "complex-kr",
        }
    }

    /// Spectrum without peak extraction.
    pub fn spectrum(
        self,
        fc: &FrameCovariances,
        array: &VirtualArray,
        k: usize,
        grid: &AngleGrid,
    ) -> Result<SpectrumResult> {
        match self {
            Method::RealKr => {
                let obs = array.real_observation(fc)?;
                music_spectrum(&noise_subspace(&obs.0, k)?, array, grid)
            }
            Method::ComplexKr => {
                let obs = complex_observation(fc, array)?;
                music_spectrum(&noise_subspace(&obs, k)?, array, grid)
            }
        }
    }

    pub fn estimate(
        self,
        fc: &FrameCovariances,
        array: &VirtualArray,
        k: usize,
        grid: &AngleGrid,
    ) -> Result<SpectrumResult> {
        Ok(self.spectrum(fc, array, k, grid)?.with_peaks(k, false))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (expected real-kr or complex-kr)")))
    }
}

/// Proposed estimator: real KR observation, real SVD, real MUSIC scan.
pub fn real_kr_spectrum(
    fc: &FrameCovariances,
    geometry: &ArrayGeometry,
    k: usize,
    grid: &AngleGrid,
) -> Result<SpectrumResult> {
    Method::RealKr.estimate(fc, &VirtualArray::new(geometry)?, k, grid)
}

/// Complex-valued KR baseline with orthogonal-complement denoising.
pub fn complex_kr_baseline(
    fc: &FrameCovariances,
    geometry: &ArrayGeometry,
    k: usize,
    grid: &AngleGrid,
) -> Result<SpectrumResult> {
    Method::ComplexKr.estimate(fc, &VirtualArray::new(geometry)?, k, grid)
}

/// Root mean square error in degrees.
pub fn rmse(estimates: &[f64], truth: f64) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::Empty("rmse needs at least one trial"));
    }
    let mse = estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / estimates.len() as f64;
    Ok(mse.sqrt())
}
