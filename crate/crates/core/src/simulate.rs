//! Quasi-stationary source simulation and local covariance estimation.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;

pub type CMatrix = DMatrix<Complex64>;

fn check_angle(theta_deg: f64) -> Result<()> {
    if theta_deg.is_finite() && (-90.0..=90.0).contains(&theta_deg) {
        Ok(())
    } else {
        Err(Error::AngleOutOfRange(theta_deg))
    }
}

/// Array response `exp(-j 2 pi d_i / lambda sin(theta))` for every sensor.
pub fn steering_vector(geometry: &ArrayGeometry, theta_deg: f64) -> Result<DVector<Complex64>> {
    check_angle(theta_deg)?;
    let phi = geometry.phase_per_unit(theta_deg);
    Ok(DVector::from_iterator(
        geometry.num_sensors(),
        geometry
            .positions()
            .iter()
            .map(|&p| Complex64::cis(-phi * p as f64)),
    ))
}

/// `N x K` manifold with one steering vector per column.
pub fn steering_matrix(geometry: &ArrayGeometry, doas_deg: &[f64]) -> Result<CMatrix> {
    let mut a = CMatrix::zeros(geometry.num_sensors(), doas_deg.len());
    for (k, &theta) in doas_deg.iter().enumerate() {
        a.set_column(k, &steering_vector(geometry, theta)?);
    }
    Ok(a)
}

/// How a source's variance evolves over time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PowerModel {
    /// Stationary source at its nominal power.
    Constant,
    /// Variance held constant over segments whose lengths are uniform on
    /// `[ceil(L/2), floor(3L/2)]`. Each segment's power is the nominal power
    /// times a factor uniform on `[low, high]`, rescaled so the factor has
    /// unit mean.
    QuasiStationary { low: f64, high: f64 },
}

impl Default for PowerModel {
    fn default() -> Self {
        PowerModel::QuasiStationary { low: 0.5, high: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceScenario {
    pub doas: Vec<f64>,
    pub nominal_power: f64,
    pub power_model: PowerModel,
    pub seed: u64,
    pub snapshots: usize,
    pub frame_length: usize,
}

impl SourceScenario {
    pub fn new(doas: Vec<f64>, snapshots: usize, frame_length: usize, seed: u64) -> Self {
        Self {
            doas,
            nominal_power: 1.0,
            power_model: PowerModel::default(),
            seed,
            snapshots,
            frame_length,
        }
    }

    pub fn with_power_model(mut self, model: PowerModel) -> Self {
        self.power_model = model;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn num_sources(&self) -> usize {
        self.doas.len()
    }

    pub fn frames(&self) -> usize {
        self.snapshots / self.frame_length.max(1)
    }

    /// An empty DOA list is accepted and yields noise-only data.
    pub fn validate(&self) -> Result<()> {
        for &d in &self.doas {
            check_angle(d)?;
        }
        let mut sorted = self.doas.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidScenario("DOAs must be distinct".into()));
        }
        if self.frame_length == 0 || self.snapshots == 0 {
            return Err(Error::InvalidScenario(
                "snapshot count and frame length must be positive".into(),
            ));
        }
        if !self.snapshots.is_multiple_of(self.frame_length) {
            return Err(Error::FrameLength {
                snapshots: self.snapshots,
                frame_length: self.frame_length,
            });
        }
        if !(self.nominal_power.is_finite() && self.nominal_power > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "nominal power must be positive, got {}",
                self.nominal_power
            )));
        }
        if let PowerModel::QuasiStationary { low, high } = self.power_model {
            if !(low > 0.0 && high >= low && high.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "power factor range [{low}, {high}] is invalid"
                )));
            }
        }
        Ok(())
    }
}

/// Per-frame, per-source ensemble powers (`M x K`).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile(pub DMatrix<f64>);

impl PowerProfile {
    pub fn frames(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_sources(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Diagonal of `D_m`.
    pub fn frame_powers(&self, m: usize) -> Vec<f64> {
        self.0.row(m).iter().copied().collect()
    }
}

/// Noise variance, either shared by all sensors or given per sensor.
#[derive(Debug, Clone, PartialEq)]
pub enum NoisePower {
    White(f64),
    PerSensor(Vec<f64>),
}

impl NoisePower {
    /// Noise power for a target SNR in dB relative to `signal_power`.
    pub fn from_snr_db(snr_db: f64, signal_power: f64) -> Self {
        NoisePower::White(signal_power * 10f64.powf(-snr_db / 10.0))
    }

    pub fn diagonal(&self, n: usize) -> Result<Vec<f64>> {
        let d = match self {
            NoisePower::White(s) => vec![*s; n],
            NoisePower::PerSensor(v) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "{} noise variances for {n} sensors",
                        v.len()
                    )));
                }
                v.clone()
            }
        };
        if let Some(&bad) = d.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return Err(Error::NegativeNoisePower(bad));
        }
        Ok(d)
    }
}

/// Sensors x time snapshot matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix(pub CMatrix);

impl SnapshotMatrix {
    pub fn num_sensors(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_snapshots(&self) -> usize {
        self.0.ncols()
    }

    pub fn data(&self) -> &CMatrix {
        &self.0
    }

    /// One line per snapshot: `t,re_1,im_1,...,re_N,im_N`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.num_sensors();
        write!(out, "t")?;
        for i in 1..=n {
            write!(out, ",re_{i},im_{i}")?;
        }
        writeln!(out)?;
        for (t, col) in self.0.column_iter().enumerate() {
            write!(out, "{t}")?;
            for z in col.iter() {
                write!(out, ",{:e},{:e}", z.re, z.im)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// `M` local covariance matrices of size `N x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCovariances {
    pub matrices: Vec<CMatrix>,
    pub frame_length: usize,
}

impl FrameCovariances {
    pub fn frames(&self) -> usize {
        self.matrices.len()
    }

    pub fn num_sensors(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.nrows())
    }
}

fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn variance_track<R: Rng>(scenario: &SourceScenario, rng: &mut R) -> Vec<f64> {
    let t_total = scenario.snapshots;
    match scenario.power_model {
        PowerModel::Constant => vec![scenario.nominal_power; t_total],
        PowerModel::QuasiStationary { low, high } => {
            let l = scenario.frame_length;
            let min_len = l.div_ceil(2).max(1);
            let max_len = (3 * l / 2).max(min_len);
            let mean_factor = 0.5 * (low + high);
            let mut track = Vec::with_capacity(t_total);
            while track.len() < t_total {
                let len = rng.random_range(min_len..=max_len);
                let factor = if high > low {
                    rng.random_range(low..=high)
                } else {
                    low
                };
                let p = scenario.nominal_power * factor / mean_factor;
                let end = (track.len() + len).min(t_total);
                track.resize(end, p);
            }
            track
        }
    }
}

fn profile_from_tracks(tracks: &[Vec<f64>], frame_length: usize, frames: usize) -> PowerProfile {
    let mut psi = DMatrix::zeros(frames, tracks.len());
    for (k, track) in tracks.iter().enumerate() {
        for m in 0..frames {
            let frame = &track[m * frame_length..(m + 1) * frame_length];
            psi[(m, k)] = frame.iter().sum::<f64>() / frame_length as f64;
        }
    }
    PowerProfile(psi)
}

/// Draws `K x T` circular complex Gaussian source signals together with the
/// per-frame ensemble powers they were generated with.
pub fn generate_sources(scenario: &SourceScenario) -> Result<(CMatrix, PowerProfile)> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let (s, profile) = draw_sources(scenario, &mut rng);
    Ok((s, profile))
}

fn draw_sources<R: Rng>(scenario: &SourceScenario, rng: &mut R) -> (CMatrix, PowerProfile) {
    let k = scenario.num_sources();
    let t_total = scenario.snapshots;
    let mut tracks = Vec::with_capacity(k);
    let mut s = CMatrix::zeros(k, t_total);
    for src in 0..k {
        let track = variance_track(scenario, rng);
        for t in 0..t_total {
            s[(src, t)] = complex_normal(rng) * track[t].sqrt();
        }
        tracks.push(track);
    }
    let profile = profile_from_tracks(&tracks, scenario.frame_length, scenario.frames());
    (s, profile)
}

/// Simulates `X = A S + V` with spatially white (possibly nonuniform) noise.
///
/// Source draws precede noise draws in the random stream, so two runs that
/// differ only in noise power see the same source waveforms and the same
/// unit-variance noise realization.
pub fn generate_snapshots(
    geometry: &ArrayGeometry,
    scenario: &SourceScenario,
    noise: &NoisePower,
) -> Result<(SnapshotMatrix, PowerProfile)> {
    scenario.validate()?;
    let n = geometry.num_sensors();
    let sigma: Vec<f64> = noise.diagonal(n)?.into_iter().map(f64::sqrt).collect();
    let a = steering_matrix(geometry, &scenario.doas)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let (s, profile) = draw_sources(scenario, &mut rng);
    let mut x = if scenario.num_sources() > 0 {
        &a * &s
    } else {
        CMatrix::zeros(n, scenario.snapshots)
    };
    for mut col in x.column_iter_mut() {
        for (i, z) in col.iter_mut().enumerate() {
            *z += complex_normal(&mut rng) * sigma[i];
        }
    }
    Ok((SnapshotMatrix(x), profile))
}

/// Frame-wise sample covariances `(1/L) sum x(t) x(t)^H`.
///
/// Only the upper triangle is accumulated; the lower one is its conjugate, so
/// every estimate is exactly Hermitian with a real diagonal.
pub fn local_covariances(x: &SnapshotMatrix, frame_length: usize) -> Result<FrameCovariances> {
    let t_total = x.num_snapshots();
    if frame_length == 0 || !t_total.is_multiple_of(frame_length) || t_total == 0 {
        return Err(Error::FrameLength {
            snapshots: t_total,
            frame_length,
        });
    }
    let n = x.num_sensors();
    let frames = t_total / frame_length;
    let scale = 1.0 / frame_length as f64;
    let data = x.data();
    let mut matrices = Vec::with_capacity(frames);
    for m in 0..frames {
        let mut r = CMatrix::zeros(n, n);
        for t in m * frame_length..(m + 1) * frame_length {
            let col = data.column(t);
            for q in 0..n {
                let xq = col[q].conj();
                for p in 0..=q {
                    r[(p, q)] += col[p] * xq;
                }
            }
        }
        for q in 0..n {
            r[(q, q)] = Complex64::new(r[(q, q)].re * scale, 0.0);
            for p in 0..q {
                let v = r[(p, q)] * scale;
                r[(p, q)] = v;
                r[(q, p)] = v.conj();
            }
        }
        matrices.push(r);
    }
    Ok(FrameCovariances {
        matrices,
        frame_length,
    })
}

/// Ensemble covariances `R_m = A D_m A^H + diag(noise)`.
pub fn exact_covariances(
    geometry: &ArrayGeometry,
    doas_deg: &[f64],
    profile: &PowerProfile,
    noise_diagonal: &[f64],
) -> Result<FrameCovariances> {
    let n = geometry.num_sensors();
    if profile.num_sources() != doas_deg.len() && profile.frames() > 0 && !doas_deg.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "power profile has {} sources, {} DOAs given",
            profile.num_sources(),
            doas_deg.len()
        )));
    }
    if noise_diagonal.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} noise variances for {n} sensors",
            noise_diagonal.len()
        )));
    }
    if let Some(&bad) = noise_diagonal.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::NegativeNoisePower(bad));
    }
    let a = steering_matrix(geometry, doas_deg)?;
    let mut matrices = Vec::with_capacity(profile.frames());
    for m in 0..profile.frames() {
        let mut r = CMatrix::zeros(n, n);
        for (k, a_k) in a.column_iter().enumerate() {
            let p = profile.0[(m, k)];
            for q in 0..n {
                let aq = a_k[q].conj() * p;
                for i in 0..=q {
                    r[(i, q)] += a_k[i] * aq;
                }
            }
        }
        for q in 0..n {
            r[(q, q)] = Complex64::new(r[(q, q)].re + noise_diagonal[q], 0.0);
            for i in 0..q {
                r[(q, i)] = r[(i, q)].conj();
            }
        }
        matrices.push(r);
    }
    Ok(FrameCovariances {
        matrices,
        frame_length: 0,
    })
}
