//! Experiment harness: spatial spectra, RMSE sweeps, stage timing and the
//! DOF comparison table.

use std::fs;
use std::hint::black_box;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::estimator::{
    complex_observation, music_spectrum, noise_subspace, rmse, Method, Peak, SpectrumResult,
};
use crate::geometry::{
    difference_coarray, dof_formula, mra_dof, ArrayFamily, ArrayGeometry, MRA_DOF_REFERENCE,
};
use crate::pipeline::VirtualArray;
use crate::simulate::{generate_snapshots, local_covariances, FrameCovariances, NoisePower};

/// Simulates one dataset and returns its frame covariances.
pub fn simulate_covariances(
    cfg: &ExperimentConfig,
    geometry: &ArrayGeometry,
    seed: u64,
    snr_db: f64,
) -> Result<FrameCovariances> {
    let scenario = cfg.scenario_for(seed);
    let noise = NoisePower::from_snr_db(snr_db, scenario.nominal_power);
    let (x, _) = generate_snapshots(geometry, &scenario, &noise)?;
    local_covariances(&x, scenario.frame_length)
}

#[derive(Debug, Clone)]
pub struct SpectrumEntry {
    pub geometry: String,
    pub method: Method,
    pub result: SpectrumResult,
}

#[derive(Debug, Clone)]
pub struct SpectrumRun {
    pub truth: Vec<f64>,
    pub snr_db: f64,
    pub entries: Vec<SpectrumEntry>,
}

impl SpectrumRun {
    pub fn entry(&self, geometry: &str, method: Method) -> Option<&SpectrumEntry> {
        self.entries
            .iter()
            .find(|e| e.geometry == geometry && e.method == method)
    }
}

/// One spectrum per (geometry, method) on a single seeded dataset per
/// geometry, at the first configured SNR.
pub fn run_spectrum(cfg: &ExperimentConfig) -> Result<SpectrumRun> {
    cfg.validate()?;
    let snr_db = cfg.scenario.snr_db[0];
    let k = cfg.scenario.doas.len();
    let mut entries = Vec::new();
    for geometry in cfg.build_geometries()? {
        let fc = simulate_covariances(cfg, &geometry, cfg.seed, snr_db)?;
        let array = VirtualArray::new(&geometry)?;
        for &method in &cfg.methods {
            entries.push(SpectrumEntry {
                geometry: geometry.label().to_string(),
                method,
                result: method.estimate(&fc, &array, k, &cfg.grid)?,
            });
        }
    }
    Ok(SpectrumRun {
        truth: cfg.scenario.doas.clone(),
        snr_db,
        entries,
    })
}

#[derive(Debug, Serialize)]
struct PeakRecord<'a> {
    geometry: &'a str,
    method: &'a str,
    angle_deg: f64,
    height: f64,
}

/// Writes `spectrum_<geometry>_<method>.csv` files and `peaks.json`.
pub fn write_spectrum_outputs(run: &SpectrumRun, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut records = Vec::new();
    for e in &run.entries {
        let path = dir.join(format!("spectrum_{}_{}.csv", e.geometry, e.method.tag()));
        e.result.write_csv(fs::File::create(&path)?)?;
        written.push(path);
        records.extend(e.result.peaks.iter().map(|p: &Peak| PeakRecord {
            geometry: &e.geometry,
            method: e.method.tag(),
            angle_deg: p.angle,
            height: p.height,
        }));
    }
    let path = dir.join("peaks.json");
    let json = serde_json::to_string_pretty(&records).expect("peak records serialize");
    fs::write(&path, json + "\n")?;
    written.push(path);
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmseRow {
    pub snr_db: f64,
    pub geometry: String,
    pub method: Method,
    pub rmse_deg: f64,
    pub trials: usize,
}

/// Single-source RMSE sweep. Trial `t` uses seed `seed + t` at every SNR and
/// on every geometry, and every trial enters the RMSE, outliers included.
pub fn run_rmse(cfg: &ExperimentConfig) -> Result<Vec<RmseRow>> {
    cfg.validate()?;
    if cfg.scenario.doas.len() != 1 {
        return Err(Error::Config(format!(
            "rmse needs exactly one source in `scenario.doas`, got {}",
            cfg.scenario.doas.len()
        )));
    }
    let truth = cfg.scenario.doas[0];
    let geometries = cfg.build_geometries()?;
    let arrays = geometries
        .iter()
        .map(VirtualArray::new)
        .collect::<Result<Vec<_>>>()?;
    let snrs = &cfg.scenario.snr_db;
    let methods = &cfg.methods;

    // estimates[trial][geometry][snr][method]
    let estimates: Vec<Vec<Vec<Vec<f64>>>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = cfg.seed.wrapping_add(t);
            geometries
                .iter()
                .zip(&arrays)
                .map(|(g, array)| {
                    snrs.iter()
                        .map(|&snr| {
                            let fc = simulate_covariances(cfg, g, seed, snr)?;
                            methods
                                .iter()
                                .map(|m| Ok(m.spectrum(&fc, array, 1, &cfg.grid)?.argmax()))
                                .collect::<Result<Vec<f64>>>()
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (gi, g) in geometries.iter().enumerate() {
        for (mi, &method) in methods.iter().enumerate() {
            for (si, &snr) in snrs.iter().enumerate() {
                let est: Vec<f64> = estimates.iter().map(|e| e[gi][si][mi]).collect();
                rows.push(RmseRow {
                    snr_db: snr,
                    geometry: g.label().to_string(),
                    method,
                    rmse_deg: rmse(&est, truth)?,
                    trials: est.len(),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_rmse_csv<W: Write>(rows: &[RmseRow], mut out: W) -> Result<()> {
    writeln!(out, "snr_db,geometry,method,rmse_deg,trials")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.6},{}",
            r.snr_db,
            r.geometry,
            r.method.tag(),
            r.rmse_deg,
            r.trials
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingStats {
    pub median_ms: f64,
    pub q1_ms: f64,
    pub q3_ms: f64,
}

impl TimingStats {
    fn from_samples(mut ms: Vec<f64>) -> Self {
        ms.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (ms.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            ms[lo] + (ms[hi] - ms[lo]) * (pos - lo as f64)
        };
        Self {
            median_ms: q(0.5),
            q1_ms: q(0.25),
            q3_ms: q(0.75),
        }
    }

    pub fn iqr_ms(&self) -> f64 {
        self.q3_ms - self.q1_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchEntry {
    pub geometry: String,
    pub method: Method,
    pub rows: usize,
    pub svd: TimingStats,
    pub search: TimingStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub repeats: usize,
    pub warmup: usize,
    pub grid_points: usize,
    pub entries: Vec<BenchEntry>,
    pub environment: String,
}

impl BenchReport {
    pub fn entry(&self, geometry: &str, method: Method) -> Option<&BenchEntry> {
        self.entries
            .iter()
            .find(|e| e.geometry == geometry && e.method == method)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "geometry,method,rows,svd_median_ms,svd_iqr_ms,search_median_ms,search_iqr_ms,repeats"
        )?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
                e.geometry,
                e.method.tag(),
                e.rows,
                e.svd.median_ms,
                e.svd.iqr_ms(),
                e.search.median_ms,
                e.search.iqr_ms(),
                self.repeats
            )?;
        }
        Ok(())
    }

    pub fn format_table(&self) -> String {
        let mut s = format!(
            "{:<14} {:<11} {:>12} {:>14}\n",
            "geometry", "method", "svd (ms)", "search (ms)"
        );
        for e in &self.entries {
            s += &format!(
                "{:<14} {:<11} {:>12.4} {:>14.3}\n",
                e.geometry,
                e.method.tag(),
                e.svd.median_ms,
                e.search.median_ms
            );
        }
        s
    }
}

fn time_ms<F: FnMut()>(warmup: usize, repeats: usize, mut f: F) -> TimingStats {
    for _ in 0..warmup {
        f();
    }
    let samples = (0..repeats)
        .map(|_| {
            let t0 = Instant::now();
            f();
            t0.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    TimingStats::from_samples(samples)
}

/// Times the SVD and the spectral search separately for every configured
/// (geometry, method) on identical data. Runs on the calling thread; data
/// generation and observation building are outside both timed regions.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let repeats = cfg.bench.repeats;
    if repeats < 30 {
        return Err(Error::Config(format!(
            "bench needs at least 30 repeats, got {repeats}"
        )));
    }
    let warmup = cfg.bench.warmup;
    let k = cfg.scenario.doas.len();
    let mut entries = Vec::new();
    for geometry in cfg.build_geometries()? {
        let fc = simulate_covariances(cfg, &geometry, cfg.seed, cfg.scenario.snr_db[0])?;
        let array = VirtualArray::new(&geometry)?;
        for &method in &cfg.methods {
            let (rows, svd, search) = match method {
                Method::RealKr => {
                    let obs = array.real_observation(&fc)?.0;
                    let un = noise_subspace(&obs, k)?;
                    let svd = time_ms(warmup, repeats, || {
                        black_box(noise_subspace(black_box(&obs), k).ok());
                    });
                    let search = time_ms(warmup, repeats, || {
                        black_box(music_spectrum(black_box(&un), &array, &cfg.grid).ok());
                    });
                    (obs.nrows(), svd, search)
                }
                Method::ComplexKr => {
                    let obs = complex_observation(&fc, &array)?;
                    let un = noise_subspace(&obs, k)?;
                    let svd = time_ms(warmup, repeats, || {
                        black_box(noise_subspace(black_box(&obs), k).ok());
                    });
                    let search = time_ms(warmup, repeats, || {
                        black_box(music_spectrum(black_box(&un), &array, &cfg.grid).ok());
                    });
                    (obs.nrows(), svd, search)
                }
            };
            entries.push(BenchEntry {
                geometry: geometry.label().to_string(),
                method,
                rows,
                svd,
                search,
            });
        }
    }
    Ok(BenchReport {
        repeats,
        warmup,
        grid_points: cfg.grid.len(),
        entries,
        environment: format!(
            "{} {}, {} logical cpus, single-threaded timing",
            std::env::consts::OS,
            std::env::consts::ARCH,
            std::thread::available_parallelism().map_or(1, |n| n.get())
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DofRow {
    pub n1: usize,
    pub n2: usize,
    pub mra: usize,
    pub coprime: usize,
    pub ula_kr: usize,
    pub pal: usize,
    pub proposed: usize,
    /// Distinct lags counted on the constructed proposed array.
    pub proposed_enumerated: usize,
}

/// DOF comparison for the tabulated sensor splits. The proposed column is
/// checked against co-array enumeration.
pub fn run_dof_table() -> Result<Vec<DofRow>> {
    MRA_DOF_REFERENCE
        .iter()
        .map(|&((n1, n2), mra)| {
            let proposed = dof_formula(ArrayFamily::ProposedNested, n1, n2)?;
            let enumerated =
                difference_coarray(&ArrayGeometry::nested_proposed(n1, n2, 0.5)?).dof();
            if enumerated != proposed {
                return Err(Error::InvalidGeometry(format!(
                    "{n1}+{n2}: enumeration gives {enumerated} lags, formula {proposed}"
                )));
            }
            debug_assert_eq!(mra_dof(n1, n2), Some(mra));
            Ok(DofRow {
                n1,
                n2,
                mra,
                coprime: dof_formula(ArrayFamily::Coprime, n1, n2)?,
                ula_kr: dof_formula(ArrayFamily::UlaKr, n1, n2)?,
                pal: dof_formula(ArrayFamily::PalNested, n1, n2)?,
                proposed,
                proposed_enumerated: enumerated,
            })
        })
        .collect()
}

pub fn format_dof_table(rows: &[DofRow]) -> String {
    let mut s = format!(
        "{:<7} {:>5} {:>8} {:>8} {:>6} {:>9}\n",
        "N1+N2", "MRA", "coprime", "ULA-KR", "Pal", "proposed"
    );
    for r in rows {
        s += &format!(
            "{:<7} {:>5} {:>8} {:>8} {:>6} {:>9}\n",
            format!("{}+{}", r.n1, r.n2),
            r.mra,
            r.coprime,
            r.ula_kr,
            r.pal,
            r.proposed
        );
    }
    s
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a ExperimentConfig,
    outputs: Vec<String>,
}

/// Writes `manifest.json` next to the outputs of a run.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    outputs: &[PathBuf],
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: cfg,
        outputs: outputs
            .iter()
            .map(|p| {
                p.file_name()
                    .map_or_else(|| p.display().to_string(), |f| f.to_string_lossy().into_owned())
            })
            .collect(),
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n")?;
    Ok(path)
}
