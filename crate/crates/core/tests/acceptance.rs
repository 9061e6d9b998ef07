//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line per criterion and exits non-zero if any failed.
//!
//! Timing-sensitive criteria run single-threaded after the parallel Monte
//! Carlo ones, inside this one process.

use std::process::ExitCode;
use std::time::Instant;

use krdoa::config::{ExperimentConfig, GeometrySpec, SEVEN_SOURCE_DOAS};
use krdoa::estimator::noise_subspace;
use krdoa::experiment::{run_bench, run_dof_table, run_rmse, run_spectrum, simulate_covariances};
use krdoa::geometry::{difference_coarray, dof_formula, ArrayFamily};
use krdoa::pipeline::{real_transform, VirtualArray};
use krdoa::simulate::exact_covariances;
use krdoa::{ArrayGeometry, Method, PowerProfile};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ula6() -> ArrayGeometry {
    ArrayGeometry::ula(6, 0.5).unwrap()
}

fn nested33() -> ArrayGeometry {
    ArrayGeometry::nested_proposed(3, 3, 0.5).unwrap()
}

fn random_profile(frames: usize, k: usize, seed: u64) -> PowerProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PowerProfile(DMatrix::from_fn(frames, k, |_, _| rng.random_range(0.1..3.0)))
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 1. DOF table cells and enumeration cross-check, under one second.
fn dof_table() -> Outcome {
    let start = Instant::now();
    let rows = run_dof_table().map_err(|e| e.to_string())?;
    let want = [
        (3, 2, [6, 9, 15, 19]),
        (5, 2, [10, 13, 23, 31]),
        (5, 3, [15, 15, 35, 41]),
        (7, 3, [21, 19, 47, 57]),
    ];
    for ((n1, n2, cells), r) in want.iter().zip(&rows) {
        let got = [r.coprime, r.ula_kr, r.pal, r.proposed];
        if (r.n1, r.n2) != (*n1, *n2) || got != *cells {
            return Err(format!("row {n1}+{n2}: got {got:?}, want {cells:?}"));
        }
    }
    for n1 in 2..=8 {
        for n2 in 2..=8 {
            let c = difference_coarray(&ArrayGeometry::nested_proposed(n1, n2, 0.5).unwrap());
            let f = dof_formula(ArrayFamily::ProposedNested, n1, n2).unwrap();
            if !c.is_hole_free() || c.dof() != f {
                return Err(format!("{n1}+{n2}: enumerated {} vs formula {f}", c.dof()));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 1.0, format!("4 rows exact, 49 enumerations match, {secs:.3}s"))
}

// 2. Real KR observation is unchanged by any diagonal noise covariance.
fn denoising_invariance() -> Outcome {
    let profile = random_profile(50, 7, 2);
    let mut worst: f64 = 0.0;
    for g in [ula6(), nested33()] {
        let n = g.num_sensors();
        let va = VirtualArray::new(&g).unwrap();
        let obs = |noise: &[f64]| {
            va.real_observation(&exact_covariances(&g, &SEVEN_SOURCE_DOAS, &profile, noise).unwrap())
                .unwrap()
                .0
        };
        let base = obs(&vec![0.0; n]);
        let mut noises: Vec<Vec<f64>> = [1.0, 100.0].iter().map(|&s| vec![s; n]).collect();
        noises.push((0..n).map(|i| 0.25 + 3.0 * i as f64).collect());
        noises.push((0..n).map(|i| if i % 2 == 0 { 50.0 } else { 0.01 }).collect());
        for noise in noises {
            worst = worst.max((obs(&noise) - &base).abs().max());
        }
    }
    check(worst < 1e-12, format!("max abs diff {worst:.3e} (< 1e-12)"))
}

// 3. Exact-covariance null depth at every true DOA beyond N sources.
fn oracle_null_depth() -> Outcome {
    let cases = [
        (ula6(), SEVEN_SOURCE_DOAS.to_vec()),
        (
            nested33(),
            vec![-65.0, -50.0, -37.5, -20.0, -5.0, 10.0, 22.5, 35.0, 50.0, 70.0],
        ),
    ];
    let mut report = Vec::new();
    for (g, doas) in cases {
        let va = VirtualArray::new(&g).unwrap();
        let profile = random_profile(50, doas.len(), 3);
        let fc = exact_covariances(&g, &doas, &profile, &vec![1.0; g.num_sensors()]).unwrap();
        let obs = va.real_observation(&fc).unwrap();
        let un = noise_subspace(&obs.0, doas.len()).map_err(|e| e.to_string())?;
        let worst = doas
            .iter()
            .map(|&t| {
                let b = va.stacked_real_steering(t).unwrap();
                un.projection_norm(&b) / b.norm()
            })
            .fold(0.0, f64::max);
        if worst >= 1e-8 {
            return Err(format!("{} K={}: null {worst:.3e}", g.label(), doas.len()));
        }
        report.push(format!("{} K={} {worst:.1e}", g.label(), doas.len()));
    }
    Ok(format!("worst normalized nulls: {}", report.join(", ")))
}

// 4. Seven-source spectra over 20 seeds.
fn seven_source_spectra() -> Outcome {
    let start = Instant::now();
    let mut nested_ok = 0;
    let mut ula_unresolved = 0;
    let seeds = 20;
    for seed in 0..seeds {
        let mut cfg = ExperimentConfig::spectrum_default();
        cfg.seed = 1000 + seed;
        cfg.methods = vec![Method::RealKr];
        let run = run_spectrum(&cfg).map_err(|e| e.to_string())?;
        let nested = &run.entry("nested-3-3", Method::RealKr).unwrap().result.peaks;
        if nested.len() == 7
            && nested
                .iter()
                .zip(SEVEN_SOURCE_DOAS)
                .all(|(p, t)| (p.angle - t).abs() <= 1.0)
        {
            nested_ok += 1;
        }
        let ula = &run.entry("ula-6", Method::RealKr).unwrap().result.peaks;
        let in_cluster = ula
            .iter()
            .filter(|p| (28.0..=42.0).contains(&p.angle))
            .count();
        if in_cluster < 3 {
            ula_unresolved += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "nested resolves all 7 in {nested_ok}/{seeds} (>= 18), ULA leaves cluster unresolved in {ula_unresolved}/{seeds} (>= 16), {secs:.1}s"
    );
    check(
        nested_ok * 10 >= 9 * seeds && ula_unresolved * 10 >= 8 * seeds && secs < 120.0,
        detail,
    )
}

// 5. Single-source RMSE ordering across the SNR sweep.
fn rmse_ordering() -> Outcome {
    let mut cfg = ExperimentConfig::rmse_default();
    cfg.trials = 200;
    cfg.seed = 5000;
    cfg.scenario.snr_db = vec![-10.0, -5.0, 0.0, 5.0, 10.0];
    let rows = run_rmse(&cfg).map_err(|e| e.to_string())?;
    let series = |geom: &str, m: Method| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.geometry == geom && r.method == m)
            .map(|r| r.rmse_deg)
            .collect()
    };
    let ula = series("ula-6", Method::RealKr);
    let nested = series("nested-3-3", Method::RealKr);
    let ordered = ula.iter().zip(&nested).all(|(u, n)| n < u);
    let monotone = |s: &[f64]| s.windows(2).all(|w| w[1] <= w[0]);
    let detail = format!(
        "real-kr RMSE ula {:.4?} nested {:.4?}; complex-kr ula {:.4?} nested {:.4?}",
        ula,
        nested,
        series("ula-6", Method::ComplexKr),
        series("nested-3-3", Method::ComplexKr)
    );
    check(ordered && monotone(&ula) && monotone(&nested), detail)
}

// 6. Real-KR stages are faster than their complex-KR counterparts.
fn timing_ordering() -> Outcome {
    let mut cfg = ExperimentConfig::bench_default();
    cfg.bench.repeats = 200;
    cfg.bench.warmup = 20;
    let report = run_bench(&cfg).map_err(|e| e.to_string())?;
    let mut ok = report.repeats >= 100 && report.grid_points == 3601;
    let mut parts = Vec::new();
    for geom in ["ula-6", "nested-3-3"] {
        let r = report.entry(geom, Method::RealKr).unwrap();
        let c = report.entry(geom, Method::ComplexKr).unwrap();
        ok &= r.svd.median_ms < c.svd.median_ms && r.search.median_ms < c.search.median_ms;
        parts.push(format!(
            "{geom}: svd {:.4}/{:.4} ms, search {:.3}/{:.3} ms",
            r.svd.median_ms, c.svd.median_ms, r.search.median_ms, c.search.median_ms
        ));
    }
    check(ok, format!("real/complex medians over {} repeats; {}", report.repeats, parts.join("; ")))
}

// 7. Pipeline output equals `[B_R; B_I] Psi^T`, and the real transform
// preserves energy outside lag 0.
fn model_identity() -> Outcome {
    let mut worst_model: f64 = 0.0;
    let mut worst_energy: f64 = 0.0;
    for (g, doas) in [
        (ula6(), SEVEN_SOURCE_DOAS.to_vec()),
        (nested33(), vec![-60.0, -33.0, -8.0, 12.0, 41.0, 77.0]),
    ] {
        let va = VirtualArray::new(&g).unwrap();
        let profile = random_profile(50, doas.len(), 4);
        let fc = exact_covariances(&g, &doas, &profile, &vec![0.7; g.num_sensors()]).unwrap();
        let obs = va.real_observation(&fc).unwrap().0;
        let mut b = DMatrix::zeros(va.real_rows(), doas.len());
        for (k, &t) in doas.iter().enumerate() {
            b.set_column(k, &va.stacked_real_steering(t).unwrap());
        }
        let model = b * profile.0.transpose();
        for (o, m) in obs.iter().zip(model.iter()) {
            worst_model = worst_model.max((o - m).abs() / m.abs().max(1e-300));
        }
        let z = va.reduce(&krdoa::pipeline::vectorize(&fc)).unwrap();
        let out = real_transform(&z).unwrap().0;
        let half = va.max_lag();
        for m in 0..z.ncols() {
            let lhs = out.column(m).norm_squared();
            let rhs = z.column(m).norm_squared() - z[(half, m)].norm_sqr();
            worst_energy = worst_energy.max((lhs - rhs).abs() / rhs);
        }
    }
    check(
        worst_model < 1e-10 && worst_energy < 1e-12,
        format!("max relative model error {worst_model:.2e} (< 1e-10), energy {worst_energy:.2e} (< 1e-12)"),
    )
}

// 8. Real and complex KR peaks agree within one grid step on identical data.
// Each true source is matched to the nearest peak of either method.
fn real_complex_agreement() -> Outcome {
    let cfg = ExperimentConfig::spectrum_default();
    let step = cfg.grid.step;
    let mut parts = Vec::new();
    let mut ok = true;
    for spec in [GeometrySpec::NestedProposed { n1: 3, n2: 3 }, GeometrySpec::Ula { n: 6 }] {
        let g = spec.build(cfg.base_spacing, cfg.wavelength).unwrap();
        let fc = simulate_covariances(&cfg, &g, cfg.seed, 0.0).map_err(|e| e.to_string())?;
        let va = VirtualArray::new(&g).unwrap();
        let real = Method::RealKr.estimate(&fc, &va, 7, &cfg.grid).unwrap().peaks;
        let cplx = Method::ComplexKr.estimate(&fc, &va, 7, &cfg.grid).unwrap().peaks;
        let nearest = |peaks: &[krdoa::Peak], t: f64| {
            peaks
                .iter()
                .map(|p| p.angle)
                .min_by(|a, b| (a - t).abs().total_cmp(&(b - t).abs()))
                .unwrap_or(f64::INFINITY)
        };
        let worst = SEVEN_SOURCE_DOAS
            .iter()
            .map(|&t| (nearest(&real, t) - nearest(&cplx, t)).abs())
            .fold(0.0, f64::max);
        ok &= worst <= step + 1e-9;
        parts.push(format!(
            "{}: {} vs {} peaks, max per-source offset {:.2} deg",
            g.label(),
            real.len(),
            cplx.len(),
            worst
        ));
    }
    check(ok, format!("{} (limit {step} deg)", parts.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 dof-table", dof_table),
        ("2 denoising-invariance", denoising_invariance),
        ("3 oracle-null-depth", oracle_null_depth),
        ("4 seven-source-spectra", seven_source_spectra),
        ("5 rmse-ordering", rmse_ordering),
        ("6 timing-ordering", timing_ordering),
        ("7 pipeline-model-identity", model_identity),
        ("8 real-complex-agreement", real_complex_agreement),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
