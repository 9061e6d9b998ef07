//! Experiment configuration.
//!
//! Config files are TOML. Every field is optional; missing fields fall back
//! to the defaults of the subcommand being run. Example:
//!
//! ```toml
//! seed = 7
//! trials = 200
//! methods = ["real-kr", "complex-kr"]
//!
//! [grid]
//! step = 0.05
//!
//! [scenario]
//! doas = [-50.0, -40.0, -15.0, 0.0, 30.0, 35.0, 40.0]
//! snapshots = 20000
//! frame_length = 400
//! snr_db = [0.0]
//!
//! [[geometries]]
//! family = "ula"
//! n = 6
//!
//! [[geometries]]
//! family = "explicit"
//! positions = [0, 1, 2, 6, 9, 12]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{AngleGrid, Method};
use crate::geometry::ArrayGeometry;
use crate::simulate::{PowerModel, SourceScenario};

/// Geometry given either by family and sizes or by explicit lattice positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum GeometrySpec {
    Ula { n: usize },
    NestedProposed { n1: usize, n2: usize },
    NestedPal { n1: usize, n2: usize },
    Explicit { positions: Vec<i64> },
}

impl GeometrySpec {
    pub fn build(&self, base_spacing: f64, wavelength: f64) -> Result<ArrayGeometry> {
        let g = match self {
            GeometrySpec::Ula { n } => ArrayGeometry::ula(*n, base_spacing)?,
            GeometrySpec::NestedProposed { n1, n2 } => {
                ArrayGeometry::nested_proposed(*n1, *n2, base_spacing)?
            }
            GeometrySpec::NestedPal { n1, n2 } => ArrayGeometry::nested_pal(*n1, *n2, base_spacing)?,
            GeometrySpec::Explicit { positions } => {
                ArrayGeometry::from_positions(positions.clone(), base_spacing)?
            }
        };
        g.with_wavelength(wavelength)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub doas: Vec<f64>,
    pub snapshots: usize,
    pub frame_length: usize,
    pub snr_db: Vec<f64>,
    pub power_model: PowerModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub repeats: usize,
    pub warmup: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            repeats: 100,
            warmup: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub grid: AngleGrid,
    pub scenario: ScenarioConfig,
    pub geometries: Vec<GeometrySpec>,
    pub base_spacing: f64,
    pub wavelength: f64,
    pub bench: BenchConfig,
}

pub const SEVEN_SOURCE_DOAS: [f64; 7] = [-50.0, -40.0, -15.0, 0.0, 30.0, 35.0, 40.0];

fn default_geometries() -> Vec<GeometrySpec> {
    vec![
        GeometrySpec::Ula { n: 6 },
        GeometrySpec::NestedProposed { n1: 3, n2: 3 },
    ]
}

impl ExperimentConfig {
    /// Seven-source underdetermined scenario at 0 dB.
    pub fn spectrum_default() -> Self {
        Self {
            seed: 1,
            trials: 1,
            methods: Method::ALL.to_vec(),
            grid: AngleGrid::default(),
            scenario: ScenarioConfig {
                doas: SEVEN_SOURCE_DOAS.to_vec(),
                snapshots: 20_000,
                frame_length: 400,
                snr_db: vec![0.0],
                power_model: PowerModel::default(),
            },
            geometries: default_geometries(),
            base_spacing: 0.5,
            wavelength: 1.0,
            bench: BenchConfig::default(),
        }
    }

    /// Single source at 15 deg, SNR swept from -10 to 14 dB.
    pub fn rmse_default() -> Self {
        let mut c = Self::spectrum_default();
        c.trials = 200;
        c.scenario.doas = vec![15.0];
        c.scenario.snr_db = (-10..=14).step_by(2).map(f64::from).collect();
        c
    }

    pub fn bench_default() -> Self {
        Self::spectrum_default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Config("`trials` must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config(
                "`methods` is empty; choose from \"real-kr\", \"complex-kr\"".into(),
            ));
        }
        if self.geometries.is_empty() {
            return Err(Error::Config("no `[[geometries]]` configured".into()));
        }
        if self.scenario.snr_db.is_empty() {
            return Err(Error::Config("`scenario.snr_db` is empty".into()));
        }
        if let Some(bad) = self.scenario.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::Config(format!("SNR {bad} is not finite")));
        }
        self.grid
            .validate()
            .map_err(|e| Error::Config(format!("[grid]: {e}")))?;
        for spec in &self.geometries {
            spec.build(self.base_spacing, self.wavelength)
                .map_err(|e| Error::Config(format!("geometry {spec:?}: {e}")))?;
        }
        self.scenario_for(self.seed)
            .validate()
            .map_err(|e| Error::Config(format!("[scenario]: {e}")))?;
        Ok(())
    }

    pub fn build_geometries(&self) -> Result<Vec<ArrayGeometry>> {
        self.geometries
            .iter()
            .map(|g| g.build(self.base_spacing, self.wavelength))
            .collect()
    }

    pub fn scenario_for(&self, seed: u64) -> SourceScenario {
        SourceScenario::new(
            self.scenario.doas.clone(),
            self.scenario.snapshots,
            self.scenario.frame_length,
            seed,
        )
        .with_power_model(self.scenario.power_model)
    }

    /// Overlays the fields present in a TOML document onto `self`.
    pub fn merge_toml(mut self, text: &str) -> Result<Self> {
        let p: PartialConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("cannot parse config: {e}")))?;
        if let Some(v) = p.seed {
            self.seed = v;
        }
        if let Some(v) = p.trials {
            self.trials = v;
        }
        if let Some(v) = p.methods {
            self.methods = v;
        }
        if let Some(g) = p.grid {
            self.grid = AngleGrid {
                start: g.start.unwrap_or(self.grid.start),
                stop: g.stop.unwrap_or(self.grid.stop),
                step: g.step.unwrap_or(self.grid.step),
            };
        }
        if let Some(s) = p.scenario {
            let sc = &mut self.scenario;
            if let Some(v) = s.doas {
                sc.doas = v;
            }
            if let Some(v) = s.snapshots {
                sc.snapshots = v;
            }
            if let Some(v) = s.frame_length {
                sc.frame_length = v;
            }
            if let Some(v) = s.snr_db {
                sc.snr_db = v;
            }
            if let Some(v) = s.power_model {
                sc.power_model = v;
            }
            if let Some(m) = s.frames {
                if sc.frame_length * m != sc.snapshots {
                    return Err(Error::Config(format!(
                        "[scenario]: frames ({m}) x frame_length ({}) must equal snapshots ({})",
                        sc.frame_length, sc.snapshots
                    )));
                }
            }
        }
        if let Some(v) = p.geometries {
            self.geometries = v;
        }
        if let Some(v) = p.base_spacing {
            self.base_spacing = v;
        }
        if let Some(v) = p.wavelength {
            self.wavelength = v;
        }
        if let Some(b) = p.bench {
            self.bench = BenchConfig {
                repeats: b.repeats.unwrap_or(self.bench.repeats),
                warmup: b.warmup.unwrap_or(self.bench.warmup),
            };
        }
        Ok(self)
    }

    pub fn merge_file(self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        self.merge_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialGrid {
    start: Option<f64>,
    stop: Option<f64>,
    step: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialScenario {
    doas: Option<Vec<f64>>,
    snapshots: Option<usize>,
    frame_length: Option<usize>,
    frames: Option<usize>,
    snr_db: Option<Vec<f64>>,
    power_model: Option<PowerModel>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialBench {
    repeats: Option<usize>,
    warmup: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    seed: Option<u64>,
    trials: Option<usize>,
    methods: Option<Vec<Method>>,
    grid: Option<PartialGrid>,
    scenario: Option<PartialScenario>,
    geometries: Option<Vec<GeometrySpec>>,
    base_spacing: Option<f64>,
    wavelength: Option<f64>,
    bench: Option<PartialBench>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for c in [
            ExperimentConfig::spectrum_default(),
            ExperimentConfig::rmse_default(),
            ExperimentConfig::bench_default(),
        ] {
            c.validate().unwrap();
        }
        let c = ExperimentConfig::spectrum_default();
        assert_eq!(c.scenario.snapshots / c.scenario.frame_length, 50);
        assert_eq!(c.grid.len(), 3601);
    }

    #[test]
    fn merges_partial_toml() {
        let text = r#"
            seed = 9
            methods = ["real-kr"]
            [grid]
            step = 0.1
            [scenario]
            doas = [10.0, 20.0]
            frames = 50
            [[geometries]]
            family = "explicit"
            positions = [0, 1, 2, 6, 9, 12]
            [[geometries]]
            family = "nested-pal"
            n1 = 3
            n2 = 2
        "#;
        let c = ExperimentConfig::spectrum_default().merge_toml(text).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.methods, vec![Method::RealKr]);
        assert_eq!(c.grid.step, 0.1);
        assert_eq!(c.grid.start, -90.0);
        assert_eq!(c.scenario.doas, vec![10.0, 20.0]);
        assert_eq!(c.scenario.snapshots, 20_000);
        let geoms = c.build_geometries().unwrap();
        assert_eq!(geoms[0].positions(), &[0, 1, 2, 6, 9, 12]);
        assert_eq!(geoms[1].positions(), &[0, 1, 2, 3, 7]);
        c.validate().unwrap();
    }

    #[test]
    fn actionable_errors() {
        let base = ExperimentConfig::spectrum_default();
        let err = base.clone().merge_toml("[scenario]\nframes = 7").unwrap_err();
        assert!(err.to_string().contains("frames"));
        assert!(base.clone().merge_toml("sead = 1").is_err());
        assert!(base.clone().merge_toml("methods = [\"esprit\"]").is_err());
        let c = base
            .clone()
            .merge_toml("[[geometries]]\nfamily = \"nested-proposed\"\nn1 = 3\nn2 = 1")
            .unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("geometry"));
        let c = base.clone().merge_toml("[scenario]\nframe_length = 333").unwrap();
        assert!(c.validate().is_err());
        let c = base.merge_toml("trials = 0").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = ExperimentConfig::rmse_default();
        let back = ExperimentConfig::spectrum_default().merge_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }
}
