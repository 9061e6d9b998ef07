//! Real-valued Khatri-Rao subspace DOA estimation on uniform and nested
//! linear arrays.
//!
//! The crate covers array geometry and co-array analysis ([`geometry`]),
//! quasi-stationary source simulation ([`simulate`]), the KR observation
//! pipeline with its noise-annihilating real transform ([`pipeline`]),
//! MUSIC estimation for both the real-valued method and the complex-valued
//! baseline ([`estimator`]) and the experiment harness behind the CLI
//! ([`experiment`]).
//!
//! ```
//! use krdoa::{ArrayGeometry, AngleGrid, Method, VirtualArray};
//! use krdoa::simulate::{generate_snapshots, local_covariances, NoisePower, SourceScenario};
//!
//! let g = ArrayGeometry::nested_proposed(3, 3, 0.5)?;
//! let sc = SourceScenario::new(vec![-20.0, 10.0, 35.0], 20_000, 400, 42);
//! let (x, _) = generate_snapshots(&g, &sc, &NoisePower::from_snr_db(0.0, 1.0))?;
//! let fc = local_covariances(&x, 400)?;
//! let va = VirtualArray::new(&g)?;
//! let result = Method::RealKr.estimate(&fc, &va, 3, &AngleGrid::default())?;
//! assert_eq!(result.peaks.len(), 3);
//! # Ok::<(), krdoa::Error>(())
//! ```

pub mod config;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod geometry;
pub mod pipeline;
pub mod plot;
pub mod simulate;

pub use error::{Error, Result};
pub use estimator::{AngleGrid, Method, NoiseSubspace, Peak, SpectrumResult};
pub use geometry::{ArrayFamily, ArrayGeometry, CoArrayMap};
pub use pipeline::{RealKrMatrix, VirtualArray};
pub use simulate::{FrameCovariances, NoisePower, PowerModel, PowerProfile, SourceScenario};
