//! # creativity-cert
//!
//! Statistical creativity metrics and the sample-size certificates built on
//! them, together with synthetic creator worlds whose ground truth is known
//! exactly so the probabilistic guarantees can be checked by enumeration.
//!
//! ## Layout
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`distributions`] | exact finite distributions: entropy, KL, smoothing, sampling |
//! | [`world`] | creator universes with order-ω Markov creation laws |
//! | [`scoring`] | next-token scorers, windowed sequence NLL, external scorer adapter |
//! | [`metrics`] | E0–E3 and the entropy weights r(·), r_min |
//! | [`certificates`] | δ-creativity decision procedures, inversions, generalization bound |
//! | [`evaluator`] | KL-threshold evaluator and exact population oracles |
//! | [`simharness`] | Monte Carlo coverage, training and marginalization experiments |
//! | [`fixtures`] | the named worlds used by tests and bundled configs |
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases below fix the scalar to `f64`, which is what the CLI and the
//! experiments use.
//!
//! ```
//! use creativity_cert::{Distribution, certificates};
//!
//! let d = Distribution::new(vec![0.5, 0.25, 0.25]).unwrap();
//! assert!((d.entropy() - 1.0397207708399179).abs() < 1e-12);
//!
//! let n = certificates::min_n_theorem1(0.05, 0.1, 0.05).unwrap();
//! assert_eq!(n, 600);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod distributions;
mod error;
pub mod evaluator;
pub mod fixtures;
pub mod metrics;
mod scalar;
pub mod scoring;
pub mod simharness;
pub mod world;

pub use error::{Error, Result};
pub use scalar::{neumaier_sum, pairwise_sum, Scalar};

pub use distributions::FiniteDistribution;
pub use world::{Creation, Creator, Info, Prompt, Token, WorldConfig, WorldSpec};

/// Double-precision distribution.
pub type Distribution = distributions::FiniteDistribution<f64>;
/// Single-precision distribution.
pub type Distribution32 = distributions::FiniteDistribution<f32>;
/// Double-precision world.
pub type World = world::WorldSpec<f64>;
/// Single-precision world.
pub type World32 = world::WorldSpec<f32>;
pub type Metric = metrics::MetricValue<f64>;
pub type Certificate = certificates::CertificateResult<f64>;
pub type Nll = scoring::NllBreakdown<f64>;
pub type Coverage = simharness::CoverageReport;
