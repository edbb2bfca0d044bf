//! Unsupervised LoRA adapter routing by activation-norm maximization.
//!
//! Given a library of low-rank adapters `{B_i A_i}` and an input vector `x`,
//! the routing problem is to find `argmax_i ||B_i A_i x||_2` without touching
//! any training data. This crate implements the family of scoring methods
//! built around that objective (naive, arrow, spectral, two-stage, QR-based,
//! and mean-merge), along with synthetic library generation, z-score
//! calibration, analytic and instrumented cost models, and a bit-exact
//! container format for adapter libraries.
//!
//! ```
//! use seqr_core::adapter::LibraryBundle;
//! use seqr_core::routing::{self, Method};
//! use seqr_core::synthgen::{self, SynthSpec};
//!
//! let spec = SynthSpec {
//!     seed: 1,
//!     n_adapters: 4,
//!     m: 16,
//!     n: 32,
//!     r: 4,
//!     shared_a: true,
//!     task_subspace_dim: 2,
//!     signal_gain: 3.0,
//!     noise_level: 0.0,
//!     bias_scales: None,
//! };
//! let library = synthgen::gen_library(&spec)?;
//! let queries = synthgen::gen_queries(&library, &spec, 5)?;
//!
//! let mut bundle = LibraryBundle::new(library);
//! bundle.forms.seqr = Some(bundle.library.build_seqr_forms()?);
//!
//! // QR scoring finds the norm-maximizing adapter for every query.
//! for q in &queries {
//!     let decision = routing::route(&bundle, Method::Seqr, &q.x, 1, None)?;
//!     assert_eq!(decision.selected, q.oracle_norm_winner);
//! }
//! # Ok::<(), seqr_core::Error>(())
//! ```

pub mod adapter;
pub mod calibration;
pub mod cost;
pub mod error;
pub mod linalg;
pub mod routing;
pub mod synthgen;

pub use adapter::{
    AdapterLibrary, ArrowForm, LibraryBundle, LoraAdapter, RoutedForms, SeqrForm, SpectrForm,
};
pub use calibration::CalibrationStats;
pub use error::Error;
pub use linalg::{Matrix, ReducedQr, ThinSvd, Vector};
pub use routing::{BaseLayer, Method, RoutingDecision};
pub use synthgen::{LabeledQuery, SynthSpec};
