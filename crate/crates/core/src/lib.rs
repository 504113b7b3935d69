//! Laboratory for non-separable approximate message passing (AMP).
//!
//! The crate is organised bottom-up:
//!
//! * [`ensembles`]: seeded random matrices, signals and noise, plus moment checks.
//! * [`denoisers`]: separable, local, spectral and anisotropic non-linearities
//!   with analytic or Monte-Carlo divergences.
//! * [`amp`]: the symmetric, rectangular and sensing AMP recursions, the
//!   change-of-variables identity and the symmetric embedding.
//! * [`state_evolution`]: Monte-Carlo state evolution and Onsager schedules.
//! * [`tensor_net`]: ordered-multigraph tensor networks, Wick's rule, BCP
//!   ratios, alternating tensors and the colored-cycle component bound.
//! * [`harness`]: config-driven experiments producing CSV/JSON records.
//!
//! Vectors are `nalgebra::DVector<f64>`. Matrix-valued signals use the
//! column-major identification `vec(X)[j + j'·M] = X[j, j']`, which is also
//! nalgebra's storage order.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amp;
pub mod denoisers;
pub mod ensembles;
pub mod error;
pub mod harness;
pub mod state_evolution;
pub mod tensor_net;

pub use error::{Error, Result};
