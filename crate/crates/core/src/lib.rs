//! Product Riemannian gradient descent (PRGD) for secrecy-sum-rate
//! maximization in cooperative double-IRS assisted MIMO-OFDM links.
//!
//! The crate is organised bottom-up:
//!
//! - [`manifold`]: the complex sphere, the complex circle products and their
//!   product manifold (tangent projection, retraction, metric).
//! - [`objective`]: effective cascaded channels, the log-det secrecy
//!   objective, its Wirtinger gradients and secrecy-rate reporting.
//! - [`optimizer`]: the PRGD loop with Armijo backtracking.
//! - [`channel`]: path-loss and Rayleigh fading generation plus the
//!   NMSE channel-estimation-error injector.
//! - [`baselines`]: the comparison schemes built on the same machinery.
//! - [`harness`]: seeded Monte-Carlo sweeps, CSV persistence and summaries.

pub mod baselines;
pub mod channel;
pub mod error;
pub mod harness;
pub mod manifold;
pub mod objective;
pub mod optimizer;
pub mod seed;
pub mod stats;

mod linalg;

pub use baselines::{SchemeKind, SchemeSpec};
pub use channel::{CeeConfig, SceneGeometry};
pub use error::{Error, Result};
pub use manifold::{BlockMask, IteratePoint, PointShape, TangentVector};
pub use objective::{ChannelSet, SecrecyProblem, SystemConfig};
pub use optimizer::{OptimizerConfig, RunResult, StopReason};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
