//! Active Bayesian-quadrature model selection between two candidate models.
//!
//! Each model's likelihood surface gets a Gaussian-process belief (on the log-likelihood,
//! moment matched back to the likelihood scale). Integrating that belief against the
//! parameter prior gives a Gaussian belief over the model evidence, and the next likelihood
//! evaluation is placed wherever it is expected to be most informative about the posterior
//! probability of model 1.
//!
//! The numerical core (`gp`, `bq`, most of `acquisition`) is generic over [`Scalar`]; the
//! aliases at the crate root fix it to `f64` or `f32`. The active-learning loop works in `f64`.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acquisition;
pub mod bq;
mod error;
pub mod gp;
pub mod linalg;
pub mod optim;
pub mod prior;
pub mod qmc;
mod scalar;
pub mod selection;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type KernelF64 = gp::Kernel<f64>;
pub type KernelF32 = gp::Kernel<f32>;
pub type GaussianProcessF64 = gp::GaussianProcessPosterior<f64>;
pub type GaussianProcessF32 = gp::GaussianProcessPosterior<f32>;
pub type WarpedSurrogateF64 = gp::WarpedSurrogate<f64>;
pub type WarpedSurrogateF32 = gp::WarpedSurrogate<f32>;
pub type ParameterPriorF64 = prior::ParameterPrior<f64>;
pub type EvidenceBeliefF64 = bq::EvidenceBelief<f64>;
pub type EvidenceBeliefF32 = bq::EvidenceBelief<f32>;
pub type JointEvidenceViewF64 = bq::JointEvidenceView<f64>;
pub type PosteriorProbabilityBeliefF64 = acquisition::PosteriorProbabilityBelief<f64>;
pub type MatrixF64 = linalg::Matrix<f64>;
