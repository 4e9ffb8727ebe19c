//! Gaussian-process primitives: kernels, conditioning, hyperparameter fitting and the
//! log-warp used to keep likelihood beliefs positive.

mod fit;
mod kernel;
mod posterior;
mod warp;

pub use fit::{fit_hyperparameters, median_heuristic, FitConfig, FitResult, MeanMode};
pub use kernel::{gram, Kernel, KernelFamily};
pub use posterior::{gp_condition, ConditionConfig, GaussianProcessPosterior, PointPrediction};
pub use warp::{warp_moment_match, WarpedPoint, WarpedSurrogate, Warping};
