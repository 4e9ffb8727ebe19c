//! Acquisition functions over the two models' likelihood surfaces and their maximizer.

mod entropy;
mod mi;
mod optimize;
mod z1;

pub use entropy::{binary_entropy, GaussHermite};
pub use mi::{
    expected_conditional_model_choice_entropy, expected_probit_entropy, mi_model_choice, mi_model_choice_from_profile,
    mi_z1, mi_z1_from_profile, model_choice_entropy, prob_first_larger,
};
pub use optimize::{
    choose_model, maximize, select_next, select_next_model_choice, uncertainty_sampling, uncertainty_score,
    AcquisitionResult, Candidate, OptConfig,
};
pub use z1::{sample_z1, sample_z1_moments, PosteriorProbabilityBelief, MIN_Z1_SAMPLES};
