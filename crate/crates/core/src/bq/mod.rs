//! Bayesian quadrature: Gaussian beliefs over model evidences and their joint conditioning.

mod evidence;
mod joint;

pub use evidence::{
    evidence_belief, evidence_belief_closed_form, EvidenceBelief, ProfilePoint, QuadConfig, QuadratureNodes,
    MIN_QUADRATURE_NODES,
};
pub use joint::{
    conditional_likelihood_entropy, information_from_moments, joint_view, pivot_moments, pivot_moments_raw,
    pivot_weight, JointEvidenceView, ModelIndex, CONDITIONAL_VARIANCE_FLOOR, MAX_LOG_RATIO,
};
