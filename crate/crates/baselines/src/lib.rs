//! Monte Carlo evidence estimators used as comparison methods and as ground truth.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod bridge;
mod mcmc;
mod rj;
mod smc;

pub use bridge::{
    bridge_fixed_point, bridge_sampling, bridge_sampling_from_chain, BridgeConfig, BridgeResult, GaussianProposal,
};
pub use mcmc::{posterior_mcmc, ChainConfig, McmcOutput, ADAPT_WINDOW, TARGET_ACCEPTANCE};
pub use rj::{rjmcmc, RjConfig, RjOutput, DEFAULT_JUMP_PROB};
pub use smc::{
    paired_from_log_likelihoods, paired_smc_evidence, smc_evidence, smc_from_log_likelihoods, PairedSmc, SmcEstimate,
    SMC_STREAM,
};
