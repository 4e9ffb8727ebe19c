//! Seed splitting for sweeps.
//!
//! Every `(d, trial)` pair gets `derive(master, d << 32 | trial)`. That seed generates the task
//! and drives every method on it, so methods compared on a trial see the same data and the
//! active methods share their initial design. Methods and models separate their draws through
//! distinct generator streams.

/// splitmix64 of `seed` combined with `salt`.
pub fn derive(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(master: u64, d: usize, trial: usize) -> u64 {
    derive(master, ((d as u64) << 32) | trial as u64)
}
