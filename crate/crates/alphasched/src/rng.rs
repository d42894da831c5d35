//! Deterministic random-stream derivation.
//!
//! Every random quantity in a Monte Carlo experiment is drawn from its own
//! ChaCha8 stream keyed by (base seed, replication, purpose, machine, job).
//! This makes results independent of evaluation order and lets any single
//! draw be reproduced in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Processing-time realization streams.
pub const PURPOSE_PROC: u64 = 0;
/// Alpha draws of randomized policies (machine field fixed to 0).
pub const PURPOSE_ALPHA: u64 = 1;
/// Instance-generator streams.
pub const PURPOSE_GEN: u64 = 2;

/// Derive the stream for one (replication, purpose, machine, job) cell.
pub fn stream(base_seed: u64, rep: u64, purpose: u64, machine: u32, job: u32) -> ChaCha8Rng {
    let words = [
        base_seed,
        rep,
        purpose,
        ((machine as u64) << 32) | job as u64,
    ];
    let mut seed = [0u8; 32];
    for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Stream for the processing time of `job` on `machine` in replication `rep`.
pub fn proc_stream(base_seed: u64, rep: u64, machine: u32, job: u32) -> ChaCha8Rng {
    stream(base_seed, rep, PURPOSE_PROC, machine, job)
}

/// Stream for the alpha draw of `job` in replication `rep`.
pub fn alpha_stream(base_seed: u64, rep: u64, job: u32) -> ChaCha8Rng {
    stream(base_seed, rep, PURPOSE_ALPHA, 0, job)
}
