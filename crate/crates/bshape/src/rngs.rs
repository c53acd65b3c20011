//! Reproducible random number streams.
//!
//! Every stochastic component draws from a ChaCha8 generator seeded from one
//! master seed plus a stream id, so independent components (chains, the
//! dataset simulator, prior Monte Carlo, predictive checks) never share or
//! race a stream, and a fixed master seed reproduces every output bit for
//! bit regardless of thread count.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

/// Stream ids for the pipeline's independent random consumers.
/// Chains use `CHAIN_BASE + chain_index`.
pub const STREAM_SIMULATE: u64 = 1;
pub const STREAM_PRIOR_MC: u64 = 2;
pub const STREAM_PPC: u64 = 3;
pub const CHAIN_BASE: u64 = 1000;

/// A ChaCha8 generator on (master seed, stream id).
pub fn stream(master_seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

/// Uniform draw on [lo, hi).
pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Beta(alpha, beta) variate by the two-gamma construction:
/// X ~ Gamma(alpha, 1), Y ~ Gamma(beta, 1), X/(X+Y).
pub fn beta<R: Rng>(rng: &mut R, alpha: f64, beta: f64) -> f64 {
    let x = Gamma::new(alpha, 1.0).expect("alpha > 0").sample(rng);
    let y = Gamma::new(beta, 1.0).expect("beta > 0").sample(rng);
    if x + y == 0.0 {
        // both gammas underflowed; fall back to the mean
        return alpha / (alpha + beta);
    }
    x / (x + y)
}

/// Standard normal variate.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}
