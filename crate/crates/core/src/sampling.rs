//! Seeded randomness shared by every stochastic stage.
//!
//! All stochastic results are generated by `ChaCha8Rng`, whose output stream
//! is fixed across platforms. Replicate seeds are derived from a master seed
//! with the SplitMix64 finalizer:
//!
//! ```text
//! state_k = master + (k + 1) * 0x9E37_79B9_7F4A_7C15   (wrapping, k = replicate index)
//! z = state_k
//! z = (z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9
//! z = (z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB
//! seed_k = z ^ (z >> 31)
//! ```
//!
//! which is the k-th output of a SplitMix64 generator started at `master`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// How counts are produced: exact expectations or seeded random draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    Deterministic,
    Stochastic { seed: u64 },
}

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of replicate `index` under `master`; see the module docs.
pub fn replicate_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Converts a real-valued count to an integer trial count for binomial draws.
pub(crate) fn whole_count(name: &str, n: f64) -> Result<u64> {
    if !n.is_finite() || n < 0.0 || n.fract() != 0.0 || n > u64::MAX as f64 {
        return Err(Error::InvalidInput(format!(
            "{name} must be a whole nonnegative count for stochastic sampling, got {n}"
        )));
    }
    Ok(n as u64)
}

/// Number of successes among `n` trials with success probability `p`.
pub(crate) fn binomial(rng: &mut SimRng, name: &str, n: f64, p: f64) -> Result<f64> {
    let trials = whole_count(name, n)?;
    let dist = Binomial::new(trials, p)
        .map_err(|e| Error::InvalidInput(format!("{name}: binomial({trials}, {p}): {e}")))?;
    Ok(dist.sample(rng) as f64)
}
