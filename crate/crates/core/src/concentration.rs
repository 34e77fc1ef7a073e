//! Adjacent-pair statistics of key-block ownership and their tail bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConcentrationError {
    #[error("sequence needs at least 2 key blocks, got {0}")]
    TooShort(usize),
    #[error("delta must lie strictly inside (0,1), got {0}")]
    Delta(f64),
    #[error("alpha must lie strictly inside (0,1), got {0}")]
    Alpha(f64),
    #[error("mu must be nonnegative, got {0}")]
    Mu(f64),
}

/// Key-block owners in chain order: `true` for a selfish block.
///
/// Producers in this crate start sequences with an honest block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnershipSequence {
    bits: Vec<bool>,
}

impl OwnershipSequence {
    pub fn new(bits: Vec<bool>) -> Self {
        OwnershipSequence { bits }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        OwnershipSequence { bits: bits.iter().map(|&b| b != 0).collect() }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// `z` counts adjacent (selfish, honest) pairs, `k` adjacent (honest, selfish) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairCounts {
    pub z: u64,
    pub k: u64,
    pub m: u64,
}

pub fn count_pairs(seq: &OwnershipSequence) -> Result<PairCounts, ConcentrationError> {
    count_pairs_slice(seq.bits())
}

pub(crate) fn count_pairs_slice(bits: &[bool]) -> Result<PairCounts, ConcentrationError> {
    if bits.len() < 2 {
        return Err(ConcentrationError::TooShort(bits.len()));
    }
    let mut counts = PairCounts { z: 0, k: 0, m: bits.len() as u64 };
    for w in bits.windows(2) {
        match (w[0], w[1]) {
            (true, false) => counts.z += 1,
            (false, true) => counts.k += 1,
            _ => {}
        }
    }
    Ok(counts)
}

/// `exp(-delta^2 * mu / 2)`: lower-tail bound for a sum of `T` interleaved
/// classes of independent indicators whose smallest class mean is `mu`.
pub fn chernoff_dependent_sum_bound(mu: f64, delta: f64) -> Result<f64, ConcentrationError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ConcentrationError::Delta(delta));
    }
    if !(mu >= 0.0) {
        return Err(ConcentrationError::Mu(mu));
    }
    Ok((-delta * delta * mu / 2.0).exp())
}

/// Two-sided bound on `P(|Z - ab(m-1)| > delta * ab(m-1))`.
///
/// Splitting `Z` into odd and even pair indices gives two sums of independent
/// indicators with mean `ab(m-1)/2` each; one tail bound per class and per
/// side gives `4 exp(-delta^2 ab (m-1) / 4)`. The result is capped at 1.
pub fn pair_deviation_bound(alpha: f64, m: u64, delta: f64) -> Result<f64, ConcentrationError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ConcentrationError::Alpha(alpha));
    }
    if m < 2 {
        return Err(ConcentrationError::TooShort(m as usize));
    }
    let mu = alpha * (1.0 - alpha) * (m - 1) as f64;
    let per_class = chernoff_dependent_sum_bound(mu / 2.0, delta)?;
    Ok((4.0 * per_class).min(1.0))
}

/// Monte Carlo summary of the pair count `Z` over independent ownership sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDeviationEstimate {
    /// Fraction of trials with `|Z - ab(m-1)| > delta * ab(m-1)`.
    pub probability: f64,
    pub mean_z: f64,
    pub mean_k: f64,
    /// Fraction of trials where `K` deviates by the same relative margin.
    pub probability_k: f64,
    pub expected: f64,
    pub trials: u64,
}

impl PairDeviationEstimate {
    /// Standard error of `probability` as a Bernoulli proportion.
    pub fn std_error(&self) -> f64 {
        let p = self.probability;
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Fraction of `trials` sequences whose `Z` leaves the `delta` band around
/// `ab(m-1)`. Each trial draws `m` key blocks owned by the attacker with
/// probability `alpha`; the shared honest starting block precedes them and
/// is not part of any pair.
pub fn empirical_pair_deviation(alpha: f64, m: u64, delta: f64, trials: u64, seed: u64) -> f64 {
    estimate_pair_deviation(alpha, m, delta, trials, seed).probability
}

pub fn estimate_pair_deviation(alpha: f64, m: u64, delta: f64, trials: u64, seed: u64) -> PairDeviationEstimate {
    let expected = alpha * (1.0 - alpha) * m.saturating_sub(1) as f64;
    let band = delta * expected;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trials = trials.max(1);
    let (mut dev_z, mut dev_k) = (0u64, 0u64);
    let (mut sum_z, mut sum_k) = (0.0, 0.0);
    for _ in 0..trials {
        let (z, k) = sample_pairs(&mut rng, alpha, m);
        sum_z += z as f64;
        sum_k += k as f64;
        if (z as f64 - expected).abs() > band {
            dev_z += 1;
        }
        if (k as f64 - expected).abs() > band {
            dev_k += 1;
        }
    }
    let n = trials as f64;
    PairDeviationEstimate {
        probability: dev_z as f64 / n,
        mean_z: sum_z / n,
        mean_k: sum_k / n,
        probability_k: dev_k as f64 / n,
        expected,
        trials,
    }
}

fn sample_pairs<R: Rng>(rng: &mut R, alpha: f64, m: u64) -> (u64, u64) {
    if m == 0 {
        return (0, 0);
    }
    let (mut z, mut k) = (0, 0);
    let mut prev = rng.gen_bool(alpha);
    for _ in 1..m {
        let next = rng.gen_bool(alpha);
        match (prev, next) {
            (true, false) => z += 1,
            (false, true) => k += 1,
            _ => {}
        }
        prev = next;
    }
    (z, k)
}
