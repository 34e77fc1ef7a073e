//! Monte Carlo mining simulator.
//!
//! Fee mass is measured in interval units: one unit is the mean fee of the
//! microblocks a leader issues during one key-block interval, so the
//! scalarized value of a unit is `(v/f) * R_t` from [`RewardWeights::from_params`].

mod rollout;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concentration::PairCounts;
use crate::mdp::{MdpState, SolveResult};
use crate::model::{ModelError, ProtocolParams, RewardWeights};

const BATCHES: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("horizon must be at least 2 key blocks, got {0}")]
    Horizon(u64),
    #[error("rho must lie in [0,1], got {0}")]
    Rho(f64),
    #[error(transparent)]
    Params(#[from] ModelError),
    #[error("policy has no action for state {0}")]
    MissingPolicy(MdpState),
    #[error("policy chose unavailable action `{action}` in state {state}")]
    IllegalAction { state: MdpState, action: String },
    #[error("no configurations to run")]
    Empty,
    #[error("config {index}: {source}")]
    Sweep { index: usize, source: Box<SimError> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum Strategy {
    Honest,
    /// Withhold a fraction `rho` of the attacker's own microblocks whenever
    /// an honest key block follows.
    Inclusion { rho: f64 },
    /// Reject a fraction `rho` of the honest leader's microblocks whenever the
    /// attacker mines the next key block.
    Extension { rho: f64 },
    /// Follow a solved decision-process policy on a simulated block tree.
    MdpPolicy { result: Box<SolveResult> },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Honest => "honest",
            Strategy::Inclusion { .. } => "inclusion",
            Strategy::Extension { .. } => "extension",
            Strategy::MdpPolicy { .. } => "mdpPolicy",
        }
    }

    pub fn rho(&self) -> Option<f64> {
        match self {
            Strategy::Inclusion { rho } | Strategy::Extension { rho } => Some(*rho),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalMode {
    /// Interval fee mass drawn from Exp(1), matching exponential key-block gaps.
    #[default]
    Exponential,
    /// Every interval carries exactly one unit.
    Deterministic,
}

impl std::str::FromStr for IntervalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exponential" => Ok(IntervalMode::Exponential),
            "deterministic" => Ok(IntervalMode::Deterministic),
            other => Err(format!("unknown interval mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ProtocolParams,
    pub strategy: Strategy,
    pub horizon_keyblocks: u64,
    pub seed: u64,
    pub interval_mode: IntervalMode,
}

impl SimConfig {
    pub fn new(params: ProtocolParams, strategy: Strategy, horizon_keyblocks: u64, seed: u64) -> Self {
        SimConfig { params, strategy, horizon_keyblocks, seed, interval_mode: IntervalMode::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.params.validate()?;
        if self.horizon_keyblocks < 2 {
            return Err(SimError::Horizon(self.horizon_keyblocks));
        }
        if let Some(rho) = self.strategy.rho() {
            if !(0.0..=1.0).contains(&rho) {
                return Err(SimError::Rho(rho));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub relative_revenue: f64,
    pub std_error: f64,
    pub selfish_key_rewards: u64,
    pub honest_key_rewards: u64,
    pub selfish_fees: f64,
    pub honest_fees: f64,
    pub orphaned_fee_units: f64,
    /// Fee mass of intervals still undecided when the horizon ends.
    pub pending_fee_units: f64,
    pub generated_fee_units: f64,
    pub orphaned_key_blocks: u64,
    pub pair_counts: PairCounts,
    /// Steps spent in states at the truncation boundary (policy rollouts only).
    pub boundary_visits: u64,
    pub weights: RewardWeights,
    pub seed: u64,
    pub horizon_keyblocks: u64,
}

impl SimReport {
    pub fn selfish_value(&self) -> f64 {
        self.weights.key_weight * self.selfish_key_rewards as f64 + self.weights.fee_weight * self.selfish_fees
    }

    pub fn total_value(&self) -> f64 {
        let honest = self.weights.key_weight * self.honest_key_rewards as f64 + self.weights.fee_weight * self.honest_fees;
        self.selfish_value() + honest
    }
}

/// Running totals plus per-batch increments for the ratio standard error.
#[derive(Debug, Clone)]
pub(crate) struct Ledger {
    weights: RewardWeights,
    pub selfish_keys: u64,
    pub honest_keys: u64,
    pub selfish_fees: f64,
    pub honest_fees: f64,
    pub orphaned: f64,
    pub generated: f64,
    pub orphaned_keys: u64,
    batches: Vec<(f64, f64)>,
    mark: (f64, f64),
}

impl Ledger {
    pub fn new(weights: RewardWeights) -> Self {
        Ledger {
            weights,
            selfish_keys: 0,
            honest_keys: 0,
            selfish_fees: 0.0,
            honest_fees: 0.0,
            orphaned: 0.0,
            generated: 0.0,
            orphaned_keys: 0,
            batches: Vec::with_capacity(BATCHES),
            mark: (0.0, 0.0),
        }
    }

    pub fn key(&mut self, selfish: bool) {
        if selfish {
            self.selfish_keys += 1;
        } else {
            self.honest_keys += 1;
        }
    }

    pub fn fee(&mut self, selfish: bool, amount: f64) {
        if selfish {
            self.selfish_fees += amount;
        } else {
            self.honest_fees += amount;
        }
    }

    fn values(&self) -> (f64, f64) {
        let w = &self.weights;
        let s = w.key_weight * self.selfish_keys as f64 + w.fee_weight * self.selfish_fees;
        let h = w.key_weight * self.honest_keys as f64 + w.fee_weight * self.honest_fees;
        (s, s + h)
    }

    /// Closes a batch at the current totals.
    pub fn cut(&mut self) {
        let now = self.values();
        self.batches.push((now.0 - self.mark.0, now.1 - self.mark.1));
        self.mark = now;
    }

    pub fn report(mut self, pending: f64, pair_counts: PairCounts, boundary_visits: u64, config: &SimConfig) -> SimReport {
        if self.mark != self.values() {
            self.cut();
        }
        let (s, t) = self.values();
        let relative_revenue = if t > 0.0 { s / t } else { 0.0 };
        SimReport {
            relative_revenue,
            std_error: ratio_std_error(&self.batches, relative_revenue),
            selfish_key_rewards: self.selfish_keys,
            honest_key_rewards: self.honest_keys,
            selfish_fees: self.selfish_fees,
            honest_fees: self.honest_fees,
            orphaned_fee_units: self.orphaned,
            pending_fee_units: pending,
            generated_fee_units: self.generated,
            orphaned_key_blocks: self.orphaned_keys,
            pair_counts,
            boundary_visits,
            weights: self.weights,
            seed: config.seed,
            horizon_keyblocks: config.horizon_keyblocks,
        }
    }
}

/// Delta-method standard error of `sum(s) / sum(t)` over batches.
fn ratio_std_error(batches: &[(f64, f64)], ratio: f64) -> f64 {
    let n = batches.len();
    if n < 2 {
        return 0.0;
    }
    let mean_t = batches.iter().map(|b| b.1).sum::<f64>() / n as f64;
    if mean_t <= 0.0 {
        return 0.0;
    }
    let ss: f64 = batches.iter().map(|(s, t)| (s - ratio * t).powi(2)).sum();
    (ss / (n as f64 * (n - 1) as f64)).sqrt() / mean_t
}

pub(crate) fn fee_mass(rng: &mut ChaCha8Rng, mode: IntervalMode) -> f64 {
    match mode {
        IntervalMode::Exponential => rng.sample(Exp1),
        IntervalMode::Deterministic => 1.0,
    }
}

pub(crate) fn batch_boundary(step: u64, horizon: u64) -> bool {
    let per = (horizon / BATCHES as u64).max(1);
    step.is_multiple_of(per)
}

pub fn run(config: &SimConfig) -> Result<SimReport, SimError> {
    config.validate()?;
    let weights = RewardWeights::from_params(&config.params)?;
    match &config.strategy {
        Strategy::MdpPolicy { result } => rollout::run_policy(config, result, weights),
        _ => Ok(run_attack(config, weights)),
    }
}

/// Runs every config, in parallel, returning reports in input order.
pub fn sweep(configs: &[SimConfig]) -> Result<Vec<SimReport>, SimError> {
    if configs.is_empty() {
        return Err(SimError::Empty);
    }
    configs
        .par_iter()
        .enumerate()
        .map(|(index, c)| run(c).map_err(|e| SimError::Sweep { index, source: Box::new(e) }))
        .collect()
}

/// Honest mining or a microblock attack: the key chain is never forked, so
/// every key block is kept and only fee mass can be orphaned.
fn run_attack(config: &SimConfig, weights: RewardWeights) -> SimReport {
    let p = &config.params;
    let r = p.split_ratio;
    let m = config.horizon_keyblocks;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ledger = Ledger::new(weights);
    let mut pairs = PairCounts { z: 0, k: 0, m };

    let mut prev = false;
    ledger.key(prev);
    for i in 1..m {
        let next = rng.gen_bool(p.alpha);
        ledger.key(next);
        let mass = fee_mass(&mut rng, config.interval_mode);
        ledger.generated += mass;
        let lost = match (&config.strategy, prev, next) {
            (Strategy::Inclusion { rho }, true, false) | (Strategy::Extension { rho }, false, true) => rho * mass,
            _ => 0.0,
        };
        let kept = mass - lost;
        ledger.orphaned += lost;
        ledger.fee(prev, r * kept);
        ledger.fee(next, (1.0 - r) * kept);
        match (prev, next) {
            (true, false) => pairs.z += 1,
            (false, true) => pairs.k += 1,
            _ => {}
        }
        prev = next;
        if batch_boundary(i, m) {
            ledger.cut();
        }
    }
    ledger.report(0.0, pairs, 0, config)
}
