use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::{Fork, LastMicro, MdpAction, MdpState, RewardTuple, TransitionTable};
use crate::model::{ModelError, RewardWeights};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("transition table is empty")]
    EmptyTable,
    #[error("tolerances must be positive (inner {inner}, outer {outer})")]
    Tolerance { inner: f64, outer: f64 },
    #[error(transparent)]
    Weights(#[from] ModelError),
    #[error(
        "value iteration did not converge at w = {w}: {iterations} sweeps, span {span:e}, gain in [{lower}, {upper}]"
    )]
    NotConverged { w: f64, iterations: usize, span: f64, lower: f64, upper: f64 },
    #[error("state {0} is not in the solved policy")]
    UnknownState(MdpState),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Span tolerance of relative value iteration.
    pub eps_inner: f64,
    /// Width of the final bisection bracket on the revenue.
    pub eps_outer: f64,
    /// Sweep cap per inner problem.
    pub max_sweeps: usize,
    /// Self-loop weight mixed into every transition to break periodicity.
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { eps_inner: 1e-9, eps_outer: 1e-7, max_sweeps: 200_000, damping: 0.5 }
    }
}

/// `(selfish, total)` value of one reward tuple.
pub fn scalarize(reward: &RewardTuple, weights: &RewardWeights) -> (f64, f64) {
    let selfish = weights.key_weight * reward.r_a as f64 + weights.fee_weight * reward.t_a;
    let honest = weights.key_weight * reward.r_h as f64 + weights.fee_weight * reward.t_h;
    (selfish, selfish + honest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub l_a: u32,
    pub l_h: u32,
    pub fork: Fork,
    pub last_micro: LastMicro,
    pub action: MdpAction,
}

impl PolicyEntry {
    pub fn state(&self) -> MdpState {
        MdpState::new(self.l_a, self.l_h, self.fork, self.last_micro)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub revenue: f64,
    #[serde(serialize_with = "policy_to_list", deserialize_with = "policy_from_list")]
    pub policy: BTreeMap<MdpState, MdpAction>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Span of the last value-iteration residual at the reported revenue.
    pub inner_tolerance: f64,
    pub truncation: u32,
    pub weights: RewardWeights,
}

impl SolveResult {
    pub fn policy_entries(&self) -> Vec<PolicyEntry> {
        self.policy
            .iter()
            .map(|(s, a)| PolicyEntry { l_a: s.l_a, l_h: s.l_h, fork: s.fork, last_micro: s.last_micro, action: *a })
            .collect()
    }

    pub fn action(&self, state: &MdpState) -> Option<MdpAction> {
        self.policy.get(state).copied()
    }
}

fn policy_to_list<S: Serializer>(policy: &BTreeMap<MdpState, MdpAction>, ser: S) -> Result<S::Ok, S::Error> {
    let entries: Vec<PolicyEntry> = policy
        .iter()
        .map(|(s, a)| PolicyEntry { l_a: s.l_a, l_h: s.l_h, fork: s.fork, last_micro: s.last_micro, action: *a })
        .collect();
    entries.serialize(ser)
}

fn policy_from_list<'de, D: Deserializer<'de>>(de: D) -> Result<BTreeMap<MdpState, MdpAction>, D::Error> {
    let entries = Vec::<PolicyEntry>::deserialize(de)?;
    Ok(entries.into_iter().map(|e| (e.state(), e.action)).collect())
}

pub fn policy_actions(result: &SolveResult, state: &MdpState) -> Result<MdpAction, SolveError> {
    result.action(state).ok_or(SolveError::UnknownState(*state))
}

pub fn solve(
    table: &TransitionTable,
    weights: &RewardWeights,
    eps_inner: f64,
    eps_outer: f64,
) -> Result<SolveResult, SolveError> {
    let config = SolverConfig { eps_inner, eps_outer, ..SolverConfig::default() };
    solve_with(table, weights, &config)
}

/// Largest `w` for which some policy earns `selfish - w * total >= 0` on average.
pub fn solve_with(table: &TransitionTable, weights: &RewardWeights, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    if table.is_empty() {
        return Err(SolveError::EmptyTable);
    }
    if !(config.eps_inner > 0.0 && config.eps_outer > 0.0) {
        return Err(SolveError::Tolerance { inner: config.eps_inner, outer: config.eps_outer });
    }
    weights.check()?;

    let mut vi = ValueIteration::new(table, weights, config);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut outer = 0;
    while hi - lo > config.eps_outer {
        outer += 1;
        let w = 0.5 * (lo + hi);
        match vi.gain_sign(w)? {
            Sign::Positive => lo = w,
            Sign::Negative => hi = w,
            Sign::Zero => {
                lo = w;
                hi = w;
            }
        }
    }
    let revenue = 0.5 * (lo + hi);
    let span = vi.converge(revenue)?;
    let policy = vi.greedy(revenue);
    Ok(SolveResult {
        revenue,
        policy,
        outer_iterations: outer,
        inner_iterations: vi.sweeps,
        inner_tolerance: span,
        truncation: table.truncation(),
        weights: *weights,
    })
}

enum Sign {
    Positive,
    Negative,
    Zero,
}

struct ValueIteration<'a> {
    table: &'a TransitionTable,
    selfish: Vec<f64>,
    total: Vec<f64>,
    h: Vec<f64>,
    next: Vec<f64>,
    config: SolverConfig,
    sweeps: usize,
}

impl<'a> ValueIteration<'a> {
    fn new(table: &'a TransitionTable, weights: &RewardWeights, config: &SolverConfig) -> Self {
        let mut selfish = Vec::with_capacity(table.slots.len());
        let mut total = Vec::with_capacity(table.slots.len());
        for slot in &table.slots {
            let (mut s, mut t) = (0.0, 0.0);
            for tr in &table.transitions[slot.start..slot.end] {
                let (a, b) = scalarize(&tr.reward, weights);
                s += tr.prob * a;
                t += tr.prob * b;
            }
            selfish.push(s);
            total.push(t);
        }
        let n = table.len();
        ValueIteration { table, selfish, total, h: vec![0.0; n], next: vec![0.0; n], config: *config, sweeps: 0 }
    }

    fn q(&self, k: usize, w: f64) -> f64 {
        let slot = &self.table.slots[k];
        let future: f64 = self.table.transitions[slot.start..slot.end].iter().map(|t| t.prob * self.h[t.next]).sum();
        self.selfish[k] - w * self.total[k] + future
    }

    /// One damped Bellman sweep; returns bounds on the optimal gain.
    fn sweep(&mut self, w: f64) -> (f64, f64) {
        let tau = 1.0 - self.config.damping;
        let (mut lower, mut upper) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in 0..self.table.len() {
            let range = self.table.action_ranges[s]..self.table.action_ranges[s + 1];
            let best = range.map(|k| self.q(k, w)).fold(f64::NEG_INFINITY, f64::max);
            let diff = best - self.h[s];
            lower = lower.min(diff);
            upper = upper.max(diff);
            self.next[s] = self.h[s] + tau * diff;
        }
        let anchor = self.next[0];
        for (h, n) in self.h.iter_mut().zip(&self.next) {
            *h = n - anchor;
        }
        self.sweeps += 1;
        (lower, upper)
    }

    fn gain_sign(&mut self, w: f64) -> Result<Sign, SolveError> {
        let mut last = (f64::NEG_INFINITY, f64::INFINITY);
        for _ in 0..self.config.max_sweeps {
            let (lower, upper) = self.sweep(w);
            last = (lower, upper);
            if lower > 0.0 {
                return Ok(Sign::Positive);
            }
            if upper < 0.0 {
                return Ok(Sign::Negative);
            }
            if upper - lower < self.config.eps_inner {
                let mid = 0.5 * (lower + upper);
                return Ok(if mid > 0.0 {
                    Sign::Positive
                } else if mid < 0.0 {
                    Sign::Negative
                } else {
                    Sign::Zero
                });
            }
        }
        Err(self.stalled(w, last))
    }

    fn converge(&mut self, w: f64) -> Result<f64, SolveError> {
        let mut last = (f64::NEG_INFINITY, f64::INFINITY);
        for _ in 0..self.config.max_sweeps {
            let (lower, upper) = self.sweep(w);
            last = (lower, upper);
            if upper - lower < self.config.eps_inner {
                return Ok(upper - lower);
            }
        }
        Err(self.stalled(w, last))
    }

    fn stalled(&self, w: f64, (lower, upper): (f64, f64)) -> SolveError {
        SolveError::NotConverged { w, iterations: self.sweeps, span: upper - lower, lower, upper }
    }

    /// First action in declaration order within a small tolerance of the best.
    fn greedy(&self, w: f64) -> BTreeMap<MdpState, MdpAction> {
        let tol = (10.0 * self.config.eps_inner).max(1e-12);
        let mut policy = BTreeMap::new();
        for s in 0..self.table.len() {
            let range = self.table.action_ranges[s]..self.table.action_ranges[s + 1];
            let qs: Vec<(MdpAction, f64)> = range.map(|k| (self.table.slots[k].action, self.q(k, w))).collect();
            let best = qs.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max);
            let action = qs
                .iter()
                .filter(|q| q.1 >= best - tol)
                .map(|q| q.0)
                .min()
                .expect("every state has an action");
            policy.insert(self.table.states[s], action);
        }
        policy
    }
}
