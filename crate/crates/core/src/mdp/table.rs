use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Fork, LastMicro, MdpAction, MdpState, RewardTuple};
use crate::model::{ModelError, ProtocolParams};

type Outcome = (MdpState, f64, RewardTuple);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("truncation must be at least 2, got {0}")]
    Truncation(u32),
    #[error(transparent)]
    Params(#[from] ModelError),
}

/// How fee units are credited when the common ancestor advances.
///
/// The two variants differ only in the adopt and override rows; the match
/// rows are identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardAccounting {
    /// Every interval between consecutive finalized key blocks is credited
    /// exactly once: `r` to its leader and `1 - r` to the next one, all of it
    /// to the owner when both blocks share an owner, and nothing when the
    /// next block was mined without the interval's microblocks (hidden by an
    /// attacker ancestor or excluded by the attacker).
    #[default]
    Conserving,
    /// The published reward matrix as printed. Its adopt row credits the
    /// honest side one unit less for an honest ancestor and one unit more for
    /// a hidden attacker ancestor, and the override row does the mirror image.
    /// Under honest mining this pays each side one unit per ownership switch
    /// only, so it is kept for reference and golden tests, not for solving.
    Tabulated,
}

impl std::str::FromStr for RewardAccounting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conserving" => Ok(RewardAccounting::Conserving),
            "tabulated" => Ok(RewardAccounting::Tabulated),
            other => Err(format!("unknown accounting `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub next: usize,
    pub prob: f64,
    pub reward: RewardTuple,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ActionSlot {
    pub action: MdpAction,
    pub start: usize,
    pub end: usize,
}

/// Finite decision process over states reachable from a fresh common
/// ancestor, with lengths capped at `truncation`.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    pub(crate) states: Vec<MdpState>,
    pub(crate) index: HashMap<MdpState, usize>,
    /// `action_ranges[s]..action_ranges[s + 1]` indexes `slots`.
    pub(crate) action_ranges: Vec<usize>,
    pub(crate) slots: Vec<ActionSlot>,
    pub(crate) transitions: Vec<Transition>,
    pub(crate) params: ProtocolParams,
    pub(crate) truncation: u32,
    pub(crate) accounting: RewardAccounting,
}

impl TransitionTable {
    pub fn states(&self) -> &[MdpState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &MdpState) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn accounting(&self) -> RewardAccounting {
        self.accounting
    }

    pub(crate) fn slots_of(&self, s: usize) -> &[ActionSlot] {
        &self.slots[self.action_ranges[s]..self.action_ranges[s + 1]]
    }

    pub fn actions(&self, state: &MdpState) -> Vec<MdpAction> {
        match self.index_of(state) {
            Some(s) => self.slots_of(s).iter().map(|slot| slot.action).collect(),
            None => Vec::new(),
        }
    }

    pub fn transitions(&self, state: &MdpState, action: MdpAction) -> Option<&[Transition]> {
        let s = self.index_of(state)?;
        let slot = self.slots_of(s).iter().find(|slot| slot.action == action)?;
        Some(&self.transitions[slot.start..slot.end])
    }

    /// Outcomes of `action` in `state` with next states resolved.
    pub fn outcomes(&self, state: &MdpState, action: MdpAction) -> Option<Vec<Outcome>> {
        self.transitions(state, action)
            .map(|ts| ts.iter().map(|t| (self.states[t.next], t.prob, t.reward)).collect())
    }

    /// Every `(state, action)` pair in the table.
    pub fn pairs(&self) -> impl Iterator<Item = (MdpState, MdpAction)> + '_ {
        (0..self.states.len()).flat_map(move |s| self.slots_of(s).iter().map(move |slot| (self.states[s], slot.action)))
    }

    pub fn pair_count(&self) -> usize {
        self.slots.len()
    }
}

pub fn build_transitions(params: &ProtocolParams, truncation: u32) -> Result<TransitionTable, TableError> {
    build_transitions_with(params, truncation, RewardAccounting::default())
}

pub fn build_transitions_with(
    params: &ProtocolParams,
    truncation: u32,
    accounting: RewardAccounting,
) -> Result<TransitionTable, TableError> {
    let params = params.validate()?;
    if truncation < 2 {
        return Err(TableError::Truncation(truncation));
    }
    let rules = Rules { alpha: params.alpha, gamma: params.gamma, r: params.split_ratio, cap: truncation, accounting };

    // Reachability from the two states that follow a fresh honest ancestor.
    let seeds = [
        MdpState::new(1, 0, Fork::NoTie, LastMicro::HonestIncluded),
        MdpState::new(0, 1, Fork::NoTie, LastMicro::HonestIncluded),
    ];
    let mut index = HashMap::new();
    let mut states = Vec::new();
    let mut queue = VecDeque::new();
    for seed in seeds {
        index.insert(seed, states.len());
        states.push(seed);
        queue.push_back(seed);
    }
    let mut rows: Vec<Vec<(MdpAction, Vec<Outcome>)>> = Vec::new();
    while let Some(state) = queue.pop_front() {
        let mut row = Vec::new();
        for action in MdpAction::ALL {
            if let Some(outcomes) = rules.outcomes(&state, action) {
                for (next, _, _) in &outcomes {
                    debug_assert!(next.is_valid(truncation), "{state} {action} -> {next}");
                    if !index.contains_key(next) {
                        index.insert(*next, states.len());
                        states.push(*next);
                        queue.push_back(*next);
                    }
                }
                row.push((action, outcomes));
            }
        }
        rows.push(row);
    }

    let mut action_ranges = Vec::with_capacity(states.len() + 1);
    let mut slots = Vec::new();
    let mut transitions = Vec::new();
    for row in rows {
        action_ranges.push(slots.len());
        for (action, outcomes) in row {
            let start = transitions.len();
            transitions.extend(outcomes.into_iter().map(|(next, prob, reward)| Transition {
                next: index[&next],
                prob,
                reward,
            }));
            slots.push(ActionSlot { action, start, end: transitions.len() });
        }
    }
    action_ranges.push(slots.len());

    Ok(TransitionTable { states, index, action_ranges, slots, transitions, params, truncation, accounting })
}

struct Rules {
    alpha: f64,
    gamma: f64,
    r: f64,
    cap: u32,
    accounting: RewardAccounting,
}

impl Rules {
    fn adopt_reward(&self, s: &MdpState) -> RewardTuple {
        let lh = s.l_h as f64;
        let conserving = self.accounting == RewardAccounting::Conserving;
        match s.last_micro {
            LastMicro::SelfishHidden if conserving => RewardTuple::new(s.l_h, lh - 1.0, 0, 0.0),
            LastMicro::SelfishHidden => RewardTuple::new(s.l_h, lh, 0, 0.0),
            LastMicro::SelfishPublished => RewardTuple::new(s.l_h, lh - 1.0 + (1.0 - self.r), 0, self.r),
            _ if conserving => RewardTuple::new(s.l_h, lh, 0, 0.0),
            _ => RewardTuple::new(s.l_h, lh - 1.0, 0, 0.0),
        }
    }

    fn override_reward(&self, s: &MdpState) -> RewardTuple {
        let lh = s.l_h as f64;
        let won = s.l_h + 1;
        let conserving = self.accounting == RewardAccounting::Conserving;
        match s.last_micro {
            LastMicro::HonestExcluded if conserving => RewardTuple::new(0, 0.0, won, lh),
            LastMicro::HonestExcluded => RewardTuple::new(0, 0.0, won, lh + 1.0),
            LastMicro::HonestIncluded => RewardTuple::new(0, self.r, won, lh + (1.0 - self.r)),
            _ if conserving => RewardTuple::new(0, 0.0, won, lh + 1.0),
            _ => RewardTuple::new(0, 0.0, won, lh),
        }
    }

    /// Reward when an honest block lands on the attacker's matching branch.
    fn match_reward(&self, s: &MdpState) -> RewardTuple {
        let lh = s.l_h as f64;
        match s.last_micro {
            LastMicro::HonestIncluded => RewardTuple::new(0, self.r, s.l_h, lh - 1.0 + (1.0 - self.r)),
            LastMicro::HonestExcluded => RewardTuple::new(0, 0.0, s.l_h, lh - 1.0),
            _ => RewardTuple::new(0, 0.0, s.l_h, lh),
        }
    }

    /// Three-way race once a matching branch is public.
    fn race(&self, s: &MdpState, tie: Fork, landing: LastMicro) -> Vec<Outcome> {
        let (a, g) = (self.alpha, self.gamma);
        vec![
            (MdpState::new(s.l_a + 1, s.l_h, tie, s.last_micro), a, RewardTuple::ZERO),
            (MdpState::new(s.l_a - s.l_h, 1, Fork::NoTie, landing), g * (1.0 - a), self.match_reward(s)),
            (MdpState::new(s.l_a, s.l_h + 1, Fork::NoTie, s.last_micro), (1.0 - g) * (1.0 - a), RewardTuple::ZERO),
        ]
    }

    fn outcomes(&self, s: &MdpState, action: MdpAction) -> Option<Vec<Outcome>> {
        use MdpAction::*;
        let a = self.alpha;
        let room = s.l_a < self.cap && s.l_h < self.cap;
        let fresh = |lm| {
            vec![
                (MdpState::new(1, 0, Fork::NoTie, lm), a, RewardTuple::ZERO),
                (MdpState::new(0, 1, Fork::NoTie, lm), 1.0 - a, RewardTuple::ZERO),
            ]
        };
        let published = |lm| {
            vec![
                (MdpState::new(s.l_a - s.l_h, 0, Fork::NoTie, lm), a, RewardTuple::ZERO),
                (MdpState::new(s.l_a - s.l_h - 1, 1, Fork::NoTie, lm), 1.0 - a, RewardTuple::ZERO),
            ]
        };
        let with_reward = |mut outs: Vec<Outcome>, reward: RewardTuple| {
            for o in &mut outs {
                o.2 = reward;
            }
            outs
        };
        match action {
            Adopt | AdoptE if s.l_h >= 1 => {
                let lm = if action == Adopt { LastMicro::HonestIncluded } else { LastMicro::HonestExcluded };
                Some(with_reward(fresh(lm), self.adopt_reward(s)))
            }
            Override | OverrideH if s.l_a > s.l_h => {
                let lm = if action == Override { LastMicro::SelfishPublished } else { LastMicro::SelfishHidden };
                Some(with_reward(published(lm), self.override_reward(s)))
            }
            Wait if room => Some(match s.fork {
                Fork::NoTie => vec![
                    (MdpState::new(s.l_a + 1, s.l_h, Fork::NoTie, s.last_micro), a, RewardTuple::ZERO),
                    (MdpState::new(s.l_a, s.l_h + 1, Fork::NoTie, s.last_micro), 1.0 - a, RewardTuple::ZERO),
                ],
                Fork::Tie => self.race(s, Fork::Tie, LastMicro::SelfishPublished),
                Fork::TiePrime => self.race(s, Fork::TiePrime, LastMicro::SelfishHidden),
            }),
            Match if room && s.fork == Fork::NoTie && s.l_h >= 1 && s.l_a >= s.l_h => {
                Some(self.race(s, Fork::Tie, LastMicro::SelfishPublished))
            }
            MatchH if room && s.fork == Fork::NoTie && s.l_h >= 1 && s.l_a >= s.l_h => {
                Some(self.race(s, Fork::TiePrime, LastMicro::SelfishHidden))
            }
            Revert if s.l_h < self.cap => {
                let next = if s.fork == Fork::TiePrime {
                    MdpState { fork: Fork::Tie, ..*s }
                } else if s.last_micro == LastMicro::SelfishHidden && s.l_h == 0 {
                    MdpState { last_micro: LastMicro::SelfishPublished, ..*s }
                } else if s.last_micro == LastMicro::HonestExcluded && s.l_a == 0 {
                    MdpState { last_micro: LastMicro::HonestIncluded, ..*s }
                } else {
                    return None;
                };
                Some(vec![(next, 1.0, RewardTuple::ZERO)])
            }
            _ => None,
        }
    }
}
