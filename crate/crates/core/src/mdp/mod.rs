//! Joint key-block and microblock selfish mining as a decision process.
//!
//! A state is `(l_a, l_h, fork, last_micro)`: the attacker's and the public
//! chain's key-block lengths past the last common ancestor, whether a
//! matching branch has been published, and how the ancestor's microblocks
//! are treated. Fees are credited in units of one key-block interval worth
//! of microblocks and only once the common ancestor advances.

mod solver;
mod table;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use solver::{policy_actions, scalarize, solve, solve_with, PolicyEntry, SolveError, SolveResult, SolverConfig};
pub use table::{build_transitions, build_transitions_with, RewardAccounting, TableError, Transition, TransitionTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Fork {
    /// No two public branches of equal length.
    NoTie,
    /// The attacker published a matching branch including its microblocks.
    Tie,
    /// The attacker published a matching branch but hid the microblocks
    /// after its last published key block.
    TiePrime,
}

/// Owner of the common ancestor and the fate of its microblocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LastMicro {
    /// Honest ancestor; the attacker builds on its microblocks.
    #[serde(rename = "H_in")]
    HonestIncluded,
    /// Honest ancestor; the attacker mines directly on the key block.
    #[serde(rename = "H_ex")]
    HonestExcluded,
    /// Attacker ancestor with published microblocks.
    #[serde(rename = "S_p")]
    SelfishPublished,
    /// Attacker ancestor with hidden microblocks.
    #[serde(rename = "S_h")]
    SelfishHidden,
}

impl LastMicro {
    pub const ALL: [LastMicro; 4] = [
        LastMicro::HonestIncluded,
        LastMicro::HonestExcluded,
        LastMicro::SelfishPublished,
        LastMicro::SelfishHidden,
    ];

    pub fn is_selfish(self) -> bool {
        matches!(self, LastMicro::SelfishPublished | LastMicro::SelfishHidden)
    }

    pub fn label(self) -> &'static str {
        match self {
            LastMicro::HonestIncluded => "H_in",
            LastMicro::HonestExcluded => "H_ex",
            LastMicro::SelfishPublished => "S_p",
            LastMicro::SelfishHidden => "S_h",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MdpState {
    pub l_a: u32,
    pub l_h: u32,
    pub fork: Fork,
    pub last_micro: LastMicro,
}

impl MdpState {
    pub const fn new(l_a: u32, l_h: u32, fork: Fork, last_micro: LastMicro) -> Self {
        MdpState { l_a, l_h, fork, last_micro }
    }

    /// Structural validity under truncation `cap`.
    pub fn is_valid(&self, cap: u32) -> bool {
        let lengths = self.l_a <= cap && self.l_h <= cap && (self.l_a, self.l_h) != (0, 0);
        let fork = self.fork == Fork::NoTie || (self.l_a >= self.l_h && self.l_h >= 1);
        lengths && fork
    }
}

impl fmt::Display for MdpState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fork = match self.fork {
            Fork::NoTie => "noTie",
            Fork::Tie => "tie",
            Fork::TiePrime => "tiePrime",
        };
        write!(f, "({}, {}, {}, {})", self.l_a, self.l_h, fork, self.last_micro.label())
    }
}

/// The attacker's eight choices. Declaration order is the tie-breaking
/// preference when two actions are equally good.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum MdpAction {
    /// Adopt the public chain and build on its microblocks.
    Adopt,
    /// Adopt the public chain but mine directly on its last key block.
    AdoptE,
    /// Publish `l_h + 1` key blocks with their microblocks.
    Override,
    /// Publish `l_h + 1` key blocks, hiding microblocks after the last one.
    OverrideH,
    /// Publish `l_h` key blocks with microblocks to race the public tip.
    Match,
    /// Publish `l_h` key blocks, hiding microblocks after the last one.
    MatchH,
    Wait,
    /// Undo a microblock choice before anyone has built on it.
    Revert,
}

impl MdpAction {
    pub const ALL: [MdpAction; 8] = [
        MdpAction::Adopt,
        MdpAction::AdoptE,
        MdpAction::Override,
        MdpAction::OverrideH,
        MdpAction::Match,
        MdpAction::MatchH,
        MdpAction::Wait,
        MdpAction::Revert,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MdpAction::Adopt => "adopt",
            MdpAction::AdoptE => "adoptE",
            MdpAction::Override => "override",
            MdpAction::OverrideH => "overrideH",
            MdpAction::Match => "match",
            MdpAction::MatchH => "matchH",
            MdpAction::Wait => "wait",
            MdpAction::Revert => "revert",
        }
    }
}

impl fmt::Display for MdpAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MdpAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MdpAction::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown action `{s}`"))
    }
}

/// Rewards finalized by one transition: key rewards and fee units for the
/// honest side (`r_h`, `t_h`) and the attacker (`r_a`, `t_a`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardTuple {
    pub r_h: u32,
    pub t_h: f64,
    pub r_a: u32,
    pub t_a: f64,
}

impl RewardTuple {
    pub const ZERO: RewardTuple = RewardTuple { r_h: 0, t_h: 0.0, r_a: 0, t_a: 0.0 };

    pub const fn new(r_h: u32, t_h: f64, r_a: u32, t_a: f64) -> Self {
        RewardTuple { r_h, t_h, r_a, t_a }
    }

    pub fn fee_units(&self) -> f64 {
        self.t_h + self.t_a
    }
}
