//! Policy rollout on an explicit block tree.
//!
//! Only the part of the tree past the last common ancestor is kept. Each
//! block carries the fee mass of the interval it leads and whether it was
//! mined on top of its parent's microblocks. An interval is settled when its
//! successor becomes final: split `r` / `1 - r` between the two owners (all
//! to one owner if they coincide), or orphaned when the successor skipped the
//! microblocks.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{batch_boundary, fee_mass, Ledger, SimConfig, SimError, SimReport};
use crate::concentration::PairCounts;
use crate::mdp::{Fork, LastMicro, MdpAction, MdpState, SolveResult};
use crate::model::RewardWeights;

#[derive(Debug, Clone, Copy)]
struct Block {
    selfish: bool,
    mass: f64,
    on_micro: bool,
}

struct Chain {
    r: f64,
    ancestor: Block,
    last_micro: LastMicro,
    fork: Fork,
    private: Vec<Block>,
    public: Vec<Block>,
    ledger: Ledger,
    pairs: PairCounts,
}

impl Chain {
    fn state(&self) -> MdpState {
        MdpState::new(self.private.len() as u32, self.public.len() as u32, self.fork, self.last_micro)
    }

    fn settle(&mut self, prev: Block, next: Block) {
        if !next.on_micro {
            self.ledger.orphaned += prev.mass;
        } else if prev.selfish == next.selfish {
            self.ledger.fee(prev.selfish, prev.mass);
        } else {
            self.ledger.fee(prev.selfish, self.r * prev.mass);
            self.ledger.fee(next.selfish, (1.0 - self.r) * prev.mass);
        }
        match (prev.selfish, next.selfish) {
            (true, false) => self.pairs.z += 1,
            (false, true) => self.pairs.k += 1,
            _ => {}
        }
        self.pairs.m += 1;
        self.ledger.key(next.selfish);
    }

    /// Finalizes `branch[..n]` on top of the ancestor; `branch[n-1]` becomes
    /// the new ancestor. Blocks of the other branch are orphaned.
    fn finalize(&mut self, selfish_branch: bool, n: usize, last_micro: LastMicro) {
        let (mut branch, other) = if selfish_branch {
            (std::mem::take(&mut self.private), std::mem::take(&mut self.public))
        } else {
            (std::mem::take(&mut self.public), std::mem::take(&mut self.private))
        };
        let rest = branch.split_off(n);
        let mut prev = self.ancestor;
        for &b in &branch {
            self.settle(prev, b);
            prev = b;
        }
        self.ancestor = prev;
        self.last_micro = last_micro;
        self.fork = Fork::NoTie;
        for b in &other {
            self.ledger.orphaned += b.mass;
            self.ledger.orphaned_keys += 1;
        }
        if selfish_branch {
            self.private = rest;
        } else {
            debug_assert!(rest.is_empty());
        }
    }

    fn mine(&mut self, rng: &mut ChaCha8Rng, alpha: f64, gamma: f64, mass: f64) {
        if rng.gen_bool(alpha) {
            let on_micro = !self.private.is_empty() || self.ancestor.selfish || self.last_micro == LastMicro::HonestIncluded;
            self.private.push(Block { selfish: true, mass, on_micro });
        } else if self.fork != Fork::NoTie && rng.gen_bool(gamma) {
            // Honest block on the published attacker branch: its tip becomes final.
            let tie = self.fork == Fork::Tie;
            let published = self.public.len();
            let landing = if tie { LastMicro::SelfishPublished } else { LastMicro::SelfishHidden };
            self.finalize(true, published, landing);
            self.public.push(Block { selfish: false, mass, on_micro: tie });
        } else {
            let on_micro = !self.public.is_empty() || self.last_micro != LastMicro::SelfishHidden;
            self.public.push(Block { selfish: false, mass, on_micro });
            self.fork = Fork::NoTie;
        }
    }
}

pub(super) fn run_policy(config: &SimConfig, result: &SolveResult, weights: RewardWeights) -> Result<SimReport, SimError> {
    let p = &config.params;
    let policy: HashMap<MdpState, MdpAction> = result.policy.iter().map(|(s, a)| (*s, *a)).collect();
    let cap = result.truncation;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let genesis = Block { selfish: false, mass: fee_mass(&mut rng, config.interval_mode), on_micro: true };
    let mut ledger = Ledger::new(weights);
    ledger.key(false);
    ledger.generated += genesis.mass;
    let mut chain = Chain {
        r: p.split_ratio,
        ancestor: genesis,
        last_micro: LastMicro::HonestIncluded,
        fork: Fork::NoTie,
        private: Vec::new(),
        public: Vec::new(),
        ledger,
        pairs: PairCounts { z: 0, k: 0, m: 1 },
    };

    // The first block after genesis is mined before any decision.
    let mut mined = 1u64;
    let mass = fee_mass(&mut rng, config.interval_mode);
    chain.ledger.generated += mass;
    chain.mine(&mut rng, p.alpha, p.gamma, mass);

    let mut boundary_visits = 0u64;
    while mined < config.horizon_keyblocks {
        let state = chain.state();
        if state.l_a == cap || state.l_h == cap {
            boundary_visits += 1;
        }
        let action = *policy.get(&state).ok_or(SimError::MissingPolicy(state))?;
        let illegal = || SimError::IllegalAction { state, action: action.to_string() };
        let lh = chain.public.len();
        match action {
            MdpAction::Adopt | MdpAction::AdoptE => {
                if lh == 0 {
                    return Err(illegal());
                }
                let lm = if action == MdpAction::Adopt { LastMicro::HonestIncluded } else { LastMicro::HonestExcluded };
                chain.finalize(false, lh, lm);
            }
            MdpAction::Override | MdpAction::OverrideH => {
                if chain.private.len() <= lh {
                    return Err(illegal());
                }
                let lm = if action == MdpAction::Override { LastMicro::SelfishPublished } else { LastMicro::SelfishHidden };
                chain.finalize(true, lh + 1, lm);
            }
            MdpAction::Match | MdpAction::MatchH => {
                if lh == 0 || chain.private.len() < lh || chain.fork != Fork::NoTie {
                    return Err(illegal());
                }
                chain.fork = if action == MdpAction::Match { Fork::Tie } else { Fork::TiePrime };
            }
            MdpAction::Wait => {}
            MdpAction::Revert => {
                if chain.fork == Fork::TiePrime {
                    chain.fork = Fork::Tie;
                } else if chain.last_micro == LastMicro::SelfishHidden && lh == 0 {
                    chain.last_micro = LastMicro::SelfishPublished;
                } else if chain.last_micro == LastMicro::HonestExcluded && chain.private.is_empty() {
                    chain.last_micro = LastMicro::HonestIncluded;
                } else {
                    return Err(illegal());
                }
                continue;
            }
        }
        let mass = fee_mass(&mut rng, config.interval_mode);
        chain.ledger.generated += mass;
        chain.mine(&mut rng, p.alpha, p.gamma, mass);
        mined += 1;
        if batch_boundary(mined, config.horizon_keyblocks) {
            chain.ledger.cut();
        }
    }

    let pending = chain.ancestor.mass + chain.private.iter().chain(&chain.public).map(|b| b.mass).sum::<f64>();
    let pairs = chain.pairs;
    Ok(chain.ledger.report(pending, pairs, boundary_visits, config))
}
