//! Incentive analysis for a key-block / microblock blockchain: closed-form
//! bounds on the fee split ratio, an optimal selfish-mining decision process,
//! and a Monte Carlo mining simulator used to cross-check both.

pub mod closedform;
pub mod concentration;
pub mod feescan;
pub mod mdp;
pub mod model;
pub mod simulator;

pub use closedform::{DomainError, FeasibleInterval, RatioBounds, TransactionClass};
pub use concentration::{ConcentrationError, OwnershipSequence, PairCounts, PairDeviationEstimate};
pub use feescan::{FeeClasses, FeeHistogram, FeeRecord, FeeScanError};
pub use mdp::{
    build_transitions, solve, Fork, LastMicro, MdpAction, MdpState, RewardAccounting, RewardTuple, SolveError,
    SolveResult, TransitionTable,
};
pub use model::{ModelError, ProtocolParams, Regime, RewardWeights};
pub use simulator::{IntervalMode, SimConfig, SimError, SimReport, Strategy};
