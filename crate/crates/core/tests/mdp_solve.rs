use ng_incentives::mdp::{build_transitions, policy_actions, solve, Fork, LastMicro, MdpAction, MdpState, SolveError};
use ng_incentives::model::{ProtocolParams, Regime};
use rayon::prelude::*;

fn params(alpha: f64) -> ProtocolParams {
    ProtocolParams { alpha, gamma: 0.5, split_ratio: 0.4, ..ProtocolParams::default() }
}

fn revenue(alpha: f64, regime: Regime, cap: u32) -> f64 {
    let table = build_transitions(&params(alpha), cap).unwrap();
    solve(&table, &regime.weights(), 1e-9, 1e-7).unwrap().revenue
}

fn grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 * 0.05).collect()
}

#[test]
fn honest_below_threshold_in_every_regime() {
    for regime in Regime::ALL {
        assert!((revenue(0.1, regime, 20) - 0.1).abs() < 1e-3);
        assert!(revenue(0.0, regime, 20).abs() < 1e-6);
    }
}

#[test]
fn key_regime_profits_at_thirty_percent() {
    assert!(revenue(0.3, Regime::Key, 20) > 0.3 + 1e-3);
}

#[test]
fn revenue_monotone_and_at_least_fair_share() {
    for regime in Regime::ALL {
        let revs: Vec<f64> = grid().par_iter().map(|&a| revenue(a, regime, 20)).collect();
        for (a, u) in grid().iter().zip(&revs) {
            assert!(*u >= a - 1e-6 && *u <= 1.0, "{regime} {a}: {u}");
        }
        assert!(revs.windows(2).all(|w| w[0] <= w[1] + 1e-9), "{regime}: {revs:?}");
    }
}

/// Fees and key rewards are interchangeable until the attacker starts
/// orphaning honest blocks in earnest.
#[test]
fn fee_and_key_regimes_agree_below_029() {
    let alphas = [0.05, 0.1, 0.15, 0.2, 0.25, 0.29];
    let diffs: Vec<f64> = alphas
        .par_iter()
        .map(|&a| (revenue(a, Regime::Fee, 20) - revenue(a, Regime::Key, 20)).abs())
        .collect();
    assert!(diffs.iter().all(|d| *d < 0.005), "{diffs:?}");
}

#[test]
fn truncation_20_is_adequate_up_to_040() {
    let alphas = [0.1, 0.2, 0.3, 0.35, 0.4];
    let diffs: Vec<f64> = alphas
        .par_iter()
        .map(|&a| (revenue(a, Regime::Equal, 20) - revenue(a, Regime::Equal, 40)).abs())
        .collect();
    assert!(diffs.iter().all(|d| *d < 1e-3), "{diffs:?}");
}

#[test]
fn policy_examples() {
    let low = solve(&build_transitions(&params(0.1), 20).unwrap(), &Regime::Equal.weights(), 1e-9, 1e-7).unwrap();
    let s = MdpState::new(0, 1, Fork::NoTie, LastMicro::HonestIncluded);
    assert_eq!(policy_actions(&low, &s).unwrap(), MdpAction::Adopt);

    let high = solve(&build_transitions(&params(0.45), 20).unwrap(), &Regime::Key.weights(), 1e-9, 1e-7).unwrap();
    let s = MdpState::new(2, 1, Fork::NoTie, LastMicro::HonestIncluded);
    let action = policy_actions(&high, &s).unwrap();
    assert!(!matches!(action, MdpAction::Adopt | MdpAction::AdoptE), "{action}");

    let outside = MdpState::new(25, 0, Fork::NoTie, LastMicro::HonestIncluded);
    assert_eq!(policy_actions(&high, &outside), Err(SolveError::UnknownState(outside)));
}

#[test]
fn policy_covers_every_reachable_state() {
    let table = build_transitions(&params(0.3), 12).unwrap();
    let result = solve(&table, &Regime::Fee.weights(), 1e-9, 1e-7).unwrap();
    assert_eq!(result.policy.len(), table.len());
    for s in table.states() {
        let a = policy_actions(&result, s).unwrap();
        assert!(table.actions(s).contains(&a));
    }
    let tie_prime = MdpState::new(2, 1, Fork::TiePrime, LastMicro::HonestIncluded);
    assert!(table.actions(&tie_prime).contains(&MdpAction::Revert));
    assert_eq!(result.truncation, 12);
    assert!(result.outer_iterations > 0 && result.inner_tolerance < 1e-9);
}
