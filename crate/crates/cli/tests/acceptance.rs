//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ng_incentives::closedform::{
    extension_attack_revenue, feasible_interval, inclusion_attack_revenue, optimal_extension_revenue,
    optimal_inclusion_revenue, TransactionClass,
};
use ng_incentives::concentration::{estimate_pair_deviation, pair_deviation_bound};
use ng_incentives::feescan::{distribution, parse_fees};
use ng_incentives::mdp::{
    build_transitions, build_transitions_with, solve, Fork, LastMicro, MdpAction, MdpState, RewardAccounting,
    RewardTuple, SolveResult,
};
use ng_incentives::model::{ProtocolParams, Regime};
use ng_incentives::simulator::{run, sweep, SimConfig, Strategy};
use ng_incentives_cli::{cmd_bounds, BoundsArgs, Context, Options};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

fn params(alpha: f64, r: f64) -> ProtocolParams {
    ProtocolParams { alpha, split_ratio: r, gamma: 0.5, ..ProtocolParams::default() }
}

fn solve_at(alpha: f64, r: f64, regime: Regime) -> SolveResult {
    let table = build_transitions(&params(alpha, r), 20).expect("table builds");
    solve(&table, &regime.weights(), 1e-9, 1e-7).expect("solver converges")
}

fn split_ratio_interval() -> Outcome {
    let ctx = Context::new(Options { alpha: Some(0.25), ..Options::default() }).unwrap();
    let env = cmd_bounds(&ctx, &BoundsArgs { class: TransactionClass::Whale }).unwrap();
    let lo = env.values("feasible_lower")[0].unwrap();
    let hi = env.values("feasible_upper")[0].unwrap();
    let round = |x: f64| (x * 1e4).round() / 1e4;
    let pass = round(lo) == 0.3684 && round(hi) == 0.4286 && lo < 0.4 && 0.4 < hi;
    outcome(pass, format!("whale interval at alpha=0.25: ({lo:.6}, {hi:.6}), contains 0.4"))
}

fn whale_threshold() -> Outcome {
    let empty = |a: f64| feasible_interval(a, TransactionClass::Whale).unwrap().empty;
    let (mut lo, mut hi) = (0.2, 0.4);
    if empty(lo) || !empty(hi) {
        return outcome(false, "emptiness does not change sign on [0.2, 0.4]");
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if empty(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let root = 1.0 - std::f64::consts::SQRT_2 / 2.0;
    let found = 0.5 * (lo + hi);
    outcome((found - root).abs() < 1e-6, format!("emptiness starts at {found:.9}, root {root:.9}"))
}

fn attacks_vs_simulation() -> Outcome {
    let mut configs = Vec::new();
    let mut targets = Vec::new();
    for &a in &[0.1, 0.2, 0.3] {
        for &r in &[0.2, 0.4, 0.8] {
            let p = Regime::Fee.apply(ProtocolParams { alpha: a, split_ratio: r, ..ProtocolParams::default() });
            for &rho in &[0.0, 0.5, 1.0] {
                configs.push(SimConfig::new(p, Strategy::Inclusion { rho }, 1_000_000, 1000 + configs.len() as u64));
                targets.push(inclusion_attack_revenue(a, r, rho).unwrap());
                configs.push(SimConfig::new(p, Strategy::Extension { rho }, 1_000_000, 1000 + configs.len() as u64));
                targets.push(extension_attack_revenue(a, r, rho).unwrap());
            }
        }
    }
    let reports = sweep(&configs).unwrap();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for ((rep, target), c) in reports.iter().zip(&targets).zip(&configs) {
        let err = (rep.relative_revenue - target).abs();
        let tol = (4.0 * rep.std_error).max(0.005);
        worst = worst.max(err / tol);
        if err >= tol {
            failures.push(format!("{} a={} r={}", c.strategy.name(), c.params.alpha, c.params.split_ratio));
        }
    }
    outcome(
        failures.is_empty(),
        format!("{} runs, worst |error|/tolerance = {worst:.3}{}", configs.len(), fail_list(&failures)),
    )
}

fn fail_list(failures: &[String]) -> String {
    if failures.is_empty() {
        String::new()
    } else {
        format!("; failing: {}", failures.join(", "))
    }
}

fn mirror_symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (a, r, rho): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
        let d = (extension_attack_revenue(a, r, rho).unwrap() - inclusion_attack_revenue(a, 1.0 - r, rho).unwrap()).abs();
        worst = worst.max(d);
    }
    outcome(worst <= 1e-12, format!("1000 triples, max difference {worst:.3e}"))
}

fn capacity_compatibility() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = Vec::new();
    let mut n = 0;
    while n < 500 {
        let a: f64 = rng.gen_range(0.0..0.45);
        let beta = 1.0 - a;
        let r: f64 = rng.gen_range(a..beta);
        if !(a < r && r < beta) {
            continue;
        }
        n += 1;
        for (name, got) in [("inclusion", optimal_inclusion_revenue(a, r)), ("extension", optimal_extension_revenue(a, r))] {
            if got != Ok((a, 0.0)) {
                bad.push(format!("{name} a={a} r={r}: {got:?}"));
            }
        }
    }
    outcome(bad.is_empty(), format!("500 points, {} not honest-optimal{}", bad.len(), fail_list(&bad)))
}

fn profit_threshold() -> Outcome {
    let r = 0.4;
    let grid: Vec<f64> = (0..=45).map(|i| i as f64 / 100.0).collect();
    let rows: Vec<(f64, [f64; 3])> = grid
        .par_iter()
        .map(|&a| {
            let table = build_transitions(&params(a, r), 20).unwrap();
            let rev = Regime::ALL.map(|reg| solve(&table, &reg.weights(), 1e-9, 1e-7).unwrap().revenue);
            (a, rev)
        })
        .collect();
    let mut bad = Vec::new();
    for (a, rev) in &rows {
        for (reg, u) in Regime::ALL.iter().zip(rev) {
            let ok = if *a <= 0.22 + 1e-12 {
                (u - a).abs() <= 1e-3
            } else if *a >= 0.25 - 1e-12 {
                u - a > 1e-3
            } else {
                true
            };
            if !ok {
                bad.push(format!("{} a={a}: {u:.5}", reg.name()));
            }
        }
    }
    // Crossing: smallest alpha with revenue above the fair share, refined by bisection.
    let crossings: Vec<f64> = Regime::ALL
        .par_iter()
        .map(|reg| {
            let profitable = |a: f64| solve_at(a, r, *reg).revenue - a > 1e-5;
            let (mut lo, mut hi) = (0.20, 0.26);
            while hi - lo > 1e-4 {
                let mid = 0.5 * (lo + hi);
                if profitable(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();
    let in_window = crossings.iter().all(|c| (0.2271..=0.2371).contains(c));
    let shown: Vec<String> =
        Regime::ALL.iter().zip(&crossings).map(|(reg, c)| format!("{}={c:.4}", reg.name())).collect();
    outcome(
        bad.is_empty() && in_window,
        format!("grid 0..0.45 ok for {}/{} cells; crossings {}{}", rows.len() * 3 - bad.len(), rows.len() * 3, shown.join(" "), fail_list(&bad)),
    )
}

fn r_plateau() -> Outcome {
    let a = 0.2321;
    let grid: Vec<f64> = (0..=50).map(|i| i as f64 * 0.02).collect();
    let rows: Vec<[f64; 2]> = grid
        .par_iter()
        .map(|&r| {
            let table = build_transitions(&params(a, r), 20).unwrap();
            [Regime::Fee, Regime::Equal].map(|reg| solve(&table, &reg.weights(), 1e-9, 1e-7).unwrap().revenue)
        })
        .collect();
    let mut pass = true;
    let mut notes = Vec::new();
    for (k, reg) in [Regime::Fee, Regime::Equal].iter().enumerate() {
        let min = rows.iter().map(|row| row[k]).fold(f64::INFINITY, f64::min);
        let plateau: Vec<f64> = grid.iter().zip(&rows).filter(|(_, row)| row[k] - min <= 1e-3).map(|(r, _)| *r).collect();
        let inside: Vec<f64> = grid.iter().copied().filter(|r| *r > 0.2321 && *r < 0.7679).collect();
        let ok = (min - a).abs() <= 1e-3 && plateau == inside;
        pass &= ok;
        notes.push(format!(
            "{}: min-alpha={:+.1e}, plateau r in [{:.2}, {:.2}] ({} points)",
            reg.name(),
            min - a,
            plateau.first().copied().unwrap_or(f64::NAN),
            plateau.last().copied().unwrap_or(f64::NAN),
            plateau.len()
        ));
    }
    outcome(pass, notes.join("; "))
}

fn regime_ordering() -> Outcome {
    let rows: Vec<(f64, [f64; 3])> = [0.35, 0.40, 0.45]
        .par_iter()
        .map(|&a| {
            let table = build_transitions(&params(a, 0.4), 20).unwrap();
            (a, Regime::ALL.map(|reg| solve(&table, &reg.weights(), 1e-9, 1e-7).unwrap().revenue))
        })
        .collect();
    let ordered = rows.iter().all(|(_, [fee, equal, key])| fee >= equal && equal >= key);
    let [fee, _, key] = rows[2].1;
    let shown: Vec<String> =
        rows.iter().map(|(a, u)| format!("a={a}: {:.4}/{:.4}/{:.4}", u[0], u[1], u[2])).collect();
    outcome(ordered && fee - key > 1e-3, format!("fee/equal/key {}", shown.join(", ")))
}

fn rollout_oracle() -> Outcome {
    let cells: Vec<(f64, Regime)> = [0.3, 0.4].iter().flat_map(|&a| [(a, Regime::Fee), (a, Regime::Key)]).collect();
    let rows: Vec<(f64, Regime, f64, f64)> = cells
        .par_iter()
        .map(|&(a, reg)| {
            let p = reg.apply(params(a, 0.4));
            let res = solve(&build_transitions(&p, 20).unwrap(), &reg.weights(), 1e-9, 1e-7).unwrap();
            let target = res.revenue;
            let c = SimConfig::new(p, Strategy::MdpPolicy { result: Box::new(res) }, 1_000_000, 77);
            (a, reg, target, run(&c).unwrap().relative_revenue)
        })
        .collect();
    let worst = rows.iter().map(|r| (r.3 - r.2).abs()).fold(0.0, f64::max);
    let shown: Vec<String> =
        rows.iter().map(|(a, reg, t, s)| format!("{} a={a}: {t:.4} vs {s:.4}", reg.name())).collect();
    outcome(worst < 0.005, format!("max |rollout - solver| = {worst:.4} ({})", shown.join(", ")))
}

fn table_rows() -> Outcome {
    use Fork::{NoTie, Tie, TiePrime};
    use LastMicro::{HonestExcluded as Hex, HonestIncluded as Hin, SelfishHidden as Sh, SelfishPublished as Sp};
    use MdpAction::*;

    let (a, g, r) = (0.3, 0.4, 0.35);
    let p = ProtocolParams { alpha: a, gamma: g, split_ratio: r, ..ProtocolParams::default() };
    let t = build_transitions_with(&p, 20, RewardAccounting::Tabulated).unwrap();
    let st = MdpState::new;
    let rw = RewardTuple::new;
    let z = RewardTuple::ZERO;
    let (la, lh) = (5u32, 3u32);
    let h = lh as f64;
    let fresh = |lm, rew| vec![(st(1, 0, NoTie, lm), a, rew), (st(0, 1, NoTie, lm), 1.0 - a, rew)];
    let published = |lm, rew| vec![(st(la - lh, 0, NoTie, lm), a, rew), (st(la - lh - 1, 1, NoTie, lm), 1.0 - a, rew)];
    let race = |tie, lm, landing, rew| {
        vec![
            (st(la + 1, lh, tie, lm), a, z),
            (st(la - lh, 1, NoTie, landing), g * (1.0 - a), rew),
            (st(la, lh + 1, NoTie, lm), (1.0 - g) * (1.0 - a), z),
        ]
    };
    let match_cases = |lm| match lm {
        Hin => rw(0, r, lh, h - 1.0 + (1.0 - r)),
        Hex => rw(0, 0.0, lh, h - 1.0),
        _ => rw(0, 0.0, lh, h),
    };

    type Row = (MdpState, MdpAction, Vec<(MdpState, f64, RewardTuple)>);
    let mut groups: Vec<(&str, Vec<Row>)> = Vec::new();
    let mut adopt = |name, lms: &[LastMicro], rew: RewardTuple| {
        let rows = [(Adopt, Hin), (AdoptE, Hex)]
            .iter()
            .flat_map(|&(act, land)| lms.iter().map(move |&lm| (st(la, lh, NoTie, lm), act, fresh(land, rew))))
            .collect();
        groups.push((name, rows));
    };
    adopt("adopt from S_h", &[Sh], rw(lh, h, 0, 0.0));
    adopt("adopt from S_p", &[Sp], rw(lh, h - 1.0 + (1.0 - r), 0, r));
    adopt("adopt from H", &[Hin, Hex], rw(lh, h - 1.0, 0, 0.0));
    let mut over = |name, lms: &[LastMicro], rew: RewardTuple| {
        let rows = [(Override, Sp), (OverrideH, Sh)]
            .iter()
            .flat_map(|&(act, land)| lms.iter().map(move |&lm| (st(la, lh, NoTie, lm), act, published(land, rew))))
            .collect();
        groups.push((name, rows));
    };
    over("override from H_ex", &[Hex], rw(0, 0.0, lh + 1, h + 1.0));
    over("override from H_in", &[Hin], rw(0, r, lh + 1, h + (1.0 - r)));
    over("override from S", &[Sp, Sh], rw(0, 0.0, lh + 1, h));
    let all = LastMicro::ALL;
    groups.push((
        "wait",
        all.iter()
            .map(|&lm| (st(la, lh, NoTie, lm), Wait, vec![(st(la + 1, lh, NoTie, lm), a, z), (st(la, lh + 1, NoTie, lm), 1.0 - a, z)]))
            .collect(),
    ));
    groups.push(("match", all.iter().map(|&lm| (st(la, lh, NoTie, lm), Match, race(Tie, lm, Sp, match_cases(lm)))).collect()));
    groups.push(("matchH", all.iter().map(|&lm| (st(la, lh, NoTie, lm), MatchH, race(TiePrime, lm, Sh, match_cases(lm)))).collect()));
    groups.push(("wait in tie", all.iter().map(|&lm| (st(la, lh, Tie, lm), Wait, race(Tie, lm, Sp, match_cases(lm)))).collect()));
    groups.push(("wait in tie'", all.iter().map(|&lm| (st(la, lh, TiePrime, lm), Wait, race(TiePrime, lm, Sh, match_cases(lm)))).collect()));
    groups.push(("revert tie'", all.iter().map(|&lm| (st(la, lh, TiePrime, lm), Revert, vec![(st(la, lh, Tie, lm), 1.0, z)])).collect()));
    groups.push((
        "revert hidden",
        vec![
            (st(2, 0, NoTie, Sh), Revert, vec![(st(2, 0, NoTie, Sp), 1.0, z)]),
            (st(0, 2, NoTie, Hex), Revert, vec![(st(0, 2, NoTie, Hin), 1.0, z)]),
        ],
    ));

    let same = |x: &RewardTuple, y: &RewardTuple| {
        x.r_h == y.r_h && x.r_a == y.r_a && (x.t_h - y.t_h).abs() < 1e-12 && (x.t_a - y.t_a).abs() < 1e-12
    };
    let mut bad = Vec::new();
    for (name, rows) in &groups {
        for (s, act, expected) in rows {
            let ok = t.outcomes(s, *act).is_some_and(|got| {
                got.len() == expected.len()
                    && got.iter().zip(expected).all(|(x, y)| x.0 == y.0 && (x.1 - y.1).abs() < 1e-15 && same(&x.2, &y.2))
            });
            if !ok {
                bad.push(format!("{name}: {s} {act}"));
            }
        }
    }
    let mut worst_sum = 0.0f64;
    for acc in [RewardAccounting::Tabulated, RewardAccounting::Conserving] {
        let t = build_transitions_with(&p, 20, acc).unwrap();
        for (s, act) in t.pairs() {
            let sum: f64 = t.transitions(&s, act).unwrap().iter().map(|x| x.prob).sum();
            worst_sum = worst_sum.max((sum - 1.0).abs());
        }
    }
    outcome(
        bad.is_empty() && worst_sum <= 1e-12,
        format!("{} row groups checked, {} mismatches, max |sum-1| = {worst_sum:.1e}{}", groups.len(), bad.len(), fail_list(&bad)),
    )
}

fn concentration_bound() -> Outcome {
    let cells: Vec<(f64, f64, u64)> = [0.1, 0.3, 0.5]
        .iter()
        .flat_map(|&a| [0.1, 0.3].iter().flat_map(move |&d| [1_000u64, 10_000].map(|m| (a, d, m))))
        .collect();
    let rows: Vec<(f64, f64, u64, f64, f64, f64)> = cells
        .par_iter()
        .enumerate()
        .map(|(i, &(a, d, m))| {
            let est = estimate_pair_deviation(a, m, d, 10_000, 500 + i as u64);
            (a, d, m, est.probability, est.std_error(), pair_deviation_bound(a, m, d).unwrap())
        })
        .collect();
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| r.3 > r.5 + 3.0 * r.4)
        .map(|r| format!("a={} d={} m={}: {} > {}", r.0, r.1, r.2, r.3, r.5))
        .collect();
    let max_p = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    outcome(bad.is_empty(), format!("{} cells, largest empirical probability {max_p:.4}{}", rows.len(), fail_list(&bad)))
}

fn fee_fixture() -> Outcome {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/fees_synthetic.csv");
    let text = std::fs::read_to_string(&path).expect("fixture is shipped");
    let hist = distribution(&parse_fees(&text).unwrap(), &[0.0001, 0.0005]).unwrap();
    let (c1, c2) = (hist.cdf_at(0.0001), hist.cdf_at(0.0005));
    outcome(c1 == 0.778 && c2 == 0.985, format!("cdf(0.0001) = {c1}, cdf(0.0005) = {c2} over {} fees", hist.count))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "split-ratio interval", budget: Duration::from_secs(1), check: split_ratio_interval },
        Criterion { id: 2, name: "whale infeasibility threshold", budget: Duration::from_secs(1), check: whale_threshold },
        Criterion { id: 3, name: "closed-form attacks vs simulator", budget: Duration::from_secs(120), check: attacks_vs_simulation },
        Criterion { id: 4, name: "mirror symmetry", budget: Duration::from_secs(1), check: mirror_symmetry },
        Criterion { id: 5, name: "honesty under capacity", budget: Duration::from_secs(1), check: capacity_compatibility },
        Criterion { id: 6, name: "selfish-mining profit threshold", budget: Duration::from_secs(600), check: profit_threshold },
        Criterion { id: 7, name: "split-ratio plateau", budget: Duration::from_secs(900), check: r_plateau },
        Criterion { id: 8, name: "regime ordering", budget: Duration::from_secs(600), check: regime_ordering },
        Criterion { id: 9, name: "policy rollout vs solver", budget: Duration::from_secs(300), check: rollout_oracle },
        Criterion { id: 10, name: "transition table rows", budget: Duration::from_secs(60), check: table_rows },
        Criterion { id: 11, name: "pair concentration", budget: Duration::from_secs(120), check: concentration_bound },
        Criterion { id: 12, name: "fee distribution fixture", budget: Duration::from_secs(10), check: fee_fixture },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.check)();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed <= c.budget;
        failed += usize::from(!pass);
        let late = if elapsed > c.budget { format!(" over budget {:?}", c.budget) } else { String::new() };
        println!(
            "{} AC{:<2} {}: {} [{:.2}s{late}]",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            result.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
