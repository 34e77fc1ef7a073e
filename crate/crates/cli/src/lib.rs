//! Command-line front end: every subcommand turns flags into an
//! [`OutputEnvelope`] of plot-ready rows.

pub mod output;

use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use ng_incentives::closedform::{self, DomainError, TransactionClass};
use ng_incentives::concentration::{self, ConcentrationError};
use ng_incentives::feescan::{self, FeeScanError};
use ng_incentives::mdp::{self, RewardAccounting, SolveError, SolverConfig};
use ng_incentives::model::{parse_kv, ModelError, ProtocolParams, Regime, RewardWeights};
use ng_incentives::simulator::{self, IntervalMode, SimConfig, SimError, Strategy};

pub use output::{Cell, Format, OutputEnvelope};

/// Caps the worker pool used by grid subcommands.
pub const THREADS_ENV: &str = "NG_INCENTIVES_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Concentration(#[from] ConcentrationError),
    #[error(transparent)]
    Fees(#[from] FeeScanError),
    #[error("alpha {alpha}, r {r}, regime {regime}: {source}")]
    Solve { alpha: f64, r: f64, regime: Regime, source: SolveError },
    #[error(transparent)]
    Table(#[from] mdp::TableError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// A list of values given as `a:b:step` (inclusive) or `x,y,z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let [a, b, step] = parts[..] else {
                return Err(format!("grid `{s}` must look like start:end:step"));
            };
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a {
                return Err(format!("grid `{s}` needs start <= end and a positive step"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            if n > 1_000_000 {
                return Err(format!("grid `{s}` has too many points"));
            }
            Ok(Grid((0..=n).map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12).collect()))
        } else {
            let values = s.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
            Ok(Grid(values))
        }
    }
}

/// One or more regimes, comma separated.
#[derive(Debug, Clone, PartialEq)]
pub struct Regimes(pub Vec<Regime>);

impl FromStr for Regimes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(Regimes(Regime::ALL.to_vec()));
        }
        s.split(',').map(|t| t.trim().parse()).collect::<Result<Vec<_>, _>>().map(Regimes)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Attacker mining share.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Attacker shares as start:end:step or a comma list.
    #[arg(long = "alpha-grid", global = true)]
    pub alpha_grid: Option<Grid>,
    /// Fee split ratio.
    #[arg(long, global = true)]
    pub r: Option<f64>,
    #[arg(long = "r-grid", global = true)]
    pub r_grid: Option<Grid>,
    /// Withheld or rejected microblock fraction; a single value or a grid.
    #[arg(long, global = true)]
    pub rho: Option<Grid>,
    /// Share of honest power mining on the attacker's branch in a tie.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// fee, equal, key, a comma list, or all.
    #[arg(long, global = true)]
    pub regime: Option<Regimes>,
    /// Truncation of branch lengths in the decision process.
    #[arg(long = "L", global = true)]
    pub truncation: Option<u32>,
    /// Key blocks per simulation, or sequence length for pair statistics.
    #[arg(long, global = true)]
    pub m: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub format: Option<Format>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Flat `name = value` file; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "ng-incentives", version, about = "Incentive analysis for key-block / microblock chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Split-ratio bounds over an alpha grid.
    Bounds(BoundsArgs),
    /// Closed-form attack revenue over a rho grid.
    Revenue(RevenueArgs),
    /// Optimal selfish-mining revenue from the decision process.
    Mdp(MdpArgs),
    /// Monte Carlo revenue of a strategy.
    Simulate(SimulateArgs),
    /// Adjacent-pair deviation frequency against its analytic bound.
    Pairs,
    /// Fee histogram, CDF and whale split of a fee file.
    Fees(FeesArgs),
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    /// whale, regular or all.
    #[arg(long, default_value = "all")]
    pub class: TransactionClass,
}

impl Default for BoundsArgs {
    fn default() -> Self {
        BoundsArgs { class: TransactionClass::All }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attack {
    Inclusion,
    Extension,
    Both,
}

impl FromStr for Attack {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inclusion" => Ok(Attack::Inclusion),
            "extension" => Ok(Attack::Extension),
            "both" => Ok(Attack::Both),
            other => Err(format!("unknown attack `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RevenueArgs {
    /// inclusion, extension or both.
    #[arg(long, default_value = "both")]
    pub attack: Attack,
}

impl Default for RevenueArgs {
    fn default() -> Self {
        RevenueArgs { attack: Attack::Both }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MdpArgs {
    #[arg(long = "eps-inner", default_value_t = 1e-9)]
    pub eps_inner: f64,
    #[arg(long = "eps-outer", default_value_t = 1e-7)]
    pub eps_outer: f64,
    #[arg(long = "max-sweeps", default_value_t = 200_000)]
    pub max_sweeps: usize,
    /// conserving or tabulated fee accounting.
    #[arg(long, default_value = "conserving")]
    pub accounting: RewardAccounting,
    /// Also write every solved policy as JSON to this path.
    #[arg(long = "policy-out")]
    pub policy_out: Option<PathBuf>,
}

impl Default for MdpArgs {
    fn default() -> Self {
        MdpArgs {
            eps_inner: 1e-9,
            eps_outer: 1e-7,
            max_sweeps: 200_000,
            accounting: RewardAccounting::Conserving,
            policy_out: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Honest,
    Inclusion,
    Extension,
    Mdp,
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "honest" => Ok(StrategyKind::Honest),
            "inclusion" => Ok(StrategyKind::Inclusion),
            "extension" => Ok(StrategyKind::Extension),
            "mdp" | "mdpPolicy" => Ok(StrategyKind::Mdp),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// honest, inclusion, extension or mdp.
    #[arg(long, default_value = "honest")]
    pub strategy: StrategyKind,
    /// exponential or deterministic interval fee mass.
    #[arg(long = "interval-mode", default_value = "exponential")]
    pub interval_mode: IntervalMode,
}

impl Default for SimulateArgs {
    fn default() -> Self {
        SimulateArgs { strategy: StrategyKind::Honest, interval_mode: IntervalMode::Exponential }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FeesArgs {
    /// Ascending bucket edges, comma separated.
    #[arg(long, default_value = "0.00001,0.00005,0.0001,0.0005,0.001,0.01")]
    pub edges: Grid,
    /// Fees at or above this are whale transactions.
    #[arg(long = "whale-threshold", default_value_t = 0.0005)]
    pub whale_threshold: f64,
}

impl Default for FeesArgs {
    fn default() -> Self {
        FeesArgs { edges: "0.00001,0.00005,0.0001,0.0005,0.001,0.01".parse().unwrap(), whale_threshold: 0.0005 }
    }
}

/// Options after merging a config file, plus the base protocol parameters.
#[derive(Debug, Clone)]
pub struct Context {
    pub options: Options,
    pub base: ProtocolParams,
}

impl Context {
    pub fn new(options: Options) -> Result<Self, CliError> {
        let mut ctx = Context { options, base: ProtocolParams::default() };
        if let Some(path) = ctx.options.config.clone() {
            let text = read(&path)?;
            ctx.merge_config(&text)?;
        }
        Ok(ctx)
    }

    fn merge_config(&mut self, text: &str) -> Result<(), CliError> {
        let o = &mut self.options;
        for (name, value, line) in parse_kv(text)? {
            let bad = |m: String| CliError::Model(ModelError::Config { line, message: m });
            macro_rules! fill {
                ($field:expr) => {
                    if $field.is_none() {
                        $field = Some(value.parse().map_err(|_| bad(format!("bad value `{value}` for {name}")))?);
                    }
                };
            }
            match name.as_str() {
                "alpha" => fill!(o.alpha),
                "alpha_grid" | "alpha-grid" => fill!(o.alpha_grid),
                "r" | "split_ratio" => fill!(o.r),
                "r_grid" | "r-grid" => fill!(o.r_grid),
                "rho" => fill!(o.rho),
                "gamma" => fill!(o.gamma),
                "regime" => fill!(o.regime),
                "L" | "truncation" => fill!(o.truncation),
                "m" => fill!(o.m),
                "trials" => fill!(o.trials),
                "delta" => fill!(o.delta),
                "seed" => fill!(o.seed),
                "format" => fill!(o.format),
                _ => self.base.set(&name, &value).map_err(bad)?,
            }
        }
        Ok(())
    }

    fn format(&self) -> Format {
        self.options.format.unwrap_or_default()
    }

    fn alphas(&self, default: &[f64]) -> Vec<f64> {
        match (&self.options.alpha_grid, self.options.alpha) {
            (Some(g), _) => g.0.clone(),
            (None, Some(a)) => vec![a],
            (None, None) => default.to_vec(),
        }
    }

    fn ratios(&self) -> Vec<f64> {
        match (&self.options.r_grid, self.options.r) {
            (Some(g), _) => g.0.clone(),
            (None, Some(r)) => vec![r],
            (None, None) => vec![self.base.split_ratio],
        }
    }

    fn rhos(&self, default: &[f64]) -> Vec<f64> {
        self.options.rho.as_ref().map_or_else(|| default.to_vec(), |g| g.0.clone())
    }

    fn gamma(&self) -> f64 {
        self.options.gamma.unwrap_or(self.base.gamma)
    }

    fn regimes(&self) -> Vec<Regime> {
        self.options.regime.as_ref().map_or_else(|| Regime::ALL.to_vec(), |r| r.0.clone())
    }

    fn seed(&self) -> u64 {
        self.options.seed.unwrap_or(0)
    }

    fn params(&self, alpha: f64, r: f64) -> Result<ProtocolParams, CliError> {
        Ok(ProtocolParams { alpha, split_ratio: r, gamma: self.gamma(), ..self.base }.validate()?)
    }
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })
}

fn check_fractions(name: &str, values: &[f64]) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(usage(format!("{name} grid is empty")));
    }
    match values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(usage(format!("{name} = {v} is outside [0,1]"))),
        None => Ok(()),
    }
}

/// Rows: alpha, the three whale bounds, the capacity interval and the feasible interval.
pub fn cmd_bounds(ctx: &Context, args: &BoundsArgs) -> Result<OutputEnvelope, CliError> {
    let alphas = ctx.alphas(&Grid::from_str("0:0.49:0.01").unwrap().0);
    if let Some(a) = alphas.iter().find(|a| !(0.0..0.5).contains(*a)) {
        return Err(usage(format!("alpha = {a} is outside [0, 0.5)")));
    }
    let mut env = OutputEnvelope::new(
        "bounds",
        ctx.format(),
        &[
            "alpha",
            "inclusion_lower_v1",
            "inclusion_lower_v2",
            "extension_upper",
            "capacity_lower",
            "capacity_upper",
            "feasible_lower",
            "feasible_upper",
            "empty",
        ],
    );
    env.param("class", args.class).param("alpha", &alphas);
    for a in alphas {
        let b = closedform::ratio_bounds(a)?;
        let f = closedform::feasible_interval(a, args.class)?;
        env.push(vec![
            a.into(),
            b.inclusion_lower_v1.into(),
            b.inclusion_lower_v2.into(),
            b.extension_upper.into(),
            b.capacity_lower.into(),
            b.capacity_upper.into(),
            f.lower.into(),
            f.upper.into(),
            f.empty.into(),
        ]);
    }
    Ok(env)
}

type RevenueFn = fn(f64, f64, f64) -> Result<f64, DomainError>;

/// Rows: attack, alpha, r, rho, closed-form revenue.
pub fn cmd_revenue(ctx: &Context, args: &RevenueArgs) -> Result<OutputEnvelope, CliError> {
    let alphas = ctx.alphas(&[ctx.base.alpha]);
    let ratios = ctx.ratios();
    let rhos = ctx.rhos(&Grid::from_str("0:1:0.1").unwrap().0);
    check_fractions("alpha", &alphas)?;
    check_fractions("r", &ratios)?;
    check_fractions("rho", &rhos)?;
    let attacks: &[Attack] = match args.attack {
        Attack::Both => &[Attack::Inclusion, Attack::Extension],
        Attack::Inclusion => &[Attack::Inclusion],
        Attack::Extension => &[Attack::Extension],
    };
    let mut env = OutputEnvelope::new("revenue", ctx.format(), &["attack", "alpha", "r", "rho", "revenue"]);
    env.param("alpha", &alphas).param("r", &ratios).param("rho", &rhos);
    for &attack in attacks {
        let (name, f): (&str, RevenueFn) = match attack {
            Attack::Inclusion => ("inclusion", closedform::inclusion_attack_revenue),
            _ => ("extension", closedform::extension_attack_revenue),
        };
        for &a in &alphas {
            for &r in &ratios {
                for &rho in &rhos {
                    env.push(vec![name.into(), a.into(), r.into(), rho.into(), f(a, r, rho)?.into()]);
                }
            }
        }
    }
    Ok(env)
}

#[derive(serde::Serialize)]
struct PolicyExport {
    alpha: f64,
    r: f64,
    gamma: f64,
    regime: Regime,
    revenue: f64,
    policy: Vec<mdp::PolicyEntry>,
}

/// Rows: alpha, regime, r, gamma, revenue and solver diagnostics, ordered by
/// alpha, then r, then regime.
pub fn cmd_mdp(ctx: &Context, args: &MdpArgs) -> Result<OutputEnvelope, CliError> {
    let alphas = ctx.alphas(&Grid::from_str("0:0.45:0.05").unwrap().0);
    let ratios = ctx.ratios();
    let regimes = ctx.regimes();
    let cap = ctx.options.truncation.unwrap_or(20);
    check_fractions("alpha", &alphas)?;
    check_fractions("r", &ratios)?;
    if cap < 2 {
        return Err(usage("--L must be at least 2"));
    }
    let config = SolverConfig {
        eps_inner: args.eps_inner,
        eps_outer: args.eps_outer,
        max_sweeps: args.max_sweeps,
        ..SolverConfig::default()
    };
    let points: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| ratios.iter().map(move |&r| (a, r))).collect();
    let solved: Vec<Vec<(Regime, mdp::SolveResult)>> = points
        .par_iter()
        .map(|&(a, r)| {
            let params = ctx.params(a, r)?;
            let table = mdp::build_transitions_with(&params, cap, args.accounting)?;
            regimes
                .iter()
                .map(|&regime| {
                    mdp::solve_with(&table, &regime.weights(), &config)
                        .map(|res| (regime, res))
                        .map_err(|source| CliError::Solve { alpha: a, r, regime, source })
                })
                .collect()
        })
        .collect::<Result<_, CliError>>()?;

    let gamma = ctx.gamma();
    let mut env = OutputEnvelope::new(
        "mdp",
        ctx.format(),
        &["alpha", "regime", "r", "gamma", "revenue", "outer_iterations", "inner_iterations", "truncation"],
    );
    env.param("alpha", &alphas)
        .param("r", &ratios)
        .param("gamma", gamma)
        .param("regimes", &regimes)
        .param("L", cap)
        .param("eps_inner", args.eps_inner)
        .param("eps_outer", args.eps_outer)
        .param("accounting", args.accounting);
    let mut exports = Vec::new();
    for (&(a, r), results) in points.iter().zip(&solved) {
        for (regime, res) in results {
            env.push(vec![
                a.into(),
                regime.name().into(),
                r.into(),
                gamma.into(),
                res.revenue.into(),
                res.outer_iterations.into(),
                res.inner_iterations.into(),
                res.truncation.into(),
            ]);
            if args.policy_out.is_some() {
                exports.push(PolicyExport {
                    alpha: a,
                    r,
                    gamma,
                    regime: *regime,
                    revenue: res.revenue,
                    policy: res.policy_entries(),
                });
            }
        }
    }
    if let Some(path) = &args.policy_out {
        let text = serde_json::to_string_pretty(&exports).expect("policies serialize");
        fs::write(path, text).map_err(|source| CliError::Io { path: path.clone(), source })?;
    }
    Ok(env)
}

/// Rows: one simulation per (alpha, rho) point.
pub fn cmd_simulate(ctx: &Context, args: &SimulateArgs) -> Result<OutputEnvelope, CliError> {
    let alphas = ctx.alphas(&[ctx.base.alpha]);
    let rhos = match args.strategy {
        StrategyKind::Inclusion | StrategyKind::Extension => ctx.rhos(&[1.0]),
        _ => vec![0.0],
    };
    let r = ctx.options.r.unwrap_or(ctx.base.split_ratio);
    check_fractions("alpha", &alphas)?;
    check_fractions("rho", &rhos)?;
    let m = ctx.options.m.unwrap_or(1_000_000);
    let seed = ctx.seed();
    let regime = match ctx.options.regime.as_ref().map(|r| r.0.as_slice()) {
        None => None,
        Some([one]) => Some(*one),
        Some(_) => return Err(usage("simulate takes a single --regime")),
    };
    let cap = ctx.options.truncation.unwrap_or(20);

    let mut configs = Vec::new();
    let mut solver_revenue = Vec::new();
    for &a in &alphas {
        for &rho in &rhos {
            let mut params = ctx.params(a, r)?;
            if let Some(regime) = regime {
                params = regime.apply(params);
            }
            let (strategy, target) = match args.strategy {
                StrategyKind::Honest => (Strategy::Honest, None),
                StrategyKind::Inclusion => (Strategy::Inclusion { rho }, None),
                StrategyKind::Extension => (Strategy::Extension { rho }, None),
                StrategyKind::Mdp => {
                    let weights = RewardWeights::from_params(&params)?;
                    let table = mdp::build_transitions(&params, cap)?;
                    let res = mdp::solve(&table, &weights, 1e-9, 1e-7).map_err(|source| CliError::Solve {
                        alpha: a,
                        r,
                        regime: regime.unwrap_or(Regime::Equal),
                        source,
                    })?;
                    let revenue = res.revenue;
                    (Strategy::MdpPolicy { result: Box::new(res) }, Some(revenue))
                }
            };
            let mut c = SimConfig::new(params, strategy, m, seed.wrapping_add(configs.len() as u64));
            c.interval_mode = args.interval_mode;
            configs.push(c);
            solver_revenue.push(target);
        }
    }
    let reports = simulator::sweep(&configs)?;

    let mut env = OutputEnvelope::new(
        "simulate",
        ctx.format(),
        &[
            "strategy",
            "alpha",
            "r",
            "rho",
            "relative_revenue",
            "std_error",
            "selfish_key_rewards",
            "honest_key_rewards",
            "selfish_fees",
            "honest_fees",
            "orphaned_fee_units",
            "z",
            "k",
            "boundary_visits",
            "solver_revenue",
        ],
    );
    env.metadata.seeds = configs.iter().map(|c| c.seed).collect();
    env.param("strategy", configs[0].strategy.name())
        .param("m", m)
        .param("interval_mode", args.interval_mode)
        .param("regime", regime.map(Regime::name))
        .param("gamma", ctx.gamma());
    for ((c, rep), target) in configs.iter().zip(&reports).zip(solver_revenue) {
        env.push(vec![
            c.strategy.name().into(),
            c.params.alpha.into(),
            c.params.split_ratio.into(),
            c.strategy.rho().into(),
            rep.relative_revenue.into(),
            rep.std_error.into(),
            rep.selfish_key_rewards.into(),
            rep.honest_key_rewards.into(),
            rep.selfish_fees.into(),
            rep.honest_fees.into(),
            rep.orphaned_fee_units.into(),
            rep.pair_counts.z.into(),
            rep.pair_counts.k.into(),
            rep.boundary_visits.into(),
            target.into(),
        ]);
    }
    Ok(env)
}

/// Rows: empirical deviation frequency of the pair count next to its bound.
pub fn cmd_pairs(ctx: &Context) -> Result<OutputEnvelope, CliError> {
    let alphas = ctx.alphas(&[0.3]);
    check_fractions("alpha", &alphas)?;
    let m = ctx.options.m.unwrap_or(10_001);
    let delta = ctx.options.delta.unwrap_or(0.1);
    let trials = ctx.options.trials.unwrap_or(10_000);
    let seed = ctx.seed();
    if m < 2 {
        return Err(usage("--m must be at least 2"));
    }
    if trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    let rows: Vec<Vec<Cell>> = alphas
        .par_iter()
        .enumerate()
        .map(|(i, &a)| {
            let est = concentration::estimate_pair_deviation(a, m, delta, trials, seed.wrapping_add(i as u64));
            let bound = if a > 0.0 && a < 1.0 { concentration::pair_deviation_bound(a, m, delta)? } else { 0.0 };
            Ok(vec![
                a.into(),
                m.into(),
                delta.into(),
                trials.into(),
                est.probability.into(),
                est.std_error().into(),
                bound.into(),
                est.mean_z.into(),
                est.expected.into(),
            ])
        })
        .collect::<Result<_, CliError>>()?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(usage("--delta must lie in (0,1)"));
    }
    let mut env = OutputEnvelope::new(
        "pairs",
        ctx.format(),
        &["alpha", "m", "delta", "trials", "empirical", "std_error", "bound", "mean_z", "expected_z"],
    );
    env.metadata.seeds = (0..alphas.len()).map(|i| seed.wrapping_add(i as u64)).collect();
    env.param("alpha", &alphas).param("m", m).param("delta", delta).param("trials", trials);
    env.rows = rows;
    Ok(env)
}

/// Rows of three kinds: `bucket` (half-open `[lower, upper)` counts),
/// `cdf` (fraction below each edge) and `class` (whale split statistics).
pub fn cmd_fees(ctx: &Context, args: &FeesArgs) -> Result<OutputEnvelope, CliError> {
    let path = ctx.options.input.clone().ok_or_else(|| usage("fees needs --input PATH"))?;
    let records = feescan::parse_fees(&read(&path)?)?;
    if records.is_empty() {
        return Err(FeeScanError::Empty.into());
    }
    let hist = feescan::distribution(&records, &args.edges.0)?;
    let classes = feescan::classify(&records, args.whale_threshold)?;

    let mut env = OutputEnvelope::new("fees", ctx.format(), &["kind", "name", "lower", "upper", "count", "value"]);
    env.param("input", path.display().to_string())
        .param("edges", &args.edges.0)
        .param("whale_threshold", args.whale_threshold)
        .param("records", records.len());
    let edges = &hist.bucket_edges;
    let n = hist.count as f64;
    for (i, &count) in hist.bucket_counts.iter().enumerate() {
        let lower = if i == 0 { None } else { Some(edges[i - 1]) };
        let upper = edges.get(i).copied();
        env.push(vec!["bucket".into(), Cell::Null, lower.into(), upper.into(), count.into(), (count as f64 / n).into()]);
    }
    for (edge, cdf) in hist.cdf_points() {
        env.push(vec!["cdf".into(), Cell::Null, Cell::Null, edge.into(), Cell::Null, cdf.into()]);
    }
    let stats = [
        ("regular_fraction", classes.regular_fraction),
        ("mean_regular_fee", classes.mean_regular_fee),
        ("mean_whale_fee", classes.mean_whale_fee),
        ("mean_fee", classes.mean_fee),
    ];
    for (name, value) in stats {
        env.push(vec!["class".into(), name.into(), Cell::Null, Cell::Null, Cell::Null, value.into()]);
    }
    Ok(env)
}

pub fn execute(command: &Command, ctx: &Context) -> Result<OutputEnvelope, CliError> {
    match command {
        Command::Bounds(a) => cmd_bounds(ctx, a),
        Command::Revenue(a) => cmd_revenue(ctx, a),
        Command::Mdp(a) => cmd_mdp(ctx, a),
        Command::Simulate(a) => cmd_simulate(ctx, a),
        Command::Pairs => cmd_pairs(ctx),
        Command::Fees(a) => cmd_fees(ctx, a),
    }
}

/// Sizes the global worker pool from [`THREADS_ENV`] when it is set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| usage(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    // A pool may already exist when embedded; that is not an error.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses, runs and writes the output; returns the rendered text.
pub fn run(cli: Cli) -> Result<String, CliError> {
    configure_threads()?;
    let ctx = Context::new(cli.options)?;
    let env = execute(&cli.command, &ctx)?;
    let text = env.render();
    if let Some(path) = &ctx.options.out {
        fs::write(path, &text).map_err(|source| CliError::Io { path: path.clone(), source })?;
    }
    Ok(text)
}
