//! Shared protocol parameters and reward weights.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{0} out of [0,1]")]
    FractionOutOfRange(&'static str),
    #[error("key_rate must be positive")]
    NonPositiveKeyRate,
    #[error("{0} must be nonnegative")]
    Negative(&'static str),
    #[error("expected_microblock_fee must be >= microblock_fee")]
    ExpectedFeeBelowRegular,
    #[error("{0} must be positive for a fee ratio")]
    ZeroDivisor(&'static str),
    #[error("reward weights must be nonnegative with a positive sum")]
    InvalidWeights,
    #[error("line {line}: {message}")]
    Config { line: usize, message: String },
}

/// Protocol and attacker parameters.
///
/// `alpha` is the selfish share of mining power, `gamma` the share of honest
/// power that mines on the selfish branch during a tie, and `split_ratio` the
/// fraction of a leader's microblock fees paid to that leader (the rest goes
/// to the next key-block miner).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub alpha: f64,
    pub gamma: f64,
    pub split_ratio: f64,
    /// Key blocks per second.
    pub key_rate: f64,
    /// Microblocks per second.
    pub micro_rate: f64,
    pub key_block_reward: f64,
    /// Total fee of one regular microblock.
    pub microblock_fee: f64,
    /// Mean microblock fee including rare high-fee transactions.
    pub expected_microblock_fee: Option<f64>,
}

impl Default for ProtocolParams {
    /// One key block per 100 s, one microblock per 20 s, and a key reward
    /// equal to the fees of one key-block interval.
    fn default() -> Self {
        ProtocolParams {
            alpha: 0.25,
            gamma: 0.5,
            split_ratio: 0.4,
            key_rate: 0.01,
            micro_rate: 0.05,
            key_block_reward: 1.0,
            microblock_fee: 0.2,
            expected_microblock_fee: None,
        }
    }
}

impl ProtocolParams {
    pub fn beta(&self) -> f64 {
        1.0 - self.alpha
    }

    /// Returns `self` when every invariant holds.
    pub fn validate(self) -> Result<Self, ModelError> {
        validate(self)
    }

    /// The microblock fee used for reward weighting: the whale-adjusted mean
    /// when present, the regular fee otherwise.
    pub fn effective_microblock_fee(&self) -> f64 {
        self.expected_microblock_fee.unwrap_or(self.microblock_fee)
    }

    /// Microblocks issued in one mean key-block interval (v/f).
    pub fn microblocks_per_interval(&self) -> f64 {
        self.micro_rate / self.key_rate
    }

    pub fn interval_fee_ratio(&self) -> Result<f64, ModelError> {
        interval_fee_ratio(self)
    }

    /// Parses a flat `name = value` config. Unknown names are rejected;
    /// missing names keep their [`Default`] value.
    pub fn from_kv_str(text: &str) -> Result<Self, ModelError> {
        let mut params = ProtocolParams::default();
        for (name, value, line) in parse_kv(text)? {
            params.set(&name, &value).map_err(|message| ModelError::Config { line, message })?;
        }
        params.validate()
    }

    /// Sets one field by its config name.
    pub fn set(&mut self, name: &str, value: &str) -> Result<(), String> {
        let parse = |v: &str| f64::from_str(v.trim()).map_err(|_| format!("`{v}` is not a number"));
        match name {
            "alpha" => self.alpha = parse(value)?,
            "gamma" => self.gamma = parse(value)?,
            "split_ratio" | "r" => self.split_ratio = parse(value)?,
            "key_rate" | "f" => self.key_rate = parse(value)?,
            "micro_rate" | "v" => self.micro_rate = parse(value)?,
            "key_block_reward" => self.key_block_reward = parse(value)?,
            "microblock_fee" => self.microblock_fee = parse(value)?,
            "expected_microblock_fee" => self.expected_microblock_fee = Some(parse(value)?),
            other => return Err(format!("unknown parameter `{other}`")),
        }
        Ok(())
    }
}

/// Splits `name = value` lines, skipping blanks and `#` comments. Returns
/// `(name, value, line_number)` triples in input order.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String, usize)>, ModelError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, value) = line.split_once('=').ok_or_else(|| ModelError::Config {
            line: idx + 1,
            message: format!("expected `name = value`, got `{line}`"),
        })?;
        out.push((name.trim().to_string(), value.trim().to_string(), idx + 1));
    }
    Ok(out)
}

/// Same as [`parse_kv`] but collapsed into a map; later keys win.
pub fn parse_kv_map(text: &str) -> Result<BTreeMap<String, String>, ModelError> {
    Ok(parse_kv(text)?.into_iter().map(|(k, v, _)| (k, v)).collect())
}

fn check_fraction(value: f64, name: &'static str) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ModelError::FractionOutOfRange(name))
    }
}

fn check_nonnegative(value: f64, name: &'static str) -> Result<(), ModelError> {
    if value >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::Negative(name))
    }
}

pub fn validate(params: ProtocolParams) -> Result<ProtocolParams, ModelError> {
    check_fraction(params.alpha, "alpha")?;
    check_fraction(params.gamma, "gamma")?;
    check_fraction(params.split_ratio, "split_ratio")?;
    if !(params.key_rate > 0.0) || !params.key_rate.is_finite() {
        return Err(ModelError::NonPositiveKeyRate);
    }
    check_nonnegative(params.micro_rate, "micro_rate")?;
    check_nonnegative(params.key_block_reward, "key_block_reward")?;
    check_nonnegative(params.microblock_fee, "microblock_fee")?;
    if let Some(mean) = params.expected_microblock_fee {
        check_nonnegative(mean, "expected_microblock_fee")?;
        if mean < params.microblock_fee {
            return Err(ModelError::ExpectedFeeBelowRegular);
        }
    }
    Ok(params)
}

/// Ratio of the key-block reward to the fees of one mean key-block interval,
/// `R_b * f / (v * R_t)`, with the whale-adjusted fee when present.
pub fn interval_fee_ratio(params: &ProtocolParams) -> Result<f64, ModelError> {
    if params.micro_rate <= 0.0 {
        return Err(ModelError::ZeroDivisor("micro_rate"));
    }
    let fee = params.effective_microblock_fee();
    if fee <= 0.0 {
        return Err(ModelError::ZeroDivisor("microblock_fee"));
    }
    Ok(params.key_block_reward * params.key_rate / (params.micro_rate * fee))
}

/// Scalar value of one key-block reward and of one fee unit (the fees of all
/// microblocks in one key-block interval).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub key_weight: f64,
    pub fee_weight: f64,
}

impl RewardWeights {
    pub fn new(key_weight: f64, fee_weight: f64) -> Result<Self, ModelError> {
        let w = RewardWeights { key_weight, fee_weight };
        w.check()?;
        Ok(w)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        let ok = self.key_weight >= 0.0
            && self.fee_weight >= 0.0
            && self.key_weight + self.fee_weight > 0.0
            && self.key_weight.is_finite()
            && self.fee_weight.is_finite();
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidWeights)
        }
    }

    /// Weights in currency: the key reward and the fees of v/f microblocks.
    pub fn from_params(params: &ProtocolParams) -> Result<Self, ModelError> {
        let fee = params.microblocks_per_interval() * params.effective_microblock_fee();
        RewardWeights::new(params.key_block_reward, fee)
    }
}

/// The three reward regimes: fees dominate, equal weight, key rewards dominate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Fee,
    Equal,
    Key,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Fee, Regime::Equal, Regime::Key];

    pub fn weights(self) -> RewardWeights {
        match self {
            Regime::Fee => RewardWeights { key_weight: 0.0, fee_weight: 1.0 },
            Regime::Equal => RewardWeights { key_weight: 1.0, fee_weight: 1.0 },
            Regime::Key => RewardWeights { key_weight: 1.0, fee_weight: 0.0 },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Fee => "fee",
            Regime::Equal => "equal",
            Regime::Key => "key",
        }
    }

    /// Parameters whose currency weights reproduce this regime exactly.
    pub fn apply(self, params: ProtocolParams) -> ProtocolParams {
        let w = self.weights();
        ProtocolParams {
            key_block_reward: w.key_weight,
            microblock_fee: w.fee_weight,
            micro_rate: params.key_rate,
            expected_microblock_fee: None,
            ..params
        }
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fee" => Ok(Regime::Fee),
            "equal" => Ok(Regime::Equal),
            "key" => Ok(Regime::Key),
            other => Err(format!("unknown regime `{other}` (expected fee, equal or key)")),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
