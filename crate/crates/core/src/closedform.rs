//! Closed-form split-ratio bounds and microblock-attack revenue.
//!
//! The whale-transaction bounds assume a targeted transaction whose fee can
//! be re-earned later; the regular-transaction bound `alpha < r < beta`
//! accounts for microblock capacity, where a withheld or rejected microblock
//! is simply lost.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("alpha must lie in [0,1) for this bound, got {0}")]
    AlphaNotBelowOne(f64),
    #[error("{name} must lie in [0,1], got {value}")]
    OutOfRange { name: &'static str, value: f64 },
}

fn fraction(name: &'static str, value: f64) -> Result<f64, DomainError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(DomainError::OutOfRange { name, value })
    }
}

fn below_one(alpha: f64) -> Result<f64, DomainError> {
    fraction("alpha", alpha)?;
    if alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(DomainError::AlphaNotBelowOne(alpha))
    }
}

/// Lower bound on `r` from the original inclusion-attack argument:
/// `1 - (1-a)/(1+a-a^2)`.
pub fn inclusion_bound_original(alpha: f64) -> Result<f64, DomainError> {
    let a = below_one(alpha)?;
    Ok(1.0 - (1.0 - a) / (1.0 + a - a * a))
}

/// Lower bound on `r` once the incumbent leader may be re-elected: `a/(1-a)`.
pub fn inclusion_bound_yin(alpha: f64) -> Result<f64, DomainError> {
    let a = below_one(alpha)?;
    Ok(a / (1.0 - a))
}

/// Upper bound on `r` from the chain-extension attack: `(1-a)/(2-a)`.
pub fn extension_bound(alpha: f64) -> Result<f64, DomainError> {
    let a = fraction("alpha", alpha)?;
    Ok((1.0 - a) / (2.0 - a))
}

/// Every split-ratio bound at one `alpha`.
///
/// The whale bounds are reported as raw formula values; `inclusion_lower_v2`
/// exceeds 1 for `alpha > 0.5`, which simply means no `r` satisfies it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioBounds {
    pub inclusion_lower_v1: f64,
    pub inclusion_lower_v2: f64,
    pub extension_upper: f64,
    pub capacity_lower: f64,
    pub capacity_upper: f64,
}

pub fn ratio_bounds(alpha: f64) -> Result<RatioBounds, DomainError> {
    Ok(RatioBounds {
        inclusion_lower_v1: inclusion_bound_original(alpha)?,
        inclusion_lower_v2: inclusion_bound_yin(alpha)?,
        extension_upper: extension_bound(alpha)?,
        capacity_lower: alpha,
        capacity_upper: 1.0 - alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransactionClass {
    /// Rare high-fee transactions; microblock capacity is irrelevant.
    Whale,
    /// Low-fee transactions that fill microblocks.
    Regular,
    /// Both classes at once.
    All,
}

impl std::str::FromStr for TransactionClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whale" => Ok(TransactionClass::Whale),
            "regular" => Ok(TransactionClass::Regular),
            "all" => Ok(TransactionClass::All),
            other => Err(format!("unknown transaction class `{other}`")),
        }
    }
}

/// Open interval of split ratios that deter both microblock attacks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleInterval {
    pub lower: f64,
    pub upper: f64,
    pub empty: bool,
}

impl FeasibleInterval {
    fn new(lower: f64, upper: f64) -> Self {
        FeasibleInterval { lower, upper, empty: lower >= upper }
    }

    pub fn contains(&self, r: f64) -> bool {
        !self.empty && self.lower < r && r < self.upper
    }
}

pub fn feasible_interval(alpha: f64, class: TransactionClass) -> Result<FeasibleInterval, DomainError> {
    let b = ratio_bounds(alpha)?;
    let whale = (b.inclusion_lower_v1.max(b.inclusion_lower_v2), b.extension_upper);
    let regular = (b.capacity_lower, b.capacity_upper);
    let (lower, upper) = match class {
        TransactionClass::Whale => whale,
        TransactionClass::Regular => regular,
        TransactionClass::All => (whale.0.max(regular.0), whale.1.min(regular.1)),
    };
    Ok(FeasibleInterval::new(lower, upper))
}

/// Long-run relative revenue when a fraction `rho` of the attacker's own
/// microblocks is withheld whenever an honest key block follows.
pub fn inclusion_attack_revenue(alpha: f64, r: f64, rho: f64) -> Result<f64, DomainError> {
    let (a, r, rho) = (fraction("alpha", alpha)?, fraction("r", r)?, fraction("rho", rho)?);
    let loss = a * (1.0 - a) * rho;
    Ok((a - r * loss) / (1.0 - loss))
}

/// Long-run relative revenue when a fraction `rho` of the honest leader's
/// microblocks is rejected whenever the attacker mines the next key block.
pub fn extension_attack_revenue(alpha: f64, r: f64, rho: f64) -> Result<f64, DomainError> {
    let (a, r, rho) = (fraction("alpha", alpha)?, fraction("r", r)?, fraction("rho", rho)?);
    let b = 1.0 - a;
    Ok((a - (1.0 - r) * a * b * rho) / (1.0 - a * b * rho))
}

/// Best inclusion-attack revenue and the `rho` achieving it. Ties at `r == alpha`
/// report the attack (`rho = 1`) with value exactly `alpha`.
pub fn optimal_inclusion_revenue(alpha: f64, r: f64) -> Result<(f64, f64), DomainError> {
    let (a, r) = (fraction("alpha", alpha)?, fraction("r", r)?);
    if r == a {
        Ok((a, 1.0))
    } else if r < a {
        Ok((r + (a - r) / (1.0 - a * (1.0 - a)), 1.0))
    } else {
        Ok((a, 0.0))
    }
}

/// Best extension-attack revenue and the `rho` achieving it. Ties at `r == beta`
/// report the attack (`rho = 1`) with value exactly `alpha`.
pub fn optimal_extension_revenue(alpha: f64, r: f64) -> Result<(f64, f64), DomainError> {
    let (a, r) = (fraction("alpha", alpha)?, fraction("r", r)?);
    let b = 1.0 - a;
    if r == b {
        Ok((a, 1.0))
    } else if r > b {
        Ok((1.0 - r + (r - b) / (1.0 - a * b), 1.0))
    } else {
        Ok((a, 0.0))
    }
}
