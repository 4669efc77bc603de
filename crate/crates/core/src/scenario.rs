//! TOML scenario files.
//!
//! ```toml
//! strategy = "proportional"
//!
//! [regulation]
//! theta_min = 0.2
//! alpha = [1.0]
//!
//! [solver]
//! tol = 1e-12
//! max_iter = 100000
//!
//! [[assets]]
//! family = "power-linear"
//! a = 1.0
//! b = 0.15
//! shares_outstanding = 2.0
//!
//! [[banks]]
//! name = "A"
//! liquid = 0.0
//! nonmarketable = 0.0
//! liabilities = 0.9
//! alpha_nonmarketable = 0.0
//! holdings = [1.0]
//! ```
//!
//! Families are `limit-order-book` (with `levels = [{ price, depth }, ...]`),
//! `power-linear` and `power-compound` (with `a`, `b`) and `exponential`
//! (with `b`).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::banking::{Bank, BankingSystem, Regulation};
use crate::clearing::{picard_clear, price_making_clear, ClearingResult, SolverOptions};
use crate::error::{Error, Result};
use crate::liquidation::{LiquidationStrategy, UtilitySpec};
use crate::market::{BookLevel, DemandFamily, InverseDemand, Market};

/// Bundled two-bank system with a low price impact.
pub const TWO_BANK_LOW: &str = include_str!("../data/two_bank_low.toml");
/// Bundled two-bank system with a high price impact.
pub const TWO_BANK_HIGH: &str = include_str!("../data/two_bank_high.toml");
/// Bundled two-bank, two-asset diversification system.
pub const DIVERSIFICATION: &str = include_str!("../data/diversification.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyChoice {
    Single,
    #[default]
    Proportional,
    Utility,
    PtEquilibrium,
    /// Price-making equilibrium; cleared by its own solver.
    PmEquilibrium,
}

impl StrategyChoice {
    pub const ALL: [StrategyChoice; 5] = [
        StrategyChoice::Single,
        StrategyChoice::Proportional,
        StrategyChoice::Utility,
        StrategyChoice::PtEquilibrium,
        StrategyChoice::PmEquilibrium,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyChoice::Single => "single",
            StrategyChoice::Proportional => "proportional",
            StrategyChoice::Utility => "utility",
            StrategyChoice::PtEquilibrium => "pt-equilibrium",
            StrategyChoice::PmEquilibrium => "pm-equilibrium",
        }
    }

    /// The price-taking liquidation strategy, or `None` for the price-making
    /// equilibrium.
    pub fn liquidation(self) -> Option<LiquidationStrategy> {
        match self {
            StrategyChoice::Single => Some(LiquidationStrategy::SingleAsset),
            StrategyChoice::Proportional => Some(LiquidationStrategy::Proportional),
            StrategyChoice::Utility => Some(LiquidationStrategy::UtilityMax(UtilitySpec::default())),
            StrategyChoice::PtEquilibrium => {
                Some(LiquidationStrategy::PriceTakingEquilibrium(UtilitySpec::default()))
            }
            StrategyChoice::PmEquilibrium => None,
        }
    }

    /// Clear `system` under this strategy from the no-impact start.
    pub fn clear(self, system: &BankingSystem, opts: &SolverOptions) -> Result<ClearingResult> {
        match self.liquidation() {
            Some(s) => picard_clear(system, &s, opts),
            None => price_making_clear(system, &UtilitySpec::default(), opts),
        }
    }
}

impl fmt::Display for StrategyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyChoice::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::config("strategy", format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulationConfig {
    pub theta_min: f64,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetConfig {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<BookLevel>>,
    pub shares_outstanding: f64,
}

impl AssetConfig {
    pub fn from_demand(d: &InverseDemand) -> Self {
        let (a, b, levels) = match d.family() {
            DemandFamily::LimitOrderBook { levels } => (None, None, Some(levels.clone())),
            DemandFamily::PowerLinear { a, b } | DemandFamily::PowerCompound { a, b } => {
                (Some(*a), Some(*b), None)
            }
            DemandFamily::Exponential { b } => (None, Some(*b), None),
        };
        Self {
            family: d.family().name().to_string(),
            a,
            b,
            levels,
            shares_outstanding: d.shares_outstanding(),
        }
    }

    fn build(&self, path: &str) -> Result<InverseDemand> {
        let need = |v: Option<f64>, field: &str| {
            v.ok_or_else(|| Error::config(format!("{path}.{field}"), "missing"))
        };
        let family = match self.family.as_str() {
            "limit-order-book" => DemandFamily::LimitOrderBook {
                levels: self
                    .levels
                    .clone()
                    .ok_or_else(|| Error::config(format!("{path}.levels"), "missing"))?,
            },
            "power-linear" => DemandFamily::PowerLinear {
                a: need(self.a, "a")?,
                b: need(self.b, "b")?,
            },
            "power-compound" => DemandFamily::PowerCompound {
                a: need(self.a, "a")?,
                b: need(self.b, "b")?,
            },
            "exponential" => DemandFamily::Exponential { b: need(self.b, "b")? },
            other => {
                return Err(Error::config(
                    format!("{path}.family"),
                    format!("unknown family `{other}`"),
                ))
            }
        };
        InverseDemand::new(family, self.shares_outstanding).map_err(|e| match e {
            Error::Config { reason, .. } => Error::config(path, reason),
            other => other,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankConfig {
    pub name: String,
    pub liquid: f64,
    pub nonmarketable: f64,
    pub liabilities: f64,
    pub alpha_nonmarketable: f64,
    pub holdings: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
        }
    }
}

impl From<SolverConfig> for SolverOptions {
    fn from(c: SolverConfig) -> Self {
        SolverOptions {
            tol: c.tol,
            max_iter: c.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub strategy: StrategyChoice,
    pub regulation: RegulationConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub assets: Vec<AssetConfig>,
    pub banks: Vec<BankConfig>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let span = e
                .span()
                .map(|s| format!("byte {}", s.start))
                .unwrap_or_else(|| "document".into());
            Error::config(span, e.message().to_string())
        })?;
        cfg.system()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("scenario", e.to_string()))
    }

    pub fn from_system(system: &BankingSystem, strategy: StrategyChoice, solver: SolverConfig) -> Self {
        Self {
            strategy,
            regulation: RegulationConfig {
                theta_min: system.regulation.theta_min,
                alpha: system.regulation.alpha.clone(),
            },
            solver,
            assets: system.market.assets().iter().map(AssetConfig::from_demand).collect(),
            banks: system
                .banks
                .iter()
                .map(|b| BankConfig {
                    name: b.name.clone(),
                    liquid: b.liquid,
                    nonmarketable: b.nonmarketable,
                    liabilities: b.liabilities,
                    alpha_nonmarketable: b.alpha_nonmarketable,
                    holdings: b.holdings.clone(),
                })
                .collect(),
        }
    }

    /// Build and validate the banking system.
    pub fn system(&self) -> Result<BankingSystem> {
        let m = self.assets.len();
        if self.regulation.alpha.len() != m {
            return Err(Error::config(
                "regulation.alpha",
                format!("{} risk weights for {m} assets", self.regulation.alpha.len()),
            ));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(Error::config("solver", "tol and max_iter must be positive"));
        }
        let assets = self
            .assets
            .iter()
            .enumerate()
            .map(|(k, a)| a.build(&format!("assets[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        let banks = self
            .banks
            .iter()
            .map(|b| Bank {
                name: b.name.clone(),
                liquid: b.liquid,
                nonmarketable: b.nonmarketable,
                holdings: b.holdings.clone(),
                liabilities: b.liabilities,
                alpha_nonmarketable: b.alpha_nonmarketable,
            })
            .collect();
        let regulation = Regulation::new(self.regulation.theta_min, self.regulation.alpha.clone())?;
        BankingSystem::new(banks, Market::new(assets)?, regulation)
    }

    pub fn solver_options(&self) -> SolverOptions {
        self.solver.into()
    }
}
