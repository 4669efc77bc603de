//! Balance sheets, capital ratios and solvency classes at given prices.

use std::fmt;

use crate::error::{Error, Result};
use crate::market::Market;

#[derive(Debug, Clone, PartialEq)]
pub struct Bank {
    pub name: String,
    /// Cash and other liquid assets `x_i`.
    pub liquid: f64,
    /// Non-marketable illiquid assets `ℓ_i`, valued at par.
    pub nonmarketable: f64,
    /// Shares held of each marketable asset, `s_i`.
    pub holdings: Vec<f64>,
    /// Total liabilities `p̄_i`.
    pub liabilities: f64,
    /// Risk weight `α_ℓ,i` of the non-marketable book.
    pub alpha_nonmarketable: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regulation {
    pub theta_min: f64,
    /// Marketable risk weights, the diagonal of `A`.
    pub alpha: Vec<f64>,
}

impl Regulation {
    pub fn new(theta_min: f64, alpha: Vec<f64>) -> Result<Self> {
        let reg = Self { theta_min, alpha };
        reg.validate()?;
        Ok(reg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_min.is_finite() && self.theta_min > 0.0) {
            return Err(Error::config(
                "regulation.theta_min",
                format!("must be positive, got {}", self.theta_min),
            ));
        }
        for (k, &a) in self.alpha.iter().enumerate() {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::config(
                    format!("regulation.alpha[{k}]"),
                    format!("risk weight must be nonnegative, got {a}"),
                ));
            }
            if a * self.theta_min >= 1.0 {
                return Err(Error::config(
                    format!("regulation.alpha[{k}]"),
                    format!(
                        "alpha * theta_min = {} must be < 1 for every asset",
                        a * self.theta_min
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Diagonal of `I − Aθ_min`.
    pub fn retention(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| 1.0 - a * self.theta_min).collect()
    }
}

/// Joint MTMP / VWAP price vectors `(q, q̄)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePair {
    pub q: Vec<f64>,
    pub q_bar: Vec<f64>,
}

impl PricePair {
    pub fn new(q: Vec<f64>, q_bar: Vec<f64>) -> Self {
        debug_assert_eq!(q.len(), q_bar.len());
        Self { q, q_bar }
    }

    pub fn unit(m: usize) -> Self {
        Self {
            q: vec![1.0; m],
            q_bar: vec![1.0; m],
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Largest componentwise distance to `other`.
    pub fn distance(&self, other: &PricePair) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .chain(self.q_bar.iter().zip(&other.q_bar))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Membership in the price lattice: `F(M) ≤ q ≤ q̄ ≤ 1` and `F̄(M) ≤ q̄`,
    /// up to `tol`.
    pub fn in_lattice(&self, market: &Market, tol: f64) -> bool {
        let (lo, lo_bar) = market.floor_prices();
        (0..self.len()).all(|k| {
            self.q[k] >= lo[k] - tol
                && self.q_bar[k] >= lo_bar[k] - tol
                && self.q[k] <= self.q_bar[k] + tol
                && self.q_bar[k] <= 1.0 + tol
        })
    }
}

/// Solvency class of a bank. Ordered from worst to best.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SolvencyClass {
    Insolvent,
    SolventIlliquid,
    SolventLiquid,
}

impl SolvencyClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SolvencyClass::Insolvent => "insolvent",
            SolvencyClass::SolventIlliquid => "solvent-illiquid",
            SolvencyClass::SolventLiquid => "solvent-liquid",
        }
    }
}

impl fmt::Display for SolvencyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Bank {
    /// Liabilities not covered by cash and the regulatory value of the
    /// non-marketable book: `h = p̄ − x − (1 − α_ℓ θ) ℓ`.
    pub fn shortfall(&self, reg: &Regulation) -> f64 {
        self.liabilities
            - self.liquid
            - (1.0 - self.alpha_nonmarketable * reg.theta_min) * self.nonmarketable
    }

    pub fn holds_marketable(&self) -> bool {
        self.holdings.iter().any(|&s| s > 0.0)
    }

    /// Capital ratio at unit prices before any liquidation.
    pub fn capital_ratio_initial(&self, reg: &Regulation) -> Result<f64> {
        let m = self.holdings.len();
        self.capital_ratio_post(reg, &PricePair::unit(m), &vec![0.0; m])
    }

    /// Capital ratio after selling `gamma` at VWAP `q̄` and marking the rest
    /// at `q`.
    pub fn capital_ratio_post(&self, reg: &Regulation, prices: &PricePair, gamma: &[f64]) -> Result<f64> {
        let kept: Vec<f64> = self.holdings.iter().zip(gamma).map(|(s, g)| s - g).collect();
        let capital = self.liquid + self.nonmarketable + dot(&prices.q_bar, gamma) + dot(&prices.q, &kept)
            - self.liabilities;
        let rwa: f64 = prices
            .q
            .iter()
            .zip(&reg.alpha)
            .zip(&kept)
            .map(|((q, a), r)| q * a * r)
            .sum::<f64>()
            + self.alpha_nonmarketable * self.nonmarketable;
        if rwa <= 0.0 {
            return Err(Error::Unregulated {
                bank: self.name.clone(),
            });
        }
        Ok(capital / rwa)
    }

    /// `qᵀ(I − Aθ)s`: the shortfall a bank can absorb without selling.
    pub fn liquid_capacity(&self, reg: &Regulation, q: &[f64]) -> f64 {
        self.holdings
            .iter()
            .zip(q)
            .zip(&reg.alpha)
            .map(|((s, q), a)| q * (1.0 - a * reg.theta_min) * s)
            .sum()
    }

    /// `q̄ᵀs`: proceeds of a full liquidation.
    pub fn liquidation_value(&self, q_bar: &[f64]) -> f64 {
        dot(q_bar, &self.holdings)
    }

    pub fn classify(&self, reg: &Regulation, prices: &PricePair) -> SolvencyClass {
        classify_shortfall(
            self.shortfall(reg),
            self.liquid_capacity(reg, &prices.q),
            self.liquidation_value(&prices.q_bar),
            self.holds_marketable(),
        )
    }
}

/// Three-way classification from the shortfall and the two thresholds.
/// Ties resolve to the weak inequalities; the insolvency test runs first.
pub(crate) fn classify_shortfall(h: f64, capacity: f64, full_value: f64, holds: bool) -> SolvencyClass {
    if !holds {
        return if h <= 0.0 {
            SolvencyClass::SolventLiquid
        } else {
            SolvencyClass::Insolvent
        };
    }
    if h >= full_value {
        SolvencyClass::Insolvent
    } else if h <= capacity {
        SolvencyClass::SolventLiquid
    } else {
        SolvencyClass::SolventIlliquid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankingSystem {
    pub banks: Vec<Bank>,
    pub market: Market,
    pub regulation: Regulation,
}

impl BankingSystem {
    pub fn new(banks: Vec<Bank>, market: Market, regulation: Regulation) -> Result<Self> {
        let system = Self {
            banks,
            market,
            regulation,
        };
        system.validate()?;
        Ok(system)
    }

    pub fn validate(&self) -> Result<()> {
        self.regulation.validate()?;
        let m = self.market.len();
        if self.regulation.alpha.len() != m {
            return Err(Error::config(
                "regulation.alpha",
                format!("expected {m} risk weights, got {}", self.regulation.alpha.len()),
            ));
        }
        if self.banks.is_empty() {
            return Err(Error::config("banks", "at least one bank is required"));
        }
        let mut totals = vec![0.0; m];
        for (i, b) in self.banks.iter().enumerate() {
            if b.holdings.len() != m {
                return Err(Error::config(
                    format!("banks[{i}].holdings"),
                    format!("expected {m} entries, got {}", b.holdings.len()),
                ));
            }
            let fields = [
                ("liquid", b.liquid),
                ("nonmarketable", b.nonmarketable),
                ("liabilities", b.liabilities),
                ("alpha_nonmarketable", b.alpha_nonmarketable),
            ];
            for (name, v) in fields {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::config(
                        format!("banks[{i}].{name}"),
                        format!("must be finite and nonnegative, got {v}"),
                    ));
                }
            }
            for (k, &s) in b.holdings.iter().enumerate() {
                if !(s.is_finite() && s >= 0.0) {
                    return Err(Error::config(
                        format!("banks[{i}].holdings[{k}]"),
                        format!("must be finite and nonnegative, got {s}"),
                    ));
                }
                totals[k] += s;
            }
        }
        for (k, (&t, a)) in totals.iter().zip(self.market.assets()).enumerate() {
            let cap = a.shares_outstanding();
            if t > cap * (1.0 + 1e-12) {
                return Err(Error::config(
                    format!("assets[{k}].shares_outstanding"),
                    format!("banks hold {t} shares in total but only {cap} are outstanding"),
                ));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.banks.len()
    }

    pub fn m(&self) -> usize {
        self.market.len()
    }

    pub fn shortfalls(&self) -> Vec<f64> {
        self.banks.iter().map(|b| b.shortfall(&self.regulation)).collect()
    }

    pub fn classify(&self, prices: &PricePair) -> Vec<SolvencyClass> {
        self.banks
            .iter()
            .map(|b| b.classify(&self.regulation, prices))
            .collect()
    }

    /// Market capitalisation `Mᵀq`.
    pub fn market_cap(&self, q: &[f64]) -> f64 {
        dot(&self.market.shares_outstanding(), q)
    }

    pub fn bank_index(&self, name: &str) -> Option<usize> {
        self.banks.iter().position(|b| b.name == name)
    }
}
