use std::fmt;
use std::str::FromStr;

use crate::banking::BankingSystem;
use crate::error::{Error, Result};

/// A model parameter that clearing prices can be differentiated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamTag {
    /// The minimum capital ratio `θ_min`. Shortfalls move with it.
    Threshold,
    /// Risk weight `α_k` of a marketable asset.
    RiskWeight(usize),
    /// Shortfall `h_i` of a bank.
    Shortfall(usize),
    /// Holding `s_jk` of bank `j` in asset `k`.
    Holding(usize, usize),
    /// Cash `β_k` spent buying asset `k` outside the banking system.
    AssetPurchase(usize),
}

impl ParamTag {
    pub fn validate(&self, system: &BankingSystem) -> Result<()> {
        let (n, m) = (system.n(), system.m());
        let ok = match *self {
            ParamTag::Threshold => true,
            ParamTag::RiskWeight(k) | ParamTag::AssetPurchase(k) => k < m,
            ParamTag::Shortfall(i) => i < n,
            ParamTag::Holding(j, k) => j < n && k < m,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "parameter {self} out of range for {n} banks and {m} assets"
            )))
        }
    }

    /// Every tag for a system with `n` banks and `m` assets.
    pub fn all(n: usize, m: usize) -> Vec<ParamTag> {
        let mut out = vec![ParamTag::Threshold];
        out.extend((0..m).map(ParamTag::RiskWeight));
        out.extend((0..n).map(ParamTag::Shortfall));
        for j in 0..n {
            out.extend((0..m).map(move |k| ParamTag::Holding(j, k)));
        }
        out.extend((0..m).map(ParamTag::AssetPurchase));
        out
    }

    /// Current value of the parameter; purchases are always evaluated at 0.
    pub fn value(&self, system: &BankingSystem) -> f64 {
        match *self {
            ParamTag::Threshold => system.regulation.theta_min,
            ParamTag::RiskWeight(k) => system.regulation.alpha[k],
            ParamTag::Shortfall(i) => system.banks[i].shortfall(&system.regulation),
            ParamTag::Holding(j, k) => system.banks[j].holdings[k],
            ParamTag::AssetPurchase(_) => 0.0,
        }
    }

    /// Copy of `system` with the parameter shifted by `delta`. Shortfalls
    /// move through liabilities. No revalidation happens, so small
    /// excursions past a constraint boundary are allowed.
    pub(crate) fn shifted(&self, system: &BankingSystem, delta: f64) -> BankingSystem {
        let mut out = system.clone();
        match *self {
            ParamTag::Threshold => out.regulation.theta_min += delta,
            ParamTag::RiskWeight(k) => out.regulation.alpha[k] += delta,
            ParamTag::Shortfall(i) => out.banks[i].liabilities += delta,
            ParamTag::Holding(j, k) => out.banks[j].holdings[k] += delta,
            ParamTag::AssetPurchase(_) => {}
        }
        out
    }
}

impl fmt::Display for ParamTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamTag::Threshold => write!(f, "theta"),
            ParamTag::RiskWeight(k) => write!(f, "alpha:{k}"),
            ParamTag::Shortfall(i) => write!(f, "shortfall:{i}"),
            ParamTag::Holding(j, k) => write!(f, "holding:{j},{k}"),
            ParamTag::AssetPurchase(k) => write!(f, "purchase:{k}"),
        }
    }
}

impl FromStr for ParamTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("param", format!("cannot parse parameter `{s}`"));
        let index = |v: &str| v.trim().parse::<usize>().map_err(|_| bad());
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h.trim(), Some(t)),
            None => (s.trim(), None),
        };
        match (head, tail) {
            ("theta", None) => Ok(ParamTag::Threshold),
            ("alpha", Some(k)) => Ok(ParamTag::RiskWeight(index(k)?)),
            ("shortfall", Some(i)) => Ok(ParamTag::Shortfall(index(i)?)),
            ("purchase", Some(k)) => Ok(ParamTag::AssetPurchase(index(k)?)),
            ("holding", Some(jk)) => {
                let (j, k) = jk.split_once(',').ok_or_else(bad)?;
                Ok(ParamTag::Holding(index(j)?, index(k)?))
            }
            _ => Err(bad()),
        }
    }
}
