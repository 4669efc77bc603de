//! Derivative-based policy metrics: costs of tightening the capital
//! threshold and the marginal value of direct and indirect bailouts.
//!
//! All derivatives of a bank's liquidations are total derivatives: they
//! include the response of the bank to the change in clearing prices as
//! well as the direct effect of the parameter.

use std::fmt;
use std::str::FromStr;

use log::info;

use crate::banking::{BankingSystem, SolvencyClass};
use crate::clearing::ClearingResult;
use crate::error::{Error, Result};
use crate::liquidation::LiquidationStrategy;
use crate::param::ParamTag;
use crate::sensitivity::{SensitivityResult, SensitivitySystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    /// Cost of regulation to the market, `−Mᵀ ∂q*/∂θ`.
    Cr,
    /// Cost of regulation from realised losses of one bank.
    Crl,
    /// Cost of regulation from mark-to-market losses of one bank.
    Cmi,
    /// Value of a direct central-bank bailout of a bank.
    Dcb,
    /// Value to bank `j` of a direct bailout of bank `i`.
    Dpb,
    /// Value of a central-bank purchase of an asset.
    Icb,
    /// Value to bank `j` of buying an asset.
    Ipb,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Cr => "cr",
            Metric::Crl => "crl",
            Metric::Cmi => "cmi",
            Metric::Dcb => "dcb",
            Metric::Dpb => "dpb",
            Metric::Icb => "icb",
            Metric::Ipb => "ipb",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "cr" => Metric::Cr,
            "crl" => Metric::Crl,
            "cmi" => Metric::Cmi,
            "dcb" => Metric::Dcb,
            "dpb" => Metric::Dpb,
            "icb" => Metric::Icb,
            "ipb" => Metric::Ipb,
            _ => return Err(Error::config("metric", format!("unknown metric `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subject {
    System,
    Bank(usize),
    Asset(usize),
    /// Bailout of bank `to` funded by bank `from`.
    BankPair { from: usize, to: usize },
    /// Purchase of `asset` funded by `bank`.
    BankAsset { bank: usize, asset: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyReport {
    pub metric: Metric,
    pub subject: Subject,
    pub value: f64,
    pub sign_interpretation: String,
}

impl PolicyReport {
    /// Human-readable subject using bank names.
    pub fn subject_label(&self, system: &BankingSystem) -> String {
        let name = |i: usize| system.banks[i].name.clone();
        match self.subject {
            Subject::System => "system".into(),
            Subject::Bank(i) => name(i),
            Subject::Asset(k) => format!("asset {k}"),
            Subject::BankPair { from, to } => format!("{} -> {}", name(from), name(to)),
            Subject::BankAsset { bank, asset } => format!("{} -> asset {asset}", name(bank)),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cost_verdict(v: f64) -> String {
    if v > 0.0 {
        "tighter regulation is costly".into()
    } else if v == 0.0 {
        "no first-order cost".into()
    } else {
        "tighter regulation lowers this cost".into()
    }
}

fn bailout_verdict(v: f64) -> String {
    if v > 0.0 {
        "bailout advisable".into()
    } else {
        "bailout not advisable".into()
    }
}

/// Policy metrics at one clearing solution.
pub struct PolicyAnalysis<'a> {
    system: &'a BankingSystem,
    clearing: &'a ClearingResult,
    sens: SensitivitySystem<'a>,
}

impl<'a> PolicyAnalysis<'a> {
    pub fn new(
        system: &'a BankingSystem,
        strategy: &'a LiquidationStrategy,
        clearing: &'a ClearingResult,
    ) -> Result<Self> {
        let sens = SensitivitySystem::new(system, strategy, clearing)?;
        Ok(Self {
            system,
            clearing,
            sens,
        })
    }

    pub fn sensitivity(&self) -> &SensitivitySystem<'a> {
        &self.sens
    }

    fn check_bank(&self, i: usize) -> Result<()> {
        if i < self.system.n() {
            Ok(())
        } else {
            Err(Error::Precondition(format!("bank index {i} out of range")))
        }
    }

    fn check_asset(&self, k: usize) -> Result<()> {
        if k < self.system.m() {
            Ok(())
        } else {
            Err(Error::Precondition(format!("asset index {k} out of range")))
        }
    }

    fn check_solvent(&self, j: usize) -> Result<()> {
        if self.clearing.classes[j] == SolvencyClass::Insolvent {
            Err(Error::Precondition(format!(
                "bank {} is insolvent at the clearing prices and cannot fund a bailout",
                self.system.banks[j].name
            )))
        } else {
            Ok(())
        }
    }

    /// Derivative of bank `j`'s equity through prices and its own
    /// liquidations; direct balance-sheet effects are left to the caller.
    fn capital_derivative(&self, j: usize, sens: &SensitivityResult) -> Result<f64> {
        let p = &self.clearing.prices;
        let gamma = self.clearing.gamma.row(j);
        let kept: Vec<f64> = self.system.banks[j]
            .holdings
            .iter()
            .zip(gamma)
            .map(|(s, g)| s - g)
            .collect();
        let spread: Vec<f64> = p.q_bar.iter().zip(&p.q).map(|(a, b)| a - b).collect();
        let dgamma = self.sens.bank_total_derivative(j, sens)?;
        Ok(dot(&sens.dq_bar, gamma) + dot(&sens.dq, &kept) + dot(&spread, &dgamma))
    }

    pub fn cost_regulation_market(&self) -> Result<PolicyReport> {
        let s = self.sens.solve(ParamTag::Threshold)?;
        let value = -s.market_cap(self.system);
        Ok(PolicyReport {
            metric: Metric::Cr,
            subject: Subject::System,
            value,
            sign_interpretation: cost_verdict(value),
        })
    }

    pub fn cost_regulation_realized(&self, i: usize) -> Result<PolicyReport> {
        self.check_bank(i)?;
        let s = self.sens.solve(ParamTag::Threshold)?;
        let gamma = self.clearing.gamma.row(i);
        let loss: Vec<f64> = self.clearing.prices.q_bar.iter().map(|q| 1.0 - q).collect();
        let dgamma = self.sens.bank_total_derivative(i, &s)?;
        let value = -dot(&s.dq_bar, gamma) + dot(&loss, &dgamma);
        Ok(PolicyReport {
            metric: Metric::Crl,
            subject: Subject::Bank(i),
            value,
            sign_interpretation: cost_verdict(value),
        })
    }

    pub fn cost_regulation_mtm(&self, i: usize) -> Result<PolicyReport> {
        self.check_bank(i)?;
        let s = self.sens.solve(ParamTag::Threshold)?;
        let value = -self.capital_derivative(i, &s)?;
        Ok(PolicyReport {
            metric: Metric::Cmi,
            subject: Subject::Bank(i),
            value,
            sign_interpretation: cost_verdict(value),
        })
    }

    fn recipient_verdict(&self, i: usize, value: f64) -> String {
        match self.clearing.classes[i] {
            SolvencyClass::SolventIlliquid => bailout_verdict(value),
            c => format!("not applicable: recipient is {c}"),
        }
    }

    fn asset_verdict(&self, k: usize, value: f64) -> String {
        if self.clearing.prices.q[k] < 1.0 {
            bailout_verdict(value)
        } else {
            "not applicable: asset is not in distress".into()
        }
    }

    pub fn direct_central_bailout(&self, i: usize) -> Result<PolicyReport> {
        self.check_bank(i)?;
        let s = self.sens.solve(ParamTag::Shortfall(i))?;
        let value = -(s.market_cap(self.system) + 1.0);
        Ok(PolicyReport {
            metric: Metric::Dcb,
            subject: Subject::Bank(i),
            value,
            sign_interpretation: self.recipient_verdict(i, value),
        })
    }

    /// Value to bank `j` of transferring cash to bank `i`.
    pub fn direct_private_bailout(&self, j: usize, i: usize) -> Result<PolicyReport> {
        self.check_bank(j)?;
        self.check_bank(i)?;
        if i == j {
            return Err(Error::Precondition("a bank cannot bail itself out".into()));
        }
        self.check_solvent(j)?;
        let own = self.sens.solve(ParamTag::Shortfall(j))?;
        let other = self.sens.solve(ParamTag::Shortfall(i))?;
        let value = self.capital_derivative(j, &own)? - 1.0 - self.capital_derivative(j, &other)?;
        Ok(PolicyReport {
            metric: Metric::Dpb,
            subject: Subject::BankPair { from: j, to: i },
            value,
            sign_interpretation: self.recipient_verdict(i, value),
        })
    }

    pub fn indirect_central_bailout(&self, k: usize) -> Result<PolicyReport> {
        self.check_asset(k)?;
        let s = self.sens.solve(ParamTag::AssetPurchase(k))?;
        let value = s.market_cap(self.system) - 1.0;
        Ok(PolicyReport {
            metric: Metric::Icb,
            subject: Subject::Asset(k),
            value,
            sign_interpretation: self.asset_verdict(k, value),
        })
    }

    /// Value to bank `j` of spending cash on asset `k` at its VWAP.
    pub fn indirect_private_bailout(&self, j: usize, k: usize) -> Result<PolicyReport> {
        self.check_bank(j)?;
        self.check_asset(k)?;
        self.check_solvent(j)?;
        let p = &self.clearing.prices;
        let h = self.sens.solve(ParamTag::Shortfall(j))?;
        let s = self.sens.solve(ParamTag::Holding(j, k))?;
        let b = self.sens.solve(ParamTag::AssetPurchase(k))?;
        let value = self.capital_derivative(j, &h)?
            + self.capital_derivative(j, &s)? / p.q_bar[k]
            + self.capital_derivative(j, &b)?
            - (1.0 - p.q[k] / p.q_bar[k]);
        Ok(PolicyReport {
            metric: Metric::Ipb,
            subject: Subject::BankAsset { bank: j, asset: k },
            value,
            sign_interpretation: self.asset_verdict(k, value),
        })
    }

    /// Every report for `metric` over all admissible subjects.
    pub fn all(&self, metric: Metric) -> Result<Vec<PolicyReport>> {
        let (n, m) = (self.system.n(), self.system.m());
        let solvent: Vec<usize> = (0..n)
            .filter(|&j| self.clearing.classes[j] != SolvencyClass::Insolvent)
            .collect();
        let mut out = Vec::new();
        match metric {
            Metric::Cr => out.push(self.cost_regulation_market()?),
            Metric::Crl => {
                for i in 0..n {
                    out.push(self.cost_regulation_realized(i)?);
                }
            }
            Metric::Cmi => {
                for i in 0..n {
                    out.push(self.cost_regulation_mtm(i)?);
                }
            }
            Metric::Dcb => {
                for i in 0..n {
                    out.push(self.direct_central_bailout(i)?);
                }
            }
            Metric::Dpb => {
                for i in 0..n {
                    for &j in solvent.iter().filter(|&&j| j != i) {
                        out.push(self.direct_private_bailout(j, i)?);
                    }
                }
            }
            Metric::Icb => {
                for k in 0..m {
                    out.push(self.indirect_central_bailout(k)?);
                }
            }
            Metric::Ipb => {
                for &j in &solvent {
                    for k in 0..m {
                        out.push(self.indirect_private_bailout(j, k)?);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Compare the best asset purchase with a direct bailout of each
    /// illiquid bank and log which is larger. Returns
    /// `(bank, dcb, best icb)` triples.
    pub fn direct_vs_indirect(&self) -> Result<Vec<(usize, f64, f64)>> {
        let mut best_icb = f64::NEG_INFINITY;
        for k in 0..self.system.m() {
            best_icb = best_icb.max(self.indirect_central_bailout(k)?.value);
        }
        let mut out = Vec::new();
        for i in 0..self.system.n() {
            if self.clearing.classes[i] != SolvencyClass::SolventIlliquid {
                continue;
            }
            let dcb = self.direct_central_bailout(i)?.value;
            let winner = if dcb >= best_icb { "direct" } else { "indirect" };
            info!(
                "bank {}: direct bailout {dcb:.6} vs best asset purchase {best_icb:.6} ({winner} larger)",
                self.system.banks[i].name
            );
            out.push((i, dcb, best_icb));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::banking::{Bank, Regulation};
    use crate::clearing::{picard_clear, SolverOptions};
    use crate::market::{InverseDemand, Market};

    fn two_bank() -> BankingSystem {
        let bank = |p: f64| Bank {
            name: format!("p{p}"),
            liquid: 0.0,
            nonmarketable: 0.0,
            holdings: vec![1.0],
            liabilities: p,
            alpha_nonmarketable: 0.0,
        };
        BankingSystem::new(
            vec![bank(0.9), bank(0.6)],
            Market::new(vec![InverseDemand::linear(0.15, 2.0).unwrap()]).unwrap(),
            Regulation::new(0.2, vec![1.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn two_bank_metrics() {
        let sys = two_bank();
        let s = LiquidationStrategy::SingleAsset;
        let clear = picard_clear(&sys, &s, &SolverOptions::default()).unwrap();
        let pa = PolicyAnalysis::new(&sys, &s, &clear).unwrap();
        let dcb = pa.direct_central_bailout(0).unwrap();
        assert!((dcb.value - 0.921).abs() < 2e-3, "{}", dcb.value);
        assert_eq!(dcb.sign_interpretation, "bailout advisable");
        let idle = pa.direct_central_bailout(1).unwrap();
        assert_eq!(idle.value, -1.0);
        assert!(idle.sign_interpretation.starts_with("not applicable"));
        assert!(pa.cost_regulation_market().unwrap().value > 0.0);
        assert!(pa.cost_regulation_realized(0).unwrap().value > 0.0);
        assert_eq!(pa.cost_regulation_realized(1).unwrap().value, 0.0);
        assert!(pa.cost_regulation_mtm(1).unwrap().value > 0.0);
        assert!(pa.direct_private_bailout(0, 0).is_err());
    }

    #[test]
    fn metric_parsing() {
        for m in ["cr", "crl", "cmi", "dcb", "dpb", "icb", "ipb"] {
            assert_eq!(m.parse::<Metric>().unwrap().as_str(), m);
        }
        assert!("xyz".parse::<Metric>().is_err());
    }
}
