//! Parameter sweeps over a base system, one independent clearing per grid
//! point.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::banking::{BankingSystem, SolvencyClass};
use crate::clearing::SolverOptions;
use crate::error::{Error, Result};
use crate::market::{DemandFamily, InverseDemand, Market};
use crate::scenario::StrategyChoice;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Two banks, two assets: `s1 = (λ, M2 − λ)`, `s2 = (M1 − λ, λ)`.
    Lambda,
    /// Fraction of non-marketable assets lost at every bank.
    Shock,
    /// Price-impact parameter `b` of one asset.
    Slope(usize),
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepParam::Lambda => f.write_str("lambda"),
            SweepParam::Shock => f.write_str("shock"),
            SweepParam::Slope(k) => write!(f, "b:{k}"),
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(SweepParam::Lambda),
            "shock" => Ok(SweepParam::Shock),
            _ => s
                .strip_prefix("b:")
                .and_then(|k| k.parse().ok())
                .map(SweepParam::Slope)
                .ok_or_else(|| Error::config("param", format!("unknown sweep parameter `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub grid: Vec<f64>,
}

impl SweepSpec {
    pub fn new(param: SweepParam, grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::config("grid", "empty"));
        }
        if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("grid", "values must be finite and strictly increasing"));
        }
        Ok(Self { param, grid })
    }

    /// `start, start + step, ...` up to `stop` inclusive, computed by index
    /// so the endpoints are exact.
    pub fn linspace(param: SweepParam, start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(stop >= start) {
            return Err(Error::config("grid", "need step > 0 and stop >= start"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        let grid = (0..=n).map(|i| start + i as f64 * step).collect();
        Self::new(param, grid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub q: Vec<f64>,
    pub q_bar: Vec<f64>,
    pub sold: Vec<f64>,
    pub market_cap: f64,
    pub classes: Vec<SolvencyClass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// Clearing output, or the error when this point failed.
    pub outcome: Result<SweepPoint>,
}

/// The system at one grid value.
pub fn apply(base: &BankingSystem, param: SweepParam, value: f64) -> Result<BankingSystem> {
    let mut sys = base.clone();
    match param {
        SweepParam::Lambda => {
            if sys.n() != 2 || sys.m() != 2 {
                return Err(Error::Precondition(
                    "the lambda sweep needs two banks and two assets".into(),
                ));
            }
            let m = sys.market.shares_outstanding();
            if !(0.0..=m[0].min(m[1])).contains(&value) {
                return Err(Error::Precondition(format!(
                    "lambda {value} outside [0, {}]",
                    m[0].min(m[1])
                )));
            }
            sys.banks[0].holdings = vec![value, m[1] - value];
            sys.banks[1].holdings = vec![m[0] - value, value];
        }
        SweepParam::Shock => {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Precondition(format!("shock {value} outside [0, 1]")));
            }
            for b in &mut sys.banks {
                b.nonmarketable *= 1.0 - value;
            }
        }
        SweepParam::Slope(k) => {
            if k >= sys.m() {
                return Err(Error::Precondition(format!("asset index {k} out of range")));
            }
            let asset = sys.market.asset(k);
            let family = match asset.family() {
                DemandFamily::PowerLinear { a, .. } => DemandFamily::PowerLinear { a: *a, b: value },
                DemandFamily::PowerCompound { a, .. } => DemandFamily::PowerCompound { a: *a, b: value },
                DemandFamily::Exponential { .. } => DemandFamily::Exponential { b: value },
                DemandFamily::LimitOrderBook { .. } => {
                    return Err(Error::Precondition(
                        "a limit order book has no slope parameter".into(),
                    ))
                }
            };
            let mut assets = sys.market.assets().to_vec();
            assets[k] = InverseDemand::new(family, asset.shares_outstanding())?;
            sys.market = Market::new(assets)?;
        }
    }
    sys.validate()?;
    Ok(sys)
}

fn point(
    base: &BankingSystem,
    strategy: StrategyChoice,
    opts: &SolverOptions,
    param: SweepParam,
    value: f64,
) -> Result<SweepPoint> {
    let sys = apply(base, param, value)?;
    let c = strategy.clear(&sys, opts)?;
    let sold = c.sold();
    Ok(SweepPoint {
        market_cap: sys.market_cap(&c.prices.q),
        q: c.prices.q,
        q_bar: c.prices.q_bar,
        sold,
        classes: c.classes,
    })
}

/// Clear the system at every grid value in parallel. Rows come back in
/// grid order; a failed point is recorded in its row.
pub fn sweep(
    base: &BankingSystem,
    strategy: StrategyChoice,
    opts: &SolverOptions,
    spec: &SweepSpec,
) -> Vec<SweepRow> {
    spec.grid
        .par_iter()
        .map(|&value| SweepRow {
            value,
            outcome: point(base, strategy, opts, spec.param, value),
        })
        .collect()
}

/// CSV header for [`row_fields`].
pub fn headers(system: &BankingSystem, param: SweepParam) -> Vec<String> {
    let m = system.m();
    let mut h = vec![param.to_string(), "status".into()];
    h.extend((0..m).map(|k| format!("q_{k}")));
    h.extend((0..m).map(|k| format!("q_bar_{k}")));
    h.extend((0..m).map(|k| format!("sold_{k}")));
    h.push("market_cap".into());
    h.extend(system.banks.iter().map(|b| format!("class_{}", b.name)));
    h
}

pub fn row_fields(system: &BankingSystem, row: &SweepRow) -> Vec<String> {
    let width = 2 + 3 * system.m() + 1 + system.n();
    let mut f = vec![row.value.to_string()];
    match &row.outcome {
        Ok(p) => {
            f.push("ok".into());
            for v in p.q.iter().chain(&p.q_bar).chain(&p.sold) {
                f.push(v.to_string());
            }
            f.push(p.market_cap.to_string());
            f.extend(p.classes.iter().map(|c| c.to_string()));
        }
        Err(e) => {
            f.push(format!("error: {e}"));
            f.resize(width, String::new());
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ScenarioConfig, DIVERSIFICATION, TWO_BANK_LOW};

    #[test]
    fn grid_validation() {
        assert!(SweepSpec::new(SweepParam::Shock, vec![]).is_err());
        assert!(SweepSpec::new(SweepParam::Shock, vec![0.2, 0.1]).is_err());
        let g = SweepSpec::linspace(SweepParam::Lambda, 0.0, 1.0, 0.01).unwrap();
        assert_eq!(g.grid.len(), 101);
        assert_eq!(*g.grid.last().unwrap(), 1.0);
    }

    #[test]
    fn param_names() {
        for p in [SweepParam::Lambda, SweepParam::Shock, SweepParam::Slope(3)] {
            assert_eq!(p.to_string().parse::<SweepParam>().unwrap(), p);
        }
        assert!("b:x".parse::<SweepParam>().is_err());
    }

    #[test]
    fn lambda_endpoints() {
        let sys = ScenarioConfig::parse(DIVERSIFICATION).unwrap().system().unwrap();
        let diverse = apply(&sys, SweepParam::Lambda, 0.0).unwrap();
        assert_eq!(diverse.banks[0].holdings, vec![0.0, 2.0]);
        assert_eq!(diverse.banks[1].holdings, vec![2.0, 0.0]);
        let diversified = apply(&sys, SweepParam::Lambda, 1.0).unwrap();
        assert_eq!(diversified.banks[0].holdings, diversified.banks[1].holdings);
    }

    #[test]
    fn failures_stay_in_row() {
        let sys = ScenarioConfig::parse(TWO_BANK_LOW).unwrap().system().unwrap();
        let spec = SweepSpec::new(SweepParam::Slope(0), vec![0.15, 0.45, 0.9]).unwrap();
        let rows = sweep(&sys, StrategyChoice::Single, &SolverOptions::default(), &spec);
        assert_eq!(rows.len(), 3);
        assert!(rows[0].outcome.is_ok() && rows[1].outcome.is_ok());
        assert!(rows[2].outcome.is_err());
        assert_eq!(row_fields(&sys, &rows[2]).len(), headers(&sys, spec.param).len());
    }
}
