//! Bundled case studies with their reference values.

use std::fmt;
use std::str::FromStr;

use crate::banking::{BankingSystem, PricePair, SolvencyClass};
use crate::calibration::ccar_system;
use crate::clearing::{picard_clear, ClearingResult, SolverOptions};
use crate::error::{Error, Result};
use crate::liquidation::{verify_mlc, LiquidationStrategy};
use crate::policy::PolicyAnalysis;
use crate::scenario::{ScenarioConfig, StrategyChoice, DIVERSIFICATION, TWO_BANK_HIGH, TWO_BANK_LOW};
use crate::sweep::{sweep, SweepParam, SweepSpec};

/// Reference cost of regulation to the market for the shocked six-bank system.
pub const CCAR_CR: f64 = 3276.8;
/// Reference direct central-bank bailout value for JPM.
pub const CCAR_DCB_JPM: f64 = 0.3507;
/// Relative tolerance on the six-bank reference values.
pub const CCAR_REL_TOL: f64 = 0.10;
/// Accepted range for private bailouts of JPM.
pub const CCAR_DPB_RANGE: (f64, f64) = (-1.0, -0.6);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseStudy {
    TwoBankLow,
    TwoBankHigh,
    Diversification,
    Ccar,
}

impl CaseStudy {
    pub const ALL: [CaseStudy; 4] = [
        CaseStudy::TwoBankLow,
        CaseStudy::TwoBankHigh,
        CaseStudy::Diversification,
        CaseStudy::Ccar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseStudy::TwoBankLow => "two-bank-low",
            CaseStudy::TwoBankHigh => "two-bank-high",
            CaseStudy::Diversification => "diversification",
            CaseStudy::Ccar => "ccar",
        }
    }
}

impl fmt::Display for CaseStudy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseStudy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseStudy::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::config("case-study", format!("unknown case study `{s}`")))
    }
}

/// One comparison against a reference value.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, expected: impl Into<String>, actual: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            expected: expected.into(),
            actual: actual.into(),
            pass,
        }
    }

    fn close(name: &str, expected: f64, actual: f64, tol: f64) -> Self {
        Self::new(
            name,
            format!("{expected:.10} ± {tol:e}"),
            format!("{actual:.10}"),
            (expected - actual).abs() <= tol,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(title: &str, headers: &[&str]) -> Self {
        Self {
            title: title.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub case: CaseStudy,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

impl CaseReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn run_case_study(case: CaseStudy) -> Result<CaseReport> {
    match case {
        CaseStudy::TwoBankLow => two_bank(case, TWO_BANK_LOW),
        CaseStudy::TwoBankHigh => two_bank(case, TWO_BANK_HIGH),
        CaseStudy::Diversification => diversification(),
        CaseStudy::Ccar => ccar(),
    }
}

fn clearing_table(title: &str, system: &BankingSystem, c: &ClearingResult) -> Table {
    let mut t = Table::new(title, &["bank", "class", "liquidation"]);
    for (i, b) in system.banks.iter().enumerate() {
        let g = c.gamma.row(i).iter().map(|v| format!("{v:.10}")).collect::<Vec<_>>();
        t.rows.push(vec![b.name.clone(), c.classes[i].to_string(), g.join(" ")]);
    }
    t
}

fn two_bank(case: CaseStudy, text: &str) -> Result<CaseReport> {
    let cfg = ScenarioConfig::parse(text)?;
    let sys = cfg.system()?;
    let strategy = LiquidationStrategy::SingleAsset;
    let c = picard_clear(&sys, &strategy, &cfg.solver_options())?;
    let (q, qb) = (c.prices.q[0], c.prices.q_bar[0]);
    let mut prices = Table::new("clearing prices", &["q", "q_bar", "iterations"]);
    prices.rows.push(vec![format!("{q:.12}"), format!("{qb:.12}"), c.iterations.to_string()]);
    let mut checks = Vec::new();
    use SolvencyClass::*;
    match case {
        CaseStudy::TwoBankLow => {
            let root = 61f64.sqrt();
            checks.push(Check::close("q", (34.0 - root) / 30.0, q, 1e-8));
            checks.push(Check::close("q_bar", (64.0 - root) / 60.0, qb, 1e-8));
            checks.push(Check::close("gamma bank1", 0.8467, c.gamma.row(0)[0], 1e-4));
            checks.push(class_check(&c.classes, &[SolventIlliquid, SolventLiquid]));
        }
        _ => {
            checks.push(Check::close("q", 0.10, q, 1e-10));
            checks.push(Check::close("q_bar", 0.55, qb, 1e-10));
            checks.push(class_check(&c.classes, &[Insolvent, Insolvent]));
            let before = sys.classify(&PricePair::unit(1));
            checks.push(Check::new(
                "bank2 class before clearing",
                SolventLiquid.to_string(),
                before[1].to_string(),
                before[1] == SolventLiquid,
            ));
        }
    }
    let mlc = verify_mlc(&sys, &c.prices, &c.gamma).into_iter().fold(0.0, f64::max);
    checks.push(Check::new("minimal liquidation residual", "< 1e-8", format!("{mlc:.3e}"), mlc < 1e-8));
    Ok(CaseReport {
        case,
        tables: vec![prices, clearing_table("banks", &sys, &c)],
        checks,
    })
}

fn class_check(actual: &[SolvencyClass], expected: &[SolvencyClass]) -> Check {
    let show = |v: &[SolvencyClass]| v.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", ");
    Check::new("classes", show(expected), show(actual), actual == expected)
}

/// Strategies compared in the diversification study.
pub const DIVERSIFICATION_STRATEGIES: [StrategyChoice; 3] = [
    StrategyChoice::Proportional,
    StrategyChoice::PtEquilibrium,
    StrategyChoice::PmEquilibrium,
];

/// Clearing MTMPs and market capitalisation for one strategy over `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiversificationSeries {
    pub strategy: StrategyChoice,
    pub lambda: Vec<f64>,
    pub q: Vec<[f64; 2]>,
    pub market_cap: Vec<f64>,
}

/// Sweep `λ` over `[0, 1]` with the given step for each strategy.
pub fn diversification_series(step: f64) -> Result<Vec<DiversificationSeries>> {
    let cfg = ScenarioConfig::parse(DIVERSIFICATION)?;
    let sys = cfg.system()?;
    let spec = SweepSpec::linspace(SweepParam::Lambda, 0.0, 1.0, step)?;
    DIVERSIFICATION_STRATEGIES
        .iter()
        .map(|&strategy| {
            let rows = sweep(&sys, strategy, &cfg.solver_options(), &spec);
            let mut s = DiversificationSeries {
                strategy,
                lambda: Vec::new(),
                q: Vec::new(),
                market_cap: Vec::new(),
            };
            for r in rows {
                let p = r.outcome?;
                s.lambda.push(r.value);
                s.q.push([p.q[0], p.q[1]]);
                s.market_cap.push(p.market_cap);
            }
            Ok(s)
        })
        .collect()
}

fn diversification() -> Result<CaseReport> {
    let series = diversification_series(0.01)?;
    let mut headers = vec!["lambda".to_string()];
    for s in &series {
        for col in ["q1", "q2", "market_cap"] {
            headers.push(format!("{}_{col}", s.strategy));
        }
    }
    let mut table = Table {
        title: "clearing prices and market capitalisation".into(),
        headers,
        rows: Vec::new(),
    };
    for i in 0..series[0].lambda.len() {
        let mut row = vec![format!("{:.2}", series[0].lambda[i])];
        for s in &series {
            row.push(format!("{:.10}", s.q[i][0]));
            row.push(format!("{:.10}", s.q[i][1]));
            row.push(format!("{:.10}", s.market_cap[i]));
        }
        table.rows.push(row);
    }

    let (prop, pt, pm) = (&series[0], &series[1], &series[2]);
    let mut checks = Vec::new();
    let argmax = argmax(&prop.market_cap);
    let at_max = prop.lambda[argmax];
    checks.push(Check::new(
        "proportional maximum",
        "lambda in [0.3, 0.5]",
        format!("lambda = {at_max:.2}"),
        (0.3..=0.5).contains(&at_max),
    ));
    let tail: Vec<usize> = (0..prop.lambda.len()).filter(|&i| prop.lambda[i] >= 0.2 - 1e-12).collect();
    let min_i = tail
        .iter()
        .copied()
        .min_by(|&a, &b| prop.market_cap[a].total_cmp(&prop.market_cap[b]))
        .unwrap_or(0);
    checks.push(Check::new(
        "proportional minimum on [0.2, 1]",
        "lambda = 1",
        format!("lambda = {:.2}", prop.lambda[min_i]),
        (prop.lambda[min_i] - 1.0).abs() < 1e-12,
    ));
    for s in [pt, pm] {
        let worst = s
            .market_cap
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        checks.push(Check::new(
            &format!("{} nondecreasing", s.strategy),
            "smallest step >= -1e-6",
            format!("{worst:.3e}"),
            worst >= -1e-6,
        ));
    }
    let gap = (0..pm.lambda.len())
        .filter(|&i| pm.lambda[i] >= 0.45 - 1e-12)
        .map(|i| pm.market_cap[i] - pt.market_cap[i])
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::new(
        "price-making above price-taking for lambda >= 0.45",
        "min gap >= 0",
        format!("{gap:.3e}"),
        gap >= 0.0,
    ));
    Ok(CaseReport {
        case: CaseStudy::Diversification,
        tables: vec![table],
        checks,
    })
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0)
}

/// Shocked six-bank system with its clearing solution.
pub fn ccar_clearing(shock: f64) -> Result<(BankingSystem, ClearingResult)> {
    let sys = ccar_system(shock)?;
    let c = picard_clear(&sys, &LiquidationStrategy::Proportional, &SolverOptions::default())?;
    Ok((sys, c))
}

fn ccar() -> Result<CaseReport> {
    use SolvencyClass::*;
    let strategy = LiquidationStrategy::Proportional;
    let mut checks = Vec::new();

    let (_, calm) = ccar_clearing(0.0)?;
    let untouched = calm.prices.q.iter().chain(&calm.prices.q_bar).all(|&p| p == 1.0);
    checks.push(Check::new("no fire sale without shock", "prices = 1", format!("{untouched}"), untouched));

    let (sys, c) = ccar_clearing(0.05)?;
    let expected = [Insolvent, SolventLiquid, SolventLiquid, SolventIlliquid, SolventLiquid, SolventLiquid];
    checks.push(class_check(&c.classes, &expected));

    let pa = PolicyAnalysis::new(&sys, &strategy, &c)?;
    let jpm = sys.bank_index("JPM").ok_or_else(|| Error::Precondition("JPM missing".into()))?;

    let mut banks = Table::new("banks", &["bank", "class", "crl", "cmi", "dcb"]);
    let mut crl_pattern = true;
    let mut cmi_nonzero = true;
    for i in 0..sys.n() {
        let crl = pa.cost_regulation_realized(i)?.value;
        let cmi = pa.cost_regulation_mtm(i)?.value;
        let dcb = pa.direct_central_bailout(i)?.value;
        let liquidating = c.classes[i] != SolventLiquid;
        crl_pattern &= (crl != 0.0) == liquidating;
        cmi_nonzero &= cmi != 0.0;
        banks.rows.push(vec![
            sys.banks[i].name.clone(),
            c.classes[i].to_string(),
            format!("{crl:.6}"),
            format!("{cmi:.6}"),
            format!("{dcb:.6}"),
        ]);
    }
    checks.push(Check::new("crl nonzero exactly for liquidating banks", "true", crl_pattern.to_string(), crl_pattern));
    checks.push(Check::new("cmi nonzero for every bank", "true", cmi_nonzero.to_string(), cmi_nonzero));

    let cr = pa.cost_regulation_market()?.value;
    checks.push(Check::new(
        "cr",
        format!("{CCAR_CR} ± 10%"),
        format!("{cr:.4}"),
        (cr - CCAR_CR).abs() <= CCAR_REL_TOL * CCAR_CR,
    ));
    let dcb = pa.direct_central_bailout(jpm)?.value;
    checks.push(Check::new(
        "dcb JPM",
        format!("{CCAR_DCB_JPM} ± 10%"),
        format!("{dcb:.6}"),
        (dcb - CCAR_DCB_JPM).abs() <= CCAR_REL_TOL * CCAR_DCB_JPM,
    ));

    let mut dpb = Table::new("private bailouts of JPM", &["from", "dpb"]);
    let mut dpb_ok = true;
    for j in (0..sys.n()).filter(|&j| j != jpm && c.classes[j] != Insolvent) {
        let v = pa.direct_private_bailout(j, jpm)?.value;
        dpb_ok &= (CCAR_DPB_RANGE.0..=CCAR_DPB_RANGE.1).contains(&v);
        dpb.rows.push(vec![sys.banks[j].name.clone(), format!("{v:.6}")]);
    }
    checks.push(Check::new(
        "dpb to JPM",
        format!("in [{}, {}]", CCAR_DPB_RANGE.0, CCAR_DPB_RANGE.1),
        dpb_ok.to_string(),
        dpb_ok,
    ));

    let mut icb = Table::new("asset purchases", &["asset", "alpha", "icb"]);
    let mut icb_neg = true;
    for k in 0..sys.m() {
        let v = pa.indirect_central_bailout(k)?.value;
        icb_neg &= v < 0.0;
        icb.rows.push(vec![k.to_string(), sys.regulation.alpha[k].to_string(), format!("{v:.6}")]);
    }
    checks.push(Check::new("every icb negative", "true", icb_neg.to_string(), icb_neg));
    pa.direct_vs_indirect()?;

    let mut summary = Table::new("system", &["metric", "value"]);
    summary.rows.push(vec!["cr".into(), format!("{cr:.6}")]);
    summary.rows.push(vec!["iterations".into(), c.iterations.to_string()]);
    Ok(CaseReport {
        case: CaseStudy::Ccar,
        tables: vec![summary, banks, dpb, icb],
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for c in CaseStudy::ALL {
            assert_eq!(c.as_str().parse::<CaseStudy>().unwrap(), c);
        }
    }

    #[test]
    fn two_bank_cases_pass() {
        assert!(run_case_study(CaseStudy::TwoBankLow).unwrap().passed());
        assert!(run_case_study(CaseStudy::TwoBankHigh).unwrap().passed());
    }
}
