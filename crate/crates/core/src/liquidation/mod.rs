//! Liquidation strategies: how much each bank sells at given prices.
//!
//! Every strategy satisfies the minimal liquidation condition
//!
//! ```text
//! dᵀγ_i = (h_i − qᵀ(I − Aθ)s_i)⁺ ∧ dᵀs_i,    d = q̄ − (I − Aθ)q
//! ```
//!
//! so liquid banks sell nothing, insolvent banks sell everything, and
//! illiquid banks sell just enough to restore the minimum capital ratio.

mod solver;
mod utility;

use log::warn;
use nalgebra::DMatrix;

pub use utility::{InnerOptions, RealizedLoss, Utility, UtilitySpec};

use crate::banking::{classify_shortfall, BankingSystem, PricePair, SolvencyClass};
use crate::error::{Error, Result};
use crate::param::ParamTag;

pub(crate) use solver::projected_ascent;

/// Relative distance to a class boundary below which derivatives are
/// flagged as one-sided.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// Finite-difference step used for the utility-based strategies.
pub const UTILITY_FD_STEP: f64 = 1e-7;

#[derive(Debug, Clone)]
pub enum LiquidationStrategy {
    /// Closed form for a single marketable asset.
    SingleAsset,
    /// Sell a common fraction of every holding.
    Proportional,
    /// Maximise a concave utility over the regulatory constraint set.
    UtilityMax(UtilitySpec),
    /// Nash equilibrium of utility maximisers at fixed prices.
    PriceTakingEquilibrium(UtilitySpec),
}

impl LiquidationStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            LiquidationStrategy::SingleAsset => "single",
            LiquidationStrategy::Proportional => "proportional",
            LiquidationStrategy::UtilityMax(_) => "utility",
            LiquidationStrategy::PriceTakingEquilibrium(_) => "pt-equilibrium",
        }
    }

    /// Strategies known to be nonincreasing in prices.
    pub fn is_monotone(&self) -> bool {
        matches!(
            self,
            LiquidationStrategy::SingleAsset | LiquidationStrategy::Proportional
        )
    }

    pub fn utility(&self) -> Option<&UtilitySpec> {
        match self {
            LiquidationStrategy::UtilityMax(u) | LiquidationStrategy::PriceTakingEquilibrium(u) => Some(u),
            _ => None,
        }
    }

    pub fn check(&self, system: &BankingSystem) -> Result<()> {
        match self {
            LiquidationStrategy::SingleAsset if system.m() != 1 => Err(Error::Precondition(format!(
                "single-asset liquidation needs exactly one marketable asset, system has {}",
                system.m()
            ))),
            LiquidationStrategy::UtilityMax(_) | LiquidationStrategy::PriceTakingEquilibrium(_)
                if !system.market.is_differentiable() =>
            {
                Err(Error::Precondition(
                    "utility-based liquidation needs differentiable inverse demand".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Shares sold, one row per bank and one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct LiquidationMatrix {
    rows: Vec<Vec<f64>>,
}

impl LiquidationMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            rows: vec![vec![0.0; m]; n],
        }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Column sums `Γ* = Γᵀ1`.
    pub fn aggregate(&self) -> Vec<f64> {
        aggregate(self)
    }
}

pub fn aggregate(gamma: &LiquidationMatrix) -> Vec<f64> {
    let m = gamma.rows.first().map_or(0, Vec::len);
    let mut out = vec![0.0; m];
    for row in &gamma.rows {
        for (o, g) in out.iter_mut().zip(row) {
            *o += g;
        }
    }
    out
}

/// Per-bank quantities entering the minimal liquidation condition.
#[derive(Debug, Clone)]
pub(crate) struct BankTerms {
    pub h: f64,
    /// `qᵀ(I − Aθ)s`.
    pub capacity: f64,
    /// `q̄ᵀs`.
    pub full_value: f64,
    /// `dᵀs`.
    pub denom: f64,
    pub class: SolvencyClass,
}

impl BankTerms {
    /// Right-hand side of the minimal liquidation condition.
    pub fn target(&self) -> f64 {
        (self.h - self.capacity).max(0.0).min(self.denom)
    }

    /// Fraction sold under proportional liquidation, before clamping.
    pub fn fraction(&self) -> f64 {
        (self.h - self.capacity) / self.denom
    }

    fn near_boundary(&self) -> bool {
        let scale = self.full_value.abs().max(self.h.abs()).max(f64::MIN_POSITIVE);
        let tol = BOUNDARY_TOLERANCE * scale;
        (self.h - self.capacity).abs() <= tol || (self.h - self.full_value).abs() <= tol
    }
}

pub(crate) fn discount(system: &BankingSystem, prices: &PricePair) -> Vec<f64> {
    let reg = &system.regulation;
    (0..system.m())
        .map(|k| prices.q_bar[k] - (1.0 - reg.alpha[k] * reg.theta_min) * prices.q[k])
        .collect()
}

pub(crate) fn bank_terms(system: &BankingSystem, prices: &PricePair) -> Vec<BankTerms> {
    let reg = &system.regulation;
    let d = discount(system, prices);
    system
        .banks
        .iter()
        .map(|b| {
            let h = b.shortfall(reg);
            let capacity = b.liquid_capacity(reg, &prices.q);
            let full_value = b.liquidation_value(&prices.q_bar);
            let denom = d.iter().zip(&b.holdings).map(|(a, s)| a * s).sum();
            let class = classify_shortfall(h, capacity, full_value, b.holds_marketable());
            BankTerms {
                h,
                capacity,
                full_value,
                denom,
                class,
            }
        })
        .collect()
}

/// Banks whose class would change under an arbitrarily small perturbation.
pub fn boundary_banks(system: &BankingSystem, prices: &PricePair) -> Vec<usize> {
    bank_terms(system, prices)
        .iter()
        .enumerate()
        .filter(|(i, t)| system.banks[*i].holds_marketable() && t.near_boundary())
        .map(|(i, _)| i)
        .collect()
}

/// Liquidations of every bank at `prices`.
pub fn liquidate(
    strategy: &LiquidationStrategy,
    system: &BankingSystem,
    prices: &PricePair,
) -> Result<LiquidationMatrix> {
    liquidate_from(strategy, system, prices, None)
}

/// As [`liquidate`], warm-starting utility solvers from `warm` when given.
pub(crate) fn liquidate_from(
    strategy: &LiquidationStrategy,
    system: &BankingSystem,
    prices: &PricePair,
    warm: Option<&LiquidationMatrix>,
) -> Result<LiquidationMatrix> {
    strategy.check(system)?;
    let terms = bank_terms(system, prices);
    let mut rows: Vec<Vec<f64>> = system
        .banks
        .iter()
        .zip(&terms)
        .map(|(b, t)| match t.class {
            SolvencyClass::SolventLiquid => vec![0.0; b.holdings.len()],
            SolvencyClass::Insolvent => b.holdings.clone(),
            SolvencyClass::SolventIlliquid => {
                let f = t.fraction().clamp(0.0, 1.0);
                b.holdings.iter().map(|s| f * s).collect()
            }
        })
        .collect();
    match strategy {
        LiquidationStrategy::SingleAsset | LiquidationStrategy::Proportional => {}
        LiquidationStrategy::UtilityMax(spec) => {
            let d = discount(system, prices);
            let zeros = vec![0.0; system.m()];
            for (i, t) in terms.iter().enumerate() {
                if t.class != SolvencyClass::SolventIlliquid {
                    continue;
                }
                let start = warm.map_or(rows[i].clone(), |w| w.row(i).to_vec());
                rows[i] = best_response(spec, system, i, &d, t.target(), &zeros, &start)?;
            }
        }
        LiquidationStrategy::PriceTakingEquilibrium(spec) => {
            let d = discount(system, prices);
            price_taking_equilibrium(spec, system, &terms, &d, &mut rows, warm)?;
        }
    }
    Ok(LiquidationMatrix::new(rows))
}

fn best_response(
    spec: &UtilitySpec,
    system: &BankingSystem,
    bank: usize,
    normal: &[f64],
    level: f64,
    others: &[f64],
    start: &[f64],
) -> Result<Vec<f64>> {
    let market = &system.market;
    let upper = &system.banks[bank].holdings;
    let u = &spec.utility;
    let value = |x: &[f64]| u.value(market, x, others);
    let gradient = |x: &[f64], g: &mut [f64]| u.gradient(market, x, others, g);
    let out = projected_ascent(&value, &gradient, start, upper, normal, level, &spec.options);
    if !out.converged {
        let lhs: f64 = out.point.iter().zip(normal).map(|(a, b)| a * b).sum();
        return Err(Error::InnerSolver {
            bank,
            iterations: out.iterations,
            step: out.last_step,
            constraint: (lhs - level).abs(),
        });
    }
    Ok(out.point)
}

fn price_taking_equilibrium(
    spec: &UtilitySpec,
    system: &BankingSystem,
    terms: &[BankTerms],
    normal: &[f64],
    rows: &mut [Vec<f64>],
    warm: Option<&LiquidationMatrix>,
) -> Result<()> {
    let m = system.m();
    let active: Vec<usize> = (0..terms.len())
        .filter(|&i| terms[i].class == SolvencyClass::SolventIlliquid)
        .collect();
    for &i in &active {
        rows[i] = match warm {
            Some(w) => w.row(i).to_vec(),
            None => vec![0.0; m],
        };
    }
    if active.is_empty() {
        return Ok(());
    }
    let mut total = vec![0.0; m];
    for row in rows.iter() {
        for (t, g) in total.iter_mut().zip(row) {
            *t += g;
        }
    }
    let tol = 10.0 * spec.options.tol;
    let mut damped = false;
    let mut last_change = f64::INFINITY;
    let mut trace = Vec::new();
    for _ in 0..spec.options.max_rounds {
        let mut change: f64 = 0.0;
        for &i in &active {
            let others: Vec<f64> = total.iter().zip(&rows[i]).map(|(t, g)| (t - g).max(0.0)).collect();
            let br = best_response(spec, system, i, normal, terms[i].target(), &others, &rows[i])?;
            let next: Vec<f64> = if damped {
                rows[i].iter().zip(&br).map(|(a, b)| a + 0.5 * (b - a)).collect()
            } else {
                br
            };
            for k in 0..m {
                change = change.max((next[k] - rows[i][k]).abs());
                total[k] += next[k] - rows[i][k];
            }
            rows[i] = next;
        }
        trace.push(change);
        if change < tol {
            return Ok(());
        }
        if change > last_change && !damped {
            damped = true;
        }
        last_change = change;
    }
    let tail = trace.split_off(trace.len().saturating_sub(10));
    Err(Error::NonConvergence {
        solver: "price-taking best response",
        iterations: spec.options.max_rounds,
        residual: last_change,
        trace: tail,
    })
}

/// `|LHS − RHS|` of the minimal liquidation condition for each bank.
pub fn verify_mlc(system: &BankingSystem, prices: &PricePair, gamma: &LiquidationMatrix) -> Vec<f64> {
    let d = discount(system, prices);
    bank_terms(system, prices)
        .iter()
        .zip(gamma.rows())
        .map(|(t, row)| {
            let lhs: f64 = d.iter().zip(row).map(|(a, g)| a * g).sum();
            (lhs - t.target()).abs()
        })
        .collect()
}

/// Jacobian of the aggregate liquidations with respect to prices.
#[derive(Debug, Clone)]
pub struct PriceJacobian {
    /// `m × 2m` matrix `[∂Γ*/∂q | ∂Γ*/∂q̄]`.
    pub matrix: DMatrix<f64>,
    pub boundary_banks: Vec<usize>,
}

/// Derivative of the aggregate liquidations with respect to a parameter,
/// prices held fixed.
#[derive(Debug, Clone)]
pub struct ParamDerivative {
    pub vector: Vec<f64>,
    pub boundary_banks: Vec<usize>,
}

fn warn_boundary(system: &BankingSystem, prices: &PricePair) -> Vec<usize> {
    let banks = boundary_banks(system, prices);
    if !banks.is_empty() {
        let names: Vec<&str> = banks.iter().map(|&i| system.banks[i].name.as_str()).collect();
        warn!(
            "banks {names:?} sit on a class boundary; derivatives are two-sided numerical values"
        );
    }
    banks
}

pub fn jacobian_aggregate(
    strategy: &LiquidationStrategy,
    system: &BankingSystem,
    prices: &PricePair,
) -> Result<PriceJacobian> {
    let boundary_banks = warn_boundary(system, prices);
    let per_bank = bank_jacobians(strategy, system, prices)?;
    let m = system.m();
    let mut matrix = DMatrix::zeros(m, 2 * m);
    for j in per_bank {
        matrix += j;
    }
    Ok(PriceJacobian {
        matrix,
        boundary_banks,
    })
}

/// `∂γ_i/∂(q, q̄)` for every bank, each `m × 2m`.
pub fn bank_jacobians(
    strategy: &LiquidationStrategy,
    system: &BankingSystem,
    prices: &PricePair,
) -> Result<Vec<DMatrix<f64>>> {
    strategy.check(system)?;
    let m = system.m();
    let n = system.n();
    if strategy.is_monotone() {
        let terms = bank_terms(system, prices);
        let r = system.regulation.retention();
        let mut out = Vec::with_capacity(n);
        for (b, t) in system.banks.iter().zip(&terms) {
            let mut jac = DMatrix::zeros(m, 2 * m);
            if t.class == SolvencyClass::SolventIlliquid {
                let num = t.h - t.capacity;
                let den = t.denom;
                for l in 0..m {
                    let c_l = r[l] * b.holdings[l];
                    let dt_dq = -c_l * (den - num) / (den * den);
                    let dt_dqbar = -num * b.holdings[l] / (den * den);
                    for k in 0..m {
                        jac[(k, l)] = b.holdings[k] * dt_dq;
                        jac[(k, m + l)] = b.holdings[k] * dt_dqbar;
                    }
                }
            }
            out.push(jac);
        }
        return Ok(out);
    }
    let mut out = vec![DMatrix::zeros(m, 2 * m); n];
    let base = liquidate(strategy, system, prices)?;
    let h = UTILITY_FD_STEP;
    for col in 0..2 * m {
        let bump = |sign: f64| {
            let mut p = prices.clone();
            if col < m {
                p.q[col] += sign * h;
            } else {
                p.q_bar[col - m] += sign * h;
            }
            liquidate_from(strategy, system, &p, Some(&base))
        };
        let up = bump(1.0)?;
        let dn = bump(-1.0)?;
        for i in 0..n {
            for k in 0..m {
                out[i][(k, col)] = (up.row(i)[k] - dn.row(i)[k]) / (2.0 * h);
            }
        }
    }
    Ok(out)
}

pub fn param_derivative(
    strategy: &LiquidationStrategy,
    system: &BankingSystem,
    prices: &PricePair,
    param: ParamTag,
) -> Result<ParamDerivative> {
    let boundary_banks = warn_boundary(system, prices);
    let rows = bank_param_derivatives(strategy, system, prices, param)?;
    let mut vector = vec![0.0; system.m()];
    for row in rows {
        for (v, r) in vector.iter_mut().zip(row) {
            *v += r;
        }
    }
    Ok(ParamDerivative {
        vector,
        boundary_banks,
    })
}

/// `∂γ_i/∂#` for every bank at fixed prices.
pub fn bank_param_derivatives(
    strategy: &LiquidationStrategy,
    system: &BankingSystem,
    prices: &PricePair,
    param: ParamTag,
) -> Result<Vec<Vec<f64>>> {
    strategy.check(system)?;
    param.validate(system)?;
    let m = system.m();
    let n = system.n();
    if let ParamTag::AssetPurchase(_) = param {
        // Purchases act on prices, not on any bank's decision.
        return Ok(vec![vec![0.0; m]; n]);
    }
    if !strategy.is_monotone() {
        let h = UTILITY_FD_STEP * param.value(system).abs().max(1.0);
        let base = liquidate(strategy, system, prices)?;
        let up = liquidate_from(strategy, &param.shifted(system, h), prices, Some(&base))?;
        let dn = liquidate_from(strategy, &param.shifted(system, -h), prices, Some(&base))?;
        return Ok((0..n)
            .map(|i| (0..m).map(|k| (up.row(i)[k] - dn.row(i)[k]) / (2.0 * h)).collect())
            .collect());
    }
    let reg = &system.regulation;
    let terms = bank_terms(system, prices);
    let mut out = vec![vec![0.0; m]; n];
    for (i, (b, t)) in system.banks.iter().zip(&terms).enumerate() {
        match t.class {
            SolvencyClass::SolventLiquid => continue,
            SolvencyClass::Insolvent => {
                if let ParamTag::Holding(j, k) = param {
                    if j == i {
                        out[i][k] = 1.0;
                    }
                }
                continue;
            }
            SolvencyClass::SolventIlliquid => {}
        }
        let num = t.h - t.capacity;
        let den = t.denom;
        let frac = num / den;
        let weighted: f64 = (0..m).map(|k| prices.q[k] * reg.alpha[k] * b.holdings[k]).sum();
        let (d_num, d_den) = match param {
            ParamTag::Threshold => (b.alpha_nonmarketable * b.nonmarketable + weighted, weighted),
            ParamTag::RiskWeight(k) => {
                let v = reg.theta_min * prices.q[k] * b.holdings[k];
                (v, v)
            }
            ParamTag::Shortfall(j) if j == i => (1.0, 0.0),
            ParamTag::Holding(j, k) if j == i => {
                let r = 1.0 - reg.alpha[k] * reg.theta_min;
                (-prices.q[k] * r, prices.q_bar[k] - prices.q[k] * r)
            }
            _ => continue,
        };
        let dt = (d_num * den - num * d_den) / (den * den);
        for k in 0..m {
            out[i][k] = dt * b.holdings[k];
        }
        if let ParamTag::Holding(j, k) = param {
            if j == i {
                out[i][k] += frac;
            }
        }
    }
    Ok(out)
}
