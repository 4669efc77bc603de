//! First-order sensitivities of clearing prices.
//!
//! Differentiating the fixed point `(q, q̄) = Φ(q, q̄; #)` gives
//!
//! ```text
//! (I − W) [dq; dq̄] = [diag F'; diag F̄'] ∂Γ*/∂#,
//! W = [diag F' · JΓ*; diag F̄' · JΓ*]
//! ```
//!
//! with `JΓ* = [∂Γ*/∂q | ∂Γ*/∂q̄]`. `W` is entrywise nonnegative and its
//! Leontief inverse exists whenever the clearing prices are unique.

use log::warn;
use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::banking::{BankingSystem, PricePair, SolvencyClass};
use crate::clearing::{clear_with_purchase_signed, picard_clear, ClearingResult, SolverOptions};
use crate::error::{Error, Result};
use crate::liquidation::{bank_jacobians, bank_param_derivatives, boundary_banks, LiquidationStrategy};
pub use crate::param::ParamTag;

/// Condition number of `I − W` above which the system counts as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Default relative step for finite-difference checks.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    pub param: ParamTag,
    pub dq: Vec<f64>,
    pub dq_bar: Vec<f64>,
    /// Condition number of `I − W`; absent for finite-difference results.
    pub condition_number: Option<f64>,
    pub boundary_warnings: Vec<usize>,
}

impl SensitivityResult {
    /// Derivative of total market capitalisation `Mᵀq*`.
    pub fn market_cap(&self, system: &BankingSystem) -> f64 {
        system.market_cap(&self.dq)
    }
}

/// The factorised linear system at one clearing solution, reusable across
/// parameters.
pub struct SensitivitySystem<'a> {
    system: &'a BankingSystem,
    strategy: &'a LiquidationStrategy,
    prices: PricePair,
    sold: Vec<f64>,
    slope: Vec<f64>,
    slope_bar: Vec<f64>,
    w: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
    condition: f64,
    boundary: Vec<usize>,
    jacobians: Vec<DMatrix<f64>>,
}

impl<'a> SensitivitySystem<'a> {
    pub fn new(
        system: &'a BankingSystem,
        strategy: &'a LiquidationStrategy,
        clearing: &ClearingResult,
    ) -> Result<Self> {
        if !system.market.is_differentiable() {
            return Err(Error::NonDifferentiable("limit-order-book"));
        }
        let m = system.m();
        let prices = clearing.prices.clone();
        let sold: Vec<f64> = clearing
            .sold()
            .iter()
            .zip(system.market.assets())
            .map(|(g, a)| g.clamp(0.0, a.shares_outstanding()))
            .collect();
        let (slope, slope_bar) = system.market.slopes_at(&sold)?;
        let boundary = boundary_banks(system, &prices);
        if !boundary.is_empty() {
            warn!("banks {boundary:?} are on a class boundary; sensitivities are one-sided at best");
        }
        let jacobians = bank_jacobians(strategy, system, &prices)?;
        let mut jac = DMatrix::zeros(m, 2 * m);
        for j in &jacobians {
            jac += j;
        }
        let mut w = DMatrix::zeros(2 * m, 2 * m);
        for r in 0..m {
            for c in 0..2 * m {
                w[(r, c)] = slope[r] * jac[(r, c)];
                w[(m + r, c)] = slope_bar[r] * jac[(r, c)];
            }
        }
        let a = DMatrix::identity(2 * m, 2 * m) - &w;
        let sv = a.clone().svd(false, false).singular_values;
        let (smax, smin) = sv
            .iter()
            .fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(condition < MAX_CONDITION) {
            return Err(Error::SingularSensitivity { condition });
        }
        Ok(Self {
            system,
            strategy,
            prices,
            sold,
            slope,
            slope_bar,
            w,
            lu: a.lu(),
            condition,
            boundary,
            jacobians,
        })
    }

    /// The nonnegative feedback matrix `W`.
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    pub fn prices(&self) -> &PricePair {
        &self.prices
    }

    pub fn solve(&self, param: ParamTag) -> Result<SensitivityResult> {
        param.validate(self.system)?;
        let m = self.system.m();
        let mut rhs = DVector::zeros(2 * m);
        match param {
            ParamTag::AssetPurchase(k) => {
                // Effective sales have a kink at zero; with nothing sold a
                // marginal purchase has no price effect.
                if self.sold[k] > 0.0 {
                    rhs[k] = -self.slope[k] / self.prices.q_bar[k];
                    rhs[m + k] = -self.slope_bar[k] / self.prices.q_bar[k];
                }
            }
            _ => {
                let partial = self.partials(param)?;
                let mut total = vec![0.0; m];
                for row in &partial {
                    for (t, v) in total.iter_mut().zip(row) {
                        *t += v;
                    }
                }
                for k in 0..m {
                    rhs[k] = self.slope[k] * total[k];
                    rhs[m + k] = self.slope_bar[k] * total[k];
                }
            }
        }
        let x = self
            .lu
            .solve(&rhs)
            .ok_or(Error::SingularSensitivity { condition: self.condition })?;
        Ok(SensitivityResult {
            param,
            dq: x.rows(0, m).iter().copied().collect(),
            dq_bar: x.rows(m, m).iter().copied().collect(),
            condition_number: Some(self.condition),
            boundary_warnings: self.boundary.clone(),
        })
    }

    fn partials(&self, param: ParamTag) -> Result<Vec<Vec<f64>>> {
        bank_param_derivatives(self.strategy, self.system, &self.prices, param)
    }

    /// Total derivative `dγ_i/d#` of one bank's liquidations, combining the
    /// price channel with the direct effect of the parameter.
    pub fn bank_total_derivative(&self, bank: usize, sens: &SensitivityResult) -> Result<Vec<f64>> {
        let m = self.system.m();
        let partial = self.partials(sens.param)?;
        let mut dp = DVector::zeros(2 * m);
        for k in 0..m {
            dp[k] = sens.dq[k];
            dp[m + k] = sens.dq_bar[k];
        }
        let via_prices = &self.jacobians[bank] * dp;
        Ok((0..m).map(|k| via_prices[k] + partial[bank][k]).collect())
    }
}

/// Sensitivity of the clearing prices to one parameter.
pub fn price_sensitivity(
    system: &BankingSystem,
    strategy: &LiquidationStrategy,
    clearing: &ClearingResult,
    param: ParamTag,
) -> Result<SensitivityResult> {
    SensitivitySystem::new(system, strategy, clearing)?.solve(param)
}

/// Central-difference estimate of the clearing-price sensitivity, used to
/// validate [`price_sensitivity`]. `step` is relative to the parameter's
/// magnitude (or absolute when that is below 1).
pub fn finite_difference_check(
    system: &BankingSystem,
    strategy: &LiquidationStrategy,
    param: ParamTag,
    step: f64,
    opts: &SolverOptions,
) -> Result<SensitivityResult> {
    param.validate(system)?;
    let h = step * param.value(system).abs().max(1.0);
    let base = picard_clear(system, strategy, opts)?;
    let (up, dn) = match param {
        ParamTag::AssetPurchase(k) => {
            let mut beta = vec![0.0; system.m()];
            beta[k] = h;
            let up = clear_with_purchase_signed(system, strategy, &beta, opts)?;
            beta[k] = -h;
            let dn = clear_with_purchase_signed(system, strategy, &beta, opts)?;
            (up, dn)
        }
        _ => {
            let up_sys = param.shifted(system, h);
            let dn_sys = param.shifted(system, -h);
            let up = picard_clear(&up_sys, strategy, opts)?;
            let dn = picard_clear(&dn_sys, strategy, opts)?;
            (up, dn)
        }
    };
    let same = |r: &ClearingResult| r.classes == base.classes;
    if !same(&up) || !same(&dn) {
        return Err(Error::KinkDetected { step: h });
    }
    // A purchase with nothing for sale is a kink of the clearing map too.
    if let ParamTag::AssetPurchase(k) = param {
        if (base.sold()[k] > 0.0) != (dn.sold()[k] > 0.0) || (base.sold()[k] > 0.0) != (up.sold()[k] > 0.0) {
            return Err(Error::KinkDetected { step: h });
        }
    }
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| (x - y) / (2.0 * h)).collect() };
    Ok(SensitivityResult {
        param,
        dq: diff(&up.prices.q, &dn.prices.q),
        dq_bar: diff(&up.prices.q_bar, &dn.prices.q_bar),
        condition_number: None,
        boundary_warnings: boundary_banks(system, &base.prices),
    })
}

/// `Σ_k Mᵀ ∂q*/∂α_k`: change in market capitalisation when every risk
/// weight moves up together.
pub fn parallel_riskweight_impact(
    system: &BankingSystem,
    strategy: &LiquidationStrategy,
    clearing: &ClearingResult,
) -> Result<f64> {
    let sens = SensitivitySystem::new(system, strategy, clearing)?;
    let mut total = 0.0;
    for k in 0..system.m() {
        total += sens.solve(ParamTag::RiskWeight(k))?.market_cap(system);
    }
    Ok(total)
}

/// True when no bank sells anything at the clearing solution.
pub fn no_fire_sale(clearing: &ClearingResult) -> bool {
    clearing
        .classes
        .iter()
        .all(|c| *c == SolvencyClass::SolventLiquid)
}
