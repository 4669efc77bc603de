//! Fixed points of the clearing map
//!
//! ```text
//! Φ(q, q̄) = (F(Γ*(q, q̄)), F̄(Γ*(q, q̄)))
//! ```
//!
//! where `Γ*` aggregates the liquidations every bank makes at `(q, q̄)`.

use log::{debug, info};

use crate::banking::{BankingSystem, PricePair, SolvencyClass};
use crate::error::{Error, Result};
use crate::liquidation::{liquidate_from, projected_ascent, LiquidationMatrix, LiquidationStrategy, UtilitySpec};
use crate::market::{UniquenessMargin, DEFAULT_MARGIN_GRID};

/// Residual floor for strategies solved by an iterative inner optimiser.
const UTILITY_TOL_FLOOR: f64 = 1e-9;

const TRACE_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Uniqueness {
    /// Every asset passes the uniqueness margin and the strategy is monotone.
    CertifiedUnique,
    /// Greatest and least clearing prices exist but may differ.
    ExtremalOnly,
    /// No statement is available for this strategy.
    Unchecked,
}

impl Uniqueness {
    pub fn as_str(self) -> &'static str {
        match self {
            Uniqueness::CertifiedUnique => "certified-unique",
            Uniqueness::ExtremalOnly => "extremal-only",
            Uniqueness::Unchecked => "unchecked",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub certificate: Uniqueness,
    /// Per-asset margin; `None` for non-differentiable books.
    pub margins: Vec<Option<UniquenessMargin>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Greatest,
    Least,
}

impl Direction {
    fn as_str(self) -> &'static str {
        match self {
            Direction::Greatest => "greatest",
            Direction::Least => "least",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClearingResult {
    pub prices: PricePair,
    pub gamma: LiquidationMatrix,
    pub classes: Vec<SolvencyClass>,
    pub iterations: usize,
    /// Largest componentwise `|Φ(q, q̄) − (q, q̄)|` at the returned prices.
    pub residual: f64,
    pub uniqueness: Uniqueness,
}

impl ClearingResult {
    /// Aggregate liquidations `Γ*`.
    pub fn sold(&self) -> Vec<f64> {
        self.gamma.aggregate()
    }
}

pub fn certify_uniqueness(system: &BankingSystem, strategy: &LiquidationStrategy) -> UniquenessReport {
    let reg = &system.regulation;
    let margins: Vec<Option<UniquenessMargin>> = system
        .market
        .assets()
        .iter()
        .zip(&reg.alpha)
        .map(|(a, &alpha)| {
            a.uniqueness_margin(alpha, reg.theta_min, DEFAULT_MARGIN_GRID)
                .ok()
        })
        .collect();
    let certificate = if !strategy.is_monotone() {
        Uniqueness::Unchecked
    } else if margins.iter().all(|m| m.is_some_and(|m| m.holds())) {
        Uniqueness::CertifiedUnique
    } else {
        Uniqueness::ExtremalOnly
    };
    UniquenessReport { certificate, margins }
}

/// One evaluation of the clearing map `Φ` at `prices`.
pub fn evaluate_clearing_map(
    system: &BankingSystem,
    strategy: &LiquidationStrategy,
    prices: &PricePair,
) -> Result<PricePair> {
    strategy.check(system)?;
    Ok(clearing_map(strategy, system, prices, None, None)?.0)
}

/// One evaluation of the clearing map, optionally with outside purchases
/// `β` absorbing `β_k / q̄_k` shares of each asset.
fn clearing_map(
    strategy: &LiquidationStrategy,
    system: &BankingSystem,
    prices: &PricePair,
    beta: Option<&[f64]>,
    warm: Option<&LiquidationMatrix>,
) -> Result<(PricePair, LiquidationMatrix)> {
    let gamma = liquidate_from(strategy, system, prices, warm)?;
    let mut sold = gamma.aggregate();
    if let Some(beta) = beta {
        for (k, g) in sold.iter_mut().enumerate() {
            *g = (*g - beta[k] / prices.q_bar[k]).max(0.0);
        }
    }
    let (q, q_bar) = system.market.prices_at(&sold);
    Ok((PricePair::new(q, q_bar), gamma))
}

fn iterate(
    system: &BankingSystem,
    strategy: &LiquidationStrategy,
    start: PricePair,
    beta: Option<&[f64]>,
    direction: Option<Direction>,
    opts: &SolverOptions,
    solver: &'static str,
) -> Result<ClearingResult> {
    strategy.check(system)?;
    let tol = if strategy.utility().is_some() {
        opts.tol.max(UTILITY_TOL_FLOOR)
    } else {
        opts.tol
    };
    let mut prices = start;
    let mut warm: Option<LiquidationMatrix> = None;
    let mut trace: Vec<f64> = Vec::new();
    let mut classes_before = system.classify(&prices);
    for it in 1..=opts.max_iter {
        let (next, gamma) = clearing_map(strategy, system, &prices, beta, warm.as_ref())?;
        debug_assert!(next.q.iter().zip(&next.q_bar).all(|(a, b)| a <= b));
        if let Some(dir) = direction {
            let worst = next
                .q
                .iter()
                .zip(&prices.q)
                .chain(next.q_bar.iter().zip(&prices.q_bar))
                .map(|(new, old)| match dir {
                    Direction::Greatest => new - old,
                    Direction::Least => old - new,
                })
                .fold(f64::NEG_INFINITY, f64::max);
            if worst > 1e-12 {
                return Err(Error::NotMonotone {
                    iteration: it,
                    direction: dir.as_str(),
                    violation: worst,
                });
            }
        }
        let residual = next.distance(&prices);
        trace.push(residual);
        if trace.len() > TRACE_LEN {
            trace.remove(0);
        }
        warm = Some(gamma);
        let classes_after = system.classify(&next);
        let changed = classes_after != classes_before;
        prices = next;
        classes_before = classes_after;
        if residual < tol {
            return finish(system, strategy, prices, beta, warm, it, tol, changed);
        }
    }
    Err(Error::NonConvergence {
        solver,
        iterations: opts.max_iter,
        residual: trace.last().copied().unwrap_or(f64::NAN),
        trace,
    })
}

/// Recompute liquidations at the converged prices and confirm the class
/// configuration reproduces them.
#[allow(clippy::too_many_arguments)]
fn finish(
    system: &BankingSystem,
    strategy: &LiquidationStrategy,
    prices: PricePair,
    beta: Option<&[f64]>,
    warm: Option<LiquidationMatrix>,
    iterations: usize,
    tol: f64,
    classes_changed: bool,
) -> Result<ClearingResult> {
    let (check, gamma) = clearing_map(strategy, system, &prices, beta, warm.as_ref())?;
    let residual = check.distance(&prices);
    if classes_changed && residual > 10.0 * tol {
        return Err(Error::NonConvergence {
            solver: "clearing ansatz check",
            iterations,
            residual,
            trace: vec![residual],
        });
    }
    let classes = system.classify(&prices);
    Ok(ClearingResult {
        prices,
        gamma,
        classes,
        iterations,
        residual,
        uniqueness: certify_uniqueness(system, strategy).certificate,
    })
}

/// Picard iteration of the clearing map from unit prices. Markets with a
/// limit order book are routed to the greatest monotone clearing.
pub fn picard_clear(
    system: &BankingSystem,
    strategy: &LiquidationStrategy,
    opts: &SolverOptions,
) -> Result<ClearingResult> {
    if !system.market.is_differentiable() && strategy.is_monotone() {
        info!("order-book market: using the monotone greatest clearing");
        return monotone_clear(system, strategy, Direction::Greatest, opts);
    }
    iterate(
        system,
        strategy,
        PricePair::unit(system.m()),
        None,
        None,
        opts,
        "picard clearing",
    )
}

/// Greatest or least clearing prices for a monotone strategy.
pub fn monotone_clear(
    system: &BankingSystem,
    strategy: &LiquidationStrategy,
    direction: Direction,
    opts: &SolverOptions,
) -> Result<ClearingResult> {
    if !strategy.is_monotone() {
        return Err(Error::Precondition(format!(
            "{} liquidation is not known to be monotone in prices",
            strategy.name()
        )));
    }
    let start = match direction {
        Direction::Greatest => PricePair::unit(system.m()),
        Direction::Least => {
            let (q, q_bar) = system.market.floor_prices();
            PricePair::new(q, q_bar)
        }
    };
    iterate(system, strategy, start, None, Some(direction), opts, "monotone clearing")
}

/// Clearing with outside cash `β_k ≥ 0` buying asset `k` at its VWAP.
pub fn clear_with_purchase(
    system: &BankingSystem,
    strategy: &LiquidationStrategy,
    beta: &[f64],
    opts: &SolverOptions,
) -> Result<ClearingResult> {
    if beta.len() != system.m() {
        return Err(Error::Precondition(format!(
            "expected {} purchase amounts, got {}",
            system.m(),
            beta.len()
        )));
    }
    if let Some(b) = beta.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(Error::Precondition(format!("purchase amounts must be nonnegative, got {b}")));
    }
    clear_with_purchase_signed(system, strategy, beta, opts)
}

/// As [`clear_with_purchase`] but accepting negative entries, which act as
/// extra outside sales. Used for central differences at `β = 0`.
pub(crate) fn clear_with_purchase_signed(
    system: &BankingSystem,
    strategy: &LiquidationStrategy,
    beta: &[f64],
    opts: &SolverOptions,
) -> Result<ClearingResult> {
    let direction = (!system.market.is_differentiable() && strategy.is_monotone()).then_some(Direction::Greatest);
    iterate(
        system,
        strategy,
        PricePair::unit(system.m()),
        Some(beta),
        direction,
        opts,
        "purchase clearing",
    )
}

/// Nash equilibrium in which each bank anticipates its own price impact in
/// the regulatory constraint. Solved by round-robin best responses from
/// `Γ = 0`, damped once the round-to-round change stops shrinking.
pub fn price_making_clear(
    system: &BankingSystem,
    utility: &UtilitySpec,
    opts: &SolverOptions,
) -> Result<ClearingResult> {
    if !system.market.is_differentiable() {
        return Err(Error::Precondition(
            "price-making equilibrium needs differentiable inverse demand".into(),
        ));
    }
    let (n, m) = (system.n(), system.m());
    let tol = opts.tol.max(UTILITY_TOL_FLOOR);
    let mut rows = vec![vec![0.0; m]; n];
    let mut total = vec![0.0f64; m];
    let mut damped = false;
    let mut last_change = f64::INFINITY;
    let mut trace = Vec::new();
    for it in 1..=opts.max_iter {
        let mut change: f64 = 0.0;
        for i in 0..n {
            let others: Vec<f64> = total.iter().zip(&rows[i]).map(|(t, g)| (t - g).max(0.0)).collect();
            let br = price_making_response(system, utility, i, &others, &rows[i])?;
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
        if trace.len() > TRACE_LEN {
            trace.remove(0);
        }
        if change < tol {
            let (q, q_bar) = system.market.prices_at(&total);
            let prices = PricePair::new(q, q_bar);
            let classes = system.classify(&prices);
            debug!("price-making equilibrium after {it} rounds");
            return Ok(ClearingResult {
                prices,
                gamma: LiquidationMatrix::new(rows),
                classes,
                iterations: it,
                residual: change,
                uniqueness: Uniqueness::Unchecked,
            });
        }
        if change > last_change && !damped {
            damped = true;
        }
        last_change = change;
    }
    Err(Error::NonConvergence {
        solver: "price-making best response",
        iterations: opts.max_iter,
        residual: last_change,
        trace,
    })
}

/// Regulatory slack of bank `i` when it sells `own` and the others sell
/// `others`, with prices responding to the total.
struct PriceMakingConstraint<'a> {
    system: &'a BankingSystem,
    bank: usize,
    others: &'a [f64],
    retention: Vec<f64>,
}

impl PriceMakingConstraint<'_> {
    fn asset_term(&self, k: usize, g: f64) -> f64 {
        let a = self.system.market.asset(k);
        let s = self.system.banks[self.bank].holdings[k];
        let t = (g + self.others[k]).clamp(0.0, a.shares_outstanding());
        a.vwap_unchecked(t) * g + a.mtmp_unchecked(t) * self.retention[k] * (s - g)
    }

    fn value(&self, own: &[f64]) -> f64 {
        let h = self.system.banks[self.bank].shortfall(&self.system.regulation);
        (0..own.len()).map(|k| self.asset_term(k, own[k])).sum::<f64>() - h
    }

    fn gradient(&self, own: &[f64]) -> Vec<f64> {
        let s = &self.system.banks[self.bank].holdings;
        (0..own.len())
            .map(|k| {
                let a = self.system.market.asset(k);
                let t = (own[k] + self.others[k]).clamp(0.0, a.shares_outstanding());
                let r = self.retention[k];
                let d_bar = a.vwap_derivative_unchecked(t).unwrap_or(0.0);
                let d = a.mtmp_derivative_unchecked(t).unwrap_or(0.0);
                d_bar * own[k] + a.vwap_unchecked(t) + d * r * (s[k] - own[k]) - a.mtmp_unchecked(t) * r
            })
            .collect()
    }

    /// Largest attainable slack; the constraint is separable across assets.
    fn best_slack(&self) -> f64 {
        let s = &self.system.banks[self.bank].holdings;
        let h = self.system.banks[self.bank].shortfall(&self.system.regulation);
        let grid = 400;
        (0..s.len())
            .map(|k| {
                (0..=grid)
                    .map(|j| self.asset_term(k, s[k] * j as f64 / grid as f64))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .sum::<f64>()
            - h
    }
}

fn price_making_response(
    system: &BankingSystem,
    spec: &UtilitySpec,
    bank: usize,
    others: &[f64],
    start: &[f64],
) -> Result<Vec<f64>> {
    let holdings = &system.banks[bank].holdings;
    let m = holdings.len();
    let phi = PriceMakingConstraint {
        system,
        bank,
        others,
        retention: system.regulation.retention(),
    };
    let zero = vec![0.0; m];
    if !system.banks[bank].holds_marketable() || phi.value(&zero) >= 0.0 {
        return Ok(zero);
    }
    if phi.value(holdings) < 0.0 && phi.best_slack() < 0.0 {
        return Ok(holdings.clone());
    }
    let market = &system.market;
    let u = &spec.utility;
    let value = |x: &[f64]| u.value(market, x, others);
    let gradient = |x: &[f64], g: &mut [f64]| u.gradient(market, x, others, g);
    let mut current = start.to_vec();
    let mut damped = false;
    let mut last = f64::INFINITY;
    let max_outer = 500;
    for _ in 0..max_outer {
        let normal = phi.gradient(&current);
        let level = normal.iter().zip(&current).map(|(a, b)| a * b).sum::<f64>() - phi.value(&current);
        let out = projected_ascent(&value, &gradient, &current, holdings, &normal, level, &spec.options);
        if !out.converged {
            return Err(Error::InnerSolver {
                bank,
                iterations: out.iterations,
                step: out.last_step,
                constraint: phi.value(&out.point),
            });
        }
        let next: Vec<f64> = if damped {
            current.iter().zip(&out.point).map(|(a, b)| a + 0.5 * (b - a)).collect()
        } else {
            out.point
        };
        let change = next
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        current = next;
        if change < spec.options.tol {
            return Ok(current);
        }
        if change > last {
            damped = true;
        }
        last = change;
    }
    Err(Error::InnerSolver {
        bank,
        iterations: max_outer,
        step: last,
        constraint: phi.value(&current),
    })
}
