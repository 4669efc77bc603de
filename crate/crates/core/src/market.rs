//! Price-impact laws for the marketable assets.
//!
//! Every asset carries an inverse demand function `f` mapping shares sold to
//! the terminal mark-to-market price (MTMP) and the induced volume weighted
//! average price (VWAP) `f̄(γ) = (1/γ) ∫₀^γ f`. Both equal 1 at `γ = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of uniform grid points used by [`InverseDemand::uniqueness_margin`].
pub const DEFAULT_MARGIN_GRID: usize = 1001;

/// Below this value of `|b·γ|` the VWAP slope is evaluated by its Taylor
/// series instead of `(f − f̄)/γ`, which cancels badly near zero.
const SERIES_CUTOFF: f64 = 1e-3;

/// One resting level of a limit order book: `depth` shares are absorbed at `price`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BookLevel {
    pub price: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DemandFamily {
    /// Step MTMP. The first level must be quoted at 1 and prices strictly
    /// decrease; the last level absorbs any volume beyond the listed depth.
    LimitOrderBook { levels: Vec<BookLevel> },
    /// `f(γ) = 1 − b γ^a`.
    PowerLinear { a: f64, b: f64 },
    /// `f(γ) = (1 − b γ)^a`.
    PowerCompound { a: f64, b: f64 },
    /// `f(γ) = exp(−b γ)`.
    Exponential { b: f64 },
}

impl DemandFamily {
    pub fn name(&self) -> &'static str {
        match self {
            DemandFamily::LimitOrderBook { .. } => "limit-order-book",
            DemandFamily::PowerLinear { .. } => "power-linear",
            DemandFamily::PowerCompound { .. } => "power-compound",
            DemandFamily::Exponential { .. } => "exponential",
        }
    }
}

/// Admissible risk weights for one asset under the separable uniqueness
/// criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiskWeightInterval {
    /// Open interval `(lower, upper)`.
    Open { lower: f64, upper: f64 },
    /// The criterion applies but no risk weight satisfies it.
    Empty,
    /// The criterion does not apply to this family; fall back to the
    /// numerical margin check.
    NotApplicable,
}

/// Minimum of the per-asset uniqueness derivative over a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniquenessMargin {
    pub min: f64,
    /// Liquidation level at which the minimum was attained.
    pub argmin: f64,
}

impl UniquenessMargin {
    pub fn holds(&self) -> bool {
        self.min > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseDemand {
    family: DemandFamily,
    shares_outstanding: f64,
}

impl InverseDemand {
    pub fn new(family: DemandFamily, shares_outstanding: f64) -> Result<Self> {
        let path = family.name();
        if !(shares_outstanding.is_finite() && shares_outstanding > 0.0) {
            return Err(Error::config(
                "shares_outstanding",
                format!("must be positive and finite, got {shares_outstanding}"),
            ));
        }
        let m = shares_outstanding;
        match &family {
            DemandFamily::LimitOrderBook { levels } => {
                let first = levels
                    .first()
                    .ok_or_else(|| Error::config(path, "order book needs at least one level"))?;
                if first.price != 1.0 {
                    return Err(Error::config(path, "first book level must be priced at 1"));
                }
                for (j, lvl) in levels.iter().enumerate() {
                    if !(lvl.price > 0.0 && lvl.price <= 1.0) {
                        return Err(Error::config(
                            format!("{path}.levels[{j}]"),
                            format!("price {} outside (0, 1]", lvl.price),
                        ));
                    }
                    if !(lvl.depth.is_finite() && lvl.depth > 0.0) {
                        return Err(Error::config(
                            format!("{path}.levels[{j}]"),
                            format!("depth {} must be positive", lvl.depth),
                        ));
                    }
                    if j > 0 && lvl.price >= levels[j - 1].price {
                        return Err(Error::config(
                            format!("{path}.levels[{j}]"),
                            "price levels must be strictly decreasing",
                        ));
                    }
                }
            }
            DemandFamily::PowerLinear { a, b } => {
                if !(a.is_finite() && *a >= 0.0) {
                    return Err(Error::config(path, format!("exponent a = {a} must be >= 0")));
                }
                let cap = m.powf(-a);
                if !(*b >= 0.0 && *b < cap) {
                    return Err(Error::config(
                        path,
                        format!("slope b = {b} must lie in [0, M^-a) = [0, {cap})"),
                    ));
                }
            }
            DemandFamily::PowerCompound { a, b } => {
                if !(a.is_finite() && b.is_finite()) {
                    return Err(Error::config(path, "parameters must be finite"));
                }
                if a * b < 0.0 {
                    return Err(Error::config(path, format!("need a·b >= 0, got a = {a}, b = {b}")));
                }
                // a > 0 with b = 1/M would put f(M) = 0.
                let ok = if *a > 0.0 { *b < 1.0 / m } else { *b <= 1.0 / m };
                if !ok {
                    return Err(Error::config(
                        path,
                        format!("slope b = {b} too large for M = {m} (f must stay positive)"),
                    ));
                }
            }
            DemandFamily::Exponential { b } => {
                if !(b.is_finite() && *b >= 0.0) {
                    return Err(Error::config(path, format!("decay b = {b} must be >= 0")));
                }
            }
        }
        Ok(Self {
            family,
            shares_outstanding,
        })
    }

    pub fn linear(b: f64, shares_outstanding: f64) -> Result<Self> {
        Self::new(DemandFamily::PowerLinear { a: 1.0, b }, shares_outstanding)
    }

    pub fn family(&self) -> &DemandFamily {
        &self.family
    }

    pub fn shares_outstanding(&self) -> f64 {
        self.shares_outstanding
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self.family, DemandFamily::LimitOrderBook { .. })
    }

    /// True when the price never moves (zero impact).
    pub fn is_constant(&self) -> bool {
        match &self.family {
            DemandFamily::LimitOrderBook { levels } => levels.len() == 1,
            DemandFamily::PowerLinear { b, .. } | DemandFamily::Exponential { b } => *b == 0.0,
            DemandFamily::PowerCompound { a, b } => *a == 0.0 || *b == 0.0,
        }
    }

    fn check_domain(&self, gamma: f64) -> Result<()> {
        if gamma >= 0.0 && gamma <= self.shares_outstanding {
            Ok(())
        } else {
            Err(Error::Domain {
                gamma,
                max: self.shares_outstanding,
            })
        }
    }

    /// Terminal mark-to-market price after `gamma` shares are sold.
    pub fn mtmp(&self, gamma: f64) -> Result<f64> {
        self.check_domain(gamma)?;
        Ok(self.mtmp_unchecked(gamma))
    }

    /// Volume weighted average price realised when selling `gamma` shares.
    pub fn vwap(&self, gamma: f64) -> Result<f64> {
        self.check_domain(gamma)?;
        Ok(self.vwap_unchecked(gamma))
    }

    pub fn mtmp_derivative(&self, gamma: f64) -> Result<f64> {
        self.check_domain(gamma)?;
        self.mtmp_derivative_unchecked(gamma)
    }

    pub fn vwap_derivative(&self, gamma: f64) -> Result<f64> {
        self.check_domain(gamma)?;
        self.vwap_derivative_unchecked(gamma)
    }

    pub(crate) fn mtmp_unchecked(&self, gamma: f64) -> f64 {
        if gamma == 0.0 {
            return 1.0;
        }
        match &self.family {
            DemandFamily::LimitOrderBook { levels } => {
                let mut cum = 0.0;
                for lvl in levels {
                    cum += lvl.depth;
                    if gamma < cum {
                        return lvl.price;
                    }
                }
                levels[levels.len() - 1].price
            }
            DemandFamily::PowerLinear { a, b } => {
                if *b == 0.0 {
                    1.0
                } else {
                    1.0 - b * gamma.powf(*a)
                }
            }
            DemandFamily::PowerCompound { a, b } => {
                if *a == 0.0 || *b == 0.0 {
                    1.0
                } else {
                    (1.0 - b * gamma).powf(*a)
                }
            }
            DemandFamily::Exponential { b } => (-b * gamma).exp(),
        }
    }

    pub(crate) fn vwap_unchecked(&self, gamma: f64) -> f64 {
        if gamma == 0.0 {
            return 1.0;
        }
        match &self.family {
            DemandFamily::LimitOrderBook { levels } => {
                let mut lo = 0.0;
                let mut proceeds = 0.0;
                let last = levels.len() - 1;
                for (j, lvl) in levels.iter().enumerate() {
                    let hi = if j == last { f64::INFINITY } else { lo + lvl.depth };
                    proceeds += lvl.price * (gamma.min(hi) - gamma.min(lo));
                    if gamma <= hi {
                        break;
                    }
                    lo = hi;
                }
                proceeds / gamma
            }
            DemandFamily::PowerLinear { a, b } => {
                if *b == 0.0 {
                    1.0
                } else {
                    1.0 - b * gamma.powf(*a) / (1.0 + a)
                }
            }
            DemandFamily::PowerCompound { a, b } => {
                if *a == 0.0 || *b == 0.0 {
                    return 1.0;
                }
                let x = b * gamma;
                if *a == -1.0 {
                    -(-x).ln_1p() / x
                } else {
                    -((1.0 + a) * (-x).ln_1p()).exp_m1() / ((1.0 + a) * x)
                }
            }
            DemandFamily::Exponential { b } => {
                if *b == 0.0 {
                    1.0
                } else {
                    let x = b * gamma;
                    -(-x).exp_m1() / x
                }
            }
        }
    }

    pub(crate) fn mtmp_derivative_unchecked(&self, gamma: f64) -> Result<f64> {
        Ok(match &self.family {
            DemandFamily::LimitOrderBook { .. } => {
                return Err(Error::NonDifferentiable(self.family.name()))
            }
            DemandFamily::PowerLinear { a, b } => {
                if *b == 0.0 || *a == 0.0 {
                    0.0
                } else if *a == 1.0 {
                    -b
                } else if gamma == 0.0 {
                    if *a < 1.0 {
                        f64::NEG_INFINITY
                    } else {
                        0.0
                    }
                } else {
                    -a * b * gamma.powf(a - 1.0)
                }
            }
            DemandFamily::PowerCompound { a, b } => {
                if *a == 0.0 || *b == 0.0 {
                    0.0
                } else {
                    -a * b * (1.0 - b * gamma).powf(a - 1.0)
                }
            }
            DemandFamily::Exponential { b } => -b * (-b * gamma).exp(),
        })
    }

    pub(crate) fn vwap_derivative_unchecked(&self, gamma: f64) -> Result<f64> {
        // d/dγ [γ f̄(γ)] = f(γ) gives f̄' = (f − f̄)/γ, with limit f'(0)/2.
        let (scale, taylor) = match &self.family {
            DemandFamily::LimitOrderBook { .. } => {
                return Err(Error::NonDifferentiable(self.family.name()))
            }
            DemandFamily::PowerLinear { a, b } => {
                return Ok(if *b == 0.0 || *a == 0.0 {
                    0.0
                } else if *a == 1.0 {
                    -0.5 * b
                } else if gamma == 0.0 {
                    if *a < 1.0 {
                        f64::NEG_INFINITY
                    } else {
                        0.0
                    }
                } else {
                    -a * b * gamma.powf(a - 1.0) / (1.0 + a)
                });
            }
            DemandFamily::PowerCompound { a, b } => {
                if *a == 0.0 || *b == 0.0 {
                    return Ok(0.0);
                }
                let (a, b) = (*a, *b);
                (
                    b,
                    [
                        -a * b,
                        a * (a - 1.0) * b * b,
                        -a * (a - 1.0) * (a - 2.0) * b * b * b,
                    ],
                )
            }
            DemandFamily::Exponential { b } => {
                if *b == 0.0 {
                    return Ok(0.0);
                }
                let b = *b;
                (b, [-b, b * b, -b * b * b])
            }
        };
        if (scale * gamma).abs() < SERIES_CUTOFF {
            let [d1, d2, d3] = taylor;
            Ok(d1 / 2.0 + d2 * gamma / 3.0 + d3 * gamma * gamma / 8.0)
        } else {
            Ok((self.mtmp_unchecked(gamma) - self.vwap_unchecked(gamma)) / gamma)
        }
    }

    /// Minimum over a uniform grid on `[0, M]` of
    /// `g'(γ) = αθ f(γ) + (1 − αθ) f'(γ) (M − γ)`, the slope of the per-asset
    /// term in the uniqueness criterion. A positive minimum certifies the
    /// criterion for this asset.
    pub fn uniqueness_margin(
        &self,
        alpha: f64,
        theta_min: f64,
        grid_points: usize,
    ) -> Result<UniquenessMargin> {
        let at = alpha * theta_min;
        if !(at < 1.0) {
            return Err(Error::config(
                "regulation.alpha",
                format!("need alpha_k * theta_min < 1 for every asset, got {at}"),
            ));
        }
        if !self.is_differentiable() {
            return Err(Error::NonDifferentiable(self.family.name()));
        }
        let n = grid_points.max(2);
        let m = self.shares_outstanding;
        let mut best = UniquenessMargin {
            min: f64::INFINITY,
            argmin: 0.0,
        };
        for j in 0..n {
            let g = if j == n - 1 { m } else { m * j as f64 / (n - 1) as f64 };
            let fp = self.mtmp_derivative_unchecked(g)?;
            // (M − γ) f'(γ) at γ = M is 0 even when f' is unbounded.
            let impact = if g == m { 0.0 } else { fp * (m - g) };
            let v = at * self.mtmp_unchecked(g) + (1.0 - at) * impact;
            if v < best.min || v.is_nan() {
                best = UniquenessMargin { min: v, argmin: g };
            }
        }
        Ok(best)
    }

    /// Open interval of risk weights for which the separable uniqueness
    /// criterion holds: `(1/θ)·(−M f'(0) / (1 − M f'(0)), 1)`.
    pub fn risk_weight_interval(&self, theta_min: f64) -> RiskWeightInterval {
        let upper = 1.0 / theta_min;
        if self.is_constant() {
            return RiskWeightInterval::Open { lower: 0.0, upper };
        }
        match &self.family {
            DemandFamily::LimitOrderBook { .. } => return RiskWeightInterval::NotApplicable,
            DemandFamily::PowerLinear { a, .. } => {
                if *a < 1.0 {
                    return RiskWeightInterval::Empty;
                }
                if *a > 1.0 {
                    // (M − γ) f'/f is not nondecreasing; only the margin check applies.
                    return RiskWeightInterval::NotApplicable;
                }
            }
            _ => {}
        }
        let slope = match self.mtmp_derivative_unchecked(0.0) {
            Ok(s) => s,
            Err(_) => return RiskWeightInterval::NotApplicable,
        };
        let depth = -self.shares_outstanding * slope;
        RiskWeightInterval::Open {
            lower: upper * depth / (1.0 + depth),
            upper,
        }
    }
}

/// The ordered collection of marketable assets.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    assets: Vec<InverseDemand>,
}

impl Market {
    pub fn new(assets: Vec<InverseDemand>) -> Result<Self> {
        if assets.is_empty() {
            return Err(Error::config("assets", "market needs at least one asset"));
        }
        Ok(Self { assets })
    }

    pub fn assets(&self) -> &[InverseDemand] {
        &self.assets
    }

    pub fn asset(&self, k: usize) -> &InverseDemand {
        &self.assets[k]
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn shares_outstanding(&self) -> Vec<f64> {
        self.assets.iter().map(|a| a.shares_outstanding).collect()
    }

    pub fn is_differentiable(&self) -> bool {
        self.assets.iter().all(InverseDemand::is_differentiable)
    }

    /// `(F(Γ*), F̄(Γ*))` with `Γ*` clamped into `[0, M]`.
    pub fn prices_at(&self, sold: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.assets
            .iter()
            .zip(sold)
            .map(|(a, &g)| {
                let g = g.clamp(0.0, a.shares_outstanding);
                (a.mtmp_unchecked(g), a.vwap_unchecked(g))
            })
            .unzip()
    }

    /// Lowest attainable prices `(F(M), F̄(M))`.
    pub fn floor_prices(&self) -> (Vec<f64>, Vec<f64>) {
        self.prices_at(&self.shares_outstanding())
    }

    /// `(F'(Γ*), F̄'(Γ*))`.
    pub fn slopes_at(&self, sold: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut d = Vec::with_capacity(self.len());
        let mut dbar = Vec::with_capacity(self.len());
        for (a, &g) in self.assets.iter().zip(sold) {
            let g = g.clamp(0.0, a.shares_outstanding);
            d.push(a.mtmp_derivative_unchecked(g)?);
            dbar.push(a.vwap_derivative_unchecked(g)?);
        }
        Ok((d, dbar))
    }
}
