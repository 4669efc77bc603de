use std::fmt;
use std::sync::Arc;

use crate::market::Market;

/// A concave objective a bank maximises when choosing what to sell.
///
/// `own` is the bank's own liquidation vector and `others` the aggregate
/// liquidations of every other bank. Implementations must be concave in
/// `own`; strict concavity is needed for the best response to be unique.
pub trait Utility: Send + Sync {
    fn name(&self) -> &str;

    fn value(&self, market: &Market, own: &[f64], others: &[f64]) -> f64;

    /// Gradient with respect to `own`, written into `out`.
    fn gradient(&self, market: &Market, own: &[f64], others: &[f64], out: &mut [f64]);
}

/// Negative realised loss against par: `u(γ) = −γᵀ(1 − F̄(γ + γ₋))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RealizedLoss;

impl Utility for RealizedLoss {
    fn name(&self) -> &str {
        "realized-loss"
    }

    fn value(&self, market: &Market, own: &[f64], others: &[f64]) -> f64 {
        market
            .assets()
            .iter()
            .zip(own.iter().zip(others))
            .map(|(a, (&g, &o))| {
                let total = (g + o).clamp(0.0, a.shares_outstanding());
                -g * (1.0 - a.vwap_unchecked(total))
            })
            .sum()
    }

    fn gradient(&self, market: &Market, own: &[f64], others: &[f64], out: &mut [f64]) {
        for (k, a) in market.assets().iter().enumerate() {
            let total = (own[k] + others[k]).clamp(0.0, a.shares_outstanding());
            // Non-differentiable books are rejected before a utility is used.
            let slope = a.vwap_derivative_unchecked(total).unwrap_or(0.0);
            out[k] = -(1.0 - a.vwap_unchecked(total)) + own[k] * slope;
        }
    }
}

/// Inner solver settings shared by the utility-based strategies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOptions {
    /// Stop once the projected step is shorter than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Best-response rounds allowed for equilibrium strategies.
    pub max_rounds: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            max_rounds: 2_000,
        }
    }
}

/// A utility together with the solver settings used to optimise it.
#[derive(Clone)]
pub struct UtilitySpec {
    pub utility: Arc<dyn Utility>,
    pub options: InnerOptions,
}

impl UtilitySpec {
    pub fn new(utility: Arc<dyn Utility>) -> Self {
        Self {
            utility,
            options: InnerOptions::default(),
        }
    }

    pub fn realized_loss() -> Self {
        Self::new(Arc::new(RealizedLoss))
    }
}

impl Default for UtilitySpec {
    fn default() -> Self {
        Self::realized_loss()
    }
}

impl fmt::Debug for UtilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UtilitySpec")
            .field("utility", &self.utility.name())
            .field("options", &self.options)
            .finish()
    }
}
