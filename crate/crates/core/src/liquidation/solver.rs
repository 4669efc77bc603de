//! Projected gradient ascent over `{0 ≤ x ≤ u, nᵀx ≥ c}`.

use super::utility::InnerOptions;

const ARMIJO: f64 = 1e-4;

/// Euclidean projection of `y` onto the box `[0, upper]` intersected with
/// the half-space `{x : normalᵀx ≥ level}`.
///
/// The projection is `clip(y + μ·normal)` for the smallest `μ ≥ 0` meeting
/// the half-space. `μ ↦ normalᵀ clip(y + μ·normal)` is piecewise linear and
/// nondecreasing, so walking its sorted breakpoints gives `μ` exactly. If
/// the half-space misses the box the point of the box maximising
/// `normalᵀx` is returned.
pub(crate) fn project(y: &[f64], upper: &[f64], normal: &[f64], level: f64) -> Vec<f64> {
    let clip = |mu: f64| -> Vec<f64> {
        y.iter()
            .zip(upper)
            .zip(normal)
            .map(|((&yk, &uk), &nk)| (yk + mu * nk).clamp(0.0, uk))
            .collect()
    };
    let dot = |x: &[f64]| -> f64 { x.iter().zip(normal).map(|(a, b)| a * b).sum() };

    let base = clip(0.0);
    let mut prev_val = dot(&base);
    if prev_val >= level {
        return base;
    }
    let mut breaks: Vec<f64> = Vec::with_capacity(2 * y.len());
    for ((&yk, &uk), &nk) in y.iter().zip(upper).zip(normal) {
        if nk != 0.0 {
            for mu in [-yk / nk, (uk - yk) / nk] {
                if mu > 0.0 && mu.is_finite() {
                    breaks.push(mu);
                }
            }
        }
    }
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    let mut prev_mu = 0.0;
    for &mu in &breaks {
        let val = dot(&clip(mu));
        if val >= level {
            let mu_star = if val > prev_val {
                prev_mu + (level - prev_val) * (mu - prev_mu) / (val - prev_val)
            } else {
                mu
            };
            let mut x = clip(mu_star);
            // The interpolation is exact up to rounding; nudge onto the
            // feasible side if rounding left it short.
            let gap = level - dot(&x);
            if gap > 0.0 {
                let norm2: f64 = x
                    .iter()
                    .zip(upper)
                    .zip(normal)
                    .filter(|((&xk, &uk), _)| xk > 0.0 && xk < uk)
                    .map(|(_, &nk)| nk * nk)
                    .sum();
                if norm2 > 0.0 {
                    for ((xk, &uk), &nk) in x.iter_mut().zip(upper).zip(normal) {
                        if *xk > 0.0 && *xk < uk {
                            *xk = (*xk + gap * nk / norm2).clamp(0.0, uk);
                        }
                    }
                }
            }
            return x;
        }
        prev_mu = mu;
        prev_val = val;
    }
    clip(breaks.last().copied().unwrap_or(0.0))
}

#[derive(Debug, Clone)]
pub(crate) struct Ascent {
    pub point: Vec<f64>,
    pub iterations: usize,
    pub last_step: f64,
    pub converged: bool,
}

/// Maximise a concave `value` over the box ∩ half-space by projected
/// gradient ascent with Armijo backtracking along the projection arc.
pub(crate) fn projected_ascent(
    value: &dyn Fn(&[f64]) -> f64,
    gradient: &dyn Fn(&[f64], &mut [f64]),
    start: &[f64],
    upper: &[f64],
    normal: &[f64],
    level: f64,
    opts: &InnerOptions,
) -> Ascent {
    let m = start.len();
    let mut x = project(start, upper, normal, level);
    let mut fx = value(&x);
    let mut g = vec![0.0; m];
    let mut eta = 1.0;
    let mut step = f64::INFINITY;
    for it in 0..opts.max_iter {
        gradient(&x, &mut g);
        let mut y;
        let mut fy;
        loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + eta * b).collect();
            y = project(&trial, upper, normal, level);
            fy = value(&y);
            let gain: f64 = g.iter().zip(y.iter().zip(&x)).map(|(gk, (yk, xk))| gk * (yk - xk)).sum();
            if fy >= fx + ARMIJO * gain || eta < 1e-14 {
                break;
            }
            eta *= 0.5;
        }
        step = y.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        x = y;
        fx = fy;
        if step < opts.tol {
            return Ascent {
                point: x,
                iterations: it + 1,
                last_step: step,
                converged: true,
            };
        }
        eta = (eta * 2.0).min(1e6);
    }
    Ascent {
        point: x,
        iterations: opts.max_iter,
        last_step: step,
        converged: false,
    }
}
