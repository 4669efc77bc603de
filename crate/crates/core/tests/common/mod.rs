#![allow(dead_code)]

use firesale_core::clearing::{certify_uniqueness, picard_clear, ClearingResult, Uniqueness};
use firesale_core::liquidation::boundary_banks;
use firesale_core::{
    Bank, BankingSystem, DemandFamily, InverseDemand, LiquidationStrategy, Market, Regulation,
    SolverOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A differentiable inverse demand with shares outstanding `m`, chosen so
/// that the separable uniqueness margin is positive at `alpha * theta`.
fn smooth_asset(r: &mut ChaCha8Rng, m: f64, alpha_theta: f64) -> InverseDemand {
    // Final price impact fraction kept comfortably inside the margin.
    let depth = r.gen_range(0.2..0.9) * alpha_theta / (1.0 + alpha_theta);
    let family = match r.gen_range(0..3) {
        0 => DemandFamily::PowerLinear { a: 1.0, b: depth / m },
        1 => DemandFamily::Exponential { b: -(1.0 - depth).ln() / m },
        _ => DemandFamily::PowerCompound {
            a: 1.0,
            b: depth / m,
        },
    };
    InverseDemand::new(family, m).unwrap()
}

/// Random system with `n ≤ 6` banks and `m ≤ 4` assets whose every asset
/// passes the separable uniqueness check.
pub fn random_system(r: &mut ChaCha8Rng) -> BankingSystem {
    loop {
        let n = r.gen_range(1..=6);
        let m = r.gen_range(1..=4);
        let theta = r.gen_range(0.05..0.3);
        let alpha: Vec<f64> = (0..m).map(|_| r.gen_range(0.2..0.9) / theta).collect();
        let holdings: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| r.gen_range(0.1..2.0)).collect())
            .collect();
        let mut shares = vec![0.0; m];
        for s in &holdings {
            for (t, v) in shares.iter_mut().zip(s) {
                *t += v;
            }
        }
        let assets: Vec<InverseDemand> = (0..m)
            .map(|k| {
                let mk = shares[k] * r.gen_range(1.0..2.0);
                smooth_asset(r, mk, alpha[k] * theta)
            })
            .collect();
        let banks = holdings
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let liquid = r.gen_range(0.0..0.5);
                let nonmarketable = r.gen_range(0.0..3.0);
                let alpha_l = r.gen_range(0.2..1.0);
                let rwa: f64 = s.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>() + alpha_l * nonmarketable;
                let capital = theta * rwa * r.gen_range(0.3..1.3);
                let total = liquid + nonmarketable + s.iter().sum::<f64>();
                Bank {
                    name: format!("b{i}"),
                    liquid,
                    nonmarketable,
                    holdings: s,
                    liabilities: (total - capital).max(0.0),
                    alpha_nonmarketable: alpha_l,
                }
            })
            .collect();
        let Ok(market) = Market::new(assets) else { continue };
        let Ok(reg) = Regulation::new(theta, alpha) else { continue };
        let Ok(sys) = BankingSystem::new(banks, market, reg) else { continue };
        if certify_uniqueness(&sys, &LiquidationStrategy::Proportional).certificate
            == Uniqueness::CertifiedUnique
        {
            return sys;
        }
    }
}

/// A certified system cleared under proportional liquidation with every
/// asset actively sold and no bank on a class boundary, so that clearing
/// prices are differentiable in every parameter.
pub fn differentiable_instance(r: &mut ChaCha8Rng) -> (BankingSystem, ClearingResult) {
    let strategy = LiquidationStrategy::Proportional;
    loop {
        let sys = random_system(r);
        let Ok(c) = picard_clear(&sys, &strategy, &SolverOptions::default()) else { continue };
        if c.sold().iter().all(|&g| g > 1e-6) && boundary_banks(&sys, &c.prices).is_empty() {
            return (sys, c);
        }
    }
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    if diff <= 1e-9 {
        return 0.0;
    }
    let scale = a.iter().chain(b).map(|v| v.abs()).fold(0.0, f64::max);
    diff / scale
}
