mod common;

use common::{random_system, rng};
use firesale_core::calibration::min_norm_portfolio;
use firesale_core::clearing::picard_clear;
use firesale_core::liquidation::liquidate;
use firesale_core::scenario::{ScenarioConfig, DIVERSIFICATION};
use firesale_core::sweep::{sweep, SweepParam, SweepSpec};
use firesale_core::{
    BookLevel, DemandFamily, InverseDemand, LiquidationStrategy, PricePair, SolverOptions,
    StrategyChoice,
};
use proptest::prelude::*;
use rand::Rng;

fn family() -> impl Strategy<Value = (DemandFamily, f64)> {
    let m = 0.5f64..5.0;
    prop_oneof![
        (m.clone(), 0.1f64..3.0, 0.0f64..1.0)
            .prop_map(|(m, a, u)| (DemandFamily::PowerLinear { a, b: u / m.powf(a) }, m)),
        (m.clone(), 0.1f64..3.0, 0.0f64..0.999)
            .prop_map(|(m, a, u)| (DemandFamily::PowerCompound { a, b: u / m }, m)),
        (m.clone(), 0.0f64..3.0).prop_map(|(m, b)| (DemandFamily::Exponential { b }, m)),
        (m, prop::collection::vec((0.3f64..0.95, 0.1f64..1.0), 1..5)).prop_map(|(m, raw)| {
            let mut price = 1.0;
            let count = raw.len() as f64;
            let levels = raw
                .iter()
                .enumerate()
                .map(|(i, &(step, d))| {
                    if i > 0 {
                        price *= step;
                    }
                    BookLevel { price, depth: d * m / count }
                })
                .collect();
            (DemandFamily::LimitOrderBook { levels }, m)
        }),
    ]
}

/// All nonnegative least-norm solutions of `Σs = v`, `αᵀs = r` over every
/// support, by brute force.
fn brute_force_min_norm(v: f64, r: f64, alpha: &[f64]) -> Option<f64> {
    let m = alpha.len();
    let mut best: Option<f64> = None;
    for mask in 1u32..(1 << m) {
        let idx: Vec<usize> = (0..m).filter(|&k| mask & (1 << k) != 0).collect();
        let k = idx.len() as f64;
        let sa: f64 = idx.iter().map(|&i| alpha[i]).sum();
        let saa: f64 = idx.iter().map(|&i| alpha[i] * alpha[i]).sum();
        let det = k * saa - sa * sa;
        let s: Vec<f64> = if det.abs() < 1e-12 {
            if (sa / k * v - r).abs() > 1e-9 {
                continue;
            }
            vec![v / k; idx.len()]
        } else {
            let l = (saa * v - sa * r) / det;
            let mu = (k * r - sa * v) / det;
            idx.iter().map(|&i| l + mu * alpha[i]).collect()
        };
        if s.iter().any(|&x| x < -1e-12) {
            continue;
        }
        let norm = s.iter().map(|x| x * x).sum::<f64>();
        best = Some(best.map_or(norm, |b: f64| b.min(norm)));
    }
    best
}

proptest! {
    #[test]
    fn vwap_lies_between_mtmp_and_one((fam, m) in family(), u in 0.0f64..=1.0, w in 0.0f64..=1.0) {
        let d = InverseDemand::new(fam, m).unwrap();
        let (g1, g2) = (u.min(w) * m, u.max(w) * m);
        let (f1, f2) = (d.mtmp(g1).unwrap(), d.mtmp(g2).unwrap());
        let (v1, v2) = (d.vwap(g1).unwrap(), d.vwap(g2).unwrap());
        prop_assert!(f1 <= v1 + 1e-12 && v1 <= 1.0 + 1e-12);
        prop_assert!(f2 <= f1 + 1e-12);
        prop_assert!(v2 <= v1 + 1e-12);
        prop_assert!(f2 > 0.0);
    }

    #[test]
    fn min_norm_portfolio_matches_brute_force(
        alpha in prop::collection::vec(0.0f64..2.0, 1..=4),
        v in 0.1f64..100.0,
        t in 0.0f64..=1.0,
    ) {
        let lo = alpha.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = alpha.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let r = v * (lo + t * (hi - lo));
        let s = min_norm_portfolio(v, r, &alpha).unwrap();
        prop_assert!(s.iter().all(|&x| x >= 0.0));
        let scale = v.max(r).max(1.0);
        prop_assert!((s.iter().sum::<f64>() - v).abs() < 1e-9 * scale);
        prop_assert!((s.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>() - r).abs() < 1e-9 * scale);
        let norm: f64 = s.iter().map(|x| x * x).sum();
        let oracle = brute_force_min_norm(v, r, &alpha).unwrap();
        prop_assert!(norm <= oracle * (1.0 + 1e-9) + 1e-12, "norm {} vs {}", norm, oracle);
    }

    #[test]
    fn liquidations_stay_within_holdings(seed in any::<u64>()) {
        let mut r = rng(seed);
        let sys = random_system(&mut r);
        let (lo, lo_bar) = sys.market.floor_prices();
        let q: Vec<f64> = lo.iter().map(|&l| r.gen_range(l..=1.0)).collect();
        let q_bar: Vec<f64> = q.iter().zip(&lo_bar).map(|(&a, &b)| r.gen_range(a.max(b)..=1.0)).collect();
        let g = liquidate(&LiquidationStrategy::Proportional, &sys, &PricePair::new(q, q_bar)).unwrap();
        for (i, b) in sys.banks.iter().enumerate() {
            for (x, s) in g.row(i).iter().zip(&b.holdings) {
                prop_assert!(*x >= 0.0 && *x <= *s);
            }
        }
    }

    #[test]
    fn clearing_is_deterministic(seed in any::<u64>()) {
        let sys = random_system(&mut rng(seed));
        let s = LiquidationStrategy::Proportional;
        let a = picard_clear(&sys, &s, &SolverOptions::default()).unwrap();
        let b = picard_clear(&sys, &s, &SolverOptions::default()).unwrap();
        prop_assert_eq!(&a.prices, &b.prices);
        prop_assert!(a.prices.in_lattice(&sys.market, 0.0));
    }
}

#[test]
fn sweep_rows_follow_the_grid() {
    let cfg = ScenarioConfig::parse(DIVERSIFICATION).unwrap();
    let base = cfg.system().unwrap();
    let spec = SweepSpec::linspace(SweepParam::Lambda, 0.0, 1.0, 0.05).unwrap();
    let rows = sweep(&base, StrategyChoice::Proportional, &cfg.solver_options(), &spec);
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    assert_eq!(values, spec.grid);
    let again = sweep(&base, StrategyChoice::Proportional, &cfg.solver_options(), &spec);
    for (a, b) in rows.iter().zip(&again) {
        assert_eq!(a.outcome.as_ref().unwrap().q, b.outcome.as_ref().unwrap().q);
    }
}

#[test]
fn sweep_spec_rejects_unordered_grids() {
    assert!(SweepSpec::new(SweepParam::Shock, vec![]).is_err());
    assert!(SweepSpec::new(SweepParam::Shock, vec![0.1, 0.1]).is_err());
    assert!(SweepSpec::new(SweepParam::Shock, vec![0.2, 0.1]).is_err());
}
