//! Building banking systems from aggregate balance-sheet data.
//!
//! Record files are whitespace-separated columns, one bank per line, with
//! `#` starting a comment:
//!
//! ```text
//! name capital liquid marketable nonmarketable marketable_rwa nonmarketable_rwa
//! ```
//!
//! Risk-weight files hold one marketable-asset risk-weight per line.

use rayon::prelude::*;

use crate::banking::{Bank, BankingSystem, Regulation};
use crate::error::{Error, Result};
use crate::market::{InverseDemand, Market};

/// Bundled six-bank balance sheets (billions of dollars).
pub const CCAR_RECORDS: &str = include_str!("../data/ccar_table1.txt");
/// Bundled risk-weights for the sixteen marketable assets.
pub const CCAR_RISK_WEIGHTS: &str = include_str!("../data/ccar_table2.txt");
/// Capital threshold used with the bundled data.
pub const CCAR_THETA: f64 = 0.08;

const FEASIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateBankRecord {
    pub name: String,
    pub capital: f64,
    pub liquid: f64,
    pub marketable: f64,
    pub nonmarketable: f64,
    pub marketable_rwa: f64,
    pub nonmarketable_rwa: f64,
}

impl AggregateBankRecord {
    pub fn total_assets(&self) -> f64 {
        self.liquid + self.marketable + self.nonmarketable
    }

    pub fn liabilities(&self) -> f64 {
        self.total_assets() - self.capital
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("capital", self.capital),
            ("liquid", self.liquid),
            ("marketable", self.marketable),
            ("nonmarketable", self.nonmarketable),
            ("marketable_rwa", self.marketable_rwa),
            ("nonmarketable_rwa", self.nonmarketable_rwa),
        ];
        for (field, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Calibration {
                    context: format!("{}.{field}", self.name),
                    reason: format!("must be finite and nonnegative, got {v}"),
                });
            }
        }
        if self.liabilities() < 0.0 {
            return Err(Error::Calibration {
                context: self.name.clone(),
                reason: "capital exceeds total assets".into(),
            });
        }
        Ok(())
    }
}

/// Stress applied to a calibrated system.
#[derive(Debug, Clone, PartialEq)]
pub struct Shock {
    /// Multiplier on every bank's non-marketable assets.
    pub nonmarketable_factor: f64,
    /// Per-bank multipliers replacing the common factor.
    pub per_bank: Vec<(String, f64)>,
    /// Risk-weights replaced after calibration, as `(asset, alpha)`.
    pub alpha_overrides: Vec<(usize, f64)>,
}

impl Default for Shock {
    fn default() -> Self {
        Self::none()
    }
}

impl Shock {
    pub fn none() -> Self {
        Self {
            nonmarketable_factor: 1.0,
            per_bank: Vec::new(),
            alpha_overrides: Vec::new(),
        }
    }

    /// Lose `fraction` of non-marketable assets at every bank.
    pub fn loss(fraction: f64) -> Result<Self> {
        let s = Self {
            nonmarketable_factor: 1.0 - fraction,
            ..Self::none()
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |ctx: String, v: f64| Error::Calibration {
            context: ctx,
            reason: format!("shock factor must lie in [0, 1], got {v}"),
        };
        if !(0.0..=1.0).contains(&self.nonmarketable_factor) {
            return Err(bad("shock".into(), self.nonmarketable_factor));
        }
        for (name, f) in &self.per_bank {
            if !(0.0..=1.0).contains(f) {
                return Err(bad(format!("shock.{name}"), *f));
            }
        }
        Ok(())
    }

    fn factor_for(&self, name: &str) -> f64 {
        self.per_bank
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, f)| f)
            .unwrap_or(self.nonmarketable_factor)
    }
}

/// Minimum-norm split of a marketable book of value `total_value` and
/// risk-weighted value `total_rwa` across assets with risk-weights `alpha`.
///
/// At the optimum `s_k = max(0, λ + μα_k)`, so the support is a set of
/// assets lying on one side of a threshold in `α`. Every such prefix or
/// suffix of the sorted weights is solved in closed form and the feasible
/// candidate of least norm is returned.
pub fn min_norm_portfolio(total_value: f64, total_rwa: f64, alpha: &[f64]) -> Result<Vec<f64>> {
    let err = |reason: String| Error::Calibration {
        context: "min_norm_portfolio".into(),
        reason,
    };
    if alpha.is_empty() {
        return Err(err("no assets".into()));
    }
    if !(total_value >= 0.0 && total_rwa >= 0.0) {
        return Err(err(format!(
            "value {total_value} and risk-weighted value {total_rwa} must be nonnegative"
        )));
    }
    let m = alpha.len();
    if total_value == 0.0 {
        if total_rwa == 0.0 {
            return Ok(vec![0.0; m]);
        }
        return Err(err("positive risk-weighted value on an empty book".into()));
    }
    let lo = alpha.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = alpha.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ratio = total_rwa / total_value;
    let slack = FEASIBILITY_TOL * hi.abs().max(1.0);
    if ratio < lo - slack || ratio > hi + slack {
        return Err(err(format!(
            "average risk-weight {ratio} lies outside [{lo}, {hi}]"
        )));
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| alpha[a].total_cmp(&alpha[b]));
    // Cut points that never split a group of tied weights.
    let mut cuts = vec![0];
    for p in 1..m {
        if alpha[order[p]] != alpha[order[p - 1]] {
            cuts.push(p);
        }
    }
    cuts.push(m);

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |support: &[usize]| {
        if let Some(s) = solve_on_support(total_value, total_rwa, alpha, support) {
            let norm: f64 = s.iter().map(|v| v * v).sum();
            if best.as_ref().map_or(true, |(b, _)| norm < *b) {
                best = Some((norm, s));
            }
        }
    };
    for &c in &cuts[1..] {
        consider(&order[..c]);
    }
    for &c in &cuts[..cuts.len() - 1] {
        consider(&order[c..]);
    }
    best.map(|(_, s)| s)
        .ok_or_else(|| err("no feasible support found".into()))
}

fn solve_on_support(v: f64, r: f64, alpha: &[f64], support: &[usize]) -> Option<Vec<f64>> {
    let k = support.len() as f64;
    let sa: f64 = support.iter().map(|&i| alpha[i]).sum();
    let saa: f64 = support.iter().map(|&i| alpha[i] * alpha[i]).sum();
    let det = k * saa - sa * sa;
    let scale = v.abs().max(r.abs()).max(1.0);
    let mut s = vec![0.0; alpha.len()];
    if det.abs() <= 1e-14 * (k * saa).max(1.0) {
        // All weights on the support coincide: only the equal split fits.
        let a = sa / k;
        if (a * v - r).abs() > FEASIBILITY_TOL * scale {
            return None;
        }
        for &i in support {
            s[i] = v / k;
        }
        return Some(s);
    }
    let lambda = (saa * v - sa * r) / det;
    let mu = (k * r - sa * v) / det;
    for &i in support {
        let x = lambda + mu * alpha[i];
        if x < -1e-12 * scale {
            return None;
        }
        s[i] = x.max(0.0);
    }
    Some(s)
}

pub fn nonmarketable_risk_weight(rwa: f64, ell: f64) -> Result<f64> {
    if ell > 0.0 {
        Ok(rwa / ell)
    } else if rwa == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::Calibration {
            context: "nonmarketable_risk_weight".into(),
            reason: format!("risk-weighted value {rwa} on zero non-marketable assets"),
        })
    }
}

/// Linear price-impact slope `4αθ / (5(1 − αθ)M)`.
pub fn liquidity_param(alpha: f64, theta: f64, shares: f64) -> Result<f64> {
    let err = |reason: String| Error::Calibration {
        context: "liquidity_param".into(),
        reason,
    };
    if alpha * theta >= 1.0 {
        return Err(err(format!("alpha * theta = {} must be below 1", alpha * theta)));
    }
    if !(shares > 0.0) {
        return Err(err(format!("shares outstanding must be positive, got {shares}")));
    }
    Ok(4.0 * alpha * theta / (5.0 * (1.0 - alpha * theta) * shares))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

pub fn parse_records(text: &str) -> Result<Vec<AggregateBankRecord>> {
    let mut out = Vec::new();
    for (line, l) in data_lines(text) {
        let cols: Vec<&str> = l.split_whitespace().collect();
        if cols.len() != 7 {
            return Err(Error::config(
                format!("line {line}"),
                format!("expected 7 columns, found {}", cols.len()),
            ));
        }
        let mut nums = [0.0; 6];
        for (slot, c) in nums.iter_mut().zip(&cols[1..]) {
            *slot = c
                .parse()
                .map_err(|_| Error::config(format!("line {line}"), format!("bad number `{c}`")))?;
        }
        let rec = AggregateBankRecord {
            name: cols[0].to_string(),
            capital: nums[0],
            liquid: nums[1],
            marketable: nums[2],
            nonmarketable: nums[3],
            marketable_rwa: nums[4],
            nonmarketable_rwa: nums[5],
        };
        rec.validate()?;
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::config("records", "no bank rows"));
    }
    Ok(out)
}

pub fn parse_risk_weights(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (line, l) in data_lines(text) {
        for tok in l.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::config(format!("line {line}"), format!("bad number `{tok}`")))?;
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(Error::config("risk_weights", "no values"));
    }
    Ok(out)
}

/// Calibrate a system with linear inverse demand from aggregate records.
///
/// Each asset's shares outstanding are taken to be the banks' combined
/// holdings. The shock is applied after calibration.
pub fn build_ccar_system(
    records: &[AggregateBankRecord],
    alpha: &[f64],
    theta: f64,
    shock: &Shock,
) -> Result<BankingSystem> {
    shock.validate()?;
    let calibrated: Vec<(Vec<f64>, f64)> = records
        .par_iter()
        .map(|r| {
            r.validate()?;
            let with_ctx = |e: Error| match e {
                Error::Calibration { context, reason } => Error::Calibration {
                    context: format!("{}: {context}", r.name),
                    reason,
                },
                other => other,
            };
            let s = min_norm_portfolio(r.marketable, r.marketable_rwa, alpha).map_err(with_ctx)?;
            let a = nonmarketable_risk_weight(r.nonmarketable_rwa, r.nonmarketable).map_err(with_ctx)?;
            Ok((s, a))
        })
        .collect::<Result<_>>()?;

    let m = alpha.len();
    let mut shares = vec![0.0; m];
    for (s, _) in &calibrated {
        for (t, v) in shares.iter_mut().zip(s) {
            *t += v;
        }
    }
    let assets = shares
        .iter()
        .zip(alpha)
        .enumerate()
        .map(|(k, (&mk, &ak))| {
            let b = liquidity_param(ak, theta, mk).map_err(|e| match e {
                Error::Calibration { reason, .. } => Error::Calibration {
                    context: format!("asset {k}"),
                    reason,
                },
                other => other,
            })?;
            InverseDemand::linear(b, mk)
        })
        .collect::<Result<Vec<_>>>()?;

    let banks = records
        .iter()
        .zip(calibrated)
        .map(|(r, (s, a))| Bank {
            name: r.name.clone(),
            liquid: r.liquid,
            nonmarketable: r.nonmarketable * shock.factor_for(&r.name),
            holdings: s,
            liabilities: r.liabilities(),
            alpha_nonmarketable: a,
        })
        .collect();

    let mut weights = alpha.to_vec();
    for &(k, a) in &shock.alpha_overrides {
        if k >= m {
            return Err(Error::Calibration {
                context: "shock".into(),
                reason: format!("risk-weight override for asset {k} out of range"),
            });
        }
        weights[k] = a;
    }
    BankingSystem::new(banks, Market::new(assets)?, Regulation::new(theta, weights)?)
}

/// The bundled six-bank system under a loss of `shock` (a fraction) of
/// non-marketable assets.
pub fn ccar_system(shock: f64) -> Result<BankingSystem> {
    build_ccar_system(
        &parse_records(CCAR_RECORDS)?,
        &parse_risk_weights(CCAR_RISK_WEIGHTS)?,
        CCAR_THETA,
        &Shock::loss(shock)?,
    )
}
