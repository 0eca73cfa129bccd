use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exceedance::ExceedanceSet;
use crate::error::{invalid, Error, Result};
use crate::gpd::{XI_MIN_FIT, XI_ZERO};
use crate::optim::golden_section;
use crate::riskfunc::RiskFunctional;
use crate::stats::quantile_sorted;

const XI_GRID_LO: f64 = -0.9;
const XI_GRID_HI: f64 = 1.5;
const XI_GRID_STEP: f64 = 0.05;
const SIGMA_GRID: usize = 48;
const SIGMA_SPAN: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarginOptions {
    /// Weight each contribution by the inverse number of exceedances at the
    /// same site within the same cluster.
    pub storm_weights: bool,
    /// Sites with fewer excesses than this are flagged and excluded.
    pub min_excesses: usize,
}

impl Default for MarginOptions {
    fn default() -> Self {
        Self {
            storm_weights: false,
            min_excesses: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedSite {
    pub site: usize,
    pub reason: String,
}

/// Fitted marginal model `a`, `b`, `xi` with the decomposition
/// `a = A a'`, `b = B + A b'`, where `a' = r(a)` and `b' = r(b) = u_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    pub xi: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub a_prime: f64,
    pub b_prime: f64,
    pub u_n: f64,
    /// Quantile level of the exceedance values used for `b`.
    pub q_prime: f64,
    /// Uniform downward shift applied after `q' = 0` when even the per-site
    /// minima have `r(b) > u_n`; zero otherwise.
    pub shift: f64,
    pub scale_std: Vec<f64>,
    pub location_std: Vec<f64>,
    pub n_excesses: Vec<usize>,
    pub flagged: Vec<FlaggedSite>,
    pub log_likelihood: f64,
    /// From the curvature of the profile log-likelihood in `xi`.
    pub se_xi: Option<f64>,
}

impl MarginalModel {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Assemble from given parameters, filling in the decomposition.
    pub fn from_parts(xi: f64, a: Vec<f64>, b: Vec<f64>, r: &RiskFunctional) -> Result<Self> {
        if a.len() != b.len() {
            return invalid(format!("{} scale values for {} locations", a.len(), b.len()));
        }
        if a.iter().any(|v| !(*v > 0.0)) {
            return invalid("scale function must be positive");
        }
        let a_prime = r.evaluate(&a)?;
        if !(a_prime > 0.0) {
            return invalid(format!("r(a) must be positive, got {a_prime}"));
        }
        let b_prime = r.evaluate(&b)?;
        let scale_std: Vec<f64> = a.iter().map(|v| v / a_prime).collect();
        let location_std = b.iter().zip(&scale_std).map(|(b, s)| b - s * b_prime).collect();
        Ok(Self {
            xi,
            n_excesses: vec![0; a.len()],
            a,
            b,
            a_prime,
            b_prime,
            u_n: b_prime,
            q_prime: f64::NAN,
            shift: 0.0,
            scale_std,
            location_std,
            flagged: Vec::new(),
            log_likelihood: f64::NAN,
            se_xi: None,
        })
    }
}

/// Per-site `b` from a common quantile level of the exceedance values,
/// calibrated so that `r(b) = u_n`.
fn calibrate(cols: &[Vec<f64>], r: &RiskFunctional, u_n: f64) -> Result<(Vec<f64>, f64, f64)> {
    let b_at = |q: f64| -> Vec<f64> { cols.iter().map(|c| quantile_sorted(c, q)).collect() };
    let f = |q: f64| r.value(&b_at(q)) - u_n;
    let tol = 1e-9 * (1.0 + u_n.abs());
    let (f0, f1) = (f(0.0), f(1.0));
    if f0 > 0.0 {
        // every quantile already overshoots; slide the minima down uniformly
        let b0 = b_at(0.0);
        let g = |d: f64| r.value(&b0.iter().map(|v| v - d).collect::<Vec<_>>()) - u_n;
        let mut hi = 1e-3 * (1.0 + f0.abs());
        let mut tries = 0;
        while g(hi) > 0.0 {
            hi *= 2.0;
            tries += 1;
            if tries > 200 {
                return Err(Error::Numerical("cannot bring r(b) down to u_n; risk functional is not monotone".into()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let d = if g(lo).abs() < g(hi).abs() { lo } else { hi };
        if g(d).abs() > tol {
            return Err(Error::Numerical(format!("location calibration stalled at r(b) - u_n = {}", g(d))));
        }
        return Ok((b0.iter().map(|v| v - d).collect(), 0.0, d));
    }
    if f1 < 0.0 {
        return Err(Error::Numerical(format!(
            "r(b) stays below u_n at every quantile level (r of site maxima = {}); risk functional is not monotone",
            f1 + u_n
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-17 {
            break;
        }
    }
    let q = if f(lo).abs() < f(hi).abs() { lo } else { hi };
    if f(q).abs() > tol {
        return Err(Error::Numerical(format!(
            "quantile bisection did not reach r(b) = u_n (residual {}); r(b) is not monotone in the level",
            f(q)
        )));
    }
    Ok((b_at(q), q, 0.0))
}

/// Weighted GPD log-likelihood of `e >= 0` at scale `exp(log_sigma)`.
fn site_ll(xi: f64, log_sigma: f64, e: &[f64], w: &[f64]) -> f64 {
    let sigma = log_sigma.exp();
    let mut ll = 0.0;
    for (x, w) in e.iter().zip(w) {
        let z = x / sigma;
        let t = if xi.abs() < XI_ZERO {
            z
        } else {
            let base = 1.0 + xi * z;
            if base <= 0.0 {
                return f64::NEG_INFINITY;
            }
            (1.0 / xi + 1.0) * base.ln()
        };
        ll -= w * (log_sigma + t);
    }
    ll
}

/// Profile over the scale at fixed `xi`: `(max log-likelihood, sigma)`.
fn site_profile(xi: f64, e: &[f64], w: &[f64]) -> (f64, f64) {
    let wsum: f64 = w.iter().sum();
    let mean = e.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / wsum;
    if xi.abs() < XI_ZERO {
        return (site_ll(xi, mean.ln(), e, w), mean);
    }
    let emax = e.iter().copied().fold(0.0, f64::max);
    let mut lo = mean.ln() - SIGMA_SPAN;
    if xi < 0.0 {
        lo = lo.max((-xi * emax).ln() + 1e-12);
    }
    let hi = mean.ln() + SIGMA_SPAN;
    let step = (hi - lo) / SIGMA_GRID as f64;
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for i in 0..=SIGMA_GRID {
        let v = site_ll(xi, lo + step * i as f64, e, w);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let c = lo + step * best_i as f64;
    let (ls, neg) = golden_section(|s| -site_ll(xi, s, e, w), (c - step).max(lo), (c + step).min(hi), 1e-12);
    if -neg >= best {
        (-neg, ls.exp())
    } else {
        (best, c.exp())
    }
}

struct SiteData {
    site: usize,
    e: Vec<f64>,
    w: Vec<f64>,
}

fn profile_total(xi: f64, sites: &[SiteData]) -> f64 {
    // collected first so the summation order is independent of threads
    let parts: Vec<f64> = sites.par_iter().map(|s| site_profile(xi, &s.e, &s.w).0).collect();
    parts.iter().sum()
}

/// Marginal model by the independence likelihood with a common tail index,
/// per-site scales and `b` calibrated so that `r(b) = u_n`.
///
/// The exceedance-probability factor in the independence likelihood does
/// not depend on `(xi, a)` once `b` is fixed, so only the GPD density terms
/// are maximized.
pub fn fit_margins(es: &ExceedanceSet, r: &RiskFunctional, opts: &MarginOptions) -> Result<MarginalModel> {
    let n_sites = es.n_sites();
    if n_sites == 0 {
        return invalid("events have no sites");
    }
    let rows: Vec<&[f64]> = es.exceedances().map(|e| e.values.as_slice()).collect();
    if rows.iter().any(|v| v.len() != n_sites) {
        return invalid("events have inconsistent numbers of sites");
    }
    if rows.iter().flat_map(|v| v.iter()).any(|v| !v.is_finite()) {
        return invalid("exceedance values must be finite");
    }
    let u_n = es.u_n;
    let cols: Vec<Vec<f64>> = (0..n_sites)
        .map(|l| {
            let mut c: Vec<f64> = rows.iter().map(|v| v[l]).collect();
            c.sort_by(f64::total_cmp);
            c
        })
        .collect();
    let (b, q_prime, shift) = calibrate(&cols, r, u_n)?;

    // cluster key: explicit cluster id, else the event itself
    let keys: Vec<(bool, usize)> = es
        .index
        .iter()
        .map(|&j| es.events[j].cluster.map_or((false, j), |c| (true, c)))
        .collect();

    let mut flagged = Vec::new();
    let mut n_excesses = vec![0usize; n_sites];
    let mut data = Vec::new();
    for l in 0..n_sites {
        let mut e = Vec::new();
        let mut k = Vec::new();
        for (row, key) in rows.iter().zip(&keys) {
            if row[l] >= b[l] {
                e.push(row[l] - b[l]);
                k.push(*key);
            }
        }
        n_excesses[l] = e.len();
        let w: Vec<f64> = if opts.storm_weights {
            let mut counts: HashMap<(bool, usize), usize> = HashMap::new();
            for key in &k {
                *counts.entry(*key).or_default() += 1;
            }
            k.iter().map(|key| 1.0 / counts[key] as f64).collect()
        } else {
            vec![1.0; e.len()]
        };
        let emax = e.iter().copied().fold(0.0, f64::max);
        let emin = e.iter().copied().fold(f64::INFINITY, f64::min);
        if e.len() < opts.min_excesses.max(2) {
            flagged.push(FlaggedSite {
                site: l,
                reason: format!("{} excesses, need {}", e.len(), opts.min_excesses.max(2)),
            });
        } else if emax - emin <= 1e-12 * (1.0 + emax.abs()) {
            flagged.push(FlaggedSite {
                site: l,
                reason: "constant excesses".into(),
            });
        } else {
            data.push(SiteData { site: l, e, w });
        }
    }
    if data.is_empty() {
        return invalid("every site is degenerate; no marginal excesses to fit");
    }

    let n_grid = ((XI_GRID_HI - XI_GRID_LO) / XI_GRID_STEP).round() as usize;
    let grid: Vec<f64> = (0..=n_grid).map(|i| XI_GRID_LO + XI_GRID_STEP * i as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&xi| profile_total(xi, &data)).collect();
    let best = (0..grid.len()).max_by(|&i, &j| vals[i].total_cmp(&vals[j])).expect("non-empty grid");
    if !vals[best].is_finite() {
        return Err(Error::Numerical("independence likelihood is not finite on the tail-index grid".into()));
    }
    let lo = (grid[best] - XI_GRID_STEP).max(XI_MIN_FIT);
    let hi = grid[best] + XI_GRID_STEP;
    let (xi, neg) = golden_section(|x| -profile_total(x, &data), lo, hi, 1e-10);
    let (xi, ll) = if -neg >= vals[best] { (xi, -neg) } else { (grid[best], vals[best]) };

    let h = 1e-3;
    let curv = (profile_total(xi + h, &data) - 2.0 * ll + profile_total(xi - h, &data)) / (h * h);
    let se_xi = (curv < 0.0).then(|| (-1.0 / curv).sqrt());

    let mut a = vec![f64::NAN; n_sites];
    let fitted: Vec<(usize, f64)> = data.par_iter().map(|s| (s.site, site_profile(xi, &s.e, &s.w).1)).collect();
    for (l, s) in &fitted {
        a[*l] = *s;
    }
    let mut sorted: Vec<f64> = fitted.iter().map(|f| f.1).collect();
    sorted.sort_by(f64::total_cmp);
    let median = quantile_sorted(&sorted, 0.5);
    for f in &flagged {
        a[f.site] = median;
    }

    let mut mm = MarginalModel::from_parts(xi, a, b, r)?;
    mm.u_n = u_n;
    mm.q_prime = q_prime;
    mm.shift = shift;
    mm.n_excesses = n_excesses;
    mm.flagged = flagged;
    mm.log_likelihood = ll;
    mm.se_xi = se_xi;
    Ok(mm)
}
