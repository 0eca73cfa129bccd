//! Model checks: QQ data with Monte Carlo bands, risk and site margin
//! checks, and empirical versus fitted extremograms.
//!
//! Everything here is a pure function of its inputs and seed. Replicate `i`
//! draws from substream `(seed, i)` and results are collected before any
//! reduction, so output does not depend on the thread count.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depmodel::DependenceModel;
use crate::error::{invalid, Error, Result};
use crate::gpd::GpdParams;
use crate::infer::{pair_estimates, ExceedanceSet};
use crate::simulate::{transform_t, ProcessSpec};
use crate::sites::{FieldObservation, SiteSet};
use crate::stats::{ks_distance, quantile_sorted, substream};

/// Minimum number of Monte Carlo replicates for QQ bands.
pub const MIN_QQ_REPLICATES: usize = 200;

/// QQ data against a GPD with pointwise bands per order statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QQReport {
    /// Sorted data.
    pub empirical: Vec<f64>,
    /// Model quantiles at plotting positions `i/(n+1)`.
    pub model: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    pub replicates: usize,
}

impl QQReport {
    pub fn len(&self) -> usize {
        self.empirical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.empirical.is_empty()
    }

    /// Share of order statistics inside their band.
    pub fn coverage(&self) -> f64 {
        let inside = (0..self.len())
            .filter(|&i| self.empirical[i] >= self.lower[i] && self.empirical[i] <= self.upper[i])
            .count();
        inside as f64 / self.len() as f64
    }
}

/// QQ data of `data` (on the scale of `p`, threshold included) against `p`.
///
/// Bands are the empirical `(1-level)/2` and `(1+level)/2` percentiles of
/// each order statistic over `m` simulated samples of the same size. With
/// `param_cov`, the covariance of `(xi, log sigma)`, each replicate first
/// draws its parameters from the matching normal law.
pub fn qq_gpd(data: &[f64], p: &GpdParams, m: usize, level: f64, param_cov: Option<[[f64; 2]; 2]>, seed: u64) -> Result<QQReport> {
    let n = data.len();
    if n < 5 {
        return invalid(format!("QQ check needs at least 5 points, got {n}"));
    }
    if m < MIN_QQ_REPLICATES {
        return invalid(format!("QQ bands need at least {MIN_QQ_REPLICATES} replicates, got {m}"));
    }
    if !(level > 0.0 && level < 1.0) {
        return invalid(format!("band level must lie in (0, 1), got {level}"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return invalid("QQ data contain non-finite values");
    }
    let chol = match param_cov {
        None => None,
        Some(c) => {
            let l11 = c[0][0].sqrt();
            let l21 = if l11 > 0.0 { c[1][0] / l11 } else { 0.0 };
            let rest = c[1][1] - l21 * l21;
            if !(c[0][0] >= 0.0) || !(rest >= -1e-12) || (c[0][1] - c[1][0]).abs() > 1e-12 * (1.0 + c[0][1].abs()) {
                return invalid("parameter covariance must be symmetric positive semi-definite");
            }
            Some([l11, l21, rest.max(0.0).sqrt()])
        }
    };
    let mut empirical = data.to_vec();
    empirical.sort_by(f64::total_cmp);
    let model = (1..=n)
        .map(|i| p.quantile(i as f64 / (n as f64 + 1.0)))
        .collect::<Result<Vec<f64>>>()?;
    let reps: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k as u64);
            let g = match chol {
                None => *p,
                Some([l11, l21, l22]) => {
                    let z1: f64 = StandardNormal.sample(&mut rng);
                    let z2: f64 = StandardNormal.sample(&mut rng);
                    let xi = p.xi + l11 * z1;
                    let log_sigma = p.sigma.ln() + l21 * z1 + l22 * z2;
                    GpdParams::new(xi, log_sigma.exp(), p.u)?
                }
            };
            let mut s: Vec<f64> = (0..n).map(|_| g.sample(&mut rng)).collect();
            s.sort_by(f64::total_cmp);
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let (qlo, qhi) = ((1.0 - level) / 2.0, (1.0 + level) / 2.0);
    let (lower, upper): (Vec<f64>, Vec<f64>) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut col: Vec<f64> = reps.iter().map(|r| r[i]).collect();
            col.sort_by(f64::total_cmp);
            (quantile_sorted(&col, qlo), quantile_sorted(&col, qhi))
        })
        .unzip();
    Ok(QQReport {
        empirical,
        model,
        lower,
        upper,
        level,
        replicates: m,
    })
}

/// Kolmogorov–Smirnov distance with the QQ data behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginCheck {
    pub ks: f64,
    /// Number of values compared.
    pub n: usize,
    pub gpd: GpdParams,
    pub qq: QQReport,
}

fn gpd_check(values: &[f64], g: GpdParams, m: usize, level: f64, seed: u64) -> Result<MarginCheck> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-12 * (1.0 + lo.abs().max(hi.abs()))) {
        return invalid("values are degenerate (all equal); fixed-risk samples carry no distributional information");
    }
    let ks = ks_distance(values, |v| if v <= g.u { 0.0 } else { 1.0 - g.survival(v).unwrap_or(0.0) });
    Ok(MarginCheck {
        ks,
        n: values.len(),
        gpd: g,
        qq: qq_gpd(values, &g, m, level, None, seed)?,
    })
}

/// Compares `r(P) - r(b)` over samples with `GPD(xi, r(a))`.
///
/// Only linear functionals have a closed-form risk law; for others estimate
/// the risk distribution by Monte Carlo instead.
pub fn risk_gpd_check(samples: &[FieldObservation], spec: &ProcessSpec, m: usize, level: f64, seed: u64) -> Result<MarginCheck> {
    if !spec.r.is_linear() {
        return invalid(
            "the risk distribution is generalized Pareto in closed form only for linear functionals; \
             estimate it by Monte Carlo from simulated fields instead",
        );
    }
    let n = spec.len();
    let rb = spec.rb();
    let z = samples
        .iter()
        .map(|s| {
            if s.values.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: s.values.len(),
                });
            }
            Ok(spec.r.value(&s.values) - rb)
        })
        .collect::<Result<Vec<f64>>>()?;
    if z.len() < 5 {
        return invalid(format!("need at least 5 samples, got {}", z.len()));
    }
    gpd_check(&z, GpdParams::new(spec.xi, spec.ra(), 0.0)?, m, level, seed)
}

/// `sigma(s0) = r(a) A(s0) + xi {u0 - b(s0)}`.
pub fn conditional_scale(spec: &ProcessSpec, s0: usize, u0: f64) -> Result<f64> {
    if s0 >= spec.len() {
        return invalid(format!("site {s0} out of range for {} sites", spec.len()));
    }
    let sigma = spec.ra() * spec.a_std()[s0] + spec.xi * (u0 - spec.b[s0]);
    if !(sigma > 0.0) {
        return invalid(format!("threshold {u0} lies at or beyond the upper endpoint at site {s0}"));
    }
    Ok(sigma)
}

const CONE_FACTORS: [f64; 3] = [1.0, 2.0, 5.0];

/// Compares the excesses of `P(s0)` over `u0` with `GPD(xi, sigma(s0))`.
///
/// The law is exact when `{x(s0) > u0}` lies inside the exceedance set. This
/// is checked along every sampled direction: the point on the ray through
/// the sample with standardized value `t v0` at `s0` must be an exceedance
/// for `t` in {1, 2, 5}, where `v0` is `u0` on the standardized scale.
pub fn marginal_conditional_check(
    samples: &[FieldObservation],
    spec: &ProcessSpec,
    s0: usize,
    u0: f64,
    m: usize,
    level: f64,
    seed: u64,
) -> Result<MarginCheck> {
    let n = spec.len();
    let sigma = conditional_scale(spec, s0, u0)?;
    let v0 = transform_t(spec.xi, &spec.a[s0..=s0], &spec.b[s0..=s0], &[u0])[0];
    if !(v0 > 0.0 && v0.is_finite()) {
        return invalid(format!("threshold {u0} lies below the lower endpoint at site {s0}"));
    }
    let log_v0 = v0.ln();
    let mut excesses = Vec::new();
    for (k, s) in samples.iter().enumerate() {
        if s.values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.values.len(),
            });
        }
        let y = transform_t(spec.xi, &spec.a, &spec.b, &s.values);
        if !(y[s0] > 0.0) {
            continue;
        }
        let log_y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        for t in CONE_FACTORS {
            let shift = log_v0 + t.ln() - log_y[s0];
            let ray: Vec<f64> = log_y.iter().map(|l| l + shift).collect();
            let x = spec.field_from_log_y(&ray);
            let risk = spec.standardized_risk(&x);
            if !(risk >= -1e-12) {
                return invalid(format!(
                    "cone condition fails: the ray through sample {k} reaches {{x({s0}) = u0}} at t = {t} outside the exceedance set; raise u0"
                ));
            }
        }
        if s.values[s0] > u0 {
            excesses.push(s.values[s0] - u0);
        }
    }
    if excesses.len() < 5 {
        return invalid(format!("only {} samples exceed u0 = {u0} at site {s0}", excesses.len()));
    }
    gpd_check(&excesses, GpdParams::new(spec.xi, sigma, 0.0)?, m, level, seed)
}

/// Binning of site pairs for extremogram tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagGrid {
    /// Width of the distance bins in km; lags are rounded to bin centres.
    pub distance_bin: f64,
    /// Number of orientation sectors over `[0, pi)`; one ignores direction.
    pub orientations: usize,
}

impl Default for LagGrid {
    fn default() -> Self {
        Self {
            distance_bin: 1.0,
            orientations: 1,
        }
    }
}

/// One cell of an extremogram comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremogramRow {
    pub lag_km: f64,
    pub lag_h: f64,
    /// Lower edge of the orientation sector in degrees.
    pub orientation_deg: f64,
    pub pairs: usize,
    pub empirical: f64,
    pub fitted: f64,
}

/// Empirical extremogram (events in `es` above `b`) next to the model value,
/// averaged over site pairs within each `(distance, time lag, orientation)`
/// cell. Rows come sorted by time lag, then distance, then orientation.
pub fn extremogram_compare(
    es: &ExceedanceSet,
    b: &[f64],
    model: &DependenceModel,
    sites: &SiteSet,
    grid: &LagGrid,
) -> Result<Vec<ExtremogramRow>> {
    if !(grid.distance_bin > 0.0) || grid.orientations == 0 {
        return invalid("lag grid needs a positive bin width and at least one orientation");
    }
    let n = sites.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (j, i))).collect();
    let est = pair_estimates(es, b, sites, &pairs)?;
    let fitted = est
        .par_iter()
        .map(|e| model.extremogram(e.ds, e.dt))
        .collect::<Result<Vec<f64>>>()?;
    // key: (time lag, distance bin, sector) as integers for exact grouping
    let mut cells: BTreeMap<(i64, i64, usize), (usize, f64, f64)> = BTreeMap::new();
    for (e, f) in est.iter().zip(&fitted) {
        let dist = e.ds[0].hypot(e.ds[1]);
        let dbin = (dist / grid.distance_bin).round() as i64;
        let tkey = (e.dt * 1e6).round() as i64;
        let sector = if dist == 0.0 {
            0
        } else {
            let ang = e.ds[1].atan2(e.ds[0]).rem_euclid(PI);
            ((ang / PI * grid.orientations as f64) as usize).min(grid.orientations - 1)
        };
        let c = cells.entry((tkey, dbin, sector)).or_insert((0, 0.0, 0.0));
        c.0 += 1;
        c.1 += e.value;
        c.2 += f;
    }
    Ok(cells
        .into_iter()
        .map(|((t, d, s), (k, emp, fit))| ExtremogramRow {
            lag_km: d as f64 * grid.distance_bin,
            lag_h: t as f64 * 1e-6,
            orientation_deg: s as f64 * 180.0 / grid.orientations as f64,
            pairs: k,
            empirical: emp / k as f64,
            fitted: fit / k as f64,
        })
        .collect())
}
