use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exceedance::ExceedanceSet;
use super::extremogram::{fit_options, start_points, FitResult};
use super::intensity::BrIntensity;
use super::margins::MarginalModel;
use crate::depmodel::{DependenceModel, ModelFamily};
use crate::error::{invalid, Error, Result};
use crate::optim::multistart;
use crate::simulate::transform_t;
use crate::sites::SiteSet;
use crate::stats::substream;

/// Gradient score of the samples `ys` (rows restricted to the subset the
/// intensity was built on) with weight `w_l = y_l (1 - u / sum(y))`, which
/// vanishes on the boundary `sum(y) = u` of the exceedance region.
pub fn gradient_score_value(intensity: &BrIntensity, ys: &[Vec<f64>], u: f64) -> Result<f64> {
    if !(u > 0.0) {
        return invalid(format!("score threshold must be positive, got {u}"));
    }
    let mut total = 0.0;
    for (i, y) in ys.iter().enumerate() {
        let s: f64 = y.iter().sum();
        if s < u * (1.0 - 1e-12) {
            return invalid(format!("sample {i} lies outside the exceedance region: sum {s} < {u}"));
        }
        let e = intensity.eval(y)?;
        let f = 1.0 - u / s;
        for l in 0..y.len() {
            let w = y[l] * f;
            let dw = f + y[l] * u / (s * s);
            let g = e.grad[l];
            total += 2.0 * w * dw * g + w * w * (e.hess_diag[l] + 0.5 * g * g);
        }
    }
    Ok(total)
}

fn variogram_of(m: &DependenceModel) -> Result<crate::depmodel::Variogram> {
    match m {
        DependenceModel::BrownResnick { variogram } => Ok(*variogram),
        DependenceModel::ExtremalT { .. } => invalid("gradient scoring is implemented for Brown-Resnick models only"),
    }
}

/// Score value at `theta` (unconstrained coordinates of `family`) and its
/// central-difference gradient with step `1e-5 (1 + |theta_k|)`.
pub fn gradient_score(family: &ModelFamily, theta: &[f64], sites: &SiteSet, ys: &[Vec<f64>], u: f64) -> Result<(f64, Vec<f64>)> {
    let value_at = |t: &[f64]| -> Result<f64> {
        let v = variogram_of(&family.model(t)?)?;
        gradient_score_value(&BrIntensity::new(&v, sites, 0)?, ys, u)
    };
    let value = value_at(theta)?;
    let mut grad = Vec::with_capacity(theta.len());
    for k in 0..theta.len() {
        let h = 1e-5 * (1.0 + theta[k].abs());
        let mut tp = theta.to_vec();
        let mut tm = theta.to_vec();
        tp[k] += h;
        tm[k] -= h;
        grad.push((value_at(&tp)? - value_at(&tm)?) / (2.0 * h));
    }
    Ok((value, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreOptions {
    /// Number of random site subsets.
    pub count: usize,
    /// Sites per subset; at or above `L` the full design is used once.
    pub size: usize,
    /// Threshold on the standardized sum; defaults to the smallest full sum
    /// among the exceedances.
    pub u: Option<f64>,
    pub seed: u64,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            count: 100,
            size: 50,
            u: None,
            seed: 0,
        }
    }
}

/// Random subsets of `0..n`, each sorted; a single full subset when
/// `size >= n`.
pub(crate) fn draw_subsets(n: usize, count: usize, size: usize, seed: u64) -> Vec<Vec<usize>> {
    if size >= n {
        return vec![(0..n).collect()];
    }
    (0..count)
        .map(|k| {
            let mut rng = substream(seed, k as u64);
            let mut s = sample_indices(&mut rng, n, size).into_vec();
            s.sort_unstable();
            s
        })
        .collect()
}

/// Composite gradient-score fit on exceedances standardized with `mm`.
pub fn fit_dependence_score(
    es: &ExceedanceSet,
    mm: &MarginalModel,
    family: &ModelFamily,
    sites: &SiteSet,
    opts: &ScoreOptions,
) -> Result<FitResult> {
    let n = sites.len();
    if mm.len() != n || es.n_sites() != n {
        return invalid(format!("marginal model, events and design disagree on the number of sites ({}, {}, {n})", mm.len(), es.n_sites()));
    }
    if n < 2 {
        return invalid("gradient scoring needs at least two sites");
    }
    if opts.count == 0 || opts.size < 2 {
        return invalid("need at least one subset of at least two sites");
    }
    variogram_of(&family.template)?;
    let ys: Vec<Vec<f64>> = es.exceedances().map(|e| transform_t(mm.xi, &mm.a, &mm.b, &e.values)).collect();
    if let Some(i) = ys.iter().position(|y| y.iter().any(|v| !(*v > 0.0) || !v.is_finite())) {
        return invalid(format!("standardized exceedance {i} has a non-positive or infinite coordinate"));
    }
    let u = match opts.u {
        Some(u) => u,
        None => ys.iter().map(|y| y.iter().sum::<f64>()).fold(f64::INFINITY, f64::min),
    };
    let subsets = draw_subsets(n, opts.count, opts.size, opts.seed);
    let blocks: Vec<(SiteSet, Vec<Vec<f64>>)> = subsets
        .iter()
        .map(|s| {
            let rows: Vec<Vec<f64>> = ys
                .iter()
                .map(|y| s.iter().map(|&l| y[l]).collect::<Vec<f64>>())
                .filter(|y| y.iter().sum::<f64>() >= u)
                .collect();
            (sites.subset(s), rows)
        })
        .filter(|(_, rows)| !rows.is_empty())
        .collect();
    let terms: usize = blocks.iter().map(|b| b.1.len()).sum();
    if terms == 0 {
        return invalid(format!("no exceedance has subset sum at or above u = {u}"));
    }
    let objective = |theta: &[f64]| -> f64 {
        let Ok(v) = family.model(theta).and_then(|m| variogram_of(&m)) else {
            return f64::INFINITY;
        };
        let parts: Vec<f64> = blocks
            .par_iter()
            .map(|(s, rows)| {
                BrIntensity::new(&v, s, 0)
                    .and_then(|bi| gradient_score_value(&bi, rows, u))
                    .unwrap_or(f64::INFINITY)
            })
            .collect();
        parts.iter().sum::<f64>() / terms as f64
    };
    let mut o = fit_options(family.dim());
    o.f_tol = 1e-12;
    o.x_tol = 1e-8;
    let best = multistart(objective, &start_points(family), &o).map_err(|e| match e {
        Error::NonConvergence { .. } => Error::Numerical(format!("score objective is not finite anywhere on the start set: {e}")),
        other => other,
    })?;
    Ok(FitResult {
        method: "score".into(),
        names: family.free.clone(),
        theta: family.natural(&best.x)?,
        objective: best.value,
        se: None,
        model: family.model(&best.x)?,
        converged: best.converged,
        iterations: best.iterations,
        subsets: Some(subsets),
        seed: Some(opts.seed),
        resampling: None,
    })
}
