use serde::{Deserialize, Serialize};

use super::exceedance::ExceedanceSet;
use crate::depmodel::{DependenceModel, ModelFamily};
use crate::error::{invalid, Error, Result};
use crate::optim::{multistart, NelderMeadOptions};
use crate::sites::SiteSet;

/// Empirical `pi(s_i | s_j)` for each `(i, j)`: among exceedances with
/// `x(s_j) >= b_j`, the fraction that also have `x(s_i) >= b_i`.
/// A pair with no conditioning event is `None`.
pub fn empirical_extremogram(es: &ExceedanceSet, b: &[f64], pairs: &[(usize, usize)]) -> Result<Vec<Option<f64>>> {
    let n = es.n_sites();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    pairs
        .iter()
        .map(|&(i, j)| {
            if i >= n || j >= n {
                return invalid(format!("pair ({i}, {j}) out of range for {n} sites"));
            }
            let (mut num, mut den) = (0usize, 0usize);
            for e in es.exceedances() {
                if e.values[j] >= b[j] {
                    den += 1;
                    if e.values[i] >= b[i] {
                        num += 1;
                    }
                }
            }
            Ok((den > 0).then(|| num as f64 / den as f64))
        })
        .collect()
}

/// One empirical extremogram value with its space-time lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub target: usize,
    pub given: usize,
    pub ds: [f64; 2],
    pub dt: f64,
    pub value: f64,
}

/// Empirical extremogram over `pairs`, dropping missing pairs.
pub fn pair_estimates(es: &ExceedanceSet, b: &[f64], sites: &SiteSet, pairs: &[(usize, usize)]) -> Result<Vec<PairEstimate>> {
    if sites.len() != es.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: es.n_sites(),
            got: sites.len(),
        });
    }
    let vals = empirical_extremogram(es, b, pairs)?;
    Ok(pairs
        .iter()
        .zip(vals)
        .filter_map(|(&(i, j), v)| {
            v.map(|value| {
                let (ds, dt) = sites.lag(j, i);
                PairEstimate {
                    target: i,
                    given: j,
                    ds,
                    dt,
                    value,
                }
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplingMeta {
    pub scheme: String,
    pub replicates: usize,
    pub failures: usize,
}

/// Dependence fit: natural-scale free parameters, objective and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: String,
    pub names: Vec<String>,
    pub theta: Vec<f64>,
    pub objective: f64,
    /// Standard errors on the natural scale when available.
    pub se: Option<Vec<f64>>,
    pub model: DependenceModel,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default)]
    pub subsets: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub resampling: Option<ResamplingMeta>,
}

/// Start points: the template and a unit step either way per coordinate.
pub(crate) fn start_points(family: &ModelFamily) -> Vec<Vec<f64>> {
    let t0 = family.theta();
    let mut starts = vec![t0.clone()];
    for k in 0..t0.len() {
        for d in [-1.0, 1.0] {
            let mut t = t0.clone();
            t[k] += d;
            starts.push(t);
        }
    }
    starts
}

pub(crate) fn fit_options(dim: usize) -> NelderMeadOptions {
    NelderMeadOptions {
        max_iter: 4000,
        f_tol: 1e-18,
        x_tol: 1e-10,
        step: vec![0.5; dim],
    }
}

/// Weighted least-squares fit of the model extremogram to empirical values.
pub fn fit_dependence_ls(pihat: &[PairEstimate], family: &ModelFamily, weights: Option<&[f64]>) -> Result<FitResult> {
    let w: Vec<f64> = match weights {
        Some(w) if w.len() != pihat.len() => {
            return Err(Error::DimensionMismatch {
                expected: pihat.len(),
                got: w.len(),
            })
        }
        Some(w) => w.to_vec(),
        None => vec![1.0; pihat.len()],
    };
    if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return invalid("weights must be finite and non-negative");
    }
    if w.iter().all(|v| *v == 0.0) {
        return invalid("all weights are zero");
    }
    let informative = pihat.iter().zip(&w).filter(|(_, w)| **w > 0.0).count();
    if informative < family.dim() {
        return invalid(format!("{informative} informative pairs for {} free parameters", family.dim()));
    }
    if pihat.iter().zip(&w).filter(|(_, w)| **w > 0.0).all(|(p, _)| p.value > 0.999) {
        return Err(Error::Numerical("no dependence contrast: every empirical extremogram value is close to one".into()));
    }
    let objective = |theta: &[f64]| -> f64 {
        let Ok(m) = family.model(theta) else {
            return f64::INFINITY;
        };
        let mut s = 0.0;
        for (p, w) in pihat.iter().zip(&w) {
            if *w == 0.0 {
                continue;
            }
            match m.extremogram(p.ds, p.dt) {
                Ok(v) => s += w * (p.value - v).powi(2),
                Err(_) => return f64::INFINITY,
            }
        }
        s
    };
    let best = multistart(objective, &start_points(family), &fit_options(family.dim()))?;
    Ok(FitResult {
        method: "ls".into(),
        names: family.free.clone(),
        theta: family.natural(&best.x)?,
        objective: best.value,
        se: None,
        model: family.model(&best.x)?,
        converged: best.converged,
        iterations: best.iterations,
        subsets: None,
        seed: None,
        resampling: None,
    })
}
