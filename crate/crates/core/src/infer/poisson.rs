use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::exceedance::ExceedanceSet;
use super::extremogram::{fit_options, start_points, FitResult};
use super::intensity::BrIntensity;
use super::margins::MarginalModel;
use crate::depmodel::{DependenceModel, ModelFamily};
use crate::error::{invalid, Error, Result};
use crate::optim::{multistart, numerical_hessian};
use crate::riskfunc::RiskFunctional;
use crate::simulate::{lambda_exceedance_mc, transform_t, ProcessSpec};
use crate::sites::SiteSet;

/// Poisson exceedance log-likelihood with the Monte Carlo estimate of
/// `Lambda(A_r)` it was computed with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonLik {
    pub value: f64,
    pub lambda: f64,
    pub lambda_se: f64,
    pub n_u: usize,
}

const MAX_REL_SE: f64 = 0.1;

/// `n_u log Lambda - Lambda + sum_j log f^r(x_j)` where
/// `f^r(x) = lambda(y) |dy/dx| / Lambda(A_r)` and `y = T(x)` with the
/// marginal model held fixed.
pub fn poisson_loglik(
    dep: &DependenceModel,
    es: &ExceedanceSet,
    mm: &MarginalModel,
    r: &RiskFunctional,
    sites: &SiteSet,
    n_mc: usize,
    seed: u64,
) -> Result<PoissonLik> {
    let n = sites.len();
    if mm.len() != n || es.n_sites() != n {
        return invalid("marginal model, events and design disagree on the number of sites");
    }
    if n_mc < 2 {
        return invalid("need at least two Monte Carlo draws");
    }
    let spec = ProcessSpec::new(mm.xi, mm.a.clone(), mm.b.clone(), r.clone(), *dep, sites.clone())?;
    let (lambda, se) = lambda_exceedance_mc(&spec, n_mc, seed)?;
    if !(lambda > 0.0) {
        return Err(Error::Numerical("Monte Carlo estimate of the exceedance mass is zero".into()));
    }
    if se / lambda > MAX_REL_SE {
        return Err(Error::Numerical(format!(
            "relative Monte Carlo error of the exceedance mass is {:.3} (> {MAX_REL_SE}); increase the number of draws",
            se / lambda
        )));
    }
    let intensity = if n >= 2 {
        match dep {
            DependenceModel::BrownResnick { variogram } => Some(BrIntensity::new(variogram, sites, 0)?),
            DependenceModel::ExtremalT { .. } => return invalid("Poisson likelihood is implemented for Brown-Resnick models only"),
        }
    } else {
        None
    };
    let log_lambda = lambda.ln();
    let mut sum = 0.0;
    for (k, e) in es.exceedances().enumerate() {
        let y = transform_t(mm.xi, &mm.a, &mm.b, &e.values);
        if y.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return invalid(format!("exceedance {k} maps outside the positive orthant"));
        }
        let log_int = match &intensity {
            Some(bi) => bi.log_density(&y)?,
            None => -2.0 * y[0].ln(),
        };
        let jac: f64 = y.iter().zip(&mm.a).map(|(y, a)| (1.0 - mm.xi) * y.ln() - a.ln()).sum();
        sum += log_int + jac - log_lambda;
    }
    let n_u = es.len();
    Ok(PoissonLik {
        value: n_u as f64 * log_lambda - lambda + sum,
        lambda,
        lambda_se: se,
        n_u,
    })
}

/// Maximizes the Poisson likelihood over the free parameters with common
/// Monte Carlo draws; standard errors from the observed information on the
/// natural scale.
pub fn fit_dependence_poisson(
    es: &ExceedanceSet,
    mm: &MarginalModel,
    r: &RiskFunctional,
    sites: &SiteSet,
    family: &ModelFamily,
    n_mc: usize,
    seed: u64,
) -> Result<FitResult> {
    let nll = |theta: &[f64]| -> f64 {
        family
            .model(theta)
            .and_then(|m| poisson_loglik(&m, es, mm, r, sites, n_mc, seed))
            .map_or(f64::INFINITY, |p| -p.value)
    };
    let mut o = fit_options(family.dim());
    o.f_tol = 1e-10;
    o.x_tol = 1e-7;
    let best = multistart(nll, &start_points(family), &o)?;
    let natural = family.natural(&best.x)?;
    let nll_nat = |v: &[f64]| -> f64 {
        family
            .with_natural(v)
            .and_then(|m| poisson_loglik(&m, es, mm, r, sites, n_mc, seed))
            .map_or(f64::INFINITY, |p| -p.value)
    };
    let h = numerical_hessian(nll_nat, &natural);
    let k = natural.len();
    let hm = DMatrix::from_fn(k, k, |i, j| h[i][j]);
    let se = hm
        .try_inverse()
        .map(|inv| (0..k).map(|i| inv[(i, i)]).collect::<Vec<f64>>())
        .filter(|d| d.iter().all(|v| *v >= 0.0 && v.is_finite()))
        .map(|d| d.iter().map(|v| v.sqrt()).collect());
    Ok(FitResult {
        method: "poisson".into(),
        names: family.free.clone(),
        theta: natural,
        objective: best.value,
        se,
        model: family.model(&best.x)?,
        converged: best.converged,
        iterations: best.iterations,
        subsets: None,
        seed: Some(seed),
        resampling: None,
    })
}
