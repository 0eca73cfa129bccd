//! Univariate generalized Pareto distribution for threshold excesses.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optim::{nelder_mead, numerical_hessian, NelderMeadOptions};

/// Below this `|xi|` the exponential (Gumbel-type) forms are used.
pub const XI_ZERO: f64 = 1e-8;
/// Lower limit on the tail index during maximum likelihood.
pub const XI_MIN_FIT: f64 = -0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdParams {
    pub xi: f64,
    pub sigma: f64,
    pub u: f64,
}

impl GpdParams {
    pub fn new(xi: f64, sigma: f64, u: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return invalid(format!("GPD scale must be positive, got {sigma}"));
        }
        if !xi.is_finite() || !u.is_finite() {
            return invalid("GPD shape and threshold must be finite");
        }
        Ok(Self { xi, sigma, u })
    }

    /// Upper end of the support (`+inf` unless `xi < 0`).
    pub fn upper_endpoint(&self) -> f64 {
        if self.xi < -XI_ZERO {
            self.u - self.sigma / self.xi
        } else {
            f64::INFINITY
        }
    }

    /// `Pr(X > x | X > u)`.
    pub fn survival(&self, x: f64) -> Result<f64> {
        if x < self.u {
            return invalid(format!("survival evaluated below the threshold ({x} < {})", self.u));
        }
        Ok(self.sf(x))
    }

    pub(crate) fn sf(&self, x: f64) -> f64 {
        let z = (x - self.u) / self.sigma;
        if self.xi.abs() < XI_ZERO {
            return (-z).exp();
        }
        let t = self.xi * z;
        if t <= -1.0 {
            return 0.0;
        }
        (-t.ln_1p() / self.xi).exp()
    }

    /// Inverse of the distribution function of excesses, `q` in `[0, 1)`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&q) {
            return invalid(format!("quantile level must lie in [0, 1), got {q}"));
        }
        Ok(self.quantile_unchecked(q))
    }

    fn quantile_unchecked(&self, q: f64) -> f64 {
        if q == 0.0 {
            return self.u;
        }
        let log_sf = (-q).ln_1p();
        if self.xi.abs() < XI_ZERO {
            self.u - self.sigma * log_sf
        } else {
            self.u + self.sigma * (-self.xi * log_sf).exp_m1() / self.xi
        }
    }

    /// Log density; `-inf` outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        let z = (x - self.u) / self.sigma;
        if z < 0.0 {
            return f64::NEG_INFINITY;
        }
        if self.xi.abs() < XI_ZERO {
            return -self.sigma.ln() - z;
        }
        let t = self.xi * z;
        if t <= -1.0 {
            return f64::NEG_INFINITY;
        }
        -self.sigma.ln() - (1.0 / self.xi + 1.0) * t.ln_1p()
    }

    /// Inverse-transform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let q: f64 = rng.random();
        self.quantile_unchecked(q)
    }

    /// Conditional law of excesses over a higher threshold `v`.
    pub fn at_threshold(&self, v: f64) -> Result<Self> {
        GpdParams::new(self.xi, self.sigma + self.xi * (v - self.u), v)
    }
}

/// GPD tail above `u` combined with the exceedance rate `zeta_u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub gpd: GpdParams,
    pub zeta_u: f64,
}

impl TailModel {
    pub fn new(gpd: GpdParams, zeta_u: f64) -> Result<Self> {
        if !(zeta_u > 0.0 && zeta_u <= 1.0) {
            return invalid(format!("exceedance rate must lie in (0, 1], got {zeta_u}"));
        }
        Ok(Self { gpd, zeta_u })
    }

    /// `1 - F(x) ~ zeta_u * Pr(X > x | X > u)` for `x >= u`.
    pub fn tail_prob(&self, x: f64) -> Result<f64> {
        Ok(self.zeta_u * self.gpd.survival(x)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpdFit {
    pub params: GpdParams,
    pub se_xi: f64,
    pub se_sigma: f64,
    /// Covariance of `(xi, log sigma)` from the observed information.
    pub cov_xi_log_sigma: [[f64; 2]; 2],
    pub log_likelihood: f64,
}

/// Weighted log-likelihood of excesses (threshold zero).
pub fn log_likelihood(xi: f64, sigma: f64, excesses: &[f64], weights: Option<&[f64]>) -> f64 {
    let p = GpdParams { xi, sigma, u: 0.0 };
    match weights {
        Some(w) => excesses.iter().zip(w).map(|(x, w)| w * p.log_density(*x)).sum(),
        None => excesses.iter().map(|x| p.log_density(*x)).sum(),
    }
}

const XI_GRID: [f64; 7] = [-0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8];

/// Maximum likelihood fit of excesses over a zero threshold.
///
/// Weights multiply each log-density contribution and are used as given.
/// The search runs over `(xi, log sigma)` with `xi > -0.95`, started from
/// the best two points of a `xi` grid.
pub fn fit_ml(excesses: &[f64], weights: Option<&[f64]>) -> Result<GpdFit> {
    if excesses.len() < 10 {
        return invalid(format!("need at least 10 excesses, got {}", excesses.len()));
    }
    if excesses.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return invalid("excesses must be finite and non-negative");
    }
    if let Some(w) = weights {
        if w.len() != excesses.len() {
            return Err(Error::DimensionMismatch {
                expected: excesses.len(),
                got: w.len(),
            });
        }
        if w.iter().any(|v| !(*v > 0.0)) {
            return invalid("weights must be positive");
        }
    }
    let max = excesses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = excesses.iter().copied().fold(f64::INFINITY, f64::min);
    if max - min <= 1e-12 * (1.0 + max.abs()) {
        return invalid("degenerate data: all excesses are equal");
    }
    let mean = excesses.iter().sum::<f64>() / excesses.len() as f64;

    let nll = |th: &[f64]| {
        if th[0] <= XI_MIN_FIT {
            return f64::INFINITY;
        }
        -log_likelihood(th[0], th[1].exp(), excesses, weights)
    };

    let mut starts: Vec<(f64, Vec<f64>)> = XI_GRID
        .iter()
        .map(|&xi| {
            let mut s = if xi < 1.0 { mean * (1.0 - xi) } else { mean };
            if xi < 0.0 {
                s = s.max(-xi * max * 1.01);
            }
            let th = vec![xi, s.ln()];
            (nll(&th), th)
        })
        .collect();
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut opts = NelderMeadOptions::new(2);
    opts.step = vec![0.1, 0.1];
    opts.max_iter = 4000;
    opts.f_tol = 1e-12;
    opts.x_tol = 1e-9;
    let mut best = None::<crate::optim::Minimum>;
    for (_, th) in starts.iter().take(2) {
        let m = nelder_mead(nll, th, &opts);
        if best.as_ref().map_or(true, |b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best = best.expect("two starts");
    if !best.converged || !best.value.is_finite() {
        return Err(Error::NonConvergence {
            iterations: best.iterations,
            best_value: best.value,
            best_point: best.x,
        });
    }
    let (xi, log_sigma) = (best.x[0], best.x[1]);
    let sigma = log_sigma.exp();

    let h = numerical_hessian(nll, &best.x);
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let cov = if det > 0.0 && h[0][0] > 0.0 {
        [[h[1][1] / det, -h[0][1] / det], [-h[1][0] / det, h[0][0] / det]]
    } else {
        [[f64::NAN; 2]; 2]
    };
    Ok(GpdFit {
        params: GpdParams::new(xi, sigma, 0.0)?,
        se_xi: cov[0][0].sqrt(),
        se_sigma: sigma * cov[1][1].sqrt(),
        cov_xi_log_sigma: cov,
        log_likelihood: -best.value,
    })
}
