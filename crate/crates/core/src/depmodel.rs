//! Variogram and correlation models, the space-time anisotropic metric,
//! closed-form extremograms and the anchored Gaussian covariance.

use std::f64::consts::FRAC_PI_4;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::check_psd;
use crate::sites::SiteSet;
use crate::special::{bessel_k, gamma, ln_gamma, norm_cdf, norm_sf, student_t_cdf};

/// Anisotropic space-time metric with advection.
///
/// Spatial lags are in km, time lags in hours and `v` in km per hour;
/// `eta` is an angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeMetric {
    pub tau_s: f64,
    pub tau_t: f64,
    pub eta: f64,
    pub a: f64,
    pub v: [f64; 2],
}

impl Default for SpaceTimeMetric {
    fn default() -> Self {
        Self::isotropic(1.0)
    }
}

impl SpaceTimeMetric {
    /// Euclidean spatial distance divided by `tau_s`, unit time scale.
    pub fn isotropic(tau_s: f64) -> Self {
        Self {
            tau_s,
            tau_t: 1.0,
            eta: 0.0,
            a: 1.0,
            v: [0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_s > 0.0 && self.tau_t > 0.0 && self.a > 0.0) {
            return invalid("metric scales tau_s, tau_t and a must be positive");
        }
        if !(self.eta > -FRAC_PI_4 && self.eta <= FRAC_PI_4) {
            return invalid(format!("metric angle eta must lie in (-pi/4, pi/4], got {}", self.eta));
        }
        if !(self.v[0].is_finite() && self.v[1].is_finite()) {
            return invalid("advection velocity must be finite");
        }
        Ok(())
    }

    pub fn norm(&self, ds: [f64; 2], dt: f64) -> f64 {
        let (s, c) = self.eta.sin_cos();
        let rx = c * ds[0] - s * ds[1];
        let ry = self.a * (s * ds[0] + c * ds[1]);
        let px = (rx - self.v[0] * dt) / self.tau_s;
        let py = (ry - self.v[1] * dt) / self.tau_s;
        let pt = dt / self.tau_t;
        (px * px + py * py + pt * pt).sqrt()
    }
}

pub fn metric_norm(m: &SpaceTimeMetric, ds: [f64; 2], dt: f64) -> f64 {
    m.norm(ds, dt)
}

/// Normalized Matérn correlation `2^(1-nu)/Gamma(nu) h^nu K_nu(h)`, one at zero.
fn matern_corr(nu: f64, h: f64) -> Result<f64> {
    if h <= 0.0 {
        return Ok(1.0);
    }
    if h > 700.0 + nu {
        return Ok(0.0);
    }
    let k = bessel_k(nu, h)?;
    if !k.is_finite() {
        return Err(Error::Numerical(format!("Bessel K overflow at nu={nu}, h={h}")));
    }
    let log = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu) + nu * h.ln() + k.ln();
    Ok(if k == 0.0 { 0.0 } else { log.exp().min(1.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariogramKind {
    WhittleMatern { kappa: f64, nu: f64 },
    Power { tau: f64, nu: f64 },
    PowerExponential { c: f64, tau: f64, nu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variogram {
    #[serde(flatten)]
    pub kind: VariogramKind,
    #[serde(default)]
    pub metric: SpaceTimeMetric,
}

impl Variogram {
    pub fn new(kind: VariogramKind, metric: SpaceTimeMetric) -> Result<Self> {
        let v = Self { kind, metric };
        v.validate()?;
        Ok(v)
    }

    pub fn power(tau: f64, nu: f64) -> Result<Self> {
        Self::new(VariogramKind::Power { tau, nu }, SpaceTimeMetric::default())
    }

    pub fn power_exponential(c: f64, tau: f64, nu: f64) -> Result<Self> {
        Self::new(VariogramKind::PowerExponential { c, tau, nu }, SpaceTimeMetric::default())
    }

    pub fn whittle_matern(kappa: f64, nu: f64, metric: SpaceTimeMetric) -> Result<Self> {
        Self::new(VariogramKind::WhittleMatern { kappa, nu }, metric)
    }

    pub fn validate(&self) -> Result<()> {
        self.metric.validate()?;
        let ok = match self.kind {
            VariogramKind::WhittleMatern { kappa, nu } => kappa > 0.0 && nu > 0.0 && nu.is_finite(),
            VariogramKind::Power { tau, nu } => tau > 0.0 && nu > 0.0 && nu <= 2.0,
            VariogramKind::PowerExponential { c, tau, nu } => c > 0.0 && tau > 0.0 && nu > 0.0 && nu <= 2.0,
        };
        if ok && self.kind_params().iter().all(|p| p.is_finite()) {
            Ok(())
        } else {
            invalid(format!("invalid variogram parameters {:?}", self.kind))
        }
    }

    fn kind_params(&self) -> Vec<f64> {
        match self.kind {
            VariogramKind::WhittleMatern { kappa, nu } => vec![kappa, nu],
            VariogramKind::Power { tau, nu } => vec![tau, nu],
            VariogramKind::PowerExponential { c, tau, nu } => vec![c, tau, nu],
        }
    }

    /// Limit of `gamma(h)` as `|h| -> inf`; `None` when unbounded.
    pub fn sill(&self) -> Option<f64> {
        match self.kind {
            VariogramKind::WhittleMatern { kappa, .. } => Some(kappa),
            VariogramKind::Power { .. } => None,
            VariogramKind::PowerExponential { c, .. } => Some(c),
        }
    }

    /// `gamma` as a function of the metric norm.
    pub fn at_norm(&self, h: f64) -> Result<f64> {
        if h <= 0.0 {
            return Ok(0.0);
        }
        Ok(match self.kind {
            VariogramKind::WhittleMatern { kappa, nu } => kappa * (1.0 - matern_corr(nu, h)?),
            VariogramKind::Power { tau, nu } => (h / tau).powf(nu),
            VariogramKind::PowerExponential { c, tau, nu } => -c * (-(h / tau).powf(nu)).exp_m1(),
        })
    }

    pub fn eval(&self, ds: [f64; 2], dt: f64) -> Result<f64> {
        self.at_norm(self.metric.norm(ds, dt))
    }

    /// Matrix of `gamma(s_i, s_j)` over all site pairs.
    pub fn matrix(&self, sites: &SiteSet) -> Result<DMatrix<f64>> {
        let n = sites.len();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let (ds, dt) = sites.lag(i, j);
                let v = self.eval(ds, dt)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }
}

pub fn variogram_eval(g: &Variogram, ds: [f64; 2], dt: f64) -> Result<f64> {
    g.eval(ds, dt)
}

/// Correlation functions for the extremal-t model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrelationKind {
    /// `exp{-(h/range)^nu}`, `nu` in `(0, 2]`.
    PowerExponential { range: f64, nu: f64 },
    /// Normalized Matérn with smoothness `nu`.
    Matern { range: f64, nu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    #[serde(flatten)]
    pub kind: CorrelationKind,
    #[serde(default)]
    pub metric: SpaceTimeMetric,
}

impl Correlation {
    pub fn validate(&self) -> Result<()> {
        self.metric.validate()?;
        let ok = match self.kind {
            CorrelationKind::PowerExponential { range, nu } => range > 0.0 && nu > 0.0 && nu <= 2.0,
            CorrelationKind::Matern { range, nu } => range > 0.0 && nu > 0.0 && nu.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("invalid correlation parameters {:?}", self.kind))
        }
    }

    pub fn at_norm(&self, h: f64) -> Result<f64> {
        if h <= 0.0 {
            return Ok(1.0);
        }
        match self.kind {
            CorrelationKind::PowerExponential { range, nu } => Ok((-(h / range).powf(nu)).exp()),
            CorrelationKind::Matern { range, nu } => matern_corr(nu, h / range),
        }
    }

    pub fn eval(&self, ds: [f64; 2], dt: f64) -> Result<f64> {
        self.at_norm(self.metric.norm(ds, dt))
    }

    pub fn matrix(&self, sites: &SiteSet) -> Result<DMatrix<f64>> {
        let n = sites.len();
        let mut c = DMatrix::identity(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let (ds, dt) = sites.lag(i, j);
                let v = self.eval(ds, dt)?;
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DependenceModel {
    BrownResnick { variogram: Variogram },
    ExtremalT { correlation: Correlation, dof: f64 },
}

impl DependenceModel {
    pub fn brown_resnick(variogram: Variogram) -> Self {
        Self::BrownResnick { variogram }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::BrownResnick { variogram } => variogram.validate(),
            Self::ExtremalT { correlation, dof } => {
                if !(*dof > 0.0) || !dof.is_finite() {
                    return invalid(format!("extremal-t degrees of freedom must be positive, got {dof}"));
                }
                correlation.validate()
            }
        }
    }

    /// Theoretical extremogram for a space-time lag.
    pub fn extremogram(&self, ds: [f64; 2], dt: f64) -> Result<f64> {
        match self {
            Self::BrownResnick { variogram } => Ok(br_extremogram(variogram.eval(ds, dt)?)),
            Self::ExtremalT { correlation, dof } => Ok(et_extremogram(correlation.eval(ds, dt)?, *dof)),
        }
    }

    pub fn pair_extremogram(&self, sites: &SiteSet, i: usize, j: usize) -> Result<f64> {
        let (ds, dt) = sites.lag(i, j);
        self.extremogram(ds, dt)
    }

    pub fn metric(&self) -> &SpaceTimeMetric {
        match self {
            Self::BrownResnick { variogram } => &variogram.metric,
            Self::ExtremalT { correlation, .. } => &correlation.metric,
        }
    }
}

/// `2{1 - Phi(sqrt(gamma/2))}`.
pub fn br_extremogram(gamma_val: f64) -> f64 {
    2.0 * norm_sf((gamma_val.max(0.0) / 2.0).sqrt())
}

/// `2{1 - T_{nu+1}(sqrt(nu+1) sqrt((1-C)/(1+C)))}`.
pub fn et_extremogram(c: f64, nu: f64) -> f64 {
    let c = c.clamp(-1.0, 1.0);
    if c <= -1.0 {
        return 0.0;
    }
    let arg = ((nu + 1.0) * (1.0 - c) / (1.0 + c)).sqrt();
    2.0 * (1.0 - student_t_cdf(arg, nu + 1.0))
}

/// Bivariate Hüsler–Reiss exponent `V(z1, z2)` for semi-variogram value `gamma`.
pub fn hr_exponent(z1: f64, z2: f64, gamma_val: f64) -> f64 {
    if gamma_val <= 0.0 {
        return 1.0 / z1.min(z2);
    }
    let s = (2.0 * gamma_val).sqrt();
    let l = (z2 / z1).ln();
    norm_cdf(s / 2.0 + l / s) / z1 + norm_cdf(s / 2.0 - l / s) / z2
}

/// Covariance of a centred Gaussian field with semi-variogram `gamma`
/// pinned to zero at `ref_index`:
/// `Sigma_ij = gamma(s_i, s_ref) + gamma(s_j, s_ref) - gamma(s_i, s_j)`.
///
/// The entries are twice the usual increment covariance so that
/// `Var{G(s) - G(s')} = 2 gamma(s, s')`.
pub fn gaussian_cov(variogram: &Variogram, sites: &SiteSet, ref_index: usize) -> Result<DMatrix<f64>> {
    if ref_index >= sites.len() {
        return invalid(format!("reference index {ref_index} out of range for {} sites", sites.len()));
    }
    let g = variogram.matrix(sites)?;
    let sigma = cov_from_gamma(&g, ref_index);
    check_psd(&sigma, 1e-8)?;
    Ok(sigma)
}

pub(crate) fn cov_from_gamma(g: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let n = g.nrows();
    DMatrix::from_fn(n, n, |i, j| g[(i, r)] + g[(j, r)] - g[(i, j)])
}

/// Free-parameter view of a dependence model for optimization.
///
/// Each named parameter maps to an unconstrained coordinate: positive
/// quantities use `log`, shape exponents bounded by 2 use a scaled logistic,
/// `eta` uses `pi/4 * tanh`, and velocities are unconstrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFamily {
    pub template: DependenceModel,
    pub free: Vec<String>,
}

#[derive(Clone, Copy)]
enum Transform {
    Log,
    Logistic2,
    Tanh,
    Identity,
}

impl Transform {
    fn forward(self, v: f64) -> f64 {
        match self {
            Transform::Log => v.ln(),
            Transform::Logistic2 => {
                let p = (v / 2.0).clamp(1e-12, 1.0 - 1e-12);
                (p / (1.0 - p)).ln()
            }
            Transform::Tanh => (v / FRAC_PI_4).clamp(-1.0 + 1e-12, 1.0 - 1e-12).atanh(),
            Transform::Identity => v,
        }
    }

    fn inverse(self, z: f64) -> f64 {
        match self {
            Transform::Log => z.exp(),
            Transform::Logistic2 => 2.0 / (1.0 + (-z).exp()),
            Transform::Tanh => FRAC_PI_4 * z.tanh(),
            Transform::Identity => z,
        }
    }
}

impl ModelFamily {
    pub fn new(template: DependenceModel, free: &[&str]) -> Result<Self> {
        template.validate()?;
        let fam = Self {
            template,
            free: free.iter().map(|s| s.to_string()).collect(),
        };
        for name in &fam.free {
            fam.slot(&fam.template, name)?;
        }
        Ok(fam)
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    fn slot(&self, m: &DependenceModel, name: &str) -> Result<(f64, Transform)> {
        let mut m = *m;
        let (p, tr) = param_slot(&mut m, name)?;
        Ok((*p, tr))
    }

    /// Unconstrained coordinates of the template's free parameters.
    pub fn theta(&self) -> Vec<f64> {
        self.free
            .iter()
            .map(|n| {
                let (v, tr) = self.slot(&self.template, n).expect("checked at construction");
                tr.forward(v)
            })
            .collect()
    }

    /// Natural-scale values of `theta`.
    pub fn natural(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.model(theta)?.pipe_values(&self.free))
    }

    pub fn model(&self, theta: &[f64]) -> Result<DependenceModel> {
        if theta.len() != self.free.len() {
            return Err(Error::DimensionMismatch {
                expected: self.free.len(),
                got: theta.len(),
            });
        }
        let mut m = self.template;
        for (name, z) in self.free.iter().zip(theta) {
            let (p, tr) = param_slot(&mut m, name)?;
            *p = tr.inverse(*z);
        }
        m.validate()?;
        Ok(m)
    }

    /// Model with natural-scale values substituted for the free parameters.
    pub fn with_natural(&self, values: &[f64]) -> Result<DependenceModel> {
        let mut m = self.template;
        for (name, v) in self.free.iter().zip(values) {
            *param_slot(&mut m, name)?.0 = *v;
        }
        m.validate()?;
        Ok(m)
    }
}

impl DependenceModel {
    fn pipe_values(mut self, names: &[String]) -> Vec<f64> {
        names.iter().map(|n| *param_slot(&mut self, n).expect("valid name").0).collect()
    }

    /// Current value of a named parameter.
    pub fn param(&self, name: &str) -> Result<f64> {
        let mut m = *self;
        Ok(*param_slot(&mut m, name)?.0)
    }
}

const METRIC_PARAMS: [&str; 6] = ["tau_s", "tau_t", "a", "eta", "v1", "v2"];

fn param_slot<'a>(m: &'a mut DependenceModel, name: &str) -> Result<(&'a mut f64, Transform)> {
    if METRIC_PARAMS.contains(&name) {
        let metric = match m {
            DependenceModel::BrownResnick { variogram } => &mut variogram.metric,
            DependenceModel::ExtremalT { correlation, .. } => &mut correlation.metric,
        };
        return Ok(match name {
            "tau_s" => (&mut metric.tau_s, Transform::Log),
            "tau_t" => (&mut metric.tau_t, Transform::Log),
            "a" => (&mut metric.a, Transform::Log),
            "eta" => (&mut metric.eta, Transform::Tanh),
            "v1" => (&mut metric.v[0], Transform::Identity),
            _ => (&mut metric.v[1], Transform::Identity),
        });
    }
    let slot = match m {
        DependenceModel::BrownResnick { variogram } => match (&mut variogram.kind, name) {
            (VariogramKind::WhittleMatern { kappa, .. }, "kappa") => Some((kappa, Transform::Log)),
            (VariogramKind::WhittleMatern { nu, .. }, "nu") => Some((nu, Transform::Log)),
            (VariogramKind::Power { tau, .. }, "tau") => Some((tau, Transform::Log)),
            (VariogramKind::Power { nu, .. }, "nu") => Some((nu, Transform::Logistic2)),
            (VariogramKind::PowerExponential { c, .. }, "c") => Some((c, Transform::Log)),
            (VariogramKind::PowerExponential { tau, .. }, "tau") => Some((tau, Transform::Log)),
            (VariogramKind::PowerExponential { nu, .. }, "nu") => Some((nu, Transform::Logistic2)),
            _ => None,
        },
        DependenceModel::ExtremalT { correlation, dof } => match (&mut correlation.kind, name) {
            (_, "dof") => Some((dof, Transform::Log)),
            (CorrelationKind::PowerExponential { range, .. }, "range") => Some((range, Transform::Log)),
            (CorrelationKind::PowerExponential { nu, .. }, "nu") => Some((nu, Transform::Logistic2)),
            (CorrelationKind::Matern { range, .. }, "range") => Some((range, Transform::Log)),
            (CorrelationKind::Matern { nu, .. }, "nu") => Some((nu, Transform::Log)),
            _ => None,
        },
    };
    slot.ok_or_else(|| Error::InvalidInput(format!("model has no parameter named '{name}'")))
}

/// Constant `2^(1-nu)/Gamma(nu)` of the normalized Matérn correlation.
pub fn matern_normalizer(nu: f64) -> f64 {
    2f64.powf(1.0 - nu) / gamma(nu)
}
