//! Simulation of generalized r-Pareto processes.
//!
//! Every sample `i` draws from its own RNG substream `(seed, i)` so results
//! are identical for any thread count.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::AngularSampler;
use crate::depmodel::{cov_from_gamma, DependenceModel};
use crate::error::{invalid, Error, Result};
use crate::gpd::XI_ZERO;
use crate::linalg::psd_factor;
use crate::riskfunc::{check_validity, RiskFunctional, Validity};
use crate::sites::{FieldObservation, SiteSet};
use crate::stats::{substream, unit_pareto, SimRng};

const MAX_PROPOSALS: u64 = 1_000_000;
const MAX_ORACLE_SITES: usize = 5;
const MAX_ORACLE_ARRIVALS: usize = 1_000_000;

/// `(y^xi - 1)/xi` from `log y`, with the logarithm at `xi = 0`.
#[inline]
pub fn box_cox_log(xi: f64, log_y: f64) -> f64 {
    if xi.abs() < XI_ZERO {
        log_y
    } else {
        (xi * log_y).exp_m1() / xi
    }
}

/// Generalized r-Pareto process on a fixed design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub xi: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub r: RiskFunctional,
    pub dep: DependenceModel,
    pub sites: SiteSet,
}

impl ProcessSpec {
    pub fn new(xi: f64, a: Vec<f64>, b: Vec<f64>, r: RiskFunctional, dep: DependenceModel, sites: SiteSet) -> Result<Self> {
        let spec = Self { xi, a, b, r, dep, sites };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sites.len();
        for (name, v) in [("a", &self.a), ("b", &self.b)] {
            if v.len() != n {
                return invalid(format!("{name} has {} entries for {n} sites", v.len()));
            }
        }
        if !self.xi.is_finite() {
            return invalid("tail index must be finite");
        }
        if self.a.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return invalid("scale function a must be positive");
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return invalid("location function b must be finite");
        }
        self.r.check_parameters()?;
        self.r.evaluate(&self.a)?;
        if matches!(self.r, RiskFunctional::FourierFilteredMean { .. }) {
            self.r.check_sites(&self.sites)?;
        }
        self.dep.validate()?;
        let ra = self.ra();
        if !(ra > 0.0) {
            return invalid(format!("r(a) must be positive, got {ra}"));
        }
        if let Validity::Invalid(msg) = check_validity(&self.r, self.xi, &self.a_std())? {
            return invalid(format!("risk functional is not valid for this process: {msg}"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// `r(a)`.
    pub fn ra(&self) -> f64 {
        self.r.value(&self.a)
    }

    /// `A = a / r(a)`.
    pub fn a_std(&self) -> Vec<f64> {
        let ra = self.ra();
        self.a.iter().map(|v| v / ra).collect()
    }

    pub fn rb(&self) -> f64 {
        self.r.value(&self.b)
    }

    /// `P = a (Y^xi - 1)/xi + b` from `log Y`.
    pub fn field_from_log_y(&self, log_y: &[f64]) -> Vec<f64> {
        log_y
            .iter()
            .zip(&self.a)
            .zip(&self.b)
            .map(|((l, a), b)| b + a * box_cox_log(self.xi, *l))
            .collect()
    }

    /// Standardized risk `r((x - b)/r(a))`; non-negative on the exceedance set.
    pub fn standardized_risk(&self, x: &[f64]) -> f64 {
        let ra = self.ra();
        let z: Vec<f64> = x.iter().zip(&self.b).map(|(x, b)| (x - b) / ra).collect();
        self.r.value(&z)
    }

    /// Smallest `t` with `t w` in the standardized exceedance set, given
    /// `log w`; `None` when the ray never enters it.
    pub fn ray_entry(&self, log_w: &[f64]) -> Option<f64> {
        ray_entry_impl(&self.r, self.xi, &self.a_std(), log_w)
    }
}

fn ray_entry_impl(r: &RiskFunctional, xi: f64, a_std: &[f64], log_w: &[f64]) -> Option<f64> {
    if let Some(c) = r.linear_coefficients(log_w.len()) {
        if xi.abs() < XI_ZERO {
            let s: f64 = c.iter().zip(a_std).zip(log_w).map(|((c, a), l)| if *c * a == 0.0 { 0.0 } else { c * a * l }).sum();
            return if s.is_finite() { Some((-s).exp()) } else { None };
        }
        let s: f64 = c.iter().zip(a_std).zip(log_w).map(|((c, a), l)| if *c * a == 0.0 { 0.0 } else { c * a * (xi * l).exp() }).sum();
        return if s > 0.0 && s.is_finite() { Some(s.powf(-1.0 / xi)) } else { None };
    }
    let g = |log_t: f64| {
        let z: Vec<f64> = a_std.iter().zip(log_w).map(|(a, l)| a * box_cox_log(xi, log_t + l)).collect();
        r.value(&z)
    };
    // coarse scan for the first entry, then bisection on log t
    let (lo, hi, steps) = (-60.0, 60.0, 480);
    let h = (hi - lo) / steps as f64;
    let mut prev = lo;
    if g(lo) >= 0.0 {
        return Some(lo.exp());
    }
    for k in 1..=steps {
        let t = lo + k as f64 * h;
        if g(t) >= 0.0 {
            let (mut a, mut b) = (prev, t);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if g(m) >= 0.0 {
                    b = m;
                } else {
                    a = m;
                }
                if b - a < 1e-13 {
                    break;
                }
            }
            return Some(b.exp());
        }
        prev = t;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum BoundMethod {
    UserSupplied,
    NumericRay { n_directions: usize, safety: f64 },
}

/// Radius `u` with the standardized exceedance set inside `{|y|_1 >= u}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimBound {
    pub u: f64,
    pub method: BoundMethod,
}

impl SimBound {
    pub fn user(u: f64) -> Result<Self> {
        if !(u > 0.0) || !u.is_finite() {
            return invalid(format!("simulation bound must be positive, got {u}"));
        }
        Ok(Self {
            u,
            method: BoundMethod::UserSupplied,
        })
    }
}

/// Ray-search bound: the minimum ray entry over the simplex vertices and
/// `n_directions` flat-Dirichlet directions, times `safety`.
///
/// Direction sampling can miss the true minimum, so the bound carries a
/// coverage caveat; `safety < 1` and the post-hoc audit in the simulators
/// guard against it.
pub fn sim_bound(spec: &ProcessSpec, n_directions: usize, safety: f64, seed: u64) -> Result<SimBound> {
    if !(safety > 0.0 && safety <= 1.0) {
        return invalid(format!("safety factor must lie in (0, 1], got {safety}"));
    }
    let n = spec.len();
    let a_std = spec.a_std();
    let vertex = |k: usize| -> Vec<f64> { (0..n).map(|l| if l == k { 0.0 } else { f64::NEG_INFINITY }).collect() };
    let mut best = f64::INFINITY;
    for k in 0..n {
        if let Some(t) = ray_entry_impl(&spec.r, spec.xi, &a_std, &vertex(k)) {
            best = best.min(t);
        }
    }
    let from_dirs: f64 = (0..n_directions)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let e: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
            let s: f64 = e.iter().sum();
            let log_w: Vec<f64> = e.iter().map(|v| (v / s).ln()).collect();
            ray_entry_impl(&spec.r, spec.xi, &a_std, &log_w).unwrap_or(f64::INFINITY)
        })
        .reduce(|| f64::INFINITY, f64::min);
    best = best.min(from_dirs);
    if !best.is_finite() {
        return Err(Error::Sampling("r-exceedance set empty: no ray enters it".into()));
    }
    Ok(SimBound {
        u: safety * best,
        method: BoundMethod::NumericRay { n_directions, safety },
    })
}

/// Samples plus acceptance diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub samples: Vec<FieldObservation>,
    pub proposals: u64,
    pub acceptance_rate: f64,
    pub bound: Option<SimBound>,
    /// Smallest ray entry over accepted samples divided by `u`; below one
    /// means the bound cut into the exceedance set.
    pub min_bound_margin: f64,
    /// Whole-storm redraws caused by a later slice exceeding the centre.
    #[serde(default)]
    pub storm_rejections: u64,
}

struct Alg1Draw {
    log_y: Vec<f64>,
    field: Vec<f64>,
    proposals: u64,
    margin: f64,
}

struct Alg1Context<'a> {
    spec: &'a ProcessSpec,
    sampler: AngularSampler,
    a_std: Vec<f64>,
    log_u: f64,
    u: f64,
}

impl<'a> Alg1Context<'a> {
    fn new(spec: &'a ProcessSpec, bound: &SimBound) -> Result<Self> {
        spec.validate()?;
        if !(bound.u > 0.0) {
            return invalid("simulation bound must be positive");
        }
        Ok(Self {
            sampler: AngularSampler::new(&spec.dep, &spec.sites)?,
            a_std: spec.a_std(),
            log_u: bound.u.ln(),
            u: bound.u,
            spec,
        })
    }

    /// One accepted draw: proposal `Y = u R W`, kept when the field it maps
    /// to has non-negative standardized risk.
    fn draw(&self, rng: &mut SimRng) -> Result<Alg1Draw> {
        for k in 1..=MAX_PROPOSALS {
            let log_r = unit_pareto(rng).ln();
            let (_, logq) = self.sampler.sample_log_spectral(rng)?;
            let m = logq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + logq.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            let log_w: Vec<f64> = logq.iter().map(|v| v - lse).collect();
            let log_y: Vec<f64> = log_w.iter().map(|l| self.log_u + log_r + l).collect();
            let field = self.spec.field_from_log_y(&log_y);
            if self.spec.standardized_risk(&field) >= 0.0 {
                let entry = ray_entry_impl(&self.spec.r, self.spec.xi, &self.a_std, &log_w).unwrap_or(f64::INFINITY);
                return Ok(Alg1Draw {
                    log_y,
                    field,
                    proposals: k,
                    margin: entry / self.u,
                });
            }
        }
        Err(Error::Sampling(format!(
            "acceptance rate below {:.0e} after {MAX_PROPOSALS} proposals; use a larger bound u or a different functional",
            1.0 / MAX_PROPOSALS as f64
        )))
    }
}

fn collect_output(draws: Vec<(FieldObservation, u64, f64, u64)>, bound: Option<SimBound>) -> SimOutput {
    let proposals: u64 = draws.iter().map(|d| d.1).sum();
    let min_margin = draws.iter().map(|d| d.2).fold(f64::INFINITY, f64::min);
    let storm_rejections = draws.iter().map(|d| d.3).sum();
    let n = draws.len();
    SimOutput {
        samples: draws.into_iter().map(|d| d.0).collect(),
        proposals,
        acceptance_rate: if proposals > 0 { n as f64 / proposals as f64 } else { f64::NAN },
        bound,
        min_bound_margin: min_margin,
        storm_rejections,
    }
}

/// Accept-reject simulation for any valid risk functional.
pub fn simulate_alg1(spec: &ProcessSpec, bound: &SimBound, n: usize, seed: u64) -> Result<SimOutput> {
    let ctx = Alg1Context::new(spec, bound)?;
    let draws = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let d = ctx.draw(&mut rng)?;
            Ok((FieldObservation::new(i, 0.0, d.field), d.proposals, d.margin, 0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(collect_output(draws, Some(*bound)))
}

/// Two-stage simulation for linear risk functionals.
///
/// Stage one keeps the angular part of an accepted Algorithm 1 proposal;
/// stage two attaches an independent unit Pareto radius, or the radius
/// that puts the risk exactly at `risk_level`.
pub fn simulate_alg2(spec: &ProcessSpec, bound: &SimBound, risk_level: Option<f64>, n: usize, seed: u64) -> Result<SimOutput> {
    let c = spec
        .r
        .linear_coefficients(spec.len())
        .ok_or_else(|| Error::InvalidInput("Algorithm 2 needs a linear risk functional".into()))?;
    let ctx = Alg1Context::new(spec, bound)?;
    let (xi, ra, rb) = (spec.xi, spec.ra(), spec.rb());
    let a_std = spec.a_std();
    let fixed_log_r2 = match risk_level {
        None => None,
        Some(rho) => {
            if !(rho >= rb) {
                return invalid(format!("risk level {rho} is below r(b) = {rb}"));
            }
            if xi.abs() < XI_ZERO {
                Some((rho - rb) / ra)
            } else {
                let base = 1.0 + xi * (rho - rb) / ra;
                if !(base > 0.0) {
                    return invalid(format!("risk level {rho} lies beyond the upper endpoint of the risk distribution"));
                }
                Some(base.ln() / xi)
            }
        }
    };
    let csum: f64 = c.iter().sum();
    let draws = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let d = ctx.draw(&mut rng)?;
            let log_r2 = fixed_log_r2.unwrap_or_else(|| unit_pareto(&mut rng).ln());
            let mut p: Vec<f64> = if xi.abs() < XI_ZERO {
                let shift: f64 = c.iter().zip(&a_std).zip(&d.log_y).map(|((c, a), l)| c * a * l).sum();
                d.log_y
                    .iter()
                    .zip(&spec.a)
                    .zip(&spec.b)
                    .map(|((l, a), b)| b + a * (log_r2 + l - shift))
                    .collect()
            } else {
                let logv: Vec<f64> = a_std.iter().zip(&d.log_y).map(|(a, l)| a.ln() + xi * l).collect();
                let w2 = crate::angular::normalize_log(&logv);
                let rw: f64 = c.iter().zip(&w2).map(|(c, w)| c * w).sum();
                let scale = ra / xi * (xi * log_r2).exp() / rw;
                w2.iter()
                    .zip(&spec.a)
                    .zip(&spec.b)
                    .map(|((w, a), b)| scale * w + b - a / xi)
                    .collect()
            };
            if let Some(rho) = risk_level {
                // remove rounding drift so that r(P) = rho holds to machine precision
                for _ in 0..2 {
                    let drift = rho - spec.r.value(&p);
                    p.iter_mut().for_each(|v| *v += drift / csum);
                }
            }
            Ok((FieldObservation::new(i, 0.0, p), d.proposals, d.margin, 0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(collect_output(draws, Some(*bound)))
}

/// Space-time process whose risk is a spatial functional of the centre slice.
///
/// Fields are laid out as `t * n_space + s` with `times` in the given order;
/// `a`, `b` and `r` act on one spatial slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StormSpec {
    pub xi: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub r: RiskFunctional,
    pub dep: DependenceModel,
    pub space: SiteSet,
    pub times: Vec<f64>,
    pub centre: usize,
}

impl StormSpec {
    pub fn space_time_sites(&self) -> SiteSet {
        SiteSet::space_time(&self.space, &self.times)
    }

    /// Spatial process at the centre time.
    pub fn centre_spec(&self) -> Result<ProcessSpec> {
        let t = self.times.get(self.centre).copied().ok_or_else(|| Error::InvalidInput("centre index out of range".into()))?;
        let sites = self.space.clone().with_times(vec![t; self.space.len()])?;
        ProcessSpec::new(self.xi, self.a.clone(), self.b.clone(), self.r.clone(), self.dep, sites)
    }

    /// Visiting order of the non-centre slices: backwards from the centre,
    /// then forwards.
    pub fn slice_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.centre).rev().collect();
        order.extend(self.centre + 1..self.times.len());
        order
    }
}

struct StormConditional {
    /// Site indices (space-time layout) of the non-centre slices, in visiting order.
    rest: Vec<usize>,
    /// `Sigma_RC Sigma_CC^{-1}` for the log-field pinned at the first centre site.
    gain: DMatrix<f64>,
    lower: DMatrix<f64>,
    gamma_to_ref: Vec<f64>,
    gamma_rest_to_ref: Vec<f64>,
}

fn storm_conditional(spec: &StormSpec) -> Result<StormConditional> {
    let DependenceModel::BrownResnick { variogram } = &spec.dep else {
        return invalid("conditional storm simulation needs a Brown-Resnick model");
    };
    let ns = spec.space.len();
    let sites = spec.space_time_sites();
    let gamma = variogram.matrix(&sites)?;
    let reference = spec.centre * ns;
    let sigma = cov_from_gamma(&gamma, reference);
    let centre: Vec<usize> = (1..ns).map(|s| reference + s).collect();
    let rest: Vec<usize> = spec.slice_order().iter().flat_map(|&t| (0..ns).map(move |s| t * ns + s)).collect();
    let pick = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| sigma[(rows[i], cols[j])]);
    let s_cc = pick(&centre, &centre);
    let s_rc = pick(&rest, &centre);
    let s_rr = pick(&rest, &rest);
    let gain = if centre.is_empty() {
        DMatrix::zeros(rest.len(), 0)
    } else {
        let pinv = s_cc
            .clone()
            .pseudo_inverse(1e-12 * s_cc.trace().abs().max(1e-300))
            .map_err(|e| Error::Numerical(e.to_string()))?;
        &s_rc * pinv
    };
    let schur = &s_rr - &gain * s_rc.transpose();
    let schur = (&schur + schur.transpose()) * 0.5;
    Ok(StormConditional {
        lower: psd_factor(&schur)?,
        gamma_to_ref: (0..ns).map(|s| gamma[(reference + s, reference)]).collect(),
        gamma_rest_to_ref: rest.iter().map(|&l| gamma[(l, reference)]).collect(),
        rest,
        gain,
    })
}

/// Space-time storms whose spatial risk peaks at the centre time.
///
/// The centre slice is an Algorithm 1 draw of the spatial process; the other
/// slices follow from Gaussian conditioning of the log-field on it, visited
/// backwards then forwards in time. A storm with a larger risk at any other
/// time is discarded whole and redrawn.
pub fn simulate_storm_conditional(spec: &StormSpec, bound: &SimBound, n: usize, seed: u64) -> Result<SimOutput> {
    let centre_spec = spec.centre_spec()?;
    let ctx = Alg1Context::new(&centre_spec, bound)?;
    let cond = storm_conditional(spec)?;
    let ns = spec.space.len();
    let nt = spec.times.len();
    let max_attempts: u64 = 10_000;
    let t_centre = spec.times[spec.centre];
    let draws = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let mut proposals = 0;
            let mut margin = f64::INFINITY;
            for attempt in 0..max_attempts {
                let d = ctx.draw(&mut rng)?;
                proposals += d.proposals;
                margin = margin.min(d.margin);
                let mut field = vec![0.0; ns * nt];
                field[spec.centre * ns..(spec.centre + 1) * ns].copy_from_slice(&d.field);
                if nt == 1 {
                    return Ok((FieldObservation::new(i, t_centre, field), proposals, margin, attempt));
                }
                let x_ref = d.log_y[0];
                let dc = DVector::from_iterator(ns - 1, (1..ns).map(|s| d.log_y[s] - x_ref + cond.gamma_to_ref[s]));
                let m = cond.rest.len();
                let z = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let dr = &cond.gain * dc + &cond.lower * z;
                let peak = centre_spec.r.value(&d.field);
                let mut ok = true;
                for (k, &l) in cond.rest.iter().enumerate() {
                    let s = l % ns;
                    let log_y = x_ref + dr[k] - cond.gamma_rest_to_ref[k];
                    field[l] = spec.b[s] + spec.a[s] * box_cox_log(spec.xi, log_y);
                }
                for t in spec.slice_order() {
                    if spec.r.value(&field[t * ns..(t + 1) * ns]) > peak {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    return Ok((FieldObservation::new(i, t_centre, field), proposals, margin, attempt));
                }
            }
            Err(Error::Sampling(format!(
                "storm rejection rate above {}: no storm peaked at the centre time in {max_attempts} attempts",
                1.0 - 1.0 / max_attempts as f64
            )))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(collect_output(draws, Some(*bound)))
}

/// Max-stable process by the Poisson construction: arrivals `R_j = L/Gamma_j`
/// with angular parts from the anchor mixture, mapped through the marginal
/// transform and combined by pointwise maxima.
///
/// Because every angular coordinate is at most one, the construction stops
/// exactly once `R_j` falls below the smallest running maximum.
pub fn max_stable_oracle(spec: &ProcessSpec, seed: u64, replicate: u64) -> Result<FieldObservation> {
    let n = spec.len();
    if n > MAX_ORACLE_SITES {
        return invalid(format!("max-stable oracle is limited to {MAX_ORACLE_SITES} sites, got {n}"));
    }
    let sampler = AngularSampler::new(&spec.dep, &spec.sites)?;
    let mut rng = substream(seed, replicate);
    let mut ymax = vec![0.0f64; n];
    let mut arrival = 0.0;
    let lf = n as f64;
    for _ in 0..MAX_ORACLE_ARRIVALS {
        let gap: f64 = Exp1.sample(&mut rng);
        arrival += gap;
        let radius = lf / arrival;
        let floor = ymax.iter().copied().fold(f64::INFINITY, f64::min);
        if radius < floor {
            let log_y: Vec<f64> = ymax.iter().map(|v| v.ln()).collect();
            return Ok(FieldObservation::new(replicate as usize, 0.0, spec.field_from_log_y(&log_y)));
        }
        let w = sampler.sample(&mut rng)?.w;
        for (m, w) in ymax.iter_mut().zip(&w) {
            *m = m.max(radius * w);
        }
    }
    // unreachable for models with positive angular coordinates; remaining
    // arrivals are below L/Gamma and only touch sites still near zero
    let log_y: Vec<f64> = ymax.iter().map(|v| v.ln()).collect();
    Ok(FieldObservation::new(replicate as usize, 0.0, spec.field_from_log_y(&log_y)))
}

/// Forward marginal map `y = {1 + xi (x - b)/a}_+^{1/xi}` (`exp{(x-b)/a}` at `xi = 0`).
pub fn transform_t(xi: f64, a: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(a)
        .zip(b)
        .map(|((x, a), b)| {
            let z = (x - b) / a;
            if xi.abs() < XI_ZERO {
                z.exp()
            } else {
                let base = 1.0 + xi * z;
                if base <= 0.0 {
                    0.0
                } else {
                    (base.ln() / xi).exp()
                }
            }
        })
        .collect()
}

/// Inverse marginal map `x = a (y^xi - 1)/xi + b`. For `xi > 0` the value
/// `y = 0` maps to the floor `b - a/xi`; otherwise `y` must be positive.
pub fn transform_t_inv(xi: f64, a: &[f64], b: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    y.iter()
        .zip(a)
        .zip(b)
        .map(|((y, a), b)| {
            if *y > 0.0 && y.is_finite() {
                Ok(b + a * box_cox_log(xi, y.ln()))
            } else if *y == 0.0 && xi > XI_ZERO {
                Ok(b - a / xi)
            } else {
                invalid(format!("inverse transform needs positive input, got {y}"))
            }
        })
        .collect()
}

/// Monte Carlo estimate of `Lambda(A_r)` as `L E[1/t*(W)]` with `t*` the
/// ray entry of the angular draw; returns estimate and standard error.
pub fn lambda_exceedance_mc(spec: &ProcessSpec, n: usize, seed: u64) -> Result<(f64, f64)> {
    let sampler = AngularSampler::new(&spec.dep, &spec.sites)?;
    let a_std = spec.a_std();
    let vals = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let (_, logq) = sampler.sample_log_spectral(&mut rng)?;
            let m = logq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + logq.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            let log_w: Vec<f64> = logq.iter().map(|v| v - lse).collect();
            Ok(ray_entry_impl(&spec.r, spec.xi, &a_std, &log_w).map_or(0.0, |t| 1.0 / t))
        })
        .collect::<Result<Vec<f64>>>()?;
    let lf = spec.len() as f64;
    let mean = crate::stats::mean(&vals);
    let se = (crate::stats::variance(&vals) / n as f64).sqrt();
    Ok((lf * mean, lf * se))
}
