//! Samplers for the angular process on the 1-norm simplex.
//!
//! The angular law is drawn as a uniform mixture over anchor sites of
//! spectral functions normalized to one at their anchor. With `Q` the
//! anchored spectral function, `W = Q / |Q|_1` has the angular law and the
//! exponent measure of `{|y|_1 >= 1}` equals the number of sites.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::depmodel::{cov_from_gamma, DependenceModel};
use crate::error::{invalid, Error, Result};
use crate::linalg::psd_factor;
use crate::riskfunc::RiskFunctional;
use crate::sites::SiteSet;
use crate::gpd::XI_ZERO;
use crate::special::gamma;

const MAX_ZERO_REJECTIONS: usize = 1_000_000;

/// A point on the 1-norm simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularSample {
    pub w: Vec<f64>,
}

/// Angular component for linear risk functionals.
///
/// For `xi != 0` the 1-norm is one; for `xi = 0` the risk of `A log w` is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearAngularSample {
    pub w: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Kind {
    /// Lower factor of the Gaussian covariance pinned at site 0, restricted
    /// to sites `1..L`, and the matrix of semi-variogram values.
    BrownResnick { gamma: DMatrix<f64>, lower: DMatrix<f64> },
    /// Per anchor: correlation column and factor of the conditional covariance.
    ExtremalT {
        dof: f64,
        chi: ChiSquared<f64>,
        anchors: Vec<(DVector<f64>, DMatrix<f64>)>,
    },
}

/// Pre-factorized sampler of anchored spectral functions for one design.
#[derive(Debug, Clone)]
pub struct AngularSampler {
    n: usize,
    kind: Kind,
}

impl AngularSampler {
    pub fn new(dep: &DependenceModel, sites: &SiteSet) -> Result<Self> {
        dep.validate()?;
        let n = sites.len();
        if n == 0 {
            return invalid("angular sampler needs at least one site");
        }
        let kind = match dep {
            DependenceModel::BrownResnick { variogram } => {
                let gamma = variogram.matrix(sites)?;
                let sigma = cov_from_gamma(&gamma, 0);
                crate::linalg::check_psd(&sigma, 1e-8)?;
                let sub = sigma.view((1, 1), (n - 1, n - 1)).into_owned();
                Kind::BrownResnick {
                    lower: psd_factor(&sub)?,
                    gamma,
                }
            }
            DependenceModel::ExtremalT { correlation, dof } => {
                let c = correlation.matrix(sites)?;
                let mut anchors = Vec::with_capacity(n);
                for j in 0..n {
                    let col = c.column(j).into_owned();
                    let cond = &c - &col * col.transpose();
                    anchors.push((col, psd_factor(&cond)?));
                }
                Kind::ExtremalT {
                    dof: *dof,
                    chi: ChiSquared::new(dof + 1.0).map_err(|e| Error::InvalidInput(e.to_string()))?,
                    anchors,
                }
            }
        };
        Ok(Self { n, kind })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Log of the spectral function anchored at `j` (value 0 at `j`).
    /// Entries may be `-inf` (extremal-t zeros).
    pub fn sample_log_anchored<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> Result<Vec<f64>> {
        match &self.kind {
            Kind::BrownResnick { gamma, lower } => {
                let m = self.n - 1;
                let mut g = vec![0.0; self.n];
                if m > 0 {
                    let z = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
                    let x = lower * z;
                    g[1..].copy_from_slice(x.as_slice());
                }
                let gj = g[j];
                Ok((0..self.n).map(|l| g[l] - gj - gamma[(l, j)]).collect())
            }
            Kind::ExtremalT { dof, chi, anchors } => {
                let (col, lower) = &anchors[j];
                for _ in 0..MAX_ZERO_REJECTIONS {
                    let gj = chi.sample(rng).sqrt();
                    let z = DVector::from_iterator(self.n, (0..self.n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                    let x = col * gj + lower * z;
                    let logq: Vec<f64> = (0..self.n)
                        .map(|l| {
                            if l == j {
                                0.0
                            } else if x[l] > 0.0 {
                                dof * (x[l] / gj).ln()
                            } else {
                                f64::NEG_INFINITY
                            }
                        })
                        .collect();
                    if gj > 0.0 {
                        return Ok(logq);
                    }
                }
                Err(Error::Sampling("extremal-t anchor draw degenerate after 10^6 attempts".into()))
            }
        }
    }

    /// Anchor chosen uniformly and the log spectral function at that anchor.
    pub fn sample_log_spectral<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, Vec<f64>)> {
        let j = rng.random_range(0..self.n);
        Ok((j, self.sample_log_anchored(j, rng)?))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<AngularSample> {
        let (_, logq) = self.sample_log_spectral(rng)?;
        Ok(AngularSample { w: normalize_log(&logq) })
    }
}

/// `exp(v) / |exp(v)|_1`, computed with a max shift.
pub fn normalize_log(logq: &[f64]) -> Vec<f64> {
    let m = logq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logq.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

pub fn sample_w_br<R: Rng + ?Sized>(dep: &DependenceModel, sites: &SiteSet, rng: &mut R) -> Result<AngularSample> {
    if !matches!(dep, DependenceModel::BrownResnick { .. }) {
        return invalid("sample_w_br needs a Brown-Resnick model");
    }
    AngularSampler::new(dep, sites)?.sample(rng)
}

pub fn sample_w_extremal_t<R: Rng + ?Sized>(dep: &DependenceModel, sites: &SiteSet, rng: &mut R) -> Result<AngularSample> {
    if !matches!(dep, DependenceModel::ExtremalT { .. }) {
        return invalid("sample_w_extremal_t needs an extremal-t model");
    }
    AngularSampler::new(dep, sites)?.sample(rng)
}

/// `E[max(Z, 0)^nu]` for standard normal `Z`.
pub fn et_tilt_normalizer(nu: f64) -> f64 {
    2f64.powf(nu / 2.0 - 1.0) * gamma((nu + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

/// Angular map for linear `r` with `r(A) = 1`.
///
/// `xi != 0`: `w = A y^xi / |A y^xi|_1`. `xi = 0`: `w = exp{log y - r(A log y)}`.
pub fn linear_angular_transform(y: &[f64], xi: f64, a_std: &[f64], r: &RiskFunctional) -> Result<LinearAngularSample> {
    if y.len() != a_std.len() {
        return Err(Error::DimensionMismatch {
            expected: a_std.len(),
            got: y.len(),
        });
    }
    let c = r
        .linear_coefficients(y.len())
        .ok_or_else(|| Error::InvalidInput("linear angular transform needs a linear risk functional".into()))?;
    let ra: f64 = c.iter().zip(a_std).map(|(c, a)| c * a).sum();
    if (ra - 1.0).abs() > 1e-10 {
        return invalid(format!("standardized scale must satisfy r(A) = 1, got {ra}"));
    }
    if y.iter().any(|v| !(*v > 0.0)) {
        return invalid("linear angular transform needs strictly positive input");
    }
    let w = if xi.abs() < XI_ZERO {
        let logy: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let shift: f64 = c.iter().zip(a_std).zip(&logy).map(|((c, a), l)| c * a * l).sum();
        logy.iter().map(|l| (l - shift).exp()).collect()
    } else {
        let v: Vec<f64> = y.iter().zip(a_std).map(|(y, a)| a * y.powf(xi)).collect();
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    };
    Ok(LinearAngularSample { w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depmodel::{Correlation, CorrelationKind, SpaceTimeMetric, Variogram};
    use crate::special::norm_sf;
    use crate::stats::substream;
    use proptest::prelude::*;

    fn br(tau: f64, nu: f64) -> DependenceModel {
        DependenceModel::brown_resnick(Variogram::power(tau, nu).unwrap())
    }

    #[test]
    fn single_site_is_the_unit_vertex() {
        let s = AngularSampler::new(&br(30.0, 1.8), &SiteSet::line(1, 1.0)).unwrap();
        let mut rng = substream(1, 0);
        assert_eq!(s.sample(&mut rng).unwrap().w, vec![1.0]);
        let et = DependenceModel::ExtremalT {
            correlation: Correlation {
                kind: CorrelationKind::PowerExponential { range: 1.0, nu: 1.0 },
                metric: SpaceTimeMetric::default(),
            },
            dof: 2.0,
        };
        let s = AngularSampler::new(&et, &SiteSet::line(1, 1.0)).unwrap();
        assert_eq!(s.sample(&mut rng).unwrap().w, vec![1.0]);
    }

    #[test]
    fn complete_dependence_gives_barycentre() {
        let sites = SiteSet::new(vec![[5.0, 5.0]; 4]);
        let mut rng = substream(2, 0);
        let w = sample_w_br(&br(30.0, 1.8), &sites, &mut rng).unwrap().w;
        assert!(w.iter().all(|v| (v - 0.25).abs() < 1e-15));
        let et = DependenceModel::ExtremalT {
            correlation: Correlation {
                kind: CorrelationKind::PowerExponential { range: 1.0, nu: 1.0 },
                metric: SpaceTimeMetric::default(),
            },
            dof: 3.0,
        };
        let w = sample_w_extremal_t(&et, &sites, &mut rng).unwrap().w;
        assert!(w.iter().all(|v| (v - 0.25).abs() < 1e-12), "{w:?}");
    }

    #[test]
    fn samples_lie_on_simplex() {
        let sites = SiteSet::line(6, 15.0);
        let s = AngularSampler::new(&br(30.0, 1.8), &sites).unwrap();
        let mut rng = substream(3, 0);
        for _ in 0..1000 {
            let w = s.sample(&mut rng).unwrap().w;
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|v| *v >= 0.0));
        }
    }

    /// Pr(W2/W1 > c) under the anchor mixture, by Simpson quadrature of
    /// the two Gaussian log-ratio densities.
    fn ratio_exceedance_quadrature(gamma: f64, c: f64) -> f64 {
        let sd = (2.0 * gamma).sqrt();
        let dens = |x: f64, mu: f64| (-(x - mu).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
        let (lo, hi, n) = (c.ln(), c.ln() + 40.0 * sd + 40.0, 200_000);
        let h = (hi - lo) / n as f64;
        let f = |x: f64| 0.5 * dens(x, -gamma) + 0.5 * dens(x, gamma);
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn two_site_ratio_law() {
        let sites = SiteSet::line(2, 20.0);
        let dep = br(30.0, 1.8);
        let g = Variogram::power(30.0, 1.8).unwrap().at_norm(20.0).unwrap();
        let s = AngularSampler::new(&dep, &sites).unwrap();
        let mut rng = substream(4, 0);
        let n = 100_000;
        for c in [1.0, 2.0] {
            let hits = (0..n)
                .filter(|_| {
                    let w = s.sample(&mut rng).unwrap().w;
                    w[1] / w[0] > c
                })
                .count();
            let p = hits as f64 / n as f64;
            let oracle = ratio_exceedance_quadrature(g, c);
            let closed = 0.5 * (norm_sf((c.ln() + g) / (2.0 * g).sqrt()) + norm_sf((c.ln() - g) / (2.0 * g).sqrt()));
            assert!((oracle - closed).abs() < 1e-8);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((p - oracle).abs() < 4.0 * se, "c={c} p={p} oracle={oracle}");
        }
    }

    /// With Y = R W and R unit Pareto, Pr(Y1 > z, Y2 > z) / Pr(Y1 > z) for
    /// z >= 1 equals E[min W] / E[W1].
    fn induced_extremogram(s: &AngularSampler, n: usize, seed: u64) -> f64 {
        let mut rng = substream(seed, 0);
        let (mut num, mut den) = (0.0, 0.0);
        for _ in 0..n {
            let w = s.sample(&mut rng).unwrap().w;
            num += w[0].min(w[1]);
            den += w[0];
        }
        num / den
    }

    #[test]
    fn br_extremogram_matches_closed_form() {
        let sites = SiteSet::line(2, 40.0);
        let s = AngularSampler::new(&br(30.0, 1.8), &sites).unwrap();
        let g = Variogram::power(30.0, 1.8).unwrap().at_norm(40.0).unwrap();
        let pi = induced_extremogram(&s, 200_000, 5);
        assert!((pi - crate::depmodel::br_extremogram(g)).abs() < 0.01, "{pi}");
    }

    #[test]
    fn extremal_t_extremogram_matches_closed_form() {
        // range tiny so that the correlation at lag 1 is zero to machine precision
        let et = DependenceModel::ExtremalT {
            correlation: Correlation {
                kind: CorrelationKind::PowerExponential { range: 1e-3, nu: 1.0 },
                metric: SpaceTimeMetric::default(),
            },
            dof: 1.0,
        };
        let s = AngularSampler::new(&et, &SiteSet::line(2, 1.0)).unwrap();
        let pi = induced_extremogram(&s, 200_000, 6);
        let target = crate::depmodel::et_extremogram(0.0, 1.0);
        assert!((pi - target).abs() < 0.01, "{pi} vs {target}");
    }

    #[test]
    fn tilt_normalizer_against_quadrature() {
        for nu in [0.5, 1.0, 2.0, 3.7] {
            // x = t^2 removes the endpoint singularity of x^nu
            let (n, hi) = (100_000, 7.0);
            let h = hi / n as f64;
            let f = |t: f64| 2.0 * t * (t * t).powf(nu) * (-t.powi(4) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let mut s = f(0.0) + f(hi);
            for i in 1..n {
                s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let q = s * h / 3.0;
            assert!((et_tilt_normalizer(nu) - q).abs() < 1e-9 * q.max(1.0), "{nu}");
        }
        assert!((et_tilt_normalizer(1.0) - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn linear_transform_examples() {
        let r = RiskFunctional::sum(2);
        let w = linear_angular_transform(&[1.0, 1.0], 1.0, &[0.5, 0.5], &r).unwrap().w;
        assert_eq!(w, vec![0.5, 0.5]);
        let w = linear_angular_transform(&[3.0, 3.0], 0.0, &[0.5, 0.5], &r).unwrap().w;
        assert!(w.iter().all(|v| (v - 1.0).abs() < 1e-15));
        let w = linear_angular_transform(&[1.0, 2.0], 2.0, &[0.5, 0.5], &r).unwrap().w;
        assert!((w[0] - 0.2).abs() < 1e-15 && (w[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn linear_transform_errors() {
        let r = RiskFunctional::sum(2);
        assert!(linear_angular_transform(&[1.0, 1.0], 1.0, &[0.6, 0.5], &r).is_err());
        assert!(linear_angular_transform(&[0.0, 1.0], 1.0, &[0.5, 0.5], &r).is_err());
        assert!(linear_angular_transform(&[1.0, 1.0], 1.0, &[0.5, 0.5], &RiskFunctional::Supremum).is_err());
    }

    proptest! {
        #[test]
        fn log_form_zeroes_risk(y in proptest::collection::vec(0.01..50.0f64, 4), wts in proptest::collection::vec(0.1..1.0f64, 4)) {
            let tot: f64 = wts.iter().sum();
            let r = RiskFunctional::weighted_mean(wts.iter().map(|v| v / tot).collect()).unwrap();
            let c = r.linear_coefficients(4).unwrap();
            let ra: f64 = c.iter().zip(&wts).map(|(c, a)| c * a).sum();
            let a: Vec<f64> = wts.iter().map(|v| v / ra).collect();
            let w = linear_angular_transform(&y, 0.0, &a, &r).unwrap().w;
            let s: f64 = c.iter().zip(&a).zip(&w).map(|((c, a), w)| c * a * w.ln()).sum();
            prop_assert!(s.abs() < 1e-10);
        }

        #[test]
        fn linear_transform_invariants(y in proptest::collection::vec(0.01..50.0f64, 3), xi in -1.0..1.0f64, t in 0.1..10.0f64) {
            let r = RiskFunctional::uniform_mean(3);
            let a = [1.0, 1.0, 1.0];
            let w = linear_angular_transform(&y, xi, &a, &r).unwrap().w;
            if xi.abs() < XI_ZERO {
                let s: f64 = w.iter().map(|v| v.ln()).sum::<f64>() / 3.0;
                prop_assert!(s.abs() < 1e-10);
            } else {
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let ty: Vec<f64> = y.iter().map(|v| v * t).collect();
                let w2 = linear_angular_transform(&ty, xi, &a, &r).unwrap().w;
                for (p, q) in w.iter().zip(&w2) {
                    prop_assert!((p - q).abs() < 1e-12);
                }
            }
        }
    }
}
