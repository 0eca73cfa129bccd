use nalgebra::{DMatrix, DVector};

use crate::depmodel::{cov_from_gamma, Variogram};
use crate::error::{invalid, Error, Result};
use crate::linalg::spd_inverse_logdet;
use crate::sites::SiteSet;

/// `log lambda(y)` with its gradient and the diagonal of its Hessian in `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityEval {
    pub log: f64,
    pub grad: Vec<f64>,
    pub hess_diag: Vec<f64>,
}

/// Brown–Resnick intensity for a fixed variogram and design, anchored at
/// one site:
///
/// `log lambda(y) = -2 log y_k - sum_{l != k} log y_l + log phi(y~; Sigma~)`
///
/// with `y~_l = log(y_l/y_k) + gamma(s_l, s_k)` and `Sigma~` the increment
/// covariance pinned at the anchor. The value does not depend on the anchor.
#[derive(Debug, Clone)]
pub struct BrIntensity {
    anchor: usize,
    others: Vec<usize>,
    gamma_anchor: Vec<f64>,
    q: DMatrix<f64>,
    q_total: f64,
    log_norm: f64,
}

impl BrIntensity {
    pub fn new(variogram: &Variogram, sites: &SiteSet, anchor: usize) -> Result<Self> {
        let n = sites.len();
        if n < 2 {
            return invalid("Brown-Resnick intensity needs at least two sites");
        }
        if anchor >= n {
            return invalid(format!("anchor {anchor} out of range for {n} sites"));
        }
        let g = variogram.matrix(sites)?;
        Self::from_gamma(&g, anchor)
    }

    /// From a precomputed semi-variogram matrix.
    pub fn from_gamma(g: &DMatrix<f64>, anchor: usize) -> Result<Self> {
        let n = g.nrows();
        let others: Vec<usize> = (0..n).filter(|&l| l != anchor).collect();
        let full = cov_from_gamma(g, anchor);
        let sub = full.select_rows(&others).select_columns(&others);
        let (q, logdet) = spd_inverse_logdet(&sub).map_err(|e| match e {
            Error::NotPositiveDefinite { .. } => Error::Numerical(format!("singular increment covariance: {e}")),
            other => other,
        })?;
        let m = others.len() as f64;
        Ok(Self {
            anchor,
            gamma_anchor: others.iter().map(|&l| g[(l, anchor)]).collect(),
            q_total: q.iter().sum(),
            log_norm: -0.5 * (m * (2.0 * std::f64::consts::PI).ln() + logdet),
            q,
            others,
        })
    }

    pub fn len(&self) -> usize {
        self.others.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: y.len(),
            });
        }
        if y.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return invalid("intensity needs strictly positive finite y");
        }
        Ok(())
    }

    fn tilde(&self, y: &[f64]) -> DVector<f64> {
        let lk = y[self.anchor].ln();
        DVector::from_iterator(
            self.others.len(),
            self.others.iter().zip(&self.gamma_anchor).map(|(&l, g)| y[l].ln() - lk + g),
        )
    }

    pub fn log_density(&self, y: &[f64]) -> Result<f64> {
        self.check(y)?;
        let t = self.tilde(y);
        let v = &self.q * &t;
        let quad = t.dot(&v);
        let logs: f64 = self.others.iter().map(|&l| y[l].ln()).sum();
        Ok(-2.0 * y[self.anchor].ln() - logs - 0.5 * quad + self.log_norm)
    }

    pub fn eval(&self, y: &[f64]) -> Result<IntensityEval> {
        self.check(y)?;
        let t = self.tilde(y);
        let v = &self.q * &t;
        let quad = t.dot(&v);
        let n = self.len();
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut logs = 0.0;
        for (m, &l) in self.others.iter().enumerate() {
            let yl = y[l];
            logs += yl.ln();
            grad[l] = -(1.0 + v[m]) / yl;
            hess[l] = (1.0 + v[m] - self.q[(m, m)]) / (yl * yl);
        }
        let yk = y[self.anchor];
        let vsum = v.sum();
        grad[self.anchor] = (vsum - 2.0) / yk;
        hess[self.anchor] = (2.0 - vsum - self.q_total) / (yk * yk);
        Ok(IntensityEval {
            log: -2.0 * yk.ln() - logs - 0.5 * quad + self.log_norm,
            grad,
            hess_diag: hess,
        })
    }
}

/// Brown–Resnick `log lambda(y)`, gradient and Hessian diagonal, anchored at
/// the first site.
pub fn br_intensity(variogram: &Variogram, sites: &SiteSet, y: &[f64]) -> Result<IntensityEval> {
    BrIntensity::new(variogram, sites, 0)?.eval(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::AngularSampler;
    use crate::depmodel::{hr_exponent, DependenceModel};
    use crate::stats::substream;
    use proptest::prelude::*;
    use rand::Rng;

    fn design(n: usize, seed: u64) -> SiteSet {
        let mut rng = substream(seed, 0);
        SiteSet::new((0..n).map(|_| [rng.random::<f64>() * 100.0, rng.random::<f64>() * 100.0]).collect())
    }

    #[test]
    fn anchor_invariance() {
        let v = Variogram::power(30.0, 1.5).unwrap();
        let s = design(6, 3);
        let mut rng = substream(3, 1);
        for _ in 0..10 {
            let y: Vec<f64> = (0..6).map(|_| 0.1 + 5.0 * rng.random::<f64>()).collect();
            let a = BrIntensity::new(&v, &s, 0).unwrap().log_density(&y).unwrap();
            let b = BrIntensity::new(&v, &s, 1).unwrap().log_density(&y).unwrap();
            let c = BrIntensity::new(&v, &s, 5).unwrap().eval(&y).unwrap();
            assert!((a - b).abs() < 1e-8 && (a - c.log).abs() < 1e-8, "{a} {b} {}", c.log);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let v = Variogram::power_exponential(2.0, 20.0, 1.2).unwrap();
        let s = design(5, 7);
        let mut rng = substream(7, 1);
        let mut worst = 0.0f64;
        for anchor in [0, 3] {
            let bi = BrIntensity::new(&v, &s, anchor).unwrap();
            for _ in 0..20 {
                let y: Vec<f64> = (0..5).map(|_| 0.2 + 4.0 * rng.random::<f64>()).collect();
                let e = bi.eval(&y).unwrap();
                for l in 0..5 {
                    let h = 1e-5 * y[l];
                    let mut yp = y.clone();
                    let mut ym = y.clone();
                    yp[l] += h;
                    ym[l] -= h;
                    let fp = bi.log_density(&yp).unwrap();
                    let fm = bi.log_density(&ym).unwrap();
                    let g = (fp - fm) / (2.0 * h);
                    worst = worst.max((g - e.grad[l]).abs() / e.grad[l].abs().max(1e-3));
                    let gp = bi.eval(&yp).unwrap().grad[l];
                    let gm = bi.eval(&ym).unwrap().grad[l];
                    let hd = (gp - gm) / (2.0 * h);
                    assert!((hd - e.hess_diag[l]).abs() < 1e-5 * e.hess_diag[l].abs().max(1.0), "{hd} vs {}", e.hess_diag[l]);
                }
            }
        }
        assert!(worst < 1e-6, "max relative gradient error {worst}");
    }

    proptest! {
        #[test]
        fn homogeneity(t in 0.01..100.0f64, seed in 0u64..1000) {
            let v = Variogram::power(25.0, 1.0).unwrap();
            let s = design(4, seed);
            let bi = BrIntensity::new(&v, &s, 0).unwrap();
            let mut rng = substream(seed, 2);
            let y: Vec<f64> = (0..4).map(|_| 0.1 + rng.random::<f64>()).collect();
            let ty: Vec<f64> = y.iter().map(|v| v * t).collect();
            let lhs = bi.log_density(&ty).unwrap();
            let rhs = bi.log_density(&y).unwrap() - 5.0 * t.ln();
            prop_assert!((lhs - rhs).abs() < 1e-8);
        }
    }

    /// Mass of `{max(y/z) >= 1}` by tensor Simpson quadrature of
    /// `lambda(e^s, e^t) e^{s+t}` on the union of three rectangles.
    fn quadrature_mass(bi: &BrIntensity, z: [f64; 2]) -> f64 {
        let f = |s: f64, t: f64| bi.log_density(&[s.exp(), t.exp()]).unwrap().exp() * (s + t).exp();
        let simpson2 = |s0: f64, s1: f64, t0: f64, t1: f64, n: usize| {
            let hs = (s1 - s0) / n as f64;
            let ht = (t1 - t0) / n as f64;
            let w = |i: usize| if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let mut acc = 0.0;
            for i in 0..=n {
                for j in 0..=n {
                    acc += w(i) * w(j) * f(s0 + hs * i as f64, t0 + ht * j as f64);
                }
            }
            acc * hs * ht / 9.0
        };
        let (a, b) = (z[0].ln(), z[1].ln());
        let span = 40.0;
        // {y1 >= z1} plus {y1 < z1, y2 >= z2}
        simpson2(a, a + span, b - span, b + span, 800) + simpson2(a - span, a, b, b + span, 800)
    }

    #[test]
    fn two_site_mass_consistency() {
        let v = Variogram::power(30.0, 1.8).unwrap();
        let s = SiteSet::line(2, 20.0);
        let gamma = v.eval([20.0, 0.0], 0.0).unwrap();
        let bi = BrIntensity::new(&v, &s, 0).unwrap();
        let sampler = AngularSampler::new(&DependenceModel::brown_resnick(v), &s).unwrap();
        let n = 200_000;
        let ws: Vec<Vec<f64>> = (0..n)
            .map(|i| sampler.sample(&mut substream(5, i)).unwrap().w)
            .collect();
        for z in [[1.0, 1.0], [0.5, 2.0], [3.0, 1.5]] {
            let quad = quadrature_mass(&bi, z);
            let mc = 2.0 * ws.iter().map(|w| (w[0] / z[0]).max(w[1] / z[1])).sum::<f64>() / n as f64;
            let exact = hr_exponent(z[0], z[1], gamma);
            assert!((quad / mc - 1.0).abs() < 0.02, "z={z:?}: quad {quad} mc {mc}");
            assert!((quad / exact - 1.0).abs() < 1e-4, "z={z:?}: quad {quad} exact {exact}");
        }
    }
}
