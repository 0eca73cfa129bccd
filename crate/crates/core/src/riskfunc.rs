//! Risk functionals: scalar summaries of a field that decide which events
//! count as extreme.
//!
//! Fields are discrete vectors of site values; integrals over the domain
//! become quadrature sums with the site weights carried by [`SiteSet`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sites::{FieldObservation, SiteSet};

/// Anything that maps a field to a scalar risk. [`RiskFunctional`] is the
/// production implementation; the trait lets the validity check run on
/// ad-hoc functionals too.
pub trait Functional {
    fn value(&self, x: &[f64]) -> f64;
    fn is_monotone(&self) -> bool;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskFunctional {
    /// `x(s0)`.
    SiteEval { site: usize },
    /// `sum_l w_l x_l` with `w_l >= 0`, `sum w_l = 1`.
    WeightedMean { weights: Vec<f64> },
    /// Quadrature approximation of `int_S x(s) ds`: `sum_l q_l x_l` with the
    /// non-negative cell weights `q_l`.
    Integral { weights: Vec<f64> },
    /// `max_l x_l`.
    Supremum,
    /// Spatial mean damped by the share of spectral energy at zero frequency:
    /// `mean(x) * |X_00| / ||X||_F` with `X` the unnormalized 2-D DFT.
    FourierFilteredMean { nx: usize, ny: usize },
    /// `max_m { r_m(x) - u_m }`.
    MaxComposite { members: Vec<(RiskFunctional, f64)> },
    /// `min_m { r_m(x) - u_m }`; members usually address different blocks of
    /// a stacked multi-variable field.
    MinCompound { members: Vec<(RiskFunctional, f64)> },
}

impl RiskFunctional {
    pub fn uniform_mean(n: usize) -> Self {
        RiskFunctional::WeightedMean {
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Plain sum of the site values (integral with unit cell weights).
    pub fn sum(n: usize) -> Self {
        RiskFunctional::Integral {
            weights: vec![1.0; n],
        }
    }

    pub fn integral(sites: &SiteSet) -> Self {
        RiskFunctional::Integral {
            weights: sites.quad_weights.clone(),
        }
    }

    pub fn weighted_mean(weights: Vec<f64>) -> Result<Self> {
        let r = RiskFunctional::WeightedMean { weights };
        r.check_parameters()?;
        Ok(r)
    }

    pub fn is_linear(&self) -> bool {
        matches!(
            self,
            RiskFunctional::SiteEval { .. } | RiskFunctional::WeightedMean { .. } | RiskFunctional::Integral { .. }
        )
    }

    pub fn is_monotone(&self) -> bool {
        match self {
            RiskFunctional::FourierFilteredMean { .. } => false,
            RiskFunctional::MaxComposite { members } | RiskFunctional::MinCompound { members } => {
                members.iter().all(|(r, _)| r.is_monotone())
            }
            _ => true,
        }
    }

    /// Linear coefficients `c` with `r(x) = c . x`, for linear kinds.
    pub fn linear_coefficients(&self, n: usize) -> Option<Vec<f64>> {
        match self {
            RiskFunctional::SiteEval { site } => {
                let mut c = vec![0.0; n];
                *c.get_mut(*site)? = 1.0;
                Some(c)
            }
            RiskFunctional::WeightedMean { weights } | RiskFunctional::Integral { weights } => Some(weights.clone()),
            _ => None,
        }
    }

    /// Parameter invariants that do not depend on the site set.
    pub fn check_parameters(&self) -> Result<()> {
        match self {
            RiskFunctional::WeightedMean { weights } => {
                if weights.iter().any(|w| !(*w >= 0.0)) {
                    return invalid("weighted-mean weights must be non-negative");
                }
                let s: f64 = weights.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return invalid(format!("weighted-mean weights must sum to 1, got {s}"));
                }
            }
            RiskFunctional::Integral { weights } => {
                if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().all(|w| *w == 0.0) {
                    return invalid("integral weights must be non-negative and not all zero");
                }
            }
            RiskFunctional::MaxComposite { members } | RiskFunctional::MinCompound { members } => {
                if members.is_empty() {
                    return invalid("composite functional needs at least one member");
                }
                for (r, _) in members {
                    r.check_parameters()?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Checks the functional against a site set: lengths, indices and the
    /// full-grid requirement of the Fourier functional.
    pub fn check_sites(&self, sites: &SiteSet) -> Result<()> {
        self.check_parameters()?;
        let n = sites.len();
        match self {
            RiskFunctional::SiteEval { site } if *site >= n => invalid(format!("site index {site} out of range for {n} sites")),
            RiskFunctional::WeightedMean { weights } | RiskFunctional::Integral { weights } if weights.len() != n => {
                Err(Error::DimensionMismatch {
                    expected: n,
                    got: weights.len(),
                })
            }
            RiskFunctional::FourierFilteredMean { nx, ny } => match sites.grid {
                Some(g) if g.nx == *nx && g.ny == *ny && nx * ny == n => Ok(()),
                _ => invalid("Fourier-filtered mean requires the sites to form the full rectangular grid"),
            },
            RiskFunctional::MaxComposite { members } | RiskFunctional::MinCompound { members } => {
                members.iter().try_for_each(|(r, _)| r.check_sites(sites))
            }
            _ => Ok(()),
        }
    }

    /// Dimension-checked evaluation.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        Ok(self.value(x))
    }

    fn check_len(&self, n: usize) -> Result<()> {
        let mismatch = |expected: usize| Err(Error::DimensionMismatch { expected, got: n });
        match self {
            RiskFunctional::SiteEval { site } if *site >= n => invalid(format!("site index {site} out of range for field of length {n}")),
            RiskFunctional::WeightedMean { weights } | RiskFunctional::Integral { weights } if weights.len() != n => {
                mismatch(weights.len())
            }
            RiskFunctional::FourierFilteredMean { nx, ny } if nx * ny != n => mismatch(nx * ny),
            RiskFunctional::MaxComposite { members } | RiskFunctional::MinCompound { members } => {
                members.iter().try_for_each(|(r, _)| r.check_len(n))
            }
            RiskFunctional::Supremum if n == 0 => invalid("empty field"),
            _ => Ok(()),
        }
    }

    /// Unchecked evaluation for hot loops; lengths must already be valid.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            RiskFunctional::SiteEval { site } => x[*site],
            RiskFunctional::WeightedMean { weights } | RiskFunctional::Integral { weights } => {
                weights.iter().zip(x).map(|(w, v)| w * v).sum()
            }
            RiskFunctional::Supremum => x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            RiskFunctional::FourierFilteredMean { .. } => fourier_filtered_mean(x),
            RiskFunctional::MaxComposite { members } => members
                .iter()
                .map(|(r, u)| r.value(x) - u)
                .fold(f64::NEG_INFINITY, f64::max),
            RiskFunctional::MinCompound { members } => members
                .iter()
                .map(|(r, u)| r.value(x) - u)
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// By Parseval, `||X||_F^2 = N sum x^2` for the unnormalized DFT, and
/// `X_00 = sum x`, so no transform is needed.
fn fourier_filtered_mean(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let s: f64 = x.iter().sum();
    let energy: f64 = x.iter().map(|v| v * v).sum::<f64>() * n;
    if energy == 0.0 {
        return 0.0;
    }
    (s / n) * s.abs() / energy.sqrt()
}

impl Functional for RiskFunctional {
    fn value(&self, x: &[f64]) -> f64 {
        RiskFunctional::value(self, x)
    }
    fn is_monotone(&self) -> bool {
        RiskFunctional::is_monotone(self)
    }
}

/// `r(x)` for an observation on a site set.
pub fn evaluate(r: &RiskFunctional, x: &FieldObservation, sites: &SiteSet) -> Result<f64> {
    if x.values.len() != sites.len() {
        return Err(Error::DimensionMismatch {
            expected: sites.len(),
            got: x.values.len(),
        });
    }
    if let RiskFunctional::FourierFilteredMean { .. } = r {
        r.check_sites(sites)?;
    }
    r.evaluate(&x.values)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Validity {
    Valid,
    Invalid(String),
    /// Could not be decided (non-monotone functional with `xi <= 0`).
    Unknown(String),
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }
}

/// Checks whether `r` applied to rescaled fields has an exceedance set of
/// positive finite limit measure.
///
/// For `xi > 0` this is `r(-A / xi) < 0`. For `xi <= 0`, `r(-c 1)` must
/// decrease strictly along `c = 10^k`, `k = 1..8`, ending below `-1e6`.
pub fn check_validity(r: &dyn Functional, xi: f64, scale: &[f64]) -> Result<Validity> {
    if scale.iter().any(|a| !(*a > 0.0)) {
        return invalid("scale function must be strictly positive");
    }
    if xi > 0.0 {
        let floor: Vec<f64> = scale.iter().map(|a| -a / xi).collect();
        let v = r.value(&floor);
        return Ok(if v < 0.0 {
            Validity::Valid
        } else {
            Validity::Invalid(format!("r(-A/xi) = {v} is not negative"))
        });
    }
    if !r.is_monotone() {
        return Ok(Validity::Unknown(
            "validity for xi <= 0 is only checked for monotone functionals".into(),
        ));
    }
    let n = scale.len();
    let mut prev = f64::INFINITY;
    for k in 1..=8 {
        let c = 10f64.powi(k);
        let v = r.value(&vec![-c; n]);
        if !(v < prev) {
            return Ok(Validity::Invalid(format!("r(-c) stops decreasing at c = {c}")));
        }
        prev = v;
    }
    Ok(if prev < -1e6 {
        Validity::Valid
    } else {
        Validity::Invalid(format!("r(-1e8) = {prev} does not diverge"))
    })
}
