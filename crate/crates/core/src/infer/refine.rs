use serde::{Deserialize, Serialize};

use super::exceedance::ExceedanceSet;
use super::margins::{fit_margins, MarginOptions, MarginalModel};
use crate::error::{invalid, Error, Result};
use crate::riskfunc::RiskFunctional;
use crate::sites::FieldObservation;

const MAX_ITERATIONS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStep {
    pub iteration: usize,
    /// Index into the candidate functionals.
    pub functional: usize,
    pub size: usize,
    /// `|E_r' symmetric-difference E_r|`.
    pub mismatch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub margins: MarginalModel,
    pub exceedances: ExceedanceSet,
    pub trace: Vec<RefinementStep>,
    /// Whether the final set equals the target set exactly; otherwise no
    /// candidate could get closer.
    pub matched_target: bool,
}

fn sym_diff(a: &[usize], b: &[usize]) -> usize {
    // both sorted ascending
    let (mut i, mut j, mut d) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                d += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                d += 1;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    d + (a.len() - i) + (b.len() - j)
}

/// Marginal fitting tailored to the `r`-exceedances for a risk functional
/// whose exceedance set depends on the marginal rescaling.
///
/// The target set is `E_r = {r(x_j) >= u_n}`. For candidate `r'` and the
/// current `(a, b)` (initially `a = 1`, `b = 0`) the working set is
/// `E_r' = {r'((x - b)/r'(a)) >= (u_n - r'(b))/r'(a)}`. The first step uses
/// `candidates[0]`; each later step refines `r'` to the candidate whose set
/// is closest to `E_r` and refits the margins on it. The loop ends when the
/// sets coincide or when no candidate gets closer, so the mismatch in the
/// trace is strictly decreasing.
pub fn iterative_refinement(
    events: &[FieldObservation],
    target: &RiskFunctional,
    candidates: &[RiskFunctional],
    u_n: f64,
    opts: &MarginOptions,
) -> Result<Refinement> {
    if candidates.is_empty() {
        return invalid("need at least one candidate functional");
    }
    let target_set = ExceedanceSet::new(events.to_vec(), target, u_n)?;
    let n = target_set.n_sites();
    let (mut a, mut b) = (vec![1.0; n], vec![0.0; n]);
    let mut trace: Vec<RefinementStep> = Vec::new();
    let mut current: Option<(ExceedanceSet, MarginalModel)> = None;
    for iteration in 1..=MAX_ITERATIONS {
        let pool: Vec<usize> = if iteration == 1 { vec![0] } else { (0..candidates.len()).collect() };
        let mut best: Option<(usize, ExceedanceSet, usize)> = None;
        for k in pool {
            let Ok(es) = ExceedanceSet::rescaled(events.to_vec(), &candidates[k], u_n, &a, &b) else {
                continue;
            };
            let mismatch = sym_diff(&es.index, &target_set.index);
            if best.as_ref().map_or(true, |(_, _, m)| mismatch < *m) {
                best = Some((k, es, mismatch));
            }
        }
        let Some((k, es, mismatch)) = best else {
            return invalid(format!("every candidate selects an empty exceedance set; trace: {trace:?}"));
        };
        if let Some((es, mm)) = current.take() {
            if mismatch >= trace.last().map_or(usize::MAX, |s| s.mismatch) {
                return Ok(Refinement {
                    margins: mm,
                    exceedances: es,
                    trace,
                    matched_target: false,
                });
            }
        }
        let mm = fit_margins(&es, &candidates[k], opts)?;
        trace.push(RefinementStep {
            iteration,
            functional: k,
            size: es.len(),
            mismatch,
        });
        a.clone_from(&mm.a);
        b.clone_from(&mm.b);
        if mismatch == 0 {
            return Ok(Refinement {
                margins: mm,
                exceedances: es,
                trace,
                matched_target: true,
            });
        }
        current = Some((es, mm));
    }
    Err(Error::Numerical(format!(
        "refinement did not settle within {MAX_ITERATIONS} iterations; trace: {trace:?}"
    )))
}
