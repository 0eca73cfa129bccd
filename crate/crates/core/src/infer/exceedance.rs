use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::riskfunc::RiskFunctional;
use crate::sites::FieldObservation;

/// How membership in the exceedance set was decided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Membership {
    /// `r(x_j) >= u_n`.
    Raw,
    /// `r((x_j - b)/r(a)) >= (u_n - r(b))/r(a)`; equals the raw rule for
    /// linear `r`, and reduces to `r((x_j - b)/r(a)) >= 0` once `r(b) = u_n`.
    Rescaled { a: Vec<f64>, b: Vec<f64> },
}

/// All observed events together with the indices `K` of the exceedances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceSet {
    pub events: Vec<FieldObservation>,
    /// Membership statistic per event, compared against `u_n` for the raw
    /// rule and against the rescaled threshold otherwise.
    pub risk: Vec<f64>,
    pub u_n: f64,
    pub index: Vec<usize>,
    pub membership: Membership,
}

impl ExceedanceSet {
    /// `K = {j : r(x_j) >= u_n}`; an empty `K` is an error.
    pub fn new(events: Vec<FieldObservation>, r: &RiskFunctional, u_n: f64) -> Result<Self> {
        if !u_n.is_finite() {
            return invalid("threshold u_n must be finite");
        }
        let risk = events.iter().map(|e| r.evaluate(&e.values)).collect::<Result<Vec<_>>>()?;
        let index: Vec<usize> = (0..events.len()).filter(|&j| risk[j] >= u_n).collect();
        if index.is_empty() {
            return invalid(format!("no event has risk at or above u_n = {u_n}"));
        }
        Ok(Self {
            events,
            risk,
            u_n,
            index,
            membership: Membership::Raw,
        })
    }

    /// Membership by the rescaled condition with fixed marginal functions.
    pub fn rescaled(events: Vec<FieldObservation>, r: &RiskFunctional, u_n: f64, a: &[f64], b: &[f64]) -> Result<Self> {
        let ra = r.evaluate(a)?;
        if !(ra > 0.0) {
            return invalid(format!("r(a) must be positive, got {ra}"));
        }
        let level = (u_n - r.evaluate(b)?) / ra;
        let risk = events
            .iter()
            .map(|e| {
                if e.values.len() != b.len() {
                    return invalid(format!("event {} has {} values for {} sites", e.id, e.values.len(), b.len()));
                }
                let z: Vec<f64> = e.values.iter().zip(b).map(|(x, b)| (x - b) / ra).collect();
                Ok(r.value(&z))
            })
            .collect::<Result<Vec<_>>>()?;
        let index: Vec<usize> = (0..events.len()).filter(|&j| risk[j] >= level).collect();
        if index.is_empty() {
            return invalid("rescaled exceedance set is empty");
        }
        Ok(Self {
            events,
            risk,
            u_n,
            index,
            membership: Membership::Rescaled {
                a: a.to_vec(),
                b: b.to_vec(),
            },
        })
    }

    /// `n_{u_n}`.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn n_sites(&self) -> usize {
        self.events.first().map_or(0, |e| e.values.len())
    }

    pub fn exceedances(&self) -> impl Iterator<Item = &FieldObservation> {
        self.index.iter().map(|&j| &self.events[j])
    }

    /// Same membership rule restricted to a subset of events.
    pub fn with_events(&self, events: Vec<FieldObservation>, r: &RiskFunctional) -> Result<Self> {
        match &self.membership {
            Membership::Raw => Self::new(events, r, self.u_n),
            Membership::Rescaled { a, b } => Self::rescaled(events, r, self.u_n, a, b),
        }
    }
}

/// Greedy runs declustering of a risk time series.
///
/// Candidates with `risk >= u_n` are visited in descending order of risk
/// (earlier time first on ties) and kept when at least `separation` away
/// from every event kept so far. Returns the kept indices in time order.
pub fn decluster(times: &[f64], risk: &[f64], u_n: f64, separation: f64) -> Result<Vec<usize>> {
    if times.is_empty() {
        return invalid("empty series");
    }
    if times.len() != risk.len() {
        return invalid(format!("{} times for {} risk values", times.len(), risk.len()));
    }
    if !(separation > 0.0) {
        return invalid(format!("separation must be positive, got {separation}"));
    }
    if times.iter().chain(risk).any(|v| v.is_nan()) {
        return invalid("series contains NaN");
    }
    let mut cand: Vec<usize> = (0..risk.len()).filter(|&i| risk[i] >= u_n).collect();
    cand.sort_by(|&i, &j| risk[j].total_cmp(&risk[i]).then(times[i].total_cmp(&times[j])));
    let mut kept: Vec<usize> = Vec::new();
    for i in cand {
        if kept.iter().all(|&k| (times[i] - times[k]).abs() >= separation) {
            kept.push(i);
        }
    }
    kept.sort_by(|&i, &j| times[i].total_cmp(&times[j]));
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Admissible subset whose descending risk profile is lexicographically
    /// largest, by exhaustive enumeration.
    fn brute_force(times: &[f64], risk: &[f64], u: f64, sep: f64) -> Vec<usize> {
        let cand: Vec<usize> = (0..risk.len()).filter(|&i| risk[i] >= u).collect();
        let mut best: Vec<usize> = Vec::new();
        let mut best_key: Vec<f64> = Vec::new();
        for mask in 0u32..(1 << cand.len()) {
            let set: Vec<usize> = (0..cand.len()).filter(|b| mask >> b & 1 == 1).map(|b| cand[b]).collect();
            let ok = set
                .iter()
                .all(|&i| set.iter().all(|&j| i == j || (times[i] - times[j]).abs() >= sep));
            if !ok {
                continue;
            }
            let mut key: Vec<f64> = set.iter().map(|&i| risk[i]).collect();
            key.sort_by(|a, b| b.total_cmp(a));
            let better = key
                .iter()
                .zip(&best_key)
                .find(|(a, b)| a != b)
                .map_or(key.len() > best_key.len(), |(a, b)| a > b);
            if better {
                best = set;
                best_key = key;
            }
        }
        best.sort_by(|&i, &j| times[i].total_cmp(&times[j]));
        best
    }

    #[test]
    fn single_exceedance_kept() {
        let kept = decluster(&[0.0, 3.0, 6.0], &[1.0, 5.0, 1.0], 2.0, 48.0).unwrap();
        assert_eq!(kept, vec![1]);
    }

    #[test]
    fn close_pair_keeps_larger() {
        let kept = decluster(&[0.0, 24.0], &[3.0, 4.0], 2.0, 48.0).unwrap();
        assert_eq!(kept, vec![1]);
    }

    #[test]
    fn five_separated_peaks() {
        // 20 three-hourly points, peaks at 6, 66, 120, 180 and 228 hours
        let times: Vec<f64> = (0..20).map(|i| i as f64 * 12.0).collect();
        let mut risk = vec![0.5; 20];
        for (i, v) in [(0, 2.0), (1, 3.0), (5, 4.0), (6, 2.5), (10, 5.0), (15, 3.5), (16, 3.1), (19, 2.2)] {
            risk[i] = v;
        }
        let kept = decluster(&times, &risk, 1.0, 48.0).unwrap();
        assert_eq!(kept, brute_force(&times, &risk, 1.0, 48.0));
        assert_eq!(kept.len(), 5);
    }

    #[test]
    fn decluster_errors() {
        assert!(decluster(&[], &[], 0.0, 1.0).is_err());
        assert!(decluster(&[0.0], &[1.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn exceedance_membership_is_exact() {
        let ev = vec![
            FieldObservation::new(0, 0.0, vec![5.0, 6.0]),
            FieldObservation::new(1, 1.0, vec![5.0, 1.0]),
            FieldObservation::new(2, 2.0, vec![1.0, 6.0]),
            FieldObservation::new(3, 3.0, vec![1.0, 1.0]),
        ];
        let es = ExceedanceSet::new(ev.clone(), &RiskFunctional::uniform_mean(2), 2.0).unwrap();
        assert_eq!(es.index, vec![0, 1, 2]);
        assert!(ExceedanceSet::new(ev, &RiskFunctional::uniform_mean(2), 100.0).is_err());
    }

    #[test]
    fn rescaled_equals_raw_for_linear() {
        let ev: Vec<FieldObservation> = (0..30)
            .map(|i| FieldObservation::new(i, i as f64, vec![(i % 7) as f64, (i % 5) as f64 * 1.5]))
            .collect();
        let r = RiskFunctional::weighted_mean(vec![0.3, 0.7]).unwrap();
        let raw = ExceedanceSet::new(ev.clone(), &r, 2.5).unwrap();
        let resc = ExceedanceSet::rescaled(ev, &r, 2.5, &[2.0, 0.5], &[1.0, -3.0]).unwrap();
        assert_eq!(raw.index, resc.index);
    }

    proptest! {
        #[test]
        fn greedy_matches_enumeration(
            risk in proptest::collection::vec(0.0..10.0f64, 1..14),
            sep in 1.0..5.0f64,
            u in 0.0..6.0f64,
        ) {
            let times: Vec<f64> = (0..risk.len()).map(|i| i as f64).collect();
            let kept = decluster(&times, &risk, u, sep).unwrap();
            prop_assert_eq!(kept, brute_force(&times, &risk, u, sep));
        }

        #[test]
        fn membership_matches_threshold(vals in proptest::collection::vec(-5.0..5.0f64, 8..40), u in -1.0..1.0f64) {
            let ev: Vec<FieldObservation> = vals.chunks(2).filter(|c| c.len() == 2)
                .enumerate().map(|(i, c)| FieldObservation::new(i, 0.0, c.to_vec())).collect();
            let r = RiskFunctional::uniform_mean(2);
            match ExceedanceSet::new(ev.clone(), &r, u) {
                Ok(es) => {
                    for (j, e) in ev.iter().enumerate() {
                        prop_assert_eq!(es.index.contains(&j), r.value(&e.values) >= u);
                    }
                }
                Err(_) => prop_assert!(ev.iter().all(|e| r.value(&e.values) < u)),
            }
        }
    }
}
