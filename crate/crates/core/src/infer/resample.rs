use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sites::FieldObservation;
use crate::stats::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum ResampleScheme {
    /// Leave one block out; blocks are clusters, or single events.
    BlockJackknife,
    /// Resample blocks with replacement `b` times.
    EventBootstrap { b: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleResult {
    pub se: Vec<f64>,
    pub replicates: Vec<Vec<f64>>,
    pub failures: usize,
    pub scheme: ResampleScheme,
}

const MAX_FAILURE_SHARE: f64 = 0.1;

fn blocks(events: &[FieldObservation]) -> Vec<Vec<usize>> {
    let mut by_cluster: BTreeMap<(bool, usize), Vec<usize>> = BTreeMap::new();
    for (j, e) in events.iter().enumerate() {
        let key = e.cluster.map_or((false, j), |c| (true, c));
        by_cluster.entry(key).or_default().push(j);
    }
    by_cluster.into_values().collect()
}

/// Standard errors of `fit` by resampling whole events (or clusters).
///
/// `fit` maps a list of events to a parameter vector; it must be a pure
/// function of its input so that results are reproducible.
pub fn resample_se<F>(events: &[FieldObservation], scheme: ResampleScheme, seed: u64, fit: F) -> Result<ResampleResult>
where
    F: Fn(&[FieldObservation]) -> Result<Vec<f64>> + Sync,
{
    let blk = blocks(events);
    if blk.len() < 2 {
        return invalid("resampling needs at least two events");
    }
    let nb = blk.len();
    let take = |chosen: &[usize]| -> Vec<FieldObservation> {
        chosen.iter().flat_map(|&k| blk[k].iter().map(|&j| events[j].clone())).collect()
    };
    let runs: Vec<Result<Vec<f64>>> = match scheme {
        ResampleScheme::BlockJackknife => (0..nb)
            .into_par_iter()
            .map(|drop| fit(&take(&(0..nb).filter(|&k| k != drop).collect::<Vec<_>>())))
            .collect(),
        ResampleScheme::EventBootstrap { b } => {
            if b < 20 {
                return invalid(format!("bootstrap needs at least 20 replicates, got {b}"));
            }
            (0..b)
                .into_par_iter()
                .map(|i| {
                    let mut rng = substream(seed, i as u64);
                    let chosen: Vec<usize> = (0..nb).map(|_| rng.random_range(0..nb)).collect();
                    fit(&take(&chosen))
                })
                .collect()
        }
    };
    let total = runs.len();
    let replicates: Vec<Vec<f64>> = runs.into_iter().filter_map(|r| r.ok()).collect();
    let failures = total - replicates.len();
    if failures as f64 > MAX_FAILURE_SHARE * total as f64 {
        return Err(Error::Numerical(format!("{failures} of {total} refits failed")));
    }
    let dim = replicates[0].len();
    if replicates.iter().any(|r| r.len() != dim) {
        return invalid("refits returned parameter vectors of different lengths");
    }
    let m = replicates.len() as f64;
    let se = (0..dim)
        .map(|k| {
            let mean = replicates.iter().map(|r| r[k]).sum::<f64>() / m;
            let ss: f64 = replicates.iter().map(|r| (r[k] - mean).powi(2)).sum();
            match scheme {
                ResampleScheme::BlockJackknife => ((m - 1.0) / m * ss).sqrt(),
                ResampleScheme::EventBootstrap { .. } => (ss / (m - 1.0)).sqrt(),
            }
        })
        .collect();
    Ok(ResampleResult {
        se,
        replicates,
        failures,
        scheme,
    })
}
