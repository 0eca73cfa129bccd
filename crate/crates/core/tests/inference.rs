//! End-to-end inference checks on simulated r-Pareto data.

use rpareto::depmodel::{DependenceModel, ModelFamily, SpaceTimeMetric, Variogram};
use rpareto::infer::{fit_dependence_poisson, fit_dependence_score, fit_margins, ExceedanceSet, MarginOptions, MarginalModel, ScoreOptions};
use rpareto::riskfunc::RiskFunctional;
use rpareto::simulate::{sim_bound, simulate_alg1, ProcessSpec};
use rpareto::sites::SiteSet;

fn power_br(tau: f64, nu: f64) -> DependenceModel {
    DependenceModel::brown_resnick(Variogram::power(tau, nu).unwrap())
}

/// xi = 1, unit margins and a uniform mean give the exceedance set
/// {|y|_1 >= L}, matching the half-space the score is truncated to.
fn unit_design(sites: &SiteSet, dep: DependenceModel, n: usize, seed: u64) -> (ExceedanceSet, MarginalModel) {
    let l = sites.len();
    let r = RiskFunctional::uniform_mean(l);
    let spec = ProcessSpec::new(1.0, vec![1.0; l], vec![0.0; l], r.clone(), dep, sites.clone()).unwrap();
    let bound = sim_bound(&spec, 500, 0.9, 1).unwrap();
    let out = simulate_alg1(&spec, &bound, n, seed).unwrap();
    let es = ExceedanceSet::new(out.samples, &r, 0.0).unwrap();
    let mm = MarginalModel::from_parts(1.0, vec![1.0; l], vec![0.0; l], &r).unwrap();
    (es, mm)
}

#[test]
fn composite_score_is_stable_across_subset_sizes() {
    let sites = SiteSet::line(12, 8.0);
    let (es, mm) = unit_design(&sites, power_br(30.0, 1.8), 500, 21);
    let family = ModelFamily::new(power_br(10.0, 1.0), &["tau", "nu"]).unwrap();
    let mut fits = Vec::new();
    for size in [3, 6, 12] {
        let opts = ScoreOptions {
            count: 40,
            size,
            u: None,
            seed: 2,
        };
        let fit = fit_dependence_score(&es, &mm, &family, &sites, &opts).unwrap();
        println!("subset size {size:>2}: tau {:.2}, nu {:.3}", fit.theta[0], fit.theta[1]);
        fits.push(fit.theta);
    }
    for theta in &fits {
        assert!((theta[0] / 30.0 - 1.0).abs() < 0.25, "{theta:?}");
        assert!((theta[1] / 1.8 - 1.0).abs() < 0.25, "{theta:?}");
    }
}

#[test]
fn score_agrees_with_poisson_likelihood_for_two_sites() {
    let sites = SiteSet::line(2, 20.0);
    let (es, mm) = unit_design(&sites, power_br(30.0, 1.5), 2000, 22);
    let family = ModelFamily::new(power_br(10.0, 1.5), &["tau"]).unwrap();
    let score = fit_dependence_score(&es, &mm, &family, &sites, &ScoreOptions::default()).unwrap();
    let r = RiskFunctional::uniform_mean(2);
    let pois = fit_dependence_poisson(&es, &mm, &r, &sites, &family, 20_000, 3).unwrap();
    let (ts, tp) = (score.theta[0], pois.theta[0]);
    println!("tau: score {ts:.2}, poisson {tp:.2}");
    assert!((ts / tp - 1.0).abs() < 0.1);
    assert!((ts / 30.0 - 1.0).abs() < 0.15 && (tp / 30.0 - 1.0).abs() < 0.15);
}

/// Diagnostic: the common-xi estimate under strong but incomplete
/// dependence is biased low for xi < 0. Bounds are loose on purpose.
#[test]
fn xi_bias_under_windstorm_dependence() {
    let n = 8;
    let sites = SiteSet::line(n, 20.0);
    let metric = SpaceTimeMetric::isotropic(614.0);
    let dep = DependenceModel::brown_resnick(Variogram::whittle_matern(3.5, 1.0, metric).unwrap());
    let r = RiskFunctional::uniform_mean(n);
    let spec = ProcessSpec::new(-0.15, vec![2.0; n], vec![20.0; n], r.clone(), dep, sites).unwrap();
    let bound = sim_bound(&spec, 500, 0.9, 1).unwrap();
    let xis: Vec<f64> = (0..20)
        .map(|seed| {
            let out = simulate_alg1(&spec, &bound, 500, 300 + seed).unwrap();
            let es = ExceedanceSet::new(out.samples, &r, spec.rb()).unwrap();
            fit_margins(&es, &r, &MarginOptions::default()).unwrap().xi
        })
        .collect();
    let mean = xis.iter().sum::<f64>() / xis.len() as f64;
    println!("mean xi-hat {mean:.3} (true -0.15)");
    assert!(mean > -0.3 && mean < -0.1, "mean xi-hat {mean}");
}
