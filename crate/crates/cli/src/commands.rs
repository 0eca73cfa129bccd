use std::path::{Path, PathBuf};

use rpareto::infer::{
    decluster, fit_dependence_ls, fit_dependence_poisson, fit_dependence_score, fit_margins, pair_estimates, resample_se, ExceedanceSet,
    FitResult, MarginalModel, ResamplingMeta, ScoreOptions,
};
use rpareto::riskfunc::RiskFunctional;
use rpareto::simulate::{sim_bound, simulate_alg1, simulate_alg2, simulate_storm_conditional, ProcessSpec, SimBound, SimOutput, StormSpec};
use rpareto::sites::{FieldObservation, SiteSet};
use rpareto::stats::quantile;
use rpareto::validate::{extremogram_compare, marginal_conditional_check, qq_gpd, risk_gpd_check, LagGrid, MarginCheck, QQReport};
use rpareto::gpd::GpdParams;
use serde::{Deserialize, Serialize};

use crate::config::{DependenceConfig, LoadedConfig, Method, Threshold};
use crate::error::CliError;
use crate::io::{read_json, read_observations, read_sites, Output, Sites};

/// Everything a command needs besides its own flags.
pub struct Ctx {
    pub cfg: LoadedConfig,
    pub seed: Option<u64>,
    pub out: Output,
}

impl Ctx {
    fn seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage("this command is stochastic: set a seed in the config or with --seed".into()))
    }

    fn sites(&self) -> Result<Sites, CliError> {
        let p = self.cfg.config.sites.as_ref().ok_or_else(|| CliError::Usage("config has no sites file".into()))?;
        read_sites(&self.cfg.resolve(p), self.cfg.config.time_step_h)
    }

    fn observations(&self, sites: &Sites) -> Result<Vec<FieldObservation>, CliError> {
        let p = self
            .cfg
            .config
            .observations
            .as_ref()
            .ok_or_else(|| CliError::Usage("config has no observations file".into()))?;
        read_observations(&self.cfg.resolve(p), sites)
    }
}

/// Fitted model as written by `fit` and `fit-margins`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub risk: RiskFunctional,
    pub u_n: f64,
    pub n_events: usize,
    pub margins: MarginalModel,
    #[serde(default)]
    pub dependence: Option<FitResult>,
}

struct Prepared {
    sites: Sites,
    risk: RiskFunctional,
    u_n: f64,
    rows: Vec<FieldObservation>,
    risks: Vec<f64>,
}

fn prepare(ctx: &Ctx) -> Result<Prepared, CliError> {
    let sites = ctx.sites()?;
    let rows = ctx.observations(&sites)?;
    let risk = ctx.cfg.risk()?.clone();
    risk.check_parameters()?;
    risk.check_sites(&sites.set)?;
    let risks = rows.iter().map(|o| risk.evaluate(&o.values)).collect::<rpareto::Result<Vec<f64>>>()?;
    let u_n = match ctx.cfg.config.threshold {
        Some(Threshold::Value(u)) => u,
        Some(Threshold::Quantile(q)) => quantile(&risks, q),
        None => return Err(CliError::Usage("config has no threshold".into())),
    };
    Ok(Prepared {
        sites,
        risk,
        u_n,
        rows,
        risks,
    })
}

fn declustered(p: &Prepared, separation: f64) -> Result<Vec<usize>, CliError> {
    let times: Vec<f64> = p.rows.iter().map(|o| o.time).collect();
    Ok(decluster(&times, &p.risks, p.u_n, separation)?)
}

/// Exceedance events, declustered when the config sets a separation.
fn events(p: &Prepared, ctx: &Ctx) -> Result<ExceedanceSet, CliError> {
    let rows = match ctx.cfg.config.separation_h {
        Some(sep) => declustered(p, sep)?.into_iter().map(|i| p.rows[i].clone()).collect(),
        None => p.rows.clone(),
    };
    Ok(ExceedanceSet::new(rows, &p.risk, p.u_n)?)
}

#[derive(Serialize)]
struct EventRow {
    event: usize,
    row: usize,
    time: f64,
    risk: f64,
}

pub fn cmd_decluster(ctx: &Ctx, separation: Option<f64>) -> Result<(), CliError> {
    let p = prepare(ctx)?;
    let sep = separation
        .or(ctx.cfg.config.separation_h)
        .ok_or_else(|| CliError::Usage("no separation: set separation_h or pass --separation".into()))?;
    let idx = declustered(&p, sep)?;
    let rows: Vec<EventRow> = idx
        .iter()
        .enumerate()
        .map(|(k, &i)| EventRow {
            event: k,
            row: i,
            time: p.rows[i].time,
            risk: p.risks[i],
        })
        .collect();
    let path = ctx.out.csv("events.csv", &rows)?;
    println!("{} events above u_n = {} written to {}", rows.len(), p.u_n, path.display());
    Ok(())
}

fn margins_for(ctx: &Ctx, p: &Prepared, es: &ExceedanceSet) -> Result<MarginalModel, CliError> {
    Ok(fit_margins(es, &p.risk, &ctx.cfg.config.margins)?)
}

pub fn cmd_fit_margins(ctx: &Ctx) -> Result<(), CliError> {
    let p = prepare(ctx)?;
    let es = events(&p, ctx)?;
    let mm = margins_for(ctx, &p, &es)?;
    let model = ModelFile {
        risk: p.risk.clone(),
        u_n: p.u_n,
        n_events: es.len(),
        margins: mm,
        dependence: None,
    };
    let path = ctx.out.json("margins.json", &model)?;
    println!("xi = {:.4} from {} events; written to {}", model.margins.xi, es.len(), path.display());
    Ok(())
}

fn pairs_within(sites: &SiteSet, dc: &DependenceConfig) -> Vec<(usize, usize)> {
    let n = sites.len();
    let mut out = Vec::new();
    for given in 0..n {
        for target in 0..n {
            if target == given {
                continue;
            }
            let (ds, dt) = sites.lag(given, target);
            let ok_s = dc.max_lag_km.map_or(true, |m| ds[0].hypot(ds[1]) <= m);
            let ok_t = dc.max_lag_h.map_or(true, |m| dt.abs() <= m);
            if ok_s && ok_t {
                out.push((target, given));
            }
        }
    }
    out
}

fn fit_dependence_once(
    es: &ExceedanceSet,
    mm: &MarginalModel,
    risk: &RiskFunctional,
    sites: &SiteSet,
    dc: &DependenceConfig,
    method: Method,
    seed: Option<u64>,
) -> Result<FitResult, CliError> {
    let family = dc.family()?;
    let seed_or = || seed.ok_or_else(|| CliError::Usage("score and Poisson fits are stochastic: set a seed".into()));
    Ok(match method {
        Method::Ls => {
            let b = site_thresholds(es, dc.extremogram_quantile, &mm.b);
            let pihat = pair_estimates(es, &b, sites, &pairs_within(sites, dc))?;
            fit_dependence_ls(&pihat, &family, None)?
        }
        Method::Score => {
            let opts = ScoreOptions {
                count: dc.score.count,
                size: dc.score.size,
                u: dc.score.u,
                seed: seed_or()?,
            };
            fit_dependence_score(es, mm, &family, sites, &opts)?
        }
        Method::Poisson => fit_dependence_poisson(es, mm, risk, sites, &family, dc.poisson_draws, seed_or()?)?,
    })
}

fn fit_dependence_full(
    ctx: &Ctx,
    p: &Prepared,
    es: &ExceedanceSet,
    mm: &MarginalModel,
    method: Method,
) -> Result<FitResult, CliError> {
    let dc = ctx.cfg.dependence()?;
    let mut fit = fit_dependence_once(es, mm, &p.risk, &p.sites.set, dc, method, ctx.seed)?;
    if let Some(scheme) = dc.resampling {
        if method == Method::Poisson {
            return Err(CliError::Usage("resampling is available for ls and score fits; Poisson fits report information-based errors".into()));
        }
        let seed = ctx.seed()?;
        let res = resample_se(es.exceedances().cloned().collect::<Vec<_>>().as_slice(), scheme, seed, |ev| {
            let sub = ExceedanceSet::new(ev.to_vec(), &p.risk, p.u_n)?;
            let m = fit_margins(&sub, &p.risk, &ctx.cfg.config.margins)?;
            fit_dependence_once(&sub, &m, &p.risk, &p.sites.set, dc, method, Some(seed))
                .map(|f| f.theta)
                .map_err(|e| rpareto::Error::Numerical(e.to_string()))
        })?;
        fit.se = Some(res.se);
        fit.resampling = Some(ResamplingMeta {
            scheme: serde_json::to_value(scheme)?["scheme"].as_str().unwrap_or("resampling").to_string(),
            replicates: res.replicates.len(),
            failures: res.failures,
        });
    }
    Ok(fit)
}

pub fn cmd_fit_dependence(ctx: &Ctx, method: Option<Method>, margins: Option<&Path>) -> Result<(), CliError> {
    let p = prepare(ctx)?;
    let es = events(&p, ctx)?;
    let mm = match margins {
        Some(path) => read_json::<ModelFile>(path)?.margins,
        None => margins_for(ctx, &p, &es)?,
    };
    let method = method.unwrap_or(ctx.cfg.dependence()?.method);
    let fit = fit_dependence_full(ctx, &p, &es, &mm, method)?;
    #[derive(Serialize)]
    struct Body<'a> {
        dependence: &'a FitResult,
    }
    let path = ctx.out.json("dependence.json", &Body { dependence: &fit })?;
    println!("{} fit {:?} = {:?}; written to {}", fit.method, fit.names, fit.theta, path.display());
    Ok(())
}

pub fn cmd_fit(ctx: &Ctx, method: Option<Method>) -> Result<(), CliError> {
    let p = prepare(ctx)?;
    let es = events(&p, ctx)?;
    let mm = margins_for(ctx, &p, &es)?;
    let method = method.unwrap_or(ctx.cfg.dependence()?.method);
    let fit = fit_dependence_full(ctx, &p, &es, &mm, method)?;
    let model = ModelFile {
        risk: p.risk.clone(),
        u_n: p.u_n,
        n_events: es.len(),
        margins: mm,
        dependence: Some(fit),
    };
    let path = ctx.out.json("model.json", &model)?;
    println!("model written to {}", path.display());
    Ok(())
}

/// Process to simulate from: a fitted model file, or the config's process.
fn process(ctx: &Ctx, sites: &Sites, model: Option<&Path>) -> Result<ProcessSpec, CliError> {
    if let Some(path) = model {
        let m: ModelFile = read_json(path)?;
        let dep = m
            .dependence
            .ok_or_else(|| CliError::Usage(format!("{} has no dependence fit", path.display())))?
            .model;
        return Ok(ProcessSpec::new(m.margins.xi, m.margins.a, m.margins.b, m.risk, dep, sites.set.clone())?);
    }
    let pc = ctx
        .cfg
        .config
        .simulation
        .process
        .as_ref()
        .ok_or_else(|| CliError::Usage("pass --model or set simulation.process in the config".into()))?;
    Ok(ProcessSpec::new(pc.xi, pc.a.clone(), pc.b.clone(), ctx.cfg.risk()?.clone(), pc.dependence, sites.set.clone())?)
}

fn bound(ctx: &Ctx, spec: &ProcessSpec, seed: u64) -> Result<SimBound, CliError> {
    let bc = &ctx.cfg.config.simulation.bound;
    Ok(match bc.u {
        Some(u) => SimBound::user(u)?,
        None => sim_bound(spec, bc.directions, bc.safety, seed)?,
    })
}

#[derive(Serialize)]
struct SimulationMeta<'a> {
    algorithm: &'a str,
    n: usize,
    proposals: u64,
    acceptance_rate: f64,
    bound: Option<SimBound>,
    min_bound_margin: f64,
    storm_rejections: u64,
    fixed_risk: Option<f64>,
}

pub struct SimulateArgs<'a> {
    pub model: Option<&'a Path>,
    pub n: Option<usize>,
    pub fixed_risk: Option<f64>,
    pub conditional_peak: bool,
    pub two_stage: bool,
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn cmd_simulate(ctx: &Ctx, args: &SimulateArgs) -> Result<(), CliError> {
    let seed = ctx.seed()?;
    let sites = ctx.sites()?;
    let spec = process(ctx, &sites, args.model)?;
    let n = args.n.unwrap_or(ctx.cfg.config.simulation.n);
    if n == 0 {
        return Err(CliError::Usage("number of samples must be positive".into()));
    }
    let (algorithm, out, header, risk_of): (&str, SimOutput, Vec<String>, Box<dyn Fn(&[f64]) -> f64>) = if args.conditional_peak {
        if args.fixed_risk.is_some() {
            return Err(CliError::Usage("--fixed-risk and --conditional-peak cannot be combined".into()));
        }
        let sc = ctx
            .cfg
            .config
            .simulation
            .storm
            .as_ref()
            .ok_or_else(|| CliError::Usage("--conditional-peak needs simulation.storm in the config".into()))?;
        let storm = StormSpec {
            xi: spec.xi,
            a: spec.a.clone(),
            b: spec.b.clone(),
            r: spec.r.clone(),
            dep: spec.dep,
            space: sites.set.clone(),
            times: sc.times.clone(),
            centre: sc.centre,
        };
        let b = bound(ctx, &storm.centre_spec()?, seed)?;
        let out = simulate_storm_conditional(&storm, &b, n, seed)?;
        let header = sc.times.iter().flat_map(|t| sites.ids.iter().map(move |id| format!("{id}@{t}"))).collect();
        let ns = sites.ids.len();
        let (r, centre) = (spec.r.clone(), sc.centre);
        ("storm_conditional", out, header, Box::new(move |v: &[f64]| r.value(&v[centre * ns..(centre + 1) * ns])))
    } else {
        let b = bound(ctx, &spec, seed)?;
        let (alg, out) = if args.fixed_risk.is_some() || args.two_stage {
            ("two_stage", simulate_alg2(&spec, &b, args.fixed_risk, n, seed)?)
        } else {
            ("accept_reject", simulate_alg1(&spec, &b, n, seed)?)
        };
        let r = spec.r.clone();
        (alg, out, sites.ids.clone(), Box::new(move |v: &[f64]| r.value(v)))
    };
    let mut full_header = vec!["sample".to_string(), "time".to_string(), "risk".to_string()];
    full_header.extend(header);
    let rows: Vec<Vec<String>> = out
        .samples
        .iter()
        .map(|o| {
            let mut row = vec![o.id.to_string(), fmt(o.time), fmt(risk_of(&o.values))];
            row.extend(o.values.iter().map(|v| fmt(*v)));
            row
        })
        .collect();
    let path = ctx.out.csv_table("samples.csv", &full_header, &rows)?;
    ctx.out.json(
        "simulation.json",
        &SimulationMeta {
            algorithm,
            n,
            proposals: out.proposals,
            acceptance_rate: out.acceptance_rate,
            bound: out.bound,
            min_bound_margin: out.min_bound_margin,
            storm_rejections: out.storm_rejections,
            fixed_risk: args.fixed_risk,
        },
    )?;
    println!("{n} samples written to {}", path.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Check {
    Qq,
    Risk,
    Marginal,
    Extremogram,
}

pub struct ValidateArgs<'a> {
    pub check: Check,
    pub model: Option<&'a Path>,
    pub samples: Option<&'a Path>,
    pub site: Option<usize>,
    pub u0: Option<f64>,
    pub n: Option<usize>,
    pub quantile: Option<f64>,
}

#[derive(Serialize)]
struct QQRow {
    rank: usize,
    empirical: f64,
    model: f64,
    lower: f64,
    upper: f64,
}

fn write_qq(ctx: &Ctx, name: &str, q: &QQReport) -> Result<PathBuf, CliError> {
    let rows: Vec<QQRow> = (0..q.len())
        .map(|i| QQRow {
            rank: i + 1,
            empirical: q.empirical[i],
            model: q.model[i],
            lower: q.lower[i],
            upper: q.upper[i],
        })
        .collect();
    ctx.out.csv(name, &rows)
}

#[derive(Serialize)]
struct CheckSummary<'a> {
    check: &'a str,
    ks: f64,
    n: usize,
    gpd: GpdParams,
    band_coverage: f64,
    band_level: f64,
    replicates: usize,
}

fn write_check(ctx: &Ctx, stem: &str, c: &MarginCheck) -> Result<(), CliError> {
    write_qq(ctx, &format!("{stem}_qq.csv"), &c.qq)?;
    ctx.out.json(
        &format!("{stem}_check.json"),
        &CheckSummary {
            check: stem,
            ks: c.ks,
            n: c.n,
            gpd: c.gpd,
            band_coverage: c.qq.coverage(),
            band_level: c.qq.level,
            replicates: c.qq.replicates,
        },
    )?;
    println!("{stem}: KS distance {:.5} over {} values", c.ks, c.n);
    Ok(())
}

fn model_or_fit(ctx: &Ctx, model: Option<&Path>) -> Result<(Prepared, ExceedanceSet, MarginalModel, Option<FitResult>), CliError> {
    let p = prepare(ctx)?;
    let es = events(&p, ctx)?;
    let (mm, dep) = match model {
        Some(path) => {
            let m: ModelFile = read_json(path)?;
            (m.margins, m.dependence)
        }
        None => (margins_for(ctx, &p, &es)?, None),
    };
    Ok((p, es, mm, dep))
}

fn samples_for(ctx: &Ctx, sites: &Sites, spec: &ProcessSpec, args: &ValidateArgs, seed: u64, two_stage: bool) -> Result<Vec<FieldObservation>, CliError> {
    if let Some(path) = args.samples {
        return read_observations(path, sites);
    }
    let n = args.n.unwrap_or(ctx.cfg.config.simulation.n);
    let b = bound(ctx, spec, seed)?;
    let out = if two_stage {
        simulate_alg2(spec, &b, None, n, seed)?
    } else {
        simulate_alg1(spec, &b, n, seed)?
    };
    Ok(out.samples)
}

pub fn cmd_validate(ctx: &Ctx, args: &ValidateArgs) -> Result<(), CliError> {
    let vc = ctx.cfg.config.validation.clone();
    match args.check {
        Check::Qq => {
            let seed = ctx.seed()?;
            let site = args.site.ok_or_else(|| CliError::Usage("qq check needs --site".into()))?;
            let (_, es, mm, _) = model_or_fit(ctx, args.model)?;
            if site >= mm.len() {
                return Err(CliError::Usage(format!("site {site} out of range")));
            }
            let excesses: Vec<f64> = es
                .exceedances()
                .map(|e| e.values[site] - mm.b[site])
                .filter(|v| *v >= 0.0)
                .collect();
            let g = GpdParams::new(mm.xi, mm.a[site], 0.0)?;
            let cov = mm.se_xi.map(|s| [[s * s, 0.0], [0.0, 0.0]]);
            let q = qq_gpd(&excesses, &g, vc.replicates, vc.level, cov, seed)?;
            let path = write_qq(ctx, &format!("qq_site{site}.csv"), &q)?;
            println!("qq: {} excesses at site {site}, band coverage {:.3}; written to {}", q.len(), q.coverage(), path.display());
        }
        Check::Risk => {
            let seed = ctx.seed()?;
            let sites = ctx.sites()?;
            let spec = process(ctx, &sites, args.model)?;
            let samples = samples_for(ctx, &sites, &spec, args, seed, true)?;
            let c = risk_gpd_check(&samples, &spec, vc.replicates, vc.level, seed)?;
            write_check(ctx, "risk", &c)?;
        }
        Check::Marginal => {
            let seed = ctx.seed()?;
            let site = args.site.ok_or_else(|| CliError::Usage("marginal check needs --site".into()))?;
            let u0 = args.u0.ok_or_else(|| CliError::Usage("marginal check needs --u0".into()))?;
            let sites = ctx.sites()?;
            let spec = process(ctx, &sites, args.model)?;
            let samples = samples_for(ctx, &sites, &spec, args, seed, false)?;
            let c = marginal_conditional_check(&samples, &spec, site, u0, vc.replicates, vc.level, seed)?;
            write_check(ctx, "marginal", &c)?;
        }
        Check::Extremogram => {
            let grid = LagGrid {
                distance_bin: vc.distance_bin_km,
                orientations: vc.orientations,
            };
            let (es, b, dep, sites) = if args.samples.is_some() || (ctx.cfg.config.observations.is_none()) {
                let sites = ctx.sites()?;
                let spec = process(ctx, &sites, args.model)?;
                let samples = match args.samples {
                    Some(_) => samples_for(ctx, &sites, &spec, args, 0, false)?,
                    None => samples_for(ctx, &sites, &spec, args, ctx.seed()?, false)?,
                };
                let es = ExceedanceSet::new(samples, &spec.r, spec.rb())?;
                let b = site_thresholds(&es, args.quantile, &spec.b);
                (es, b, spec.dep, sites)
            } else {
                let (p, es, mm, dep) = model_or_fit(ctx, args.model)?;
                let dep = match dep {
                    Some(f) => f.model,
                    None => ctx.cfg.dependence()?.template,
                };
                let b = site_thresholds(&es, args.quantile, &mm.b);
                (es, b, dep, p.sites)
            };
            let rows = extremogram_compare(&es, &b, &dep, &sites.set, &grid)?;
            let path = ctx.out.csv("extremogram.csv", &rows)?;
            let worst = rows.iter().map(|r| (r.empirical - r.fitted).abs()).fold(0.0, f64::max);
            println!("extremogram: {} cells, max |empirical - fitted| = {worst:.4}; written to {}", rows.len(), path.display());
        }
    }
    Ok(())
}

/// Per-site empirical quantiles of the exceedances, or `fallback`.
fn site_thresholds(es: &ExceedanceSet, q: Option<f64>, fallback: &[f64]) -> Vec<f64> {
    match q {
        None => fallback.to_vec(),
        Some(q) => (0..es.n_sites())
            .map(|l| quantile(&es.exceedances().map(|e| e.values[l]).collect::<Vec<f64>>(), q))
            .collect(),
    }
}

#[derive(Serialize)]
struct PairRow {
    target: String,
    given: String,
    dx_km: f64,
    dy_km: f64,
    lag_km: f64,
    lag_h: f64,
    empirical: f64,
    fitted: Option<f64>,
}

pub fn cmd_extremogram(ctx: &Ctx, model: Option<&Path>, quantile_level: Option<f64>) -> Result<(), CliError> {
    let (p, es, mm, dep) = model_or_fit(ctx, model)?;
    let n = p.sites.set.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|g| (0..n).filter(move |&t| t != g).map(move |t| (t, g))).collect();
    let b = site_thresholds(&es, quantile_level, &mm.b);
    let est = pair_estimates(&es, &b, &p.sites.set, &pairs)?;
    let dep = dep.map(|f| f.model);
    let rows = est
        .iter()
        .map(|e| {
            Ok(PairRow {
                target: p.sites.ids[e.target].clone(),
                given: p.sites.ids[e.given].clone(),
                dx_km: e.ds[0],
                dy_km: e.ds[1],
                lag_km: e.ds[0].hypot(e.ds[1]),
                lag_h: e.dt,
                empirical: e.value,
                fitted: dep.map(|d| d.extremogram(e.ds, e.dt)).transpose()?,
            })
        })
        .collect::<Result<Vec<PairRow>, CliError>>()?;
    let path = ctx.out.csv("extremogram_pairs.csv", &rows)?;
    println!("{} pairs written to {}", rows.len(), path.display());
    Ok(())
}
