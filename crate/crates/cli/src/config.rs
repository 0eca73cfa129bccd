use std::path::{Path, PathBuf};

use rpareto::depmodel::{DependenceModel, ModelFamily};
use rpareto::infer::{MarginOptions, ResampleScheme};
use rpareto::riskfunc::RiskFunctional;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// Risk threshold `u_n` on the data scale.
    Value(f64),
    /// Empirical quantile level of the risk over all rows.
    Quantile(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Ls,
    Score,
    Poisson,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreConfig {
    #[serde(default = "default_subset_count")]
    pub count: usize,
    #[serde(default = "default_subset_size")]
    pub size: usize,
    #[serde(default)]
    pub u: Option<f64>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            count: default_subset_count(),
            size: default_subset_size(),
            u: None,
        }
    }
}

fn default_subset_count() -> usize {
    100
}

fn default_subset_size() -> usize {
    50
}

fn default_poisson_draws() -> usize {
    20_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependenceConfig {
    /// Starting model; its values seed the optimizer and fix the parameters
    /// not listed in `free`.
    pub template: DependenceModel,
    pub free: Vec<String>,
    #[serde(default)]
    pub method: Method,
    /// Pairs farther apart are left out of least squares.
    #[serde(default)]
    pub max_lag_km: Option<f64>,
    #[serde(default)]
    pub max_lag_h: Option<f64>,
    /// Per-site quantile level of the exceedances used as extremogram
    /// thresholds; the fitted locations `b` when absent.
    #[serde(default)]
    pub extremogram_quantile: Option<f64>,
    #[serde(default)]
    pub score: ScoreConfig,
    #[serde(default = "default_poisson_draws")]
    pub poisson_draws: usize,
    /// Resampling standard errors for least squares and gradient scoring.
    #[serde(default)]
    pub resampling: Option<ResampleScheme>,
}

impl DependenceConfig {
    pub fn family(&self) -> Result<ModelFamily, CliError> {
        let free: Vec<&str> = self.free.iter().map(String::as_str).collect();
        Ok(ModelFamily::new(self.template, &free)?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    pub xi: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub dependence: DependenceModel,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    #[serde(default)]
    pub u: Option<f64>,
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_safety")]
    pub safety: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            u: None,
            directions: default_directions(),
            safety: default_safety(),
        }
    }
}

fn default_directions() -> usize {
    1000
}

fn default_safety() -> f64 {
    0.9
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StormConfig {
    /// Time stamps of the slices in hours.
    pub times: Vec<f64>,
    /// Index into `times` where the spatial risk peaks.
    pub centre: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_sim_n")]
    pub n: usize,
    /// Process parameters used when no fitted model file is given.
    #[serde(default)]
    pub process: Option<ProcessConfig>,
    #[serde(default)]
    pub bound: BoundConfig,
    #[serde(default)]
    pub storm: Option<StormConfig>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: default_sim_n(),
            process: None,
            bound: BoundConfig::default(),
            storm: None,
        }
    }
}

fn default_sim_n() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_bin")]
    pub distance_bin_km: f64,
    #[serde(default = "default_orientations")]
    pub orientations: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            replicates: default_replicates(),
            level: default_level(),
            distance_bin_km: default_bin(),
            orientations: default_orientations(),
        }
    }
}

fn default_replicates() -> usize {
    500
}

fn default_level() -> f64 {
    0.95
}

fn default_bin() -> f64 {
    1.0
}

fn default_orientations() -> usize {
    1
}

fn default_time_step() -> f64 {
    1.0
}

/// Run configuration. Relative paths resolve against the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub sites: Option<PathBuf>,
    #[serde(default)]
    pub observations: Option<PathBuf>,
    /// Hours per unit of the sites file `t_index` column.
    #[serde(default = "default_time_step")]
    pub time_step_h: f64,
    #[serde(default)]
    pub risk: Option<RiskFunctional>,
    #[serde(default)]
    pub threshold: Option<Threshold>,
    /// Minimum time between retained events; no declustering when absent.
    #[serde(default)]
    pub separation_h: Option<f64>,
    #[serde(default)]
    pub margins: MarginOptions,
    #[serde(default)]
    pub dependence: Option<DependenceConfig>,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// A parsed config with its location and content hash.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub dir: PathBuf,
    pub sha256: String,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig =
            serde_json::from_slice(&bytes).map_err(|e| CliError::Usage(format!("malformed config {}: {e}", path.display())))?;
        if !(config.time_step_h > 0.0) {
            return Err(CliError::Usage("time_step_h must be positive".into()));
        }
        if let Some(Threshold::Quantile(q)) = config.threshold {
            if !(q > 0.0 && q < 1.0) {
                return Err(CliError::Usage(format!("threshold quantile must lie in (0, 1), got {q}")));
            }
        }
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let sha256 = format!("{:x}", Sha256::digest(&bytes));
        let loaded = Self { config, dir, sha256 };
        for p in [&loaded.config.sites, &loaded.config.observations].into_iter().flatten() {
            let full = loaded.resolve(p);
            if !full.is_file() {
                return Err(CliError::Usage(format!("referenced file {} does not exist", full.display())));
            }
        }
        Ok(loaded)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }

    pub fn risk(&self) -> Result<&RiskFunctional, CliError> {
        self.config.risk.as_ref().ok_or_else(|| CliError::Usage("config has no risk functional".into()))
    }

    pub fn dependence(&self) -> Result<&DependenceConfig, CliError> {
        self.config
            .dependence
            .as_ref()
            .ok_or_else(|| CliError::Usage("config has no dependence section".into()))
    }
}
