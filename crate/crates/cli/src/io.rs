//! Tabular input and provenance-stamped output.
//!
//! Sites CSV: `site_id,x_km,y_km[,t_index]`. Observations CSV: a `time`
//! column in hours, an optional `cluster` column, and one column per
//! `site_id`; other columns are ignored. Lines starting with `#` are
//! comments.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rpareto::sites::{FieldObservation, SiteSet};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct Sites {
    pub ids: Vec<String>,
    pub set: SiteSet,
}

pub fn read_sites(path: &Path, time_step_h: f64) -> Result<Sites, CliError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ci), Some(cx), Some(cy)) = (col("site_id"), col("x_km"), col("y_km")) else {
        return Err(CliError::Usage(format!("{}: sites file needs columns site_id, x_km, y_km", path.display())));
    };
    let ct = col("t_index");
    let (mut ids, mut coords, mut times) = (Vec::new(), Vec::new(), Vec::new());
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64, CliError> {
            rec.get(c)
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Usage(format!("{}: row {} has a bad number in column {}", path.display(), k + 1, headers[c].to_string())))
        };
        ids.push(rec[ci].to_string());
        coords.push([num(cx)?, num(cy)?]);
        if let Some(c) = ct {
            times.push(num(c)? * time_step_h);
        }
    }
    if ids.is_empty() {
        return Err(CliError::Usage(format!("{}: no sites", path.display())));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(CliError::Usage(format!("{}: duplicate site_id {dup}", path.display())));
    }
    let mut set = SiteSet::new(coords);
    if ct.is_some() {
        set = set.with_times(times)?;
    }
    Ok(Sites { ids, set })
}

pub fn read_observations(path: &Path, sites: &Sites) -> Result<Vec<FieldObservation>, CliError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let tcol = *index
        .get("time")
        .ok_or_else(|| CliError::Usage(format!("{}: observations need a time column", path.display())))?;
    let ccol = index.get("cluster").copied();
    let scols = sites
        .ids
        .iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| CliError::Usage(format!("{}: no column for site {id}", path.display())))
        })
        .collect::<Result<Vec<usize>, CliError>>()?;
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64, CliError> {
            rec.get(c)
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Usage(format!("{}: row {} has a bad number in column {}", path.display(), k + 1, &headers[c])))
        };
        let values = scols.iter().map(|&c| num(c)).collect::<Result<Vec<f64>, CliError>>()?;
        let mut obs = FieldObservation::new(k, num(tcol)?, values);
        if let Some(c) = ccol {
            let v = &rec[c];
            if !v.is_empty() {
                obs.cluster = Some(v.parse().map_err(|_| CliError::Usage(format!("{}: row {} has a bad cluster id", path.display(), k + 1)))?);
            }
        }
        out.push(obs);
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("{}: no observations", path.display())));
    }
    Ok(out)
}

/// Identifies the inputs behind every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(config_sha256: &str, seed: Option<u64>) -> Self {
        Self {
            tool: "rpareto".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: config_sha256.into(),
            seed,
        }
    }

    fn header_line(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!("# {} {} config_sha256={} seed={}\n", self.tool, self.version, self.config_sha256, seed)
    }
}

pub struct Output {
    pub dir: PathBuf,
    pub provenance: Provenance,
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

impl Output {
    pub fn new(dir: PathBuf, provenance: Provenance) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self { dir, provenance })
    }

    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(&Stamped {
            provenance: &self.provenance,
            body,
        })?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    /// CSV with a provenance comment line; `rows` serialize to records.
    pub fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf, CliError> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        for r in rows {
            wtr.serialize(r)?;
        }
        self.write_csv_bytes(name, wtr)
    }

    /// CSV with explicit header and numeric rows.
    pub fn csv_table(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(header)?;
        for r in rows {
            wtr.write_record(r)?;
        }
        self.write_csv_bytes(name, wtr)
    }

    fn write_csv_bytes(&self, name: &str, wtr: csv::Writer<Vec<u8>>) -> Result<PathBuf, CliError> {
        let body = wtr.into_inner().map_err(|e| CliError::Usage(format!("csv error: {e}")))?;
        let mut bytes = self.provenance.header_line().into_bytes();
        bytes.extend_from_slice(&body);
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        Ok(path)
    }
}

/// Reads a JSON output back, ignoring its provenance block.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Usage(format!("malformed {}: {e}", path.display())))
}
