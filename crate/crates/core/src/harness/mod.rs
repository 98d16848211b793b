//! Experiment configs, seeded runs, sweeps and CSV emission.

pub mod dec_cli;
pub mod instances;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environments::{run_with, EnvSpec, RunOptions, RunReport};
use crate::error::Error;
use crate::learners::{InfoSetStructure, LearnerConfig, LearnerSpec};
use crate::rng::run_seed;
pub use instances::{BuiltInstance, EnvironmentConfig, InfoSpec, InstanceSpec};

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 10] =
    ["run_id", "seed", "T", "alpha", "algorithm", "risk", "regret", "bound", "cert_value", "audit_pass"];

/// Harness-level failures, each with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Malformed or inconsistent input; exit code 2.
    #[error("validation error: {0}")]
    Validation(String),
    /// A privacy audit failed; exit code 3.
    #[error("audit failure: {0}")]
    Audit(String),
    #[error(transparent)]
    Run(#[from] Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) => 2,
            HarnessError::Audit(_) => 3,
            HarnessError::Run(_) | HarnessError::Io(_) => 1,
        }
    }

    fn at(path: &str, e: impl std::fmt::Display) -> Self {
        HarnessError::Validation(format!("{path}: {e}"))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    pub count: usize,
    pub master: u64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub csv: Option<String>,
    /// Directory receiving one transcript JSON per run.
    #[serde(default)]
    pub transcripts: Option<String>,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub instance: InstanceSpec,
    pub learner: LearnerConfig,
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub info: Option<InfoSpec>,
    /// Horizons; falls back to `learner.horizon` when empty.
    #[serde(default, rename = "T")]
    pub horizons: Vec<usize>,
    pub seeds: SeedSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Replay every learner during the audit.
    #[serde(default = "default_true")]
    pub replay_audit: bool,
}

/// Discriminator keys of the internally tagged config enums.
const TAG_KEYS: [&str; 3] = ["kind", "builder", "id"];

/// Deserializes JSON, reporting the path of the first offending field.
///
/// Internally tagged enums buffer their content, which hides the path
/// below them; the path is then refined by finding the child whose removal
/// changes the error.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, HarnessError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| HarnessError::at(".", e))?;
    let try_parse = |v: &serde_json::Value| serde_path_to_error::deserialize::<_, T>(v);
    let err = match try_parse(&value) {
        Ok(t) => return Ok(t),
        Err(e) => e,
    };
    let msg = err.inner().to_string();
    let mut path: Vec<String> = err
        .path()
        .iter()
        .filter_map(|seg| match seg {
            serde_path_to_error::Segment::Map { key } => Some(key.clone()),
            serde_path_to_error::Segment::Seq { index } => Some(index.to_string()),
            _ => None,
        })
        .collect();
    while let Some(obj) = node_at(&value, &path).and_then(|n| n.as_object()) {
        let culprit = obj.keys().find(|k| {
            if TAG_KEYS.contains(&k.as_str()) && !msg.starts_with("unknown variant") {
                return false;
            }
            let mut probe = value.clone();
            if let Some(serde_json::Value::Object(m)) = node_at_mut(&mut probe, &path) {
                m.remove(*k);
            }
            match try_parse(&probe) {
                Ok(_) => true,
                Err(e) => e.inner().to_string() != msg,
            }
        });
        match culprit {
            Some(k) => path.push(k.clone()),
            None => break,
        }
    }
    let shown = if path.is_empty() { ".".to_string() } else { path.join(".") };
    Err(HarnessError::at(&shown, msg))
}

fn node_at<'a>(v: &'a serde_json::Value, path: &[String]) -> Option<&'a serde_json::Value> {
    path.iter().try_fold(v, |node, seg| match node {
        serde_json::Value::Object(m) => m.get(seg),
        serde_json::Value::Array(a) => seg.parse::<usize>().ok().and_then(|i| a.get(i)),
        _ => None,
    })
}

fn node_at_mut<'a>(v: &'a mut serde_json::Value, path: &[String]) -> Option<&'a mut serde_json::Value> {
    path.iter().try_fold(v, |node, seg| match node {
        serde_json::Value::Object(m) => m.get_mut(seg),
        serde_json::Value::Array(a) => seg.parse::<usize>().ok().and_then(move |i| a.get_mut(i)),
        _ => None,
    })
}

/// Parses a config and checks its schema version.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let cfg: ExperimentConfig = parse_json(text)?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(HarnessError::at(
            "schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", cfg.schema_version),
        ));
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// A config resolved against its instance.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub instance: BuiltInstance,
    pub info: Option<InfoSetStructure>,
    pub env: EnvSpec,
    pub horizons: Vec<usize>,
}

impl ExperimentConfig {
    pub fn prepare(&self) -> Result<Prepared, HarnessError> {
        if self.seeds.count == 0 {
            return Err(HarnessError::at("seeds.count", "must be at least 1"));
        }
        let horizons = if self.horizons.is_empty() { vec![self.learner.horizon] } else { self.horizons.clone() };
        if horizons.contains(&0) {
            return Err(HarnessError::at("T", "horizons must be positive"));
        }
        let mut probe = self.learner.clone();
        probe.horizon = horizons[0];
        probe.validate().map_err(|e| HarnessError::at("learner", e))?;
        let instance = self.instance.build().map_err(|e| HarnessError::at("instance", e))?;
        let info = match &self.info {
            Some(s) => Some(s.build(&instance).map_err(|e| HarnessError::at("info", e))?),
            None => None,
        };
        if self.learner.algorithm == crate::learners::Algorithm::ExoPlus && info.is_none() {
            return Err(HarnessError::at("info", "exo_plus needs an information set structure"));
        }
        let env = self.environment.resolve(&instance).map_err(|e| HarnessError::at("environment", e))?;
        Ok(Prepared { instance, info, env, horizons })
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: usize,
    pub seed: u64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub alpha: f64,
    pub algorithm: String,
    pub risk: f64,
    pub regret: f64,
    pub bound: f64,
    pub cert_value: f64,
    pub audit_pass: bool,
}

impl ResultRow {
    fn from_report(run_id: usize, r: &RunReport) -> Self {
        Self {
            run_id,
            seed: r.seed,
            horizon: r.horizon,
            alpha: r.alpha,
            algorithm: r.algorithm.clone(),
            risk: r.risk,
            regret: r.regret,
            bound: r.bound,
            cert_value: r.cert_value,
            audit_pass: r.audit.pass,
        }
    }

    fn fields(&self) -> [String; 10] {
        [
            self.run_id.to_string(),
            self.seed.to_string(),
            self.horizon.to_string(),
            self.alpha.to_string(),
            self.algorithm.clone(),
            self.risk.to_string(),
            self.regret.to_string(),
            self.bound.to_string(),
            self.cert_value.to_string(),
            self.audit_pass.to_string(),
        ]
    }
}

/// Worker count from `PRIDEC_THREADS`, defaulting to rayon's choice.
pub fn thread_count() -> Option<usize> {
    std::env::var("PRIDEC_THREADS").ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0)
}

/// Runs every `(T, seed)` pair; run `i·count + s` uses horizon `T_i` and
/// seed `run_seed(master, s)`. Rows come back sorted by run id.
pub fn run_experiment(cfg: &ExperimentConfig, horizons: Option<&[usize]>) -> Result<Vec<(ResultRow, RunReport)>, HarnessError> {
    let prep = cfg.prepare()?;
    let horizons = horizons.map(|h| h.to_vec()).unwrap_or(prep.horizons.clone());
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(HarnessError::at("T", "horizons must be positive"));
    }
    let count = cfg.seeds.count;
    let jobs: Vec<(usize, usize, u64)> = horizons
        .iter()
        .enumerate()
        .flat_map(|(i, &t)| (0..count).map(move |s| (i * count + s, t, s as u64)))
        .collect();
    let keep = cfg.output.transcripts.is_some();
    let work = || {
        jobs.par_iter()
            .map(|&(run_id, t, s)| {
                let mut lc = cfg.learner.clone();
                lc.horizon = t;
                let spec = LearnerSpec { config: lc, problem: prep.instance.problem.clone(), info: prep.info.clone() };
                let seed = run_seed(cfg.seeds.master, s);
                let report =
                    run_with(&spec, &prep.env, seed, RunOptions { replay: cfg.replay_audit, keep_transcript: keep })?;
                Ok((ResultRow::from_report(run_id, &report), report))
            })
            .collect::<Result<Vec<_>, Error>>()
    };
    let mut out = match thread_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Validation(format!("PRIDEC_THREADS: {e}")))?
            .install(work)?,
        None => work()?,
    };
    out.sort_by_key(|(row, _)| row.run_id);
    if let Some(dir) = &cfg.output.transcripts {
        std::fs::create_dir_all(dir)?;
        for (row, rep) in &out {
            if let Some(t) = &rep.transcript {
                let path = Path::new(dir).join(format!("run_{:06}.json", row.run_id));
                std::fs::write(path, serde_json::to_string(t).map_err(|e| HarnessError::Validation(e.to_string()))?)?;
            }
        }
    }
    Ok(out)
}

/// CSV bytes with the fixed header and LF line endings.
pub fn csv_bytes(rows: &[ResultRow]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record(r.fields()).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&csv_bytes(rows))?;
    Ok(())
}

/// Rows whose audit failed.
pub fn audit_failures(rows: &[ResultRow]) -> Vec<usize> {
    rows.iter().filter(|r| !r.audit_pass).map(|r| r.run_id).collect()
}
