//! Config-driven trial runner.
//!
//! A config is a flat `key = value` text file (`#` starts a comment). Each
//! trial `t` draws one seeded column order with seed `base_seed + t`; the
//! sample for every `l` is a prefix of it, so a trial's samples are nested.
//! The source matrix and its true coherence are computed once per run.
//!
//! Raw rows are written in `(trial, l, method)` order whatever order the
//! trials finish in, and floats use shortest round-trip formatting, so
//! reruns of one config produce byte-identical files. Wall times are only
//! recorded when asked for, because they would break that property.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherence::{estimate_coherence, exact_coherence};
use crate::error::{Error, Result};
use crate::io::{load_csv, load_matrix_market};
use crate::kernels::{
    build_kernel, energy_rank, KernelSpec, DEFAULT_POLY_DEGREE, DEFAULT_POLY_OFFSET,
};
use crate::lowrank::{approximate, Method};
use crate::matrix::{numerical_rank, singular_values, DenseMatrix, RankThreshold};
use crate::sampling::{shuffled_prefix, ColumnSample, RNG_NAME};
use crate::synthgen::{
    make_pathological, make_synthetic, make_worstcase_spsd, CoherenceLevel, Decay, SynthSpec,
    WorstCaseSpec, DEFAULT_INFLATION,
};

/// Header of the raw results CSV.
pub const RAW_HEADER: &str = "experiment_id,kind,trial,seed,l,r_used,gamma_true,gamma_est,abs_error,method,normalized_error,rng_name,wall_time_ms";

/// Header of the summary CSV.
pub const SUMMARY_HEADER: &str = "experiment_id,kind,l,method,trials,gamma_true,gamma_est_mean,gamma_est_std,abs_error_mean,abs_error_std,normalized_error_mean,normalized_error_std";

/// Inner dimension of the worst-case SPSD factor at desk scale.
pub const DEFAULT_INNER_DIM: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    WorstCase,
    SynthExact,
    SynthNoisy,
    KernelSuite,
    CoherenceOnly,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::WorstCase => "worst_case",
            ExperimentKind::SynthExact => "synth_exact",
            ExperimentKind::SynthNoisy => "synth_noisy",
            ExperimentKind::KernelSuite => "kernel_suite",
            ExperimentKind::CoherenceOnly => "coherence_only",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ExperimentKind::WorstCase,
            ExperimentKind::SynthExact,
            ExperimentKind::SynthNoisy,
            ExperimentKind::KernelSuite,
            ExperimentKind::CoherenceOnly,
        ]
        .into_iter()
        .find(|k| k.as_str() == s.trim())
        .ok_or_else(|| Error::Config(format!("unknown experiment kind '{s}'")))
    }
}

/// Kernel as written in a config; a missing RBF width means the median
/// pairwise distance of the (possibly standardized) points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelChoice {
    Linear,
    Rbf { width: Option<f64> },
    Polynomial { degree: u32, offset: f64 },
}

impl KernelChoice {
    pub fn resolve(&self, data: &crate::kernels::PointDataset) -> Result<KernelSpec> {
        let spec = match *self {
            KernelChoice::Linear => KernelSpec::Linear,
            KernelChoice::Rbf { width: Some(width) } => KernelSpec::Rbf { width },
            KernelChoice::Rbf { width: None } => KernelSpec::rbf_default(data)?,
            KernelChoice::Polynomial { degree, offset } => {
                KernelSpec::Polynomial { degree, offset }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Synthetic(SynthSpec),
    Pathological {
        n: usize,
        m: usize,
        r: usize,
    },
    WorstCase(WorstCaseSpec),
    Points {
        path: PathBuf,
        kernel: KernelChoice,
        standardize: bool,
    },
    Matrix {
        path: PathBuf,
    },
}

impl Source {
    /// The matrix the experiment samples from.
    pub fn build(&self) -> Result<DenseMatrix> {
        match self {
            Source::Synthetic(spec) => make_synthetic(spec),
            Source::Pathological { n, m, r } => make_pathological(*n, *m, *r),
            Source::WorstCase(spec) => make_worstcase_spsd(spec),
            Source::Points {
                path,
                kernel,
                standardize,
            } => {
                let mut data = load_csv(path)?;
                if *standardize {
                    data = data.standardize();
                }
                let spec = kernel.resolve(&data)?;
                build_kernel(&data, &spec)
            }
            Source::Matrix { path } => load_matrix_market(path),
        }
    }
}

/// How the target rank `r` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RankPolicy {
    Explicit(usize),
    /// Smallest rank holding this fraction of the squared singular values.
    Energy(f64),
    /// Numerical rank of the source matrix.
    Numerical,
}

impl RankPolicy {
    pub fn resolve(&self, x: &DenseMatrix) -> Result<usize> {
        let r = match *self {
            RankPolicy::Explicit(r) => r,
            RankPolicy::Energy(f) => energy_rank(x, f)?,
            RankPolicy::Numerical => {
                let sv = singular_values(x)?;
                numerical_rank(&sv, RankThreshold::for_shape(x.rows(), x.cols()))
            }
        };
        if r == 0 {
            return Err(Error::Config("rank policy selected r = 0".into()));
        }
        Ok(r)
    }
}

impl FromStr for RankPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || {
            Error::Config(format!(
                "bad r_policy '{s}'; use explicit:R, energy:F or rank"
            ))
        };
        if s == "rank" {
            return Ok(RankPolicy::Numerical);
        }
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        match kind.trim() {
            "explicit" => Ok(RankPolicy::Explicit(
                value.trim().parse().map_err(|_| bad())?,
            )),
            "energy" => {
                let f: f64 = value.trim().parse().map_err(|_| bad())?;
                if !(f > 0.0 && f <= 1.0) {
                    return Err(bad());
                }
                Ok(RankPolicy::Energy(f))
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub id: String,
    pub kind: ExperimentKind,
    pub source: Source,
    /// Strictly increasing.
    pub l_values: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    pub r_policy: RankPolicy,
    /// Columns never sampled.
    pub exclude: BTreeSet<usize>,
    pub methods: Vec<Method>,
    pub output: PathBuf,
    pub record_timing: bool,
}

const KNOWN_KEYS: &[&str] = &[
    "id",
    "kind",
    "source",
    "n",
    "m",
    "r",
    "decay",
    "coherence",
    "noise",
    "seed",
    "path",
    "kernel",
    "width",
    "degree",
    "offset",
    "standardize",
    "inner_dim",
    "inflation",
    "exclude",
    "l_values",
    "trials",
    "base_seed",
    "r_policy",
    "methods",
    "output",
    "record_timing",
];

/// Parses `key = value` lines into a map; later duplicates are an error.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = key.trim().to_owned();
        if map.insert(key.clone(), value.trim().to_owned()).is_some() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("duplicate key '{key}'"),
            });
        }
    }
    Ok(map)
}

struct Keys<'a> {
    map: &'a BTreeMap<String, String>,
}

impl Keys<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("invalid value '{v}' for '{key}'")))
            })
            .transpose()
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse(key)?
            .ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
    }
}

/// Comma-separated integers; `a:b:step` expands to an inclusive range.
fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let bad = |t: &str| Error::Config(format!("invalid entry '{t}' in '{key}'"));
    let mut out = Vec::new();
    for token in value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let parts: Vec<&str> = token.split(':').collect();
        match parts.as_slice() {
            [single] => out.push(single.parse().map_err(|_| bad(token))?),
            [a, b, step] => {
                let (a, b, step): (usize, usize, usize) = (
                    a.parse().map_err(|_| bad(token))?,
                    b.parse().map_err(|_| bad(token))?,
                    step.parse().map_err(|_| bad(token))?,
                );
                if step == 0 || a > b {
                    return Err(bad(token));
                }
                out.extend((a..=b).step_by(step));
            }
            _ => return Err(bad(token)),
        }
    }
    Ok(out)
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config(format!(
            "invalid boolean '{other}' for '{key}'"
        ))),
    }
}

impl ExperimentConfig {
    /// Builds a config from parsed keys. Relative data paths are resolved
    /// against `base_dir`.
    pub fn from_map(map: &BTreeMap<String, String>, base_dir: &Path) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key '{k}'")));
        }
        let keys = Keys { map };
        let kind: ExperimentKind = keys.required("kind")?;
        let default_source = match kind {
            ExperimentKind::WorstCase => Some("worst_case"),
            ExperimentKind::SynthExact | ExperimentKind::SynthNoisy => Some("synthetic"),
            ExperimentKind::KernelSuite => Some("points"),
            ExperimentKind::CoherenceOnly => None,
        };
        let source_name = keys
            .raw("source")
            .or(default_source)
            .ok_or_else(|| Error::Config("missing required key 'source'".into()))?;
        let data_path = || -> Result<PathBuf> {
            let p: PathBuf = keys.required("path")?;
            Ok(if p.is_relative() { base_dir.join(p) } else { p })
        };
        let source = match source_name {
            "synthetic" => {
                let n = keys.or("n", 400)?;
                let noise = keys.parse::<f64>("noise")?;
                Source::Synthetic(SynthSpec {
                    n,
                    m: keys.or("m", n)?,
                    r: keys.or("r", 20)?,
                    decay: keys.or("decay", Decay::Medium)?,
                    coherence: keys.or("coherence", CoherenceLevel::Low)?,
                    noise,
                    seed: keys.or("seed", 0)?,
                })
            }
            "pathological" => {
                let n = keys.or("n", 400)?;
                Source::Pathological {
                    n,
                    m: keys.or("m", n)?,
                    r: keys.or("r", 20)?,
                }
            }
            "worst_case" => Source::WorstCase(WorstCaseSpec {
                n: keys.or("n", 400)?,
                inner_dim: keys.or("inner_dim", DEFAULT_INNER_DIM)?,
                inflation: keys.or("inflation", DEFAULT_INFLATION)?,
                seed: keys.or("seed", 0)?,
            }),
            "points" => {
                let kernel = match keys.raw("kernel").unwrap_or("rbf") {
                    "linear" => KernelChoice::Linear,
                    "rbf" => KernelChoice::Rbf {
                        width: keys.parse("width")?,
                    },
                    "polynomial" => KernelChoice::Polynomial {
                        degree: keys.or("degree", DEFAULT_POLY_DEGREE)?,
                        offset: keys.or("offset", DEFAULT_POLY_OFFSET)?,
                    },
                    other => return Err(Error::Config(format!("unknown kernel '{other}'"))),
                };
                let standardize = match keys.raw("standardize") {
                    Some(v) => parse_bool("standardize", v)?,
                    None => false,
                };
                Source::Points {
                    path: data_path()?,
                    kernel,
                    standardize,
                }
            }
            "matrix" => Source::Matrix { path: data_path()? },
            other => return Err(Error::Config(format!("unknown source '{other}'"))),
        };

        let r_policy = match keys.parse::<RankPolicy>("r_policy")? {
            Some(p) => p,
            None => match &source {
                Source::Synthetic(s) => RankPolicy::Explicit(s.r),
                Source::Pathological { r, .. } => RankPolicy::Explicit(*r),
                Source::Points { .. } => RankPolicy::Energy(0.99),
                Source::WorstCase(_) | Source::Matrix { .. } => RankPolicy::Numerical,
            },
        };
        let exclude = match keys.raw("exclude") {
            Some(v) => parse_usize_list("exclude", v)?.into_iter().collect(),
            None if kind == ExperimentKind::WorstCase => BTreeSet::from([0]),
            None => BTreeSet::new(),
        };
        let methods = match keys.raw("methods") {
            Some("none") | Some("") => Vec::new(),
            Some(v) => v
                .split(',')
                .map(|t| {
                    t.parse::<Method>()
                        .map_err(|e| Error::Config(e.to_string()))
                })
                .collect::<Result<_>>()?,
            None if kind == ExperimentKind::KernelSuite => {
                vec![Method::ColumnProjection, Method::Nystrom]
            }
            None => Vec::new(),
        };
        let id = keys.raw("id").unwrap_or(kind.as_str()).to_owned();
        let output = keys
            .parse::<PathBuf>("output")?
            .unwrap_or_else(|| PathBuf::from(format!("{id}.csv")));
        let record_timing = match keys.raw("record_timing") {
            Some(v) => parse_bool("record_timing", v)?,
            None => false,
        };
        let l_values = parse_usize_list(
            "l_values",
            keys.raw("l_values")
                .ok_or_else(|| Error::Config("missing required key 'l_values'".into()))?,
        )?;

        let config = Self {
            id,
            kind,
            source,
            l_values,
            trials: keys.or("trials", 10)?,
            base_seed: keys.or("base_seed", 0)?,
            r_policy,
            exclude,
            methods,
            output,
            record_timing,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_map(&parse_config_text(text)?, Path::new("."))
    }

    /// Reads a config file, applies `overrides` on top of its keys, and
    /// resolves data paths relative to the file.
    pub fn from_file(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let mut map = parse_config_text(&fs::read_to_string(path)?)?;
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_map(&map, base)
    }

    /// Checks everything that does not need the source matrix.
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains(',') {
            return Err(Error::Config(
                "id must be non-empty and contain no commas".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.l_values.is_empty() || self.l_values[0] == 0 {
            return Err(Error::Config(
                "l_values must be non-empty and positive".into(),
            ));
        }
        if self.l_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("l_values must be strictly increasing".into()));
        }
        if let RankPolicy::Explicit(0) = self.r_policy {
            return Err(Error::Config("explicit rank must be positive".into()));
        }
        match (&self.kind, &self.source) {
            (ExperimentKind::SynthExact, Source::Synthetic(s)) if s.noise.is_none() => {}
            (ExperimentKind::SynthExact, _) => {
                return Err(Error::Config(
                    "synth_exact needs a noiseless synthetic source".into(),
                ))
            }
            (ExperimentKind::SynthNoisy, Source::Synthetic(s)) if s.noise.is_some() => {}
            (ExperimentKind::SynthNoisy, _) => {
                return Err(Error::Config(
                    "synth_noisy needs a synthetic source with 'noise'".into(),
                ))
            }
            (ExperimentKind::WorstCase, Source::WorstCase(_)) => {}
            (ExperimentKind::WorstCase, _) => {
                return Err(Error::Config(
                    "worst_case needs the worst_case source".into(),
                ))
            }
            (ExperimentKind::KernelSuite, Source::Points { .. } | Source::Matrix { .. }) => {}
            (ExperimentKind::KernelSuite, _) => {
                return Err(Error::Config(
                    "kernel_suite needs a points or matrix source".into(),
                ))
            }
            (ExperimentKind::CoherenceOnly, _) => {}
        }
        if let Source::Synthetic(s) = &self.source {
            s.validate()?;
        }
        Ok(())
    }

    /// Output location; a relative path is placed under `dir` when given.
    pub fn output_path(&self, dir: Option<&Path>) -> PathBuf {
        match dir {
            Some(d) if self.output.is_relative() => d.join(&self.output),
            _ => self.output.clone(),
        }
    }
}

/// One raw output row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub experiment_id: String,
    pub kind: ExperimentKind,
    pub trial: usize,
    pub seed: u64,
    pub l: usize,
    pub r_used: usize,
    pub gamma_true: f64,
    pub gamma_est: f64,
    /// `|gamma_true - gamma_est|`.
    pub abs_error: f64,
    pub method: Option<Method>,
    pub normalized_error: Option<f64>,
    pub rng_name: String,
    pub wall_time_ms: Option<u64>,
}

/// Runs every trial of `config` and returns the rows in output order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    config.validate()?;
    let x = config.source.build()?;
    let m = x.cols();
    if let Some(&j) = config.exclude.iter().find(|&&j| j >= m) {
        return Err(Error::Config(format!(
            "excluded column {j} out of range for {m} columns"
        )));
    }
    let pool: Vec<usize> = (0..m).filter(|j| !config.exclude.contains(j)).collect();
    let l_max = *config.l_values.last().expect("validated non-empty");
    if l_max > pool.len() {
        return Err(Error::Config(format!(
            "l = {l_max} exceeds the {} sampleable columns",
            pool.len()
        )));
    }
    let r = config.r_policy.resolve(&x)?;
    let gamma_true = exact_coherence(&x, Some(r))?.gamma;

    let per_trial: Vec<Result<Vec<TrialResult>>> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, &x, &pool, r, gamma_true, t))
        .collect();
    let mut rows = Vec::new();
    for trial_rows in per_trial {
        rows.extend(trial_rows?);
    }
    Ok(rows)
}

fn run_trial(
    config: &ExperimentConfig,
    x: &DenseMatrix,
    pool: &[usize],
    r: usize,
    gamma_true: f64,
    trial: usize,
) -> Result<Vec<TrialResult>> {
    let seed = config.base_seed.wrapping_add(trial as u64);
    let l_max = *config.l_values.last().expect("validated non-empty");
    let order = shuffled_prefix(pool.to_vec(), l_max, seed);
    let timing = |start: Instant| {
        config
            .record_timing
            .then(|| start.elapsed().as_millis() as u64)
    };
    let mut rows = Vec::new();
    for &l in &config.l_values {
        let start = Instant::now();
        let sample = ColumnSample::from_indices(x, order[..l].to_vec(), seed)?;
        let gamma_est = estimate_coherence(&sample.submatrix, r)?.gamma;
        let row = TrialResult {
            experiment_id: config.id.clone(),
            kind: config.kind,
            trial,
            seed,
            l,
            r_used: r,
            gamma_true,
            gamma_est,
            abs_error: (gamma_true - gamma_est).abs(),
            method: None,
            normalized_error: None,
            rng_name: RNG_NAME.to_owned(),
            wall_time_ms: timing(start),
        };
        if config.methods.is_empty() {
            rows.push(row);
            continue;
        }
        for &method in &config.methods {
            let start = Instant::now();
            let approx = approximate(x, &sample, method)?;
            rows.push(TrialResult {
                method: Some(method),
                normalized_error: Some(approx.normalized_error),
                wall_time_ms: timing(start),
                ..row.clone()
            });
        }
    }
    Ok(rows)
}

pub fn write_raw_csv<W: std::io::Write>(writer: W, rows: &[TrialResult]) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    out.write_record(RAW_HEADER.split(','))?;
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_raw_csv<R: std::io::Read>(reader: R) -> Result<Vec<TrialResult>> {
    let mut csv = csv::Reader::from_reader(reader);
    let header: Vec<String> = csv.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != RAW_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header '{}'", header.join(",")),
        });
    }
    csv.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Writes through a sibling temporary file so a failed run never leaves a
/// partial output behind.
pub fn write_atomically(
    path: &Path,
    write: impl FnOnce(&mut fs::File) -> Result<()>,
) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    let result = fs::File::create(&tmp)
        .map_err(Error::from)
        .and_then(|mut f| {
            write(&mut f)?;
            f.sync_all()?;
            Ok(())
        })
        .and_then(|()| fs::rename(&tmp, path).map_err(Error::from));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Runs the experiment and writes the raw CSV to `path`.
pub fn run_to_file(config: &ExperimentConfig, path: &Path) -> Result<Vec<TrialResult>> {
    let rows = run_experiment(config)?;
    write_atomically(path, |f| write_raw_csv(f, &rows))?;
    Ok(rows)
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment_id: String,
    pub kind: ExperimentKind,
    pub l: usize,
    pub method: Option<Method>,
    pub trials: usize,
    /// Mean over the group; constant within one run.
    pub gamma_true: f64,
    pub gamma_est_mean: f64,
    pub gamma_est_std: f64,
    pub abs_error_mean: f64,
    pub abs_error_std: f64,
    pub normalized_error_mean: Option<f64>,
    pub normalized_error_std: Option<f64>,
}

/// One row per `(experiment, l, method)`, ordered by those keys.
pub fn summarize(rows: &[TrialResult]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no results to summarize".into()));
    }
    let mut groups: BTreeMap<(String, usize, Option<&'static str>), Vec<&TrialResult>> =
        BTreeMap::new();
    for row in rows {
        groups
            .entry((
                row.experiment_id.clone(),
                row.l,
                row.method.map(Method::as_str),
            ))
            .or_default()
            .push(row);
    }
    Ok(groups
        .into_values()
        .map(|g| {
            let col = |f: fn(&TrialResult) -> f64| g.iter().map(|r| f(r)).collect::<Vec<_>>();
            let (gamma_true, _) = mean_std(&col(|r| r.gamma_true));
            let (ge_mean, ge_std) = mean_std(&col(|r| r.gamma_est));
            let (ae_mean, ae_std) = mean_std(&col(|r| r.abs_error));
            let normalized: Vec<f64> = g.iter().filter_map(|r| r.normalized_error).collect();
            let (ne_mean, ne_std) = if normalized.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&normalized);
                (Some(m), Some(s))
            };
            SummaryRow {
                experiment_id: g[0].experiment_id.clone(),
                kind: g[0].kind,
                l: g[0].l,
                method: g[0].method,
                trials: g.len(),
                gamma_true,
                gamma_est_mean: ge_mean,
                gamma_est_std: ge_std,
                abs_error_mean: ae_mean,
                abs_error_std: ae_std,
                normalized_error_mean: ne_mean,
                normalized_error_std: ne_std,
            }
        })
        .collect())
}

pub fn write_summary_csv<W: std::io::Write>(writer: W, summary: &[SummaryRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    out.write_record(SUMMARY_HEADER.split(','))?;
    for row in summary {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}
