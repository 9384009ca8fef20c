//! Monte Carlo benchmark harness: RMSE of each estimator over a sweep of
//! transmit power, k, or wall reflectance.
//!
//! # Randomness
//!
//! Everything is derived from `ExperimentSpec::master_seed` through named
//! substreams (see [`crate::rng`]):
//!
//! | stream                     | indices         | used for                         |
//! |----------------------------|-----------------|----------------------------------|
//! | `test-points`              | –               | PD locations under test          |
//! | `measurement`              | trial           | online measurement noise         |
//! | `database`                 | rows, cols      | seed for the grid's fingerprints |
//! | `pso/<estimator>`          | trial           | PSO seed                         |
//! | `bootstrap`                | –               | bootstrap resampling             |
//!
//! None of the keys involve the sweep value, so every cell of a sweep sees the
//! same test points and the same standard-normal noise draws (common random
//! numbers), and results do not depend on the worker count.
//!
//! # Result file
//!
//! ```text
//! # vlp-results v1 spec=<16 hex> seed=<master seed> sweep=<tx_power|k|reflectance>
//! value,estimator,k,grid,rmse_m,mean_error_m,p90_error_m,trials
//! 20,danls,3,10x10,0.0931...,0.0812...,0.151...,200
//! # failure value=20 estimator=fp k=900 grid=10x10 message=k = 900 is out of range for 100 points
//! ```
//!
//! `k` is empty for estimators that do not use it. Numbers use the shortest
//! exact decimal form. Wall-clock timings are kept out of the file so that
//! identical specs produce byte-identical output.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channel::{Channel, ChannelError, NlosCache};
use crate::database::{build_database_with, grid_locations, Database, PowerVector};
use crate::estimators::{estimate, Estimate, EstimatorInput, Method};
use crate::optimizer::PsoConfig;
use crate::rng::{derive_seed, substream};
use crate::scene::{Room, Scene, Vec3};

const RESULTS_TAG: &str = "# vlp-results v1";
const DETAILS_TAG: &str = "# vlp-details v1";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("estimate and truth lists differ in length ({estimates} vs {truths})")]
    LengthMismatch { estimates: usize, truths: usize },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("malformed result file, line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
}

impl Grid {
    pub const fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn points(&self) -> usize {
        self.rows * self.cols
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

impl FromStr for Grid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (r, c) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("grid `{s}` is not of the form ROWSxCOLS"))?;
        let rows = r.trim().parse().map_err(|e| format!("grid rows: {e}"))?;
        let cols = c.trim().parse().map_err(|e| format!("grid cols: {e}"))?;
        if rows == 0 || cols == 0 {
            return Err("grid dimensions must be >= 1".into());
        }
        Ok(Grid { rows, cols })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    TxPower,
    K,
    Reflectance,
}

impl SweepVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVariable::TxPower => "tx_power",
            SweepVariable::K => "k",
            SweepVariable::Reflectance => "reflectance",
        }
    }
}

impl FromStr for SweepVariable {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "tx_power" | "power" | "ptx" => Ok(SweepVariable::TxPower),
            "k" => Ok(SweepVariable::K),
            "reflectance" | "rho" => Ok(SweepVariable::Reflectance),
            other => Err(format!("unknown sweep variable `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub method: Method,
    /// Neighbor count; ignored by NLS and overridden by a k sweep.
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scene: Scene,
    pub estimators: Vec<EstimatorSpec>,
    pub sweep: Sweep,
    pub test_point_count: usize,
    pub master_seed: u64,
    pub grids: Vec<Grid>,
    #[serde(default)]
    pub pso: PsoConfig,
    /// Keep using the database collected at the first sweep value even when
    /// later values change the channel (a stale-database study).
    #[serde(default)]
    pub reuse_first_database: bool,
}

impl ExperimentSpec {
    /// Transmit-power sweep over {0.01, 0.1, 1, 5, 20, 50} W on the 10×10 and
    /// 28×28 grids with FP, NLS and DA-NLS at k = 3.
    pub fn desk(scene: Scene) -> Self {
        Self {
            scene,
            estimators: vec![
                EstimatorSpec {
                    method: Method::Fingerprint,
                    k: 3,
                },
                EstimatorSpec {
                    method: Method::Nls,
                    k: 3,
                },
                EstimatorSpec {
                    method: Method::DaNls,
                    k: 3,
                },
            ],
            sweep: Sweep {
                variable: SweepVariable::TxPower,
                values: vec![0.01, 0.1, 1.0, 5.0, 20.0, 50.0],
            },
            test_point_count: 200,
            master_seed: 1,
            grids: vec![Grid::new(10, 10), Grid::new(28, 28)],
            pso: PsoConfig::default(),
            reuse_first_database: false,
        }
    }

    /// [`ExperimentSpec::desk`] with 1000 test points.
    pub fn full(scene: Scene) -> Self {
        Self {
            test_point_count: 1000,
            ..Self::desk(scene)
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidSpec(m));
        self.scene
            .validate()
            .map_err(|e| BenchError::InvalidSpec(e.to_string()))?;
        self.pso
            .validate()
            .map_err(|e| BenchError::InvalidSpec(e.to_string()))?;
        if self.sweep.values.is_empty() {
            return bad("sweep has no values".into());
        }
        if self.test_point_count == 0 {
            return bad("test_point_count must be >= 1".into());
        }
        if self.estimators.is_empty() {
            return bad("no estimators selected".into());
        }
        if self.grids.is_empty() {
            return bad("at least one grid is required".into());
        }
        if self.grids.iter().any(|g| g.rows == 0 || g.cols == 0) {
            return bad("grid dimensions must be >= 1".into());
        }
        for &v in &self.sweep.values {
            let ok = match self.sweep.variable {
                SweepVariable::TxPower => v.is_finite() && v >= 0.0,
                SweepVariable::Reflectance => v.is_finite(),
                SweepVariable::K => v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64,
            };
            if !ok {
                return bad(format!(
                    "sweep value {v} is not valid for {}",
                    self.sweep.variable.as_str()
                ));
            }
        }
        Ok(())
    }

    /// Short content hash of the spec.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes to JSON");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub value: f64,
    pub method: Method,
    pub k: Option<usize>,
    pub grid: Grid,
    pub rmse: f64,
    pub mean_error: f64,
    pub p90_error: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub value: f64,
    pub method: Option<Method>,
    pub k: Option<usize>,
    pub grid: Option<Grid>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub value: f64,
    pub method: Method,
    pub k: Option<usize>,
    pub grid: Grid,
    pub trial: usize,
    pub truth: Vec3,
    pub estimate: Vec3,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub spec_hash: String,
    pub master_seed: u64,
    pub sweep_variable: SweepVariable,
    pub rows: Vec<ResultRow>,
    #[serde(default)]
    pub failures: Vec<CellFailure>,
    /// Per-trial records, in row order then trial order.
    #[serde(skip)]
    pub details: Vec<TrialRecord>,
    /// Wall-clock seconds per row, parallel to `rows`.
    #[serde(skip)]
    pub wall_times: Vec<f64>,
}

impl ResultTable {
    pub fn row(&self, value: f64, method: Method, grid: Grid) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.value == value && r.method == method && r.grid == grid)
    }

    /// Per-trial errors behind `row`, in trial order.
    pub fn errors_for(&self, row: &ResultRow) -> Vec<f64> {
        self.details
            .iter()
            .filter(|d| d.value == row.value && d.method == row.method && d.grid == row.grid && d.k == row.k)
            .map(|d| d.error)
            .collect()
    }
}

/// Uniform i.i.d. PD locations over the room footprint at height `pd_plane_z`.
pub fn generate_test_points(room: &Room, pd_plane_z: f64, count: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = substream(seed, "test-points", &[]);
    let (hw, hd) = (room.width / 2.0, room.depth / 2.0);
    (0..count)
        .map(|_| {
            let x = rng.random_range(-hw..=hw);
            let y = rng.random_range(-hd..=hd);
            Vec3::new(x, y, pd_plane_z)
        })
        .collect()
}

/// Root mean squared Euclidean error.
pub fn rmse(estimates: &[Vec3], truths: &[Vec3]) -> Result<f64, BenchError> {
    if estimates.len() != truths.len() || estimates.is_empty() {
        return Err(BenchError::LengthMismatch {
            estimates: estimates.len(),
            truths: truths.len(),
        });
    }
    let errors: Vec<f64> = estimates.iter().zip(truths).map(|(e, t)| e.distance(*t)).collect();
    Ok(rmse_of_errors(&errors))
}

pub fn rmse_of_errors(errors: &[f64]) -> f64 {
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// Nearest-rank percentile, `q` in (0, 1].
pub fn percentile(errors: &[f64], q: f64) -> f64 {
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Bootstrap standard error of the RMSE of `errors`.
pub fn bootstrap_rmse_se(errors: &[f64], resamples: usize, seed: u64) -> f64 {
    let mut rng = substream(seed, "bootstrap", &[]);
    let n = errors.len();
    let stats: Vec<f64> = (0..resamples)
        .map(|_| {
            let ms = (0..n).map(|_| errors[rng.random_range(0..n)].powi(2)).sum::<f64>() / n as f64;
            ms.sqrt()
        })
        .collect();
    let mean = stats.iter().sum::<f64>() / resamples as f64;
    (stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64).sqrt()
}

fn cell_scene(spec: &ExperimentSpec, value: f64) -> (Scene, Option<usize>) {
    match spec.sweep.variable {
        SweepVariable::TxPower => (spec.scene.with_tx_power(value), None),
        SweepVariable::Reflectance => (spec.scene.with_reflectance(value), None),
        SweepVariable::K => (spec.scene.clone(), Some(value as usize)),
    }
}

/// Channel and database identity, estimator, k, grid.
type MemoKey = (String, Method, Option<usize>, Option<Grid>);

/// Runs every sweep cell of `spec` on the current rayon pool.
///
/// Spec-level problems are returned as errors; problems confined to a single
/// cell (for example `k` larger than a grid) are recorded in
/// [`ResultTable::failures`] and the remaining cells still run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable, BenchError> {
    spec.validate()?;
    let master = spec.master_seed;
    let z = spec.scene.pd_plane_z();
    let truths = generate_test_points(&spec.scene.room, z, spec.test_point_count, master);
    let nlos_cache = Arc::new(NlosCache::new());
    let mut databases: HashMap<(String, Grid), Arc<Database>> = HashMap::new();
    let mut first_databases: HashMap<Grid, Arc<Database>> = HashMap::new();
    let mut estimates_memo: HashMap<MemoKey, Arc<Vec<Estimate>>> = HashMap::new();

    let mut table = ResultTable {
        spec_hash: spec.content_hash(),
        master_seed: master,
        sweep_variable: spec.sweep.variable,
        rows: Vec::new(),
        failures: Vec::new(),
        details: Vec::new(),
        wall_times: Vec::new(),
    };

    for &value in &spec.sweep.values {
        let (scene, k_override) = cell_scene(spec, value);
        if let Err(e) = scene.validate() {
            table.failures.push(CellFailure {
                value,
                method: None,
                k: None,
                grid: None,
                message: e.to_string(),
            });
            continue;
        }
        let scene_hash = scene.content_hash();
        let channel = Channel::with_cache(&scene, nlos_cache.clone());
        let measured: Vec<PowerVector> = truths
            .par_iter()
            .enumerate()
            .map(|(t, &p)| channel.measure_vector(p, &mut substream(master, "measurement", &[t as u64])))
            .collect::<Result<_, _>>()?;

        for &grid in &spec.grids {
            let needs_db = spec.estimators.iter().any(|e| e.method.uses_database());
            let db = if needs_db {
                let db = match (spec.reuse_first_database, first_databases.get(&grid)) {
                    (true, Some(db)) => db.clone(),
                    _ => databases
                        .entry((scene_hash.clone(), grid))
                        .or_insert_with(|| {
                            let locations = grid_locations(&scene.room, z, grid.rows, grid.cols);
                            let seed = derive_seed(master, "database", &[grid.rows as u64, grid.cols as u64]);
                            // locations come from the validated room, so collection cannot fail
                            Arc::new(build_database_with(&channel, &locations, seed).expect("grid inside room"))
                        })
                        .clone(),
                };
                first_databases.entry(grid).or_insert_with(|| db.clone());
                Some(db)
            } else {
                None
            };

            for est in &spec.estimators {
                let method = est.method;
                let k = method.uses_database().then(|| k_override.unwrap_or(est.k));
                let memo_key = (
                    db.as_ref()
                        .filter(|_| method.uses_database())
                        .map_or(scene_hash.clone(), |d| format!("{scene_hash}/{}", d.scene_hash())),
                    method,
                    k,
                    method.uses_database().then_some(grid),
                );
                let start = Instant::now();
                let estimates = match estimates_memo.get(&memo_key) {
                    Some(e) => Ok(e.clone()),
                    None => truths
                        .par_iter()
                        .enumerate()
                        .map(|(t, _)| {
                            let input = EstimatorInput::on_pd_plane(measured[t].clone(), &scene);
                            let pso_seed = derive_seed(master, &format!("pso/{method}"), &[t as u64]);
                            let pso = spec.pso.with_seed(pso_seed);
                            estimate(method, &input, db.as_deref(), k.unwrap_or(0), &pso)
                        })
                        .collect::<Result<Vec<_>, _>>()
                        .map(Arc::new),
                };
                let estimates = match estimates {
                    Ok(e) => {
                        estimates_memo.insert(memo_key, e.clone());
                        e
                    }
                    Err(err) => {
                        table.failures.push(CellFailure {
                            value,
                            method: Some(method),
                            k,
                            grid: Some(grid),
                            message: err.to_string(),
                        });
                        continue;
                    }
                };
                let errors: Vec<f64> = estimates
                    .iter()
                    .zip(&truths)
                    .map(|(e, t)| e.location.distance(*t))
                    .collect();
                for (trial, (e, t)) in estimates.iter().zip(&truths).enumerate() {
                    table.details.push(TrialRecord {
                        value,
                        method,
                        k,
                        grid,
                        trial,
                        truth: *t,
                        estimate: e.location,
                        error: errors[trial],
                    });
                }
                table.rows.push(ResultRow {
                    value,
                    method,
                    k,
                    grid,
                    rmse: rmse_of_errors(&errors),
                    mean_error: errors.iter().sum::<f64>() / errors.len() as f64,
                    p90_error: percentile(&errors, 0.9),
                    trials: errors.len(),
                });
                table.wall_times.push(start.elapsed().as_secs_f64());
            }
        }
    }
    Ok(table)
}

/// [`run_experiment`] on a dedicated pool of `workers` threads.
pub fn run_experiment_with_workers(spec: &ExperimentSpec, workers: usize) -> Result<ResultTable, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| BenchError::InvalidSpec(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(spec))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    /// Comma-delimited table with a `#` header line.
    Csv,
    /// JSON document.
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown output format `{other}` (expected csv or json)")),
        }
    }
}

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn emit_results<W: Write>(table: &ResultTable, format: OutputFormat, mut sink: W) -> io::Result<()> {
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut sink, table)?;
            writeln!(sink)?;
        }
        OutputFormat::Csv => {
            writeln!(
                sink,
                "{RESULTS_TAG} spec={} seed={} sweep={}",
                table.spec_hash,
                table.master_seed,
                table.sweep_variable.as_str()
            )?;
            writeln!(sink, "value,estimator,k,grid,rmse_m,mean_error_m,p90_error_m,trials")?;
            for r in &table.rows {
                writeln!(
                    sink,
                    "{},{},{},{},{},{},{},{}",
                    r.value,
                    r.method,
                    opt(r.k),
                    r.grid,
                    r.rmse,
                    r.mean_error,
                    r.p90_error,
                    r.trials
                )?;
            }
            for f in &table.failures {
                writeln!(
                    sink,
                    "# failure value={} estimator={} k={} grid={} message={}",
                    f.value,
                    f.method.map_or("-".to_string(), |m| m.to_string()),
                    f.k.map_or("-".to_string(), |k| k.to_string()),
                    f.grid.map_or("-".to_string(), |g| g.to_string()),
                    f.message.replace(['\n', '\r'], " ")
                )?;
            }
        }
    }
    sink.flush()
}

pub fn emit_details<W: Write>(table: &ResultTable, mut sink: W) -> io::Result<()> {
    writeln!(
        sink,
        "{DETAILS_TAG} spec={} seed={}",
        table.spec_hash, table.master_seed
    )?;
    writeln!(
        sink,
        "value,estimator,k,grid,trial,truth_x,truth_y,truth_z,est_x,est_y,est_z,error_m"
    )?;
    for d in &table.details {
        writeln!(
            sink,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            d.value,
            d.method,
            opt(d.k),
            d.grid,
            d.trial,
            d.truth.x,
            d.truth.y,
            d.truth.z,
            d.estimate.x,
            d.estimate.y,
            d.estimate.z,
            d.error
        )?;
    }
    sink.flush()
}

fn parse_err(line: usize, message: impl Into<String>) -> BenchError {
    BenchError::Parse {
        line,
        message: message.into(),
    }
}

fn field<T: FromStr>(line: usize, name: &str, v: &str) -> Result<T, BenchError>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| parse_err(line, format!("{name}: {e}")))
}

fn optional<T: FromStr>(line: usize, name: &str, v: &str) -> Result<Option<T>, BenchError>
where
    T::Err: fmt::Display,
{
    if v.is_empty() || v == "-" {
        Ok(None)
    } else {
        field(line, name, v).map(Some)
    }
}

fn parse_failure(line: usize, rest: &str) -> Result<CellFailure, BenchError> {
    let (head, message) = rest
        .split_once(" message=")
        .ok_or_else(|| parse_err(line, "failure line without message"))?;
    let mut kv = HashMap::new();
    for token in head.split_whitespace() {
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("bad token `{token}`")))?;
        kv.insert(k, v);
    }
    let get = |k: &str| {
        kv.get(k)
            .copied()
            .ok_or_else(|| parse_err(line, format!("missing {k}")))
    };
    Ok(CellFailure {
        value: field(line, "value", get("value")?)?,
        method: optional(line, "estimator", get("estimator")?)?,
        k: optional(line, "k", get("k")?)?,
        grid: optional(line, "grid", get("grid")?)?,
        message: message.to_string(),
    })
}

/// Parses a CSV result file written by [`emit_results`].
pub fn parse_results_csv<R: BufRead>(source: R) -> Result<ResultTable, BenchError> {
    let mut lines = source.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty file"))??;
    let rest = header
        .strip_prefix(RESULTS_TAG)
        .ok_or_else(|| parse_err(1, format!("expected `{RESULTS_TAG}`")))?;
    let mut spec_hash = None;
    let mut seed = None;
    let mut sweep = None;
    for token in rest.split_whitespace() {
        match token.split_once('=') {
            Some(("spec", v)) => spec_hash = Some(v.to_string()),
            Some(("seed", v)) => seed = Some(field::<u64>(1, "seed", v)?),
            Some(("sweep", v)) => sweep = Some(field::<SweepVariable>(1, "sweep", v)?),
            _ => return Err(parse_err(1, format!("unexpected token `{token}`"))),
        }
    }
    let mut table = ResultTable {
        spec_hash: spec_hash.ok_or_else(|| parse_err(1, "missing spec="))?,
        master_seed: seed.ok_or_else(|| parse_err(1, "missing seed="))?,
        sweep_variable: sweep.ok_or_else(|| parse_err(1, "missing sweep="))?,
        rows: Vec::new(),
        failures: Vec::new(),
        details: Vec::new(),
        wall_times: Vec::new(),
    };
    lines.next().ok_or_else(|| parse_err(2, "missing column header"))??;
    for (i, l) in lines.enumerate() {
        let line = i + 3;
        let l = l?;
        if l.is_empty() {
            continue;
        }
        if let Some(rest) = l.strip_prefix("# failure ") {
            table.failures.push(parse_failure(line, rest)?);
            continue;
        }
        let cols: Vec<&str> = l.split(',').collect();
        if cols.len() != 8 {
            return Err(parse_err(line, format!("expected 8 columns, found {}", cols.len())));
        }
        table.rows.push(ResultRow {
            value: field(line, "value", cols[0])?,
            method: field(line, "estimator", cols[1])?,
            k: optional(line, "k", cols[2])?,
            grid: field(line, "grid", cols[3])?,
            rmse: field(line, "rmse_m", cols[4])?,
            mean_error: field(line, "mean_error_m", cols[5])?,
            p90_error: field(line, "p90_error_m", cols[6])?,
            trials: field(line, "trials", cols[7])?,
        });
    }
    Ok(table)
}
