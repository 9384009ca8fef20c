use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use vlp_core::bench::{
    emit_details, emit_results, parse_results_csv, run_experiment_with_workers, EstimatorSpec, ExperimentSpec, Grid,
    OutputFormat, ResultTable, Sweep, SweepVariable,
};
use vlp_core::channel::Channel;
use vlp_core::database::{build_database, grid_locations, load_database, save_database};
use vlp_core::estimators::{estimate, EstimatorInput, Method};
use vlp_core::rng::substream;
use vlp_core::{load_scene, PowerVector, PsoConfig, Scene, Vec3};

#[derive(Parser)]
#[command(name = "vlp", version, about = "Visible-light positioning simulator and benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collect a fingerprint database on a uniform grid.
    BuildDb(BuildDbArgs),
    /// Estimate one PD location.
    Locate(LocateArgs),
    /// Run a Monte Carlo sweep and write a result table.
    Sweep(SweepArgs),
    /// Summarize a result table written by `sweep`.
    Report(ReportArgs),
}

#[derive(Args)]
struct SceneArgs {
    /// Scene TOML file (defaults to the built-in 5x5x3 m room).
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Override every LED's transmit power (W).
    #[arg(long)]
    tx_power: Option<f64>,
    /// Override the wall reflectance.
    #[arg(long)]
    reflectance: Option<f64>,
}

impl SceneArgs {
    fn load(&self) -> Result<Scene, String> {
        let mut scene = match &self.scene {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                load_scene(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => Scene::reference(20.0),
        };
        if let Some(p) = self.tx_power {
            scene = scene.with_tx_power(p);
        }
        if let Some(r) = self.reflectance {
            scene = scene.with_reflectance(r);
        }
        scene.validate().map_err(|e| e.to_string())?;
        Ok(scene)
    }
}

#[derive(Args)]
struct BuildDbArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long, default_value = "10x10")]
    grid: Grid,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LocateArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long, value_parser = parse_method, default_value = "danls")]
    estimator: Method,
    /// Fingerprint database (required for fp and danls).
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Measured powers in watts, one per LED, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        conflicts_with = "truth",
        required_unless_present = "truth"
    )]
    power: Vec<f64>,
    /// Simulate a measurement at X,Y on the PD plane instead.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    truth: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Full experiment spec as JSON; other flags override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    /// VARIABLE=V1,V2,... with VARIABLE one of tx-power, k, reflectance.
    #[arg(long)]
    sweep: Option<String>,
    /// Estimators as METHOD[:K], comma separated (e.g. fp:3,nls,danls:3).
    #[arg(long, value_delimiter = ',')]
    estimators: Vec<String>,
    /// Use this k for every database estimator.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    grids: Vec<Grid>,
    /// Number of test points.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Keep the database from the first sweep value for all later values.
    #[arg(long)]
    reuse_first_db: bool,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Result file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-trial detail CSV.
    #[arg(long)]
    details: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// CSV result file.
    input: PathBuf,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, String> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| format!("{}: {e}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn build_db(args: BuildDbArgs) -> Result<ExitCode, String> {
    let scene = args.scene.load()?;
    let locations = grid_locations(&scene.room, scene.pd_plane_z(), args.grid.rows, args.grid.cols);
    let db = build_database(&scene, &locations, args.seed).map_err(|e| e.to_string())?;
    save_database(&db, sink(args.out.as_deref())?).map_err(|e| e.to_string())?;
    info!("wrote {} fingerprints", db.len());
    Ok(ExitCode::SUCCESS)
}

fn locate(args: LocateArgs) -> Result<ExitCode, String> {
    let scene = args.scene.load()?;
    if args.truth.as_ref().is_some_and(|xy| xy.len() != 2) {
        return Err("--truth takes exactly two values, X,Y".into());
    }
    let measured = match &args.truth {
        Some(xy) => {
            let truth = Vec3::new(xy[0], xy[1], scene.pd_plane_z());
            let mut rng = substream(args.seed, "measurement", &[0]);
            Channel::new(&scene)
                .measure_vector(truth, &mut rng)
                .map_err(|e| e.to_string())?
        }
        None => PowerVector::new(args.power.clone()),
    };
    let db = match &args.db {
        Some(path) => {
            let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
            Some(load_database(BufReader::new(file)).map_err(|e| format!("{}: {e}", path.display()))?)
        }
        None => None,
    };
    let input = EstimatorInput::on_pd_plane(measured, &scene);
    let pso = PsoConfig::default().with_seed(args.seed);
    let est = estimate(args.estimator, &input, db.as_ref(), args.k, &pso).map_err(|e| e.to_string())?;
    let mut out = serde_json::json!({
        "estimator": args.estimator,
        "location": est.location,
        "objective_value": est.objective_value,
        "stale_database": est.stale_database,
        "measured": input.measured,
    });
    if let Some(xy) = &args.truth {
        let truth = Vec3::new(xy[0], xy[1], scene.pd_plane_z());
        out["truth"] = serde_json::json!(truth);
        out["error_m"] = serde_json::json!(est.location.distance(truth));
    }
    println!("{}", serde_json::to_string_pretty(&out).expect("JSON value serializes"));
    Ok(ExitCode::SUCCESS)
}

fn parse_estimator(s: &str) -> Result<EstimatorSpec, String> {
    let (m, k) = match s.split_once(':') {
        Some((m, k)) => (m, k.parse().map_err(|e| format!("estimator `{s}`: {e}"))?),
        None => (s, 3),
    };
    Ok(EstimatorSpec { method: m.parse()?, k })
}

fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let (var, values) = s
        .split_once('=')
        .ok_or_else(|| format!("sweep `{s}` is not of the form VARIABLE=V1,V2,..."))?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("sweep value `{v}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sweep {
        variable: var.parse::<SweepVariable>()?,
        values,
    })
}

fn sweep_spec(args: &SweepArgs) -> Result<ExperimentSpec, String> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => {
            let scene = args.scene.load()?;
            match args.preset {
                Preset::Desk => ExperimentSpec::desk(scene),
                Preset::Full => ExperimentSpec::full(scene),
            }
        }
    };
    if args.spec.is_some() && args.scene.scene.is_some() {
        spec.scene = args.scene.load()?;
    }
    if let Some(s) = &args.sweep {
        spec.sweep = parse_sweep(s)?;
    }
    if !args.estimators.is_empty() {
        spec.estimators = args
            .estimators
            .iter()
            .map(|s| parse_estimator(s))
            .collect::<Result<_, _>>()?;
    }
    if let Some(k) = args.k {
        spec.estimators.iter_mut().for_each(|e| e.k = k);
    }
    if !args.grids.is_empty() {
        spec.grids = args.grids.clone();
    }
    if let Some(n) = args.points {
        spec.test_point_count = n;
    }
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    spec.reuse_first_database |= args.reuse_first_db;
    Ok(spec)
}

fn sweep(args: SweepArgs) -> Result<ExitCode, String> {
    let spec = sweep_spec(&args)?;
    let table = run_experiment_with_workers(&spec, args.workers).map_err(|e| e.to_string())?;
    for (row, secs) in table.rows.iter().zip(&table.wall_times) {
        info!(
            "{} {} {} {}: rmse {:.4} m in {secs:.2} s",
            row.value,
            row.method,
            row.grid,
            row.k.map_or(String::new(), |k| format!("k={k}")),
            row.rmse
        );
    }
    emit_results(&table, args.format.into(), sink(args.out.as_deref())?).map_err(|e| e.to_string())?;
    if let Some(path) = &args.details {
        emit_details(&table, sink(Some(path))?).map_err(|e| e.to_string())?;
    }
    Ok(report_failures(&table))
}

fn report_failures(table: &ResultTable) -> ExitCode {
    if table.failures.is_empty() {
        return ExitCode::SUCCESS;
    }
    for f in &table.failures {
        warn!(
            "cell failed: value={} estimator={} k={} grid={}: {}",
            f.value,
            f.method.map_or("-".into(), |m| m.to_string()),
            f.k.map_or("-".into(), |k| k.to_string()),
            f.grid.map_or("-".into(), |g| g.to_string()),
            f.message
        );
    }
    eprintln!("{} sweep cell(s) failed", table.failures.len());
    ExitCode::from(2)
}

fn report(args: ReportArgs) -> Result<ExitCode, String> {
    let file = File::open(&args.input).map_err(|e| format!("{}: {e}", args.input.display()))?;
    let table = parse_results_csv(BufReader::new(file)).map_err(|e| e.to_string())?;
    let mut out = io::stdout().lock();
    let w = |e: io::Error| e.to_string();
    writeln!(
        out,
        "spec {}  seed {}  sweep {}",
        table.spec_hash,
        table.master_seed,
        table.sweep_variable.as_str()
    )
    .map_err(w)?;
    writeln!(
        out,
        "{:>10}  {:<6} {:>3}  {:<6} {:>10} {:>10} {:>10} {:>7}",
        table.sweep_variable.as_str(),
        "est",
        "k",
        "grid",
        "rmse_m",
        "mean_m",
        "p90_m",
        "trials"
    )
    .map_err(w)?;
    for r in &table.rows {
        writeln!(
            out,
            "{:>10}  {:<6} {:>3}  {:<6} {:>10.4} {:>10.4} {:>10.4} {:>7}",
            r.value,
            r.method.as_str(),
            r.k.map_or("-".into(), |k| k.to_string()),
            r.grid.to_string(),
            r.rmse,
            r.mean_error,
            r.p90_error,
            r.trials
        )
        .map_err(w)?;
    }
    drop(out);
    Ok(report_failures(&table))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildDb(a) => build_db(a),
        Command::Locate(a) => locate(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
