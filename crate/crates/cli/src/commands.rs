use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use prophunt::ambiguity::{sample_subgraph, DEFAULT_MAX_STEPS};
use prophunt::circuit::{
    coloration_schedule, load_schedule, memory_circuit, nz_schedule, nz_transposed_schedule, random_valid_schedule,
    SmSchedule,
};
use prophunt::code::{builtin_code, load_code, CheckType, CssCode};
use prophunt::dem::{build_dem, NoiseModel};
use prophunt::minweight::{
    code_distance, effective_distance_both, encode_wcnf, export_wcnf, min_weight_logical, Budget,
};
use prophunt::optimizer::{memory_dems, optimize, trajectory_circuits, OptimizerConfig};
use prophunt::sim::logical_error_rate;
use prophunt::zne::{compare, default_ranges, CompareConfig};
use prophunt::Error;

use crate::manifest::{manifest_path, Recorder};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(m: impl ToString) -> Self {
        CliError {
            code: 2,
            message: m.to_string(),
        }
    }
    pub fn invalid(m: impl ToString) -> Self {
        CliError {
            code: 3,
            message: m.to_string(),
        }
    }
    pub fn internal(m: impl ToString) -> Self {
        CliError {
            code: 4,
            message: m.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(_) => CliError::usage(e),
            Error::Internal(_) => CliError::internal(e),
            _ => CliError::invalid(e),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "prophunt", version, about = "Optimize and evaluate syndrome-measurement circuits of CSS codes")]
pub struct Cli {
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the ambiguity-driven optimization loop.
    Optimize(OptimizeArgs),
    /// Effective distance of a schedule.
    Deff(DeffArgs),
    /// Monte Carlo logical error rate under the matching decoder.
    Simulate(SimulateArgs),
    /// Sample ambiguous subgraphs and their minimum-weight logical errors.
    Scan(ScanArgs),
    /// Write sampled subgraph problems as WCNF files.
    ExportWcnf(ExportArgs),
    /// Compare distance-scaling and fractional-distance extrapolation.
    Zne(ZneArgs),
    /// Write a baseline schedule.
    Baseline(BaselineArgs),
    /// Write the detector error model of a memory experiment.
    Dem(CircuitArgs),
    /// Write a memory experiment as a Stim circuit.
    Stim(CircuitArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    X,
    Z,
    Both,
}

impl Basis {
    fn kinds(self) -> Vec<CheckType> {
        match self {
            Basis::X => vec![CheckType::X],
            Basis::Z => vec![CheckType::Z],
            Basis::Both => vec![CheckType::X, CheckType::Z],
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Start {
    Coloration,
    Nz,
    File,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Coloration,
    Nz,
    NzTransposed,
    Random,
}

#[derive(Args, Debug, Serialize)]
pub struct OptimizeArgs {
    /// Built-in code (surface:<d>) or code file.
    #[arg(long)]
    pub code: String,
    #[arg(long, value_enum, default_value = "coloration")]
    pub start: Start,
    /// Start schedule file when --start file.
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long, default_value_t = 25)]
    pub iters: usize,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "timeout-s", default_value_t = 360.0)]
    pub timeout_s: f64,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    pub max_steps: usize,
    /// Run every iteration instead of stopping once no low-weight
    /// ambiguity is found.
    #[arg(long)]
    pub all_iterations: bool,
    /// Also write the effective distance of every distinct snapshot.
    #[arg(long)]
    pub trajectory: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct DeffArgs {
    #[arg(long)]
    pub code: String,
    /// Schedule file, or one of nz, nz-transposed, coloration.
    #[arg(long)]
    pub schedule: String,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, value_enum, default_value = "both")]
    pub basis: Basis,
    #[arg(long = "timeout-s", default_value_t = 7200.0)]
    pub timeout_s: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON result file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub code: String,
    #[arg(long)]
    pub schedule: String,
    #[arg(long, default_value_t = 1e-3)]
    pub p: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub shots: u64,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, value_enum, default_value = "both")]
    pub basis: Basis,
    #[arg(long = "idle-strength")]
    pub idle_strength: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ScanArgs {
    #[arg(long)]
    pub code: String,
    #[arg(long)]
    pub schedule: String,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, value_enum, default_value = "both")]
    pub basis: Basis,
    #[arg(long = "timeout-s", default_value_t = 360.0)]
    pub timeout_s: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    pub max_steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ExportArgs {
    #[arg(long)]
    pub code: String,
    #[arg(long)]
    pub schedule: String,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, value_enum, default_value = "both")]
    pub basis: Basis,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    pub max_steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct ZneArgs {
    #[arg(long, default_value_t = 2.0)]
    pub lambda: f64,
    /// Ranges as `ds/hook` pairs separated by `;`, each a comma-separated
    /// decreasing distance list, e.g. `9,7,5,3/9,8.5,8,7.5`.
    #[arg(long)]
    pub ranges: Option<String>,
    #[arg(long, default_value_t = 20_000)]
    pub budget: u64,
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    #[arg(long, default_value_t = 50)]
    pub depth: usize,
    /// Summary CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct BaselineArgs {
    #[arg(long)]
    pub code: String,
    #[arg(long, value_enum, default_value = "coloration")]
    pub start: BaselineKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct CircuitArgs {
    #[arg(long)]
    pub code: String,
    #[arg(long)]
    pub schedule: String,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, value_enum, default_value = "z")]
    pub basis: Basis,
    #[arg(long, default_value_t = 1e-3)]
    pub p: f64,
    #[arg(long = "idle-strength")]
    pub idle_strength: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> CliResult {
    let workers = match cli.workers {
        Some(0) => return Err(CliError::usage("--workers must be at least 1")),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(CliError::internal)?;
    match cli.command {
        Command::Optimize(a) => cmd_optimize(a, workers),
        Command::Deff(a) => cmd_deff(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Scan(a) => cmd_scan(a),
        Command::ExportWcnf(a) => cmd_export_wcnf(a),
        Command::Zne(a) => cmd_zne(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Dem(a) => cmd_circuit(a, false),
        Command::Stim(a) => cmd_circuit(a, true),
    }
}

fn load_any_code(spec: &str) -> CliResult<Arc<CssCode>> {
    let code = match builtin_code(spec) {
        Some(c) => c?,
        None => load_code(spec)?,
    };
    Ok(Arc::new(code))
}

fn surface_distance(code: &CssCode) -> CliResult<usize> {
    code.name()
        .strip_prefix("surface:")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| CliError::invalid(format!("N-Z schedules need a surface code, got {:?}", code.name())))
}

fn baseline(code: &Arc<CssCode>, kind: BaselineKind, seed: u64) -> CliResult<SmSchedule> {
    Ok(match kind {
        BaselineKind::Coloration => coloration_schedule(code.clone(), seed),
        BaselineKind::Nz => nz_schedule(surface_distance(code)?)?,
        BaselineKind::NzTransposed => nz_transposed_schedule(surface_distance(code)?)?,
        BaselineKind::Random => random_valid_schedule(code.clone(), 2, &mut prophunt::rng(seed)),
    })
}

/// A schedule file, or a baseline name.
fn load_any_schedule(spec: &str, code: &Arc<CssCode>, seed: u64) -> CliResult<SmSchedule> {
    if !Path::new(spec).exists() {
        if let Ok(kind) = BaselineKind::from_str(spec, true) {
            return baseline(code, kind, seed);
        }
    }
    Ok(load_schedule(spec, code.clone())?)
}

fn default_rounds(code: &CssCode, rounds: Option<usize>) -> CliResult<usize> {
    match rounds {
        Some(0) => Err(CliError::usage("--rounds must be at least 1")),
        Some(r) => Ok(r),
        None => code_distance(code).ok_or_else(|| CliError::invalid("code encodes no logical qubits")),
    }
}

fn timeout(secs: f64) -> CliResult<Duration> {
    Duration::try_from_secs_f64(secs).map_err(|_| CliError::usage(format!("bad --timeout-s {secs}")))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(CliError::internal)?;
    fs::write(path, text + "\n").map_err(|e| CliError::invalid(format!("cannot write {}: {e}", path.display())))
}

fn csv_writer(out: Option<&Path>) -> CliResult<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(
            fs::File::create(p).map_err(|e| CliError::invalid(format!("cannot write {}: {e}", p.display())))?,
        ),
        None => Box::new(std::io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn finish(rec: Recorder, out: Option<&Path>) -> CliResult {
    match out {
        Some(p) => rec.finish(&manifest_path(p)),
        None => Ok(()),
    }
}

fn cmd_optimize(a: OptimizeArgs, workers: usize) -> CliResult {
    let mut rec = Recorder::new("optimize", &a, Some(a.seed));
    rec.input(&a.code)?;
    let code = load_any_code(&a.code)?;
    let start = match a.start {
        Start::Coloration => coloration_schedule(code.clone(), a.seed),
        Start::Nz => nz_schedule(surface_distance(&code)?)?,
        Start::File => {
            let path = a
                .schedule
                .as_deref()
                .ok_or_else(|| CliError::usage("--start file needs --schedule"))?;
            rec.input(path)?;
            load_schedule(path, code.clone())?
        }
    };
    let cfg = OptimizerConfig {
        iterations: a.iters,
        samples_per_iteration: a.samples,
        workers,
        max_steps: a.max_steps,
        solver_timeout: timeout(a.timeout_s)?,
        seed: a.seed,
        early_stop: !a.all_iterations,
        rounds: a.rounds,
    };
    fs::create_dir_all(&a.out).map_err(|e| CliError::invalid(format!("cannot create {}: {e}", a.out.display())))?;
    let reports = optimize(&start, &cfg)?;
    for r in &reports {
        let path = a.out.join(format!("iteration_{:03}.json", r.iteration));
        write_json(&path, &r.record())?;
        rec.output(path);
    }
    let last = &reports.last().expect("at least one iteration").schedule;
    let final_path = a.out.join("final_schedule.json");
    last.write(&final_path)?;
    rec.output(&final_path);
    if a.trajectory {
        let points = trajectory_circuits(&reports, a.rounds, prophunt::minweight::DEFAULT_DISTANCE_TIMEOUT)?;
        let path = a.out.join("trajectory.csv");
        let mut w = csv_writer(Some(&path))?;
        for (i, p) in points.iter().enumerate() {
            let schedule_path = a.out.join(format!("trajectory_{i:03}.json"));
            p.schedule.write(&schedule_path)?;
            rec.output(&schedule_path);
            w.serialize(TrajectoryRow {
                index: i,
                iteration: p.iteration,
                d_eff: p.distance.value,
                exact: p.distance.exact,
                decreased: p.decreased,
            })
            .map_err(CliError::internal)?;
        }
        w.flush().map_err(CliError::internal)?;
        rec.output(path);
    }
    println!("{}", final_path.display());
    rec.finish(&manifest_path(&a.out))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub index: usize,
    pub iteration: Option<usize>,
    pub d_eff: usize,
    pub exact: bool,
    pub decreased: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DeffOutput {
    pub value: usize,
    pub exact: bool,
    pub per_basis: Vec<(String, usize, bool)>,
}

fn cmd_deff(a: DeffArgs) -> CliResult {
    let mut rec = Recorder::new("deff", &a, Some(a.seed));
    rec.input(&a.code)?;
    rec.input(&a.schedule)?;
    let code = load_any_code(&a.code)?;
    let s = load_any_schedule(&a.schedule, &code, a.seed)?;
    let rounds = default_rounds(&code, a.rounds)?;
    let noise = NoiseModel::new(1e-3);
    let kinds = a.basis.kinds();
    let dems = kinds
        .iter()
        .map(|&b| build_dem(memory_circuit(&s, rounds, b)?, &noise))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<_> = dems.iter().collect();
    let (overall, per) = effective_distance_both(&refs, code_distance(&code), Budget::timeout(timeout(a.timeout_s)?));
    println!("{}", overall.value);
    if !overall.exact {
        log::warn!("search timed out; {} is an upper bound", overall.value);
    }
    if let Some(out) = &a.out {
        let o = DeffOutput {
            value: overall.value,
            exact: overall.exact,
            per_basis: kinds
                .iter()
                .zip(&per)
                .map(|(k, r)| (format!("{k:?}").to_lowercase(), r.value, r.exact))
                .collect(),
        };
        write_json(out, &o)?;
        rec.output(out);
    }
    finish(rec, a.out.as_deref())
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SimRow {
    pub schedule: String,
    pub basis: String,
    pub p: f64,
    pub shots: u64,
    pub failures: u64,
    pub rate: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

fn noise_model(p: f64, idle: Option<f64>) -> CliResult<NoiseModel> {
    let mut n = NoiseModel::new(p);
    if let Some(s) = idle {
        n = n.with_idle(s);
    }
    n.validate()?;
    Ok(n)
}

fn cmd_simulate(a: SimulateArgs) -> CliResult {
    let mut rec = Recorder::new("simulate", &a, Some(a.seed));
    rec.input(&a.code)?;
    rec.input(&a.schedule)?;
    if a.shots == 0 {
        return Err(CliError::usage("--shots must be at least 1"));
    }
    let code = load_any_code(&a.code)?;
    let s = load_any_schedule(&a.schedule, &code, a.seed)?;
    let rounds = default_rounds(&code, a.rounds)?;
    let noise = noise_model(a.p, a.idle_strength)?;
    let id = Path::new(&a.schedule)
        .file_stem()
        .map_or(a.schedule.clone(), |s| s.to_string_lossy().into_owned());
    let mut rows = Vec::new();
    let mut survive = 1.0;
    for (i, basis) in a.basis.kinds().into_iter().enumerate() {
        let dem = build_dem(memory_circuit(&s, rounds, basis)?, &noise)?;
        let est = logical_error_rate(&dem, a.shots, prophunt::derive_seed(a.seed, u64::MAX, i as u64))?;
        survive *= 1.0 - est.rate;
        rows.push(SimRow {
            schedule: id.clone(),
            basis: format!("{basis:?}").to_lowercase(),
            p: a.p,
            shots: est.shots,
            failures: est.failures,
            rate: est.rate,
            ci_low: Some(est.ci_low),
            ci_high: Some(est.ci_high),
        });
    }
    if rows.len() > 1 {
        rows.push(SimRow {
            schedule: id,
            basis: "combined".into(),
            p: a.p,
            shots: rows.iter().map(|r| r.shots).sum(),
            failures: rows.iter().map(|r| r.failures).sum(),
            rate: 1.0 - survive,
            ci_low: None,
            ci_high: None,
        });
    }
    let mut w = csv_writer(a.out.as_deref())?;
    for r in &rows {
        w.serialize(r).map_err(CliError::internal)?;
    }
    w.flush().map_err(CliError::internal)?;
    if let Some(out) = &a.out {
        rec.output(out);
    }
    finish(rec, a.out.as_deref())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScanRow {
    pub sample: usize,
    pub basis: String,
    pub errors: usize,
    pub syndromes: usize,
    pub status: String,
    pub weight: usize,
    pub solve_seconds: f64,
}

fn sampled_dems(
    code: &Arc<CssCode>,
    s: &SmSchedule,
    rounds: Option<usize>,
    basis: Basis,
) -> CliResult<Vec<prophunt::dem::DetectorErrorModel>> {
    let rounds = default_rounds(code, rounds)?;
    let noise = NoiseModel::new(1e-3);
    Ok(match basis {
        Basis::Both => memory_dems(s, rounds, &noise)?.into(),
        b => vec![build_dem(memory_circuit(s, rounds, b.kinds()[0])?, &noise)?],
    })
}

fn cmd_scan(a: ScanArgs) -> CliResult {
    let mut rec = Recorder::new("scan", &a, Some(a.seed));
    rec.input(&a.code)?;
    rec.input(&a.schedule)?;
    let code = load_any_code(&a.code)?;
    let s = load_any_schedule(&a.schedule, &code, a.seed)?;
    let dems = sampled_dems(&code, &s, a.rounds, a.basis)?;
    let limit = timeout(a.timeout_s)?;
    let mut w = csv_writer(a.out.as_deref())?;
    for i in 0..a.samples {
        let dem = &dems[i % dems.len()];
        let mut rng = prophunt::rng(prophunt::derive_seed(a.seed, 0, i as u64));
        let Some(sub) = sample_subgraph(dem, &mut rng, a.max_steps) else {
            continue;
        };
        let t = std::time::Instant::now();
        let r = min_weight_logical(&sub, limit);
        w.serialize(ScanRow {
            sample: i,
            basis: format!("{:?}", sub.basis).to_lowercase(),
            errors: sub.error_nodes.len(),
            syndromes: sub.syndrome_nodes.len(),
            status: format!("{:?}", r.status).to_lowercase(),
            weight: r.weight,
            solve_seconds: t.elapsed().as_secs_f64(),
        })
        .map_err(CliError::internal)?;
    }
    w.flush().map_err(CliError::internal)?;
    if let Some(out) = &a.out {
        rec.output(out);
    }
    finish(rec, a.out.as_deref())
}

fn cmd_export_wcnf(a: ExportArgs) -> CliResult {
    let mut rec = Recorder::new("export-wcnf", &a, Some(a.seed));
    rec.input(&a.code)?;
    rec.input(&a.schedule)?;
    let code = load_any_code(&a.code)?;
    let s = load_any_schedule(&a.schedule, &code, a.seed)?;
    let dems = sampled_dems(&code, &s, a.rounds, a.basis)?;
    fs::create_dir_all(&a.out).map_err(|e| CliError::invalid(format!("cannot create {}: {e}", a.out.display())))?;
    for i in 0..a.samples {
        let dem = &dems[i % dems.len()];
        let mut rng = prophunt::rng(prophunt::derive_seed(a.seed, 0, i as u64));
        let Some(sub) = sample_subgraph(dem, &mut rng, a.max_steps) else {
            continue;
        };
        let path = a.out.join(format!("subgraph_{i:04}.wcnf"));
        export_wcnf(&encode_wcnf(&sub), &path)?;
        rec.output(path);
    }
    rec.finish(&manifest_path(&a.out))
}

fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::usage(format!("bad distance {x:?} in --ranges"))))
        .collect()
}

fn parse_ranges(s: &str) -> CliResult<Vec<(Vec<f64>, Vec<f64>)>> {
    s.split(';')
        .map(|r| {
            let (ds, hook) = r
                .split_once('/')
                .ok_or_else(|| CliError::usage(format!("range {r:?} is not of the form ds/hook")))?;
            Ok((parse_list(ds)?, parse_list(hook)?))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ZneRow {
    pub range: usize,
    pub ds_distances: String,
    pub hook_distances: String,
    pub ds_mean_bias: f64,
    pub ds_std_bias: f64,
    pub hook_mean_bias: f64,
    pub hook_std_bias: f64,
    pub improvement: f64,
    pub hook_wins: u64,
    pub seeds: u64,
    pub fit_errors: u64,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn cmd_zne(a: ZneArgs) -> CliResult {
    let mut rec = Recorder::new("zne", &a, None);
    let cfg = CompareConfig {
        ranges: match &a.ranges {
            Some(r) => parse_ranges(r)?,
            None => default_ranges(),
        },
        lambda: a.lambda,
        budget: a.budget,
        seeds: a.seeds,
        depth: a.depth,
        allocation: None,
    };
    let report = compare(&cfg)?;
    let mut w = csv_writer(a.out.as_deref())?;
    for s in &report.summaries {
        w.serialize(ZneRow {
            range: s.range,
            ds_distances: join(&s.ds_labels),
            hook_distances: join(&s.hook_labels),
            ds_mean_bias: s.ds_mean_bias,
            ds_std_bias: s.ds_std_bias,
            hook_mean_bias: s.hook_mean_bias,
            hook_std_bias: s.hook_std_bias,
            improvement: s.improvement,
            hook_wins: s.hook_wins,
            seeds: a.seeds,
            fit_errors: s.fit_errors,
        })
        .map_err(CliError::internal)?;
    }
    w.flush().map_err(CliError::internal)?;
    if let Some(out) = &a.out {
        rec.output(out);
    }
    finish(rec, a.out.as_deref())
}

fn cmd_baseline(a: BaselineArgs) -> CliResult {
    let mut rec = Recorder::new("baseline", &a, Some(a.seed));
    rec.input(&a.code)?;
    let code = load_any_code(&a.code)?;
    let s = baseline(&code, a.start, a.seed)?;
    s.write(&a.out)?;
    rec.output(&a.out);
    rec.finish(&manifest_path(&a.out))
}

fn cmd_circuit(a: CircuitArgs, stim: bool) -> CliResult {
    let mut rec = Recorder::new(if stim { "stim" } else { "dem" }, &a, None);
    rec.input(&a.code)?;
    rec.input(&a.schedule)?;
    let basis = match a.basis {
        Basis::Both => return Err(CliError::usage("--basis must be x or z here")),
        b => b.kinds()[0],
    };
    let code = load_any_code(&a.code)?;
    let s = load_any_schedule(&a.schedule, &code, 0)?;
    let rounds = default_rounds(&code, a.rounds)?;
    let noise = noise_model(a.p, a.idle_strength)?;
    let circuit = memory_circuit(&s, rounds, basis)?;
    if stim {
        fs::write(&a.out, circuit.to_stim(Some(&noise)))
            .map_err(|e| CliError::invalid(format!("cannot write {}: {e}", a.out.display())))?;
        rec.output(&a.out);
    } else {
        for p in build_dem(circuit, &noise)?.write(&a.out)? {
            rec.output(p);
        }
    }
    rec.finish(&manifest_path(&a.out))
}
