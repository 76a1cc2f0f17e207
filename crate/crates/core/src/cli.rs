//! Command-line front end. Results go to stdout (or `--output`) as JSON or
//! CSV; diagnostics go to stderr.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::{CorpusEntry, CorpusSpec};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::generators::GeneratorSpec;
use crate::integral::{
    integral_exact_with, integral_montecarlo_with, integral_quadrature_with, IntegralRequest, IntegralResult,
    Square,
};
use crate::io::{format_number, read_function_file, to_json, write_function_file, FunctionFile};
use crate::levels::{decompose, satisfied_set_with, DecompositionReport, SearchOptions, DEFAULT_GRID};
use crate::plfn::{PLFunction, PhaseFunction};
use crate::structure::{analyze, theorem_check_with, Side, Verdict};

pub const EXIT_OK: u8 = 0;
pub const EXIT_MALFORMED: u8 = 2;
pub const EXIT_BUDGET: u8 = 3;
pub const EXIT_INCONCLUSIVE: u8 = 4;
pub const EXIT_PRECONDITION: u8 = 5;

/// Environment variable supplying the default thread count.
pub const THREADS_ENV: &str = "DEGLAB_THREADS";

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_SAMPLES: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(name = "deglab", version, about = "Degree bounds for circle maps via nonlocal threshold integrals")]
pub struct Cli {
    /// Worker threads (default: $DEGLAB_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON run configuration; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run every engine sequentially.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Threshold integral of a function file.
    Integrate(IntegrateArgs),
    /// Level sets and satisfied indices.
    Decompose(DecomposeArgs),
    /// Structure analysis of a normalized function.
    Analyze(AnalyzeArgs),
    /// Degree bound check for a phase function or a corpus.
    Verify(BatchArgs),
    /// Ratio table over a δ grid for a function or a corpus.
    Sweep(BatchArgs),
    /// Writes a generated function file.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Exact,
    Quadrature,
    Montecarlo,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Side of the integration square: 1 for [0,1]², 2 for [0,2]² over two
    /// periods of a phase function.
    #[arg(long)]
    pub square: Option<u32>,
    #[arg(long, value_enum)]
    pub engine: Option<Engine>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Grid of the fallback satisfied-index search; 0 disables it.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// Phase function file; omit together with --corpus to use the config.
    #[arg(long, conflicts_with = "corpus")]
    pub input: Option<PathBuf>,
    /// Run over the corpus from the config file, or the standard corpus.
    #[arg(long)]
    pub corpus: bool,
    /// One or more δ values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<f64>,
    /// Side of the integration square for `sweep` (verify always uses 2).
    #[arg(long)]
    pub square: Option<u32>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    #[arg(long)]
    pub m: Option<i64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Steepness `K` of the log-boundary family.
    #[arg(long)]
    pub k: Option<f64>,
    /// `ln β` of the log-boundary family (default `-M·K`).
    #[arg(long, allow_hyphen_values = true)]
    pub beta_log: Option<f64>,
    #[arg(long, value_enum)]
    pub side: Option<SideArg>,
    #[arg(long)]
    pub segments: Option<usize>,
    #[arg(long)]
    pub bumps: Option<usize>,
    #[arg(long)]
    pub bump_k: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Linear,
    LogBoundary,
    Multibump,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Left,
    Right,
}

/// JSON run configuration. Every field is optional; flags override it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub delta: Option<f64>,
    pub deltas: Option<Vec<f64>>,
    pub square: Option<u32>,
    pub engine: Option<Engine>,
    pub tol: Option<f64>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub corpus: Option<CorpusSpec>,
    pub generator: Option<GeneratorSpec>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Process exit code for a library error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Precondition(_) => EXIT_PRECONDITION,
        Error::BudgetExhausted { .. } => EXIT_BUDGET,
        _ => EXIT_MALFORMED,
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_MALFORMED } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Integrate(_) => "integrate",
        Command::Decompose(_) => "decompose",
        Command::Analyze(_) => "analyze",
        Command::Verify(_) => "verify",
        Command::Sweep(_) => "sweep",
        Command::Generate(_) => "generate",
    }
}

pub fn run(cli: Cli) -> Result<u8> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(c) = &cfg.command {
        if c != command_name(&cli.command) {
            return Err(Error::InvalidParameter(format!(
                "config is for command {c:?}, not {:?}",
                command_name(&cli.command)
            )));
        }
    }
    let threads = cli.threads.or(cfg.threads).or_else(threads_from_env);
    exec::init_threads(threads);
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel.effective() };
    match cli.command {
        Command::Integrate(a) => integrate(a, &cfg, exec),
        Command::Decompose(a) => decompose_cmd(a, &cfg, exec),
        Command::Analyze(a) => analyze_cmd(a, &cfg, exec),
        Command::Verify(a) => verify(a, &cfg, exec),
        Command::Sweep(a) => sweep(a, &cfg, exec),
        Command::Generate(a) => generate(a, &cfg),
    }
}

fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok())
}

fn required<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidParameter(format!("missing --{name} (flag or config field)")))
}

fn input_file(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<FunctionFile> {
    read_function_file(&required(flag.or_else(|| cfg.input.clone()), "input")?)
}

/// JSON number, or the `"inf"`/`"nan"` string sentinels.
pub fn json_number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::String(format_number(v))
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn result_json(r: &IntegralResult, delta: f64, square: Square) -> Value {
    json!({
        "value": json_number(r.value),
        "method": r.method,
        "error_estimate": json_number(r.error_estimate),
        "pieces": r.pieces,
        "converged": r.converged,
        "delta": delta,
        "square": match square { Square::Unit => 1, Square::Double => 2 },
    })
}

fn request(file: &FunctionFile, delta: f64, square: Square) -> Result<IntegralRequest> {
    match square {
        Square::Unit => IntegralRequest::new(&file.function()?, delta),
        Square::Double => IntegralRequest::phase(&file.phase_function()?, delta, Square::Double),
    }
}

fn integrate(a: IntegrateArgs, cfg: &RunConfig, exec: Exec) -> Result<u8> {
    let file = input_file(a.input, cfg)?;
    let delta = required(a.delta.or(cfg.delta), "delta")?;
    let square = Square::from_side(a.square.or(cfg.square).unwrap_or(1))?;
    let req = request(&file, delta, square)?;
    let tol = a.tol.or(cfg.tol).unwrap_or(DEFAULT_TOL);
    let r = match a.engine.or(cfg.engine).unwrap_or(Engine::Exact) {
        Engine::Exact => integral_exact_with(&req, exec),
        Engine::Quadrature => integral_quadrature_with(&req, tol, exec)?,
        Engine::Montecarlo => {
            let samples = a.samples.or(cfg.samples).unwrap_or(DEFAULT_SAMPLES);
            integral_montecarlo_with(&req, samples, a.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED), exec)?
        }
    };
    if !r.converged {
        return Err(Error::BudgetExhausted { estimate: r.value, error: r.error_estimate });
    }
    emit(None, &format!("{}\n", result_json(&r, delta, square)))?;
    Ok(EXIT_OK)
}

fn search_options(grid: Option<usize>, exec: Exec) -> SearchOptions {
    SearchOptions { grid: Some(grid.unwrap_or(DEFAULT_GRID)).filter(|&g| g > 0), exec }
}

fn decompose_cmd(a: DecomposeArgs, cfg: &RunConfig, exec: Exec) -> Result<u8> {
    let g = input_file(a.input, cfg)?.function()?;
    let delta = required(a.delta.or(cfg.delta), "delta")?;
    let d = decompose(&g, delta)?;
    let r = satisfied_set_with(&d, &search_options(a.grid.or(cfg.grid), exec));
    let report = DecompositionReport::new(&d, &r);
    emit(a.output.or_else(|| cfg.output.clone()).as_deref(), &(serde_json::to_string(&report)? + "\n"))?;
    Ok(EXIT_OK)
}

fn analyze_cmd(a: AnalyzeArgs, cfg: &RunConfig, exec: Exec) -> Result<u8> {
    let g = input_file(a.input, cfg)?.function()?;
    let delta = required(a.delta.or(cfg.delta), "delta")?;
    let analysis = analyze(&g, delta, &search_options(a.grid.or(cfg.grid), exec))?;
    let report = analysis.report();
    emit(a.output.or_else(|| cfg.output.clone()).as_deref(), &(serde_json::to_string(&report)? + "\n"))?;
    Ok(match &report.verdict {
        Verdict::Inconclusive { diagnostics } => {
            eprintln!("inconclusive: {}", diagnostics.join("; "));
            EXIT_INCONCLUSIVE
        }
        Verdict::SatisfiedRich { count } => {
            eprintln!("satisfied-rich: #S = {count}");
            EXIT_OK
        }
        Verdict::WitnessFound { witness } => {
            eprintln!("witness: {:?} with {} entries", witness.side, witness.entries.len());
            EXIT_OK
        }
    })
}

/// A named function to run a batch command on.
struct Job {
    id: String,
    deltas: Vec<f64>,
    source: JobSource,
}

enum JobSource {
    File(PLFunction),
    Corpus(CorpusEntry),
}

impl Job {
    fn function(&self) -> Result<PLFunction> {
        match &self.source {
            JobSource::File(f) => Ok(f.clone()),
            JobSource::Corpus(e) => e.generate(),
        }
    }
}

fn batch_jobs(a: &BatchArgs, cfg: &RunConfig) -> Result<Vec<Job>> {
    let flag_deltas = if a.delta.is_empty() { None } else { Some(a.delta.clone()) };
    let deltas = flag_deltas.or_else(|| cfg.deltas.clone()).or_else(|| cfg.delta.map(|d| vec![d]));
    let input = a.input.clone().or_else(|| if a.corpus { None } else { cfg.input.clone() });
    if let Some(path) = input {
        let f = read_function_file(&path)?.function()?;
        let id = path.file_stem().map_or_else(|| "input".to_string(), |s| s.to_string_lossy().into_owned());
        return Ok(vec![Job { id, deltas: required(deltas, "delta")?, source: JobSource::File(f) }]);
    }
    if !a.corpus && cfg.corpus.is_none() {
        return Err(Error::InvalidParameter("need --input or --corpus".into()));
    }
    let mut spec = cfg.corpus.clone().unwrap_or_default();
    if let Some(d) = deltas {
        spec.deltas = d;
    }
    spec.validate()?;
    Ok(spec
        .entries()
        .into_iter()
        .map(|e| Job { id: e.id.clone(), deltas: vec![e.delta], source: JobSource::Corpus(e) })
        .collect())
}

fn expand(jobs: &[Job]) -> Vec<(usize, f64)> {
    jobs.iter().enumerate().flat_map(|(i, j)| j.deltas.iter().map(move |&d| (i, d))).collect()
}

fn write_csv(output: Option<&Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    emit(output, &String::from_utf8(buf).expect("csv output is UTF-8"))
}

fn verify(a: BatchArgs, cfg: &RunConfig, exec: Exec) -> Result<u8> {
    let jobs = batch_jobs(&a, cfg)?;
    let tasks = expand(&jobs);
    if let Some(&(_, d)) = tasks.iter().find(|&&(_, d)| !(d > 0.0 && d < 0.01)) {
        return Err(Error::Precondition(format!("the degree bound needs 0 < delta < 0.01, got {d}")));
    }
    let opts = search_options(cfg.grid, exec);
    let results = exec::map_collect(exec, &tasks, |&(i, delta)| {
        let phi = PhaseFunction::new(jobs[i].function()?)?;
        theorem_check_with(&phi, delta, &opts)
    });
    let output = a.output.or_else(|| cfg.output.clone());
    if tasks.len() == 1 && !a.corpus {
        let c = results.into_iter().next().expect("one task")?;
        let v = json!({
            "function_id": jobs[0].id,
            "delta": tasks[0].1,
            "lhs": json_number(c.lhs),
            "rhs": json_number(c.rhs),
            "ratio": json_number(c.ratio),
            "holds": c.holds,
            "integral": json_number(c.integral),
            "verdict": c.verdict,
            "analysis_skipped": c.analysis_skipped,
        });
        emit(output.as_deref(), &format!("{v}\n"))?;
        return Ok(EXIT_OK);
    }
    let mut rows = Vec::with_capacity(tasks.len());
    let mut violations = 0;
    for (&(i, delta), r) in tasks.iter().zip(results) {
        let c = r?;
        violations += usize::from(!c.holds);
        let verdict = match &c.verdict {
            Some(Verdict::SatisfiedRich { .. }) => "satisfied_rich",
            Some(Verdict::WitnessFound { .. }) => "witness_found",
            Some(Verdict::Inconclusive { .. }) => "inconclusive",
            None => "skipped",
        };
        rows.push(vec![
            jobs[i].id.clone(),
            format_number(delta),
            format_number(c.lhs),
            format_number(c.rhs),
            format_number(c.ratio),
            c.holds.to_string(),
            u8::from(!c.holds).to_string(),
            verdict.to_string(),
        ]);
    }
    let header = ["function_id", "delta", "lhs", "rhs", "ratio", "holds", "violation", "verdict"];
    write_csv(output.as_deref(), &header, &rows)?;
    eprintln!("{} rows, {violations} violations", rows.len());
    Ok(EXIT_OK)
}

/// `|D| / (δ ∬)`, with `inf` when the denominator vanishes.
pub fn sweep_ratio(degree: f64, delta: f64, integral: f64) -> f64 {
    let denom = delta * integral;
    if denom == 0.0 {
        f64::INFINITY
    } else {
        degree.abs() / denom
    }
}

fn sweep(a: BatchArgs, cfg: &RunConfig, exec: Exec) -> Result<u8> {
    let jobs = batch_jobs(&a, cfg)?;
    let tasks = expand(&jobs);
    let square = Square::from_side(a.square.or(cfg.square).unwrap_or(1))?;
    let results = exec::map_collect(exec, &tasks, |&(i, delta)| -> Result<Vec<String>> {
        let phi = PhaseFunction::new(jobs[i].function()?)?;
        let integral = integral_exact_with(&IntegralRequest::phase(&phi, delta, square)?, exec).value;
        let degree = phi.degree();
        Ok(vec![
            jobs[i].id.clone(),
            format_number(delta),
            format_number(degree),
            format_number(integral),
            format_number(delta * integral),
            format_number(sweep_ratio(degree, delta, integral)),
        ])
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    let header = ["function_id", "delta", "degree", "integral", "delta_times_integral", "ratio"];
    write_csv(a.output.or_else(|| cfg.output.clone()).as_deref(), &header, &rows)?;
    Ok(EXIT_OK)
}

fn generate(a: GenerateArgs, cfg: &RunConfig) -> Result<u8> {
    let spec = match a.family {
        None => required(cfg.generator.clone(), "family")?,
        Some(family) => {
            let delta = required(a.delta.or(cfg.delta), "delta")?;
            let m = required(a.m, "m");
            match family {
                Family::Linear => GeneratorSpec::Linear { m: m?, delta },
                Family::LogBoundary => {
                    let k = required(a.k, "k")?;
                    let beta_log = match a.beta_log {
                        Some(b) => b,
                        None => -(m? as f64) * k,
                    };
                    let side = match a.side.unwrap_or(SideArg::Left) {
                        SideArg::Left => Side::Left,
                        SideArg::Right => Side::Right,
                    };
                    GeneratorSpec::LogBoundary { k, beta_log, delta, side, segments: a.segments.unwrap_or(64) }
                }
                Family::Multibump => GeneratorSpec::Multibump {
                    bumps: a.bumps.unwrap_or(10),
                    m: m?,
                    delta,
                    bump_k: required(a.bump_k, "bump-k")?,
                },
                Family::Random => GeneratorSpec::Random {
                    seed: a.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
                    segments: a.segments.unwrap_or(30),
                    m: m?,
                    delta,
                },
            }
        }
    };
    let file = FunctionFile::from_function(&spec.generate()?, true);
    match a.output.or_else(|| cfg.output.clone()) {
        Some(p) => write_function_file(&p, &file)?,
        None => emit(None, &(to_json(&file) + "\n"))?,
    }
    Ok(EXIT_OK)
}
