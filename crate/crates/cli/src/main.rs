//! `splitqp` command-line front end.
//!
//! Exit codes: 0 solved, solved inaccurately, or infeasible; 1 I/O or usage
//! error; 2 numerical error; 3 iteration or time limit reached; 4 a result
//! file failed `check`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use splitqp::bench::{
    bench_corpus, check_optimality, format_summary, summarize, validate, warm_start_experiment, write_csv,
    BenchConfig, Experiment, WarmStartComparison, FAILURE_TIME_CAP,
};
use splitqp::linsys::{Backend, Ordering};
use splitqp::probgen::{GenSpec, ProblemClass};
use splitqp::qpio::{read_qp, read_result, result_to_json, write_qp, Metadata};
use splitqp::solver::{solve, RhoGate, Settings, Status};

#[derive(Parser)]
#[command(name = "splitqp", version, about = "ADMM solver for convex quadratic programs")]
struct Cli {
    /// Repeat for more log output on stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem file and print the result as JSON.
    Solve {
        input: PathBuf,
        /// Also write the result JSON here.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        settings: SettingsArgs,
    },
    /// Generate problem files.
    Generate {
        /// Comma-separated class names, or `all`.
        #[arg(short, long, default_value = "all")]
        class: String,
        /// Dimensions: `10`, `10,20,40` or `10..13`.
        #[arg(short, long)]
        dim: String,
        /// Seeds, same syntax as `--dim`.
        #[arg(short, long, default_value = "0")]
        seed: String,
        /// Output directory, or a `.json` file for a single instance.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Solve every problem file in a directory and report per-class statistics.
    Bench {
        /// Directory of problem files. Not used with `--warm-start`.
        corpus: Option<PathBuf>,
        /// Runs per instance for instances faster than 10 ms; the median is kept.
        #[arg(long, default_value_t = 5)]
        repeat: usize,
        /// Seconds charged to a failed instance.
        #[arg(long, default_value_t = FAILURE_TIME_CAP)]
        time_cap: f64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Write the per-class table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write one CSV row per instance.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Run the parametric warm-start experiments instead of a corpus.
        #[arg(long)]
        warm_start: bool,
        /// Experiments for `--warm-start`: comma-separated names or `all`.
        #[arg(long, default_value = "all")]
        experiment: String,
        /// Leading dimension for `--warm-start`.
        #[arg(long, default_value_t = 10)]
        dim: usize,
        /// Parameter values per experiment.
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        settings: SettingsArgs,
    },
    /// Validate a result file against its problem with the external optimality check.
    Check {
        problem: PathBuf,
        result: PathBuf,
        #[command(flatten)]
        settings: SettingsArgs,
    },
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|_| format!("invalid value `{s}`"))
}

/// Solver settings; unset flags keep their defaults.
#[derive(Args, Default)]
struct SettingsArgs {
    /// Read settings from a JSON object first; flags override it.
    #[arg(long)]
    settings: Option<PathBuf>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps_abs: Option<f64>,
    #[arg(long)]
    eps_rel: Option<f64>,
    #[arg(long)]
    eps_pinf: Option<f64>,
    #[arg(long)]
    eps_dinf: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    check_termination_every: Option<usize>,
    #[arg(long)]
    scaling_iters: Option<usize>,
    #[arg(long)]
    scaling_eps: Option<f64>,
    #[arg(long)]
    no_adaptive_rho: bool,
    #[arg(long)]
    adaptive_rho_time_fraction: Option<f64>,
    #[arg(long)]
    adaptive_rho_change_factor: Option<f64>,
    #[arg(long)]
    adaptive_rho_max_updates: Option<usize>,
    /// `work` or `wall-clock`.
    #[arg(long, value_parser = parse_enum::<RhoGate>)]
    adaptive_rho_gate: Option<RhoGate>,
    #[arg(long)]
    no_polish: bool,
    #[arg(long)]
    polish_delta: Option<f64>,
    #[arg(long)]
    refine_steps: Option<usize>,
    /// `direct` or `indirect`.
    #[arg(long, value_parser = parse_enum::<Backend>)]
    linsys_backend: Option<Backend>,
    /// `amd` or `natural`.
    #[arg(long, value_parser = parse_enum::<Ordering>)]
    ordering: Option<Ordering>,
    #[arg(long)]
    cg_tol: Option<f64>,
    #[arg(long)]
    cg_max_iter: Option<usize>,
    #[arg(long)]
    equality_rho_multiplier: Option<f64>,
    #[arg(long)]
    freeze_scaling: bool,
}

impl SettingsArgs {
    fn resolve(&self) -> Result<Settings> {
        let mut s = match &self.settings {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => Settings::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    s.$field = v;
                }
            )*};
        }
        set!(
            rho,
            sigma,
            alpha,
            eps_abs,
            eps_rel,
            eps_pinf,
            eps_dinf,
            max_iter,
            check_termination_every,
            scaling_iters,
            scaling_eps,
            adaptive_rho_time_fraction,
            adaptive_rho_change_factor,
            adaptive_rho_max_updates,
            adaptive_rho_gate,
            polish_delta,
            refine_steps,
            linsys_backend,
            ordering,
            cg_tol,
            cg_max_iter,
            equality_rho_multiplier
        );
        if self.time_limit.is_some() {
            s.time_limit = self.time_limit;
        }
        if self.no_adaptive_rho {
            s.adaptive_rho = false;
        }
        if self.no_polish {
            s.polish = false;
        }
        if self.freeze_scaling {
            s.freeze_scaling = true;
        }
        if let Err(msg) = s.validate() {
            bail!("invalid settings: {msg}");
        }
        Ok(s)
    }
}

/// Parses `7`, `1,2,5` or the half-open range `0..10`.
fn parse_list(s: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (a.parse()?, b.parse()?);
            if a >= b {
                bail!("empty range `{part}`");
            }
            out.extend(a..b);
        } else {
            out.push(part.parse().with_context(|| format!("invalid number `{part}`"))?);
        }
    }
    if out.is_empty() {
        bail!("empty list `{s}`");
    }
    Ok(out)
}

fn parse_classes(s: &str) -> Result<Vec<ProblemClass>> {
    if s == "all" {
        return Ok(ProblemClass::ALL.to_vec());
    }
    s.split(',').map(|c| Ok(c.trim().parse::<ProblemClass>()?)).collect()
}

fn parse_experiments(s: &str) -> Result<Vec<Experiment>> {
    if s == "all" {
        return Ok(Experiment::ALL.to_vec());
    }
    s.split(',')
        .map(|e| {
            Experiment::ALL
                .into_iter()
                .find(|x| x.as_str() == e.trim())
                .with_context(|| format!("unknown experiment `{e}`"))
        })
        .collect()
}

fn status_code(status: Status) -> u8 {
    match status {
        Status::Solved | Status::SolvedInaccurate | Status::PrimalInfeasible | Status::DualInfeasible => 0,
        Status::NumericalError => 2,
        Status::MaxIterReached | Status::TimeLimitReached => 3,
    }
}

fn cmd_solve(input: &Path, output: Option<&Path>, settings: Settings) -> Result<u8> {
    let inst = read_qp(input)?;
    let result = solve(inst.problem, settings)?;
    let json = result_to_json(&result)?;
    io::stdout().write_all(json.as_bytes())?;
    if let Some(path) = output {
        fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
    }
    log::info!("{}: {} in {} iterations", input.display(), result.status, result.iterations);
    Ok(status_code(result.status))
}

fn cmd_generate(class: &str, dim: &str, seed: &str, out: &Path) -> Result<u8> {
    let classes = parse_classes(class)?;
    let dims = parse_list(dim)?;
    let seeds = parse_list(seed)?;
    let mut specs = Vec::with_capacity(classes.len() * dims.len() * seeds.len());
    for &c in &classes {
        for &d in &dims {
            specs.extend(seeds.iter().map(|&s| GenSpec::new(c, d as usize, s)));
        }
    }
    let single_file = out.extension().is_some_and(|e| e == "json");
    if single_file && specs.len() != 1 {
        bail!("{} instances requested but output is a single file", specs.len());
    }
    if !single_file {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    }
    for spec in &specs {
        let prob = spec.generate().with_context(|| spec.name())?;
        let path = if single_file { out.to_path_buf() } else { out.join(format!("{}.json", spec.name())) };
        write_qp(&prob, Some(Metadata::from(spec)), &path)?;
    }
    eprintln!("wrote {} file(s)", specs.len());
    Ok(0)
}

fn load_corpus(dir: &Path) -> Result<Vec<(String, String, splitqp::problem::ProblemData)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let inst = read_qp(&path).with_context(|| format!("reading {}", path.display()))?;
        let meta = inst.metadata.unwrap_or_default();
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        out.push((meta.name.unwrap_or(stem), meta.class.unwrap_or_else(|| "unknown".into()), inst.problem));
    }
    Ok(out)
}

fn write_file_csv<T: serde::Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(rows, file)?;
    Ok(())
}

#[derive(serde::Serialize)]
struct WarmRow {
    experiment: &'static str,
    steps: usize,
    cold_iterations: usize,
    warm_iterations: usize,
    iteration_ratio: f64,
    cold_time: f64,
    warm_time: f64,
    time_ratio: f64,
    warm_update_factorizations: usize,
    warm_symbolic_factorizations: usize,
}

impl From<&WarmStartComparison> for WarmRow {
    fn from(c: &WarmStartComparison) -> Self {
        Self {
            experiment: c.experiment.as_str(),
            steps: c.warm.steps.len(),
            cold_iterations: c.cold.total_iterations(),
            warm_iterations: c.warm.total_iterations(),
            iteration_ratio: c.iteration_ratio(),
            cold_time: c.cold.total_time(),
            warm_time: c.warm.total_time(),
            time_ratio: c.time_ratio(),
            warm_update_factorizations: c.warm.steps.iter().skip(1).map(|s| s.update_factorizations).sum(),
            warm_symbolic_factorizations: c.warm.steps.iter().skip(1).map(|s| s.symbolic_factorizations).sum(),
        }
    }
}

fn cmd_warm_start(experiments: &str, dim: usize, steps: usize, seed: u64, settings: &Settings, csv: Option<&Path>) -> Result<u8> {
    let mut rows = Vec::new();
    for exp in parse_experiments(experiments)? {
        let cmp = warm_start_experiment(exp, dim, seed, steps, settings)?;
        rows.push(WarmRow::from(&cmp));
    }
    println!(
        "{:<10} {:>6} {:>10} {:>10} {:>8} {:>10} {:>10} {:>8}",
        "experiment", "steps", "cold iter", "warm iter", "ratio", "cold [s]", "warm [s]", "ratio"
    );
    for r in &rows {
        println!(
            "{:<10} {:>6} {:>10} {:>10} {:>8.2} {:>10.3} {:>10.3} {:>8.2}",
            r.experiment, r.steps, r.cold_iterations, r.warm_iterations, r.iteration_ratio, r.cold_time, r.warm_time, r.time_ratio
        );
    }
    if let Some(path) = csv {
        write_file_csv(&rows, path)?;
    }
    Ok(0)
}

fn cmd_check(problem: &Path, result: &Path, settings: &Settings) -> Result<u8> {
    let inst = read_qp(problem)?;
    let res = read_result(result)?;
    if let Some(sol) = &res.solution {
        let c = check_optimality(&inst.problem, sol, settings.eps_abs, settings.eps_rel);
        println!(
            "primal violation {:.3e} (tol {:.3e}), dual residual {:.3e} (tol {:.3e})",
            c.prim_violation, c.eps_prim, c.dual_res, c.eps_dual
        );
    }
    let ok = validate(&inst.problem, &res, settings);
    println!("{}: {}", res.status, if ok { "pass" } else { "FAIL" });
    Ok(if ok { 0 } else { 4 })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve { input, output, settings } => cmd_solve(&input, output.as_deref(), settings.resolve()?),
        Command::Generate { class, dim, seed, out } => cmd_generate(&class, &dim, &seed, &out),
        Command::Bench {
            corpus,
            repeat,
            time_cap,
            threads,
            csv,
            records,
            warm_start,
            experiment,
            dim,
            steps,
            seed,
            settings,
        } => {
            let settings = settings.resolve()?;
            if warm_start {
                return cmd_warm_start(&experiment, dim, steps, seed, &settings, csv.as_deref());
            }
            let Some(dir) = corpus else { bail!("bench needs a corpus directory or --warm-start") };
            if !(time_cap > 0.0) {
                bail!("--time-cap must be positive");
            }
            let instances = load_corpus(&dir)?;
            let cfg = BenchConfig { settings, repeat, time_cap, threads };
            let recs = bench_corpus(&instances, &cfg);
            let summary = summarize(&recs);
            print!("{}", format_summary(&summary));
            if let Some(path) = csv {
                write_file_csv(&summary, &path)?;
            }
            if let Some(path) = records {
                write_file_csv(&recs, &path)?;
            }
            Ok(0)
        }
        Command::Check { problem, result, settings } => cmd_check(&problem, &result, &settings.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.exit_code() == 0 => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
