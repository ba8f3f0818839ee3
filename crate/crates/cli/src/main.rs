use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nama_core::benchmark::{run_benchmark, BenchConfig, Suite};
use nama_core::report::{trace_csv, SolveSummary};
use nama_core::solver::solve;
use nama_core::{EngineKind, GammaPolicy, Method, ProblemFile, SolveStatus, SolverConfig};

#[derive(Parser)]
#[command(name = "nama", version, about = "Newton-type alternating minimization solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and write its trace and summary.
    Solve(SolveArgs),
    /// Run the AFTI-16 or oscillating-masses benchmark.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    None,
    Jacobi,
}

#[derive(Clone, Copy)]
struct Gamma(GammaPolicy);

impl FromStr for Gamma {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Gamma(GammaPolicy::Auto));
        }
        s.parse::<f64>()
            .map(|g| Gamma(GammaPolicy::Fixed(g)))
            .map_err(|_| format!("expected 'auto' or a number, got '{s}'"))
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "lbfgs")]
    engine: EngineKind,
    /// Direction memory (L-BFGS pairs).
    #[arg(long, default_value_t = 20)]
    mem: usize,
    /// Stepsize: 'auto' or a positive number.
    #[arg(long, default_value = "auto")]
    gamma: Gamma,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 1e-3)]
    taumin: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long)]
    maxit: Option<usize>,
    /// Enable γ-backtracking with the given sufficient-decrease parameter.
    #[arg(long)]
    backtrack: Option<f64>,
}

impl SolverArgs {
    fn config(&self, base: SolverConfig) -> SolverConfig {
        SolverConfig {
            gamma: self.gamma.0,
            beta: self.beta,
            tau_min: self.taumin,
            tol: self.tol,
            max_iter: self.maxit.unwrap_or(base.max_iter),
            alpha: self.backtrack.unwrap_or(base.alpha),
            engine: self.engine,
            memory: self.mem,
            gamma_backtracking: self.backtrack.is_some(),
            ..base
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Problem description (JSON).
    file: PathBuf,
    #[arg(long, default_value = "nama")]
    solver: Method,
    #[arg(long, value_enum, default_value = "none")]
    scale: Scale,
    /// Trace CSV output.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Summary JSON output; printed to stdout when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Leave the time column at zero.
    #[arg(long)]
    no_timing: bool,
    #[command(flatten)]
    solver_args: SolverArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    suite: Suite,
    /// Number of actuators (masses).
    #[arg(long = "K")]
    k: Option<usize>,
    /// Horizons, comma separated.
    #[arg(long = "N-list", value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    solvers: Option<Vec<Method>>,
    /// Initial states per horizon (masses).
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    scale: Option<Scale>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    maxit: Option<usize>,
    /// Record wall-clock time (traces are then no longer reproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_solve(args: &SolveArgs) -> anyhow::Result<SolveStatus> {
    let file = ProblemFile::read(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    let (problem, y0) = file.build().context("building problem")?;
    let config = args.solver_args.config(SolverConfig {
        record_time: !args.no_timing,
        ..SolverConfig::default()
    });
    config.validate()?;
    let (problem, y0) = match args.scale {
        Scale::None => (problem, y0),
        Scale::Jacobi => {
            let scaled = problem.jacobi_scaled()?;
            let y0 = scaled.scale_dual(&y0);
            (scaled, y0)
        }
    };
    let sol = solve(&problem, args.solver, &config, &y0)?;
    if let Some(path) = &args.trace {
        std::fs::write(path, trace_csv(&sol.trace.records)).with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = SolveSummary::new(&args.solver.to_string(), &sol, &problem.unscale_dual(&sol.y));
    let json = serde_json::to_string_pretty(&summary)?;
    match &args.summary {
        Some(path) => std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?,
        None => println!("{json}"),
    }
    eprintln!(
        "{}: {} after {} iterations, residual {:.3e}",
        args.solver,
        sol.status,
        sol.iterations(),
        sol.residual_inf
    );
    Ok(sol.status)
}

fn cmd_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let mut cfg = BenchConfig::new(args.suite);
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(n) = &args.n_list {
        if n.is_empty() {
            bail!("--N-list is empty");
        }
        cfg.horizons = n.clone();
    }
    if let Some(s) = &args.solvers {
        cfg.solvers = s.clone();
    }
    if let Some(s) = args.seeds {
        cfg.samples = s;
    }
    if let Some(scale) = args.scale {
        cfg.jacobi = matches!(scale, Scale::Jacobi);
    }
    if let Some(tol) = args.tol {
        cfg.solver.tol = tol;
    }
    if let Some(m) = args.maxit {
        cfg.solver.max_iter = m;
    }
    cfg.seed = args.seed;
    cfg.solver.record_time = args.timing;
    cfg.threads = threads()?;
    cfg.solver.validate()?;
    let report = run_benchmark(&cfg)?;
    report.write(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    print!("{}", report.summary_csv());
    let infeasible = report.scenarios.iter().filter(|s| !s.feasible).count();
    if infeasible > 0 {
        eprintln!("{infeasible} scenario(s) without a feasible initial state");
    }
    Ok(())
}

fn threads() -> anyhow::Result<usize> {
    match std::env::var("NAMA_THREADS") {
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => bail!("NAMA_THREADS must be a positive integer, got '{v}'"),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args).map(|status| match status {
            SolveStatus::Converged => ExitCode::SUCCESS,
            SolveStatus::MaxIter => ExitCode::from(2),
            SolveStatus::OracleError => ExitCode::from(3),
        }),
        Command::Bench(args) => cmd_bench(args).map(|_| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(1)
    })
}
