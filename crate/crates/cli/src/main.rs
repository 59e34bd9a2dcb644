use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use manifold_cp::cutting_plane::{centers_of, run_simple, run_slack};
use manifold_cp::ensemble::{ensemble_from_json, ensemble_to_json, to_json_string};
use manifold_cp::harness::{audit_solution, generate_ensemble, run_experiment, with_bias, ExperimentConfig, Mode};
use manifold_cp::invariants::check_trace;
use manifold_cp::oracle::EllipsoidOracle;
use manifold_cp::types::ensemble_norm_bound;
use manifold_cp::{OracleSelection, QpSolution, RunConfig, RunTrace, WorkingSet};

#[derive(Parser)]
#[command(name = "mcp", version, about = "Cutting-plane max-margin classification of manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random ellipsoid ensemble as JSON.
    Generate(GenerateArgs),
    /// Run an experiment config and write the results CSV.
    Run(RunArgs),
    /// Densely sample an ensemble and check a solution (solving first if none is given).
    Audit(AuditArgs),
    /// Replay a trace CSV against the convergence invariants.
    TraceCheck(TraceCheckArgs),
}

#[derive(Args)]
#[allow(non_snake_case)]
struct GenerateArgs {
    #[arg(long = "N")]
    N: usize,
    #[arg(long = "P")]
    P: usize,
    #[arg(long = "D")]
    D: usize,
    #[arg(long = "R0")]
    R0: f64,
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Append a constant-1 feature.
    #[arg(long)]
    bias: bool,
    /// Output file (stdout if absent).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[allow(non_snake_case)]
struct RunArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Results CSV (stdout if absent).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Directory for one cutting-plane trace CSV per seed.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    #[arg(long = "N")]
    N: Option<usize>,
    #[arg(long = "P")]
    P: Option<usize>,
    #[arg(long = "D")]
    D: Option<usize>,
    #[arg(long = "R0")]
    R0: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long = "C")]
    C: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<usize>>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    oracle_selection: Option<OracleSelection>,
    #[arg(long)]
    qp_tolerance: Option<f64>,
    #[arg(long)]
    m_test: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Args)]
#[allow(non_snake_case)]
struct AuditArgs {
    /// Ensemble JSON.
    #[arg(long)]
    ensemble: PathBuf,
    /// Solution JSON (`weights`, `slacks`, `objective`, `kkt_residual`).
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Slack coefficient; selects slack mode when solving.
    #[arg(long = "C")]
    C: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Where to write the solution found when solving.
    #[arg(long)]
    solution_out: Option<PathBuf>,
    /// Where to write the trace when solving.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
#[allow(non_snake_case)]
struct TraceCheckArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Ensemble the trace was produced on (supplies `L`).
    #[arg(long, conflicts_with = "norm_bound", required_unless_present = "norm_bound")]
    ensemble: Option<PathBuf>,
    #[arg(long)]
    norm_bound: Option<f64>,
    /// Slack coefficient of a slack-mode trace.
    #[arg(long = "C")]
    C: Option<f64>,
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut ms = generate_ensemble(args.N, args.P, args.D, args.R0, args.q, args.seed)?;
    if args.bias {
        ms = with_bias(&ms);
    }
    write_or_print(args.out.as_ref(), &ensemble_to_json(&ms)?)
}

fn run(args: RunArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    macro_rules! apply {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = args.$flag.clone() { cfg.$field = v; })*
        };
    }
    apply!(N => n, P => p, D => d, R0 => r0, q => q, delta => delta, seeds => seeds,
        budgets => budgets, mode => mode, oracle_selection => oracle_selection,
        qp_tolerance => qp_tolerance, m_test => m_test);
    if args.C.is_some() {
        cfg.c = args.C;
    }
    if args.max_iterations.is_some() {
        cfg.max_iterations = args.max_iterations;
    }
    cfg.validate()?;
    let out = run_experiment(&cfg)?;
    if let Some(dir) = &args.trace_dir {
        fs::create_dir_all(dir)?;
        for (seed, trace) in &out.traces {
            fs::write(dir.join(format!("trace_seed{seed}.csv")), trace.to_csv())?;
        }
    }
    write_or_print(args.out.as_ref(), &out.to_csv(&cfg))
}

fn audit(args: AuditArgs) -> Result<bool> {
    let text = fs::read_to_string(&args.ensemble)
        .with_context(|| format!("reading {}", args.ensemble.display()))?;
    let ms = ensemble_from_json(&text)?;
    let solution: QpSolution = match &args.solution {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => {
            let mut cfg = match args.C {
                None => RunConfig::hard(args.delta),
                Some(c) => RunConfig::slack(args.delta, c),
            };
            cfg.max_iterations = args.max_iterations;
            let mut oracle = EllipsoidOracle::new(&ms);
            let initial = WorkingSet::from_centers(&ms);
            let outcome = match args.C {
                None => run_simple(&mut oracle, initial, &cfg)?,
                Some(_) => run_slack(&mut oracle, &centers_of(&ms), initial, &cfg)?,
            };
            eprintln!(
                "solved: status={} augmentations={}",
                outcome.status(),
                outcome.augmentations()
            );
            if let Some(p) = &args.trace_out {
                fs::write(p, outcome.trace.to_csv())?;
            }
            let Some(sol) = outcome.solution else {
                bail!("no feasible solution to audit (status {})", outcome.status());
            };
            if let Some(p) = &args.solution_out {
                fs::write(p, to_json_string(&sol)?)?;
            }
            sol
        }
    };
    let slacks = args.C.map(|_| solution.slacks.as_slice());
    let report = audit_solution(&solution.weights, slacks, &ms, args.delta, args.samples, args.seed);
    for m in &report.manifolds {
        println!(
            "manifold={} worst_margin={:.12e} oracle_margin={} violations={}",
            m.manifold,
            m.worst_sampled_margin,
            m.analytic_margin.map_or("-".to_string(), |a| format!("{a:.12e}")),
            m.violations
        );
    }
    println!("{}", report.summary());
    Ok(report.passed())
}

fn trace_check(args: TraceCheckArgs) -> Result<bool> {
    let trace = RunTrace::from_csv(&fs::read_to_string(&args.trace)?)?;
    let l = match (&args.ensemble, args.norm_bound) {
        (Some(p), _) => ensemble_norm_bound(&ensemble_from_json(&fs::read_to_string(p)?)?),
        (None, Some(l)) => l,
        (None, None) => bail!("either --ensemble or --norm-bound is required"),
    };
    let violations = check_trace(&trace, l, args.C);
    for v in &violations {
        println!("iteration={} check={} excess={:.3e}", v.iteration, v.check, v.excess);
    }
    println!(
        "rows={} augmentations={} status={} violations={}",
        trace.iterations.len(),
        trace.augmentation_count(),
        trace.status,
        violations.len()
    );
    Ok(violations.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a).map(|()| true),
        Command::Run(a) => run(a).map(|()| true),
        Command::Audit(a) => audit(a),
        Command::TraceCheck(a) => trace_check(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
