use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use oversmooth::asymptotics::{
    counterexample_system, ergodicity_probe, lambda_vs_jsr, GateMode, LayerSampler, OperatorMode,
};
use oversmooth::dynamics::run_trajectory;
use oversmooth::graph::{generate_graph, Graph, GraphSpec};
use oversmooth::harness::{
    compare_models, run_experiment, verify_suite, ExperimentConfig, Scope, VerifyOptions, OUT_ENV, SEED_ENV,
};
use oversmooth::measures::projection_matrix;
use oversmooth::Error;

#[derive(Parser)]
#[command(name = "oversmooth", version, about = "Oversmoothing experiments and checks for attention-based GNNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write the trajectory CSV and summary JSON.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Output when no directory is given: the CSV or the summary.
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Compare GAT against the random-walk GCN on the same seeds.
    Compare {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run verification checks and print a JSON report.
    Verify {
        /// Comma-separated scopes, or `all`.
        #[arg(long, default_value = "all")]
        scope: String,
        /// Use this config's graph instead of the builtin graphs.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
    },
    /// Compare λ of a graph with the joint spectral radius of its reduced class.
    Jsr {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to 1/d_max.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 24)]
        k_max: usize,
        #[arg(long, default_value_t = 400)]
        samples: usize,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
    },
    /// Trace a product of gated class operators and classify its limit.
    Probe {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        /// identity, scalar:S, uniform:LO:HI, decaying:R or zero:P.
        #[arg(long, default_value = "identity")]
        gates: String,
        /// random, extremal or mixed.
        #[arg(long, default_value = "mixed")]
        operators: String,
        #[arg(long, default_value_t = 500)]
        t_max: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
    },
    /// Run the two-node fixed-point system.
    Counterexample {
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Use the gates with their column labels exchanged.
        #[arg(long)]
        swapped: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// First seed; overrides the config.
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    /// complete:N, cycle:N, star:N, path:N or er:N:P.
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    self_loops: bool,
    #[arg(long, default_value_t = 0)]
    graph_seed: u64,
}

enum Failure {
    /// Exit code 1.
    Check(String),
    /// Exit code 2.
    Config(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } | Error::Io(_) => Failure::Config(e.to_string()),
            other => Failure::Check(other.to_string()),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn parse_graph_spec(s: &str) -> Result<GraphSpec, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let n = |i: usize| -> Result<usize, Failure> {
        parts.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| config_err(format!("bad node count in {s:?}")))
    };
    Ok(match parts[0] {
        "complete" => GraphSpec::Complete { n: n(1)? },
        "cycle" => GraphSpec::Cycle { n: n(1)? },
        "star" => GraphSpec::Star { n: n(1)? },
        "path" => GraphSpec::Path { n: n(1)? },
        "er" => GraphSpec::ErdosRenyi {
            n: n(1)?,
            p: parts.get(2).and_then(|v| v.parse().ok()).ok_or_else(|| config_err(format!("bad p in {s:?}")))?,
        },
        other => return Err(config_err(format!("unknown graph kind {other:?}"))),
    })
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path).map_err(config_err)?;
    cfg.apply_env().map_err(config_err)?;
    Ok(cfg)
}

fn resolve_graph(args: &GraphArgs, config: Option<&PathBuf>) -> Result<Option<(String, Graph)>, Failure> {
    if let Some(s) = &args.graph {
        let spec = parse_graph_spec(s)?;
        let g = generate_graph(spec, args.graph_seed, args.self_loops).map_err(config_err)?;
        let loops = if args.self_loops { "+loops" } else { "" };
        return Ok(Some((format!("{spec}{loops}"), g)));
    }
    match config {
        Some(path) => {
            let cfg = load_config(path)?;
            Ok(Some((cfg.graph.describe(), cfg.graph.build().map_err(config_err)?)))
        }
        None => Ok(None),
    }
}

fn require_graph(args: &GraphArgs, config: Option<&PathBuf>) -> Result<Graph, Failure> {
    resolve_graph(args, config)?
        .map(|(_, g)| g)
        .ok_or_else(|| config_err("give --graph or --config"))
}

fn parse_gates(s: &str) -> Result<GateMode, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> Result<f64, Failure> {
        parts.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| config_err(format!("bad gate spec {s:?}")))
    };
    Ok(match parts[0] {
        "identity" => GateMode::Identity,
        "scalar" => GateMode::Scalar { s: num(1)? },
        "uniform" => GateMode::Uniform { lo: num(1)?, hi: num(2)? },
        "decaying" => GateMode::Decaying { r: num(1)? },
        "zero" => GateMode::SometimesZero { p: num(1)? },
        other => return Err(config_err(format!("unknown gate mode {other:?}"))),
    })
}

fn default_eps(g: &Graph, eps: Option<f64>) -> f64 {
    eps.unwrap_or(1.0 / g.max_degree().max(1) as f64)
}

fn print_json(v: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Simulate { run, format } => {
            let mut cfg = load_config(&run.config)?;
            if let Some(s) = run.seed {
                cfg.seed = s;
            }
            if let Some(o) = run.out {
                cfg.output.dir = Some(o);
            }
            let out = run_experiment(&cfg)?;
            match &cfg.output.dir {
                Some(dir) => {
                    for p in out.write_to(dir)? {
                        eprintln!("wrote {}", p.display());
                    }
                    for r in &out.runs {
                        match (&r.fit, &r.skipped) {
                            (Some(f), _) => eprintln!(
                                "seed {}: slope {:.6} (q = {:.6}), R^2 {:.4}, window {:?}",
                                r.seed,
                                f.slope,
                                f.q(),
                                f.r_squared,
                                f.window
                            ),
                            (None, why) => eprintln!("seed {}: no fit ({})", r.seed, why.as_deref().unwrap_or("")),
                        }
                    }
                }
                None => match format {
                    Format::Csv => {
                        let stdout = std::io::stdout();
                        let mut lock = stdout.lock();
                        out.write_csv(&mut lock)?;
                        lock.flush().map_err(Error::from)?;
                    }
                    Format::Json => print_json(&out.summary_json()),
                },
            }
            Ok(true)
        }
        Command::Compare { run } => {
            let mut cfg = load_config(&run.config)?;
            if let Some(s) = run.seed {
                cfg.seed = s;
            }
            if let Some(o) = run.out {
                cfg.output.dir = Some(o);
            }
            let report = compare_models(&cfg)?;
            if let Some(dir) = &cfg.output.dir {
                std::fs::create_dir_all(dir).map_err(Error::from)?;
                let path = dir.join(format!("{}.compare.json", cfg.output.name));
                std::fs::write(&path, serde_json::to_string_pretty(&report).expect("json")).map_err(Error::from)?;
                eprintln!("wrote {}", path.display());
            }
            print_json(&report);
            Ok(true)
        }
        Command::Verify { scope, config, graph, seed } => {
            let scopes = Scope::parse_list(&scope).map_err(config_err)?;
            let mut opts = VerifyOptions { scopes, seed, ..VerifyOptions::default() };
            if let Some(g) = resolve_graph(&graph, config.as_ref())? {
                opts.graphs = vec![g];
            }
            let report = verify_suite(&opts);
            print_json(&report);
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!("FAIL [{}] {}: {}", c.scope, c.name, c.detail);
            }
            Ok(report.passed)
        }
        Command::Jsr { graph, config, eps, k_max, samples, seed } => {
            let g = require_graph(&graph, config.as_ref())?;
            let report = lambda_vs_jsr(&g, default_eps(&g, eps), k_max, samples, seed)?;
            print_json(&report);
            Ok(report.holds)
        }
        Command::Probe { graph, config, eps, gates, operators, t_max, tol, seed } => {
            let g = require_graph(&graph, config.as_ref())?;
            let gates = parse_gates(&gates)?;
            let ops = match operators.as_str() {
                "random" => OperatorMode::Random,
                "extremal" => OperatorMode::Extremal,
                "mixed" => OperatorMode::Mixed,
                other => return Err(config_err(format!("unknown operator mode {other:?}"))),
            };
            let proj = projection_matrix(g.n_nodes())?;
            let eps = default_eps(&g, eps);
            let mut sampler = LayerSampler::new(g, eps, ops, gates, seed)?;
            print_json(&ergodicity_probe(&mut sampler, &proj, t_max, tol)?);
            Ok(true)
        }
        Command::Counterexample { steps, swapped } => {
            let base = counterexample_system();
            let sys = if swapped { base.with_swapped_gates() } else { base };
            let rec = run_trajectory(&sys.graph, &sys.x, &sys.weights(steps), &sys.rule(), steps)?;
            let drift = rec.states.iter().map(|s| s.max_abs_diff(&sys.x)).fold(0.0, f64::max);
            let fixed = drift <= 1e-12;
            print_json(&serde_json::json!({
                "steps": steps,
                "swapped_gates": swapped,
                "mu_initial": rec.series.mu[0],
                "mu_final": rec.series.mu[steps],
                "mu_min": rec.series.mu.iter().copied().fold(f64::INFINITY, f64::min),
                "max_state_drift": drift,
                "fixed_point": fixed,
            }));
            Ok(fixed || swapped)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
