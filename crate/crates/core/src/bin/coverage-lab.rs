use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use coverage_lab::agents::{
    golf_beta, make_offline_dataset, run_golf, run_hybridq, Behavior, GolfConfig, HybridConfig,
};
use coverage_lab::coverage::{
    c_cov, c_cw, p_cov, p_out, partial_class, zeta_tradeoff, CwSolverConfig, DataDistribution,
};
use coverage_lab::harness::{build_class, generate, resolve_jobs, run_experiment, ClassSpec, ExperimentConfig};
use coverage_lab::lsvi::{run_lsvi, LambdaMode, LsviConfig};
use coverage_lab::mdp::{enumerate_policies, load_mdp, optimal_values, save_mdp, Environment, LinearMdp, PolicyClass};
use coverage_lab::rng::stream_seed;
use coverage_lab::theory::{run_suite, verify_phi_bounds_run};
use coverage_lab::trace::{Checkpoints, RegretTrace};
use coverage_lab::{LabError, Result};

const ENUM_CAP: u64 = 1 << 22;

#[derive(Parser)]
#[command(name = "coverage-lab", version, about = "Coverage coefficients, online RL agents and lemma checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassKind {
    /// Materialise every deterministic policy.
    Enum,
    /// Symbolic full class (reachability recursion where possible).
    Full,
}

#[derive(clap::Args)]
struct AgentArgs {
    /// Model file (JSON).
    mdp: PathBuf,
    #[arg(long, short = 'T', default_value_t = 1000)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    beta_scale: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Record every episode instead of the geometric schedule.
    #[arg(long)]
    every: bool,
    /// Trace CSV output; printed to stdout when absent.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Coverage coefficients of a tabular model.
    Coverage {
        mdp: PathBuf,
        #[arg(long, value_enum, default_value = "full")]
        class: ClassKind,
        /// Exponent of the L^p coverability.
        #[arg(long)]
        p: Option<f64>,
        /// Partial-class radius around the optimal policy.
        #[arg(long)]
        zeta: Option<f64>,
        /// Hard-set constant; defaults to H.
        #[arg(long)]
        c1: Option<f64>,
        /// Tabulate the trade-off over zeta = 0, 0.25, ..., 2.
        #[arg(long)]
        sweep_zeta: bool,
    },
    /// Run an experiment configuration.
    Run {
        config: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        /// Recompute runs whose CSV already exists.
        #[arg(long)]
        force: bool,
    },
    /// Optimistic confidence-set agent over a Bellman-closed class.
    Golf(AgentArgs),
    /// Fitted Q-iteration on offline plus online data.
    Hybridq {
        #[command(flatten)]
        args: AgentArgs,
        /// Offline samples per step (uniform behaviour); defaults to T.
        #[arg(long)]
        n_off: Option<usize>,
    },
    /// LSVI-UCB (tabular models get one-hot features).
    Lsvi {
        #[command(flatten)]
        args: AgentArgs,
        #[arg(long, default_value_t = 0.5)]
        eta: f64,
        #[arg(long)]
        lambda: Option<f64>,
        /// Refresh lambda = t^eta every episode.
        #[arg(long)]
        per_episode_lambda: bool,
    },
    /// Run the numerical check suites.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Summary JSON output; printed to stdout when absent.
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
    },
    /// Write a generated model to a file.
    Gen {
        /// random_tabular | chain | block | bandit | closed_class | random_linear
        generator: String,
        /// Parameters as key=value, e.g. S=3 A=2 H=4 seed=7.
        params: Vec<String>,
        #[arg(long, short = 'o')]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Write to stdout, ignoring a closed pipe.
fn out(text: &str) {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush());
}

fn print_json(v: &Value) {
    out(&format!("{}\n", serde_json::to_string_pretty(v).expect("value is serializable")));
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("value is serializable")
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Coverage { mdp, class, p, zeta, c1, sweep_zeta } => coverage(mdp, class, p, zeta, c1, sweep_zeta),
        Command::Run { config, jobs, force } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = run_experiment(&cfg, resolve_jobs(jobs)?, force)?;
            eprintln!(
                "{} runs computed, summary in {}",
                summary.computed,
                cfg.output_dir.join("summary.json").display()
            );
            let failed = summary.cells.iter().flat_map(|c| &c.checks).any(|c| !c.pass);
            let errors = summary.cells.iter().any(|c| !c.errors.is_empty());
            Ok(if errors {
                1
            } else if failed {
                2
            } else {
                0
            })
        }
        Command::Golf(args) => {
            let env = load_mdp(&args.mdp)?;
            let mdp = env.tabular();
            let class = build_class(mdp, &ClassSpec::default())?;
            let beta = golf_beta(class.size(), args.episodes, mdp.horizon(), args.delta, args.beta_scale);
            let mut cfg = GolfConfig::new(beta, args.episodes);
            cfg.checkpoints = checkpoints(args.every);
            let run = run_golf(mdp, &class, &cfg, args.seed)?;
            eprintln!(
                "class size {}, beta {beta:.4}, Q* kept in every confidence set: {:?}",
                class.size(),
                run.qstar_always_in_set
            );
            emit(&run.trace, args.output)
        }
        Command::Hybridq { args, n_off } => {
            let env = load_mdp(&args.mdp)?;
            let mdp = env.tabular();
            let class = build_class(mdp, &ClassSpec::default())?;
            let nu = DataDistribution::uniform(mdp.horizon(), mdp.n_states(), mdp.n_actions());
            let n_off = n_off.unwrap_or(args.episodes);
            let offline = make_offline_dataset(mdp, Behavior::Distribution(&nu), n_off, stream_seed(args.seed, 1))?;
            let mut cfg = HybridConfig::new(args.episodes);
            cfg.checkpoints = checkpoints(args.every);
            emit(&run_hybridq(mdp, &class, &offline, &cfg, args.seed)?, args.output)
        }
        Command::Lsvi { args, eta, lambda, per_episode_lambda } => {
            let env = load_mdp(&args.mdp)?;
            let lin = match env {
                Environment::Linear(l) => l,
                Environment::Tabular(m) => LinearMdp::one_hot(&m)?,
            };
            let mut cfg = LsviConfig::new(args.episodes);
            cfg.eta = eta;
            cfg.lambda = lambda;
            cfg.beta_scale = args.beta_scale;
            cfg.delta = args.delta;
            cfg.lambda_mode = if per_episode_lambda { LambdaMode::PerEpisode } else { LambdaMode::Fixed };
            cfg.checkpoints = checkpoints(args.every);
            let run = run_lsvi(&lin, &cfg, args.seed)?;
            let sandwich = verify_phi_bounds_run(&run);
            eprintln!("lambda {:.4}, beta {:.4}, feature-norm sandwich: {}", run.lambda, run.beta, sandwich.status());
            emit(&run.trace, args.output)
        }
        Command::Verify { suite, seed, output } => {
            let report = run_suite(&suite, seed)?;
            for r in &report.results {
                eprintln!("{:<22} {}  margin {:.3e}  trials {}", r.name, r.status(), r.margin, r.trials);
            }
            let json = report.to_json();
            match output {
                Some(path) => coverage_lab::harness::write_atomic(&path, json.as_bytes())?,
                None => out(&format!("{json}\n")),
            }
            Ok(if report.ok() { 0 } else { 2 })
        }
        Command::Gen { generator, params, output } => {
            let mut map = BTreeMap::new();
            for kv in &params {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| LabError::InvalidArgument(format!("parameter `{kv}` is not key=value")))?;
                let v: f64 = v
                    .parse()
                    .map_err(|_| LabError::InvalidArgument(format!("parameter `{k}` has non-numeric value `{v}`")))?;
                map.insert(k.to_string(), v);
            }
            save_mdp(&generate(&generator, &map)?, &output)?;
            Ok(0)
        }
    }
}

fn checkpoints(every: bool) -> Checkpoints {
    if every {
        Checkpoints::Every
    } else {
        Checkpoints::default()
    }
}

fn emit(trace: &RegretTrace, output: Option<PathBuf>) -> Result<u8> {
    match output {
        Some(path) => trace.write_csv(path)?,
        None => out(&String::from_utf8_lossy(&trace.to_csv_bytes()?)),
    }
    Ok(0)
}

fn coverage(
    path: PathBuf,
    class: ClassKind,
    p: Option<f64>,
    zeta: Option<f64>,
    c1: Option<f64>,
    sweep_zeta: bool,
) -> Result<u8> {
    let env = load_mdp(&path)?;
    let mdp = env.tabular();
    let policies = match class {
        ClassKind::Enum => enumerate_policies(mdp, ENUM_CAP)?,
        ClassKind::Full => PolicyClass::AllDeterministic { cap: ENUM_CAP },
    };
    let mut out = serde_json::Map::new();
    out.insert("c_cov".into(), to_value(&c_cov(mdp, &policies)?));
    if let Some(p) = p {
        out.insert("c_cw".into(), to_value(&c_cw(mdp, &policies, p, &CwSolverConfig::default())?));
    }
    let c1 = c1.unwrap_or(mdp.horizon() as f64);
    let reference = optimal_values(mdp).policy;
    if let Some(zeta) = zeta {
        let partial = partial_class(mdp, &policies, &reference, zeta)?;
        out.insert("members".into(), json!(partial.members.len()));
        out.insert("p_cov".into(), to_value(&p_cov(mdp, &policies, &partial)?));
        out.insert("p_out".into(), to_value(&p_out(mdp, &policies, &partial, c1)?));
    }
    if sweep_zeta {
        let grid: Vec<f64> = (0..=8).map(|k| k as f64 * 0.25).collect();
        out.insert("zeta_tradeoff".into(), to_value(&zeta_tradeoff(mdp, &policies, &reference, &grid, c1)?));
    }
    print_json(&Value::Object(out));
    Ok(0)
}
