use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lig_core::{
    enumerate_psne, fit_game, generate_game, ActionCounts, Dataset, Game64, GlobalNoiseModel,
    JointDistribution, LambdaPolicy, LocalNoiseModel, NoiseModel64, SolverConfig64,
};
use lig_harness::config::{parse_c_map, parse_list, DEFAULT_LOCAL_C_GRID};
use lig_harness::{
    annotate_theory, read_trials, run_sweep, write_annotated, write_sweep, ExperimentConfig,
    HarnessError, NoiseKind,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "lig",
    version,
    about = "Equilibrium recovery experiments for linear influence games"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a phase-transition sweep and write trials.csv and aggregate.csv.
    Run(RunArgs),
    /// Add exact theory constants to a trials.csv.
    Annotate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the equilibria of a game file, one sign vector per line.
    Psne {
        #[arg(long)]
        game: PathBuf,
    },
    /// Print a random game with `k` negative unit weights per player.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample joint actions from a noise model over a game's equilibria.
    Sample {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, default_value = "global")]
        noise: String,
        #[arg(long, default_value_t = 0.01)]
        qg: f64,
        #[arg(long, default_value = "0.6")]
        q: String,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit a game to a dataset file and print it.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Fixed regularization; overrides the schedule.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda_multiplier: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// key = value file; flags given alongside it override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    qg: Option<f64>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long = "c-grid", allow_hyphen_values = true)]
    c_grid: Option<String>,
    /// Base constants per in-degree, e.g. "1:10000,3:1000".
    #[arg(long = "base-c")]
    base_c: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    lambda_multiplier: Option<f64>,
    /// Leave the bias unpenalized.
    #[arg(long)]
    free_bias: bool,
    /// Record per-trial wall time (output is then no longer reproducible byte for byte).
    #[arg(long)]
    wall_time: bool,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config { .. } | HarnessError::Invalid(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<lig_core::Error> for Failure {
    fn from(e: lig_core::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn run_config(a: RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::parse(&read(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &a.n {
        cfg.n_list = parse_list(v).map_err(usage)?;
    }
    if let Some(v) = &a.k {
        cfg.k_list = parse_list(v).map_err(usage)?;
    }
    if let Some(v) = &a.noise {
        cfg.noise = v.parse().map_err(usage)?;
        if cfg.noise == NoiseKind::Local && a.c_grid.is_none() && a.config.is_none() {
            cfg.c_grid = DEFAULT_LOCAL_C_GRID.to_vec();
        }
    }
    if let Some(v) = a.qg {
        cfg.q_g = v;
    }
    if let Some(v) = &a.q {
        cfg.q = parse_list(v).map_err(usage)?;
    }
    if let Some(v) = a.delta {
        cfg.delta = v;
    }
    if let Some(v) = a.trials {
        cfg.trials = v;
    }
    if let Some(v) = &a.c_grid {
        cfg.c_grid = parse_list(v).map_err(usage)?;
    }
    if let Some(v) = &a.base_c {
        cfg.c_of_k = parse_c_map(v).map_err(usage)?;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.out {
        cfg.out = v;
    }
    if let Some(v) = a.lambda_multiplier {
        cfg.lambda_multiplier = v;
    }
    if a.free_bias {
        cfg.penalize_bias = false;
    }
    cfg.wall_time |= a.wall_time;
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<(), Failure> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let io = |e: std::io::Error| Failure::Runtime(e.to_string());
    match cmd {
        Command::Run(args) => {
            let cfg = run_config(args)?;
            let result = run_sweep(&cfg)?;
            let (trials, agg) = write_sweep(&cfg.out, &result, cfg.wall_time)?;
            for a in &result.aggregate {
                writeln!(
                    out,
                    "n={} k={} c={} m={} p={}",
                    a.n, a.k, a.c, a.m, a.probability
                )
                .map_err(io)?;
            }
            writeln!(out, "wrote {} and {}", trials.display(), agg.display()).map_err(io)?;
        }
        Command::Annotate { input, out: path } => {
            let f = std::fs::File::open(&input)
                .map_err(|e| Failure::Runtime(format!("{}: {e}", input.display())))?;
            let records = read_trials(f)?;
            let rows = annotate_theory(&records);
            let f = std::fs::File::create(&path)
                .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            write_annotated(std::io::BufWriter::new(f), &rows)?;
        }
        Command::Psne { game } => {
            let g = Game64::from_text(&read(&game)?)?;
            let psne = enumerate_psne(&g)?;
            for x in psne.iter() {
                let signs: Vec<String> =
                    x.to_signs(g.n()).iter().map(|s| format!("{s:+}")).collect();
                writeln!(out, "{}", signs.join(" ")).map_err(io)?;
            }
            log::info!("{} equilibria", psne.len());
        }
        Command::Gen { n, k, seed } => {
            let g: Game64 =
                generate_game(n, k, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(usage)?;
            write!(out, "{}", g.to_text()).map_err(io)?;
        }
        Command::Sample {
            game,
            noise,
            qg,
            q,
            m,
            seed,
        } => {
            let g = Game64::from_text(&read(&game)?)?;
            let psne = enumerate_psne(&g)?;
            let kind: NoiseKind = noise.parse().map_err(usage)?;
            let model = match kind {
                NoiseKind::Global => NoiseModel64::Global(GlobalNoiseModel::new(psne, qg)?),
                NoiseKind::Local => {
                    let mut q: Vec<f64> = parse_list(&q).map_err(usage)?;
                    if q.len() == 1 {
                        q = vec![q[0]; g.n()];
                    }
                    NoiseModel64::Local(LocalNoiseModel::new(psne, q)?)
                }
            };
            let actions = model.sample(m, &mut ChaCha8Rng::seed_from_u64(seed))?;
            let data = Dataset::new(g.n(), model.label(), seed, actions)?;
            write!(out, "{}", data.to_text()).map_err(io)?;
        }
        Command::Fit {
            data,
            lambda,
            delta,
            lambda_multiplier,
        } => {
            let d = Dataset::from_text(&read(&data)?)?;
            let counts = ActionCounts::from_actions(d.n, &d.actions)?;
            let policy = match lambda {
                Some(l) => LambdaPolicy::Fixed(l),
                None => LambdaPolicy::Schedule {
                    delta,
                    multiplier: lambda_multiplier,
                },
            };
            let fit = fit_game(&counts, policy, &SolverConfig64::default())?;
            if !fit.all_converged() {
                log::warn!("some players did not converge");
            }
            write!(out, "{}", fit.game.to_text()).map_err(io)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
