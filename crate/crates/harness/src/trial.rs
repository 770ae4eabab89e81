//! One Monte Carlo trial: draw a game, sample, fit, compare equilibria.

use std::time::Instant;

use lig_core::{
    enumerate_psne, fit_game, games_equivalent, generate_game, min_payoff_over_psne, Game64,
    GlobalNoiseModel, JointDistribution, LambdaPolicy, LocalNoiseModel, NoiseModel64, PsneSet,
    SolverConfig64,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, NoiseSpec};
use crate::seed::trial_seed;

pub const DEGENERATE: &str = "degenerate";

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub n: usize,
    pub k: usize,
    pub c: f64,
    pub trial: usize,
    pub seed: u64,
    pub noise: NoiseSpec,
    pub delta: f64,
    pub lambda_multiplier: f64,
    pub m: u64,
    pub lambda: f64,
    pub recovered: bool,
    /// Margin of the game actually used; `None` for degenerate trials.
    pub rho_min: Option<f64>,
    pub psne_size: usize,
    pub redraws: usize,
    /// Largest per-player solver iteration count.
    pub max_iters: usize,
    pub converged: bool,
    pub error: Option<String>,
    pub wall_ms: Option<f64>,
}

/// A game accepted for a trial together with its observation model.
#[derive(Debug, Clone)]
pub struct DrawnGame {
    pub game: Game64,
    pub psne: PsneSet,
    pub model: NoiseModel64,
    pub rho_min: f64,
    pub redraws: usize,
}

fn build_model(psne: &PsneSet, noise: &NoiseSpec) -> lig_core::Result<NoiseModel64> {
    Ok(match noise {
        NoiseSpec::Global { q_g } => {
            NoiseModel64::Global(GlobalNoiseModel::new(psne.clone(), *q_g)?)
        }
        NoiseSpec::Local { .. } => {
            let q = noise.local_q(psne.n()).expect("local spec");
            NoiseModel64::Local(LocalNoiseModel::new(psne.clone(), q)?)
        }
    })
}

/// Draws games until one has a nonempty proper equilibrium set, a strictly
/// positive margin, and admits the noise model (global `q_g` must exceed
/// `|NE| / 2^n`). Returns the number of rejected draws on failure.
pub fn draw_game(
    n: usize,
    k: usize,
    noise: &NoiseSpec,
    max_redraws: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DrawnGame, usize> {
    for redraws in 0..=max_redraws {
        let game: Game64 = generate_game(n, k, rng).map_err(|_| redraws)?;
        let psne = enumerate_psne(&game).map_err(|_| redraws)?;
        if psne.is_empty() || psne.is_everything() {
            continue;
        }
        let rho_min = min_payoff_over_psne(&game, &psne).map_err(|_| redraws)?;
        if rho_min <= 0.0 {
            continue;
        }
        let Ok(model) = build_model(&psne, noise) else {
            continue;
        };
        return Ok(DrawnGame {
            game,
            psne,
            model,
            rho_min,
            redraws,
        });
    }
    Err(max_redraws + 1)
}

pub fn solver_config(cfg: &ExperimentConfig) -> SolverConfig64 {
    SolverConfig64 {
        penalize_bias: cfg.penalize_bias,
        ..SolverConfig64::default()
    }
}

/// Runs trial number `trial` of cell `(n, k, c)`. Failures are recorded in
/// the returned record rather than propagated.
pub fn run_trial(cfg: &ExperimentConfig, n: usize, k: usize, c: f64, trial: usize) -> TrialRecord {
    let start = Instant::now();
    let seed = trial_seed(cfg.seed, n, k, c, trial);
    let m = cfg.sample_count(n, k, c);
    let mut rec = TrialRecord {
        n,
        k,
        c,
        trial,
        seed,
        noise: cfg.noise_spec(),
        delta: cfg.delta,
        lambda_multiplier: cfg.lambda_multiplier,
        m,
        lambda: f64::NAN,
        recovered: false,
        rho_min: None,
        psne_size: 0,
        redraws: 0,
        max_iters: 0,
        converged: false,
        error: None,
        wall_ms: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match draw_game(n, k, &rec.noise, cfg.max_redraws, &mut rng) {
        Ok(drawn) => {
            rec.rho_min = Some(drawn.rho_min);
            rec.psne_size = drawn.psne.len();
            rec.redraws = drawn.redraws;
            if let Err(e) = fit_and_compare(cfg, &drawn, m, &mut rng, &mut rec) {
                log::warn!("n={n} k={k} c={c} trial={trial}: {e}");
                rec.error = Some(e.to_string());
            }
        }
        Err(redraws) => {
            rec.redraws = redraws;
            rec.error = Some(DEGENERATE.to_string());
        }
    }
    if cfg.wall_time {
        rec.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    rec
}

fn fit_and_compare(
    cfg: &ExperimentConfig,
    drawn: &DrawnGame,
    m: u64,
    rng: &mut ChaCha8Rng,
    rec: &mut TrialRecord,
) -> lig_core::Result<()> {
    let counts = drawn.model.sample_counts(m as usize, rng)?;
    let policy = LambdaPolicy::Schedule {
        delta: cfg.delta,
        multiplier: cfg.lambda_multiplier,
    };
    let fit = fit_game(&counts, policy, &solver_config(cfg))?;
    rec.lambda = fit.lambda;
    rec.max_iters = fit.max_iters();
    rec.converged = fit.all_converged();
    rec.recovered = games_equivalent(&drawn.game, &fit.game)?;
    Ok(())
}
