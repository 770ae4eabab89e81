//! Per-player l1-regularized logistic regression and game assembly.
//!
//! For player `i` the estimator minimizes
//! `(1/m) sum_l log(1 + exp(-v^T z_i(x_l))) + lambda * ||v||_1`
//! over `v = (w_{i,-i}, -b_i)` by proximal gradient descent with backtracking.

use crate::data::ActionCounts;
use crate::error::{arg, domain, Error, Result};
use crate::game::{fill_features, Game, JointAction};
use crate::linalg::Matrix;
use crate::scalar::{eta, sigmoid, softplus, Scalar};

/// Rows of `+-1` features with nonnegative multiplicities.
///
/// Identical samples are usually stored once with their count; the loss only
/// depends on the weighted rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    dim: usize,
    rows: Vec<T>,
    weights: Vec<T>,
    total: T,
}

impl<T: Scalar> DesignMatrix<T> {
    /// One unit-weight row per sample.
    pub fn new(rows: &[Vec<T>]) -> Result<Self> {
        let weights = vec![T::one(); rows.len()];
        Self::with_weights(rows, weights)
    }

    pub fn with_weights(rows: &[Vec<T>], weights: Vec<T>) -> Result<Self> {
        if rows.is_empty() {
            return Err(arg("design matrix needs at least one row"));
        }
        if weights.len() != rows.len() {
            return Err(Error::Dimension {
                expected: rows.len(),
                actual: weights.len(),
            });
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(arg("design matrix needs at least one column"));
        }
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for (l, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: r.len(),
                });
            }
            if r.iter().any(|&v| v != T::one() && v != -T::one()) {
                return Err(arg(format!("row {l} has an entry other than +-1")));
            }
            flat.extend_from_slice(r);
        }
        if weights.iter().any(|&w| !(w >= T::zero()) || !w.is_finite()) {
            return Err(arg("row weights must be finite and nonnegative"));
        }
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(arg("total row weight must be positive"));
        }
        Ok(DesignMatrix {
            dim,
            rows: flat,
            weights,
            total,
        })
    }

    /// Features `z_i(x)` of player `i` for every distinct observed action,
    /// weighted by its count.
    pub fn for_player(counts: &ActionCounts, i: usize) -> Result<Self> {
        let n = counts.n();
        if i >= n {
            return Err(arg(format!("player {i} out of range for {n} players")));
        }
        if counts.total() == 0 {
            return Err(arg("no observations"));
        }
        let mut rows = Vec::with_capacity(counts.entries().len() * n);
        let mut weights = Vec::with_capacity(counts.entries().len());
        for &(x, c) in counts.entries() {
            fill_features(x, i, n, &mut rows);
            weights.push(T::from_u64(c).expect("count representable"));
        }
        let total = T::from_u64(counts.total()).expect("count representable");
        Ok(DesignMatrix {
            dim: n,
            rows,
            weights,
            total,
        })
    }

    pub fn from_actions(actions: &[JointAction], n: usize, i: usize) -> Result<Self> {
        Self::for_player(&ActionCounts::from_actions(n, actions)?, i)
    }

    /// Number of features (`n` for a game with `n` players).
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored (distinct) rows.
    #[inline]
    pub fn rows(&self) -> usize {
        self.weights.len()
    }

    /// Sample size `m`: the sum of row weights.
    #[inline]
    pub fn total_weight(&self) -> T {
        self.total
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.rows[r * self.dim..(r + 1) * self.dim]
    }

    #[inline]
    pub fn weight(&self, r: usize) -> T {
        self.weights[r]
    }

    fn check(&self, v: &[T]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: v.len(),
            });
        }
        Ok(())
    }

    fn margins_into(&self, v: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(self.rows.chunks_exact(self.dim).map(|z| dot(z, v)));
    }

    fn loss_from_margins(&self, margins: &[T]) -> T {
        let s: T = margins
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * softplus(-t))
            .sum();
        s / self.total
    }

    fn gradient_from_margins(&self, margins: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|g| *g = T::zero());
        for ((z, &t), &w) in self
            .rows
            .chunks_exact(self.dim)
            .zip(margins)
            .zip(&self.weights)
        {
            let s = w * sigmoid(-t);
            for (g, &zj) in out.iter_mut().zip(z) {
                *g = *g - s * zj;
            }
        }
        out.iter_mut().for_each(|g| *g = *g / self.total);
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Average logistic loss `(1/m) sum log(1 + exp(-v^T z))`.
pub fn loss<T: Scalar>(v: &[T], z: &DesignMatrix<T>) -> Result<T> {
    z.check(v)?;
    let mut m = Vec::new();
    z.margins_into(v, &mut m);
    Ok(z.loss_from_margins(&m))
}

/// `(1/m) sum -z / (1 + exp(v^T z))`.
pub fn gradient<T: Scalar>(v: &[T], z: &DesignMatrix<T>) -> Result<Vec<T>> {
    z.check(v)?;
    let mut m = Vec::new();
    z.margins_into(v, &mut m);
    let mut g = vec![T::zero(); z.dim];
    z.gradient_from_margins(&m, &mut g);
    Ok(g)
}

/// `(1/m) sum eta(v^T z) z z^T`.
pub fn hessian<T: Scalar>(v: &[T], z: &DesignMatrix<T>) -> Result<Matrix<T>> {
    z.check(v)?;
    let mut h = Matrix::zeros(z.dim);
    for r in 0..z.rows() {
        let row = z.row(r);
        h.add_outer(z.weight(r) * eta(dot(row, v)), row);
    }
    h.scale(T::one() / z.total);
    Ok(h)
}

/// Proximal-gradient settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    pub lambda: T,
    pub max_iters: usize,
    /// Convergence threshold on the l1 KKT residual.
    pub tol: T,
    pub initial_step: T,
    /// Backtracking step multiplier in (0, 1).
    pub shrink: T,
    /// Penalize the bias coordinate (the last entry of `v`).
    pub penalize_bias: bool,
    /// FISTA momentum with function-value restart.
    pub accelerated: bool,
    /// Stop (unconverged) once `||v||_inf` exceeds this.
    pub norm_cap: T,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            lambda: T::zero(),
            max_iters: 50_000,
            tol: T::lit(T::DEFAULT_KKT_TOL),
            initial_step: T::one(),
            shrink: T::lit(0.5),
            penalize_bias: true,
            accelerated: false,
            norm_cap: T::lit(1e4),
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn with_lambda(mut self, lambda: T) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return Err(arg(format!(
                "lambda = {} must be finite and >= 0",
                self.lambda
            )));
        }
        if !(self.tol > T::zero()) {
            return Err(arg("tol must be positive"));
        }
        if self.max_iters == 0 {
            return Err(arg("max_iters must be at least 1"));
        }
        if !(self.initial_step > T::zero()) || !self.initial_step.is_finite() {
            return Err(arg("initial_step must be positive"));
        }
        if !(self.shrink > T::zero() && self.shrink < T::one()) {
            return Err(arg("shrink must lie in (0, 1)"));
        }
        if !(self.norm_cap > T::zero()) {
            return Err(arg("norm_cap must be positive"));
        }
        Ok(())
    }

    fn penalties(&self, dim: usize) -> Vec<T> {
        let mut p = vec![self.lambda; dim];
        if !self.penalize_bias {
            p[dim - 1] = T::zero();
        }
        p
    }
}

/// Outcome of one per-player fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub v_hat: Vec<T>,
    pub converged: bool,
    pub iters: usize,
    pub kkt_residual: T,
    pub final_objective: T,
    /// The iterate norm hit [`SolverConfig::norm_cap`].
    pub norm_capped: bool,
}

/// Largest violation of the l1 optimality conditions at `v` with gradient `g`.
pub fn kkt_residual<T: Scalar>(v: &[T], g: &[T], penalties: &[T]) -> T {
    v.iter()
        .zip(g)
        .zip(penalties)
        .map(|((&vj, &gj), &pj)| {
            if vj != T::zero() {
                (gj + pj * vj.signum()).abs()
            } else {
                (gj.abs() - pj).max(T::zero())
            }
        })
        .fold(T::zero(), T::max)
}

#[inline]
fn soft_threshold<T: Scalar>(x: T, t: T) -> T {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        T::zero()
    }
}

fn l1<T: Scalar>(v: &[T], p: &[T]) -> T {
    v.iter()
        .zip(p)
        .fold(T::zero(), |a, (&x, &w)| a + w * x.abs())
}

/// Scratch state for one proximal step evaluated at `base`.
struct Candidate<T> {
    v: Vec<T>,
    margins: Vec<T>,
    smooth: T,
}

fn prox_step<T: Scalar>(
    z: &DesignMatrix<T>,
    base: &[T],
    base_grad: &[T],
    penalties: &[T],
    step: T,
    out: &mut Candidate<T>,
) {
    out.v.clear();
    out.v.extend(
        base.iter()
            .zip(base_grad)
            .zip(penalties)
            .map(|((&b, &g), &p)| soft_threshold(b - step * g, step * p)),
    );
    z.margins_into(&out.v, &mut out.margins);
    out.smooth = z.loss_from_margins(&out.margins);
}

/// Quadratic upper-model test for the smooth part.
fn sufficient_decrease<T: Scalar>(
    base: &[T],
    base_grad: &[T],
    base_smooth: T,
    cand: &Candidate<T>,
    step: T,
) -> bool {
    let mut lin = T::zero();
    let mut sq = T::zero();
    for ((&c, &b), &g) in cand.v.iter().zip(base).zip(base_grad) {
        let d = c - b;
        lin = lin + g * d;
        sq = sq + d * d;
    }
    cand.smooth <= base_smooth + lin + sq / (T::lit(2.0) * step)
}

/// Fits one player's parameter vector starting from `v = 0`.
pub fn fit_player<T: Scalar>(z: &DesignMatrix<T>, cfg: &SolverConfig<T>) -> Result<FitResult<T>> {
    cfg.validate()?;
    let dim = z.dim;
    let pen = cfg.penalties(dim);
    let min_step = T::min_positive_value().sqrt();

    let mut v = vec![T::zero(); dim];
    let mut margins = vec![T::zero(); z.rows()];
    let mut smooth = z.loss_from_margins(&margins);
    let mut grad = vec![T::zero(); dim];
    z.gradient_from_margins(&margins, &mut grad);
    let mut objective = smooth;

    // extrapolated point for the accelerated variant
    let mut y = v.clone();
    let mut y_margins = margins.clone();
    let mut y_smooth = smooth;
    let mut y_grad = grad.clone();
    let mut momentum = T::one();

    let mut cand = Candidate {
        v: Vec::with_capacity(dim),
        margins: Vec::with_capacity(z.rows()),
        smooth: T::zero(),
    };
    let mut step = cfg.initial_step;
    let grow = T::lit(1.25);
    let step_cap = cfg.initial_step * T::lit(1e6);

    let mut kkt = kkt_residual(&v, &grad, &pen);
    let mut iters = 0;
    let mut norm_capped = false;
    while iters < cfg.max_iters {
        if !objective.is_finite() {
            return Err(Error::Numerical { iteration: iters });
        }
        if kkt <= cfg.tol {
            break;
        }
        let (base, base_grad, base_smooth) = if cfg.accelerated {
            (&y, &y_grad, y_smooth)
        } else {
            (&v, &grad, smooth)
        };
        let mut backtracked = false;
        loop {
            prox_step(z, base, base_grad, &pen, step, &mut cand);
            if !cand.smooth.is_finite() {
                return Err(Error::Numerical { iteration: iters });
            }
            if sufficient_decrease(base, base_grad, base_smooth, &cand, step) {
                break;
            }
            step = step * cfg.shrink;
            backtracked = true;
            if step < min_step {
                break;
            }
        }
        iters += 1;
        if step < min_step {
            log::warn!("step size underflow after {iters} iterations; stopping");
            break;
        }
        let cand_obj = cand.smooth + l1(&cand.v, &pen);

        if cfg.accelerated && cand_obj > objective {
            // restart momentum from the last accepted iterate
            momentum = T::one();
            y.clone_from(&v);
            y_margins.clone_from(&margins);
            y_smooth = smooth;
            y_grad.clone_from(&grad);
            continue;
        }

        let prev_v = std::mem::replace(&mut v, cand.v.clone());
        margins.clone_from(&cand.margins);
        smooth = cand.smooth;
        objective = cand_obj;
        z.gradient_from_margins(&margins, &mut grad);
        kkt = kkt_residual(&v, &grad, &pen);

        if cfg.accelerated {
            let next =
                (T::one() + (T::one() + T::lit(4.0) * momentum * momentum).sqrt()) / T::lit(2.0);
            let beta = (momentum - T::one()) / next;
            momentum = next;
            y.clear();
            y.extend(v.iter().zip(&prev_v).map(|(&a, &b)| a + beta * (a - b)));
            z.margins_into(&y, &mut y_margins);
            y_smooth = z.loss_from_margins(&y_margins);
            z.gradient_from_margins(&y_margins, &mut y_grad);
        }

        if !backtracked {
            step = (step * grow).min(step_cap);
        }
        if v.iter().any(|x| x.abs() > cfg.norm_cap) {
            log::warn!(
                "iterate norm exceeded {} after {iters} iterations",
                cfg.norm_cap
            );
            norm_capped = true;
            break;
        }
    }
    if !objective.is_finite() {
        return Err(Error::Numerical { iteration: iters });
    }
    Ok(FitResult {
        converged: kkt <= cfg.tol && !norm_capped,
        v_hat: v,
        iters,
        kkt_residual: kkt,
        final_objective: objective,
        norm_capped,
    })
}

/// `multiplier * sqrt((2/m) log(2n/delta))`.
pub fn lambda_schedule<T: Scalar>(m: T, n: usize, delta: T, multiplier: T) -> Result<T> {
    if !(m >= T::one()) {
        return Err(domain(format!("sample count m = {m} must be >= 1")));
    }
    if n == 0 {
        return Err(domain("player count must be positive"));
    }
    if !(delta > T::zero() && delta < T::one()) {
        return Err(domain(format!("delta = {delta} must lie in (0, 1)")));
    }
    if !(multiplier > T::zero()) || !multiplier.is_finite() {
        return Err(domain(format!(
            "multiplier = {multiplier} must be positive"
        )));
    }
    let two = T::lit(2.0);
    Ok(multiplier * ((two / m) * (two * T::from_count(n) / delta).ln()).sqrt())
}

/// How the regularization strength is chosen for a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaPolicy<T> {
    Fixed(T),
    /// [`lambda_schedule`] evaluated at the dataset's `m` and `n`.
    Schedule {
        delta: T,
        multiplier: T,
    },
}

impl<T: Scalar> LambdaPolicy<T> {
    pub fn resolve(&self, m: u64, n: usize) -> Result<T> {
        match *self {
            LambdaPolicy::Fixed(l) => Ok(l),
            LambdaPolicy::Schedule { delta, multiplier } => lambda_schedule(
                T::from_u64(m).expect("m representable"),
                n,
                delta,
                multiplier,
            ),
        }
    }
}

/// A fitted game together with each player's solver diagnostics.
#[derive(Debug, Clone)]
pub struct GameFit<T> {
    pub game: Game<T>,
    pub lambda: T,
    pub players: Vec<FitResult<T>>,
}

impl<T> GameFit<T> {
    pub fn max_iters(&self) -> usize {
        self.players.iter().map(|f| f.iters).max().unwrap_or(0)
    }

    pub fn all_converged(&self) -> bool {
        self.players.iter().all(|f| f.converged)
    }
}

/// Fits every player independently and assembles `(W_hat, b_hat)`.
pub fn fit_game<T: Scalar>(
    data: &ActionCounts,
    policy: LambdaPolicy<T>,
    cfg: &SolverConfig<T>,
) -> Result<GameFit<T>> {
    if data.total() == 0 {
        return Err(arg("cannot fit a game to an empty dataset"));
    }
    let n = data.n();
    let lambda = policy.resolve(data.total(), n)?;
    let cfg = cfg.with_lambda(lambda);
    let mut players = Vec::with_capacity(n);
    for i in 0..n {
        let z = DesignMatrix::for_player(data, i)?;
        let fit = fit_player(&z, &cfg).map_err(|e| Error::Player {
            player: i,
            source: Box::new(e),
        })?;
        players.push(fit);
    }
    let params: Vec<Vec<T>> = players.iter().map(|f| f.v_hat.clone()).collect();
    let game = Game::from_player_params(&params)?;
    Ok(GameFit {
        game,
        lambda,
        players,
    })
}

/// [`fit_game`] over a raw list of joint actions.
pub fn fit_game_actions<T: Scalar>(
    actions: &[JointAction],
    n: usize,
    policy: LambdaPolicy<T>,
    cfg: &SolverConfig<T>,
) -> Result<GameFit<T>> {
    if actions.is_empty() {
        return Err(arg("cannot fit a game to an empty dataset"));
    }
    fit_game(&ActionCounts::from_actions(n, actions)?, policy, cfg)
}
