//! Constants and bounds from the recovery analysis, computed exactly by
//! enumerating the joint action space.
//!
//! The per-player quantities are:
//! * `c_min`: smallest eigenvalue of `E[eta(v*^T z) z_S z_S^T]`,
//! * `d_max`: largest eigenvalue of `E[z_S z_S^T]`,
//! * `kappa = 1 / (1 + exp(rho_min))`,
//! * `nu = kappa * P(NE) + (tp_max - tp_min)/(2 - f) + f * tp_min/(2 - f)`,
//! * `K = 5 c_min^2 / (32 k d_max) - nu`.
//!
//! The Fano ensemble is the family of `k`-influential bipartite games used for
//! the sample-size lower bound; every member has a single, distinct equilibrium.

use std::collections::{BTreeSet, HashSet};

use rand::Rng;

use crate::error::{arg, domain, Error, Result};
use crate::game::{
    action_count, enumerate_psne, fill_features, min_payoff_over_psne, Game, JointAction, PsneSet,
};
use crate::linalg::Matrix;
use crate::noise::{DistributionConstants, JointDistribution};
use crate::scalar::{eta, Scalar};

/// Exact expectations sweep `2^n` actions; capped here.
pub const THEORY_MAX_PLAYERS: usize = 16;

/// Largest `n` accepted by [`fano_kl`].
pub const FANO_KL_MAX_PLAYERS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryConstants<T> {
    pub n: usize,
    pub c_min: T,
    pub d_max: T,
    pub kappa: T,
    pub nu: T,
    /// `K` evaluated with `k = support_size`.
    pub k_const: T,
    pub rho_min: T,
    /// `|S|`, or the largest support over players for game-level constants.
    pub support_size: usize,
    /// `||v*||_1` (largest over players for game-level constants).
    pub v_star_l1: T,
    pub ne_count: usize,
    pub dist: DistributionConstants<T>,
}

impl<T: Scalar> TheoryConstants<T> {
    /// `K = 5 c_min^2 / (32 k d_max) - nu` for an arbitrary in-degree bound `k`.
    pub fn k_for(&self, k: usize) -> T {
        T::lit(5.0) * self.c_min * self.c_min / (T::lit(32.0) * T::from_count(k) * self.d_max)
            - self.nu
    }

    /// `5 c_min / d_max`: the payoff margin the recovery guarantee needs, and
    /// the l1 radius the estimate is expected to fall within.
    pub fn payoff_threshold(&self) -> T {
        T::lit(5.0) * self.c_min / self.d_max
    }

    /// `rho_min > 5 c_min / d_max`.
    pub fn margin_strict(&self) -> bool {
        self.rho_min > self.payoff_threshold()
    }

    /// `rho_min >= 5 c_min / d_max`.
    pub fn margin_weak(&self) -> bool {
        self.rho_min >= self.payoff_threshold()
    }

    /// `eta(||v*||_1) 2^n tp_min / (2^n - |NE|)`.
    pub fn c_min_lower_bound(&self) -> T {
        let total = T::from_u64(action_count(self.n)).expect("representable");
        let others =
            T::from_u64(action_count(self.n) - self.ne_count as u64).expect("representable");
        eta(self.v_star_l1) * total * self.dist.tp_min / others
    }

    /// `2^n p_max`.
    pub fn d_max_upper_bound(&self) -> T {
        T::from_u64(action_count(self.n)).expect("representable") * self.dist.p_max
    }
}

fn check_theory_players(n: usize) -> Result<()> {
    if n > THEORY_MAX_PLAYERS {
        return Err(Error::Capacity {
            what: "exact theory constants",
            limit: THEORY_MAX_PLAYERS,
            n,
        });
    }
    Ok(())
}

/// Indices of the nonzero entries of `v_i*`.
pub fn support<T: Scalar>(game: &Game<T>, i: usize) -> Vec<usize> {
    game.player_params(i)
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != T::zero())
        .map(|(j, _)| j)
        .collect()
}

/// Exact expected restricted Hessian `E[eta(v*^T z) z_S z_S^T]` and scatter
/// `E[z_S z_S^T]` for player `i` under `dist`.
pub fn expected_matrices<T: Scalar, D: JointDistribution<T> + ?Sized>(
    v_star: &[T],
    support: &[usize],
    dist: &D,
    i: usize,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let n = dist.n();
    check_theory_players(n)?;
    if v_star.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: v_star.len(),
        });
    }
    if i >= n || support.iter().any(|&j| j >= n) {
        return Err(arg("player or support index out of range"));
    }
    let s = support.len();
    let mut hess = Matrix::zeros(s);
    let mut scatter = Matrix::zeros(s);
    let mut z = Vec::with_capacity(n);
    let mut zs = vec![T::zero(); s];
    for x in JointAction::all(n) {
        let p = dist.pmf(x);
        if p == T::zero() {
            continue;
        }
        z.clear();
        fill_features(x, i, n, &mut z);
        let t = z
            .iter()
            .zip(v_star)
            .fold(T::zero(), |a, (&zj, &vj)| a + zj * vj);
        for (dst, &j) in zs.iter_mut().zip(support) {
            *dst = z[j];
        }
        hess.add_outer(p * eta(t), &zs);
        scatter.add_outer(p, &zs);
    }
    Ok((hess, scatter))
}

/// Per-player constants for `game` under the observation model `dist`.
pub fn compute_constants<T: Scalar, D: JointDistribution<T> + ?Sized>(
    game: &Game<T>,
    dist: &D,
    i: usize,
) -> Result<TheoryConstants<T>> {
    let n = game.n();
    check_theory_players(n)?;
    if dist.n() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: dist.n(),
        });
    }
    if i >= n {
        return Err(arg(format!("player {i} out of range for {n} players")));
    }
    let psne = enumerate_psne(game)?;
    let shared = SharedConstants::new(game, &psne, dist)?;
    player_constants(game, dist, i, &shared)
}

/// Worst case over players: smallest `c_min`, largest `d_max`, largest support.
pub fn compute_game_constants<T: Scalar, D: JointDistribution<T> + ?Sized>(
    game: &Game<T>,
    dist: &D,
) -> Result<TheoryConstants<T>> {
    let n = game.n();
    check_theory_players(n)?;
    let psne = enumerate_psne(game)?;
    let shared = SharedConstants::new(game, &psne, dist)?;
    let mut acc: Option<TheoryConstants<T>> = None;
    for i in 0..n {
        let c = player_constants(game, dist, i, &shared)?;
        acc = Some(match acc {
            None => c,
            Some(a) => TheoryConstants {
                c_min: a.c_min.min(c.c_min),
                d_max: a.d_max.max(c.d_max),
                support_size: a.support_size.max(c.support_size),
                v_star_l1: a.v_star_l1.max(c.v_star_l1),
                ..a
            },
        });
    }
    let mut out = acc.expect("at least one player");
    out.k_const = out.k_for(out.support_size);
    Ok(out)
}

struct SharedConstants<T> {
    rho_min: T,
    kappa: T,
    nu: T,
    ne_count: usize,
    dist: DistributionConstants<T>,
}

impl<T: Scalar> SharedConstants<T> {
    fn new<D: JointDistribution<T> + ?Sized>(
        game: &Game<T>,
        psne: &PsneSet,
        dist: &D,
    ) -> Result<Self> {
        if dist.n() != game.n() {
            return Err(Error::Dimension {
                expected: game.n(),
                actual: dist.n(),
            });
        }
        let rho_min = min_payoff_over_psne(game, psne)?;
        let dc = dist.constants()?;
        let kappa = T::one() / (T::one() + rho_min.exp());
        let two_minus_f = T::lit(2.0) - dc.f_ne;
        let nu = kappa * dc.ne_mass
            + (dc.tp_max - dc.tp_min) / two_minus_f
            + dc.f_ne * dc.tp_min / two_minus_f;
        Ok(SharedConstants {
            rho_min,
            kappa,
            nu,
            ne_count: psne.len(),
            dist: dc,
        })
    }
}

fn player_constants<T: Scalar, D: JointDistribution<T> + ?Sized>(
    game: &Game<T>,
    dist: &D,
    i: usize,
    shared: &SharedConstants<T>,
) -> Result<TheoryConstants<T>> {
    let v_star = game.player_params(i);
    let s = support(game, i);
    if s.is_empty() {
        return Err(domain(format!("player {i} has an empty support")));
    }
    let (hess, scatter) = expected_matrices(&v_star, &s, dist, i)?;
    let c_min = hess.symmetric_eigenvalues()[0];
    let d_max = *scatter
        .symmetric_eigenvalues()
        .last()
        .expect("nonempty support");
    let mut out = TheoryConstants {
        n: game.n(),
        c_min,
        d_max,
        kappa: shared.kappa,
        nu: shared.nu,
        k_const: T::zero(),
        rho_min: shared.rho_min,
        support_size: s.len(),
        v_star_l1: v_star.iter().fold(T::zero(), |a, &v| a + v.abs()),
        ne_count: shared.ne_count,
        dist: shared.dist,
    };
    out.k_const = out.k_for(s.len());
    Ok(out)
}

/// Regularization window and sample requirement of the recovery guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryWindow<T> {
    pub lambda_lo: T,
    pub lambda_hi: T,
    /// The three sample-size requirements; `m_required` is their max.
    pub m_branches: [T; 3],
    pub m_required: T,
    pub k_const: T,
    pub window_nonempty: bool,
    pub m_sufficient: bool,
}

impl<T: Scalar> RecoveryWindow<T> {
    pub fn contains(&self, lambda: T) -> bool {
        self.window_nonempty && lambda >= self.lambda_lo && lambda <= self.lambda_hi
    }
}

/// `nu + r <= lambda <= 2K + nu - r` with `r = sqrt((2/m) log(6n^2/delta))`, and
/// `m >= max{(2/K^2) log(6n^2/delta), (2k/c_min) log(3kn/delta), (4k/tp_min) log(3kn/delta)}`.
///
/// A non-positive `K` or a zero `tp_min` makes the corresponding requirement infinite.
pub fn recovery_window<T: Scalar>(
    constants: &TheoryConstants<T>,
    n: usize,
    k: usize,
    m: T,
    delta: T,
) -> Result<RecoveryWindow<T>> {
    if !(delta > T::zero() && delta < T::one()) {
        return Err(domain(format!("delta = {delta} must lie in (0, 1)")));
    }
    if k == 0 || n == 0 || !(m > T::zero()) {
        return Err(domain("n, k and m must be positive"));
    }
    let nf = T::from_count(n);
    let kf = T::from_count(k);
    let two = T::lit(2.0);
    let log_main = (T::lit(6.0) * nf * nf / delta).ln();
    let log_support = (T::lit(3.0) * kf * nf / delta).ln();
    let r = ((two / m) * log_main).sqrt();
    let k_const = constants.k_for(k);
    let lambda_lo = constants.nu + r;
    let lambda_hi = two * k_const + constants.nu - r;
    let positive_or_inf = |num: T, den: T| {
        if den > T::zero() {
            num / den
        } else {
            T::infinity()
        }
    };
    let m_branches = [
        if k_const > T::zero() {
            two / (k_const * k_const) * log_main
        } else {
            T::infinity()
        },
        positive_or_inf(two * kf * log_support, constants.c_min),
        positive_or_inf(T::lit(4.0) * kf * log_support, constants.dist.tp_min),
    ];
    let m_required = m_branches.iter().copied().fold(T::neg_infinity(), T::max);
    Ok(RecoveryWindow {
        lambda_lo,
        lambda_hi,
        m_branches,
        m_required,
        k_const,
        window_nonempty: lambda_lo <= lambda_hi,
        m_sufficient: m >= m_required,
    })
}

/// `nu + sqrt((2/m) log(2n/delta))`, the high-probability bound on `||grad l(v*)||_inf`.
pub fn gradient_bound<T: Scalar>(nu: T, m: T, n: usize, delta: T) -> T {
    nu + ((T::lit(2.0) / m) * (T::lit(2.0) * T::from_count(n) / delta).ln()).sqrt()
}

/// Lower bound on `P[lambda_min(H^m_SS) >= c_min / 2]`: `1 - |S| exp(-m c_min / (2|S|))`.
pub fn sample_hessian_probability<T: Scalar>(c_min: T, support_size: usize, m: T) -> T {
    let s = T::from_count(support_size);
    T::one() - s * (-m * c_min / (T::lit(2.0) * s)).exp()
}

/// Restricted ensemble of bipartite games with `k` influential players.
#[derive(Debug, Clone)]
pub struct FanoEnsemble<T> {
    pub n: usize,
    pub k: usize,
    /// Influential set of each member, ascending.
    pub influential: Vec<Vec<usize>>,
    pub members: Vec<Game<T>>,
}

/// Influential players push every other player with weight `-1` and carry bias
/// `+1`; the rest have bias 0. The unique equilibrium plays `-1` exactly on
/// the influential set.
pub fn fano_game<T: Scalar>(n: usize, influential: &[usize]) -> Result<Game<T>> {
    let mut is_inf = vec![false; n];
    for &j in influential {
        if j >= n || std::mem::replace(&mut is_inf[j], true) {
            return Err(arg("influential set must hold distinct players below n"));
        }
    }
    let mut w = vec![T::zero(); n * n];
    let mut b = vec![T::zero(); n];
    for i in 0..n {
        if is_inf[i] {
            b[i] = T::one();
        } else {
            for &j in influential {
                w[i * n + j] = -T::one();
            }
        }
    }
    Game::new(n, w, b)
}

/// The equilibrium a Fano ensemble member should have.
pub fn fano_equilibrium(n: usize, influential: &[usize]) -> JointAction {
    let mut bits = crate::game::full_mask(n);
    for &j in influential {
        bits &= !(1 << j);
    }
    JointAction::from_bits(bits)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, j| acc * (n - j) as u128 / (j + 1) as u128)
}

fn lexicographic_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(pos) = (0..k).rev().find(|&p| idx[p] != p + n - k) else {
            return out;
        };
        idx[pos] += 1;
        for q in pos + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// All `C(n, k)` members when that is at most `cap`, otherwise `cap` distinct
/// influential sets drawn uniformly. Equilibria are checked when `n <= 16`.
pub fn build_fano_ensemble<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    k: usize,
    cap: usize,
    rng: &mut R,
) -> Result<FanoEnsemble<T>> {
    if k < 1 || k >= n {
        return Err(arg(format!("need 1 <= k < n, got k = {k}, n = {n}")));
    }
    if cap == 0 {
        return Err(arg("ensemble cap must be positive"));
    }
    let total = binomial(n, k);
    let influential: Vec<Vec<usize>> = if total <= cap as u128 {
        lexicographic_subsets(n, k)
    } else {
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut order = Vec::with_capacity(cap);
        while order.len() < cap {
            let mut s = rand::seq::index::sample(rng, n, k).into_vec();
            s.sort_unstable();
            if seen.insert(s.clone()) {
                order.push(s);
            }
        }
        order
    };
    let members = influential
        .iter()
        .map(|s| fano_game(n, s))
        .collect::<Result<Vec<Game<T>>>>()?;
    if n <= THEORY_MAX_PLAYERS {
        let mut distinct = HashSet::with_capacity(members.len());
        for (g, s) in members.iter().zip(&influential) {
            let psne = enumerate_psne(g)?;
            let expect = fano_equilibrium(n, s);
            if psne.actions() != [expect] {
                return Err(Error::Consistency(format!(
                    "influential set {s:?} yields {} equilibria",
                    psne.len()
                )));
            }
            if min_payoff_over_psne(g, &psne)? != T::one() {
                return Err(Error::Consistency(format!(
                    "influential set {s:?}: minimum payoff is not 1"
                )));
            }
            if !distinct.insert(expect) {
                return Err(Error::Consistency(format!(
                    "influential set {s:?} repeats an equilibrium"
                )));
            }
        }
    }
    Ok(FanoEnsemble {
        n,
        k,
        influential,
        members,
    })
}

/// Per-sample KL divergence between the global-noise distributions (signal `q`)
/// of two distinct ensemble members:
/// `(2^n q - 1)/(2^n - 1) * (log q - log((1 - q)/(2^n - 1)))`.
pub fn fano_kl<T: Scalar>(n: usize, q: T) -> Result<T> {
    if n == 0 || n > FANO_KL_MAX_PLAYERS {
        return Err(domain(format!(
            "n = {n} outside [1, {FANO_KL_MAX_PLAYERS}]"
        )));
    }
    if !(q > T::zero() && q < T::one()) {
        return Err(domain(format!("q = {q} must lie in (0, 1)")));
    }
    let total = T::from_u64(action_count(n)).expect("representable");
    let others = total - T::one();
    Ok((total * q - T::one()) / others * (q.ln() - ((T::one() - q) / others).ln()))
}

/// `(k log n - k log k - 2 log 2) / (2 log 2)`: below this many samples every
/// decoder errs with probability at least 1/2 on the ensemble.
pub fn fano_sample_bound<T: Scalar>(n: usize, k: usize) -> Result<T> {
    if k < 1 || k >= n {
        return Err(domain(format!("need 1 <= k < n, got k = {k}, n = {n}")));
    }
    let nf = T::from_count(n);
    let kf = T::from_count(k);
    let ln2 = T::LN_2();
    Ok((kf * nf.ln() - kf * kf.ln() - T::lit(2.0) * ln2) / (T::lit(2.0) * ln2))
}
