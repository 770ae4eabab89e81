//! Observation models over joint actions.
//!
//! The global model puts mass `q_g` uniformly on the equilibria and `1 - q_g`
//! uniformly on everything else. The local model picks an equilibrium uniformly
//! and flips each player's action independently with probability `1 - q_i`.

use rand::Rng;

use crate::data::{ActionCounts, CountAccumulator};
use crate::error::{arg, domain, Error, Result};
use crate::game::{action_count, JointAction, PsneSet, MAX_ENUM_PLAYERS};
use crate::scalar::Scalar;

/// A discrete distribution over `{-1,+1}^n` tied to an equilibrium set.
pub trait JointDistribution<T: Scalar> {
    fn n(&self) -> usize;

    fn psne(&self) -> &PsneSet;

    fn pmf(&self, x: JointAction) -> T;

    fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> JointAction;

    fn constants(&self) -> Result<DistributionConstants<T>>;

    /// `m` i.i.d. draws.
    fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<Vec<JointAction>> {
        if m == 0 {
            return Err(arg("sample size must be at least 1"));
        }
        Ok((0..m).map(|_| self.sample_one(rng)).collect())
    }

    /// Same draws as [`JointDistribution::sample`] with the same RNG state,
    /// aggregated into counts.
    fn sample_counts<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<ActionCounts> {
        if m == 0 {
            return Err(arg("sample size must be at least 1"));
        }
        let mut acc = CountAccumulator::new(self.n())?;
        for _ in 0..m {
            acc.push(self.sample_one(rng));
        }
        Ok(acc.finish())
    }
}

/// Membership bitset over all `2^n` joint actions.
#[derive(Debug, Clone)]
struct Membership(Vec<u64>);

impl Membership {
    fn new(psne: &PsneSet) -> Self {
        let words = action_count(psne.n()).div_ceil(64) as usize;
        let mut bits = vec![0u64; words];
        for x in psne.iter() {
            let b = x.bits() as usize;
            bits[b / 64] |= 1 << (b % 64);
        }
        Membership(bits)
    }

    #[inline]
    fn contains(&self, x: JointAction) -> bool {
        let b = x.bits() as usize;
        (self.0[b / 64] >> (b % 64)) & 1 == 1
    }
}

fn check_enumerable(n: usize, what: &'static str) -> Result<()> {
    if n > MAX_ENUM_PLAYERS {
        return Err(Error::Capacity {
            what,
            limit: MAX_ENUM_PLAYERS,
            n,
        });
    }
    Ok(())
}

#[inline]
fn draw_equilibrium<R: Rng + ?Sized>(psne: &PsneSet, rng: &mut R) -> JointAction {
    psne.actions()[rng.gen_range(0..psne.len())]
}

/// Global observation model.
#[derive(Debug, Clone)]
pub struct GlobalNoiseModel<T> {
    psne: PsneSet,
    q_g: T,
    ne_mass: T,
    other_mass: T,
    member: Membership,
}

impl<T: Scalar> GlobalNoiseModel<T> {
    /// `q_g` must lie in `(|NE|/2^n, 1]`; `psne` must be nonempty and not all of X.
    pub fn new(psne: PsneSet, q_g: T) -> Result<Self> {
        let n = psne.n();
        check_enumerable(n, "global noise model")?;
        if psne.is_empty() {
            return Err(domain("global noise model needs a nonempty PSNE set"));
        }
        if psne.is_everything() {
            return Err(domain(
                "global noise model needs a PSNE set smaller than the action space",
            ));
        }
        let size = T::from_count(psne.len());
        let total = T::from_u64(action_count(n)).expect("2^n representable");
        let lo = size / total;
        if !(q_g > lo && q_g <= T::one()) {
            return Err(arg(format!(
                "q_g = {q_g} outside the admissible interval ({lo}, 1] for |NE| = {} and n = {n}",
                psne.len()
            )));
        }
        let ne_mass = q_g / size;
        let other_mass = (T::one() - q_g) / (total - size);
        let member = Membership::new(&psne);
        Ok(GlobalNoiseModel {
            psne,
            q_g,
            ne_mass,
            other_mass,
            member,
        })
    }

    pub fn q_g(&self) -> T {
        self.q_g
    }
}

impl<T: Scalar> JointDistribution<T> for GlobalNoiseModel<T> {
    fn n(&self) -> usize {
        self.psne.n()
    }

    fn psne(&self) -> &PsneSet {
        &self.psne
    }

    #[inline]
    fn pmf(&self, x: JointAction) -> T {
        if self.member.contains(x) {
            self.ne_mass
        } else {
            self.other_mass
        }
    }

    fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> JointAction {
        let u: f64 = rng.gen();
        if u < self.q_g.as_f64() {
            return draw_equilibrium(&self.psne, rng);
        }
        let mask = crate::game::full_mask(self.n());
        loop {
            let x = JointAction::from_bits(rng.gen::<u32>() & mask);
            if !self.member.contains(x) {
                return x;
            }
        }
    }

    fn constants(&self) -> Result<DistributionConstants<T>> {
        global_constants(self.q_g, self.psne.len(), self.n())
    }
}

/// Closed-form constants of a global model, valid at the boundary
/// `q_g = |NE|/2^n` too (where Assumption-1 style separation fails).
pub fn global_constants<T: Scalar>(
    q_g: T,
    ne_count: usize,
    n: usize,
) -> Result<DistributionConstants<T>> {
    if ne_count == 0 || ne_count as u64 >= action_count(n) {
        return Err(domain("equilibrium count must lie in [1, 2^n - 1]"));
    }
    let size = T::from_count(ne_count);
    let per_ne = q_g / size;
    let tp = T::one() - q_g;
    Ok(DistributionConstants::from_masses(
        n, ne_count, tp, tp, per_ne, per_ne, q_g,
    ))
}

/// Local observation model.
#[derive(Debug, Clone)]
pub struct LocalNoiseModel<T> {
    psne: PsneSet,
    q: Vec<T>,
    ln_q: Vec<T>,
    ln_flip: Vec<T>,
    q_f64: Vec<f64>,
}

impl<T: Scalar> LocalNoiseModel<T> {
    /// Every `q_i` must lie in `(0.5, 1]`.
    pub fn new(psne: PsneSet, q: Vec<T>) -> Result<Self> {
        let n = psne.n();
        if psne.is_empty() {
            return Err(domain("local noise model needs a nonempty PSNE set"));
        }
        if q.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: q.len(),
            });
        }
        let half = T::lit(0.5);
        if let Some(i) = q.iter().position(|&qi| !(qi > half && qi <= T::one())) {
            return Err(arg(format!("q[{i}] = {} outside (0.5, 1]", q[i])));
        }
        let ln_q = q.iter().map(|&v| v.ln()).collect();
        let ln_flip = q.iter().map(|&v| (T::one() - v).ln()).collect();
        let q_f64 = q.iter().map(|&v| v.as_f64()).collect();
        Ok(LocalNoiseModel {
            psne,
            q,
            ln_q,
            ln_flip,
            q_f64,
        })
    }

    pub fn uniform(psne: PsneSet, q: T) -> Result<Self> {
        let n = psne.n();
        Self::new(psne, vec![q; n])
    }

    pub fn q(&self) -> &[T] {
        &self.q
    }

    #[inline]
    fn log_term(&self, x: JointAction, y: JointAction) -> T {
        let agree = !(x.bits() ^ y.bits());
        let mut s = T::zero();
        for i in 0..self.q.len() {
            s = s + if (agree >> i) & 1 == 1 {
                self.ln_q[i]
            } else {
                self.ln_flip[i]
            };
        }
        s
    }
}

impl<T: Scalar> JointDistribution<T> for LocalNoiseModel<T> {
    fn n(&self) -> usize {
        self.psne.n()
    }

    fn psne(&self) -> &PsneSet {
        &self.psne
    }

    /// Mixture of Bernoulli products, combined with log-sum-exp.
    fn pmf(&self, x: JointAction) -> T {
        let mut max = T::neg_infinity();
        let terms: Vec<T> = self
            .psne
            .iter()
            .map(|y| {
                let t = self.log_term(x, y);
                max = max.max(t);
                t
            })
            .collect();
        if max == T::neg_infinity() {
            return T::zero();
        }
        let s: T = terms.iter().map(|&t| (t - max).exp()).sum();
        (max + s.ln() - T::from_count(self.psne.len()).ln()).exp()
    }

    fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> JointAction {
        let y = draw_equilibrium(&self.psne, rng);
        let mut bits = y.bits();
        for (i, &qi) in self.q_f64.iter().enumerate() {
            let u: f64 = rng.gen();
            if u >= qi {
                bits ^= 1 << i;
            }
        }
        JointAction::from_bits(bits)
    }

    fn constants(&self) -> Result<DistributionConstants<T>> {
        scan_constants(self)
    }
}

/// Either observation model, for callers that pick one at runtime.
#[derive(Debug, Clone)]
pub enum NoiseModel<T> {
    Global(GlobalNoiseModel<T>),
    Local(LocalNoiseModel<T>),
}

impl<T: Scalar> NoiseModel<T> {
    pub fn label(&self) -> &'static str {
        match self {
            NoiseModel::Global(_) => "global",
            NoiseModel::Local(_) => "local",
        }
    }
}

impl<T: Scalar> JointDistribution<T> for NoiseModel<T> {
    fn n(&self) -> usize {
        match self {
            NoiseModel::Global(m) => m.n(),
            NoiseModel::Local(m) => m.n(),
        }
    }

    fn psne(&self) -> &PsneSet {
        match self {
            NoiseModel::Global(m) => m.psne(),
            NoiseModel::Local(m) => m.psne(),
        }
    }

    fn pmf(&self, x: JointAction) -> T {
        match self {
            NoiseModel::Global(m) => m.pmf(x),
            NoiseModel::Local(m) => m.pmf(x),
        }
    }

    fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> JointAction {
        match self {
            NoiseModel::Global(m) => m.sample_one(rng),
            NoiseModel::Local(m) => m.sample_one(rng),
        }
    }

    fn constants(&self) -> Result<DistributionConstants<T>> {
        match self {
            NoiseModel::Global(m) => m.constants(),
            NoiseModel::Local(m) => m.constants(),
        }
    }
}

/// Constants describing how a distribution separates equilibria from the rest.
///
/// `tp_min`/`tp_max` are the smallest/largest non-equilibrium mass scaled by
/// `2^n - |NE|`; `p_max` is the largest equilibrium mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionConstants<T> {
    pub tp_min: T,
    pub tp_max: T,
    pub p_max: T,
    /// Smallest equilibrium mass.
    pub p_ne_min: T,
    /// Total mass on the equilibrium set.
    pub ne_mass: T,
    /// `|NE| / 2^(n-1)`.
    pub f_ne: T,
    pub assumption1_holds: bool,
}

impl<T: Scalar> DistributionConstants<T> {
    pub fn from_masses(
        n: usize,
        ne_count: usize,
        tp_min: T,
        tp_max: T,
        p_ne_min: T,
        p_max: T,
        ne_mass: T,
    ) -> Self {
        let others = T::from_u64(action_count(n) - ne_count as u64).expect("representable");
        let f_ne =
            T::from_count(ne_count) / T::from_u64(action_count(n - 1)).expect("representable");
        let upper_noise = tp_max / others;
        let assumption1_holds = tp_min > T::zero() && upper_noise < p_ne_min && p_max <= T::one();
        DistributionConstants {
            tp_min,
            tp_max,
            p_max,
            p_ne_min,
            ne_mass,
            f_ne,
            assumption1_holds,
        }
    }
}

/// Computes [`DistributionConstants`] by visiting every joint action.
pub fn scan_constants<T: Scalar, D: JointDistribution<T> + ?Sized>(
    dist: &D,
) -> Result<DistributionConstants<T>> {
    let n = dist.n();
    check_enumerable(n, "distribution constant scan")?;
    let psne = dist.psne();
    if psne.is_empty() || psne.is_everything() {
        return Err(domain("equilibrium count must lie in [1, 2^n - 1]"));
    }
    let mut other_min = T::infinity();
    let mut other_max = T::neg_infinity();
    let mut ne_min = T::infinity();
    let mut ne_max = T::neg_infinity();
    let mut ne_mass = T::zero();
    for x in JointAction::all(n) {
        let p = dist.pmf(x);
        if psne.contains(x) {
            ne_min = ne_min.min(p);
            ne_max = ne_max.max(p);
            ne_mass = ne_mass + p;
        } else {
            other_min = other_min.min(p);
            other_max = other_max.max(p);
        }
    }
    let others = T::from_u64(action_count(n) - psne.len() as u64).expect("representable");
    Ok(DistributionConstants::from_masses(
        n,
        psne.len(),
        others * other_min,
        others * other_max,
        ne_min,
        ne_max,
        ne_mass,
    ))
}
