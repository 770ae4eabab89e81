//! Linear influence games over binary actions and their pure-strategy Nash
//! equilibria.
//!
//! Player `i`'s payoff at joint action `x` is `x_i * (sum_{j != i} W[i][j] x_j - b_i)`.
//! A joint action is an equilibrium when every player's payoff is `>= 0`.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{arg, domain, Error, Result};
use crate::scalar::Scalar;

/// Largest `n` for which [`enumerate_psne`] sweeps all `2^n` joint actions.
pub const MAX_ENUM_PLAYERS: usize = 24;

/// Largest `n` representable by [`JointAction`].
pub const MAX_PLAYERS: usize = 32;

/// One element of `{-1,+1}^n`, bit `i` set iff `x_i = +1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct JointAction(u32);

impl JointAction {
    pub fn new(bits: u32, n: usize) -> Result<Self> {
        check_players(n)?;
        if n < 32 && bits >> n != 0 {
            return Err(arg(format!("bits {bits:#x} do not fit in {n} players")));
        }
        Ok(JointAction(bits))
    }

    /// Wraps raw bits without checking them against a player count.
    #[inline]
    pub const fn from_bits(bits: u32) -> Self {
        JointAction(bits)
    }

    #[inline]
    pub const fn bits(self) -> u32 {
        self.0
    }

    /// `+1` or `-1` for player `i`.
    #[inline]
    pub fn sign(self, i: usize) -> i8 {
        if (self.0 >> i) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn value<T: Scalar>(self, i: usize) -> T {
        if (self.0 >> i) & 1 == 1 {
            T::one()
        } else {
            -T::one()
        }
    }

    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        check_players(signs.len())?;
        let mut bits = 0u32;
        for (i, &s) in signs.iter().enumerate() {
            match s {
                1 => bits |= 1 << i,
                -1 => {}
                other => return Err(arg(format!("action {other} for player {i} is not +-1"))),
            }
        }
        Ok(JointAction(bits))
    }

    pub fn to_signs(self, n: usize) -> Vec<i8> {
        (0..n).map(|i| self.sign(i)).collect()
    }

    /// `-x`.
    #[inline]
    pub fn negated(self, n: usize) -> Self {
        JointAction(!self.0 & full_mask(n))
    }

    /// Relabels players: player `i` of `self` becomes player `perm[i]`.
    pub fn permuted(self, perm: &[usize]) -> Self {
        let mut bits = 0u32;
        for (i, &p) in perm.iter().enumerate() {
            if (self.0 >> i) & 1 == 1 {
                bits |= 1 << p;
            }
        }
        JointAction(bits)
    }

    /// Every joint action for `n` players in ascending bit order.
    pub fn all(n: usize) -> impl Iterator<Item = JointAction> {
        (0..action_count(n)).map(|b| JointAction(b as u32))
    }
}

#[inline]
pub(crate) fn full_mask(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

/// `2^n` as a `u64`.
#[inline]
pub fn action_count(n: usize) -> u64 {
    1u64 << n
}

fn check_players(n: usize) -> Result<()> {
    if n == 0 {
        return Err(arg("a game needs at least one player"));
    }
    if n > MAX_PLAYERS {
        return Err(Error::Capacity {
            what: "joint action encoding",
            limit: MAX_PLAYERS,
            n,
        });
    }
    Ok(())
}

/// A linear influence game `(W, b)` with `diag(W) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Game<T> {
    n: usize,
    /// Row-major `n x n`.
    w: Vec<T>,
    b: Vec<T>,
}

impl<T: Scalar> Game<T> {
    /// Builds a game from a row-major weight matrix and a bias vector.
    pub fn new(n: usize, w: Vec<T>, b: Vec<T>) -> Result<Self> {
        check_players(n)?;
        if w.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                actual: w.len(),
            });
        }
        if b.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: b.len(),
            });
        }
        for i in 0..n {
            if w[i * n + i] != T::zero() {
                return Err(arg(format!("W[{i}][{i}] must be zero")));
            }
        }
        if let Some(pos) = w.iter().chain(b.iter()).position(|v| !v.is_finite()) {
            return Err(arg(format!("non-finite parameter at flat index {pos}")));
        }
        Ok(Game { n, w, b })
    }

    pub fn from_rows(rows: &[Vec<T>], b: Vec<T>) -> Result<Self> {
        let n = rows.len();
        let mut w = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    actual: row.len(),
                });
            }
            w.extend_from_slice(row);
        }
        Self::new(n, w, b)
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(n, vec![T::zero(); n * n], vec![T::zero(); n])
    }

    /// Assembles a game from per-player parameter vectors `v_i = (w_{i,-i}, -b_i)`.
    pub fn from_player_params(params: &[Vec<T>]) -> Result<Self> {
        let n = params.len();
        check_players(n)?;
        let mut w = vec![T::zero(); n * n];
        let mut b = vec![T::zero(); n];
        for (i, v) in params.iter().enumerate() {
            if v.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    actual: v.len(),
                });
            }
            for (slot, j) in (0..n).filter(|&j| j != i).enumerate() {
                w[i * n + j] = v[slot];
            }
            b[i] = -v[n - 1];
        }
        Self::new(n, w, b)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> T {
        self.w[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    pub fn weights(&self) -> &[T] {
        &self.w
    }

    pub fn bias(&self) -> &[T] {
        &self.b
    }

    /// `v_i = (w_{i,-i}, -b_i)`, the parameter vector logistic regression estimates.
    pub fn player_params(&self, i: usize) -> Vec<T> {
        let mut v: Vec<T> = (0..self.n)
            .filter(|&j| j != i)
            .map(|j| self.weight(i, j))
            .collect();
        v.push(-self.b[i]);
        v
    }

    /// Largest number of nonzero off-diagonal weights in any row.
    pub fn max_in_degree(&self) -> usize {
        (0..self.n)
            .map(|i| self.row(i).iter().filter(|w| **w != T::zero()).count())
            .max()
            .unwrap_or(0)
    }

    pub fn scaled(&self, c: T) -> Result<Self> {
        Self::new(
            self.n,
            self.w.iter().map(|&v| v * c).collect(),
            self.b.iter().map(|&v| v * c).collect(),
        )
    }

    /// Relabels players so that player `i` becomes player `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let n = self.n;
        let mut w = vec![T::zero(); n * n];
        let mut b = vec![T::zero(); n];
        for i in 0..n {
            b[perm[i]] = self.b[i];
            for j in 0..n {
                w[perm[i] * n + perm[j]] = self.weight(i, j);
            }
        }
        Self::new(n, w, b)
    }

    /// Payoff without bounds checks; summation runs over ascending `j`.
    #[inline]
    pub(crate) fn payoff_raw(&self, i: usize, x: JointAction) -> T {
        let row = self.row(i);
        let mut s = T::zero();
        for (j, &wij) in row.iter().enumerate() {
            if j != i {
                s = s + wij * x.value::<T>(j);
            }
        }
        x.value::<T>(i) * (s - self.b[i])
    }

    /// `true` iff every player's payoff at `x` is `>= 0`.
    #[inline]
    pub fn is_equilibrium(&self, x: JointAction) -> bool {
        (0..self.n).all(|i| self.payoff_raw(i, x) >= T::zero())
    }

    /// Serializes to the plain text game format: `n k`, then `n` weight rows,
    /// then one bias row. Values use shortest round-trip decimal notation.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n, self.max_in_degree());
        for i in 0..self.n {
            write_row(&mut out, self.row(i));
        }
        write_row(&mut out, &self.b);
        out
    }

    /// Parses the format written by [`Game::to_text`]. Blank lines are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(no, l)| (no + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(Error::Parse {
                line: hline,
                msg: "header must be `n k`".into(),
            });
        }
        let n: usize = parse_tok(head[0], hline)?;
        let k: usize = parse_tok(head[1], hline)?;
        let mut w = Vec::with_capacity(n * n);
        for _ in 0..n {
            let (no, line) = lines.next().ok_or(Error::Parse {
                line: hline,
                msg: format!("expected {n} weight rows"),
            })?;
            w.extend(parse_row::<T>(line, n, no)?);
        }
        let (no, line) = lines.next().ok_or(Error::Parse {
            line: hline,
            msg: "missing bias row".into(),
        })?;
        let b = parse_row::<T>(line, n, no)?;
        if let Some((no, _)) = lines.next() {
            return Err(Error::Parse {
                line: no,
                msg: "trailing content after bias row".into(),
            });
        }
        let game = Self::new(n, w, b)?;
        if game.max_in_degree() > k {
            return Err(Error::Parse {
                line: hline,
                msg: format!(
                    "header declares in-degree {k}, rows have {}",
                    game.max_in_degree()
                ),
            });
        }
        Ok(game)
    }
}

fn write_row<T: Scalar>(out: &mut String, row: &[T]) {
    for (j, v) in row.iter().enumerate() {
        if j > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

fn parse_tok<V: std::str::FromStr>(tok: &str, line: usize) -> Result<V> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse `{tok}`"),
    })
}

fn parse_row<T: Scalar>(line: &str, n: usize, no: usize) -> Result<Vec<T>> {
    let row: Vec<T> = line
        .split_whitespace()
        .map(|t| parse_tok(t, no))
        .collect::<Result<_>>()?;
    if row.len() != n {
        return Err(Error::Parse {
            line: no,
            msg: format!("expected {n} values, found {}", row.len()),
        });
    }
    Ok(row)
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(arg("permutation length differs from player count"));
    }
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(arg("not a permutation"));
        }
    }
    Ok(())
}

/// The exact equilibrium set of a game, sorted by bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PsneSet {
    n: usize,
    actions: Vec<JointAction>,
}

impl PsneSet {
    /// Sorts and deduplicates `actions`. Membership in any particular game is
    /// not checked.
    pub fn new(n: usize, mut actions: Vec<JointAction>) -> Result<Self> {
        check_players(n)?;
        let mask = full_mask(n);
        if actions.iter().any(|a| a.bits() & !mask != 0) {
            return Err(arg(format!("joint action out of range for {n} players")));
        }
        actions.sort_unstable();
        actions.dedup();
        Ok(PsneSet { n, actions })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[JointAction] {
        &self.actions
    }

    pub fn iter(&self) -> impl Iterator<Item = JointAction> + '_ {
        self.actions.iter().copied()
    }

    #[inline]
    pub fn contains(&self, x: JointAction) -> bool {
        self.actions.binary_search(&x).is_ok()
    }

    /// `true` when every joint action is an equilibrium.
    pub fn is_everything(&self) -> bool {
        self.actions.len() as u64 == action_count(self.n)
    }
}

/// `z_i(x) = (x_i x_{-i}, x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T>(pub Vec<T>);

impl<T> FeatureVector<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

/// `x_i (sum_{j != i} W[i][j] x_j - b_i)`, summed in ascending `j`.
pub fn payoff<T: Scalar>(game: &Game<T>, i: usize, x: JointAction) -> Result<T> {
    if i >= game.n {
        return Err(arg(format!(
            "player {i} out of range for {} players",
            game.n
        )));
    }
    Ok(game.payoff_raw(i, x))
}

/// All joint actions where every payoff is `>= 0`, in ascending bit order.
pub fn enumerate_psne<T: Scalar>(game: &Game<T>) -> Result<PsneSet> {
    let n = game.n;
    if n > MAX_ENUM_PLAYERS {
        return Err(Error::Capacity {
            what: "PSNE enumeration",
            limit: MAX_ENUM_PLAYERS,
            n,
        });
    }
    let actions = JointAction::all(n)
        .filter(|&x| game.is_equilibrium(x))
        .collect();
    Ok(PsneSet { n, actions })
}

/// Smallest payoff over all equilibria and players (`rho_min`).
pub fn min_payoff_over_psne<T: Scalar>(game: &Game<T>, psne: &PsneSet) -> Result<T> {
    if psne.is_empty() {
        return Err(domain("minimum payoff of an empty PSNE set"));
    }
    if psne.n() != game.n {
        return Err(Error::Dimension {
            expected: game.n,
            actual: psne.n(),
        });
    }
    let mut best = T::infinity();
    for x in psne.iter() {
        for i in 0..game.n {
            best = best.min(game.payoff_raw(i, x));
        }
    }
    Ok(best)
}

/// Random sparse game: each row gets exactly `k` off-diagonal `-1` entries at
/// uniformly chosen positions, all biases zero.
pub fn generate_game<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<Game<T>> {
    check_players(n)?;
    if k < 1 || k + 1 > n {
        return Err(arg(format!(
            "in-degree k = {k} must lie in [1, {}]",
            n.saturating_sub(1)
        )));
    }
    let mut w = vec![T::zero(); n * n];
    let mut others: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        others.clear();
        others.extend((0..n).filter(|&j| j != i));
        // partial Fisher-Yates: the first k slots end up a uniform k-subset
        for t in 0..k {
            let r = rng.gen_range(t..others.len());
            others.swap(t, r);
            w[i * n + others[t]] = -T::one();
        }
    }
    Game::new(n, w, vec![T::zero(); n])
}

/// `true` iff both games induce the same PSNE set.
pub fn games_equivalent<T: Scalar>(g1: &Game<T>, g2: &Game<T>) -> Result<bool> {
    if g1.n != g2.n {
        return Err(arg(format!("player counts differ: {} vs {}", g1.n, g2.n)));
    }
    Ok(enumerate_psne(g1)? == enumerate_psne(g2)?)
}

/// Feature vector of player `i` at `x`: `x_i x_j` for `j != i` ascending, then `x_i`.
pub fn feature_vector<T: Scalar>(x: JointAction, i: usize, n: usize) -> Result<FeatureVector<T>> {
    check_players(n)?;
    if i >= n {
        return Err(arg(format!("player {i} out of range for {n} players")));
    }
    let mut z = Vec::with_capacity(n);
    fill_features(x, i, n, &mut z);
    Ok(FeatureVector(z))
}

#[inline]
pub(crate) fn fill_features<T: Scalar>(x: JointAction, i: usize, n: usize, out: &mut Vec<T>) {
    let xi = x.value::<T>(i);
    out.extend((0..n).filter(|&j| j != i).map(|j| xi * x.value::<T>(j)));
    out.push(xi);
}
