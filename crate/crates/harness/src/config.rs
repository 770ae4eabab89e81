//! Experiment configuration and its `key = value` file format.
//!
//! ```text
//! # lines starting with '#' are comments
//! n = 10, 12
//! k = 1
//! noise = global
//! qg = 0.01
//! delta = 0.01
//! c_grid = -0.5, 0, 0.5
//! C = 1:10000, 3:1000
//! trials = 40
//! seed = 7
//! out = results/global
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lig_core::MAX_ENUM_PLAYERS;

use crate::error::{io_err, HarnessError, Result};

/// Observation model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Global,
    Local,
}

impl FromStr for NoiseKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "global" => Ok(NoiseKind::Global),
            "local" => Ok(NoiseKind::Local),
            other => Err(format!(
                "unknown noise model {other:?} (expected global or local)"
            )),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Global => "global",
            NoiseKind::Local => "local",
        })
    }
}

/// A fully specified noise model, minus the game.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    Global {
        q_g: f64,
    },
    /// One entry broadcasts to every player; otherwise one per player.
    Local {
        q: Vec<f64>,
    },
}

impl NoiseSpec {
    pub fn kind(&self) -> NoiseKind {
        match self {
            NoiseSpec::Global { .. } => NoiseKind::Global,
            NoiseSpec::Local { .. } => NoiseKind::Local,
        }
    }

    /// Per-player flip-free probabilities for an `n`-player game.
    pub fn local_q(&self, n: usize) -> Option<Vec<f64>> {
        match self {
            NoiseSpec::Local { q } if q.len() == 1 => Some(vec![q[0]; n]),
            NoiseSpec::Local { q } => Some(q.clone()),
            NoiseSpec::Global { .. } => None,
        }
    }

    /// The parameter column of the trial CSV: `q_g`, or the `q` entries joined by `;`.
    pub fn param_text(&self) -> String {
        match self {
            NoiseSpec::Global { q_g } => q_g.to_string(),
            NoiseSpec::Local { q } => q.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
        }
    }

    pub fn from_parts(kind: NoiseKind, param: &str) -> std::result::Result<Self, String> {
        let nums = param
            .split(';')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("bad noise parameter {s:?}: {e}"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        match kind {
            NoiseKind::Global if nums.len() == 1 => Ok(NoiseSpec::Global { q_g: nums[0] }),
            NoiseKind::Global => Err("global noise takes a single q_g".into()),
            NoiseKind::Local => Ok(NoiseSpec::Local { q: nums }),
        }
    }
}

pub const DEFAULT_MAX_REDRAWS: usize = 100;

/// Default control grid for global noise. At `q_g = 0.01`, `k = 1` the
/// recovery rate climbs from 0 to 1 between `c = 0.5` and `c = 1.5`.
pub const DEFAULT_GLOBAL_C_GRID: &[f64] =
    &[-0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];
/// Default control grid for local noise; at `q = 0.6`, `k = 1` the jump sits
/// between `c = -0.5` and `c = 0`.
pub const DEFAULT_LOCAL_C_GRID: &[f64] = &[-1.5, -1.25, -1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_list: Vec<usize>,
    pub k_list: Vec<usize>,
    pub noise: NoiseKind,
    pub q_g: f64,
    /// Local-model keep probabilities (length 1 broadcasts).
    pub q: Vec<f64>,
    pub delta: f64,
    pub lambda_multiplier: f64,
    pub c_grid: Vec<f64>,
    /// Overrides of the base constant `C` per in-degree.
    pub c_of_k: BTreeMap<usize, f64>,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub penalize_bias: bool,
    pub max_redraws: usize,
    /// Add a `wall_ms` column to the trial CSV (breaks byte-identical reruns).
    pub wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_list: vec![10],
            k_list: vec![1],
            noise: NoiseKind::Global,
            q_g: 0.01,
            q: vec![0.6],
            delta: 0.01,
            lambda_multiplier: 1.0,
            c_grid: DEFAULT_GLOBAL_C_GRID.to_vec(),
            c_of_k: BTreeMap::new(),
            trials: 40,
            seed: 7,
            out: PathBuf::from("results"),
            penalize_bias: true,
            max_redraws: DEFAULT_MAX_REDRAWS,
            wall_time: false,
        }
    }
}

impl ExperimentConfig {
    pub fn noise_spec(&self) -> NoiseSpec {
        match self.noise {
            NoiseKind::Global => NoiseSpec::Global { q_g: self.q_g },
            NoiseKind::Local => NoiseSpec::Local { q: self.q.clone() },
        }
    }

    /// `C` for in-degree `k`: an override if present, else 10000 for `k = 1` and 1000 otherwise.
    pub fn base_constant(&self, k: usize) -> f64 {
        self.c_of_k
            .get(&k)
            .copied()
            .unwrap_or(if k == 1 { 10_000.0 } else { 1_000.0 })
    }

    pub fn sample_count(&self, n: usize, k: usize, c: f64) -> u64 {
        sample_count(self.base_constant(k), c, n, k, self.delta)
    }

    /// `(n, k, c)` cells in output order.
    pub fn cells(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for &n in &self.n_list {
            for &k in &self.k_list {
                for &c in &self.c_grid {
                    out.push((n, k, c));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Invalid(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.c_grid.is_empty() || self.n_list.is_empty() || self.k_list.is_empty() {
            return bad("n, k and c_grid must be nonempty".into());
        }
        if let Some(c) = self.c_grid.iter().find(|c| !c.is_finite()) {
            return bad(format!("c = {c} is not finite"));
        }
        for &n in &self.n_list {
            if !(2..=MAX_ENUM_PLAYERS).contains(&n) {
                return bad(format!("n = {n} outside 2..={MAX_ENUM_PLAYERS}"));
            }
            for &k in &self.k_list {
                if k == 0 || k >= n {
                    return bad(format!("k = {k} must satisfy 1 <= k < n = {n}"));
                }
            }
            if self.noise == NoiseKind::Local && self.q.len() != 1 && self.q.len() != n {
                return bad(format!("q has {} entries; need 1 or n = {n}", self.q.len()));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} must lie in (0, 1)", self.delta));
        }
        if !(self.lambda_multiplier > 0.0 && self.lambda_multiplier.is_finite()) {
            return bad(format!(
                "lambda_multiplier = {} must be positive",
                self.lambda_multiplier
            ));
        }
        match self.noise {
            NoiseKind::Global if !(self.q_g > 0.0 && self.q_g <= 1.0) => {
                return bad(format!("q_g = {} must lie in (0, 1]", self.q_g));
            }
            NoiseKind::Local => {
                if let Some(q) = self.q.iter().find(|&&q| !(q > 0.5 && q <= 1.0)) {
                    return bad(format!("q = {q} must lie in (0.5, 1]"));
                }
            }
            _ => {}
        }
        if let Some((k, c)) = self
            .c_of_k
            .iter()
            .find(|(_, &c)| !(c > 0.0 && c.is_finite()))
        {
            return bad(format!("C for k = {k} must be positive, got {c}"));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse(&text)
    }

    /// Parses `key = value` lines on top of the defaults. The noise model's
    /// default grid is used when `c_grid` is absent.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| HarnessError::Config {
                line,
                msg: format!("expected key = value, got {body:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let key = if key == "q_g" { "qg" } else { key };
            if !seen.insert(key.to_string()) {
                return Err(HarnessError::Config {
                    line,
                    msg: format!("duplicate key {key:?}"),
                });
            }
            cfg.set(key, value)
                .map_err(|msg| HarnessError::Config { line, msg })?;
        }
        if !seen.contains("c_grid") && cfg.noise == NoiseKind::Local {
            cfg.c_grid = DEFAULT_LOCAL_C_GRID.to_vec();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "n" => self.n_list = parse_list(value)?,
            "k" => self.k_list = parse_list(value)?,
            "noise" => self.noise = value.parse()?,
            "qg" => self.q_g = parse_one(value)?,
            "q" => self.q = parse_list(value)?,
            "delta" => self.delta = parse_one(value)?,
            "lambda_multiplier" => self.lambda_multiplier = parse_one(value)?,
            "c_grid" => self.c_grid = parse_list(value)?,
            "C" => self.c_of_k = parse_c_map(value)?,
            "trials" => self.trials = parse_one(value)?,
            "seed" => self.seed = parse_one(value)?,
            "out" => self.out = PathBuf::from(value),
            "penalize_bias" => self.penalize_bias = parse_one(value)?,
            "max_redraws" => self.max_redraws = parse_one(value)?,
            "wall_time" => self.wall_time = parse_one(value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }
}

/// `floor(C * 10^c * k^2 * ln(6 n^2 / delta))`, at least 1.
pub fn sample_count(base: f64, c: f64, n: usize, k: usize, delta: f64) -> u64 {
    let n = n as f64;
    let k = k as f64;
    let m = (base * 10f64.powf(c) * k * k * (6.0 * n * n / delta).ln()).floor();
    if m < 1.0 {
        1
    } else {
        m as u64
    }
}

fn parse_one<T: FromStr>(s: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    s.trim()
        .parse()
        .map_err(|e| format!("cannot parse {s:?}: {e}"))
}

/// Comma or whitespace separated values.
pub fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    let items: Vec<&str> = s
        .split(|ch: char| ch == ',' || ch.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect();
    if items.is_empty() {
        return Err("empty list".into());
    }
    items.into_iter().map(parse_one).collect()
}

/// `k:C` pairs, e.g. `1:10000, 3:1000`.
pub fn parse_c_map(s: &str) -> std::result::Result<BTreeMap<usize, f64>, String> {
    let mut map = BTreeMap::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (k, c) = item
            .split_once(':')
            .ok_or_else(|| format!("expected k:C, got {item:?}"))?;
        map.insert(parse_one(k)?, parse_one(c)?);
    }
    if map.is_empty() {
        return Err("empty C map".into());
    }
    Ok(map)
}
