//! Observed joint actions: raw datasets with their text format, and the
//! aggregated count form the estimator consumes.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{arg, Error, Result};
use crate::game::{full_mask, JointAction, MAX_PLAYERS};

/// Aggregation switches from a dense table to a hash map above this many players.
const DENSE_COUNT_LIMIT: usize = 20;

/// A sequence of observed joint actions with provenance metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub n: usize,
    /// Free-form generator label written to the header (no whitespace).
    pub model: String,
    pub seed: u64,
    pub actions: Vec<JointAction>,
}

impl Dataset {
    pub fn new(
        n: usize,
        model: impl Into<String>,
        seed: u64,
        actions: Vec<JointAction>,
    ) -> Result<Self> {
        let model = model.into();
        if n == 0 || n > MAX_PLAYERS {
            return Err(arg(format!("player count {n} outside [1, {MAX_PLAYERS}]")));
        }
        if model.is_empty() || model.chars().any(char::is_whitespace) {
            return Err(arg("model label must be a non-empty token"));
        }
        let mask = full_mask(n);
        if actions.iter().any(|a| a.bits() & !mask != 0) {
            return Err(arg("joint action out of range"));
        }
        Ok(Dataset {
            n,
            model,
            seed,
            actions,
        })
    }

    /// Header `n m model seed`, then one line of `n` values in `{1,-1}` per sample.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.actions.len() * self.n * 3 + 32);
        let _ = writeln!(
            out,
            "{} {} {} {}",
            self.n,
            self.actions.len(),
            self.model,
            self.seed
        );
        for x in &self.actions {
            for i in 0..self.n {
                if i > 0 {
                    out.push(' ');
                }
                out.push_str(if x.sign(i) > 0 { "1" } else { "-1" });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hno, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 4 {
            return Err(Error::Parse {
                line: hno,
                msg: "header must be `n m model seed`".into(),
            });
        }
        let bad = |msg: &str| Error::Parse {
            line: hno,
            msg: msg.to_string(),
        };
        let n: usize = head[0].parse().map_err(|_| bad("bad n"))?;
        let m: usize = head[1].parse().map_err(|_| bad("bad m"))?;
        let seed: u64 = head[3].parse().map_err(|_| bad("bad seed"))?;
        let mut actions = Vec::with_capacity(m);
        for (no, line) in lines {
            let mut signs = Vec::with_capacity(n);
            for tok in line.split_whitespace() {
                signs.push(match tok {
                    "1" | "+1" => 1i8,
                    "-1" => -1,
                    other => {
                        return Err(Error::Parse {
                            line: no,
                            msg: format!("`{other}` is not +-1"),
                        })
                    }
                });
            }
            if signs.len() != n {
                return Err(Error::Parse {
                    line: no,
                    msg: format!("expected {n} values, found {}", signs.len()),
                });
            }
            actions.push(JointAction::from_signs(&signs)?);
        }
        if actions.len() != m {
            return Err(bad(&format!(
                "header declares {m} samples, found {}",
                actions.len()
            )));
        }
        Dataset::new(n, head[2], seed, actions)
    }
}

/// Multiplicity of each distinct observed joint action, ascending by bits.
///
/// Features are a deterministic function of the joint action, so the empirical
/// loss only depends on these counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionCounts {
    n: usize,
    entries: Vec<(JointAction, u64)>,
    total: u64,
}

impl ActionCounts {
    pub fn from_actions(n: usize, actions: &[JointAction]) -> Result<Self> {
        let mut acc = CountAccumulator::new(n)?;
        for &x in actions {
            acc.push(x);
        }
        Ok(acc.finish())
    }

    /// Builds counts directly; zero-count entries are dropped and duplicates merged.
    pub fn from_entries(
        n: usize,
        entries: impl IntoIterator<Item = (JointAction, u64)>,
    ) -> Result<Self> {
        if n == 0 || n > MAX_PLAYERS {
            return Err(arg(format!("player count {n} outside [1, {MAX_PLAYERS}]")));
        }
        let mask = full_mask(n);
        let mut map: HashMap<u32, u64> = HashMap::new();
        for (x, c) in entries {
            if x.bits() & !mask != 0 {
                return Err(arg("joint action out of range"));
            }
            if c > 0 {
                *map.entry(x.bits()).or_default() += c;
            }
        }
        let mut entries: Vec<(JointAction, u64)> = map
            .into_iter()
            .map(|(b, c)| (JointAction::from_bits(b), c))
            .collect();
        entries.sort_unstable();
        let total = entries.iter().map(|e| e.1).sum();
        Ok(ActionCounts { n, entries, total })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of observations `m`.
    #[inline]
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn entries(&self) -> &[(JointAction, u64)] {
        &self.entries
    }

    pub fn count(&self, x: JointAction) -> u64 {
        self.entries
            .binary_search_by_key(&x, |e| e.0)
            .map(|p| self.entries[p].1)
            .unwrap_or(0)
    }

    /// Relabels players so that player `i` becomes player `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        crate::game::check_permutation(perm, self.n)?;
        Self::from_entries(
            self.n,
            self.entries.iter().map(|&(x, c)| (x.permuted(perm), c)),
        )
    }
}

/// Streaming counter used by samplers so large `m` never materializes a list.
pub(crate) struct CountAccumulator {
    n: usize,
    dense: Vec<u64>,
    sparse: HashMap<u32, u64>,
}

impl CountAccumulator {
    pub(crate) fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_PLAYERS {
            return Err(arg(format!("player count {n} outside [1, {MAX_PLAYERS}]")));
        }
        let dense = if n <= DENSE_COUNT_LIMIT {
            vec![0; 1 << n]
        } else {
            Vec::new()
        };
        Ok(CountAccumulator {
            n,
            dense,
            sparse: HashMap::new(),
        })
    }

    #[inline]
    pub(crate) fn push(&mut self, x: JointAction) {
        if self.n <= DENSE_COUNT_LIMIT {
            self.dense[x.bits() as usize] += 1;
        } else {
            *self.sparse.entry(x.bits()).or_default() += 1;
        }
    }

    pub(crate) fn finish(self) -> ActionCounts {
        let mut entries: Vec<(JointAction, u64)> = if self.n <= DENSE_COUNT_LIMIT {
            self.dense
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(b, &c)| (JointAction::from_bits(b as u32), c))
                .collect()
        } else {
            self.sparse
                .into_iter()
                .map(|(b, c)| (JointAction::from_bits(b), c))
                .collect()
        };
        entries.sort_unstable();
        let total = entries.iter().map(|e| e.1).sum();
        ActionCounts {
            n: self.n,
            entries,
            total,
        }
    }
}
