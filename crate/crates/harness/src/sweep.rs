//! Full factorial sweeps, aggregation and CSV output.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{ExperimentConfig, NoiseKind, NoiseSpec};
use crate::error::{io_err, HarnessError, Result};
use crate::trial::{run_trial, TrialRecord};

pub const TRIAL_COLUMNS: &[&str] = &[
    "n",
    "k",
    "c",
    "trial",
    "seed",
    "noise",
    "noise_param",
    "delta",
    "lambda_multiplier",
    "m",
    "lambda",
    "recovered",
    "rho_min",
    "psne_size",
    "redraws",
    "max_iters",
    "converged",
    "error",
];

pub const AGGREGATE_COLUMNS: &[&str] = &[
    "n",
    "k",
    "c",
    "m",
    "trials",
    "recovered_count",
    "probability",
];

/// Recovery frequency of one `(n, k, c)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub n: usize,
    pub k: usize,
    pub c: f64,
    pub m: u64,
    pub trials: usize,
    pub recovered_count: usize,
    pub probability: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<TrialRecord>,
    pub aggregate: Vec<AggregateRow>,
}

/// Runs every `(n, k, c, trial)` in parallel; records come back ordered by
/// `(n, k, c, trial)` regardless of scheduling.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, f64, usize)> = cfg
        .cells()
        .into_iter()
        .flat_map(|(n, k, c)| (0..cfg.trials).map(move |t| (n, k, c, t)))
        .collect();
    log::info!("running {} trials", jobs.len());
    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(n, k, c, t)| run_trial(cfg, n, k, c, t))
        .collect();
    let aggregate = aggregate(&records);
    Ok(SweepResult { records, aggregate })
}

/// Groups consecutive records sharing `(n, k, c)`.
pub fn aggregate(records: &[TrialRecord]) -> Vec<AggregateRow> {
    let mut out: Vec<AggregateRow> = Vec::new();
    for r in records {
        match out.last_mut() {
            Some(a) if a.n == r.n && a.k == r.k && a.c == r.c => {
                a.trials += 1;
                a.recovered_count += r.recovered as usize;
            }
            _ => out.push(AggregateRow {
                n: r.n,
                k: r.k,
                c: r.c,
                m: r.m,
                trials: 1,
                recovered_count: r.recovered as usize,
                probability: 0.0,
            }),
        }
    }
    for a in &mut out {
        a.probability = a.recovered_count as f64 / a.trials as f64;
    }
    out
}

fn float(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

pub fn write_trials<W: std::io::Write>(
    w: W,
    records: &[TrialRecord],
    wall_time: bool,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = TRIAL_COLUMNS.to_vec();
    if wall_time {
        header.push("wall_ms");
    }
    out.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.n.to_string(),
            r.k.to_string(),
            r.c.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.noise.kind().to_string(),
            r.noise.param_text(),
            r.delta.to_string(),
            r.lambda_multiplier.to_string(),
            r.m.to_string(),
            float(r.lambda),
            r.recovered.to_string(),
            r.rho_min.map(float).unwrap_or_default(),
            r.psne_size.to_string(),
            r.redraws.to_string(),
            r.max_iters.to_string(),
            r.converged.to_string(),
            r.error.clone().unwrap_or_default(),
        ];
        if wall_time {
            row.push(r.wall_ms.map(float).unwrap_or_default());
        }
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| HarnessError::Io {
        path: "trial csv".into(),
        source: e,
    })?;
    Ok(())
}

pub fn write_aggregate<W: std::io::Write>(w: W, rows: &[AggregateRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(AGGREGATE_COLUMNS)?;
    for a in rows {
        out.write_record([
            a.n.to_string(),
            a.k.to_string(),
            a.c.to_string(),
            a.m.to_string(),
            a.trials.to_string(),
            a.recovered_count.to_string(),
            a.probability.to_string(),
        ])?;
    }
    out.flush().map_err(|e| HarnessError::Io {
        path: "aggregate csv".into(),
        source: e,
    })?;
    Ok(())
}

/// Writes `trials.csv` and `aggregate.csv` under `dir`, returning their paths.
pub fn write_sweep(
    dir: &Path,
    result: &SweepResult,
    wall_time: bool,
) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let trials = dir.join("trials.csv");
    let agg = dir.join("aggregate.csv");
    let f = std::fs::File::create(&trials).map_err(|e| io_err(&trials, e))?;
    write_trials(std::io::BufWriter::new(f), &result.records, wall_time)?;
    let f = std::fs::File::create(&agg).map_err(|e| io_err(&agg, e))?;
    write_aggregate(std::io::BufWriter::new(f), &result.aggregate)?;
    Ok((trials, agg))
}

/// Reads records written by [`write_trials`].
pub fn read_trials<R: std::io::Read>(r: R) -> Result<Vec<TrialRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = Vec::new();
    for name in TRIAL_COLUMNS {
        idx.push(col(name).ok_or_else(|| HarnessError::Record {
            row: 0,
            msg: format!("missing column {name}"),
        })?);
    }
    let wall = col("wall_ms");
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = row + 1;
        let field = |i: usize| rec.get(idx[i]).unwrap_or("");
        let bad = |what: &str, e: String| HarnessError::Record {
            row,
            msg: format!("{what}: {e}"),
        };
        macro_rules! parse {
            ($i:expr, $name:expr) => {
                field($i).parse().map_err(|e| bad($name, format!("{e}")))?
            };
        }
        let opt_float = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|e| bad("float", format!("{e}")))
            }
        };
        let kind: NoiseKind = field(5).parse().map_err(|e| bad("noise", e))?;
        let noise = NoiseSpec::from_parts(kind, field(6)).map_err(|e| bad("noise_param", e))?;
        let error = Some(field(17).to_string()).filter(|s| !s.is_empty());
        out.push(TrialRecord {
            n: parse!(0, "n"),
            k: parse!(1, "k"),
            c: parse!(2, "c"),
            trial: parse!(3, "trial"),
            seed: parse!(4, "seed"),
            noise,
            delta: parse!(7, "delta"),
            lambda_multiplier: parse!(8, "lambda_multiplier"),
            m: parse!(9, "m"),
            lambda: opt_float(field(10))?.unwrap_or(f64::NAN),
            recovered: parse!(11, "recovered"),
            rho_min: opt_float(field(12))?,
            psne_size: parse!(13, "psne_size"),
            redraws: parse!(14, "redraws"),
            max_iters: parse!(15, "max_iters"),
            converged: parse!(16, "converged"),
            error,
            wall_ms: match wall {
                Some(w) => opt_float(rec.get(w).unwrap_or(""))?,
                None => None,
            },
        });
    }
    Ok(out)
}
