//! Joins trial records with the exact constants of the game each one used.

use lig_core::theory::THEORY_MAX_PLAYERS;
use lig_core::{compute_game_constants, fano_sample_bound, recovery_window, JointDistribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{HarnessError, Result};
use crate::sweep::TRIAL_COLUMNS;
use crate::trial::{draw_game, TrialRecord, DEGENERATE};

pub const ANNOTATION_COLUMNS: &[&str] = &[
    "c_min",
    "d_max",
    "kappa",
    "nu",
    "k_const",
    "v_star_l1",
    "assumption1",
    "margin_strict",
    "lambda_lo",
    "lambda_hi",
    "m_required",
    "window_nonempty",
    "lambda_in_window",
    "m_sufficient",
    "fano_bound",
    "premises_ok",
    "theory_status",
];

pub const NOT_COMPUTED: &str = "not computed";

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryAnnotation {
    pub c_min: f64,
    pub d_max: f64,
    pub kappa: f64,
    pub nu: f64,
    /// `K` at the record's in-degree.
    pub k_const: f64,
    pub v_star_l1: f64,
    pub assumption1: bool,
    pub margin_strict: bool,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub m_required: f64,
    pub window_nonempty: bool,
    pub lambda_in_window: bool,
    pub m_sufficient: bool,
    /// Every hypothesis of the recovery guarantee holds for this run.
    pub premises_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedRecord {
    pub record: TrialRecord,
    pub fano_bound: Option<f64>,
    /// `Err` holds the reason the constants were not computed.
    pub theory: std::result::Result<TheoryAnnotation, String>,
}

/// Rebuilds the game and noise model from the record's seed and evaluates
/// the game-level (worst player) constants.
pub fn annotate_record(rec: &TrialRecord) -> AnnotatedRecord {
    let fano_bound = fano_sample_bound::<f64>(rec.n, rec.k).ok();
    let theory = if rec.n > THEORY_MAX_PLAYERS {
        Err(format!("{NOT_COMPUTED}: n > {THEORY_MAX_PLAYERS}"))
    } else if rec.error.as_deref() == Some(DEGENERATE) {
        Err(format!("{NOT_COMPUTED}: {DEGENERATE}"))
    } else {
        theory_for(rec).map_err(|e| format!("{NOT_COMPUTED}: {e}"))
    };
    AnnotatedRecord {
        record: rec.clone(),
        fano_bound,
        theory,
    }
}

fn theory_for(rec: &TrialRecord) -> std::result::Result<TheoryAnnotation, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(rec.seed);
    let drawn = draw_game(rec.n, rec.k, &rec.noise, rec.redraws, &mut rng)
        .map_err(|_| "game could not be regenerated".to_string())?;
    if drawn.redraws != rec.redraws || drawn.psne.len() != rec.psne_size {
        return Err("regenerated game does not match the record".into());
    }
    let consts = compute_game_constants(&drawn.game, &drawn.model).map_err(|e| e.to_string())?;
    let dist = drawn.model.constants().map_err(|e| e.to_string())?;
    let window = recovery_window(&consts, rec.n, rec.k, rec.m as f64, rec.delta)
        .map_err(|e| e.to_string())?;
    let lambda_in_window = window.contains(rec.lambda);
    let margin_strict = consts.margin_strict();
    Ok(TheoryAnnotation {
        c_min: consts.c_min,
        d_max: consts.d_max,
        kappa: consts.kappa,
        nu: consts.nu,
        k_const: window.k_const,
        v_star_l1: consts.v_star_l1,
        assumption1: dist.assumption1_holds,
        margin_strict,
        lambda_lo: window.lambda_lo,
        lambda_hi: window.lambda_hi,
        m_required: window.m_required,
        window_nonempty: window.window_nonempty,
        lambda_in_window,
        m_sufficient: window.m_sufficient,
        premises_ok: dist.assumption1_holds
            && margin_strict
            && window.k_const > 0.0
            && lambda_in_window
            && window.m_sufficient,
    })
}

pub fn annotate_theory(records: &[TrialRecord]) -> Vec<AnnotatedRecord> {
    records.par_iter().map(annotate_record).collect()
}

pub fn write_annotated<W: std::io::Write>(w: W, rows: &[AnnotatedRecord]) -> Result<()> {
    let mut trial_buf = Vec::new();
    crate::sweep::write_trials(
        &mut trial_buf,
        &rows.iter().map(|r| r.record.clone()).collect::<Vec<_>>(),
        false,
    )?;
    let mut rdr = csv::Reader::from_reader(trial_buf.as_slice());
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<&str> = TRIAL_COLUMNS
        .iter()
        .chain(ANNOTATION_COLUMNS)
        .copied()
        .collect();
    out.write_record(&header)?;
    for (base, row) in rdr.records().zip(rows) {
        let mut fields: Vec<String> = base?.iter().map(str::to_string).collect();
        let fano = row.fano_bound.map(|f| f.to_string()).unwrap_or_default();
        match &row.theory {
            Ok(t) => fields.extend([
                t.c_min.to_string(),
                t.d_max.to_string(),
                t.kappa.to_string(),
                t.nu.to_string(),
                t.k_const.to_string(),
                t.v_star_l1.to_string(),
                t.assumption1.to_string(),
                t.margin_strict.to_string(),
                t.lambda_lo.to_string(),
                t.lambda_hi.to_string(),
                t.m_required.to_string(),
                t.window_nonempty.to_string(),
                t.lambda_in_window.to_string(),
                t.m_sufficient.to_string(),
                fano,
                t.premises_ok.to_string(),
                "ok".to_string(),
            ]),
            Err(reason) => {
                fields.extend(std::iter::repeat_n(String::new(), 14));
                fields.extend([fano, "false".to_string(), reason.clone()]);
            }
        }
        out.write_record(&fields)?;
    }
    out.flush().map_err(|e| HarnessError::Io {
        path: "annotated csv".into(),
        source: e,
    })?;
    Ok(())
}
