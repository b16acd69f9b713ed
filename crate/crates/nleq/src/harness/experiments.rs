//! The experiment pipelines behind the CLI subcommands: single waterfall
//! runs, the training-SNR penalty sweep, the six-receiver final comparison,
//! and the nonlinearity drive-level calibration. Each takes a full
//! [`ExperimentConfig`] and is deterministic in (config, seed).

use std::path::Path;

use crate::harness::config::{EqKind, ExperimentConfig};
use crate::harness::waterfall::{
    required_snr, simulate_curve, BerCurve, BpDecoder, EqPlan, FrameDecoder,
};
use crate::chansim::Variant;
use crate::ldpc::LdpcCode;
use crate::nnbp::{self, NnBpDecoder, Schedule};
use crate::noisefig::{
    estimate_moments, no_nl_required_snr, penalty_decomposition, penalty_with_context,
    PenaltyReport, MOMENT_FRAMES,
};
use crate::volterra::{train_at_snr, VolterraModel};
use crate::{Error, Result};

/// Slack allowed when checking the expected required-SNR ordering of the
/// final comparison; differences smaller than this are treated as ties.
pub const ORDER_SLACK_DB: f64 = 0.05;

/// Bisection stops once the strength ratio is this close to its target
/// (well inside the default acceptance band of half-width 0.017..0.018).
const RATIO_TOL: f64 = 2e-3;

/// The LDPC code a config points at: its alist file, or the built-in desk
/// code when `code_path` is empty.
pub fn load_code(cfg: &ExperimentConfig) -> Result<LdpcCode> {
    if cfg.code_path.is_empty() {
        return LdpcCode::desk_default();
    }
    let text = std::fs::read_to_string(Path::new(&cfg.code_path)).map_err(|e| {
        Error::Config(format!("cannot read code file {}: {e}", cfg.code_path))
    })?;
    LdpcCode::from_alist_text(&text)
}

/// The Volterra model a config asks for: loaded from `weights` when set,
/// otherwise fitted at `train_snr_db`.
fn volterra_model(cfg: &ExperimentConfig, train_snr_db: f64) -> Result<VolterraModel> {
    let eq = &cfg.equalizer;
    if !eq.weights.is_empty() {
        return VolterraModel::load(Path::new(&eq.weights));
    }
    let (model, _) = train_at_snr(&cfg.channel, eq.l, train_snr_db, eq.vlt_train_frames)?;
    Ok(model)
}

/// The NN+BP decoder a config asks for: loaded from `weights` when set,
/// otherwise trained fresh on the configured channel.
fn nn_decoder(cfg: &ExperimentConfig, code: &LdpcCode) -> Result<NnBpDecoder> {
    let eq = &cfg.equalizer;
    if !eq.weights.is_empty() {
        let (stages, sched) = nnbp::load_weights(Path::new(&eq.weights))?;
        return NnBpDecoder::new(stages, sched);
    }
    let report = nnbp::train(&cfg.channel, code, eq.dims(), &eq.schedule(), &eq.hyper())?;
    Ok(NnBpDecoder::from_report(&report))
}

/// Simulate the configured receiver's BER waterfall over the SNR grid.
pub fn run_waterfall(cfg: &ExperimentConfig) -> Result<BerCurve> {
    let code = load_code(cfg)?;
    let eq = &cfg.equalizer;
    let (plan, decoder, label): (EqPlan, Box<dyn FrameDecoder>, &str) = match eq.kind {
        EqKind::None => (EqPlan::None, Box::new(BpDecoder::default()), "none"),
        EqKind::Volterra => {
            let plan = if eq.per_snr {
                EqPlan::PerSnr { l: eq.l, train_frames: eq.vlt_train_frames }
            } else {
                EqPlan::Fixed(volterra_model(cfg, eq.vlt_train_snr_db)?)
            };
            (plan, Box::new(BpDecoder::default()), "volterra")
        }
        EqKind::NnBp => (EqPlan::None, Box::new(nn_decoder(cfg, &code)?), "nn-bp"),
    };
    simulate_curve(
        &cfg.channel,
        &code,
        Variant::A,
        &plan,
        decoder.as_ref(),
        &cfg.snr_grid,
        cfg.frames_per_point,
        label,
    )
}

/// Sweep the Volterra training SNR and decompose each model's link penalty
/// into nonlinear-distortion and noise-enhancement parts, alongside its
/// analytic noise figure. The no-nonlinearity baseline and the input
/// moments are computed once and shared by every row.
pub fn run_training_snr_sweep(cfg: &ExperimentConfig) -> Result<Vec<PenaltyReport>> {
    let grid = &cfg.sweep.train_snr_grid;
    if grid.is_empty() {
        return Err(Error::Config("train_snr_grid must not be empty".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("train_snr_grid must be strictly increasing".into()));
    }
    let code = load_code(cfg)?;
    let eq = &cfg.equalizer;
    let baseline = no_nl_required_snr(&cfg.channel, &code, &cfg.snr_grid, cfg.frames_per_point)?;
    let mom = estimate_moments(&cfg.channel, eq.l, cfg.sweep.moment_frames)?;
    grid.iter()
        .map(|&train_snr| {
            let (model, _) = train_at_snr(&cfg.channel, eq.l, train_snr, eq.vlt_train_frames)?;
            penalty_with_context(
                &cfg.channel,
                &code,
                &model,
                &cfg.snr_grid,
                cfg.frames_per_point,
                baseline,
                &mom,
            )
        })
        .collect()
}

/// Penalty decomposition of the configured Volterra receiver: fit (or load)
/// one model, then split its link penalty at the target BER into
/// nonlinear-distortion and noise-enhancement parts.
pub fn run_penalty(cfg: &ExperimentConfig) -> Result<PenaltyReport> {
    let code = load_code(cfg)?;
    let model = volterra_model(cfg, cfg.equalizer.vlt_train_snr_db)?;
    penalty_decomposition(&cfg.channel, &code, &model, &cfg.snr_grid, cfg.frames_per_point)
}

/// Final comparison of every receiver on the same nonlinear channel.
#[derive(Debug)]
pub struct ComparisonReport {
    /// Waterfalls in expected required-SNR order: no-nl, nn-bp-3, nn-bp-1,
    /// vlt-opt, vlt-per-snr, no-eq.
    pub curves: Vec<BerCurve>,
    /// Required SNR at the target BER, one `(label, dB)` pair per curve.
    pub required_snr_db: Vec<(String, f64)>,
    /// Adjacent-pair ordering breaches beyond [`ORDER_SLACK_DB`], as
    /// human-readable strings; empty when the ordering holds.
    pub ordering_violations: Vec<String>,
    /// Required-SNR gain of the 3-stage NN receiver over the fixed
    /// optimally-trained Volterra receiver, and over no equalizer.
    pub nn_gain_over_vlt_db: f64,
    pub nn_gain_over_noeq_db: f64,
}

impl ComparisonReport {
    pub fn ordering_ok(&self) -> bool {
        self.ordering_violations.is_empty()
    }

    /// Required SNR of the curve with this label.
    pub fn required(&self, label: &str) -> Option<f64> {
        self.required_snr_db.iter().find(|(l, _)| l == label).map(|&(_, v)| v)
    }
}

/// Run all six receivers over the configured grid and compare their
/// required SNRs at the target BER: the linear-channel bound, the 3-stage
/// and 1-stage NN+BP receivers (equal total BP budget), the fixed and
/// per-SNR-refitted Volterra receivers, and the unequalized link.
pub fn run_final_comparison(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    let code = load_code(cfg)?;
    let eq = &cfg.equalizer;
    let bp = BpDecoder::default();
    let grid = &cfg.snr_grid;
    let fpp = cfg.frames_per_point;

    let mut curves = Vec::with_capacity(6);

    let mut linear = cfg.channel;
    linear.nl_amplitude = f64::INFINITY;
    curves.push(simulate_curve(&linear, &code, Variant::A, &EqPlan::None, &bp, grid, fpp, "no-nl")?);

    let sched3 = eq.schedule();
    let nn3 = NnBpDecoder::from_report(&nnbp::train(
        &cfg.channel,
        &code,
        eq.dims(),
        &sched3,
        &eq.hyper(),
    )?);
    curves.push(simulate_curve(
        &cfg.channel,
        &code,
        Variant::A,
        &EqPlan::None,
        &nn3,
        grid,
        fpp,
        "nn-bp-3",
    )?);

    // Single-stage ablation with the same total BP iteration budget.
    let sched1 = Schedule::single(sched3.total_iters(), sched3.lambda.clone());
    let nn1 = NnBpDecoder::from_report(&nnbp::train(
        &cfg.channel,
        &code,
        eq.dims(),
        &sched1,
        &eq.hyper(),
    )?);
    curves.push(simulate_curve(
        &cfg.channel,
        &code,
        Variant::A,
        &EqPlan::None,
        &nn1,
        grid,
        fpp,
        "nn-bp-1",
    )?);

    let opt = EqPlan::Fixed(volterra_model(cfg, eq.vlt_train_snr_db)?);
    curves.push(simulate_curve(&cfg.channel, &code, Variant::A, &opt, &bp, grid, fpp, "vlt-opt")?);

    let per = EqPlan::PerSnr { l: eq.l, train_frames: eq.vlt_train_frames };
    curves.push(simulate_curve(
        &cfg.channel,
        &code,
        Variant::A,
        &per,
        &bp,
        grid,
        fpp,
        "vlt-per-snr",
    )?);

    curves.push(simulate_curve(
        &cfg.channel,
        &code,
        Variant::A,
        &EqPlan::None,
        &bp,
        grid,
        fpp,
        "no-eq",
    )?);

    let required_snr_db: Vec<(String, f64)> = curves
        .iter()
        .map(|c| Ok((c.label.clone(), required_snr(c, cfg.target_ber)?)))
        .collect::<Result<_>>()?;

    let mut ordering_violations = Vec::new();
    for pair in required_snr_db.windows(2) {
        let (ref a, ra) = pair[0];
        let (ref b, rb) = pair[1];
        if ra > rb + ORDER_SLACK_DB {
            ordering_violations
                .push(format!("{a} needs {ra:.3} dB > {b} {rb:.3} dB + {ORDER_SLACK_DB} slack"));
        }
    }

    let req = |label: &str| {
        required_snr_db.iter().find(|(l, _)| l == label).map(|&(_, v)| v).unwrap()
    };
    Ok(ComparisonReport {
        nn_gain_over_vlt_db: req("vlt-opt") - req("nn-bp-3"),
        nn_gain_over_noeq_db: req("no-eq") - req("nn-bp-3"),
        curves,
        required_snr_db,
        ordering_violations,
    })
}

/// Outcome of the drive-level calibration.
#[derive(Debug, Clone)]
pub struct CalibrationReport {
    /// Sinusoid scale whose fitted strength ratio landed on the target.
    pub a: f64,
    pub ratio: f64,
    pub target: f64,
    /// Every `(amplitude, ratio)` evaluation, bracket probes first.
    pub evals: Vec<(f64, f64)>,
}

impl CalibrationReport {
    /// key = value text for the calibration output file.
    pub fn to_text(&self) -> String {
        format!(
            "nl_amplitude = {}\nratio = {}\ntarget = {}\nevals = {}\n",
            self.a,
            self.ratio,
            self.target,
            self.evals.len()
        )
    }
}

/// Log-scale bisection of a decreasing amplitude -> ratio map. Split out
/// from the channel plumbing so the search logic is testable on synthetic
/// maps.
fn bisect_ratio(
    cal: &crate::harness::config::CalibrateConfig,
    mut eval: impl FnMut(f64) -> Result<f64>,
) -> Result<CalibrationReport> {
    let mut evals = Vec::new();
    let mut probe = |a: f64, evals: &mut Vec<(f64, f64)>| -> Result<f64> {
        let r = eval(a)?;
        if !r.is_finite() {
            return Err(Error::Numerical(format!("strength ratio at A = {a} is {r}")));
        }
        evals.push((a, r));
        Ok(r)
    };

    let (mut lo, mut hi) = (cal.a_lo, cal.a_hi);
    let r_lo = probe(lo, &mut evals)?;
    let r_hi = probe(hi, &mut evals)?;
    if !(r_lo >= cal.target && cal.target >= r_hi) {
        return Err(Error::Range(format!(
            "target ratio {} not bracketed: ratio({lo}) = {r_lo:.4}, ratio({hi}) = {r_hi:.4}; \
             widen [a_lo, a_hi]",
            cal.target
        )));
    }

    let mut best = if (r_lo - cal.target).abs() <= (r_hi - cal.target).abs() {
        (lo, r_lo)
    } else {
        (hi, r_hi)
    };
    for _ in 0..32 {
        if (best.1 - cal.target).abs() <= RATIO_TOL {
            break;
        }
        let mid = (lo * hi).sqrt();
        let r = probe(mid, &mut evals)?;
        if (r - cal.target).abs() < (best.1 - cal.target).abs() {
            best = (mid, r);
        }
        if r > cal.target {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    if !(cal.band_lo..=cal.band_hi).contains(&best.1) {
        return Err(Error::Numerical(format!(
            "calibration stalled at ratio {:.4} (A = {:.4}), outside [{}, {}]",
            best.1, best.0, cal.band_lo, cal.band_hi
        )));
    }
    Ok(CalibrationReport { a: best.0, ratio: best.1, target: cal.target, evals })
}

/// Find the sinusoid scale A at which a Volterra fit sees the target
/// nonlinearity strength ratio `E[w^2] |h3| / |h1|`. The ratio decreases in
/// A (larger A means a milder sinusoid), so a log-scale bisection over the
/// configured bracket converges; a bracket that does not straddle the
/// target is reported as a range error.
pub fn calibrate_nonlinearity(cfg: &ExperimentConfig) -> Result<CalibrationReport> {
    let cal = &cfg.calibrate;
    let eq = &cfg.equalizer;
    bisect_ratio(cal, |a| {
        let mut c = cfg.channel;
        c.nl_amplitude = a;
        c.snr_db = cal.train_snr_db;
        let (model, _) = train_at_snr(&c, eq.l, cal.train_snr_db, eq.vlt_train_frames)?;
        let mom = estimate_moments(&c, eq.l, MOMENT_FRAMES)?;
        Ok(model.nonlinear_ratio(mom.ew2))
    })
}
