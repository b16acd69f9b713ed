//! Seeded Monte-Carlo BER engine: frames through the chain, per-point error
//! counting with early stop, and required-SNR interpolation.
//!
//! Determinism contract: every frame draws from its own RNG substream keyed
//! by the absolute frame index, error counts are integers merged
//! order-independently, and the early-stop decision is taken only at fixed
//! batch boundaries — so serial and parallel runs of the same config produce
//! identical statistics.

use rand::Rng;
use rayon::prelude::*;

use crate::chansim::{prefec_bit_errors, ChannelConfig, FrameContext, SymbolEqualizer, Variant};
use crate::ldpc::{decode, LdpcCode, DEFAULT_BP_ITERS};
use crate::llr::LlrFrame;
use crate::rng::{stream, substream};
use crate::volterra::{train_at_snr, VolterraModel};
use crate::{Error, Result};

/// Stop a point once this many post-BP bit errors have accumulated.
pub const EARLY_STOP_ERRORS: usize = 100;

/// Frames simulated between early-stop checks. Fixed (not worker-count
/// dependent) so the stop decision is scheduling-independent.
pub const BATCH_FRAMES: usize = 32;

/// Counts at one SNR grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub frames: usize,
    /// Coded bits simulated (frames * n).
    pub bits: usize,
    pub prefec_errors: usize,
    pub postbp_errors: usize,
}

impl BerPoint {
    pub fn prefec_ber(&self) -> f64 {
        self.prefec_errors as f64 / self.bits as f64
    }

    pub fn postbp_ber(&self) -> f64 {
        self.postbp_errors as f64 / self.bits as f64
    }
}

/// One labeled waterfall curve over an ascending SNR grid.
#[derive(Debug, Clone)]
pub struct BerCurve {
    pub label: String,
    pub points: Vec<BerPoint>,
}

/// Decoding step applied to each frame's demapper LLRs.
pub trait FrameDecoder: Sync {
    /// Hard bit decisions for one codeword-sized LLR frame.
    fn decode_frame(&self, llr: &LlrFrame, code: &LdpcCode) -> Vec<u8>;
}

/// Plain flooding BP for a fixed iteration budget.
#[derive(Debug, Clone, Copy)]
pub struct BpDecoder {
    pub n_iter: usize,
}

impl Default for BpDecoder {
    fn default() -> Self {
        BpDecoder { n_iter: DEFAULT_BP_ITERS }
    }
}

impl FrameDecoder for BpDecoder {
    fn decode_frame(&self, llr: &LlrFrame, code: &LdpcCode) -> Vec<u8> {
        decode(&llr.values, code, self.n_iter).hard_bits
    }
}

/// Which symbol-domain equalizer a waterfall run uses at each SNR point.
#[derive(Debug, Clone)]
pub enum EqPlan {
    /// Linear front end only.
    None,
    /// One fixed model applied at every point.
    Fixed(VolterraModel),
    /// Refit Volterra weights at each point's received SNR.
    PerSnr { l: usize, train_frames: usize },
}

impl EqPlan {
    /// Equalizer instance for one grid point.
    pub fn build(&self, cfg: &ChannelConfig, snr_db: f64) -> Result<Box<dyn SymbolEqualizer>> {
        match self {
            EqPlan::None => Ok(Box::new(crate::chansim::Passthrough)),
            EqPlan::Fixed(m) => Ok(Box::new(m.clone())),
            EqPlan::PerSnr { l, train_frames } => {
                let (m, _) = train_at_snr(cfg, *l, snr_db, *train_frames)?;
                Ok(Box::new(m))
            }
        }
    }
}

fn simulate_frame(
    ctx: &FrameContext,
    code: &LdpcCode,
    variant: Variant,
    eq: &dyn SymbolEqualizer,
    decoder: &dyn FrameDecoder,
    frame_idx: u64,
) -> Result<(usize, usize)> {
    let mut rng = substream(ctx.cfg.seed, stream::EVAL + frame_idx);
    let info: Vec<u8> = (0..code.k).map(|_| rng.gen_range(0..2u8)).collect();
    let cw = code.encode(&info)?;
    let out = ctx.run_variant(variant, &cw, eq, &mut rng)?;
    let pre = prefec_bit_errors(&out.xhat, &cw, &ctx.constellation);
    let hard = decoder.decode_frame(&out.llr, code);
    let post = hard.iter().zip(&cw).filter(|(a, b)| a != b).count();
    Ok((pre, post))
}

/// Simulate one SNR point (`cfg.snr_db` is the point) until
/// `frames_per_point` frames are done or the early-stop error count is
/// reached at a batch boundary.
pub fn simulate_point(
    cfg: &ChannelConfig,
    code: &LdpcCode,
    variant: Variant,
    eq: &dyn SymbolEqualizer,
    decoder: &dyn FrameDecoder,
    frames_per_point: usize,
) -> Result<BerPoint> {
    if frames_per_point == 0 {
        return Err(Error::Config("frames_per_point must be at least 1".into()));
    }
    let ctx = FrameContext::new(*cfg)?;
    if code.n % ctx.constellation.m_bits != 0 {
        return Err(Error::Config(format!(
            "code length {} is not a multiple of {} bits per symbol",
            code.n, ctx.constellation.m_bits
        )));
    }
    let mut frames = 0usize;
    let mut prefec_errors = 0usize;
    let mut postbp_errors = 0usize;
    while frames < frames_per_point {
        let batch = BATCH_FRAMES.min(frames_per_point - frames);
        let counts: Vec<(usize, usize)> = (frames..frames + batch)
            .into_par_iter()
            .map(|f| simulate_frame(&ctx, code, variant, eq, decoder, f as u64))
            .collect::<Result<Vec<_>>>()?;
        for (pre, post) in counts {
            prefec_errors += pre;
            postbp_errors += post;
        }
        frames += batch;
        if postbp_errors >= EARLY_STOP_ERRORS {
            break;
        }
    }
    Ok(BerPoint {
        snr_db: cfg.snr_db,
        frames,
        bits: frames * code.n,
        prefec_errors,
        postbp_errors,
    })
}

/// Simulate a whole curve over an ascending SNR grid.
pub fn simulate_curve(
    cfg: &ChannelConfig,
    code: &LdpcCode,
    variant: Variant,
    eq_plan: &EqPlan,
    decoder: &dyn FrameDecoder,
    snr_grid: &[f64],
    frames_per_point: usize,
    label: &str,
) -> Result<BerCurve> {
    if snr_grid.is_empty() {
        return Err(Error::Config("empty SNR grid".into()));
    }
    if snr_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("SNR grid must be strictly increasing".into()));
    }
    let mut points = Vec::with_capacity(snr_grid.len());
    for &snr_db in snr_grid {
        let mut pt_cfg = *cfg;
        pt_cfg.snr_db = snr_db;
        let eq = eq_plan.build(cfg, snr_db)?;
        points.push(simulate_point(&pt_cfg, code, variant, eq.as_ref(), decoder, frames_per_point)?);
    }
    Ok(BerCurve { label: label.to_string(), points })
}

/// SNR at which the post-BP BER curve crosses `target_ber`, interpolating
/// linearly in (snr_db, log10 ber) between the bracketing grid points. A
/// zero-error point is scored as half an error over its simulated bits.
pub fn required_snr(curve: &BerCurve, target_ber: f64) -> Result<f64> {
    if !(target_ber > 0.0 && target_ber < 0.5) {
        return Err(Error::Config(format!("target BER {target_ber} outside (0, 0.5)")));
    }
    let pts = &curve.points;
    if pts.is_empty() {
        return Err(Error::Range(format!("curve '{}' has no points", curve.label)));
    }
    // Effective BER with a floor of half an error, so interpolation through
    // error-free points stays defined.
    let eff = |p: &BerPoint| p.postbp_ber().max(0.5 / p.bits as f64);
    if eff(&pts[0]) <= target_ber {
        return Err(Error::Range(format!(
            "curve '{}' is already at or below BER {target_ber:.1e} at its lowest grid point \
             {} dB; extend the grid downward",
            curve.label, pts[0].snr_db
        )));
    }
    for w in pts.windows(2) {
        let (b1, b2) = (eff(&w[0]), eff(&w[1]));
        if b1 > target_ber && b2 <= target_ber {
            let t = (target_ber.log10() - b1.log10()) / (b2.log10() - b1.log10());
            return Ok(w[0].snr_db + t * (w[1].snr_db - w[0].snr_db));
        }
    }
    Err(Error::Range(format!(
        "curve '{}' never reaches BER {target_ber:.1e}: best point {:.3e} at {} dB; \
         extend the grid upward",
        curve.label,
        pts.iter().map(eff).fold(f64::INFINITY, f64::min),
        pts.last().unwrap().snr_db
    )))
}
