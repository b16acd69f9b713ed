//! Analytic noise figure of a fitted Volterra equalizer, and the
//! Monte-Carlo machinery that splits a link penalty into its
//! noise-enhancement (NE) and residual-nonlinearity (NL) parts.
//!
//! The noise figure F is the ratio of input SNR to output SNR across the
//! equalizer, expanded to first order in the cubic weights under the
//! assumption that the additive noise at the equalizer input is white and
//! independent of the signal. It needs only the fitted weights and the
//! second/fourth-order moments of the *noise-free* equalizer input, so it
//! predicts the NE penalty without simulating a single decoded frame. The
//! Monte-Carlo side measures the same quantities by paired-seed simulation
//! and reads required SNRs off post-BP waterfall curves.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::chansim::{noise_sigma, ChannelConfig, FrameContext, SymbolEqualizer, Variant};
use crate::harness::{required_snr, simulate_curve, BpDecoder, EqPlan};
use crate::ldpc::LdpcCode;
use crate::rng::{stream, substream};
use crate::volterra::{build_features, VolterraIndexSet, VolterraModel, TRAIN_FRAME_SYMBOLS};
use crate::{Error, Result};

/// Post-BP BER at which required SNRs are read off for the penalties.
pub const PENALTY_TARGET_BER: f64 = 1e-4;

/// Frames for the moment pass when `penalty_decomposition` runs it itself.
pub const MOMENT_FRAMES: usize = 40;

/// Second- and fourth-order moments of the noise-free equalizer input `w`,
/// taken over interior symbols: `sigma_w11[a][b] = E[w_{n+a-L} w_{n+b-L}]`
/// and `sigma_w13[a][t] = E[w_{n+a-L} * w3_t]` where `w3_t` is the cubic
/// feature for the t-th canonical triple. `ew2` is the mean diagonal of
/// `sigma_w11`; `ez2` is the configured channel noise variance.
#[derive(Debug, Clone)]
pub struct SignalMoments {
    pub l: usize,
    pub sigma_w11: DMatrix<f64>,
    pub sigma_w13: DMatrix<f64>,
    pub ew2: f64,
    pub ez2: f64,
}

/// Running moment sums over feature windows. Feed it interior windows of
/// any symbol-rate sequence, then [`MomentAccumulator::finish`].
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    iset: VolterraIndexSet,
    s11: DMatrix<f64>,
    s13: DMatrix<f64>,
    n_windows: usize,
}

impl MomentAccumulator {
    pub fn new(l: usize) -> Self {
        let iset = VolterraIndexSet::build(l);
        let d1 = iset.n_linear();
        let d3 = iset.len();
        MomentAccumulator {
            iset,
            s11: DMatrix::zeros(d1, d1),
            s13: DMatrix::zeros(d1, d3),
            n_windows: 0,
        }
    }

    pub fn n_windows(&self) -> usize {
        self.n_windows
    }

    /// Accumulate the window centred on index `n` of `w`.
    pub fn push_window(&mut self, w: &[f64], n: usize) -> Result<()> {
        let (w1, w3) = build_features(w, n, &self.iset)?;
        let d1 = w1.len();
        for a in 0..d1 {
            for b in 0..d1 {
                self.s11[(a, b)] += w1[a] * w1[b];
            }
            for (t, &f) in w3.iter().enumerate() {
                self.s13[(a, t)] += w1[a] * f;
            }
        }
        self.n_windows += 1;
        Ok(())
    }

    /// Normalize into a [`SignalMoments`]. Errors if fewer than 100 windows
    /// per matrix dimension were accumulated.
    pub fn finish(self, ez2: f64) -> Result<SignalMoments> {
        let dim = self.iset.n_linear() + self.iset.len();
        if self.n_windows < 100 * dim {
            return Err(Error::Config(format!(
                "moment estimate needs at least {} windows (100 per matrix dimension), got {}",
                100 * dim,
                self.n_windows
            )));
        }
        let n = self.n_windows as f64;
        let sigma_w11 = self.s11 / n;
        let sigma_w13 = self.s13 / n;
        let ew2 = sigma_w11.diagonal().mean();
        Ok(SignalMoments { l: self.iset.l, sigma_w11, sigma_w13, ew2, ez2 })
    }
}

/// Estimate [`SignalMoments`] for memory length `l` by running fresh random
/// frames through the channel with the noise generator disabled; the linear
/// front end itself stays as trained at the configured SNR.
pub fn estimate_moments(cfg: &ChannelConfig, l: usize, n_frames: usize) -> Result<SignalMoments> {
    if n_frames == 0 {
        return Err(Error::Config("n_frames must be at least 1".into()));
    }
    if l > cfg.guard_symbols {
        return Err(Error::Config(format!(
            "memory length {l} exceeds the {} guard symbols",
            cfg.guard_symbols
        )));
    }
    let ctx = FrameContext::new(*cfg)?;
    let g = cfg.guard_symbols;
    let mut acc = MomentAccumulator::new(l);
    for f in 0..n_frames {
        let mut rng = substream(cfg.seed, stream::MOMENTS + f as u64);
        for _ in 0..2 {
            let c = &ctx.constellation;
            let syms: Vec<f64> = (0..TRAIN_FRAME_SYMBOLS)
                .map(|_| c.levels[rng.gen_range(0..c.n_levels())])
                .collect();
            let padded = crate::chansim::pad_guard(&syms, g);
            let zeros = vec![0.0; padded.len() * cfg.sps];
            let (w, _) = ctx.chain_with_noise(&padded, &zeros);
            for t in 0..TRAIN_FRAME_SYMBOLS {
                acc.push_window(&w, g + t)?;
            }
        }
    }
    acc.finish(noise_sigma(cfg.snr_db).powi(2))
}

/// Analytic noise figure (linear ratio, not dB) of a fitted model under the
/// given input moments:
///
/// ```text
///         |h1|^2 + 2 sum_{i=-L..L} sum_{j=-L..i} alpha_ij * sigma_w11[i,j]
///   F  =  --------------------------------------------------------------- * E[w^2]
///               h1' sigma_w11 h1  +  2 h1' sigma_w13 h3
/// ```
///
/// with `alpha_ij = sum_{k<=j} h1_k h3_{ijk} + sum_{k<=i} h1_k h3_{ikj} +
/// sum_k h1_k h3_{kij}`. Cubic subscripts name stored coefficients only when
/// already in canonical (sorted) order; other orderings contribute nothing.
/// The pair sum covers each unordered pair once, diagonal included — that is
/// exactly the regrouping of the first-order noise/signal cross term, and
/// for white input the diagonal carries the entire enhancement. Terms
/// quadratic in h3 are dropped throughout, which biases F slightly low
/// against paired measurement.
pub fn noise_figure(model: &VolterraModel, mom: &SignalMoments) -> Result<f64> {
    let l = model.index_set.l;
    if l != mom.l {
        return Err(Error::Config(format!(
            "model memory length {l} does not match moments length {}",
            mom.l
        )));
    }
    let li = l as i32;
    let h1 = |k: i32| model.h1[(k + li) as usize];
    let h3 = |i: i32, j: i32, k: i32| {
        model.index_set.position(i, j, k).map_or(0.0, |t| model.h3[t])
    };
    let alpha = |i: i32, j: i32| {
        let mut s = 0.0;
        for k in -li..=j {
            s += h1(k) * h3(i, j, k);
        }
        for k in -li..=i {
            s += h1(k) * h3(i, k, j);
        }
        for k in -li..=li {
            s += h1(k) * h3(k, i, j);
        }
        s
    };

    let mut num: f64 = model.h1.iter().map(|v| v * v).sum();
    for i in -li..=li {
        for j in -li..=i {
            num += 2.0 * alpha(i, j) * mom.sigma_w11[((i + li) as usize, (j + li) as usize)];
        }
    }

    let h1v = DVector::from_column_slice(&model.h1);
    let h3v = DVector::from_column_slice(&model.h3);
    let den = (h1v.transpose() * &mom.sigma_w11 * &h1v)[(0, 0)]
        + 2.0 * (h1v.transpose() * &mom.sigma_w13 * &h3v)[(0, 0)];
    if den <= 0.0 {
        return Err(Error::Numerical(format!(
            "degenerate model: nonpositive output signal power {den:.3e}"
        )));
    }
    let f = num * mom.ew2 / den;
    if !f.is_finite() || f <= 0.0 {
        return Err(Error::Numerical(format!("degenerate model: noise figure {f}")));
    }
    Ok(f)
}

/// Signal/noise power split at an equalizer's input and output, measured by
/// paired-seed simulation (identical signal and noise realizations for the
/// noise-free and noisy passes).
#[derive(Debug, Clone, Copy)]
pub struct OutputPowers {
    /// E[x_S^2]: output power of the noise-free pass.
    pub p_s: f64,
    /// E[x_N^2]: power of (noisy-pass output - noise-free-pass output).
    pub p_n: f64,
    /// E[w^2] at the equalizer input.
    pub p_s_in: f64,
    /// Noise power at the equalizer input.
    pub p_n_in: f64,
}

impl OutputPowers {
    /// Empirical noise figure: input SNR over output SNR.
    pub fn noise_figure(&self) -> f64 {
        (self.p_s_in / self.p_n_in) / (self.p_s / self.p_n)
    }
}

/// Measure [`OutputPowers`] for an equalizer at one operating SNR. The
/// noise-free output is obtained by equalizing the clean chain output; the
/// noise component is the exact difference of the paired noisy pass, not a
/// first-order expansion.
pub fn empirical_output_snr(
    eq: &dyn SymbolEqualizer,
    cfg: &ChannelConfig,
    snr_db: f64,
    n_frames: usize,
) -> Result<OutputPowers> {
    if n_frames == 0 {
        return Err(Error::Config("n_frames must be at least 1".into()));
    }
    let mut op_cfg = *cfg;
    op_cfg.snr_db = snr_db;
    let ctx = FrameContext::new(op_cfg)?;
    let g = op_cfg.guard_symbols;
    let (mut p_s, mut p_n, mut p_s_in, mut p_n_in) = (0.0f64, 0.0, 0.0, 0.0);
    let mut count = 0usize;
    for f in 0..n_frames {
        let mut rng = substream(op_cfg.seed, stream::NF_EVAL + f as u64);
        for _ in 0..2 {
            let c = &ctx.constellation;
            let syms: Vec<f64> = (0..TRAIN_FRAME_SYMBOLS)
                .map(|_| c.levels[rng.gen_range(0..c.n_levels())])
                .collect();
            let padded = crate::chansim::pad_guard(&syms, g);
            let (vc, vn) = ctx.chain_one_dim(&padded, &mut rng);
            let xs = eq.equalize(&vc);
            let vf: Vec<f64> = vc.iter().zip(&vn).map(|(a, b)| a + b).collect();
            let xf = eq.equalize(&vf);
            for t in g..g + TRAIN_FRAME_SYMBOLS {
                let xn = xf[t] - xs[t];
                p_s += xs[t] * xs[t];
                p_n += xn * xn;
                p_s_in += vc[t] * vc[t];
                p_n_in += vn[t] * vn[t];
                count += 1;
            }
        }
    }
    let n = count as f64;
    Ok(OutputPowers { p_s: p_s / n, p_n: p_n / n, p_s_in: p_s_in / n, p_n_in: p_n_in / n })
}

/// Required-SNR penalties of an equalized nonlinear link against the
/// linear-channel baseline, split into the residual-nonlinearity part
/// (noise bypasses the equalizer) and the noise-enhancement part (noise
/// passes through it), plus the analytic prediction of the latter.
#[derive(Debug, Clone, Copy)]
pub struct PenaltyReport {
    pub ne_penalty_db: f64,
    pub nl_penalty_db: f64,
    pub total_db: f64,
    pub nf_db: f64,
    pub train_snr_db: f64,
}

/// Required SNR at the penalty target BER for the no-nonlinearity baseline:
/// the same link with the sinusoid disabled and no equalizer.
pub fn no_nl_required_snr(
    cfg: &ChannelConfig,
    code: &LdpcCode,
    snr_grid: &[f64],
    frames_per_point: usize,
) -> Result<f64> {
    let mut base_cfg = *cfg;
    base_cfg.nl_amplitude = f64::INFINITY;
    let curve = simulate_curve(
        &base_cfg,
        code,
        Variant::A,
        &EqPlan::None,
        &BpDecoder::default(),
        snr_grid,
        frames_per_point,
        "no-nl",
    )?;
    required_snr(&curve, PENALTY_TARGET_BER)
}

/// [`penalty_decomposition`] with the baseline required SNR and the input
/// moments already in hand, so sweeps can share them across models.
pub fn penalty_with_context(
    cfg: &ChannelConfig,
    code: &LdpcCode,
    model: &VolterraModel,
    snr_grid: &[f64],
    frames_per_point: usize,
    baseline_required_snr: f64,
    mom: &SignalMoments,
) -> Result<PenaltyReport> {
    let dec = BpDecoder::default();
    let plan = EqPlan::Fixed(model.clone());
    let curve_c =
        simulate_curve(cfg, code, Variant::C, &plan, &dec, snr_grid, frames_per_point, "variant-c")?;
    let curve_a =
        simulate_curve(cfg, code, Variant::A, &plan, &dec, snr_grid, frames_per_point, "variant-a")?;
    let req_c = required_snr(&curve_c, PENALTY_TARGET_BER)?;
    let req_a = required_snr(&curve_a, PENALTY_TARGET_BER)?;
    let f = noise_figure(model, mom)?;
    let ne_penalty_db = req_a - req_c;
    let nl_penalty_db = req_c - baseline_required_snr;
    Ok(PenaltyReport {
        ne_penalty_db,
        nl_penalty_db,
        total_db: ne_penalty_db + nl_penalty_db,
        nf_db: 10.0 * f.log10(),
        train_snr_db: model.train_snr_db,
    })
}

/// Split the link penalty of `model` on the configured channel into NL and
/// NE parts at the target post-BP BER. Three curves are simulated over the
/// same grid: the linear-channel baseline, variant c (noise added after the
/// equalizer), and variant a (the physical chain). NL-penalty is c minus
/// baseline; NE-penalty is a minus c; the analytic noise figure of the same
/// model rides along for comparison.
pub fn penalty_decomposition(
    cfg: &ChannelConfig,
    code: &LdpcCode,
    model: &VolterraModel,
    snr_grid: &[f64],
    frames_per_point: usize,
) -> Result<PenaltyReport> {
    let baseline = no_nl_required_snr(cfg, code, snr_grid, frames_per_point)?;
    let mom = estimate_moments(cfg, model.index_set.l, MOMENT_FRAMES)?;
    penalty_with_context(cfg, code, model, snr_grid, frames_per_point, baseline, &mom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chansim::{Constellation, Passthrough};
    use crate::volterra::train_at_snr;

    fn iid_pam_sequence(n: usize, seed: u64) -> Vec<f64> {
        let c = Constellation::pam_gray(3);
        let mut rng = substream(seed, 77);
        (0..n).map(|_| c.levels[rng.gen_range(0..c.n_levels())]).collect()
    }

    fn accumulate_sequence(w: &[f64], l: usize) -> SignalMoments {
        let mut acc = MomentAccumulator::new(l);
        for n in l..w.len() - l {
            acc.push_window(w, n).unwrap();
        }
        acc.finish(1.0).unwrap()
    }

    #[test]
    fn iid_symbols_have_identity_second_moments() {
        let w = iid_pam_sequence(30_002, 5);
        let mom = accumulate_sequence(&w, 1);
        let tol = 3.0 / (mom.sigma_w11.nrows() as f64 * 0.0 + 30_000.0f64).sqrt();
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (mom.sigma_w11[(a, b)] - want).abs() < tol,
                    "sigma_w11[{a},{b}] = {}",
                    mom.sigma_w11[(a, b)]
                );
            }
        }
        assert!((mom.ew2 - 1.0).abs() < tol);
    }

    #[test]
    fn odd_multiplicity_fourth_moments_vanish_for_iid_symbols() {
        let w = iid_pam_sequence(30_002, 6);
        let mom = accumulate_sequence(&w, 1);
        let iset = VolterraIndexSet::build(1);
        let entry = |a: i32, t: (i32, i32, i32)| {
            mom.sigma_w13[((a + 1) as usize, iset.position(t.0, t.1, t.2).unwrap())]
        };
        // Odd multiplicity somewhere -> zero mean.
        for (a, t) in [(0, (1, 0, -1)), (1, (0, 0, 0)), (-1, (1, 1, 0)), (0, (1, 1, 1))] {
            assert!(entry(a, t).abs() < 0.018, "E[w_{a} * w3_{t:?}] = {}", entry(a, t));
        }
        // All-even multiplicities -> product of marginal moments.
        let c = Constellation::pam_gray(3);
        let ew4 = c.levels.iter().map(|u| u.powi(4)).sum::<f64>() / c.n_levels() as f64;
        assert!((entry(0, (0, 0, 0)) - ew4).abs() < 0.06);
        assert!((entry(1, (1, 0, 0)) - 1.0).abs() < 0.04);
        assert!((entry(-1, (1, 1, -1)) - 1.0).abs() < 0.04);
    }

    #[test]
    fn channel_moments_match_direct_autocorrelation() {
        let cfg = ChannelConfig { snr_db: 19.0, seed: 11, ..ChannelConfig::default() };
        let l = 2usize;
        let n_frames = 10;
        let mom = estimate_moments(&cfg, l, n_frames).unwrap();

        // Independent oracle: stationarity-collapsed autocorrelation over the
        // same regenerated noise-free frames.
        let ctx = FrameContext::new(cfg).unwrap();
        let g = cfg.guard_symbols;
        let mut r = vec![0.0f64; 2 * l + 1];
        let mut n_terms = 0usize;
        for f in 0..n_frames {
            let mut rng = substream(cfg.seed, stream::MOMENTS + f as u64);
            for _ in 0..2 {
                let c = &ctx.constellation;
                let syms: Vec<f64> = (0..TRAIN_FRAME_SYMBOLS)
                    .map(|_| c.levels[rng.gen_range(0..c.n_levels())])
                    .collect();
                let padded = crate::chansim::pad_guard(&syms, g);
                let zeros = vec![0.0; padded.len() * cfg.sps];
                let (w, _) = ctx.chain_with_noise(&padded, &zeros);
                for t in 0..TRAIN_FRAME_SYMBOLS {
                    for (d, rd) in r.iter_mut().enumerate() {
                        *rd += w[g + t] * w[g + t + d];
                    }
                }
                n_terms += TRAIN_FRAME_SYMBOLS;
            }
        }
        for rd in r.iter_mut() {
            *rd /= n_terms as f64;
        }
        for a in 0..2 * l + 1 {
            for b in 0..2 * l + 1 {
                assert!(
                    (mom.sigma_w11[(a, b)] - r[a.abs_diff(b)]).abs() < 5e-3,
                    "sigma_w11[{a},{b}] = {} vs r({}) = {}",
                    mom.sigma_w11[(a, b)],
                    a.abs_diff(b),
                    r[a.abs_diff(b)]
                );
                assert_eq!(mom.sigma_w11[(a, b)], mom.sigma_w11[(b, a)]);
            }
        }
        let diag_mean = mom.sigma_w11.diagonal().mean();
        assert!((mom.ew2 - diag_mean).abs() < 1e-9);
        assert!((mom.ez2 - noise_sigma(19.0).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn moment_estimate_requires_enough_windows() {
        let w = iid_pam_sequence(200, 7);
        let mut acc = MomentAccumulator::new(1);
        for n in 1..w.len() - 1 {
            acc.push_window(&w, n).unwrap();
        }
        match acc.finish(1.0) {
            Err(Error::Config(msg)) => assert!(msg.contains("100 per matrix dimension")),
            other => panic!("expected Config error, got {other:?}"),
        }
    }

    fn synthetic_moments(l: usize, ew2: f64, seed: u64) -> SignalMoments {
        // Symmetric positive-definite sigma_w11 and an arbitrary sigma_w13.
        let d1 = 2 * l + 1;
        let d3 = VolterraIndexSet::build(l).len();
        let mut rng = substream(seed, 3);
        let b = DMatrix::from_fn(d1, d1, |_, _| rng.gen_range(-1.0..1.0));
        let sigma_w11 = &b * b.transpose() + DMatrix::identity(d1, d1) * 0.5;
        let sigma_w13 = DMatrix::from_fn(d1, d3, |_, _| rng.gen_range(-0.2..0.2));
        SignalMoments { l, sigma_w11, sigma_w13, ew2, ez2: 0.01 }
    }

    #[test]
    fn identity_model_on_white_input_has_unit_noise_figure() {
        let l = 2;
        let ew2 = 1.3;
        let d1 = 2 * l + 1;
        let mom = SignalMoments {
            l,
            sigma_w11: DMatrix::identity(d1, d1) * ew2,
            sigma_w13: DMatrix::zeros(d1, VolterraIndexSet::build(l).len()),
            ew2,
            ez2: 0.01,
        };
        let f = noise_figure(&VolterraModel::identity(l), &mom).unwrap();
        assert_eq!(f, 1.0);
    }

    #[test]
    fn zero_cubic_part_reduces_to_linear_quotient() {
        let l = 2;
        let mom = synthetic_moments(l, 0.9, 41);
        let mut model = VolterraModel::identity(l);
        let mut rng = substream(9, 4);
        for h in model.h1.iter_mut() {
            *h = rng.gen_range(-1.0..1.0);
        }
        let f = noise_figure(&model, &mom).unwrap();
        let h1 = DVector::from_column_slice(&model.h1);
        let want = h1.norm_squared() * mom.ew2 / (h1.transpose() * &mom.sigma_w11 * &h1)[(0, 0)];
        assert!((f - want).abs() < 1e-12 * want, "{f} vs {want}");
    }

    #[test]
    fn noise_figure_is_scale_free_in_the_weights() {
        let cfg = ChannelConfig { seed: 3, ..ChannelConfig::default() };
        let (model, _) = train_at_snr(&cfg, 1, 19.0, 4).unwrap();
        let mom = estimate_moments(&cfg, 1, 2).unwrap();
        let f = noise_figure(&model, &mom).unwrap();
        let mut scaled = model.clone();
        for h in scaled.h1.iter_mut().chain(scaled.h3.iter_mut()) {
            *h *= 3.0;
        }
        let fs = noise_figure(&scaled, &mom).unwrap();
        assert!((f - fs).abs() < 1e-12 * f, "{f} vs {fs}");
        assert!(f.is_finite() && f > 0.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mom = synthetic_moments(2, 1.0, 8);
        match noise_figure(&VolterraModel::identity(1), &mom) {
            Err(Error::Config(msg)) => assert!(msg.contains("does not match")),
            other => panic!("expected Config error, got {other:?}"),
        }
    }

    #[test]
    fn paired_passes_see_zero_noise_power_on_a_noiseless_channel() {
        let cfg = ChannelConfig { seed: 2, ..ChannelConfig::default() };
        let p = empirical_output_snr(&Passthrough, &cfg, f64::INFINITY, 2).unwrap();
        assert_eq!(p.p_n, 0.0);
        assert_eq!(p.p_n_in, 0.0);
        assert!(p.p_s > 0.5);
    }

    #[test]
    fn passthrough_output_noise_equals_front_end_noise() {
        let cfg = ChannelConfig {
            nl_amplitude: f64::INFINITY,
            seed: 2,
            ..ChannelConfig::default()
        };
        let p = empirical_output_snr(&Passthrough, &cfg, 16.0, 10).unwrap();
        // Identity equalizer: the output split IS the input split (up to
        // the rounding of the paired subtraction on the noise side).
        assert!((p.p_n - p.p_n_in).abs() < 1e-12 * p.p_n);
        assert_eq!(p.p_s, p.p_s_in);
        // Near-Nyquist front end on the linear channel: no enhancement.
        let ez2 = noise_sigma(16.0).powi(2);
        assert!((p.p_n / ez2 - 1.0).abs() < 0.08, "P_N/ez2 = {}", p.p_n / ez2);
        assert!((p.noise_figure() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_noise_figure_is_first_order_exact_on_white_input() {
        // Synthetic world where the formula's assumptions hold exactly:
        // i.i.d. symbols, i.i.d. Gaussian noise, no front end. The measured
        // noise figure must match the analytic one up to the dropped
        // h3-squared terms (which can only push the measurement higher) and
        // Monte-Carlo noise.
        let cfg = ChannelConfig { seed: 5, ..ChannelConfig::default() };
        let (model, _) = train_at_snr(&cfg, 2, 19.0, 30).unwrap();
        let l = 2usize;
        let n = 400_000usize;
        let c = Constellation::pam_gray(3);
        let mut rng = substream(777, 0);
        let w: Vec<f64> = (0..n).map(|_| c.levels[rng.gen_range(0..c.n_levels())]).collect();
        let sig = 0.1f64;
        let z: Vec<f64> =
            (0..n).map(|_| rng.sample::<f64, rand_distr::StandardNormal>(rand_distr::StandardNormal) * sig).collect();
        let y: Vec<f64> = w.iter().zip(&z).map(|(a, b)| a + b).collect();
        let xs = model.apply(&w);
        let xf = model.apply(&y);
        let (mut ps, mut pn, mut psi, mut pni) = (0.0f64, 0.0, 0.0, 0.0);
        for t in l..n - l {
            let xn = xf[t] - xs[t];
            ps += xs[t] * xs[t];
            pn += xn * xn;
            psi += w[t] * w[t];
            pni += z[t] * z[t];
        }
        let f_meas = (psi / pni) / (ps / pn);

        let mut acc = MomentAccumulator::new(l);
        for t in l..n - l {
            acc.push_window(&w, t).unwrap();
        }
        let f_an = noise_figure(&model, &acc.finish(sig * sig).unwrap()).unwrap();
        let gap_db = 10.0 * (f_meas / f_an).log10();
        assert!(gap_db > -0.02, "measured below analytic: {gap_db} dB");
        assert!(gap_db < 0.15, "first-order prediction off by {gap_db} dB");
    }

    #[test]
    fn analytic_noise_figure_matches_paired_measurement() {
        // Moments and measurement taken at the same operating point, so both
        // sides describe the same front end.
        let cfg = ChannelConfig { seed: 5, ..ChannelConfig::default() };
        let (model, _) = train_at_snr(&cfg, 2, 19.0, 30).unwrap();
        let op_cfg = ChannelConfig { snr_db: 18.0, ..cfg };
        let mom = estimate_moments(&op_cfg, 2, 30).unwrap();
        let analytic = 10.0 * noise_figure(&model, &mom).unwrap().log10();
        let p = empirical_output_snr(&model, &cfg, 18.0, 150).unwrap();
        let empirical = 10.0 * p.noise_figure().log10();
        assert!(
            (analytic - empirical).abs() < 0.2,
            "analytic {analytic:.3} dB vs empirical {empirical:.3} dB"
        );
    }

    #[test]
    fn linear_channel_penalties_vanish_and_split_additively() {
        // Degenerate limit: nonlinearity off, model fitted noise-free on the
        // same linear channel (a transparent inverse, no Wiener shrinkage).
        // All three curves must then coincide up to Monte-Carlo noise.
        let cfg = ChannelConfig {
            nl_amplitude: f64::INFINITY,
            seed: 1,
            ..ChannelConfig::default()
        };
        let code = LdpcCode::desk_default().unwrap();
        let (model, _) = train_at_snr(&cfg, 2, f64::INFINITY, 30).unwrap();
        let grid = [16.25, 16.75, 17.25, 17.75];
        let rep = penalty_decomposition(&cfg, &code, &model, &grid, 150).unwrap();
        assert_eq!(rep.total_db, rep.ne_penalty_db + rep.nl_penalty_db);
        assert!(rep.nl_penalty_db.abs() < 0.05, "NL penalty {} dB", rep.nl_penalty_db);
        assert!(rep.ne_penalty_db >= -0.05, "NE penalty {} dB", rep.ne_penalty_db);
        assert!(rep.total_db.is_finite() && rep.nf_db.is_finite());
        assert_eq!(rep.train_snr_db, f64::INFINITY);
    }
}
