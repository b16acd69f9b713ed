//! Per-frame pipeline: bits through the system variants to soft LLRs.

use rand::Rng;
use statrs::function::erf::erfc;

use super::channel::{apply_nonlinearity, gaussian_noise, noise_sigma};
use super::constellation::Constellation;
use super::demap::{soft_demap, SoftDemapConfig};
use super::receiver::LinearReceiver;
use super::rrc::{filter_aligned, rrc_shape, rrc_taps};
use super::ChannelConfig;
use crate::llr::LlrFrame;
use crate::rng::{stream, substream};
use crate::{Error, Result};

/// System variant: (a) noise before the equalizer (the physical chain),
/// (b) analytic noise-enhancement model (never simulated), (c) noise
/// reinjected after the equalizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    A,
    B,
    C,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Variant::A),
            "b" | "B" => Ok(Variant::B),
            "c" | "C" => Ok(Variant::C),
            other => Err(Error::Config(format!("unknown variant '{other}', expected a, b, or c"))),
        }
    }
}

/// A symbol-domain equalizer applied to one dimension's padded symbol-rate
/// sequence. Output length must equal input length; windows may read into
/// the guard region.
pub trait SymbolEqualizer: Sync {
    fn equalize(&self, v: &[f64]) -> Vec<f64>;
}

/// The plain linear receiver: no further equalization.
#[derive(Debug, Clone, Copy)]
pub struct Passthrough;

impl SymbolEqualizer for Passthrough {
    fn equalize(&self, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }
}

/// Everything fixed for a run at one channel configuration: the trained
/// linear front end and the demapper scale derived from its pilot MSE.
/// Immutable after construction; shared read-only across frame workers.
#[derive(Debug, Clone)]
pub struct FrameContext {
    pub cfg: ChannelConfig,
    pub constellation: Constellation,
    pub receiver: LinearReceiver,
    pub demap: SoftDemapConfig,
}

/// Equalized amplitudes and soft LLRs for one frame (guard stripped,
/// symbols in codeword order: I and Q interleaved, I first).
#[derive(Debug, Clone)]
pub struct VariantOutput {
    pub xhat: Vec<f64>,
    pub llr: LlrFrame,
}

impl FrameContext {
    /// Train the adaptive FIR on a pilot preamble through the full channel
    /// at the configured SNR, and set the demapper scale from the residual
    /// pilot MSE (`rho = 1 / (2 mse)`).
    pub fn new(cfg: ChannelConfig) -> Result<Self> {
        cfg.validate()?;
        let constellation = Constellation::pam_gray(3);
        let mut rng = substream(cfg.seed, stream::PILOT);
        let pilots: Vec<f64> = (0..cfg.pilot_symbols)
            .map(|_| constellation.levels[rng.gen_range(0..constellation.n_levels())])
            .collect();
        let padded = pad_guard(&pilots, cfg.guard_symbols);
        let tx = rrc_shape(&padded, &cfg);
        let mut u = tx.samples;
        apply_nonlinearity(&mut u, cfg.nl_amplitude);
        let z = gaussian_noise(&mut rng, u.len(), noise_sigma(cfg.snr_db));
        for (a, b) in u.iter_mut().zip(&z) {
            *a += b;
        }
        let rrc = rrc_taps(cfg.rrc_span_symbols, cfg.sps, cfg.rolloff);
        let y2 = filter_aligned(&u, &rrc);
        let receiver = LinearReceiver::fit(&y2, &padded, cfg.sps, cfg.fir_len, cfg.guard_symbols)?;
        let demap = SoftDemapConfig::from_noise_power(receiver.mse);
        Ok(FrameContext { cfg, constellation, receiver, demap })
    }

    /// Matched filter + FIR applied separately to the clean (post-NL) signal
    /// and to the given noise realization; returns `(v_clean, v_noise)` at
    /// symbol rate over the padded length. The front end is linear, so the
    /// physical output is exactly `v_clean + v_noise`.
    pub fn chain_with_noise(&self, padded_symbols: &[f64], noise: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let cfg = &self.cfg;
        debug_assert_eq!(noise.len(), padded_symbols.len() * cfg.sps);
        let tx = rrc_shape(padded_symbols, cfg);
        let mut u = tx.samples;
        apply_nonlinearity(&mut u, cfg.nl_amplitude);
        let rrc = rrc_taps(cfg.rrc_span_symbols, cfg.sps, cfg.rolloff);
        let uc = filter_aligned(&u, &rrc);
        let zc = filter_aligned(noise, &rrc);
        let v_clean = self.receiver.apply(&uc, cfg.sps, padded_symbols.len());
        let v_noise = self.receiver.apply(&zc, cfg.sps, padded_symbols.len());
        (v_clean, v_noise)
    }

    /// One dimension through the chain with noise drawn from `rng`.
    pub fn chain_one_dim<R: Rng>(
        &self,
        padded_symbols: &[f64],
        rng: &mut R,
    ) -> (Vec<f64>, Vec<f64>) {
        let z = gaussian_noise(
            rng,
            padded_symbols.len() * self.cfg.sps,
            noise_sigma(self.cfg.snr_db),
        );
        self.chain_with_noise(padded_symbols, &z)
    }

    /// Run one frame of mapped bits through a system variant.
    ///
    /// Variant a: equalizer sees signal + noise. Variant c: equalizer sees
    /// the noise-free signal and the FIR-filtered noise realization is added
    /// back at its output. Variant b has no simulated form.
    pub fn run_variant<R: Rng>(
        &self,
        variant: Variant,
        bits: &[u8],
        eq: &dyn SymbolEqualizer,
        rng: &mut R,
    ) -> Result<VariantOutput> {
        if variant == Variant::B {
            return Err(Error::Config(
                "variant b is analytic-only; use the noise-figure model".into(),
            ));
        }
        let m = self.constellation.m_bits;
        if bits.is_empty() || bits.len() % m != 0 {
            return Err(Error::Config(format!(
                "bit count {} is not a positive multiple of {m}",
                bits.len()
            )));
        }
        let x = self.constellation.map_bits(bits)?;
        let g = self.cfg.guard_symbols;
        let (xi, xq) = deinterleave(&x);
        let mut dims: Vec<Vec<f64>> = Vec::with_capacity(2);
        for dim_syms in [&xi, &xq] {
            let padded = pad_guard(dim_syms, g);
            let (v_clean, v_noise) = self.chain_one_dim(&padded, rng);
            let xhat_padded = match variant {
                Variant::A => {
                    let v_full: Vec<f64> =
                        v_clean.iter().zip(&v_noise).map(|(a, b)| a + b).collect();
                    eq.equalize(&v_full)
                }
                Variant::C => {
                    let mut e = eq.equalize(&v_clean);
                    for (a, b) in e.iter_mut().zip(&v_noise) {
                        *a += b;
                    }
                    e
                }
                Variant::B => unreachable!(),
            };
            dims.push(xhat_padded[g..g + dim_syms.len()].to_vec());
        }
        let xhat = interleave(&dims[0], &dims[1]);
        let llr = soft_demap(&xhat, &self.constellation, self.demap);
        Ok(VariantOutput { xhat, llr })
    }
}

/// Zero-pad `g` guard symbols on each side.
pub fn pad_guard(symbols: &[f64], g: usize) -> Vec<f64> {
    let mut out = vec![0.0; symbols.len() + 2 * g];
    out[g..g + symbols.len()].copy_from_slice(symbols);
    out
}

/// Split a symbol sequence into the even-index (I) and odd-index (Q) rails.
pub fn deinterleave(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let i = x.iter().step_by(2).copied().collect();
    let q = x.iter().skip(1).step_by(2).copied().collect();
    (i, q)
}

/// Inverse of [`deinterleave`].
pub fn interleave(i: &[f64], q: &[f64]) -> Vec<f64> {
    assert!(i.len() == q.len() || i.len() == q.len() + 1);
    let mut out = Vec::with_capacity(i.len() + q.len());
    for k in 0..i.len() {
        out.push(i[k]);
        if k < q.len() {
            out.push(q[k]);
        }
    }
    out
}

/// Count hard-decision (nearest-level) bit errors against the transmitted
/// bits. This is the pre-FEC error count.
pub fn prefec_bit_errors(xhat: &[f64], bits: &[u8], c: &Constellation) -> usize {
    let hard = c.hard_bits(xhat);
    hard.iter().zip(bits).filter(|(a, b)| a != b).count()
}

/// Exact per-bit error rate of nearest-level hard decisions on this
/// constellation under additive Gaussian noise with standard deviation
/// `sigma`, averaged over equiprobable levels and bit positions.
pub fn exact_pam_ber(c: &Constellation, sigma: f64) -> f64 {
    let k = c.levels.len();
    let q = |x: f64| 0.5 * erfc(x / std::f64::consts::SQRT_2);
    // Decision boundaries: midpoints between adjacent levels.
    let bounds: Vec<f64> = (0..k - 1).map(|i| 0.5 * (c.levels[i] + c.levels[i + 1])).collect();
    let mut err = 0.0;
    for i in 0..k {
        for j in 0..k {
            if j == i {
                continue;
            }
            let wrong_bits =
                (0..c.m_bits).filter(|&m| c.labels[i][m] != c.labels[j][m]).count() as f64;
            if wrong_bits == 0.0 {
                continue;
            }
            let lo = if j == 0 { 1.0 } else { q((bounds[j - 1] - c.levels[i]) / sigma) };
            let hi = if j == k - 1 { 0.0 } else { q((bounds[j] - c.levels[i]) / sigma) };
            err += (lo - hi) * wrong_bits;
        }
    }
    err / (k as f64 * c.m_bits as f64)
}
