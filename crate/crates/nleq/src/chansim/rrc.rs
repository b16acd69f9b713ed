//! Root-raised-cosine pulse shaping.

use super::ChannelConfig;

/// A real-valued waveform at `sps` samples per symbol.
///
/// After shaping, frames are trimmed by the filter group delay so that sample
/// `n * sps` lines up with symbol `n`; the length is exactly
/// `n_symbols * sps`.
#[derive(Debug, Clone)]
pub struct FrameSignal {
    pub samples: Vec<f64>,
    pub sps: usize,
    pub n_symbols: usize,
}

/// Unit-energy RRC taps spanning `span_symbols` symbols at `sps`.
///
/// The tap count is `span_symbols * sps + 1` (odd, symmetric).
pub fn rrc_taps(span_symbols: usize, sps: usize, rolloff: f64) -> Vec<f64> {
    let n_taps = span_symbols * sps + 1;
    let half = (n_taps - 1) as f64 / 2.0;
    let beta = rolloff;
    let mut taps: Vec<f64> = (0..n_taps)
        .map(|k| {
            // Time in symbol units, centered.
            let t = (k as f64 - half) / sps as f64;
            rrc_value(t, beta)
        })
        .collect();
    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let scale = energy.sqrt().recip();
    for h in &mut taps {
        *h *= scale;
    }
    taps
}

fn rrc_value(t: f64, beta: f64) -> f64 {
    use std::f64::consts::PI;
    if t.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    // Singular point at |t| = 1/(4 beta).
    let ts = 1.0 / (4.0 * beta);
    if (t.abs() - ts).abs() < 1e-9 {
        let a = (1.0 + 2.0 / PI) * (PI / (4.0 * beta)).sin();
        let b = (1.0 - 2.0 / PI) * (PI / (4.0 * beta)).cos();
        return beta / 2f64.sqrt() * (a + b);
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// Full linear convolution.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (j, &hj) in h.iter().enumerate() {
            y[i + j] += xi * hj;
        }
    }
    y
}

/// Convolve and drop the group delay on both ends so the output has the same
/// alignment (and length) as the input.
pub fn filter_aligned(x: &[f64], h: &[f64]) -> Vec<f64> {
    debug_assert!(h.len() % 2 == 1);
    let delay = (h.len() - 1) / 2;
    let full = convolve(x, h);
    full[delay..delay + x.len()].to_vec()
}

/// Upsample symbols to `sps` samples per symbol and pulse-shape with the
/// transmit RRC. Output sample `n * sps` carries the peak of symbol `n`.
pub fn rrc_shape(symbols: &[f64], cfg: &ChannelConfig) -> FrameSignal {
    let sps = cfg.sps;
    let mut up = vec![0.0; symbols.len() * sps];
    for (n, &x) in symbols.iter().enumerate() {
        up[n * sps] = x;
    }
    let taps = rrc_taps(cfg.rrc_span_symbols, sps, cfg.rolloff);
    FrameSignal { samples: filter_aligned(&up, &taps), sps, n_symbols: symbols.len() }
}
