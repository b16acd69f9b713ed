//! Fractionally-spaced linear receiver: matched filter plus adaptive FIR.
//!
//! The FIR taps come from a data-aided block least-squares fit against a
//! known pilot sequence, which reaches the same fixed point as a converged
//! LMS adaptation but deterministically.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Symbol-rate linear front end: `fir_len` taps over the 2-SPS matched-filter
/// output, one output per symbol.
#[derive(Debug, Clone)]
pub struct LinearReceiver {
    pub taps: Vec<f64>,
    /// Residual mean-square error on the pilot fit; doubles as the noise
    /// power estimate for the soft demapper.
    pub mse: f64,
}

impl LinearReceiver {
    /// Fit taps by block least squares on pilot symbols.
    ///
    /// `y2` is the matched-filtered signal at `sps` samples per symbol,
    /// aligned so sample `n * sps` belongs to symbol `n`. Only pilot indices
    /// in `[skip, pilots.len() - skip)` enter the fit (edge transients are
    /// excluded). The normal matrix gets a ridge of `1e-8 * trace / dim`.
    pub fn fit(y2: &[f64], pilots: &[f64], sps: usize, fir_len: usize, skip: usize) -> Result<Self> {
        if fir_len % 2 == 0 {
            return Err(Error::Config(format!("fir_len must be odd, got {fir_len}")));
        }
        let n_used = pilots.len().saturating_sub(2 * skip);
        if n_used < 10 * fir_len {
            return Err(Error::Config(format!(
                "pilot block too short: {n_used} usable symbols, need {}",
                10 * fir_len
            )));
        }
        let half = (fir_len - 1) / 2;
        let mut r = DMatrix::<f64>::zeros(fir_len, fir_len);
        let mut p = DVector::<f64>::zeros(fir_len);
        let mut phi = vec![0.0; fir_len];
        for n in skip..pilots.len() - skip {
            fill_window(&mut phi, y2, n * sps, half);
            for i in 0..fir_len {
                p[i] += phi[i] * pilots[n];
                for j in i..fir_len {
                    r[(i, j)] += phi[i] * phi[j];
                }
            }
        }
        for i in 0..fir_len {
            for j in 0..i {
                r[(i, j)] = r[(j, i)];
            }
        }
        let lambda = 1e-8 * r.trace() / fir_len as f64;
        for i in 0..fir_len {
            r[(i, i)] += lambda;
        }
        let chol = r
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("singular FIR normal matrix".into()))?;
        let w = chol.solve(&p);

        // Residual MSE over the same pilot set.
        let mut se = 0.0;
        for n in skip..pilots.len() - skip {
            fill_window(&mut phi, y2, n * sps, half);
            let yhat: f64 = phi.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
            se += (yhat - pilots[n]).powi(2);
        }
        let mse = se / n_used as f64;
        Ok(LinearReceiver { taps: w.iter().copied().collect(), mse })
    }

    /// Apply the FIR: 2-SPS in, one output per symbol. Out-of-range samples
    /// read as zero (frames carry guard symbols, so edges never hold data).
    pub fn apply(&self, y2: &[f64], sps: usize, n_symbols: usize) -> Vec<f64> {
        let half = (self.taps.len() - 1) / 2;
        let mut phi = vec![0.0; self.taps.len()];
        (0..n_symbols)
            .map(|n| {
                fill_window(&mut phi, y2, n * sps, half);
                phi.iter().zip(&self.taps).map(|(a, b)| a * b).sum()
            })
            .collect()
    }
}

fn fill_window(phi: &mut [f64], y2: &[f64], center: usize, half: usize) {
    for (t, slot) in phi.iter_mut().enumerate() {
        let idx = center as isize + t as isize - half as isize;
        *slot = if idx >= 0 && (idx as usize) < y2.len() { y2[idx as usize] } else { 0.0 };
    }
}
