//! Gray-labeled PAM constellations and the bit-to-symbol mapper.

use crate::{Error, Result};

/// One real PAM constellation with per-bit label partitions.
///
/// Levels are stored in ascending amplitude order and normalized to unit mean
/// power. Labels are sign-magnitude Gray: bit 0 is the sign bit (0 for
/// positive amplitudes), and the remaining `M-1` bits are the reflected Gray
/// code of the magnitude index, so adjacent levels differ in exactly one bit.
#[derive(Debug, Clone)]
pub struct Constellation {
    /// Amplitudes in ascending order, unit mean power.
    pub levels: Vec<f64>,
    /// Bit label (length `m_bits`) of each level, same order as `levels`.
    pub labels: Vec<Vec<u8>>,
    /// Bits per symbol (per dimension).
    pub m_bits: usize,
    /// For each bit m, the level indices whose label bit m is 0 / is 1.
    pub partitions: Vec<(Vec<usize>, Vec<usize>)>,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

impl Constellation {
    /// Gray-labeled 2^M-ary PAM with unit mean power.
    pub fn pam_gray(m_bits: usize) -> Self {
        assert!(m_bits >= 1 && m_bits <= 8);
        let half = 1usize << (m_bits - 1);
        let n_levels = 1usize << m_bits;
        // Unnormalized magnitudes 1, 3, 5, ...; mean square over all levels.
        let power: f64 = (0..half).map(|i| ((2 * i + 1) as f64).powi(2)).sum::<f64>() / half as f64;
        let norm = power.sqrt();

        let mut levels = Vec::with_capacity(n_levels);
        let mut labels = Vec::with_capacity(n_levels);
        for idx in 0..n_levels {
            // Ascending order: idx < half are the negative levels.
            let (sign, mag_idx) = if idx < half {
                (-1.0, half - 1 - idx)
            } else {
                (1.0, idx - half)
            };
            let amp = sign * (2 * mag_idx + 1) as f64 / norm;
            let mut label = Vec::with_capacity(m_bits);
            label.push(u8::from(sign < 0.0));
            let g = gray(mag_idx);
            for b in (0..m_bits.saturating_sub(1)).rev() {
                label.push(((g >> b) & 1) as u8);
            }
            levels.push(amp);
            labels.push(label);
        }

        let mut partitions = Vec::with_capacity(m_bits);
        for m in 0..m_bits {
            let zero = (0..n_levels).filter(|&i| labels[i][m] == 0).collect();
            let one = (0..n_levels).filter(|&i| labels[i][m] == 1).collect();
            partitions.push((zero, one));
        }

        Self { levels, labels, m_bits, partitions }
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Amplitude for one bit label.
    pub fn map_label(&self, bits: &[u8]) -> Result<f64> {
        if bits.len() != self.m_bits {
            return Err(Error::Config(format!(
                "label has {} bits, constellation expects {}",
                bits.len(),
                self.m_bits
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Config("label bits must be 0 or 1".into()));
        }
        self.labels
            .iter()
            .position(|l| l == bits)
            .map(|i| self.levels[i])
            .ok_or_else(|| Error::Config(format!("unknown label {bits:?}")))
    }

    /// Map a flat bit sequence (`m_bits` per symbol) to amplitudes.
    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<f64>> {
        if bits.len() % self.m_bits != 0 {
            return Err(Error::Config(format!(
                "bit count {} is not a multiple of {}",
                bits.len(),
                self.m_bits
            )));
        }
        bits.chunks(self.m_bits).map(|c| self.map_label(c)).collect()
    }

    /// Index of the nearest level (minimum-distance hard decision).
    pub fn hard_decide(&self, xhat: f64) -> usize {
        // Levels are ascending and uniformly spaced; a scan over <= 256
        // entries is not worth replacing.
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &a) in self.levels.iter().enumerate() {
            let d = (xhat - a).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Hard-decision label bits for a sequence of amplitudes.
    pub fn hard_bits(&self, xhat: &[f64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(xhat.len() * self.m_bits);
        for &x in xhat {
            out.extend_from_slice(&self.labels[self.hard_decide(x)]);
        }
        out
    }
}
