//! Per-frame bitwise LLR tensors.

use crate::clamp_llr;

/// Which point of the receive chain a frame of LLRs came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlrKind {
    /// Soft-demapper output.
    R,
    /// NN equalizer output.
    N,
    /// BP decoder output (posterior).
    B,
    /// Accumulated check-to-variable sums.
    U,
}

/// Bitwise LLRs for one frame, indexed `(symbol n, bit m)`.
///
/// The flat layout is row-major in `n`, so `values[n * m_bits + m]` is also
/// the codeword bit index used by the LDPC code: bit `b` of the codeword maps
/// to `(n, m) = (b / M, b % M)`.
#[derive(Debug, Clone)]
pub struct LlrFrame {
    pub n_symbols: usize,
    pub m_bits: usize,
    pub kind: LlrKind,
    pub values: Vec<f64>,
}

impl LlrFrame {
    pub fn zeros(n_symbols: usize, m_bits: usize, kind: LlrKind) -> Self {
        Self { n_symbols, m_bits, kind, values: vec![0.0; n_symbols * m_bits] }
    }

    pub fn from_values(n_symbols: usize, m_bits: usize, kind: LlrKind, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_symbols * m_bits);
        Self { n_symbols, m_bits, kind, values }
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.values[n * self.m_bits + m]
    }

    #[inline]
    pub fn set(&mut self, n: usize, m: usize, v: f64) {
        self.values[n * self.m_bits + m] = v;
    }

    /// Total number of (symbol, bit) entries, i.e. the codeword length.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Clamp every entry to the global LLR bound.
    pub fn saturate(&mut self) {
        for v in &mut self.values {
            *v = clamp_llr(*v);
        }
    }

    /// Hard decisions: bit = 1 where the LLR is negative (positive favors 0).
    pub fn hard_bits(&self) -> Vec<u8> {
        self.values.iter().map(|&l| u8::from(l < 0.0)).collect()
    }
}
