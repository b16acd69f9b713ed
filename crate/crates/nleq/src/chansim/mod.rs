//! Link-level channel simulation.
//!
//! Transmit chain: bits -> Gray-labeled 8-PAM per rail -> 2-SPS RRC shaping
//! -> memoryless saturating nonlinearity -> AWGN. Receive chain: matched RRC
//! filter -> fractionally-spaced adaptive FIR -> symbol-rate estimates ->
//! soft demapper. I and Q are two independent real PAM streams sharing one
//! codeword's bits, interleaved I-first.

pub mod channel;
pub mod constellation;
pub mod demap;
pub mod frame;
pub mod receiver;
pub mod rrc;

pub use channel::{apply_nonlinearity, gaussian_noise, noise_sigma};
pub use constellation::Constellation;
pub use demap::{soft_demap, SoftDemapConfig};
pub use frame::{
    deinterleave, exact_pam_ber, interleave, pad_guard, prefec_bit_errors, FrameContext,
    Passthrough, SymbolEqualizer, Variant, VariantOutput,
};
pub use receiver::LinearReceiver;
pub use rrc::{convolve, filter_aligned, rrc_shape, rrc_taps, FrameSignal};

use crate::{Error, Result};

/// Default sinusoid scale, calibrated so the Volterra-fit strength ratio
/// `E[w^2] |h3| / |h1|` lands near 0.067 (see the `calibrate` subcommand).
pub const DEFAULT_NL_AMPLITUDE: f64 = 0.9;

/// Channel and front-end parameters for one run.
///
/// Deserializes from the `[channel]` section of an experiment config;
/// missing keys take the defaults below, unknown keys are rejected.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Samples per symbol (2).
    pub sps: usize,
    /// RRC roll-off, in (0, 1).
    pub rolloff: f64,
    /// RRC span in symbols (tap count = span * sps + 1).
    pub rrc_span_symbols: usize,
    /// Sinusoid scale A in f(u) = A sin(u/A); +inf disables the nonlinearity.
    pub nl_amplitude: f64,
    /// SNR in dB at the linear-filter output; +inf disables noise.
    pub snr_db: f64,
    /// Adaptive FIR length (odd).
    pub fir_len: usize,
    /// Base RNG seed; all streams (pilots, noise, training) derive from it.
    pub seed: u64,
    /// Zero symbols padded on each side of every frame, per dimension.
    /// Covers filter transients and equalizer windows; excluded from BER.
    pub guard_symbols: usize,
    /// Pilot preamble length for the FIR fit.
    pub pilot_symbols: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            sps: 2,
            rolloff: 0.2,
            rrc_span_symbols: 16,
            nl_amplitude: DEFAULT_NL_AMPLITUDE,
            snr_db: 16.0,
            fir_len: 17,
            seed: 0,
            guard_symbols: 16,
            pilot_symbols: 4096,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sps < 2 {
            return Err(Error::Config(format!("sps must be >= 2, got {}", self.sps)));
        }
        if !(self.rolloff > 0.0 && self.rolloff < 1.0) {
            return Err(Error::Config(format!("rolloff must be in (0,1), got {}", self.rolloff)));
        }
        if self.rrc_span_symbols < 8 {
            return Err(Error::Config(format!(
                "rrc_span_symbols must be >= 8, got {}",
                self.rrc_span_symbols
            )));
        }
        if !(self.nl_amplitude > 0.0) {
            return Err(Error::Config(format!(
                "nl_amplitude must be positive, got {}",
                self.nl_amplitude
            )));
        }
        if self.fir_len % 2 == 0 || self.fir_len == 0 {
            return Err(Error::Config(format!("fir_len must be odd, got {}", self.fir_len)));
        }
        if self.guard_symbols < 8 {
            return Err(Error::Config(format!(
                "guard_symbols must be >= 8, got {}",
                self.guard_symbols
            )));
        }
        if self.snr_db.is_nan() {
            return Err(Error::Config("snr_db must not be NaN".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ChannelConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let ok = ChannelConfig::default();
        for bad in [
            ChannelConfig { sps: 1, ..ok },
            ChannelConfig { rolloff: 0.0, ..ok },
            ChannelConfig { rolloff: 1.0, ..ok },
            ChannelConfig { rrc_span_symbols: 4, ..ok },
            ChannelConfig { nl_amplitude: 0.0, ..ok },
            ChannelConfig { nl_amplitude: -1.0, ..ok },
            ChannelConfig { fir_len: 16, ..ok },
            ChannelConfig { guard_symbols: 2, ..ok },
            ChannelConfig { snr_db: f64::NAN, ..ok },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        // Infinite amplitude / SNR are valid sentinels for "off".
        ChannelConfig { nl_amplitude: f64::INFINITY, snr_db: f64::INFINITY, ..ok }
            .validate()
            .unwrap();
    }
}
