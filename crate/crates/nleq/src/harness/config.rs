//! Experiment configuration: a TOML file with a handful of sections, strict
//! about unknown keys so typos fail loudly instead of silently running the
//! default. Every command is a pure function of (config, seed), so the
//! config file plus the CLI overrides fully determine all outputs.

use std::path::Path;

use serde::Deserialize;

use crate::chansim::ChannelConfig;
use crate::nnbp::{Schedule, StageDims, TrainHyper};
use crate::{Error, Result};

/// Which receiver a waterfall run puts between the linear front end and the
/// BP decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EqKind {
    /// Linear front end only.
    None,
    /// Volterra symbol equalizer ahead of a plain BP decoder.
    Volterra,
    /// Iterative network + BP equalizer replacing the plain decoder.
    NnBp,
}

/// Equalizer selection and its training knobs. Only the fields relevant to
/// `kind` are read; the rest may stay at their defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EqualizerConfig {
    pub kind: EqKind,
    /// Volterra memory length (window 2l+1).
    pub l: usize,
    /// Volterra training SNR in dB — the "optimal" operating point when a
    /// single model serves the whole curve.
    pub vlt_train_snr_db: f64,
    /// Frames per Volterra fit (143 frames x 2 rails x 700 symbols gives
    /// the ~2e5-symbol design load of the normal equations).
    pub vlt_train_frames: usize,
    /// Refit the Volterra model at each grid point's SNR instead of reusing
    /// one model.
    pub per_snr: bool,
    /// Load weights from this file instead of training (Volterra or NN text
    /// format matching `kind`). Empty means train fresh.
    pub weights: String,
    /// NN window half-length.
    pub window_l: usize,
    /// NN hidden widths.
    pub n_q: usize,
    pub n_r: usize,
    /// NN stage count and BP iteration split (n_bn after each non-final
    /// stage, n_res after the final one).
    pub n_stages: usize,
    pub n_bn: usize,
    pub n_res: usize,
    /// Per-magnitude-bit loss weights (m_bits - 1 entries).
    pub lambda: Vec<f64>,
    /// NN training SNR in dB.
    pub nn_train_snr_db: f64,
    /// NN training set size, batch size, epochs, Adam step.
    pub nn_train_frames: usize,
    pub nn_batch_frames: usize,
    pub nn_epochs: usize,
    pub nn_step: f64,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        let hyper = TrainHyper::default();
        let dims = StageDims::default();
        let sched = Schedule::default();
        EqualizerConfig {
            kind: EqKind::None,
            l: 4,
            vlt_train_snr_db: 20.4,
            vlt_train_frames: 143,
            per_snr: false,
            weights: String::new(),
            window_l: dims.l,
            n_q: dims.n_q,
            n_r: dims.n_r,
            n_stages: sched.n_stages,
            n_bn: sched.n_bn,
            n_res: sched.n_res,
            lambda: sched.lambda,
            nn_train_snr_db: hyper.train_snr_db,
            nn_train_frames: hyper.n_frames,
            nn_batch_frames: hyper.batch_frames,
            nn_epochs: hyper.epochs,
            nn_step: hyper.step,
        }
    }
}

impl EqualizerConfig {
    /// NN stage geometry (the demapper fixes bits per symbol at 3).
    pub fn dims(&self) -> StageDims {
        StageDims { l: self.window_l, m_bits: 3, n_q: self.n_q, n_r: self.n_r }
    }

    /// NN stage/iteration schedule.
    pub fn schedule(&self) -> Schedule {
        Schedule {
            n_stages: self.n_stages,
            n_bn: self.n_bn,
            n_res: self.n_res,
            lambda: self.lambda.clone(),
        }
    }

    /// NN optimizer hyperparameters.
    pub fn hyper(&self) -> TrainHyper {
        TrainHyper {
            train_snr_db: self.nn_train_snr_db,
            n_frames: self.nn_train_frames,
            batch_frames: self.nn_batch_frames,
            epochs: self.nn_epochs,
            step: self.nn_step,
            ..TrainHyper::default()
        }
    }
}

/// Training-SNR sweep grid for the penalty-trade-off experiment.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub train_snr_grid: Vec<f64>,
    /// Frames for the shared input-moment estimate.
    pub moment_frames: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            train_snr_grid: vec![17.0, 18.0, 19.0, 20.0, 21.0, 22.0],
            moment_frames: 40,
        }
    }
}

/// Bisection bracket for the nonlinearity drive-level calibration.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    /// Bracket on the sinusoid scale A (ratio is decreasing in A).
    pub a_lo: f64,
    pub a_hi: f64,
    /// Target Volterra strength ratio E[w^2]|h3|/|h1|.
    pub target: f64,
    /// Acceptance band around the target.
    pub band_lo: f64,
    pub band_hi: f64,
    /// SNR the calibration fit runs at, in dB.
    pub train_snr_db: f64,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        CalibrateConfig {
            a_lo: 0.3,
            a_hi: 8.0,
            target: 0.067,
            band_lo: 0.05,
            band_hi: 0.085,
            train_snr_db: 19.0,
        }
    }
}

/// Everything one experiment run needs. Loaded from TOML; any key not
/// listed here (or misspelled) is an error.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base RNG seed for every stream of the run. The `[channel]` section's
    /// own seed is overwritten by this value on load.
    pub seed: u64,
    /// Directory all CSV/SVG/weight outputs go into.
    pub output_dir: String,
    /// alist file of the LDPC code; empty selects the built-in desk code.
    pub code_path: String,
    /// Ascending SNR grid in dB for waterfall and penalty runs.
    pub snr_grid: Vec<f64>,
    /// Monte-Carlo budget per grid point (early stop may use fewer).
    pub frames_per_point: usize,
    /// Post-BP BER the required-SNR readings interpolate to.
    pub target_ber: f64,
    pub channel: ChannelConfig,
    pub equalizer: EqualizerConfig,
    pub sweep: SweepConfig,
    pub calibrate: CalibrateConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut channel = ChannelConfig::default();
        let seed = 1;
        channel.seed = seed;
        ExperimentConfig {
            seed,
            output_dir: "out".into(),
            code_path: String::new(),
            snr_grid: (0..13).map(|i| 16.25 + 0.5 * i as f64).collect(),
            frames_per_point: 200,
            target_ber: 1e-4,
            channel,
            equalizer: EqualizerConfig::default(),
            sweep: SweepConfig::default(),
            calibrate: CalibrateConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parse a config, apply the defaults, and propagate the run seed into
    /// the channel section.
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))?;
        cfg.channel.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        if self.snr_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("snr_grid must be strictly increasing".into()));
        }
        if self.frames_per_point == 0 {
            return Err(Error::Config("frames_per_point must be at least 1".into()));
        }
        if !(self.target_ber > 0.0 && self.target_ber < 0.5) {
            return Err(Error::Config(format!(
                "target_ber {} outside (0, 0.5)",
                self.target_ber
            )));
        }
        let eq = &self.equalizer;
        if eq.kind == EqKind::NnBp {
            eq.dims().validate()?;
            eq.schedule().validate()?;
        }
        let cal = &self.calibrate;
        if !(cal.a_lo > 0.0 && cal.a_hi > cal.a_lo) {
            return Err(Error::Config(format!(
                "calibration bracket [{}, {}] must be positive and increasing",
                cal.a_lo, cal.a_hi
            )));
        }
        if !(cal.band_lo <= cal.target && cal.target <= cal.band_hi) {
            return Err(Error::Config(format!(
                "calibration target {} outside its band [{}, {}]",
                cal.target, cal.band_lo, cal.band_hi
            )));
        }
        Ok(())
    }
}
