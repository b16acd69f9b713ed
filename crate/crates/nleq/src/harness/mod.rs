//! Experiment driver: configuration, the Monte-Carlo BER engine, the
//! experiment pipelines behind each CLI subcommand, and CSV/SVG reporting.

pub mod config;
pub mod csvout;
pub mod experiments;
pub mod svg;
pub mod waterfall;

pub use config::{CalibrateConfig, EqKind, EqualizerConfig, ExperimentConfig, SweepConfig};
pub use experiments::{
    calibrate_nonlinearity, load_code, run_final_comparison, run_penalty,
    run_training_snr_sweep, run_waterfall, CalibrationReport, ComparisonReport,
};
pub use waterfall::{
    required_snr, simulate_curve, simulate_point, BerCurve, BerPoint, BpDecoder, EqPlan,
    FrameDecoder, EARLY_STOP_ERRORS,
};
