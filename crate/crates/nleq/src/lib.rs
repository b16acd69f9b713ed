//! Link-level simulator and nonlinear equalization library.
//!
//! The library models a pulse-shaped 8-PAM transmission chain (each of the I
//! and Q rails of 64QAM is one independent real PAM stream) impaired by a
//! memoryless sinusoidal nonlinearity and white Gaussian noise, and provides
//! two receivers for it on top of a common linear front end:
//!
//! * [`volterra`] — a 1st+3rd-order Volterra equalizer fitted in closed form,
//!   together with an analytic noise figure ([`noisefig`]) that quantifies the
//!   noise enhancement caused by its 3rd-order taps;
//! * [`nnbp`] — an iterative equalizer that alternates small per-bit neural
//!   networks with belief-propagation decoding steps ([`ldpc`]), trained
//!   end-to-end through the unrolled BP iterations.
//!
//! [`harness`] drives seeded Monte-Carlo BER experiments over either receiver
//! and writes CSV/SVG reports; the `nleq` binary is a thin CLI over it.

pub mod chansim;
pub mod harness;
pub mod ldpc;
pub mod llr;
pub mod nnbp;
pub mod noisefig;
pub mod rng;
pub mod volterra;

/// Saturation bound for every log-likelihood ratio in the system.
///
/// Demapper outputs, BP messages and NN outputs are all clamped to
/// `[-LLR_MAX, LLR_MAX]` so the atanh/exp domains stay finite.
pub const LLR_MAX: f64 = 30.0;

/// Clamp an LLR to the global saturation bound.
#[inline]
pub fn clamp_llr(l: f64) -> f64 {
    l.clamp(-LLR_MAX, LLR_MAX)
}

/// Errors shared by every module of the library.
///
/// The CLI maps the variants onto process exit codes, so keep the set small
/// and stable: `Config` -> 2, `Numerical` -> 3, `Range` -> 4.
#[derive(Debug)]
pub enum Error {
    /// Malformed input: bad config value, bad file contents, shape mismatch.
    Config(String),
    /// A solver or training run failed to produce finite, usable numbers.
    Numerical(String),
    /// A requested target lies outside the computed data (e.g. a BER curve
    /// that never crosses the target).
    Range(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical error: {msg}"),
            Error::Range(msg) => write!(f, "range error: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl Error {
    /// Process exit code for the CLI: 2 for configuration and I/O problems,
    /// 3 for numerical failures, 4 for out-of-range targets.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            Error::Numerical(_) => 3,
            Error::Range(_) => 4,
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
