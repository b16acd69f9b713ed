//! 1st+3rd-order Volterra equalizer: canonical cubic index set, streaming
//! MMSE weight fit, and symbol-rate application.
//!
//! The equalizer output for symbol n is
//!
//! ```text
//! xhat[n] = sum_i h1[i]*y[n+i]  +  sum_{(i,j,k)} h3[ijk]*y[n+i]*y[n+j]*y[n+k]
//! ```
//!
//! with i in [-L, L] and (i, j, k) ranging over the canonical (sorted)
//! triples, one per multiset of three delays. The weights minimize the
//! mean-square error against known transmit amplitudes, which makes the fit
//! residual orthogonal to every feature on the training set — the property
//! the noise-figure analysis in [`crate::noisefig`] builds on.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::chansim::{pad_guard, ChannelConfig, FrameContext, SymbolEqualizer};
use crate::rng::{stream, substream};
use crate::{Error, Result};

/// Ordered index set of the third-order products: every triple (i, j, k)
/// with -L <= k <= j <= i <= L, in ascending lexicographic order. One entry
/// per multiset of three delays, so the size is C(2L+3, 3).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VolterraIndexSet {
    pub l: usize,
    pub triples: Vec<[i32; 3]>,
}

impl VolterraIndexSet {
    pub fn build(l: usize) -> Self {
        let li = l as i32;
        let mut triples = Vec::new();
        for i in -li..=li {
            for j in -li..=i {
                for k in -li..=j {
                    triples.push([i, j, k]);
                }
            }
        }
        VolterraIndexSet { l, triples }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Number of linear taps, 2L+1.
    pub fn n_linear(&self) -> usize {
        2 * self.l + 1
    }

    /// Position of the triple (i, j, k) in the set; `None` unless the triple
    /// is canonical (i >= j >= k) and within [-L, L]. Callers resolving a
    /// symmetric-tensor subscript must sort it first or treat `None` as "this
    /// ordering names no stored coefficient".
    pub fn position(&self, i: i32, j: i32, k: i32) -> Option<usize> {
        if i < j || j < k {
            return None;
        }
        self.triples.binary_search(&[i, j, k]).ok()
    }
}

/// Linear and cubic feature vectors for output index `n` of sequence `y`:
/// `y1[i] = y[n+i]`, `y3[t] = y[n+i]*y[n+j]*y[n+k]` in index-set order.
/// The window [n-L, n+L] must lie inside the sequence; guard padding is the
/// caller's job.
pub fn build_features(y: &[f64], n: usize, iset: &VolterraIndexSet) -> Result<(Vec<f64>, Vec<f64>)> {
    let l = iset.l;
    if n < l || n + l >= y.len() {
        return Err(Error::Range(format!(
            "feature window [{n}-{l}, {n}+{l}] leaves the sequence of length {}",
            y.len()
        )));
    }
    let li = l as i32;
    let w = &y[n - l..=n + l];
    let y1 = w.to_vec();
    let y3 = iset
        .triples
        .iter()
        .map(|t| w[(t[0] + li) as usize] * w[(t[1] + li) as usize] * w[(t[2] + li) as usize])
        .collect();
    Ok((y1, y3))
}

/// Fitted Volterra weights: linear taps `h1` (length 2L+1, delay -L first)
/// and cubic weights `h3` in index-set order.
#[derive(Debug, Clone)]
pub struct VolterraModel {
    pub h1: Vec<f64>,
    pub h3: Vec<f64>,
    pub index_set: VolterraIndexSet,
    pub train_snr_db: f64,
}

impl VolterraModel {
    /// Pass-through model: unit tap at delay 0, no cubic terms.
    pub fn identity(l: usize) -> Self {
        let index_set = VolterraIndexSet::build(l);
        let mut h1 = vec![0.0; index_set.n_linear()];
        h1[l] = 1.0;
        let h3 = vec![0.0; index_set.len()];
        VolterraModel { h1, h3, index_set, train_snr_db: f64::INFINITY }
    }

    /// Equalize a symbol-rate sequence; out-of-range window reads are zero,
    /// so callers should keep real data away from the first and last L slots
    /// (the guard region serves exactly that purpose).
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let l = self.index_set.l as i64;
        let n = y.len() as i64;
        let get = |idx: i64| if idx < 0 || idx >= n { 0.0 } else { y[idx as usize] };
        (0..n)
            .map(|c| {
                let mut acc = 0.0;
                for (t, &h) in self.h1.iter().enumerate() {
                    acc += h * get(c + t as i64 - l);
                }
                for (t, tri) in self.index_set.triples.iter().enumerate() {
                    acc += self.h3[t]
                        * get(c + tri[0] as i64)
                        * get(c + tri[1] as i64)
                        * get(c + tri[2] as i64);
                }
                acc
            })
            .collect()
    }

    /// Strength of the fitted cubic part relative to the linear part,
    /// `ew2 * |h3| / |h1|` (Euclidean norms). The channel drive level is
    /// calibrated so this lands near 0.067.
    pub fn nonlinear_ratio(&self, ew2: f64) -> f64 {
        let n1: f64 = self.h1.iter().map(|v| v * v).sum::<f64>().sqrt();
        let n3: f64 = self.h3.iter().map(|v| v * v).sum::<f64>().sqrt();
        ew2 * n3 / n1
    }

    /// Write the weights as plain text: a `volterra L train_snr` header line,
    /// then one line each for h1 and h3 (space-separated, shortest-roundtrip
    /// formatting, so a reload is bit-exact).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "volterra {} {:?}", self.index_set.l, self.train_snr_db);
        for (name, v) in [("h1", &self.h1), ("h3", &self.h3)] {
            let _ = write!(s, "{name}");
            for w in v {
                let _ = write!(s, " {w:?}");
            }
            let _ = writeln!(s);
        }
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Config("empty weight file".into()))?;
        let mut hp = header.split_whitespace();
        if hp.next() != Some("volterra") {
            return Err(Error::Config("not a volterra weight file".into()));
        }
        let l: usize = hp
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Config("bad L in weight file header".into()))?;
        let train_snr_db: f64 = hp
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Config("bad training SNR in weight file header".into()))?;
        let mut vecs: Vec<Vec<f64>> = Vec::new();
        for name in ["h1", "h3"] {
            let line =
                lines.next().ok_or_else(|| Error::Config(format!("missing {name} line")))?;
            let mut it = line.split_whitespace();
            if it.next() != Some(name) {
                return Err(Error::Config(format!("expected {name} line")));
            }
            let vals: std::result::Result<Vec<f64>, _> = it.map(|v| v.parse()).collect();
            vecs.push(vals.map_err(|_| Error::Config(format!("bad value on {name} line")))?);
        }
        let h3 = vecs.pop().unwrap();
        let h1 = vecs.pop().unwrap();
        let index_set = VolterraIndexSet::build(l);
        if h1.len() != index_set.n_linear() || h3.len() != index_set.len() {
            return Err(Error::Config("weight counts do not match header L".into()));
        }
        Ok(VolterraModel { h1, h3, index_set, train_snr_db })
    }
}

impl SymbolEqualizer for VolterraModel {
    fn equalize(&self, v: &[f64]) -> Vec<f64> {
        self.apply(v)
    }
}

/// Streaming normal-equation accumulator over the stacked (linear, cubic)
/// feature vector: memory stays O(d^2) in the feature count d no matter how
/// long the training run is.
#[derive(Debug, Clone)]
pub struct GramAccumulator {
    iset: VolterraIndexSet,
    dim: usize,
    /// dim x dim Gram sum, upper triangle maintained.
    r: Vec<f64>,
    /// Feature-target cross sums.
    p: Vec<f64>,
    n_rows: usize,
    sum_x2: f64,
    /// Scratch feature row.
    phi: Vec<f64>,
}

impl GramAccumulator {
    pub fn new(iset: VolterraIndexSet) -> Self {
        let dim = iset.n_linear() + iset.len();
        GramAccumulator {
            iset,
            dim,
            r: vec![0.0; dim * dim],
            p: vec![0.0; dim],
            n_rows: 0,
            sum_x2: 0.0,
            phi: vec![0.0; dim],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn index_set(&self) -> &VolterraIndexSet {
        &self.iset
    }

    /// Add one training row: the feature window centered at `y[n]` with
    /// target amplitude `x`.
    pub fn push_window(&mut self, y: &[f64], n: usize, x: f64) -> Result<()> {
        let l = self.iset.l;
        if n < l || n + l >= y.len() {
            return Err(Error::Range(format!(
                "feature window [{n}-{l}, {n}+{l}] leaves the sequence of length {}",
                y.len()
            )));
        }
        let li = l as i32;
        let w = &y[n - l..=n + l];
        let nl = self.iset.n_linear();
        self.phi[..nl].copy_from_slice(w);
        for (t, tri) in self.iset.triples.iter().enumerate() {
            self.phi[nl + t] =
                w[(tri[0] + li) as usize] * w[(tri[1] + li) as usize] * w[(tri[2] + li) as usize];
        }
        let d = self.dim;
        for a in 0..d {
            let fa = self.phi[a];
            self.p[a] += x * fa;
            let row = &mut self.r[a * d + a..(a + 1) * d];
            for (rb, &pb) in row.iter_mut().zip(&self.phi[a..]) {
                *rb += fa * pb;
            }
        }
        self.n_rows += 1;
        self.sum_x2 += x * x;
        Ok(())
    }
}

/// Diagnostics of a completed fit.
#[derive(Debug, Clone, Copy)]
pub struct FitReport {
    pub n_rows: usize,
    /// On-sample mean-square error E[(xhat - x)^2].
    pub train_mse: f64,
    /// On-sample target power E[x^2].
    pub ex2: f64,
    /// max over features of |E[(xhat - x) * feature]| on the training set.
    pub orth_residual: f64,
    pub ridge: f64,
}

/// Solve the accumulated normal equations for the MMSE weights.
///
/// The solve applies a ridge of 1e-8 * trace/dim (cubic features are nearly
/// collinear at high SNR), then iteratively refines against the unridged
/// system so the residual-feature correlations — which the plain ridged
/// solution leaves at about ridge * |h| — drop to solver precision.
pub fn fit_mmse(acc: GramAccumulator, train_snr_db: f64) -> Result<(VolterraModel, FitReport)> {
    let d = acc.dim;
    if acc.n_rows < 10 * d {
        return Err(Error::Config(format!(
            "{} training rows for {d} features; need at least {}",
            acc.n_rows,
            10 * d
        )));
    }
    let n = acc.n_rows as f64;
    let mut r = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v = acc.r[a * d + b] / n;
            r[(a, b)] = v;
            r[(b, a)] = v;
        }
    }
    let p = DVector::from_iterator(d, acc.p.iter().map(|v| v / n));
    let ex2 = acc.sum_x2 / n;
    let trace = r.trace();
    let ridge = 1e-8 * trace / d as f64;
    let mut rl = r.clone();
    for a in 0..d {
        rl[(a, a)] += ridge;
    }
    let max_diag = (0..d).map(|a| r[(a, a)]).fold(0.0, f64::max);
    let chol = rl.cholesky().ok_or_else(|| {
        Error::Numerical(format!(
            "normal matrix not positive definite with ridge {ridge:.3e}; \
             condition estimate above {:.3e}",
            max_diag / ridge
        ))
    })?;

    let mut h = chol.solve(&p);
    let mut best_h = h.clone();
    let mut best_res = f64::INFINITY;
    let tol = 1e-12 * ex2.max(1e-300);
    for _ in 0..40 {
        let resid = &p - &r * &h;
        let m = resid.amax();
        if m < best_res {
            best_res = m;
            best_h.copy_from(&h);
        } else {
            // Refinement stalled at the roundoff floor; keep the best seen.
            break;
        }
        if m < tol {
            break;
        }
        h += chol.solve(&resid);
    }
    let h = best_h;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("fit produced non-finite weights".into()));
    }
    let train_mse = ex2 - 2.0 * h.dot(&p) + (&r * &h).dot(&h);
    let nl = acc.iset.n_linear();
    let h1 = h.as_slice()[..nl].to_vec();
    let h3 = h.as_slice()[nl..].to_vec();
    let report =
        FitReport { n_rows: acc.n_rows, train_mse, ex2, orth_residual: best_res, ridge };
    Ok((VolterraModel { h1, h3, index_set: acc.iset, train_snr_db }, report))
}

/// Symbols per rail in one training frame — one desk codeword's worth
/// (4200 bits / 3 bits per symbol / 2 rails).
pub const TRAIN_FRAME_SYMBOLS: usize = 700;

/// Fit Volterra weights on labeled data generated through the physical chain
/// (noise ahead of the equalizer) at `snr_db`; `cfg.snr_db` is overridden for
/// the whole training pass, pilots included. Deterministic per `cfg.seed`.
pub fn train_at_snr(
    cfg: &ChannelConfig,
    l: usize,
    snr_db: f64,
    n_frames: usize,
) -> Result<(VolterraModel, FitReport)> {
    if n_frames == 0 {
        return Err(Error::Config("n_frames must be at least 1".into()));
    }
    if cfg.guard_symbols < l {
        return Err(Error::Config(format!(
            "guard of {} symbols cannot cover the L = {l} feature window",
            cfg.guard_symbols
        )));
    }
    let mut tcfg = *cfg;
    tcfg.snr_db = snr_db;
    let ctx = FrameContext::new(tcfg)?;
    let g = ctx.cfg.guard_symbols;
    let levels = ctx.constellation.levels.clone();
    let mut acc = GramAccumulator::new(VolterraIndexSet::build(l));
    for f in 0..n_frames {
        let mut rng = substream(cfg.seed, stream::VOLTERRA_TRAIN + f as u64);
        for _rail in 0..2 {
            let x: Vec<f64> = (0..TRAIN_FRAME_SYMBOLS)
                .map(|_| levels[rng.gen_range(0..levels.len())])
                .collect();
            let padded = pad_guard(&x, g);
            let (vc, vn) = ctx.chain_one_dim(&padded, &mut rng);
            let v: Vec<f64> = vc.iter().zip(&vn).map(|(a, b)| a + b).collect();
            for (t, &xt) in x.iter().enumerate() {
                acc.push_window(&v, g + t, xt)?;
            }
        }
    }
    fit_mmse(acc, snr_db)
}
