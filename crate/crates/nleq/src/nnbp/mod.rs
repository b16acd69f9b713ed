//! Iterative NN + belief-propagation equalizer.
//!
//! A stack of small per-bit networks is interleaved with unrolled BP decoder
//! iterations: each stage maps a sliding window of demapper LLRs `l^R` and
//! fed-back posterior LLRs `l^B` to refined bit LLRs `l^N`, which drive the
//! next block of BP iterations. The whole stack is differentiable — training
//! backpropagates a cross-entropy loss on the BP output through the BP
//! tanh-product updates into the network weights ([`graph`]) — so each stage
//! learns to undo residual nonlinear distortion without amplifying the noise
//! that BP has already partially removed.
//!
//! The sign bit of each PAM symbol is barely touched by the odd-symmetric
//! nonlinearity, so it carries no network: its `l^N` is the demapper LLR
//! unchanged, and networks exist only for the magnitude bits `m >= 1`.
//!
//! Frames interleave the I and Q rails (even/odd symbol indices), so a
//! symbol's intersymbol-interference neighbors sit two frame slots apart:
//! window offset `i` of symbol `n` reads frame symbol `n + 2 i`, staying on
//! the symbol's own rail, zero-padded past the rail ends.

mod graph;
mod train;

pub use graph::{backward, full_forward, loss, stage_forward, ForwardRecord};
pub use train::{train, NnBpDecoder, TrainHyper, TrainReport};

use crate::rng::{stream, substream};
use crate::{Error, Result};
use rand::Rng;
use std::path::Path;

/// Tensor sizes shared by every stage of one equalizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageDims {
    /// One-sided window length: a stage sees `2l + 1` same-rail symbols.
    pub l: usize,
    /// Bits per PAM symbol; bit 0 is the sign bit and has no network.
    pub m_bits: usize,
    /// Hidden width of the sliding-window layer.
    pub n_q: usize,
    /// Hidden width of the fully connected layer.
    pub n_r: usize,
}

impl StageDims {
    /// Window length in symbols.
    pub fn window(&self) -> usize {
        2 * self.l + 1
    }

    /// LLR inputs per stream (window symbols times bits per symbol).
    pub fn stream_inputs(&self) -> usize {
        self.window() * self.m_bits
    }

    /// Number of per-bit networks (every bit except the sign bit).
    pub fn n_nets(&self) -> usize {
        self.m_bits - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_bits < 2 {
            return Err(Error::Config(format!(
                "m_bits must be >= 2 (sign bit plus at least one magnitude bit), got {}",
                self.m_bits
            )));
        }
        if self.n_q == 0 || self.n_r == 0 {
            return Err(Error::Config("hidden widths n_q and n_r must be positive".into()));
        }
        Ok(())
    }
}

impl Default for StageDims {
    /// Desk-scale defaults: window of 9 symbols, 8-PAM, 40-wide layers.
    fn default() -> Self {
        StageDims { l: 4, m_bits: 3, n_q: 40, n_r: 40 }
    }
}

/// Weights of one bit's network within a stage.
///
/// Layer 1 slides over the frame: `q = g1(sum_{i,j} wR[k,i,j] tanh(lR/2) +
/// wB[k,i,j] tanh(lB/2) + b1[k])`. Layer 2 is fully connected:
/// `r = g2(w2 q + b2)`. The output is linear: `lN = w3 . r + b3`.
/// `g1 = g2 = ReLU`.
#[derive(Debug, Clone, PartialEq)]
pub struct BitNet {
    /// `n_q x (2l+1) x m_bits`, row-major `[k][i][j]`.
    pub w_r: Vec<f64>,
    /// Same shape as `w_r`, applied to the fed-back posterior stream.
    pub w_b: Vec<f64>,
    /// `n_q`.
    pub b1: Vec<f64>,
    /// `n_r x n_q`, row-major `[k][j]`.
    pub w2: Vec<f64>,
    /// `n_r`.
    pub b2: Vec<f64>,
    /// `n_r`.
    pub w3: Vec<f64>,
    pub b3: f64,
}

impl BitNet {
    fn zeros(dims: &StageDims) -> Self {
        let n_in = dims.stream_inputs();
        BitNet {
            w_r: vec![0.0; dims.n_q * n_in],
            w_b: vec![0.0; dims.n_q * n_in],
            b1: vec![0.0; dims.n_q],
            w2: vec![0.0; dims.n_r * dims.n_q],
            b2: vec![0.0; dims.n_r],
            w3: vec![0.0; dims.n_r],
            b3: 0.0,
        }
    }

    fn n_params(dims: &StageDims) -> usize {
        let n_in = dims.stream_inputs();
        2 * dims.n_q * n_in + dims.n_q + dims.n_r * dims.n_q + 2 * dims.n_r + 1
    }
}

/// One NN stage: a [`BitNet`] per magnitude bit, `nets[m - 1]` serving bit m.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerStage {
    pub dims: StageDims,
    pub nets: Vec<BitNet>,
}

impl EqualizerStage {
    /// All-zero stage; also the gradient / optimizer-moment container shape.
    pub fn zeros(dims: StageDims) -> Self {
        let nets = (0..dims.n_nets()).map(|_| BitNet::zeros(&dims)).collect();
        EqualizerStage { dims, nets }
    }

    /// Total parameter count.
    pub fn n_params(&self) -> usize {
        self.nets.len() * BitNet::n_params(&self.dims)
    }

    /// Flatten every parameter in the canonical order used by the weight
    /// files and the optimizer: per net (bit 1 upward): w_r, w_b, b1, w2,
    /// b2, w3, b3.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for net in &self.nets {
            out.extend_from_slice(&net.w_r);
            out.extend_from_slice(&net.w_b);
            out.extend_from_slice(&net.b1);
            out.extend_from_slice(&net.w2);
            out.extend_from_slice(&net.b2);
            out.extend_from_slice(&net.w3);
            out.push(net.b3);
        }
        out
    }

    /// Inverse of [`to_flat`](Self::to_flat).
    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Config(format!(
                "flat parameter vector has {} entries, stage needs {}",
                flat.len(),
                self.n_params()
            )));
        }
        let mut pos = 0;
        for net in &mut self.nets {
            for part in [&mut net.w_r, &mut net.w_b, &mut net.b1, &mut net.w2, &mut net.b2, &mut net.w3]
            {
                let n = part.len();
                part.copy_from_slice(&flat[pos..pos + n]);
                pos += n;
            }
            net.b3 = flat[pos];
            pos += 1;
        }
        Ok(())
    }
}

/// How stages and BP iterations interleave, and the per-bit loss weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub n_stages: usize,
    /// BP iterations after each non-final stage.
    pub n_bn: usize,
    /// BP iterations after the final stage.
    pub n_res: usize,
    /// Loss weight per magnitude bit (`lambda[m - 1]` scales bit m's loss).
    pub lambda: Vec<f64>,
}

impl Default for Schedule {
    /// Three stages with 5 BP iterations after each of the first two and 40
    /// after the last: 50 iterations total, equal loss weights.
    fn default() -> Self {
        Schedule { n_stages: 3, n_bn: 5, n_res: 40, lambda: vec![1.0, 1.0] }
    }
}

impl Schedule {
    /// Single stage followed by `n_res` BP iterations.
    pub fn single(n_res: usize, lambda: Vec<f64>) -> Self {
        Schedule { n_stages: 1, n_bn: 5, n_res, lambda }
    }

    /// BP iterations run after stage `k` (0-based).
    pub fn iters_after(&self, k: usize) -> usize {
        if k + 1 == self.n_stages {
            self.n_res
        } else {
            self.n_bn
        }
    }

    /// Total unrolled BP iterations across the whole stack.
    pub fn total_iters(&self) -> usize {
        self.n_bn * (self.n_stages - 1) + self.n_res
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_stages == 0 {
            return Err(Error::Config("schedule needs at least one stage".into()));
        }
        if self.n_bn == 0 || self.n_res == 0 {
            return Err(Error::Config("BP iteration counts must be positive".into()));
        }
        if self.lambda.is_empty() || self.lambda.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::Config("loss weights must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Freshly initialized stage: uniform fan-in-scaled hidden weights, a small
/// uniform output layer (`+-1e-2`), zero biases. `has_feedback` is false for
/// the first stage, whose posterior stream does not exist yet; its `w_b`
/// stays zero (and stays zero through training, since the zero stream yields
/// zero gradients).
///
/// Draw order is fixed (per net: w_r, w_b if fed back, w2, w3), so one seed
/// always produces the same stage.
pub fn init_stage<R: Rng>(dims: &StageDims, has_feedback: bool, rng: &mut R) -> EqualizerStage {
    let mut stage = EqualizerStage::zeros(*dims);
    let streams = if has_feedback { 2.0 } else { 1.0 };
    let bound1 = (6.0 / (streams * dims.stream_inputs() as f64)).sqrt();
    let bound2 = (6.0 / dims.n_q as f64).sqrt();
    for net in &mut stage.nets {
        for w in &mut net.w_r {
            *w = rng.gen_range(-bound1..bound1);
        }
        if has_feedback {
            for w in &mut net.w_b {
                *w = rng.gen_range(-bound1..bound1);
            }
        }
        for w in &mut net.w2 {
            *w = rng.gen_range(-bound2..bound2);
        }
        for w in &mut net.w3 {
            *w = rng.gen_range(-1e-2..1e-2);
        }
    }
    stage
}

/// Initialize a full stack of `sched.n_stages` stages from the dedicated
/// init stream of `seed` (stage k uses substream `NN_INIT + k`).
pub fn init_stages(dims: &StageDims, sched: &Schedule, seed: u64) -> Vec<EqualizerStage> {
    (0..sched.n_stages)
        .map(|k| {
            let mut rng = substream(seed, stream::NN_INIT + k as u64);
            init_stage(dims, k > 0, &mut rng)
        })
        .collect()
}

/// Render stages and schedule as the plain-text weight format: one header
/// line (dims, stage count, schedule, loss weights), then every parameter in
/// canonical order, eight per line. Numbers are printed shortest-roundtrip,
/// so a reload is bit-exact.
pub fn weights_to_text(stages: &[EqualizerStage], sched: &Schedule) -> Result<String> {
    if stages.is_empty() || stages.len() != sched.n_stages {
        return Err(Error::Config(format!(
            "stage count {} does not match schedule n_stages {}",
            stages.len(),
            sched.n_stages
        )));
    }
    let dims = stages[0].dims;
    if stages.iter().any(|s| s.dims != dims) {
        return Err(Error::Config("stages have inconsistent dims".into()));
    }
    let lambda: Vec<String> = sched.lambda.iter().map(|l| l.to_string()).collect();
    let mut text = format!(
        "nnbp-weights-v1 l {} m_bits {} n_q {} n_r {} n_stages {} n_bn {} n_res {} lambda {}\n",
        dims.l,
        dims.m_bits,
        dims.n_q,
        dims.n_r,
        sched.n_stages,
        sched.n_bn,
        sched.n_res,
        lambda.join(" ")
    );
    for stage in stages {
        let flat = stage.to_flat();
        if flat.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("refusing to save non-finite weights".into()));
        }
        for chunk in flat.chunks(8) {
            let line: Vec<String> = chunk.iter().map(|w| w.to_string()).collect();
            text.push_str(&line.join(" "));
            text.push('\n');
        }
    }
    Ok(text)
}

/// Parse the plain-text weight format back into stages and schedule.
pub fn weights_from_text(text: &str) -> Result<(Vec<EqualizerStage>, Schedule)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Config("empty weight file".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.first() != Some(&"nnbp-weights-v1") {
        return Err(Error::Config("weight file does not start with nnbp-weights-v1".into()));
    }
    let mut fields = std::collections::HashMap::new();
    let mut lambda = Vec::new();
    let mut i = 1;
    while i < tokens.len() {
        let key = tokens[i];
        if key == "lambda" {
            for t in &tokens[i + 1..] {
                lambda.push(t.parse::<f64>().map_err(|_| {
                    Error::Config(format!("bad lambda value {t:?} in weight header"))
                })?);
            }
            break;
        }
        let val = tokens.get(i + 1).ok_or_else(|| {
            Error::Config(format!("weight header field {key:?} has no value"))
        })?;
        let n: usize = val
            .parse()
            .map_err(|_| Error::Config(format!("bad weight header value {key} {val}")))?;
        fields.insert(key.to_string(), n);
        i += 2;
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| Error::Config(format!("weight header is missing {k}")))
    };
    let dims =
        StageDims { l: get("l")?, m_bits: get("m_bits")?, n_q: get("n_q")?, n_r: get("n_r")? };
    dims.validate()?;
    let sched =
        Schedule { n_stages: get("n_stages")?, n_bn: get("n_bn")?, n_res: get("n_res")?, lambda };
    sched.validate()?;
    if sched.lambda.len() != dims.n_nets() {
        return Err(Error::Config(format!(
            "{} loss weights for {} magnitude bits",
            sched.lambda.len(),
            dims.n_nets()
        )));
    }

    let mut numbers = lines.flat_map(str::split_whitespace);
    let per_stage = EqualizerStage::zeros(dims).n_params();
    let mut stages = Vec::with_capacity(sched.n_stages);
    for s in 0..sched.n_stages {
        let mut flat = Vec::with_capacity(per_stage);
        for _ in 0..per_stage {
            let tok = numbers.next().ok_or_else(|| {
                Error::Config(format!("weight file ends inside stage {s} (expected {per_stage} numbers per stage)"))
            })?;
            let w: f64 = tok
                .parse()
                .map_err(|_| Error::Config(format!("bad weight value {tok:?} in stage {s}")))?;
            if !w.is_finite() {
                return Err(Error::Config(format!("non-finite weight {tok:?} in stage {s}")));
            }
            flat.push(w);
        }
        let mut stage = EqualizerStage::zeros(dims);
        stage.load_flat(&flat)?;
        stages.push(stage);
    }
    if numbers.next().is_some() {
        return Err(Error::Config("trailing numbers after the last stage".into()));
    }
    Ok((stages, sched))
}

/// Save stages to a weight file. See [`weights_to_text`] for the format.
pub fn save_weights(path: &Path, stages: &[EqualizerStage], sched: &Schedule) -> Result<()> {
    std::fs::write(path, weights_to_text(stages, sched)?)?;
    Ok(())
}

/// Load stages from a weight file written by [`save_weights`].
pub fn load_weights(path: &Path) -> Result<(Vec<EqualizerStage>, Schedule)> {
    weights_from_text(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_dims() -> StageDims {
        StageDims { l: 2, m_bits: 3, n_q: 3, n_r: 2 }
    }

    #[test]
    fn same_seed_gives_identical_stage() {
        let dims = StageDims::default();
        let a = init_stage(&dims, true, &mut substream(7, stream::NN_INIT));
        let b = init_stage(&dims, true, &mut substream(7, stream::NN_INIT));
        assert_eq!(a, b);
        let c = init_stage(&dims, true, &mut substream(8, stream::NN_INIT));
        assert_ne!(a, c);
    }

    #[test]
    fn first_stage_has_zero_feedback_weights_and_biases() {
        let dims = StageDims::default();
        let s = init_stage(&dims, false, &mut substream(1, stream::NN_INIT));
        let bound1 = (6.0 / dims.stream_inputs() as f64).sqrt();
        for net in &s.nets {
            assert!(net.w_b.iter().all(|&w| w == 0.0));
            assert!(net.b1.iter().all(|&b| b == 0.0));
            assert!(net.b2.iter().all(|&b| b == 0.0));
            assert_eq!(net.b3, 0.0);
            assert!(net.w_r.iter().all(|&w| w.abs() < bound1));
            assert!(net.w3.iter().all(|&w| w.abs() < 1e-2));
            // The draw is not degenerate.
            assert!(net.w_r.iter().any(|&w| w != 0.0));
        }
        // With feedback, the second stream is drawn and the layer-1 bound
        // shrinks by sqrt(2).
        let t = init_stage(&dims, true, &mut substream(1, stream::NN_INIT));
        let bound2 = (6.0 / (2.0 * dims.stream_inputs() as f64)).sqrt();
        for net in &t.nets {
            assert!(net.w_b.iter().any(|&w| w != 0.0));
            assert!(net.w_r.iter().all(|&w| w.abs() < bound2));
        }
    }

    #[test]
    fn flat_round_trip_preserves_every_parameter() {
        let dims = toy_dims();
        let s = init_stage(&dims, true, &mut substream(3, stream::NN_INIT));
        let flat = s.to_flat();
        assert_eq!(flat.len(), s.n_params());
        let mut t = EqualizerStage::zeros(dims);
        t.load_flat(&flat).unwrap();
        assert_eq!(s, t);
        // Wrong length is rejected.
        assert!(t.load_flat(&flat[1..]).is_err());
    }

    #[test]
    fn weight_text_round_trips_bit_exactly() {
        let dims = toy_dims();
        let sched = Schedule { n_stages: 2, n_bn: 5, n_res: 40, lambda: vec![1.0, 0.25] };
        let stages = init_stages(&dims, &sched, 11);
        assert_eq!(stages.len(), 2);
        let text = weights_to_text(&stages, &sched).unwrap();
        let (back, sched2) = weights_from_text(&text).unwrap();
        assert_eq!(sched, sched2);
        assert_eq!(stages.len(), back.len());
        for (a, b) in stages.iter().zip(&back) {
            for (x, y) in a.to_flat().iter().zip(b.to_flat().iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn weight_file_round_trips_via_disk() {
        let dims = toy_dims();
        let sched = Schedule { n_stages: 1, n_bn: 5, n_res: 7, lambda: vec![1.0, 1.0] };
        let stages = init_stages(&dims, &sched, 4);
        let path = std::env::temp_dir().join("nnbp_weights_roundtrip_test.txt");
        save_weights(&path, &stages, &sched).unwrap();
        let (back, sched2) = load_weights(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(sched, sched2);
        assert_eq!(stages, back);
    }

    #[test]
    fn malformed_weight_text_is_rejected() {
        let dims = toy_dims();
        let sched = Schedule { n_stages: 1, n_bn: 2, n_res: 2, lambda: vec![1.0, 1.0] };
        let stages = init_stages(&dims, &sched, 0);
        let good = weights_to_text(&stages, &sched).unwrap();

        // Truncated numbers.
        let cut = &good[..good.len() - 40];
        assert!(weights_from_text(cut).is_err());
        // Trailing extras.
        let extra = format!("{good}0.5\n");
        assert!(weights_from_text(&extra).is_err());
        // Wrong magic.
        let bad = good.replacen("nnbp-weights-v1", "nnbp-weights-v0", 1);
        assert!(weights_from_text(&bad).is_err());
        // Non-numeric weight.
        let bad = good.replacen("0.", "0x", 1);
        assert!(weights_from_text(&bad).is_err());
        // Missing header field.
        let bad = good.replacen("n_res 2 ", "", 1);
        assert!(weights_from_text(&bad).is_err());
        // Lambda count must match the magnitude bits.
        let bad = good.replacen("lambda 1 1", "lambda 1", 1);
        assert!(weights_from_text(&bad).is_err());
    }

    #[test]
    fn schedule_iteration_budget() {
        let sched = Schedule::default();
        sched.validate().unwrap();
        assert_eq!(sched.total_iters(), 50);
        assert_eq!(
            (0..sched.n_stages).map(|k| sched.iters_after(k)).collect::<Vec<_>>(),
            vec![5, 5, 40]
        );
        let one = Schedule::single(50, vec![1.0, 1.0]);
        assert_eq!(one.total_iters(), 50);
        assert_eq!(one.iters_after(0), 50);
        assert!(Schedule { n_stages: 0, ..Schedule::default() }.validate().is_err());
        assert!(Schedule { n_res: 0, ..Schedule::default() }.validate().is_err());
        assert!(Schedule { lambda: vec![-1.0, 1.0], ..Schedule::default() }.validate().is_err());
    }

    #[test]
    fn dims_validation() {
        assert!(StageDims { m_bits: 1, ..StageDims::default() }.validate().is_err());
        assert!(StageDims { n_q: 0, ..StageDims::default() }.validate().is_err());
        StageDims::default().validate().unwrap();
        assert_eq!(StageDims::default().window(), 9);
        assert_eq!(StageDims::default().stream_inputs(), 27);
        assert_eq!(StageDims::default().n_nets(), 2);
    }
}
