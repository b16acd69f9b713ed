//! Greedy stage-wise training of the iterative equalizer.
//!
//! Stages are trained one at a time: stage k is appended with fresh
//! initialization and optimized while stages 0..k stay frozen, so each
//! training problem only ever differentiates through the newest stage's
//! networks and BP block. Training frames come from the simulated channel
//! at a dedicated training SNR and are generated once, then reused across
//! epochs; batches and the cross-frame gradient reduction are ordered, so
//! a training run is bit-reproducible for a given seed regardless of the
//! worker-thread count.

use rayon::prelude::*;

use super::graph::{backward, full_forward, loss_grad, loss_values, run_posterior};
use super::{init_stage, EqualizerStage, Schedule, StageDims};
use crate::chansim::{ChannelConfig, FrameContext, Passthrough, Variant};
use crate::harness::FrameDecoder;
use crate::ldpc::LdpcCode;
use crate::llr::LlrFrame;
use crate::rng::{stream, substream};
use crate::{Error, Result};
use rand::Rng;

/// Optimizer and dataset knobs for [`train`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainHyper {
    /// Channel SNR the training frames are generated at, in dB.
    pub train_snr_db: f64,
    /// Training frames generated up front and reused every epoch.
    pub n_frames: usize,
    /// Frames averaged into one gradient step.
    pub batch_frames: usize,
    /// Passes over the training set, per stage.
    pub epochs: usize,
    /// Adam step size.
    pub step: f64,
    /// Adam first-moment decay.
    pub beta1: f64,
    /// Adam second-moment decay.
    pub beta2: f64,
    /// Adam denominator offset.
    pub eps: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            train_snr_db: 19.9,
            n_frames: 48,
            batch_frames: 8,
            epochs: 30,
            step: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainHyper {
    fn validate(&self) -> Result<()> {
        if self.n_frames == 0 || self.batch_frames == 0 {
            return Err(Error::Config("training needs at least one frame per batch".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step size {} must be positive", self.step)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} = {b} must lie in [0, 1)")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!("eps = {} must be positive", self.eps)));
        }
        Ok(())
    }
}

/// Trained equalizer plus its per-stage loss history.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub stages: Vec<EqualizerStage>,
    pub schedule: Schedule,
    /// `epoch_loss[k]` traces stage k's training: entry 0 is the loss at
    /// initialization, entry e >= 1 the mean batch loss of epoch e.
    pub epoch_loss: Vec<Vec<f64>>,
}

/// Adam with bias-corrected moment estimates over a flat parameter vector.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    hyper: TrainHyper,
}

impl Adam {
    fn new(n: usize, hyper: TrainHyper) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, hyper }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        let h = &self.hyper;
        self.t += 1;
        let bc1 = 1.0 - h.beta1.powi(self.t);
        let bc2 = 1.0 - h.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = h.beta1 * self.m[i] + (1.0 - h.beta1) * g;
            self.v[i] = h.beta2 * self.v[i] + (1.0 - h.beta2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= h.step * mh / (vh.sqrt() + h.eps);
        }
    }
}

/// One cached training example: demapper LLRs and the transmitted codeword.
struct TrainFrame {
    l_r: LlrFrame,
    bits: Vec<u8>,
}

fn generate_frames(
    cfg: &ChannelConfig,
    code: &LdpcCode,
    hyper: &TrainHyper,
) -> Result<Vec<TrainFrame>> {
    let mut train_cfg = *cfg;
    train_cfg.snr_db = hyper.train_snr_db;
    let ctx = FrameContext::new(train_cfg)?;
    (0..hyper.n_frames)
        .into_par_iter()
        .map(|f| {
            let mut rng = substream(cfg.seed, stream::NN_TRAIN + f as u64);
            let info: Vec<u8> = (0..code.k).map(|_| rng.gen_range(0..2u8)).collect();
            let bits = code.encode(&info)?;
            let out = ctx.run_variant(Variant::A, &bits, &Passthrough, &mut rng)?;
            Ok(TrainFrame { l_r: out.llr, bits })
        })
        .collect()
}

fn mean_loss(
    stages: &[EqualizerStage],
    sched: &Schedule,
    frames: &[TrainFrame],
    code: &LdpcCode,
) -> Result<f64> {
    let m_bits = stages[0].dims.m_bits;
    let losses: Result<Vec<f64>> = frames
        .par_iter()
        .map(|fr| {
            let rec = full_forward(stages, sched, &fr.l_r, code)?;
            Ok(loss_values(rec.posterior(), &fr.bits, m_bits, &sched.lambda))
        })
        .collect();
    Ok(losses?.iter().sum::<f64>() / frames.len() as f64)
}

/// Optimize the last stage of `stages` through the prefix schedule `sched`,
/// returning the loss trace (initial value, then one mean per epoch).
fn train_stage(
    stages: &mut [EqualizerStage],
    sched: &Schedule,
    frames: &[TrainFrame],
    code: &LdpcCode,
    hyper: &TrainHyper,
) -> Result<Vec<f64>> {
    let m_bits = stages[0].dims.m_bits;
    let initial = mean_loss(stages, sched, frames, code)?;
    if !initial.is_finite() {
        return Err(Error::Numerical(format!("initial training loss is {initial}")));
    }
    let mut trace = vec![initial];
    let mut params = stages.last().expect("at least one stage").to_flat();
    let mut adam = Adam::new(params.len(), *hyper);
    let mut epochs_above = 0usize;

    for _ in 0..hyper.epochs {
        let mut epoch_sum = 0.0;
        let mut n_batches = 0usize;
        for batch in frames.chunks(hyper.batch_frames) {
            let results: Result<Vec<(f64, Vec<f64>)>> = batch
                .par_iter()
                .map(|fr| {
                    let rec = full_forward(stages, sched, &fr.l_r, code)?;
                    let (l, g_lb) = loss_grad(rec.posterior(), &fr.bits, m_bits, &sched.lambda);
                    Ok((l, backward(stages, &rec, &g_lb, code).to_flat()))
                })
                .collect();
            let results = results?;
            let scale = 1.0 / batch.len() as f64;
            let mut grad = vec![0.0; params.len()];
            let mut batch_loss = 0.0;
            for (l, g) in &results {
                batch_loss += l;
                for (acc, gi) in grad.iter_mut().zip(g) {
                    *acc += gi;
                }
            }
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(Error::Numerical("training loss is not finite".into()));
            }
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.update(&mut params, &grad);
            stages.last_mut().expect("at least one stage").load_flat(&params)?;
            epoch_sum += batch_loss;
            n_batches += 1;
        }
        let epoch_mean = epoch_sum / n_batches as f64;
        trace.push(epoch_mean);
        // A loss stuck an order of magnitude above where training started
        // means the step size blew the weights up, not that a plateau is
        // slow to descend.
        if epoch_mean > 10.0 * initial {
            epochs_above += 1;
            if epochs_above >= 3 {
                return Err(Error::Numerical(format!(
                    "training diverged: epoch loss {epoch_mean:.3e} held above 10x \
                     the initial loss {initial:.3e} for 3 consecutive epochs"
                )));
            }
        } else {
            epochs_above = 0;
        }
    }
    Ok(trace)
}

/// Train an equalizer for the channel in `cfg`, stage by stage. Stage k is
/// initialized from its own seed stream and optimized with Adam through the
/// executed prefix of `sched` — its block running the budget it will have
/// in the full stack — while earlier stages stay frozen.
pub fn train(
    cfg: &ChannelConfig,
    code: &LdpcCode,
    dims: StageDims,
    sched: &Schedule,
    hyper: &TrainHyper,
) -> Result<TrainReport> {
    dims.validate()?;
    sched.validate()?;
    hyper.validate()?;
    if code.n % dims.m_bits != 0 {
        return Err(Error::Config(format!(
            "code length {} is not a multiple of {} bits per symbol",
            code.n, dims.m_bits
        )));
    }
    let frames = generate_frames(cfg, code, hyper)?;

    let mut stages: Vec<EqualizerStage> = Vec::with_capacity(sched.n_stages);
    let mut epoch_loss = Vec::with_capacity(sched.n_stages);
    for k in 0..sched.n_stages {
        let mut rng = substream(cfg.seed, stream::NN_INIT + k as u64);
        stages.push(init_stage(&dims, k > 0, &mut rng));
        let prefix = Schedule {
            n_stages: k + 1,
            n_bn: sched.n_bn,
            n_res: sched.iters_after(k),
            lambda: sched.lambda.clone(),
        };
        epoch_loss.push(train_stage(&mut stages, &prefix, &frames, code, hyper)?);
    }
    Ok(TrainReport { stages, schedule: sched.clone(), epoch_loss })
}

/// Frame decoder that replaces the plain BP decoder with the trained
/// network-plus-BP stack. Decisions are the posterior signs (negative LLR
/// means bit 1).
#[derive(Debug, Clone)]
pub struct NnBpDecoder {
    pub stages: Vec<EqualizerStage>,
    pub schedule: Schedule,
}

impl NnBpDecoder {
    pub fn new(stages: Vec<EqualizerStage>, schedule: Schedule) -> Result<Self> {
        schedule.validate()?;
        if stages.len() != schedule.n_stages {
            return Err(Error::Config(format!(
                "{} stages for a schedule of {}",
                stages.len(),
                schedule.n_stages
            )));
        }
        for s in &stages {
            s.dims.validate()?;
        }
        Ok(NnBpDecoder { stages, schedule })
    }

    pub fn from_report(report: &TrainReport) -> Self {
        NnBpDecoder { stages: report.stages.clone(), schedule: report.schedule.clone() }
    }
}

impl FrameDecoder for NnBpDecoder {
    fn decode_frame(&self, llr: &LlrFrame, code: &LdpcCode) -> Vec<u8> {
        let lb = run_posterior(&self.stages, &self.schedule, llr, code)
            .expect("decoder validated against this code at construction");
        lb.iter().map(|&l| u8::from(l < 0.0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::graph::testcode::ring_code;
    use super::*;

    fn toy_dims() -> StageDims {
        StageDims { l: 1, m_bits: 3, n_q: 4, n_r: 3 }
    }

    fn toy_cfg() -> ChannelConfig {
        ChannelConfig { seed: 11, ..ChannelConfig::default() }
    }

    fn toy_hyper() -> TrainHyper {
        TrainHyper {
            train_snr_db: 17.0,
            n_frames: 6,
            batch_frames: 3,
            epochs: 3,
            step: 1e-2,
            ..TrainHyper::default()
        }
    }

    #[test]
    fn greedy_training_reduces_loss_on_simulated_frames() {
        let code = ring_code(21);
        let sched = Schedule { n_stages: 2, n_bn: 2, n_res: 3, lambda: vec![1.0, 1.0] };
        let report = train(&toy_cfg(), &code, toy_dims(), &sched, &toy_hyper()).unwrap();

        assert_eq!(report.stages.len(), 2);
        assert_eq!(report.epoch_loss.len(), 2);
        for trace in &report.epoch_loss {
            assert_eq!(trace.len(), 1 + toy_hyper().epochs);
            assert!(trace.iter().all(|l| l.is_finite() && *l >= 0.0));
        }
        // Fresh init drives the networks near zero output, so the initial
        // loss sits near log 2 per magnitude bit.
        let initial = report.epoch_loss[0][0];
        assert!((initial - 2.0 * std::f64::consts::LN_2).abs() < 0.2, "initial {initial}");
        for (k, trace) in report.epoch_loss.iter().enumerate() {
            let last = *trace.last().unwrap();
            assert!(last < trace[0], "stage {k}: {last} !< {}", trace[0]);
        }
        // Stage 0 must not have been touched by stage 1's training.
        assert!(report.stages[0].nets.iter().all(|n| n.w_b.iter().all(|&w| w == 0.0)));
        assert!(report.stages[1].nets.iter().any(|n| n.w_b.iter().any(|&w| w != 0.0)));
    }

    #[test]
    fn training_is_bit_reproducible() {
        let code = ring_code(21);
        let sched = Schedule::single(3, vec![1.0, 1.0]);
        let a = train(&toy_cfg(), &code, toy_dims(), &sched, &toy_hyper()).unwrap();
        let b = train(&toy_cfg(), &code, toy_dims(), &sched, &toy_hyper()).unwrap();
        let (fa, fb) = (a.stages[0].to_flat(), b.stages[0].to_flat());
        assert!(fa.iter().zip(&fb).all(|(x, y)| x.to_bits() == y.to_bits()));
        for (ta, tb) in a.epoch_loss.iter().zip(&b.epoch_loss) {
            assert!(ta.iter().zip(tb).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn runaway_step_size_reports_divergence() {
        let code = ring_code(21);
        let sched = Schedule::single(2, vec![1.0, 1.0]);
        let hyper = TrainHyper { step: 1e6, epochs: 8, ..toy_hyper() };
        match train(&toy_cfg(), &code, toy_dims(), &sched, &hyper) {
            Err(Error::Numerical(_)) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn hyper_and_shape_validation() {
        let code = ring_code(21);
        let sched = Schedule::single(2, vec![1.0, 1.0]);
        let bad = TrainHyper { step: 0.0, ..toy_hyper() };
        assert!(train(&toy_cfg(), &code, toy_dims(), &sched, &bad).is_err());
        let bad = TrainHyper { n_frames: 0, ..toy_hyper() };
        assert!(train(&toy_cfg(), &code, toy_dims(), &sched, &bad).is_err());
        // 64 bits is not a multiple of 3, so no symbol frame can carry it.
        let dims = StageDims { m_bits: 4, ..toy_dims() };
        assert!(train(&toy_cfg(), &code, dims, &sched, &toy_hyper()).is_err());
    }

    #[test]
    fn decoder_output_is_deterministic_posterior_signs() {
        let code = ring_code(21);
        let sched = Schedule::single(2, vec![1.0, 1.0]);
        let report = train(&toy_cfg(), &code, toy_dims(), &sched, &toy_hyper()).unwrap();
        let dec = NnBpDecoder::from_report(&report);

        let mut train_cfg = toy_cfg();
        train_cfg.snr_db = 17.0;
        let ctx = FrameContext::new(train_cfg).unwrap();
        let mut rng = substream(99, stream::EVAL);
        let info: Vec<u8> = (0..code.k).map(|_| rng.gen_range(0..2u8)).collect();
        let cw = code.encode(&info).unwrap();
        let out = ctx.run_variant(Variant::A, &cw, &Passthrough, &mut rng).unwrap();

        let got = dec.decode_frame(&out.llr, &code);
        assert_eq!(got.len(), code.n);
        assert_eq!(got, dec.decode_frame(&out.llr, &code));
        let lb = run_posterior(&dec.stages, &dec.schedule, &out.llr, &code).unwrap();
        let want: Vec<u8> = lb.iter().map(|&l| u8::from(l < 0.0)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn decoder_construction_checks_shapes() {
        let sched = Schedule::single(2, vec![1.0, 1.0]);
        let stage = EqualizerStage::zeros(toy_dims());
        assert!(NnBpDecoder::new(vec![stage.clone()], sched.clone()).is_ok());
        assert!(NnBpDecoder::new(vec![stage.clone(), stage], sched).is_err());
    }
}
