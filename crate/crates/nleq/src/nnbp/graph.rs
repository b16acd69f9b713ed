//! Differentiable forward pass and hand-rolled reverse-mode gradients.
//!
//! The forward pass records every activation the backward pass needs: tanh
//! tables of the two LLR input streams, post-ReLU hidden activations, and
//! per-edge BP quantities (raw variable-to-check messages and clamped tanh
//! products). The unrolled BP layer mirrors [`bp_step`] operation for
//! operation, so a zero network reduces the whole stack to the production
//! decoder bit for bit.
//!
//! Gradients follow the recorded graph in reverse. Saturated clamps act as
//! zero-gradient regions, and ReLU uses the `ReLU'(0) = 0` subgradient. In
//! greedy stage-wise training only the final stage's weights are free —
//! earlier stages are frozen — so [`backward`] propagates through the last
//! stage's BP block and networks only, treating the fed-back posterior
//! stream as a constant input.

use super::{EqualizerStage, Schedule};
use crate::ldpc::bp::TANH_CLAMP;
use crate::ldpc::{bp_step, BpState, LdpcCode};
use crate::llr::{LlrFrame, LlrKind};
use crate::{clamp_llr, Error, Result, LLR_MAX};

/// Per-iteration BP record: enough to rebuild every local derivative.
struct BpIterRec {
    /// Variable-to-check messages before the LLR clamp, per edge.
    v2c_raw: Vec<f64>,
    /// Extrinsic tanh products after the atanh-domain clamp, per edge.
    prod: Vec<f64>,
}

/// Activations of one stage: NN intermediates plus its BP block.
struct StageRec {
    /// tanh(l/2) of the demapper stream, `n_symbols * m_bits`.
    t_r: Vec<f64>,
    /// tanh(l/2) of the fed-back posterior stream (zeros for stage 0).
    t_b: Vec<f64>,
    /// Post-ReLU window-layer activations, `n_symbols * n_nets * n_q`.
    q: Vec<f64>,
    /// Post-ReLU hidden-layer activations, `n_symbols * n_nets * n_r`.
    r: Vec<f64>,
    bp: Vec<BpIterRec>,
    /// Posterior `l^B = l^N + l^U` after this stage's BP block, unclamped.
    lb_out: Vec<f64>,
}

/// Everything [`full_forward`] computed, retained for [`backward`].
pub struct ForwardRecord {
    n_symbols: usize,
    m_bits: usize,
    stages: Vec<StageRec>,
}

impl ForwardRecord {
    /// Raw (unclamped) posterior LLRs after the final BP iteration.
    pub fn posterior(&self) -> &[f64] {
        &self.stages.last().expect("record has at least one stage").lb_out
    }

    /// Posterior as a saturated LLR frame.
    pub fn posterior_frame(&self) -> LlrFrame {
        let mut frame = LlrFrame::from_values(
            self.n_symbols,
            self.m_bits,
            LlrKind::B,
            self.posterior().to_vec(),
        );
        frame.saturate();
        frame
    }

    /// Unrolled BP iterations actually executed, per stage.
    pub fn bp_iters(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.bp.len()).collect()
    }
}

fn tanh_half(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&l| (l * 0.5).tanh()).collect()
}

/// Frame index of window offset `o` (0-based, center at `o = l`) for symbol
/// `n`: offsets step by two frame slots to stay on the symbol's own rail.
#[inline]
fn window_index(n: usize, o: usize, l: usize, n_symbols: usize) -> Option<usize> {
    let fi = n as isize + 2 * (o as isize - l as isize);
    (fi >= 0 && (fi as usize) < n_symbols).then_some(fi as usize)
}

/// Run every per-bit network of `stage` over the frame, filling `prior`
/// (sign bits copied from `l_r`) and recording hidden activations.
fn eval_nets(
    stage: &EqualizerStage,
    l_r: &[f64],
    t_r: &[f64],
    t_b: &[f64],
    n_symbols: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = stage.dims;
    let (m, win, n_q, n_r) = (d.m_bits, d.window(), d.n_q, d.n_r);
    let n_nets = d.n_nets();
    let mut prior = vec![0.0; n_symbols * m];
    let mut q_all = vec![0.0; n_symbols * n_nets * n_q];
    let mut r_all = vec![0.0; n_symbols * n_nets * n_r];

    for n in 0..n_symbols {
        prior[n * m] = l_r[n * m];
        for (ni, net) in stage.nets.iter().enumerate() {
            let q = &mut q_all[(n * n_nets + ni) * n_q..][..n_q];
            for (k, qk) in q.iter_mut().enumerate() {
                let mut acc = net.b1[k];
                for o in 0..win {
                    let Some(fi) = window_index(n, o, d.l, n_symbols) else { continue };
                    let wbase = (k * win + o) * m;
                    let tbase = fi * m;
                    for j in 0..m {
                        acc += net.w_r[wbase + j] * t_r[tbase + j]
                            + net.w_b[wbase + j] * t_b[tbase + j];
                    }
                }
                *qk = acc.max(0.0);
            }
            let r = &mut r_all[(n * n_nets + ni) * n_r..][..n_r];
            for (k, rk) in r.iter_mut().enumerate() {
                let mut acc = net.b2[k];
                for (j, qj) in q.iter().enumerate() {
                    acc += net.w2[k * n_q + j] * qj;
                }
                *rk = acc.max(0.0);
            }
            let mut out = net.b3;
            for (k, rk) in r.iter().enumerate() {
                out += net.w3[k] * rk;
            }
            prior[n * m + ni + 1] = out;
        }
    }
    (prior, q_all, r_all)
}

/// One recorded BP block: `n_iter` iterations from zeroed messages, exactly
/// mirroring [`bp_step`]'s arithmetic. Returns the per-iteration records and
/// the final unclamped posterior.
fn bp_block_forward(prior: &[f64], code: &LdpcCode, n_iter: usize) -> (Vec<BpIterRec>, Vec<f64>) {
    let n = code.n;
    let mut c2v = vec![0.0; code.n_edges];
    let mut v2c = vec![0.0; code.n_edges];
    let mut u = vec![0.0; n];
    let mut recs = Vec::with_capacity(n_iter);
    let mut prefix: Vec<f64> = Vec::new();
    for _ in 0..n_iter {
        let mut rec = BpIterRec {
            v2c_raw: vec![0.0; code.n_edges],
            prod: vec![0.0; code.n_edges],
        };
        for v in 0..n {
            let base = code.var_edge_base[v];
            let deg = code.var_to_check[v].len();
            let total = prior[v] + u[v];
            for e in base..base + deg {
                let raw = total - c2v[e];
                rec.v2c_raw[e] = raw;
                v2c[e] = clamp_llr(raw);
            }
        }
        for edges in &code.check_edges {
            let deg = edges.len();
            prefix.clear();
            prefix.resize(deg + 1, 1.0);
            for (i, &(_, e)) in edges.iter().enumerate() {
                prefix[i + 1] = prefix[i] * (v2c[e] * 0.5).tanh();
            }
            let mut suffix = 1.0;
            for i in (0..deg).rev() {
                let (_, e) = edges[i];
                let prod = (prefix[i] * suffix).clamp(-TANH_CLAMP, TANH_CLAMP);
                rec.prod[e] = prod;
                c2v[e] = clamp_llr(2.0 * prod.atanh());
                suffix *= (v2c[e] * 0.5).tanh();
            }
        }
        for v in 0..n {
            let base = code.var_edge_base[v];
            let deg = code.var_to_check[v].len();
            u[v] = c2v[base..base + deg].iter().sum();
        }
        recs.push(rec);
    }
    let lb = prior.iter().zip(&u).map(|(p, uu)| p + uu).collect();
    (recs, lb)
}

fn check_frame(stage: &EqualizerStage, frame: &LlrFrame) -> Result<()> {
    if frame.m_bits != stage.dims.m_bits {
        return Err(Error::Config(format!(
            "frame carries {} bits per symbol, stage expects {}",
            frame.m_bits, stage.dims.m_bits
        )));
    }
    Ok(())
}

/// One stage's network pass: window over `l_r` and `l_b`, refined LLRs out.
/// Sign bits (`m = 0`) pass through from `l_r`; the output is unclamped.
/// For the first stage, pass a zero `l_b` frame (no posterior exists yet).
pub fn stage_forward(stage: &EqualizerStage, l_r: &LlrFrame, l_b: &LlrFrame) -> Result<LlrFrame> {
    check_frame(stage, l_r)?;
    check_frame(stage, l_b)?;
    if l_r.n_symbols != l_b.n_symbols {
        return Err(Error::Config(format!(
            "stream shapes differ: {} vs {} symbols",
            l_r.n_symbols, l_b.n_symbols
        )));
    }
    let t_r = tanh_half(&l_r.values);
    let t_b = tanh_half(&l_b.values);
    let (prior, _, _) = eval_nets(stage, &l_r.values, &t_r, &t_b, l_r.n_symbols);
    Ok(LlrFrame::from_values(l_r.n_symbols, l_r.m_bits, LlrKind::N, prior))
}

fn check_stack(stages: &[EqualizerStage], sched: &Schedule, l_r: &LlrFrame, code: &LdpcCode) -> Result<()> {
    sched.validate()?;
    if stages.len() != sched.n_stages {
        return Err(Error::Config(format!(
            "{} stages for a schedule of {}",
            stages.len(),
            sched.n_stages
        )));
    }
    for s in stages {
        s.dims.validate()?;
        check_frame(s, l_r)?;
    }
    if l_r.len() != code.n {
        return Err(Error::Config(format!(
            "frame carries {} LLRs, code length is {}",
            l_r.len(),
            code.n
        )));
    }
    Ok(())
}

/// Run the full stack — alternating network stages and BP blocks — and
/// record every activation for [`backward`]. BP messages reset at each
/// stage; the posterior after stage k's block is stage k+1's feedback
/// stream.
pub fn full_forward(
    stages: &[EqualizerStage],
    sched: &Schedule,
    l_r: &LlrFrame,
    code: &LdpcCode,
) -> Result<ForwardRecord> {
    check_stack(stages, sched, l_r, code)?;
    let t_r = tanh_half(&l_r.values);
    let mut recs: Vec<StageRec> = Vec::with_capacity(stages.len());
    for (k, stage) in stages.iter().enumerate() {
        let t_b = match recs.last() {
            Some(prev) => tanh_half(&prev.lb_out),
            None => vec![0.0; l_r.values.len()],
        };
        let (prior, q, r) = eval_nets(stage, &l_r.values, &t_r, &t_b, l_r.n_symbols);
        let (bp, lb_out) = bp_block_forward(&prior, code, sched.iters_after(k));
        recs.push(StageRec { t_r: t_r.clone(), t_b, q, r, bp, lb_out });
    }
    Ok(ForwardRecord { n_symbols: l_r.n_symbols, m_bits: l_r.m_bits, stages: recs })
}

/// Forward pass without records, on the production BP step. Bit-identical
/// to [`full_forward`]'s posterior; used by the frame decoder.
pub(crate) fn run_posterior(
    stages: &[EqualizerStage],
    sched: &Schedule,
    l_r: &LlrFrame,
    code: &LdpcCode,
) -> Result<Vec<f64>> {
    check_stack(stages, sched, l_r, code)?;
    let t_r = tanh_half(&l_r.values);
    let mut lb: Vec<f64> = Vec::new();
    for (k, stage) in stages.iter().enumerate() {
        let t_b = if k == 0 { vec![0.0; l_r.values.len()] } else { tanh_half(&lb) };
        let (prior, _, _) = eval_nets(stage, &l_r.values, &t_r, &t_b, l_r.n_symbols);
        let mut state = BpState::new(code);
        for _ in 0..sched.iters_after(k) {
            lb = bp_step(&mut state, &prior, code);
        }
    }
    Ok(lb)
}

/// Numerically stable `log(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Numerically stable logistic function.
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Cross-entropy of the posterior against the transmitted bits, summed over
/// magnitude bits with weights `lambda` (`lambda[m-1]` scales bit m's mean):
/// `L_m = mean_n [(1 - d) log(1 + e^-l) + d log(1 + e^l)]`. Sign bits carry
/// no loss term (they have no network to train).
pub fn loss(lb: &LlrFrame, bits: &[u8], lambda: &[f64]) -> Result<f64> {
    if bits.len() != lb.len() {
        return Err(Error::Config(format!(
            "{} bits for {} LLRs",
            bits.len(),
            lb.len()
        )));
    }
    if lambda.len() != lb.m_bits - 1 {
        return Err(Error::Config(format!(
            "{} loss weights for {} magnitude bits",
            lambda.len(),
            lb.m_bits - 1
        )));
    }
    Ok(loss_values(&lb.values, bits, lb.m_bits, lambda))
}

pub(crate) fn loss_values(lb: &[f64], bits: &[u8], m_bits: usize, lambda: &[f64]) -> f64 {
    let n_symbols = lb.len() / m_bits;
    let mut total = 0.0;
    for (mi, &lam) in lambda.iter().enumerate() {
        let m = mi + 1;
        let mut acc = 0.0;
        for n in 0..n_symbols {
            let l = lb[n * m_bits + m];
            acc += if bits[n * m_bits + m] == 0 { softplus(-l) } else { softplus(l) };
        }
        total += lam * acc / n_symbols as f64;
    }
    total
}

/// Loss plus its gradient with respect to every posterior LLR (zero on the
/// sign bits, which the loss does not read).
pub(crate) fn loss_grad(lb: &[f64], bits: &[u8], m_bits: usize, lambda: &[f64]) -> (f64, Vec<f64>) {
    let n_symbols = lb.len() / m_bits;
    let mut g = vec![0.0; lb.len()];
    for (mi, &lam) in lambda.iter().enumerate() {
        let m = mi + 1;
        let scale = lam / n_symbols as f64;
        for n in 0..n_symbols {
            let idx = n * m_bits + m;
            let d = f64::from(bits[idx]);
            g[idx] = scale * (sigmoid(lb[idx]) - (1.0 - d));
        }
    }
    (loss_values(lb, bits, m_bits, lambda), g)
}

/// Adjoint of one BP block: given the gradient at its output posterior,
/// accumulate the gradient at its input prior by walking the recorded
/// iterations in reverse. Clamped messages and clamped tanh products are
/// zero-gradient.
fn bp_block_backward(recs: &[BpIterRec], g_lb: &[f64], code: &LdpcCode) -> Vec<f64> {
    let n = code.n;
    let n_edges = code.n_edges;
    // l^B = prior + u_T seeds both the prior adjoint and, through u_T, every
    // edge of each variable.
    let mut g_prior = g_lb.to_vec();
    let mut g_c2v = vec![0.0; n_edges];
    for v in 0..n {
        for e in code.var_edge_base[v]..code.var_edge_base[v + 1] {
            g_c2v[e] = g_lb[v];
        }
    }

    let mut g_theta = vec![0.0; n_edges];
    let mut g_v2c = vec![0.0; n_edges];
    let mut theta: Vec<f64> = Vec::new();
    let mut g_p: Vec<f64> = Vec::new();
    let mut suffix: Vec<f64> = Vec::new();
    for rec in recs.iter().rev() {
        g_theta.iter_mut().for_each(|g| *g = 0.0);
        // Check side: c2v = clamp(2 atanh(prod)), prod the extrinsic
        // product of theta = tanh(v2c/2) over the check's other edges.
        for edges in &code.check_edges {
            let deg = edges.len();
            theta.clear();
            g_p.clear();
            for &(_, e) in edges {
                theta.push((clamp_llr(rec.v2c_raw[e]) * 0.5).tanh());
                let prod = rec.prod[e];
                let c2v_raw = 2.0 * prod.atanh();
                let gate = prod.abs() < TANH_CLAMP && c2v_raw.abs() <= LLR_MAX;
                g_p.push(if gate { g_c2v[e] * 2.0 / (1.0 - prod * prod) } else { 0.0 });
            }
            // d c2v_i / d theta_j (j != i) = gate_i * 2/(1-prod_i^2) times
            // the product of theta over the check excluding both i and j;
            // pair products come from running prefixes and suffixes, so
            // exact zeros need no special cases.
            suffix.clear();
            suffix.resize(deg + 1, 1.0);
            for i in (0..deg).rev() {
                suffix[i] = suffix[i + 1] * theta[i];
            }
            let mut pre = 1.0;
            for i in 0..deg {
                let mut seg = pre;
                for j in i + 1..deg {
                    let pair = seg * suffix[j + 1];
                    g_theta[edges[i].1] += g_p[j] * pair;
                    g_theta[edges[j].1] += g_p[i] * pair;
                    seg *= theta[j];
                }
                pre *= theta[i];
            }
            for (i, &(_, e)) in edges.iter().enumerate() {
                let th = theta[i];
                let gate = rec.v2c_raw[e].abs() <= LLR_MAX;
                g_v2c[e] = if gate { g_theta[e] * 0.5 * (1.0 - th * th) } else { 0.0 };
            }
        }
        // Variable side: v2c_e = prior[v] + u_prev[v] - c2v_prev[e], and
        // u_prev[v] is the sum of the variable's previous messages.
        for v in 0..n {
            let base = code.var_edge_base[v];
            let end = code.var_edge_base[v + 1];
            let total: f64 = g_v2c[base..end].iter().sum();
            g_prior[v] += total;
            for e in base..end {
                g_c2v[e] = total - g_v2c[e];
            }
        }
    }
    g_prior
}

/// Adjoint of one stage's networks: scatter the prior gradient back into
/// weight gradients using the recorded activations. Input-stream adjoints
/// are not propagated (both streams are frozen inputs during greedy
/// training), and sign-bit priors carry no weight dependence.
fn stage_backward(
    stage: &EqualizerStage,
    rec: &StageRec,
    g_prior: &[f64],
    n_symbols: usize,
) -> EqualizerStage {
    let d = stage.dims;
    let (m, win, n_q, n_r) = (d.m_bits, d.window(), d.n_q, d.n_r);
    let n_nets = d.n_nets();
    let mut grad = EqualizerStage::zeros(d);
    let mut g_r = vec![0.0; n_r];
    let mut g_q = vec![0.0; n_q];

    for n in 0..n_symbols {
        for ni in 0..n_nets {
            let g_out = g_prior[n * m + ni + 1];
            if g_out == 0.0 {
                continue;
            }
            let net = &stage.nets[ni];
            let gn = &mut grad.nets[ni];
            let q = &rec.q[(n * n_nets + ni) * n_q..][..n_q];
            let r = &rec.r[(n * n_nets + ni) * n_r..][..n_r];

            gn.b3 += g_out;
            for k in 0..n_r {
                gn.w3[k] += g_out * r[k];
                g_r[k] = if r[k] > 0.0 { g_out * net.w3[k] } else { 0.0 };
            }
            g_q.iter_mut().for_each(|g| *g = 0.0);
            for k in 0..n_r {
                let gk = g_r[k];
                if gk == 0.0 {
                    continue;
                }
                gn.b2[k] += gk;
                for j in 0..n_q {
                    gn.w2[k * n_q + j] += gk * q[j];
                    g_q[j] += gk * net.w2[k * n_q + j];
                }
            }
            for k in 0..n_q {
                let gk = if q[k] > 0.0 { g_q[k] } else { 0.0 };
                if gk == 0.0 {
                    continue;
                }
                gn.b1[k] += gk;
                for o in 0..win {
                    let Some(fi) = window_index(n, o, d.l, n_symbols) else { continue };
                    let wbase = (k * win + o) * m;
                    let tbase = fi * m;
                    for j in 0..m {
                        gn.w_r[wbase + j] += gk * rec.t_r[tbase + j];
                        gn.w_b[wbase + j] += gk * rec.t_b[tbase + j];
                    }
                }
            }
        }
    }
    grad
}

/// Reverse-mode gradient of a scalar through the recorded stack, seeded by
/// its gradient `g_lb_final` at the final posterior. Returns the gradient
/// for the final stage's weights — the only free parameters under greedy
/// stage-wise training (earlier stages and both input streams are frozen).
pub fn backward(
    stages: &[EqualizerStage],
    rec: &ForwardRecord,
    g_lb_final: &[f64],
    code: &LdpcCode,
) -> EqualizerStage {
    let stage = stages.last().expect("at least one stage");
    let srec = rec.stages.last().expect("at least one stage record");
    assert_eq!(g_lb_final.len(), code.n, "posterior gradient length");
    let g_prior = bp_block_backward(&srec.bp, g_lb_final, code);
    stage_backward(stage, srec, &g_prior, rec.n_symbols)
}
