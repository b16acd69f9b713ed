//! Flooding sum-product belief propagation.
//!
//! One [`bp_step`] is exactly one unrolled BP layer: variable-to-check
//! updates excluding each edge's own prior, check-to-variable tanh-product
//! updates with extrinsic exclusion, then the accumulated variable totals.
//! The equalizer loop reuses the same step between its NN stages.

use super::code::LdpcCode;
use crate::clamp_llr;
#[cfg(test)]
use crate::LLR_MAX;

/// Bound on the tanh product before atanh, keeping atanh finite. Shared
/// with the unrolled BP layers of the iterative equalizer, which must match
/// this decoder bit for bit.
pub(crate) const TANH_CLAMP: f64 = 1.0 - 1e-12;

/// Per-edge message state. `c2v` must start at zero; `u` holds the running
/// check-to-variable totals l^U per variable.
#[derive(Debug, Clone)]
pub struct BpState {
    pub c2v: Vec<f64>,
    pub v2c: Vec<f64>,
    pub u: Vec<f64>,
}

impl BpState {
    pub fn new(code: &LdpcCode) -> Self {
        BpState {
            c2v: vec![0.0; code.n_edges],
            v2c: vec![0.0; code.n_edges],
            u: vec![0.0; code.n],
        }
    }
}

/// Result of a full decode pass.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    /// Posterior LLRs l^B = l^U + l^N, clamped to the global bound.
    pub llr: Vec<f64>,
    /// Sign decisions: 1 where the posterior is negative.
    pub hard_bits: Vec<u8>,
    /// True if the hard bits satisfied every parity check.
    pub converged: bool,
    /// Iterations actually run.
    pub iterations: usize,
}

/// One flooding iteration. Updates `state` in place and returns the
/// posterior l^B per variable (unclamped; callers saturate when framing).
///
/// Update order per the message-passing schedule:
/// v2c = l^N + l^U - c2v (own prior excluded), clamped;
/// c2v' = 2 atanh(prod_{other edges of the check} tanh(v2c/2)), product
/// clamped to +-(1 - 1e-12), message clamped;
/// l^U = sum of incoming c2v'; l^B = l^U + l^N.
pub fn bp_step(state: &mut BpState, input_llr: &[f64], code: &LdpcCode) -> Vec<f64> {
    debug_assert_eq!(input_llr.len(), code.n);
    // Variable to check.
    for v in 0..code.n {
        let base = code.var_edge_base[v];
        let deg = code.var_to_check[v].len();
        let total = input_llr[v] + state.u[v];
        for e in base..base + deg {
            state.v2c[e] = clamp_llr(total - state.c2v[e]);
        }
    }
    // Check to variable, extrinsic products via prefix/suffix (no division,
    // so exact zeros are handled).
    let mut prefix: Vec<f64> = Vec::new();
    for edges in &code.check_edges {
        let deg = edges.len();
        prefix.clear();
        prefix.resize(deg + 1, 1.0);
        for (i, &(_, e)) in edges.iter().enumerate() {
            prefix[i + 1] = prefix[i] * (state.v2c[e] * 0.5).tanh();
        }
        let mut suffix = 1.0;
        for i in (0..deg).rev() {
            let (_, e) = edges[i];
            let prod = (prefix[i] * suffix).clamp(-TANH_CLAMP, TANH_CLAMP);
            state.c2v[e] = clamp_llr(2.0 * prod.atanh());
            suffix *= (state.v2c[e] * 0.5).tanh();
        }
    }
    // Accumulate totals.
    for v in 0..code.n {
        let base = code.var_edge_base[v];
        let deg = code.var_to_check[v].len();
        state.u[v] = state.c2v[base..base + deg].iter().sum();
    }
    input_llr.iter().zip(&state.u).map(|(n, u)| n + u).collect()
}

/// Run up to `n_iter` BP iterations (default 50 in the decoder configs),
/// stopping early as soon as the hard decisions satisfy all checks.
pub fn decode(input_llr: &[f64], code: &LdpcCode, n_iter: usize) -> DecodeResult {
    decode_opts(input_llr, code, n_iter, true)
}

/// [`decode`] with the early syndrome exit optionally disabled (useful when
/// the exact fixed-point posterior is wanted, e.g. for MAP comparisons).
pub fn decode_opts(
    input_llr: &[f64],
    code: &LdpcCode,
    n_iter: usize,
    early_exit: bool,
) -> DecodeResult {
    assert!(n_iter >= 1, "decode needs at least one iteration");
    let mut state = BpState::new(code);
    let mut llr = vec![0.0; code.n];
    let mut hard = vec![0u8; code.n];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..n_iter {
        llr = bp_step(&mut state, input_llr, code);
        iterations += 1;
        for (h, &l) in hard.iter_mut().zip(&llr) {
            *h = u8::from(l < 0.0);
        }
        if early_exit && code.syndrome_ok(&hard) {
            converged = true;
            break;
        }
    }
    if !early_exit {
        converged = code.syndrome_ok(&hard);
    }
    for l in &mut llr {
        *l = clamp_llr(*l);
    }
    DecodeResult { llr, hard_bits: hard, converged, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::alist::HAMMING_7_4;
    use crate::ldpc::code::LdpcCode;
    use crate::ldpc::AlistMatrix;

    fn hamming() -> LdpcCode {
        LdpcCode::from_alist_text(HAMMING_7_4).unwrap()
    }

    /// Single parity check over three variables.
    fn spc3() -> LdpcCode {
        LdpcCode::from_matrix(AlistMatrix {
            n_vars: 3,
            n_checks: 1,
            var_to_check: vec![vec![0], vec![0], vec![0]],
            check_to_var: vec![vec![0, 1, 2]],
        })
        .unwrap()
    }

    /// 3-fold repetition as a tree: checks (v0,v1) and (v0,v2).
    fn repetition3() -> LdpcCode {
        LdpcCode::from_matrix(AlistMatrix {
            n_vars: 3,
            n_checks: 2,
            var_to_check: vec![vec![0, 1], vec![0], vec![1]],
            check_to_var: vec![vec![0, 1], vec![0, 2]],
        })
        .unwrap()
    }

    #[test]
    fn zero_input_stays_zero() {
        let code = hamming();
        let mut state = BpState::new(&code);
        let lb = bp_step(&mut state, &[0.0; 7], &code);
        assert!(lb.iter().all(|&l| l == 0.0));
        assert!(state.c2v.iter().all(|&m| m == 0.0));
        assert!(state.v2c.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn single_parity_check_closed_form() {
        let code = spc3();
        let mut state = BpState::new(&code);
        let input = [2.0, 2.0, -2.0];
        bp_step(&mut state, &input, &code);
        // c2v to var 0 excludes var 0: 2 atanh(tanh(1) tanh(-1)).
        let expect = 2.0 * (1f64.tanh() * (-1f64).tanh()).atanh();
        assert!((expect + 1.3250).abs() < 5e-5, "frozen value sanity: {expect}");
        let e0 = code.check_edges[0][0].1;
        assert!((state.c2v[e0] - expect).abs() < 1e-12);
        // And to var 2: 2 atanh(tanh(1) tanh(1)) > 0.
        let e2 = code.check_edges[0][2].1;
        let expect2 = 2.0 * (1f64.tanh() * 1f64.tanh()).atanh();
        assert!((state.c2v[e2] - expect2).abs() < 1e-12);
    }

    #[test]
    fn sign_symmetry() {
        let code = hamming();
        let input = [1.5, -0.3, 0.8, -2.0, 0.1, 0.0, 2.5];
        let neg: Vec<f64> = input.iter().map(|l| -l).collect();
        let mut s1 = BpState::new(&code);
        let mut s2 = BpState::new(&code);
        for _ in 0..3 {
            let lb1 = bp_step(&mut s1, &input, &code);
            let lb2 = bp_step(&mut s2, &neg, &code);
            for (a, b) in lb1.iter().zip(&lb2) {
                assert!((a + b).abs() < 1e-12);
            }
        }
        for (a, b) in s1.c2v.iter().zip(&s2.c2v) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn extrinsic_exclusion_is_exact() {
        // The c2v message into a variable must not move when that variable's
        // own input LLR changes (within a single step).
        let code = hamming();
        let mut input = [0.7, -1.1, 0.4, 0.9, -0.2, 1.3, -0.6];
        let mut s1 = BpState::new(&code);
        bp_step(&mut s1, &input, &code);
        input[3] += 0.5;
        let mut s2 = BpState::new(&code);
        bp_step(&mut s2, &input, &code);
        for edges in &code.check_edges {
            for &(v, e) in edges {
                if v == 3 {
                    assert_eq!(s1.c2v[e], s2.c2v[e]);
                }
            }
        }
    }

    #[test]
    fn messages_stay_bounded_and_finite() {
        let code = hamming();
        let input = [LLR_MAX, -LLR_MAX, LLR_MAX, LLR_MAX, -LLR_MAX, LLR_MAX, -LLR_MAX];
        let mut state = BpState::new(&code);
        for _ in 0..10 {
            let lb = bp_step(&mut state, &input, &code);
            for &l in &lb {
                assert!(l.is_finite());
            }
            for m in state.c2v.iter().chain(&state.v2c) {
                assert!(m.is_finite() && m.abs() <= LLR_MAX, "{m}");
            }
        }
    }

    #[test]
    fn valid_codeword_converges_immediately() {
        let code = hamming();
        let cw = code.encode(&[1, 0, 1, 1]).unwrap();
        let llr: Vec<f64> = cw.iter().map(|&b| if b == 0 { 20.0 } else { -20.0 }).collect();
        let res = decode(&llr, &code, 50);
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        assert_eq!(res.hard_bits, cw);
    }

    #[test]
    fn corrects_a_single_flip() {
        let code = hamming();
        let cw = code.encode(&[0, 1, 1, 0]).unwrap();
        let mut llr: Vec<f64> = cw.iter().map(|&b| if b == 0 { 4.0 } else { -4.0 }).collect();
        llr[2] = -llr[2];
        let res = decode(&llr, &code, 50);
        assert!(res.converged);
        assert_eq!(res.hard_bits, cw);
    }

    /// Exhaustive bitwise MAP LLRs: weight exp(-sum_{j: c_j=1} l_j) per
    /// codeword, marginalized per bit.
    fn map_llrs(code: &LdpcCode, input: &[f64]) -> Vec<f64> {
        let words: Vec<Vec<u8>> = (0u32..1 << code.n)
            .map(|w| (0..code.n).map(|i| (w >> i & 1) as u8).collect::<Vec<u8>>())
            .filter(|bits| code.syndrome(bits).unwrap())
            .collect();
        (0..code.n)
            .map(|v| {
                let mut s0: f64 = 0.0;
                let mut s1: f64 = 0.0;
                for cw in &words {
                    let w = (-cw
                        .iter()
                        .zip(input)
                        .filter(|(&b, _)| b == 1)
                        .map(|(_, &l)| l)
                        .sum::<f64>())
                        .exp();
                    if cw[v] == 0 {
                        s0 += w;
                    } else {
                        s1 += w;
                    }
                }
                s0.ln() - s1.ln()
            })
            .collect()
    }

    #[test]
    fn tree_code_posterior_equals_map() {
        let code = repetition3();
        for input in [[2.0, 2.0, -2.0], [0.5, -1.0, 0.3], [-3.0, 1.0, 1.0]] {
            let map = map_llrs(&code, &input);
            // Repetition code MAP: every bit's posterior is the sum.
            let total: f64 = input.iter().sum();
            for &m in &map {
                assert!((m - total).abs() < 1e-12);
            }
            let res = decode_opts(&input, &code, 5, false);
            for (a, b) in res.llr.iter().zip(&map) {
                assert!((a - b).abs() < 1e-9, "bp {a} map {b}");
            }
        }
    }
}
