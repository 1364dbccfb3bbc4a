//! Sum-product belief propagation with syndrome early stopping and optional
//! per-edge message weights.

use crate::codes::{hard_decision, Permutation};
use crate::tanner::TannerGraph;
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct BPConfig {
    pub max_iters: usize,
    pub early_stop: bool,
    /// Message magnitude cap in LLR units; keeps atanh finite.
    pub clip: f64,
}

impl Default for BPConfig {
    fn default() -> Self {
        Self { max_iters: 5, early_stop: true, clip: 20.0 }
    }
}

/// Per-edge, per-iteration multiplicative weights applied to
/// variable-to-check messages. All ones reproduces plain BP exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights {
    n_edges: usize,
    n_iters: usize,
    /// Flat, edge-major: w[e * n_iters + it].
    w: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("weight table needs {expected} values, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("weight {index} is {value}, must be finite and positive")]
    BadValue { index: usize, value: f64 },
    #[error("weights checkpoint: {0}")]
    Format(String),
}

impl EdgeWeights {
    pub fn new(n_edges: usize, n_iters: usize, w: Vec<f64>) -> Result<Self, WeightsError> {
        if w.len() != n_edges * n_iters {
            return Err(WeightsError::BadLength { expected: n_edges * n_iters, got: w.len() });
        }
        if let Some((i, &v)) = w.iter().enumerate().find(|(_, v)| !v.is_finite() || **v <= 0.0) {
            return Err(WeightsError::BadValue { index: i, value: v });
        }
        Ok(Self { n_edges, n_iters, w })
    }

    pub fn ones(n_edges: usize, n_iters: usize) -> Self {
        Self { n_edges, n_iters, w: vec![1.0; n_edges * n_iters] }
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn n_iters(&self) -> usize {
        self.n_iters
    }

    #[inline]
    fn at(&self, edge: usize, iter: usize) -> f64 {
        self.w[edge * self.n_iters + iter]
    }

    /// Serialize as `WBP v1`: header, `E iters`, then E×iters reals in
    /// edge-id order.
    pub fn write_text(&self) -> String {
        let mut out = format!("WBP v1\n{} {}\n", self.n_edges, self.n_iters);
        for e in 0..self.n_edges {
            let row: Vec<String> =
                (0..self.n_iters).map(|it| self.at(e, it).to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn read_text(text: &str) -> Result<Self, WeightsError> {
        let mut lines = text.lines();
        let magic = lines.next().ok_or_else(|| WeightsError::Format("empty file".into()))?;
        if magic.trim() != "WBP v1" {
            return Err(WeightsError::Format(format!("bad magic line {magic:?}")));
        }
        let dims = lines.next().ok_or_else(|| WeightsError::Format("missing dims".into()))?;
        let mut it = dims.split_whitespace();
        let parse = |s: Option<&str>| -> Result<usize, WeightsError> {
            s.ok_or_else(|| WeightsError::Format("missing dimension".into()))?
                .parse()
                .map_err(|e| WeightsError::Format(format!("bad dimension: {e}")))
        };
        let (n_edges, n_iters) = (parse(it.next())?, parse(it.next())?);
        let w: Result<Vec<f64>, _> = lines
            .flat_map(str::split_whitespace)
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|e| WeightsError::Format(format!("bad weight {tok:?}: {e}")))
            })
            .collect();
        Self::new(n_edges, n_iters, w?)
    }
}

#[derive(Debug, Clone)]
pub struct DecodeResult {
    pub c_hat: Vec<u8>,
    pub success: bool,
    pub iters_used: usize,
    pub final_llr: Vec<f64>,
}

fn syndrome_is_zero(graph: &TannerGraph, c_hat: &[u8]) -> bool {
    (0..graph.n_check()).all(|c| graph.check_adj(c).fold(0u8, |acc, v| acc ^ c_hat[v]) == 0)
}

/// Flooding-schedule sum-product decoding of one LLR vector.
///
/// Per iteration: variable-to-check m_{v→c} = w_e·(ℓ_v + Σ other check
/// messages), check-to-variable m_{c→v} = 2·atanh(∏ other tanh(m/2)), then
/// a hard decision on the marginals with a syndrome check. The syndrome is
/// also checked before the first iteration, so clean inputs return at
/// iteration 0. All messages are clipped to ±cfg.clip.
///
/// Exclude-one products and sums run in adjacency order so results are
/// reproducible bit for bit.
pub fn decode(
    llr_in: &[f64],
    graph: &TannerGraph,
    cfg: &BPConfig,
    weights: Option<&EdgeWeights>,
) -> DecodeResult {
    let n = graph.n_var();
    assert_eq!(llr_in.len(), n, "LLR length must match variable count");
    if let Some(w) = weights {
        assert_eq!(w.n_edges(), graph.n_edges(), "weight table edge count mismatch");
        assert!(w.n_iters() >= cfg.max_iters, "weight table has too few iterations");
    }

    let mut c_hat = hard_decision(llr_in);
    if cfg.early_stop && syndrome_is_zero(graph, &c_hat) {
        return DecodeResult { c_hat, success: true, iters_used: 0, final_llr: llr_in.to_vec() };
    }

    let e_count = graph.n_edges();
    let mut m_vc = vec![0.0; e_count];
    let mut m_cv = vec![0.0; e_count];
    let mut tanh_half = vec![0.0; e_count];
    let mut final_llr = llr_in.to_vec();

    for iter in 1..=cfg.max_iters {
        for v in 0..n {
            let edges = graph.var_edges(v);
            for (slot, &e) in edges.iter().enumerate() {
                let mut sum = llr_in[v];
                for (other, &e2) in edges.iter().enumerate() {
                    if other != slot {
                        sum += m_cv[e2];
                    }
                }
                if let Some(w) = weights {
                    sum *= w.at(e, iter - 1);
                }
                m_vc[e] = sum.clamp(-cfg.clip, cfg.clip);
            }
        }

        for e in 0..e_count {
            tanh_half[e] = (m_vc[e] / 2.0).tanh();
        }
        for c in 0..graph.n_check() {
            let edges = graph.check_edges(c);
            for (slot, &e) in edges.iter().enumerate() {
                let mut prod = 1.0;
                for (other, &e2) in edges.iter().enumerate() {
                    if other != slot {
                        prod *= tanh_half[e2];
                    }
                }
                m_cv[e] = (2.0 * prod.atanh()).clamp(-cfg.clip, cfg.clip);
            }
        }

        for v in 0..n {
            let mut sum = llr_in[v];
            for &e in graph.var_edges(v) {
                sum += m_cv[e];
            }
            final_llr[v] = sum;
        }
        c_hat = hard_decision(&final_llr);
        if cfg.early_stop && syndrome_is_zero(graph, &c_hat) {
            return DecodeResult { c_hat, success: true, iters_used: iter, final_llr };
        }
    }

    let success = syndrome_is_zero(graph, &c_hat);
    DecodeResult { c_hat, success, iters_used: cfg.max_iters, final_llr }
}

/// Decode a noisy word under a code automorphism: permute the LLRs, run BP,
/// un-permute the result. Success still means a zero syndrome in the
/// original coordinate order.
pub fn decode_permuted(
    y: &[f64],
    p: &Permutation,
    graph: &TannerGraph,
    cfg: &BPConfig,
    sigma: f64,
    weights: Option<&EdgeWeights>,
) -> DecodeResult {
    let llr = crate::channel::llr(y, sigma).expect("sigma must be positive");
    let r = decode(&p.permute(&llr), graph, cfg, weights);
    DecodeResult {
        c_hat: p.unpermute(&r.c_hat),
        success: r.success,
        iters_used: r.iters_used,
        final_llr: p.unpermute(&r.final_llr),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel;
    use crate::codes::{bch, pg_enumerate, BinaryMatrix};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Straightforward reference decoder working directly off H with dense
    /// message maps; also records the largest message magnitude seen.
    fn reference_decode(
        llr_in: &[f64],
        h: &BinaryMatrix,
        cfg: &BPConfig,
    ) -> (DecodeResult, f64) {
        let (m, n) = (h.rows(), h.cols());
        let syn_zero = |c_hat: &[u8]| {
            (0..m).all(|r| (0..n).fold(0u8, |a, v| a ^ (h.get(r, v) as u8 & c_hat[v])) == 0)
        };
        let mut c_hat = crate::codes::hard_decision(llr_in);
        if cfg.early_stop && syn_zero(&c_hat) {
            let r = DecodeResult {
                c_hat,
                success: true,
                iters_used: 0,
                final_llr: llr_in.to_vec(),
            };
            return (r, 0.0);
        }
        let mut vc = vec![vec![0.0f64; n]; m];
        let mut cv = vec![vec![0.0f64; n]; m];
        let mut final_llr = llr_in.to_vec();
        let mut max_msg: f64 = 0.0;
        for iter in 1..=cfg.max_iters {
            for v in 0..n {
                for c in 0..m {
                    if !h.get(c, v) {
                        continue;
                    }
                    let mut sum = llr_in[v];
                    for c2 in 0..m {
                        if c2 != c && h.get(c2, v) {
                            sum += cv[c2][v];
                        }
                    }
                    vc[c][v] = sum.clamp(-cfg.clip, cfg.clip);
                    max_msg = max_msg.max(vc[c][v].abs());
                }
            }
            for c in 0..m {
                for v in 0..n {
                    if !h.get(c, v) {
                        continue;
                    }
                    let mut prod = 1.0;
                    for v2 in 0..n {
                        if v2 != v && h.get(c, v2) {
                            prod *= (vc[c][v2] / 2.0).tanh();
                        }
                    }
                    cv[c][v] = (2.0 * prod.atanh()).clamp(-cfg.clip, cfg.clip);
                    max_msg = max_msg.max(cv[c][v].abs());
                }
            }
            for v in 0..n {
                let mut sum = llr_in[v];
                for c in 0..m {
                    if h.get(c, v) {
                        sum += cv[c][v];
                    }
                }
                final_llr[v] = sum;
            }
            c_hat = crate::codes::hard_decision(&final_llr);
            if cfg.early_stop && syn_zero(&c_hat) {
                let r = DecodeResult { c_hat, success: true, iters_used: iter, final_llr };
                return (r, max_msg);
            }
        }
        let success = syn_zero(&c_hat);
        let r =
            DecodeResult { c_hat, success, iters_used: cfg.max_iters, final_llr };
        (r, max_msg)
    }

    #[test]
    fn noiseless_codeword_exits_before_iterating() {
        let code = bch(31, 16).unwrap();
        let graph = TannerGraph::from_parity_check(&code.h);
        let c = code.encode(&(0..16).map(|i| (i % 2) as u8).collect::<Vec<_>>());
        let llr: Vec<f64> = c.iter().map(|&b| if b == 0 { 5.0 } else { -5.0 }).collect();
        let r = decode(&llr, &graph, &BPConfig::default(), None);
        assert!(r.success);
        assert_eq!(r.iters_used, 0);
        assert_eq!(r.c_hat, c);
    }

    #[test]
    fn tree_code_matches_exact_map() {
        // two codewords: 000 and 111; MAP under these LLRs picks 000
        let h = BinaryMatrix::from_rows(&[vec![1, 1, 0], vec![0, 1, 1]]);
        let graph = TannerGraph::from_parity_check(&h);
        let r = decode(&[2.0, 2.0, -0.5], &graph, &BPConfig::default(), None);
        assert!(r.success);
        assert_eq!(r.c_hat, vec![0, 0, 0]);
    }

    #[test]
    fn matches_reference_implementation_bit_exactly() {
        let code = bch(31, 16).unwrap();
        let graph = TannerGraph::from_parity_check(&code.h);
        let sigma = channel::sigma_from_ebn0(4.0, code.rate());
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let cfg = BPConfig::default();
        let mut saw_failure = false;
        for _ in 0..200 {
            let msg: Vec<u8> = (0..16).map(|_| rng.random_range(0..2)).collect();
            let x = channel::bpsk_modulate(&code.encode(&msg));
            let y = channel::awgn(&x, sigma, &mut rng);
            let llr = channel::llr(&y, sigma).unwrap();
            let fast = decode(&llr, &graph, &cfg, None);
            let (slow, max_msg) = reference_decode(&llr, &code.h, &cfg);
            assert_eq!(fast.c_hat, slow.c_hat);
            assert_eq!(fast.success, slow.success);
            assert_eq!(fast.iters_used, slow.iters_used);
            assert_eq!(fast.final_llr, slow.final_llr);
            assert!(max_msg <= cfg.clip);
            saw_failure |= !fast.success;
        }
        assert!(saw_failure, "test should exercise non-trivial decoding paths");
    }

    #[test]
    fn plain_bp_equals_all_ones_weights() {
        let code = bch(63, 45).unwrap();
        let graph = TannerGraph::from_parity_check(&code.h);
        let ones = EdgeWeights::ones(graph.n_edges(), 5);
        let sigma = channel::sigma_from_ebn0(3.0, code.rate());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = BPConfig::default();
        for _ in 0..50 {
            let y = channel::awgn(&channel::bpsk_modulate(&vec![0; 63]), sigma, &mut rng);
            let llr = channel::llr(&y, sigma).unwrap();
            let plain = decode(&llr, &graph, &cfg, None);
            let weighted = decode(&llr, &graph, &cfg, Some(&ones));
            assert_eq!(plain.c_hat, weighted.c_hat);
            assert_eq!(plain.final_llr, weighted.final_llr);
        }
    }

    #[test]
    fn zero_iterations_reduce_to_hard_decision() {
        let code = bch(7, 4).unwrap();
        let graph = TannerGraph::from_parity_check(&code.h);
        let cfg = BPConfig { max_iters: 0, ..BPConfig::default() };
        let llr = [1.0, -2.0, 0.5, -0.1, 3.0, 1.0, -1.0];
        let r = decode(&llr, &graph, &cfg, None);
        assert_eq!(r.c_hat, crate::codes::hard_decision(&llr));
    }

    #[test]
    fn success_flag_always_agrees_with_syndrome() {
        let code = bch(31, 16).unwrap();
        let graph = TannerGraph::from_parity_check(&code.h);
        let sigma = channel::sigma_from_ebn0(2.0, code.rate());
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..300 {
            let y = channel::awgn(&channel::bpsk_modulate(&vec![0; 31]), sigma, &mut rng);
            let llr = channel::llr(&y, sigma).unwrap();
            let r = decode(&llr, &graph, &BPConfig::default(), None);
            assert_eq!(r.success, code.is_codeword(&r.c_hat));
        }
    }

    #[test]
    fn permuted_decode_identity_matches_plain() {
        let code = bch(31, 16).unwrap();
        let graph = TannerGraph::from_parity_check(&code.h);
        let sigma = channel::sigma_from_ebn0(4.0, code.rate());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let id = Permutation::identity(31);
        let cfg = BPConfig::default();
        for _ in 0..30 {
            let y = channel::awgn(&channel::bpsk_modulate(&vec![0; 31]), sigma, &mut rng);
            let a = decode_permuted(&y, &id, &graph, &cfg, sigma, None);
            let b = decode(&channel::llr(&y, sigma).unwrap(), &graph, &cfg, None);
            assert_eq!(a.c_hat, b.c_hat);
            assert_eq!(a.final_llr, b.final_llr);
        }
    }

    #[test]
    fn permuted_success_means_zero_syndrome_in_original_order() {
        let code = bch(31, 16).unwrap();
        let graph = TannerGraph::from_parity_check(&code.h);
        let sigma = channel::sigma_from_ebn0(2.0, code.rate());
        let perms = pg_enumerate(31).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for i in 0..100 {
            let y = channel::awgn(&channel::bpsk_modulate(&vec![0; 31]), sigma, &mut rng);
            let p = &perms[i % perms.len()];
            let r = decode_permuted(&y, p, &graph, &BPConfig::default(), sigma, None);
            if r.success {
                assert!(code.is_codeword(&r.c_hat));
            }
        }
    }

    #[test]
    fn some_word_fails_plain_but_succeeds_permuted() {
        // the premise of permutation decoding: at 4 dB some BCH(31,16)
        // words are only decodable after re-ordering coordinates
        let code = bch(31, 16).unwrap();
        let graph = TannerGraph::from_parity_check(&code.h);
        let sigma = channel::sigma_from_ebn0(4.0, code.rate());
        let perms = pg_enumerate(31).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let cfg = BPConfig::default();
        for _ in 0..2000 {
            let y = channel::awgn(&channel::bpsk_modulate(&vec![0; 31]), sigma, &mut rng);
            let llr = channel::llr(&y, sigma).unwrap();
            if decode(&llr, &graph, &cfg, None).success {
                continue;
            }
            for p in &perms {
                let r = decode_permuted(&y, p, &graph, &cfg, sigma, None);
                if r.success && r.c_hat == vec![0; 31] {
                    return;
                }
            }
        }
        panic!("no word found that fails plain BP but decodes under a permutation");
    }

    #[test]
    fn degree_one_check_stays_finite() {
        // empty exclude-one product would be atanh(1) = ∞; clipping bounds it
        let h = BinaryMatrix::from_rows(&[vec![1, 0], vec![1, 1]]);
        let graph = TannerGraph::from_parity_check(&h);
        let r = decode(&[-3.0, 4.0], &graph, &BPConfig::default(), None);
        assert!(r.final_llr.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn weights_roundtrip_text() {
        let w = EdgeWeights::new(3, 2, vec![1.0, 0.5, 2.0, 1.25, 0.75, 1.5]).unwrap();
        let text = w.write_text();
        let back = EdgeWeights::read_text(&text).unwrap();
        assert_eq!(back, w);
        assert_eq!(back.write_text(), text);
    }

    #[test]
    fn weights_validation() {
        assert!(EdgeWeights::new(2, 1, vec![1.0]).is_err());
        assert!(EdgeWeights::new(1, 1, vec![0.0]).is_err());
        assert!(EdgeWeights::new(1, 1, vec![f64::NAN]).is_err());
        assert!(EdgeWeights::read_text("WBP v2\n1 1\n1.0\n").is_err());
    }
}
