//! Permutation selection and decoding: a small MLP scores each automorphism
//! for a given noisy word from its attention embedding plus reliability and
//! syndrome features; belief propagation then decodes under the best-ranked
//! permutations. Embedder and classifier are trained jointly on decode
//! success labels.

use crate::bp::{self, BPConfig, DecodeResult, EdgeWeights};
use crate::channel::{self, generate_training_batch, BatchConfig, ChannelError, LabeledSample};
use crate::codes::{hard_decision, LinearCode, Permutation};
use crate::nn::{adam_step, AdamConfig, NodeId, Param, Tape, Tensor};
use crate::perm2vec::{
    dot, embed_all, read_sections, write_section, CheckpointError, P2vNodes, Perm2VecParams,
    P2V_SECTIONS,
};
use crate::tanner::TannerGraph;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeSet;
use thiserror::Error;

const LEAKY_SLOPE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum GpsError {
    #[error("rank count must be in 1..={max}, got {k}")]
    BadK { k: usize, max: usize },
    #[error("expected a length-{expected} word, got {got}")]
    Length { expected: usize, got: usize },
    #[error("training diverged at batch {batch}: loss is not finite")]
    Diverged { batch: usize, last_good: Box<TrainOutput> },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Scoring head. Weight matrices are stored [out × in]; features are
/// column vectors.
#[derive(Debug, Clone)]
pub struct ClassifierParams {
    /// [d_p × n] projection of the permuted reliability vector |π(ℓ)|.
    pub wl: Param,
    /// [d_p × (n−k)] projection of the permuted word's syndrome.
    pub ws: Param,
    pub w1: Param,
    pub b1: Param,
    pub w2: Param,
    pub b2: Param,
    pub w3: Param,
    pub b3: Param,
    pub w4: Param,
    pub b4: Param,
}

impl ClassifierParams {
    /// Uniform ±sqrt(1/fan_in) weights, zero biases. `d_p` must be even
    /// (the third hidden layer halves it).
    pub fn init(n: usize, n_minus_k: usize, d_p: usize, seed: u64) -> Self {
        assert!(d_p % 2 == 0, "feature width must be even");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weight = |rows: usize, cols: usize| {
            let bound = (1.0 / cols as f64).sqrt();
            Param::new(Tensor::new(
                rows,
                cols,
                (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect(),
            ))
        };
        let wl = weight(d_p, n);
        let ws = weight(d_p, n_minus_k);
        let w1 = weight(2 * d_p, 9 * d_p);
        let w2 = weight(d_p, 2 * d_p);
        let w3 = weight(d_p / 2, d_p);
        let w4 = weight(1, d_p / 2);
        Self {
            wl,
            ws,
            w1,
            b1: Param::new(Tensor::zeros(2 * d_p, 1)),
            w2,
            b2: Param::new(Tensor::zeros(d_p, 1)),
            w3,
            b3: Param::new(Tensor::zeros(d_p / 2, 1)),
            w4,
            b4: Param::new(Tensor::zeros(1, 1)),
        }
    }

    pub fn d_p(&self) -> usize {
        self.wl.value.rows()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.wl,
            &mut self.ws,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
            &mut self.w4,
            &mut self.b4,
        ]
    }
}

fn mat_vec(m: &Tensor, x: &[f64]) -> Vec<f64> {
    (0..m.rows()).map(|r| dot(m.row(r), x)).collect()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// The 9-block feature vector for one (word, permutation) pair: with
/// q the permutation embedding, ℓ' the projected permuted reliabilities and
/// s' the projected syndrome, h = [q; ℓ'; s'; q∘ℓ'; q∘s'; ℓ'∘s';
/// |q−ℓ'|; |q−s'|; |ℓ'−s'|].
fn features(
    llr: &[f64],
    pi: &Permutation,
    q: &[f64],
    code: &LinearCode,
    cls: &ClassifierParams,
) -> Vec<f64> {
    let lp = pi.permute(llr);
    let abs_lp: Vec<f64> = lp.iter().map(|v| v.abs()).collect();
    let synd: Vec<f64> = code.syndrome(&hard_decision(&lp)).iter().map(|&b| b as f64).collect();
    let l = mat_vec(&cls.wl.value, &abs_lp);
    let s = mat_vec(&cls.ws.value, &synd);
    let d_p = cls.d_p();
    let mut h = Vec::with_capacity(9 * d_p);
    h.extend_from_slice(q);
    h.extend_from_slice(&l);
    h.extend_from_slice(&s);
    h.extend((0..d_p).map(|i| q[i] * l[i]));
    h.extend((0..d_p).map(|i| q[i] * s[i]));
    h.extend((0..d_p).map(|i| l[i] * s[i]));
    h.extend((0..d_p).map(|i| (q[i] - l[i]).abs()));
    h.extend((0..d_p).map(|i| (q[i] - s[i]).abs()));
    h.extend((0..d_p).map(|i| (l[i] - s[i]).abs()));
    h
}

/// MLP head: three LeakyReLU layers then a sigmoid output in (0, 1).
fn classify(h: &[f64], cls: &ClassifierParams) -> f64 {
    let layer = |w: &Tensor, b: &Tensor, x: &[f64]| -> Vec<f64> {
        (0..w.rows())
            .map(|r| {
                let z = dot(w.row(r), x) + b.at(r, 0);
                if z > 0.0 { z } else { LEAKY_SLOPE * z }
            })
            .collect()
    };
    let a1 = layer(&cls.w1.value, &cls.b1.value, h);
    let a2 = layer(&cls.w2.value, &cls.b2.value, &a1);
    let a3 = layer(&cls.w3.value, &cls.b3.value, &a2);
    sigmoid(dot(cls.w4.value.row(0), &a3) + cls.b4.value.at(0, 0))
}

/// Predicted probability that decoding `llr` under `pi` succeeds, given the
/// cached embedding `q` of `pi`. Deterministic in its inputs.
pub fn score(
    llr: &[f64],
    pi: &Permutation,
    q: &[f64],
    code: &LinearCode,
    cls: &ClassifierParams,
) -> f64 {
    classify(&features(llr, pi, q, code, cls), cls)
}

/// Indices of the `k` largest scores, descending; ties go to the lower
/// index.
pub fn rank_desc(scores: &[f64], k: usize) -> Result<Vec<usize>, GpsError> {
    if k == 0 || k > scores.len() {
        return Err(GpsError::BadK { k, max: scores.len() });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

/// A code, its automorphisms, trained model parameters, the decoder
/// configuration, and the per-permutation embedding cache.
#[derive(Debug, Clone)]
pub struct GpsSystem {
    pub code: LinearCode,
    pub graph: TannerGraph,
    pub perms: Vec<Permutation>,
    pub p2v: Perm2VecParams,
    pub cls: ClassifierParams,
    pub embeddings: Vec<Vec<f64>>,
    pub bp: BPConfig,
    pub weights: Option<EdgeWeights>,
}

impl GpsSystem {
    pub fn new(
        code: LinearCode,
        perms: Vec<Permutation>,
        p2v: Perm2VecParams,
        cls: ClassifierParams,
        bp: BPConfig,
        weights: Option<EdgeWeights>,
    ) -> Self {
        let graph = TannerGraph::from_parity_check(&code.h);
        let embeddings = embed_all(&perms, &p2v);
        Self { code, graph, perms, p2v, cls, embeddings, bp, weights }
    }

    /// Score every permutation for one received word's LLR vector.
    pub fn scores(&self, llr: &[f64]) -> Vec<f64> {
        self.perms
            .par_iter()
            .zip(&self.embeddings)
            .map(|(pi, q)| score(llr, pi, q, &self.code, &self.cls))
            .collect()
    }

    /// The `k` best-ranked permutation indices for one word.
    pub fn select(&self, llr: &[f64], k: usize) -> Result<Vec<usize>, GpsError> {
        if llr.len() != self.code.n {
            return Err(GpsError::Length { expected: self.code.n, got: llr.len() });
        }
        rank_desc(&self.scores(llr), k)
    }
}

/// Squared Euclidean distance between the received word and the modulated
/// candidate.
fn bpsk_distance(y: &[f64], c_hat: &[u8]) -> f64 {
    let mut d = 0.0;
    for (yi, &ci) in y.iter().zip(c_hat) {
        let x = if ci == 0 { 1.0 } else { -1.0 };
        d += (yi - x) * (yi - x);
    }
    d
}

/// Pick the winning candidate: syndrome-satisfying candidates rank before
/// failing ones, then smaller distance to `y` wins; remaining ties keep the
/// earliest candidate.
pub fn best_candidate(y: &[f64], candidates: &[DecodeResult]) -> usize {
    assert!(!candidates.is_empty());
    let mut best = 0;
    let mut best_dist = bpsk_distance(y, &candidates[0].c_hat);
    for (i, cand) in candidates.iter().enumerate().skip(1) {
        let d = bpsk_distance(y, &cand.c_hat);
        let better = (cand.success && !candidates[best].success)
            || (cand.success == candidates[best].success && d < best_dist);
        if better {
            best = i;
            best_dist = d;
        }
    }
    best
}

/// Decode under the single best-scoring permutation.
pub fn decode_gps(y: &[f64], sigma: f64, sys: &GpsSystem) -> Result<DecodeResult, GpsError> {
    let llr = channel::llr(y, sigma)?;
    let top = sys.select(&llr, 1)?[0];
    Ok(bp::decode_permuted(y, &sys.perms[top], &sys.graph, &sys.bp, sigma, sys.weights.as_ref()))
}

/// Decode under the top-κ permutations and return the best candidate.
/// κ = 1 reduces to `decode_gps`.
pub fn list_decode_topk(
    y: &[f64],
    sigma: f64,
    sys: &GpsSystem,
    kappa: usize,
) -> Result<DecodeResult, GpsError> {
    let llr = channel::llr(y, sigma)?;
    let ranked = sys.select(&llr, kappa)?;
    let mut candidates: Vec<DecodeResult> = ranked
        .iter()
        .map(|&p| bp::decode_permuted(y, &sys.perms[p], &sys.graph, &sys.bp, sigma, sys.weights.as_ref()))
        .collect();
    Ok(candidates.swap_remove(best_candidate(y, &candidates)))
}

/// Tape-node handles for the classifier tensors.
#[derive(Debug, Clone, Copy)]
pub struct ClsNodes {
    pub wl: NodeId,
    pub ws: NodeId,
    pub w1: NodeId,
    pub b1: NodeId,
    pub w2: NodeId,
    pub b2: NodeId,
    pub w3: NodeId,
    pub b3: NodeId,
    pub w4: NodeId,
    pub b4: NodeId,
}

impl ClsNodes {
    pub fn leaf(tape: &mut Tape, c: &ClassifierParams) -> Self {
        Self {
            wl: tape.leaf(c.wl.value.clone()),
            ws: tape.leaf(c.ws.value.clone()),
            w1: tape.leaf(c.w1.value.clone()),
            b1: tape.leaf(c.b1.value.clone()),
            w2: tape.leaf(c.w2.value.clone()),
            b2: tape.leaf(c.b2.value.clone()),
            w3: tape.leaf(c.w3.value.clone()),
            b3: tape.leaf(c.b3.value.clone()),
            w4: tape.leaf(c.w4.value.clone()),
            b4: tape.leaf(c.b4.value.clone()),
        }
    }
}

/// Pure per-batch data for one forward/backward pass: distinct permutation
/// maps, each sample's slot into them, feature matrices with one column per
/// sample, and the labels.
pub struct BatchInputs<'a> {
    pub maps: Vec<&'a [usize]>,
    pub slots: Vec<usize>,
    pub abs_llr: Tensor,
    pub synd: Tensor,
    pub labels: Vec<f64>,
    pub d_p: usize,
}

/// Assemble `BatchInputs` from generated samples. Each sample's LLRs are
/// recovered from its own SNR, permuted, and reduced to the features the
/// scoring head sees.
pub fn prepare_batch<'a>(
    samples: &[LabeledSample],
    code: &LinearCode,
    perms: &'a [Permutation],
    d_p: usize,
) -> BatchInputs<'a> {
    let n = code.n;
    let b = samples.len();
    let distinct: Vec<usize> = samples
        .iter()
        .map(|s| s.perm_index)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let maps: Vec<&[usize]> = distinct.iter().map(|&p| perms[p].map()).collect();
    let slots: Vec<usize> = samples
        .iter()
        .map(|s| distinct.binary_search(&s.perm_index).expect("index seen above"))
        .collect();
    let mut abs_llr = Tensor::zeros(n, b);
    let mut synd = Tensor::zeros(n - code.k, b);
    for (col, s) in samples.iter().enumerate() {
        let sigma = channel::sigma_from_ebn0(s.snr_db, code.rate());
        let llr = channel::llr(&s.y, sigma).expect("generated sigma is positive");
        let lp = perms[s.perm_index].permute(&llr);
        for (i, v) in lp.iter().enumerate() {
            abs_llr.set(i, col, v.abs());
        }
        for (i, &bit) in code.syndrome(&hard_decision(&lp)).iter().enumerate() {
            synd.set(i, col, bit as f64);
        }
    }
    let labels = samples.iter().map(|s| s.label as f64).collect();
    BatchInputs { maps, slots, abs_llr, synd, labels, d_p }
}

/// Differentiable mean BCE over a batch: attention embeddings are built once
/// per distinct permutation and shared by every sample that drew it (the
/// parameters are fixed within the pass, so this equals recomputing per
/// sample), then the feature blocks and MLP run column-batched.
pub fn batch_loss(
    tape: &mut Tape,
    p2v: &P2vNodes,
    cls: &ClsNodes,
    inp: &BatchInputs,
) -> NodeId {
    let cols = crate::perm2vec::attention_columns(tape, p2v, &inp.maps, inp.d_p);
    let sample_cols: Vec<NodeId> = inp.slots.iter().map(|&s| cols[s]).collect();
    let q = tape.concat_cols(&sample_cols);
    let abs_leaf = tape.leaf(inp.abs_llr.clone());
    let synd_leaf = tape.leaf(inp.synd.clone());
    let l = tape.matmul(cls.wl, abs_leaf);
    let s = tape.matmul(cls.ws, synd_leaf);
    let ql = tape.mul(q, l);
    let qs = tape.mul(q, s);
    let ls = tape.mul(l, s);
    let dql = tape.sub(q, l);
    let dql = tape.abs(dql);
    let dqs = tape.sub(q, s);
    let dqs = tape.abs(dqs);
    let dls = tape.sub(l, s);
    let dls = tape.abs(dls);
    let h = tape.concat_rows(&[q, l, s, ql, qs, ls, dql, dqs, dls]);
    let mut x = h;
    for (w, b) in [(cls.w1, cls.b1), (cls.w2, cls.b2), (cls.w3, cls.b3)] {
        let z = tape.matmul(w, x);
        let z = tape.add_col_broadcast(z, b);
        x = tape.leaky_relu(z, LEAKY_SLOPE);
    }
    let g = tape.matmul(cls.w4, x);
    let g = tape.add_col_broadcast(g, cls.b4);
    let p = tape.sigmoid(g);
    tape.bce_mean(p, &inp.labels)
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub d_w: usize,
    pub d_p: usize,
    pub batch_size: usize,
    pub num_batches: usize,
    pub snr_db_range: (f64, f64),
    pub lr: f64,
    pub seed: u64,
    /// Heldout evaluation / log / snapshot cadence in batches.
    pub log_every: usize,
    /// Decoder configuration used both for labels and at inference.
    pub bp: BPConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d_w: 80,
            d_p: 80,
            batch_size: 256,
            num_batches: 20_000,
            snr_db_range: (1.0, 7.0),
            lr: 1e-3,
            seed: 0,
            log_every: 100,
            bp: BPConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub batch: usize,
    pub loss: f64,
    pub heldout_loss: f64,
}

pub fn training_log_csv(rows: &[TrainLogRow]) -> String {
    let mut out = String::from("batch,loss,heldout_loss\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.batch, r.loss, r.heldout_loss));
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub p2v: Perm2VecParams,
    pub cls: ClassifierParams,
    pub log: Vec<TrainLogRow>,
}

/// Batch index reserved for the held-out evaluation batch; training batches
/// count up from zero and never reach it.
const HELDOUT_BATCH: u64 = u32::MAX as u64;

fn forward_loss(
    p2v: &Perm2VecParams,
    cls: &ClassifierParams,
    inp: &BatchInputs,
) -> f64 {
    let mut tape = Tape::new();
    let pn = P2vNodes::leaf(&mut tape, p2v);
    let cn = ClsNodes::leaf(&mut tape, cls);
    let loss = batch_loss(&mut tape, &pn, &cn, inp);
    tape.value(loss).data()[0]
}

fn pull_grad(tape: &Tape, id: NodeId, param: &mut Param) {
    let g = tape.grad(id).data();
    for (dst, src) in param.grad.data_mut().iter_mut().zip(g) {
        *dst += src;
    }
}

/// Jointly train the embedder and classifier with Adam on balanced batches
/// of decode-success labels. `v_init` seeds the positional table from node
/// embeddings of the code's Tanner graph. Loss trajectories are
/// reproducible bit for bit for a fixed seed; a non-finite loss aborts with
/// the most recent snapshot.
pub fn train(
    code: &LinearCode,
    perms: &[Permutation],
    v_init: &Tensor,
    cfg: &TrainConfig,
) -> Result<TrainOutput, GpsError> {
    let graph = TannerGraph::from_parity_check(&code.h);
    let mut p2v = Perm2VecParams::init(code.n, cfg.d_w, cfg.d_p, v_init, cfg.seed);
    let mut cls =
        ClassifierParams::init(code.n, code.n - code.k, cfg.d_p, cfg.seed ^ 0xC1A5_51F1);
    let adam = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
    let mut bcfg = BatchConfig::new(cfg.batch_size, cfg.seed);
    bcfg.snr_db_range = cfg.snr_db_range;
    let label = |llr_p: &[f64]| bp::decode(llr_p, &graph, &cfg.bp, None).success;

    let heldout_samples = generate_training_batch(code, perms, &bcfg, HELDOUT_BATCH, &label)?;
    let heldout = prepare_batch(&heldout_samples, code, perms, cfg.d_p);

    let mut log: Vec<TrainLogRow> = Vec::new();
    let mut snapshot = TrainOutput { p2v: p2v.clone(), cls: cls.clone(), log: log.clone() };
    for b in 0..cfg.num_batches {
        let samples = generate_training_batch(code, perms, &bcfg, b as u64, &label)?;
        let inp = prepare_batch(&samples, code, perms, cfg.d_p);

        let mut tape = Tape::new();
        let pn = P2vNodes::leaf(&mut tape, &p2v);
        let cn = ClsNodes::leaf(&mut tape, &cls);
        let loss = batch_loss(&mut tape, &pn, &cn, &inp);
        let loss_val = tape.value(loss).data()[0];
        if !loss_val.is_finite() {
            return Err(GpsError::Diverged { batch: b, last_good: Box::new(snapshot) });
        }
        tape.backward(loss);
        for (id, param) in [
            (pn.u, &mut p2v.u),
            (pn.v, &mut p2v.v),
            (pn.q, &mut p2v.q),
            (pn.k, &mut p2v.k),
            (pn.vp, &mut p2v.vp),
        ] {
            pull_grad(&tape, id, param);
        }
        for (id, param) in [
            (cn.wl, &mut cls.wl),
            (cn.ws, &mut cls.ws),
            (cn.w1, &mut cls.w1),
            (cn.b1, &mut cls.b1),
            (cn.w2, &mut cls.w2),
            (cn.b2, &mut cls.b2),
            (cn.w3, &mut cls.w3),
            (cn.b3, &mut cls.b3),
            (cn.w4, &mut cls.w4),
            (cn.b4, &mut cls.b4),
        ] {
            pull_grad(&tape, id, param);
        }
        drop(tape);
        let mut all: Vec<&mut Param> = p2v.params_mut();
        all.extend(cls.params_mut());
        adam_step(&mut all, &adam);

        if b % cfg.log_every == 0 || b + 1 == cfg.num_batches {
            let heldout_loss = forward_loss(&p2v, &cls, &heldout);
            log.push(TrainLogRow { batch: b, loss: loss_val, heldout_loss });
            log::info!("batch {b}: loss {loss_val:.4}, heldout {heldout_loss:.4}");
            snapshot = TrainOutput { p2v: p2v.clone(), cls: cls.clone(), log: log.clone() };
        }
    }
    Ok(TrainOutput { p2v, cls, log })
}

pub const CLS_SECTIONS: [&str; 10] =
    ["Wl", "Ws", "W1", "b1", "W2", "b2", "W3", "b3", "w4", "b4"];

/// Serialize as `GPS v1`: the embedder block followed by the classifier
/// sections.
pub fn write_gps(p2v: &Perm2VecParams, cls: &ClassifierParams) -> String {
    let mut out = String::from("GPS v1\n");
    out.push_str(&crate::perm2vec::write_perm2vec(p2v));
    for (name, t) in CLS_SECTIONS.iter().zip([
        &cls.wl.value,
        &cls.ws.value,
        &cls.w1.value,
        &cls.b1.value,
        &cls.w2.value,
        &cls.b2.value,
        &cls.w3.value,
        &cls.b3.value,
        &cls.w4.value,
        &cls.b4.value,
    ]) {
        write_section(&mut out, name, t);
    }
    out
}

pub fn read_gps(text: &str) -> Result<(Perm2VecParams, ClassifierParams), CheckpointError> {
    let mut lines = text.lines();
    let magic = lines.next().ok_or_else(|| CheckpointError::Format("empty file".into()))?;
    if magic.trim() != "GPS v1" {
        return Err(CheckpointError::Format(format!("bad magic line {magic:?}")));
    }
    let inner = lines.next().unwrap_or("");
    if inner.trim() != "PERM2VEC v1" {
        return Err(CheckpointError::Format(format!("expected embedder block, found {inner:?}")));
    }
    let p2v_tensors = read_sections(&mut lines, &P2V_SECTIONS)?;
    let [u, v, q, k, vp] = <[Tensor; 5]>::try_from(p2v_tensors).expect("five sections read");
    let cls_tensors = read_sections(&mut lines, &CLS_SECTIONS)?;
    let [wl, ws, w1, b1, w2, b2, w3, b3, w4, b4] =
        <[Tensor; 10]>::try_from(cls_tensors).expect("ten sections read");
    Ok((
        Perm2VecParams {
            u: Param::new(u),
            v: Param::new(v),
            q: Param::new(q),
            k: Param::new(k),
            vp: Param::new(vp),
        },
        ClassifierParams {
            wl: Param::new(wl),
            ws: Param::new(ws),
            w1: Param::new(w1),
            b1: Param::new(b1),
            w2: Param::new(w2),
            b2: Param::new(b2),
            w3: Param::new(w3),
            b3: Param::new(b3),
            w4: Param::new(w4),
            b4: Param::new(b4),
        },
    ))
}
