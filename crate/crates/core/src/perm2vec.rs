//! Self-attention permutation embedding: a permutation π of n coordinates
//! maps to a vector q_π ∈ R^{d_p} through token + positional embeddings and
//! one attention head, mean-pooled over positions.

use crate::codes::Permutation;
use crate::nn::{NodeId, Param, Tape, Tensor};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint: {0}")]
    Format(String),
}

/// Parameters of the embedder. Token rows U are looked up at π(i), the
/// positional table V at i, so position information never depends on π.
/// Projections act on the right: queries = (U[π]+V)·Q, so Q, K, Vp are
/// stored [d_w × d_p].
#[derive(Debug, Clone)]
pub struct Perm2VecParams {
    pub u: Param,
    pub v: Param,
    pub q: Param,
    pub k: Param,
    pub vp: Param,
}

impl Perm2VecParams {
    /// Fresh parameters: U uniform in ±0.1, V copied from `v_init`
    /// (node-embedding rows), projections uniform in ±sqrt(1/d_w).
    pub fn init(n: usize, d_w: usize, d_p: usize, v_init: &Tensor, seed: u64) -> Self {
        assert_eq!(v_init.shape(), &[n, d_w], "positional init must be [n × d_w]");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |rows: usize, cols: usize, bound: f64| {
            Tensor::new(
                rows,
                cols,
                (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect(),
            )
        };
        let u = uniform(n, d_w, 0.1);
        let proj_bound = (1.0 / d_w as f64).sqrt();
        let q = uniform(d_w, d_p, proj_bound);
        let k = uniform(d_w, d_p, proj_bound);
        let vp = uniform(d_w, d_p, proj_bound);
        Self {
            u: Param::new(u),
            v: Param::new(v_init.clone()),
            q: Param::new(q),
            k: Param::new(k),
            vp: Param::new(vp),
        }
    }

    /// Random positional rows too — for tests and untrained baselines.
    pub fn random(n: usize, d_w: usize, d_p: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let v = Tensor::new(
            n,
            d_w,
            (0..n * d_w).map(|_| rng.random_range(-0.1..0.1)).collect(),
        );
        Self::init(n, d_w, d_p, &v, seed)
    }

    pub fn n(&self) -> usize {
        self.u.value.rows()
    }

    pub fn d_w(&self) -> usize {
        self.u.value.cols()
    }

    pub fn d_p(&self) -> usize {
        self.q.value.cols()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.u, &mut self.v, &mut self.q, &mut self.k, &mut self.vp]
    }
}

/// Accumulating dot product in a fixed 4-way-unrolled order. Every
/// inference-path reduction in this crate funnels through it, so scores are
/// reproducible bit for bit regardless of thread count or batch shape.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n4 = a.len() & !3;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i < n4 {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        i += 4;
    }
    let mut tail = 0.0;
    while i < a.len() {
        tail += a[i] * b[i];
        i += 1;
    }
    (s0 + s1) + (s2 + s3) + tail
}

/// Attention internals (weights and per-position outputs) plus the pooled
/// embedding; the full tensors feed white-box tests.
fn embed_full(pi: &Permutation, p: &Perm2VecParams) -> (Tensor, Tensor, Vec<f64>) {
    let (n, d_w, d_p) = (p.n(), p.d_w(), p.d_p());
    assert_eq!(pi.len(), n, "permutation length must match the table size");

    // w_i = U[π(i)] + V[i]
    let mut w = Tensor::zeros(n, d_w);
    for i in 0..n {
        let (u_row, v_row) = (p.u.value.row(pi.map()[i]), p.v.value.row(i));
        for x in 0..d_w {
            w.set(i, x, u_row[x] + v_row[x]);
        }
    }

    // right projections via pre-transposed tables so rows are contiguous
    let transpose = |t: &Tensor| {
        let mut out = Tensor::zeros(t.cols(), t.rows());
        for r in 0..t.rows() {
            for c in 0..t.cols() {
                out.set(c, r, t.at(r, c));
            }
        }
        out
    };
    let (qt, kt, vt) = (
        transpose(&p.q.value),
        transpose(&p.k.value),
        transpose(&p.vp.value),
    );
    let project = |table: &Tensor| {
        let mut out = Tensor::zeros(n, d_p);
        for i in 0..n {
            for j in 0..d_p {
                out.set(i, j, dot(w.row(i), table.row(j)));
            }
        }
        out
    };
    let (queries, keys, values) = (project(&qt), project(&kt), project(&vt));

    // attention: a = softmax_rows(Q·Kᵀ/√d_p)
    let scale = 1.0 / (d_p as f64).sqrt();
    let mut attn = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            attn.set(i, j, dot(queries.row(i), keys.row(j)) * scale);
        }
    }
    for i in 0..n {
        let row_max = attn.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for j in 0..n {
            let e = (attn.at(i, j) - row_max).exp();
            attn.set(i, j, e);
            sum += e;
        }
        for j in 0..n {
            attn.set(i, j, attn.at(i, j) / sum);
        }
    }

    // p_i = Σ_j a_ij (V w_j); q = mean over i
    let mut outputs = Tensor::zeros(n, d_p);
    for i in 0..n {
        for j in 0..n {
            let a = attn.at(i, j);
            for x in 0..d_p {
                outputs.set(i, x, outputs.at(i, x) + a * values.at(j, x));
            }
        }
    }
    let mut q = vec![0.0; d_p];
    for i in 0..n {
        for x in 0..d_p {
            q[x] += outputs.at(i, x);
        }
    }
    for x in &mut q {
        *x /= n as f64;
    }
    (attn, outputs, q)
}

/// Embed one permutation. Pure and deterministic in (π, params).
pub fn embed(pi: &Permutation, p: &Perm2VecParams) -> Vec<f64> {
    embed_full(pi, p).2
}

/// Embed every permutation once; the result is the inference-time cache,
/// indexed like `perms`.
pub fn embed_all(perms: &[Permutation], p: &Perm2VecParams) -> Vec<Vec<f64>> {
    perms.par_iter().map(|pi| embed(pi, p)).collect()
}

/// Tape-node handles for the five parameter tensors.
#[derive(Debug, Clone, Copy)]
pub struct P2vNodes {
    pub u: NodeId,
    pub v: NodeId,
    pub q: NodeId,
    pub k: NodeId,
    pub vp: NodeId,
}

impl P2vNodes {
    pub fn leaf(tape: &mut Tape, p: &Perm2VecParams) -> Self {
        Self {
            u: tape.leaf(p.u.value.clone()),
            v: tape.leaf(p.v.value.clone()),
            q: tape.leaf(p.q.value.clone()),
            k: tape.leaf(p.k.value.clone()),
            vp: tape.leaf(p.vp.value.clone()),
        }
    }
}

/// Differentiable attention for a stack of permutations sharing one tape.
///
/// Token rows for all permutations are gathered as one [P·n × d_w] block so
/// the three projections run as single matrix products; attention itself is
/// block-diagonal and handled per permutation. Returns one [d_p × 1]
/// embedding column per input permutation.
pub fn attention_columns(
    tape: &mut Tape,
    ids: &P2vNodes,
    perm_maps: &[&[usize]],
    d_p: usize,
) -> Vec<NodeId> {
    assert!(!perm_maps.is_empty());
    let n = perm_maps[0].len();
    let stacked: Vec<usize> = perm_maps.iter().flat_map(|m| m.iter().copied()).collect();
    let u_rows = tape.gather_rows(ids.u, &stacked);
    let v_tiled = tape.concat_rows(&vec![ids.v; perm_maps.len()]);
    let w_all = tape.add(u_rows, v_tiled);
    let q_all = tape.matmul(w_all, ids.q);
    let k_all = tape.matmul(w_all, ids.k);
    let vp_all = tape.matmul(w_all, ids.vp);
    let scale = 1.0 / (d_p as f64).sqrt();

    (0..perm_maps.len())
        .map(|p| {
            let rows: Vec<usize> = (p * n..(p + 1) * n).collect();
            let qp = tape.gather_rows(q_all, &rows);
            let kp = tape.gather_rows(k_all, &rows);
            let vp = tape.gather_rows(vp_all, &rows);
            let logits = tape.matmul_t(qp, false, kp, true);
            let scaled = tape.scale(logits, scale);
            let attn = tape.softmax_rows(scaled);
            let outputs = tape.matmul(attn, vp);
            let pooled = tape.mean_rows(outputs);
            tape.transpose(pooled)
        })
        .collect()
}

pub(crate) fn write_section(out: &mut String, name: &str, t: &Tensor) {
    out.push_str(&format!("{name} {} {}\n", t.rows(), t.cols()));
    for r in 0..t.rows() {
        let row: Vec<String> = t.row(r).iter().map(f64::to_string).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

/// Parse `name rows cols` + rows-of-reals sections in declared order.
pub(crate) fn read_sections<'a>(
    lines: &mut impl Iterator<Item = &'a str>,
    names: &[&str],
) -> Result<Vec<Tensor>, CheckpointError> {
    let mut out = Vec::with_capacity(names.len());
    for &want in names {
        let header = lines
            .next()
            .ok_or_else(|| CheckpointError::Format(format!("missing section {want}")))?;
        let mut toks = header.split_whitespace();
        let name = toks.next().unwrap_or("");
        if name != want {
            return Err(CheckpointError::Format(format!(
                "expected section {want}, found {name:?}"
            )));
        }
        let dims: Vec<usize> = toks
            .map(|t| {
                t.parse()
                    .map_err(|e| CheckpointError::Format(format!("bad dim {t:?}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        let [rows, cols] = dims[..] else {
            return Err(CheckpointError::Format(format!("section {want}: need rows cols")));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = lines.next().ok_or_else(|| {
                CheckpointError::Format(format!("section {want}: truncated"))
            })?;
            for tok in line.split_whitespace() {
                data.push(tok.parse::<f64>().map_err(|e| {
                    CheckpointError::Format(format!("section {want}: bad value {tok:?}: {e}"))
                })?);
            }
        }
        if data.len() != rows * cols {
            return Err(CheckpointError::Format(format!(
                "section {want}: expected {} values, found {}",
                rows * cols,
                data.len()
            )));
        }
        out.push(Tensor::new(rows, cols, data));
    }
    Ok(out)
}

pub const P2V_SECTIONS: [&str; 5] = ["U", "V", "Q", "K", "Vp"];

/// Serialize as `PERM2VEC v1` with sections U, V, Q, K, Vp.
pub fn write_perm2vec(p: &Perm2VecParams) -> String {
    let mut out = String::from("PERM2VEC v1\n");
    for (name, t) in P2V_SECTIONS.iter().zip([
        &p.u.value,
        &p.v.value,
        &p.q.value,
        &p.k.value,
        &p.vp.value,
    ]) {
        write_section(&mut out, name, t);
    }
    out
}

pub fn read_perm2vec(text: &str) -> Result<Perm2VecParams, CheckpointError> {
    let mut lines = text.lines();
    let magic = lines.next().ok_or_else(|| CheckpointError::Format("empty file".into()))?;
    if magic.trim() != "PERM2VEC v1" {
        return Err(CheckpointError::Format(format!("bad magic line {magic:?}")));
    }
    let tensors = read_sections(&mut lines, &P2V_SECTIONS)?;
    let [u, v, q, k, vp] = <[Tensor; 5]>::try_from(tensors).expect("five sections read");
    Ok(Perm2VecParams {
        u: Param::new(u),
        v: Param::new(v),
        q: Param::new(q),
        k: Param::new(k),
        vp: Param::new(vp),
    })
}
