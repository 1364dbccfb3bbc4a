//! Random-walk node embeddings of the Tanner graph: second-order biased
//! walks and skip-gram with negative sampling. The variable-node vectors
//! seed the positional embeddings of the permutation model.

use crate::nn::Tensor;
use crate::tanner::TannerGraph;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct WalkConfig {
    pub num_walks_per_node: usize,
    pub walk_length: usize,
    /// Skip-gram context window.
    pub window: usize,
    /// Return bias: unnormalized weight 1/p for stepping back to the
    /// previous node.
    pub p: f64,
    /// In-out bias: weight 1/q for nodes not adjacent to the previous node.
    pub q: f64,
    pub dim: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            num_walks_per_node: 2000,
            walk_length: 10,
            window: 10,
            p: 1.0,
            q: 1.0,
            dim: 80,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
        }
    }
}

/// Input-side skip-gram vectors, one row per graph node (variables first,
/// then checks).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbeddings {
    pub matrix: Tensor,
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding checkpoint: {0}")]
    Format(String),
}

/// Adjacency lists over the full bipartite graph: nodes 0..n_var are
/// variables, n_var..n_var+n_check are checks. Lists are sorted.
fn bipartite_adjacency(g: &TannerGraph) -> Vec<Vec<u32>> {
    let nv = g.n_var();
    let mut adj = vec![Vec::new(); nv + g.n_check()];
    for v in 0..nv {
        for c in g.var_adj(v) {
            adj[v].push((nv + c) as u32);
            adj[nv + c].push(v as u32);
        }
    }
    for l in &mut adj {
        l.sort_unstable();
    }
    adj
}

/// One biased transition. `prev` is None on the first step (uniform choice).
fn step(adj: &[Vec<u32>], prev: Option<u32>, cur: u32, p: f64, q: f64, rng: &mut impl Rng) -> u32 {
    let neighbors = &adj[cur as usize];
    let Some(prev) = prev else {
        return neighbors[rng.random_range(0..neighbors.len())];
    };
    let prev_adj = &adj[prev as usize];
    let weights: Vec<f64> = neighbors
        .iter()
        .map(|&x| {
            if x == prev {
                1.0 / p
            } else if prev_adj.binary_search(&x).is_ok() {
                1.0
            } else {
                1.0 / q
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        draw -= w;
        if draw <= 0.0 {
            return neighbors[i];
        }
    }
    *neighbors.last().unwrap()
}

fn walks_over(adj: &[Vec<u32>], cfg: &WalkConfig, seed: u64) -> Vec<Vec<u32>> {
    let starts: Vec<u32> = (0..adj.len() as u32)
        .filter(|&s| {
            if adj[s as usize].is_empty() {
                log::warn!("node {s} is isolated; no walks start there");
                false
            } else {
                true
            }
        })
        .collect();
    starts
        .par_iter()
        .flat_map_iter(|&s| {
            (0..cfg.num_walks_per_node).map(move |w| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((s as u64) << 32 | w as u64);
                let mut walk = Vec::with_capacity(cfg.walk_length);
                walk.push(s);
                let mut prev = None;
                let mut cur = s;
                for _ in 1..cfg.walk_length {
                    let next = step(adj, prev, cur, cfg.p, cfg.q, &mut rng);
                    walk.push(next);
                    prev = Some(cur);
                    cur = next;
                }
                walk
            })
        })
        .collect()
}

/// Second-order biased random walks over the full bipartite graph, every
/// start node contributing cfg.num_walks_per_node walks of cfg.walk_length
/// nodes. Each (start, repeat) pair owns an RNG stream, so output does not
/// depend on thread count.
pub fn biased_walks(g: &TannerGraph, cfg: &WalkConfig, seed: u64) -> Vec<Vec<u32>> {
    walks_over(&bipartite_adjacency(g), cfg, seed)
}

/// Per-epoch mean skip-gram loss (positive + negative terms), measured on
/// each pair before its update.
#[derive(Debug, Clone)]
pub struct SkipgramStats {
    pub epoch_loss: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Skip-gram with negative sampling over a walk corpus, single-threaded for
/// reproducibility. Negatives are drawn proportional to corpus frequency^0.75;
/// the learning rate decays linearly over all scheduled updates.
pub fn train_skipgram(
    walks: &[Vec<u32>],
    n_nodes: usize,
    cfg: &WalkConfig,
    seed: u64,
) -> (NodeEmbeddings, SkipgramStats) {
    assert!(!walks.is_empty(), "walk corpus must be non-empty");
    let d = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![0.0f64; n_nodes * d];
    for v in &mut u {
        *v = (rng.random::<f64>() - 0.5) / d as f64;
    }
    let mut v_out = vec![0.0f64; n_nodes * d];

    // negative-sampling distribution: frequency^0.75 over corpus occurrences
    let mut freq = vec![0u64; n_nodes];
    for w in walks {
        for &node in w {
            freq[node as usize] += 1;
        }
    }
    let cum: Vec<f64> = {
        let mut acc = 0.0;
        freq.iter()
            .map(|&f| {
                acc += (f as f64).powf(0.75);
                acc
            })
            .collect()
    };
    let cum_total = *cum.last().unwrap();
    assert!(cum_total > 0.0);
    let draw_negative = move |rng: &mut ChaCha8Rng| -> u32 {
        let x = rng.random::<f64>() * cum_total;
        cum.partition_point(|&c| c < x) as u32
    };

    let pairs_per_epoch: usize = walks
        .iter()
        .map(|w| {
            w.iter()
                .enumerate()
                .map(|(i, _)| {
                    let lo = i.saturating_sub(cfg.window);
                    let hi = (i + cfg.window).min(w.len() - 1);
                    hi - lo
                })
                .sum::<usize>()
        })
        .sum();
    let total_updates = (pairs_per_epoch * cfg.epochs).max(1);
    let mut update_count = 0usize;

    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut grad_u = vec![0.0f64; d];
    for _ in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut loss_terms = 0u64;
        for walk in walks {
            for (i, &center) in walk.iter().enumerate() {
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window).min(walk.len() - 1);
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    let lr = cfg.lr
                        * (1.0 - update_count as f64 / total_updates as f64).max(1e-4);
                    update_count += 1;
                    let cu = center as usize * d;
                    grad_u.fill(0.0);
                    let context = walk[j];
                    for t in 0..=cfg.negatives {
                        let (target, label) = if t == 0 {
                            (context, 1.0)
                        } else {
                            (draw_negative(&mut rng), 0.0)
                        };
                        let tv = target as usize * d;
                        let dot: f64 =
                            (0..d).map(|x| u[cu + x] * v_out[tv + x]).sum();
                        let f = sigmoid(dot);
                        loss_sum -= if label == 1.0 {
                            f.max(1e-12).ln()
                        } else {
                            (1.0 - f).max(1e-12).ln()
                        };
                        let g = (label - f) * lr;
                        for x in 0..d {
                            grad_u[x] += g * v_out[tv + x];
                            v_out[tv + x] += g * u[cu + x];
                        }
                    }
                    loss_terms += 1;
                    for x in 0..d {
                        u[cu + x] += grad_u[x];
                    }
                }
            }
        }
        epoch_loss.push(loss_sum / loss_terms as f64);
    }

    let emb = NodeEmbeddings { matrix: Tensor::new(n_nodes, d, u) };
    assert!(emb.matrix.is_finite(), "training diverged");
    (emb, SkipgramStats { epoch_loss })
}

/// Rows for variable nodes only, in coordinate order.
pub fn variable_node_rows(e: &NodeEmbeddings, g: &TannerGraph) -> Tensor {
    let d = e.matrix.cols();
    let mut out = Tensor::zeros(g.n_var(), d);
    for v in 0..g.n_var() {
        out.data_mut()[v * d..(v + 1) * d].copy_from_slice(e.matrix.row(v));
    }
    out
}

/// Serialize as `NODE2VEC v1`: `n_nodes d_w` then one row per line.
pub fn write_embeddings(e: &NodeEmbeddings) -> String {
    let mut out = format!("NODE2VEC v1\n{} {}\n", e.matrix.rows(), e.matrix.cols());
    for r in 0..e.matrix.rows() {
        let row: Vec<String> = e.matrix.row(r).iter().map(f64::to_string).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_embeddings(text: &str) -> Result<NodeEmbeddings, EmbedError> {
    let mut lines = text.lines();
    let magic = lines.next().ok_or_else(|| EmbedError::Format("empty file".into()))?;
    if magic.trim() != "NODE2VEC v1" {
        return Err(EmbedError::Format(format!("bad magic line {magic:?}")));
    }
    let dims = lines.next().ok_or_else(|| EmbedError::Format("missing dims".into()))?;
    let parsed: Vec<usize> = dims
        .split_whitespace()
        .map(|t| t.parse().map_err(|e| EmbedError::Format(format!("bad dim {t:?}: {e}"))))
        .collect::<Result<_, _>>()?;
    let [n, d] = parsed[..] else {
        return Err(EmbedError::Format("dims line needs two integers".into()));
    };
    let mut data = Vec::with_capacity(n * d);
    for tok in lines.flat_map(str::split_whitespace) {
        data.push(
            tok.parse::<f64>()
                .map_err(|e| EmbedError::Format(format!("bad value {tok:?}: {e}")))?,
        );
    }
    if data.len() != n * d {
        return Err(EmbedError::Format(format!(
            "expected {} values, found {}",
            n * d,
            data.len()
        )));
    }
    Ok(NodeEmbeddings { matrix: Tensor::new(n, d, data) })
}
