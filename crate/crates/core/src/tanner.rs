//! Tanner graph of a parity-check matrix and length-4 cycle statistics.

use crate::codes::BinaryMatrix;

/// Bipartite variable/check graph. Edge ids are dense and follow a
/// row-major scan of H, so they are stable for a given matrix.
#[derive(Debug, Clone)]
pub struct TannerGraph {
    n_var: usize,
    n_check: usize,
    /// (check, var) per edge id.
    edges: Vec<(usize, usize)>,
    var_edges: Vec<Vec<usize>>,
    check_edges: Vec<Vec<usize>>,
}

impl TannerGraph {
    pub fn from_parity_check(h: &BinaryMatrix) -> Self {
        let (n_check, n_var) = (h.rows(), h.cols());
        let mut edges = Vec::new();
        let mut var_edges = vec![Vec::new(); n_var];
        let mut check_edges = vec![Vec::new(); n_check];
        for c in 0..n_check {
            for v in 0..n_var {
                if h.get(c, v) {
                    let id = edges.len();
                    edges.push((c, v));
                    var_edges[v].push(id);
                    check_edges[c].push(id);
                }
            }
        }
        Self { n_var, n_check, edges, var_edges, check_edges }
    }

    pub fn n_var(&self) -> usize {
        self.n_var
    }

    pub fn n_check(&self) -> usize {
        self.n_check
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// (check, var) endpoints of an edge id.
    pub fn edge(&self, id: usize) -> (usize, usize) {
        self.edges[id]
    }

    pub fn var_edges(&self, v: usize) -> &[usize] {
        &self.var_edges[v]
    }

    pub fn check_edges(&self, c: usize) -> &[usize] {
        &self.check_edges[c]
    }

    /// Check indices adjacent to variable v.
    pub fn var_adj(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.var_edges[v].iter().map(|&e| self.edges[e].0)
    }

    /// Variable indices adjacent to check c.
    pub fn check_adj(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.check_edges[c].iter().map(|&e| self.edges[e].1)
    }

    pub fn var_degree(&self, v: usize) -> usize {
        self.var_edges[v].len()
    }
}

/// Per-variable length-4 cycle participation counts.
///
/// For every unordered check pair sharing a variable set S with |S| ≥ 2,
/// each v ∈ S lies on |S|−1 distinct quadrilaterals through that pair, and
/// the pair contributes C(|S|,2) cycles in total — so the per-variable sum
/// is exactly twice the cycle count.
pub fn count_4cycles_per_vnode(g: &TannerGraph) -> Vec<u64> {
    let mut counts = vec![0u64; g.n_var()];
    let mut shared = Vec::new();
    for c1 in 0..g.n_check() {
        let mut on_c1 = vec![false; g.n_var()];
        for v in g.check_adj(c1) {
            on_c1[v] = true;
        }
        for c2 in c1 + 1..g.n_check() {
            shared.clear();
            shared.extend(g.check_adj(c2).filter(|&v| on_c1[v]));
            if shared.len() >= 2 {
                for &v in &shared {
                    counts[v] += (shared.len() - 1) as u64;
                }
            }
        }
    }
    counts
}

/// Total number of length-4 cycles in the graph.
pub fn total_4cycles(g: &TannerGraph) -> u64 {
    count_4cycles_per_vnode(g).iter().sum::<u64>() / 2
}

/// Scale per-node counts by a positive normalizer for plotting.
pub fn cycle_histogram(counts: &[u64], normalizer: f64) -> Vec<f64> {
    assert!(normalizer > 0.0, "normalizer must be positive");
    counts.iter().map(|&c| c as f64 / normalizer).collect()
}

/// CSV export of per-node cycle statistics: `node_index,count,normalized`.
pub fn cycle_stats_csv(counts: &[u64], normalizer: f64) -> String {
    let normalized = cycle_histogram(counts, normalizer);
    let mut out = String::from("node_index,count,normalized\n");
    for (i, (&c, nz)) in counts.iter().zip(normalized).enumerate() {
        out.push_str(&format!("{i},{c},{nz}\n"));
    }
    out
}
