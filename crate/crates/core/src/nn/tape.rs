//! Wengert-list reverse-mode differentiation over 2-D tensors.
//!
//! A `Tape` records every operation in execution order; `backward` walks the
//! list once in reverse. Graphs are rebuilt per mini-batch — nothing here is
//! retained across steps except through parameter tensors.

use super::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    /// C = op(A)·op(B) where a transpose flag swaps an operand's strides.
    Matmul { a: NodeId, b: NodeId, ta: bool, tb: bool },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { a: NodeId, c: f64 },
    /// Column vector added to every column of a matrix.
    AddColBroadcast { a: NodeId, col: NodeId },
    Abs { a: NodeId },
    LeakyRelu { a: NodeId, slope: f64 },
    SoftmaxRows { a: NodeId },
    Sigmoid { a: NodeId },
    /// Row lookup: out[r] = src[indices[r]].
    GatherRows { a: NodeId, indices: Vec<usize> },
    /// Vertical stack; parts must share a column count.
    ConcatRows { parts: Vec<NodeId> },
    /// Horizontal stack; parts must share a row count. A node may appear
    /// several times — its gradient accumulates once per appearance.
    ConcatCols { parts: Vec<NodeId> },
    /// Column-wise mean over rows: [n×d] → [1×d].
    MeanRows { a: NodeId },
    Transpose { a: NodeId },
    SumAll { a: NodeId },
    /// Mean binary cross-entropy of probabilities [1×B] against labels,
    /// with inputs clamped away from {0,1}.
    BceMean { p: NodeId, labels: Vec<f64> },
}

struct Node {
    op: Op,
    value: Tensor,
}

pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Tensor>,
    done: bool,
}

const BCE_EPS: f64 = 1e-12;

/// dst[m×n] (+)= alpha · op(A)·op(B), all row-major with transposes folded
/// into strides; `tc` writes the product transposed into dst.
#[allow(clippy::too_many_arguments)]
fn gemm(
    dst: &mut [f64],
    tc: bool,
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    ta: bool,
    b: &[f64],
    tb: bool,
    beta: f64,
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(dst.len(), m * n);
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    let (rsc, csc) = if tc { (1, m as isize) } else { (n as isize, 1) };
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            dst.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), grads: Vec::new(), done: false }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the loss w.r.t. a node; valid after `backward`.
    pub fn grad(&self, id: NodeId) -> &Tensor {
        assert!(self.done, "backward has not run");
        &self.grads[id.0]
    }

    // Non-finite values are allowed to flow through the graph; training
    // checks the loss and aborts with its last snapshot on divergence.
    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// Matrix product with optional transposes: op(a)[m×k] · op(b)[k×n].
    pub fn matmul_t(&mut self, a: NodeId, ta: bool, b: NodeId, tb: bool) -> NodeId {
        let (ar, ac) = (self.value(a).rows(), self.value(a).cols());
        let (br, bc) = (self.value(b).rows(), self.value(b).cols());
        let (m, ka) = if ta { (ac, ar) } else { (ar, ac) };
        let (kb, n) = if tb { (bc, br) } else { (br, bc) };
        assert_eq!(ka, kb, "matmul inner dimensions {ka} vs {kb}");
        let mut out = Tensor::zeros(m, n);
        gemm(
            out.data_mut(),
            false,
            m,
            ka,
            n,
            1.0,
            self.value(a).data(),
            ta,
            self.value(b).data(),
            tb,
            0.0,
        );
        self.push(Op::Matmul { a, b, ta, tb }, out)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.matmul_t(a, false, b, false)
    }

    fn zip_op(&mut self, a: NodeId, b: NodeId, op: Op, f: impl Fn(f64, f64) -> f64) -> NodeId {
        assert_eq!(self.value(a).shape(), self.value(b).shape(), "shape mismatch");
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let t = Tensor::new(self.value(a).rows(), self.value(a).cols(), data);
        self.push(op, t)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip_op(a, b, Op::Add { a, b }, |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip_op(a, b, Op::Sub { a, b }, |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip_op(a, b, Op::Mul { a, b }, |x, y| x * y)
    }

    fn map_op(&mut self, a: NodeId, op: Op, f: impl Fn(f64) -> f64) -> NodeId {
        let t = Tensor::new(
            self.value(a).rows(),
            self.value(a).cols(),
            self.value(a).data().iter().map(|&x| f(x)).collect(),
        );
        self.push(op, t)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        self.map_op(a, Op::Scale { a, c }, |x| c * x)
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        self.map_op(a, Op::Abs { a }, f64::abs)
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> NodeId {
        assert!(slope > 0.0 && slope < 1.0, "slope must be in (0,1)");
        self.map_op(a, Op::LeakyRelu { a, slope }, |x| if x >= 0.0 { x } else { slope * x })
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.map_op(a, Op::Sigmoid { a }, |x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        })
    }

    pub fn add_col_broadcast(&mut self, a: NodeId, col: NodeId) -> NodeId {
        let (m, q) = (self.value(a).rows(), self.value(a).cols());
        assert_eq!(self.value(col).shape(), &[m, 1], "bias must be a column of height {m}");
        let mut out = self.value(a).clone();
        for r in 0..m {
            let bias = self.value(col).data()[r];
            for c in 0..q {
                out.data_mut()[r * q + c] += bias;
            }
        }
        self.push(Op::AddColBroadcast { a, col }, out)
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let (m, n) = (self.value(a).rows(), self.value(a).cols());
        let mut out = Tensor::zeros(m, n);
        for r in 0..m {
            let row = self.value(a).row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for c in 0..n {
                let e = (row[c] - max).exp();
                out.data_mut()[r * n + c] = e;
                sum += e;
            }
            for c in 0..n {
                out.data_mut()[r * n + c] /= sum;
            }
        }
        self.push(Op::SoftmaxRows { a }, out)
    }

    pub fn gather_rows(&mut self, a: NodeId, indices: &[usize]) -> NodeId {
        let cols = self.value(a).cols();
        let mut out = Tensor::zeros(indices.len(), cols);
        for (r, &i) in indices.iter().enumerate() {
            assert!(i < self.value(a).rows(), "row index out of range");
            out.data_mut()[r * cols..(r + 1) * cols].copy_from_slice(self.value(a).row(i));
        }
        self.push(Op::GatherRows { a, indices: indices.to_vec() }, out)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let cols = self.value(parts[0]).cols();
        let rows: usize = parts.iter().map(|&p| self.value(p).rows()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for &p in parts {
            assert_eq!(self.value(p).cols(), cols, "column counts must agree");
            data.extend_from_slice(self.value(p).data());
        }
        self.push(Op::ConcatRows { parts: parts.to_vec() }, Tensor::new(rows, cols, data))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Tensor::zeros(rows, cols);
        let mut c0 = 0;
        for &p in parts {
            let pc = self.value(p).cols();
            assert_eq!(self.value(p).rows(), rows, "row counts must agree");
            for r in 0..rows {
                let src = self.value(p).row(r).to_vec();
                out.data_mut()[r * cols + c0..r * cols + c0 + pc].copy_from_slice(&src);
            }
            c0 += pc;
        }
        self.push(Op::ConcatCols { parts: parts.to_vec() }, out)
    }

    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let (m, n) = (self.value(a).rows(), self.value(a).cols());
        let mut out = Tensor::zeros(1, n);
        for r in 0..m {
            for c in 0..n {
                out.data_mut()[c] += self.value(a).at(r, c);
            }
        }
        for c in 0..n {
            out.data_mut()[c] /= m as f64;
        }
        self.push(Op::MeanRows { a }, out)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let (m, n) = (self.value(a).rows(), self.value(a).cols());
        let mut out = Tensor::zeros(n, m);
        for r in 0..m {
            for c in 0..n {
                out.data_mut()[c * m + r] = self.value(a).at(r, c);
            }
        }
        self.push(Op::Transpose { a }, out)
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).data().iter().sum();
        self.push(Op::SumAll { a }, Tensor::scalar(s))
    }

    /// Mean over the batch of −[d·ln p + (1−d)·ln(1−p)], p clamped to
    /// [ε, 1−ε]. `p` must be a [1×B] row of probabilities.
    pub fn bce_mean(&mut self, p: NodeId, labels: &[f64]) -> NodeId {
        assert_eq!(self.value(p).rows(), 1, "probabilities must form one row");
        assert_eq!(self.value(p).cols(), labels.len(), "one label per probability");
        let loss = self
            .value(p)
            .data()
            .iter()
            .zip(labels)
            .map(|(&pr, &d)| {
                let pc = pr.clamp(BCE_EPS, 1.0 - BCE_EPS);
                -(d * pc.ln() + (1.0 - d) * (1.0 - pc).ln())
            })
            .sum::<f64>()
            / labels.len() as f64;
        self.push(Op::BceMean { p, labels: labels.to_vec() }, Tensor::scalar(loss))
    }

    /// Reverse sweep from a scalar loss node. May run once per tape.
    pub fn backward(&mut self, loss: NodeId) {
        assert!(!self.done, "backward already ran on this tape");
        assert_eq!(self.value(loss).shape(), &[1, 1], "loss must be a scalar");
        self.grads = self
            .nodes
            .iter()
            .map(|n| Tensor::zeros(n.value.rows(), n.value.cols()))
            .collect();
        self.grads[loss.0].data_mut()[0] = 1.0;
        self.done = true;

        for i in (0..self.nodes.len()).rev() {
            // inputs always precede their op, so split off the output grad
            let (before, rest) = self.grads.split_at_mut(i);
            let g = &rest[0];
            if g.data().iter().all(|&v| v == 0.0) {
                continue;
            }
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Matmul { a, b, ta, tb } => {
                    let (m, n) = (node.value.rows(), node.value.cols());
                    let k = if *ta { self.nodes[a.0].value.rows() } else { self.nodes[a.0].value.cols() };
                    let (bv, av) =
                        (self.nodes[b.0].value.data(), self.nodes[a.0].value.data());
                    debug_assert!(a.0 < i && b.0 < i);
                    // dA (+)= G·op(B)ᵀ, written transposed when A was transposed
                    gemm(before[a.0].data_mut(), *ta, m, n, k, 1.0, g.data(), false, bv, !*tb, 1.0);
                    // dB (+)= op(A)ᵀ·G, written transposed when B was transposed
                    gemm(before[b.0].data_mut(), *tb, k, m, n, 1.0, av, !*ta, g.data(), false, 1.0);
                }
                Op::Add { a, b } => {
                    accumulate(&mut before[a.0], g.data(), 1.0);
                    accumulate(&mut before[b.0], g.data(), 1.0);
                }
                Op::Sub { a, b } => {
                    accumulate(&mut before[a.0], g.data(), 1.0);
                    accumulate(&mut before[b.0], g.data(), -1.0);
                }
                Op::Mul { a, b } => {
                    let (av, bv) =
                        (self.nodes[a.0].value.data(), self.nodes[b.0].value.data());
                    for (j, &gv) in g.data().iter().enumerate() {
                        before[a.0].data_mut()[j] += gv * bv[j];
                        before[b.0].data_mut()[j] += gv * av[j];
                    }
                }
                Op::Scale { a, c } => accumulate(&mut before[a.0], g.data(), *c),
                Op::AddColBroadcast { a, col } => {
                    accumulate(&mut before[a.0], g.data(), 1.0);
                    let q = node.value.cols();
                    for r in 0..node.value.rows() {
                        let mut sum = 0.0;
                        for c in 0..q {
                            sum += g.data()[r * q + c];
                        }
                        before[col.0].data_mut()[r] += sum;
                    }
                }
                Op::Abs { a } => {
                    let av = self.nodes[a.0].value.data();
                    for (j, &gv) in g.data().iter().enumerate() {
                        before[a.0].data_mut()[j] += gv * av[j].signum() * (av[j] != 0.0) as u8 as f64;
                    }
                }
                Op::LeakyRelu { a, slope } => {
                    let av = self.nodes[a.0].value.data();
                    for (j, &gv) in g.data().iter().enumerate() {
                        before[a.0].data_mut()[j] += gv * if av[j] >= 0.0 { 1.0 } else { *slope };
                    }
                }
                Op::SoftmaxRows { a } => {
                    let y = node.value.data();
                    let n = node.value.cols();
                    for r in 0..node.value.rows() {
                        let (ys, gs) = (&y[r * n..(r + 1) * n], &g.data()[r * n..(r + 1) * n]);
                        let dot: f64 = ys.iter().zip(gs).map(|(&yv, &gv)| yv * gv).sum();
                        for c in 0..n {
                            before[a.0].data_mut()[r * n + c] += ys[c] * (gs[c] - dot);
                        }
                    }
                }
                Op::Sigmoid { a } => {
                    let y = node.value.data();
                    for (j, &gv) in g.data().iter().enumerate() {
                        before[a.0].data_mut()[j] += gv * y[j] * (1.0 - y[j]);
                    }
                }
                Op::GatherRows { a, indices } => {
                    let cols = node.value.cols();
                    for (r, &src) in indices.iter().enumerate() {
                        for c in 0..cols {
                            before[a.0].data_mut()[src * cols + c] += g.data()[r * cols + c];
                        }
                    }
                }
                Op::ConcatRows { parts } => {
                    let mut r0 = 0;
                    for &p in parts {
                        let pr = self.nodes[p.0].value.rows();
                        let cols = node.value.cols();
                        for j in 0..pr * cols {
                            before[p.0].data_mut()[j] += g.data()[r0 * cols + j];
                        }
                        r0 += pr;
                    }
                }
                Op::ConcatCols { parts } => {
                    let rows = node.value.rows();
                    let cols = node.value.cols();
                    let mut c0 = 0;
                    for &p in parts {
                        let pc = self.nodes[p.0].value.cols();
                        for r in 0..rows {
                            for c in 0..pc {
                                before[p.0].data_mut()[r * pc + c] +=
                                    g.data()[r * cols + c0 + c];
                            }
                        }
                        c0 += pc;
                    }
                }
                Op::MeanRows { a } => {
                    let m = self.nodes[a.0].value.rows();
                    let n = node.value.cols();
                    for r in 0..m {
                        for c in 0..n {
                            before[a.0].data_mut()[r * n + c] += g.data()[c] / m as f64;
                        }
                    }
                }
                Op::Transpose { a } => {
                    let (m, n) = (node.value.rows(), node.value.cols());
                    for r in 0..m {
                        for c in 0..n {
                            before[a.0].data_mut()[c * m + r] += g.data()[r * n + c];
                        }
                    }
                }
                Op::SumAll { a } => {
                    let gv = g.data()[0];
                    for d in before[a.0].data_mut() {
                        *d += gv;
                    }
                }
                Op::BceMean { p, labels } => {
                    let gv = g.data()[0] / labels.len() as f64;
                    let pv = self.nodes[p.0].value.data();
                    for (j, &d) in labels.iter().enumerate() {
                        let pc = pv[j].clamp(BCE_EPS, 1.0 - BCE_EPS);
                        before[p.0].data_mut()[j] += gv * (pc - d) / (pc * (1.0 - pc));
                    }
                }
            }
        }
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn accumulate(dst: &mut Tensor, src: &[f64], scale: f64) {
    debug_assert_eq!(dst.data().len(), src.len());
    for (d, &s) in dst.data_mut().iter_mut().zip(src) {
        *d += scale * s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
        Tensor::new(r, c, (0..r * c).map(|_| rng.random_range(-2.0..2.0)).collect())
    }

    #[test]
    fn matmul_identity_and_selector() {
        let mut tape = Tape::new();
        let i2 = tape.leaf(Tensor::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]));
        let m = tape.leaf(Tensor::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        let prod = tape.matmul(i2, m);
        assert_eq!(tape.value(prod).data(), &[1.0, 2.0, 3.0, 4.0]);

        let sel = tape.leaf(Tensor::new(1, 2, vec![1.0, 0.0]));
        let col = tape.leaf(Tensor::new(2, 1, vec![2.0, 5.0]));
        let out = tape.matmul(sel, col);
        assert_eq!(tape.value(out).data(), &[2.0]);
    }

    #[test]
    fn matmul_transpose_flags_match_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = rand_tensor(&mut rng, 3, 4); // logical [3×4] or stored for ta
        let b = rand_tensor(&mut rng, 4, 2);
        for (ta, tb) in [(false, false), (true, false), (false, true), (true, true)] {
            let a_stored = if ta {
                // store Aᵀ so op(A) = logical A
                let mut t = Tensor::zeros(4, 3);
                for r in 0..3 {
                    for c in 0..4 {
                        t.set(c, r, a.at(r, c));
                    }
                }
                t
            } else {
                a.clone()
            };
            let b_stored = if tb {
                let mut t = Tensor::zeros(2, 4);
                for r in 0..4 {
                    for c in 0..2 {
                        t.set(c, r, b.at(r, c));
                    }
                }
                t
            } else {
                b.clone()
            };
            let mut tape = Tape::new();
            let an = tape.leaf(a_stored);
            let bn = tape.leaf(b_stored);
            let out = tape.matmul_t(an, ta, bn, tb);
            for r in 0..3 {
                for c in 0..2 {
                    let naive: f64 = (0..4).map(|t| a.at(r, t) * b.at(t, c)).sum();
                    assert!((tape.value(out).at(r, c) - naive).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn matmul_gradients_all_flag_combinations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (ta, tb) in [(false, false), (true, false), (false, true), (true, true)] {
            let a = if ta { rand_tensor(&mut rng, 4, 3) } else { rand_tensor(&mut rng, 3, 4) };
            let b = if tb { rand_tensor(&mut rng, 2, 4) } else { rand_tensor(&mut rng, 4, 2) };
            let err = grad_check(&[a, b], |tape, ids| {
                let m = tape.matmul_t(ids[0], ta, ids[1], tb);
                tape.sum_all(m)
            });
            assert!(err <= 1e-6, "ta={ta} tb={tb}: rel err {err}");
        }
    }

    #[test]
    fn leaky_relu_examples_and_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(1, 2, vec![2.0, -3.0]));
        let y = tape.leaky_relu(x, 0.1);
        assert_eq!(tape.value(y).data()[0], 2.0);
        assert!((tape.value(y).data()[1] - -0.3).abs() < 1e-15);

        let z = {
            let mut t = Tape::new();
            let x = t.leaf(Tensor::new(1, 3, vec![0.0, 0.0, 0.0]));
            let y = t.leaky_relu(x, 0.1);
            t.value(y).data().to_vec()
        };
        assert_eq!(z, vec![0.0, 0.0, 0.0]);

        let err = grad_check(&[Tensor::scalar(-1.0)], |tape, ids| {
            let y = tape.leaky_relu(ids[0], 0.1);
            tape.sum_all(y)
        });
        assert!(err <= 1e-7, "gradient at x=-1 should be the slope; rel err {err}");
    }

    #[test]
    fn softmax_uniform_and_closed_form() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(1, 3, vec![0.0, 0.0, 0.0]));
        let y = tape.softmax_rows(x);
        for &v in tape.value(y).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let logs = tape.leaf(Tensor::new(1, 3, vec![1f64.ln(), 2f64.ln(), 3f64.ln()]));
        let probs = tape.softmax_rows(logs);
        for (got, want) in tape.value(probs).data().iter().zip([1.0 / 6.0, 2.0 / 6.0, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x = rand_tensor(&mut rng, 3, 8);
            let mut tape = Tape::new();
            let id = tape.leaf(x);
            let y = tape.softmax_rows(id);
            for r in 0..3 {
                let s: f64 = tape.value(y).row(r).iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
                assert!(tape.value(y).row(r).iter().all(|&v| v > 0.0));
            }
        }
    }

    #[test]
    fn bce_closed_forms_and_batch_mean() {
        let mut tape = Tape::new();
        let p = tape.leaf(Tensor::new(1, 1, vec![0.5]));
        let l = tape.bce_mean(p, &[1.0]);
        assert!((tape.value(l).data()[0] - 2f64.ln()).abs() < 1e-12);

        let mut tape = Tape::new();
        let p = tape.leaf(Tensor::new(1, 1, vec![1.0 - 1e-12]));
        let l = tape.bce_mean(p, &[1.0]);
        assert!(tape.value(l).data()[0].abs() < 1e-9);

        // batch loss is the mean of single-sample losses
        let probs = [0.3, 0.8, 0.55, 0.99];
        let labels = [0.0, 1.0, 1.0, 0.0];
        let mut tape = Tape::new();
        let p = tape.leaf(Tensor::new(1, 4, probs.to_vec()));
        let batch = tape.bce_mean(p, &labels);
        let mut singles = 0.0;
        for i in 0..4 {
            let mut t = Tape::new();
            let p1 = t.leaf(Tensor::scalar(probs[i]));
            let l1 = t.bce_mean(p1, &labels[i..i + 1]);
            singles += t.value(l1).data()[0];
        }
        assert!((tape.value(batch).data()[0] - singles / 4.0).abs() < 1e-12);
    }

    #[test]
    fn elementwise_and_structural_op_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let checks: Vec<(&str, f64)> = vec![
            ("add_mul_sub", {
                let (a, b) = (rand_tensor(&mut rng, 2, 3), rand_tensor(&mut rng, 2, 3));
                grad_check(&[a, b], |t, ids| {
                    let s = t.add(ids[0], ids[1]);
                    let d = t.sub(s, ids[1]);
                    let m = t.mul(d, ids[0]);
                    t.sum_all(m)
                })
            }),
            ("scale", {
                let a = rand_tensor(&mut rng, 2, 2);
                grad_check(&[a], |t, ids| {
                    let s = t.scale(ids[0], -2.5);
                    t.sum_all(s)
                })
            }),
            ("abs", {
                // keep away from the kink at 0
                let a = Tensor::new(1, 4, vec![0.5, -1.5, 2.0, -0.75]);
                grad_check(&[a], |t, ids| {
                    let s = t.abs(ids[0]);
                    t.sum_all(s)
                })
            }),
            ("sigmoid", {
                let a = rand_tensor(&mut rng, 1, 5);
                grad_check(&[a], |t, ids| {
                    let s = t.sigmoid(ids[0]);
                    t.sum_all(s)
                })
            }),
            ("softmax", {
                let a = rand_tensor(&mut rng, 2, 5);
                let w = rand_tensor(&mut rng, 2, 5);
                grad_check(&[a, w], |t, ids| {
                    let s = t.softmax_rows(ids[0]);
                    let m = t.mul(s, ids[1]);
                    t.sum_all(m)
                })
            }),
            ("add_col_broadcast", {
                let a = rand_tensor(&mut rng, 3, 4);
                let c = rand_tensor(&mut rng, 3, 1);
                grad_check(&[a, c], |t, ids| {
                    let s = t.add_col_broadcast(ids[0], ids[1]);
                    t.sum_all(s)
                })
            }),
            ("gather_concat_mean_transpose", {
                let a = rand_tensor(&mut rng, 4, 3);
                let b = rand_tensor(&mut rng, 2, 3);
                grad_check(&[a, b], |t, ids| {
                    let g = t.gather_rows(ids[0], &[1, 3, 1]);
                    let cat = t.concat_rows(&[g, ids[1]]);
                    let mu = t.mean_rows(cat);
                    let tr = t.transpose(mu);
                    let cc = t.concat_cols(&[tr, tr]);
                    t.sum_all(cc)
                })
            }),
            ("bce_sigmoid_chain", {
                let a = rand_tensor(&mut rng, 1, 6);
                grad_check(&[a], |t, ids| {
                    let p = t.sigmoid(ids[0]);
                    t.bce_mean(p, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0])
                })
            }),
        ];
        for (name, err) in checks {
            assert!(err <= 1e-5, "{name}: rel err {err}");
        }
    }

    #[test]
    fn gradient_accumulation_is_linear() {
        // backward of (f + g) equals backward of f plus backward of g
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = rand_tensor(&mut rng, 2, 2);
        let grad_of = |combined: bool| -> Vec<f64> {
            let mut tape = Tape::new();
            let id = tape.leaf(x.clone());
            let f = tape.mul(id, id);
            let fs = tape.sum_all(f);
            let g = tape.scale(id, 3.0);
            let gs = tape.sum_all(g);
            let loss = if combined { tape.add(fs, gs) } else { fs };
            tape.backward(loss);
            tape.grad(id).data().to_vec()
        };
        let combined = grad_of(true);
        let f_only = grad_of(false);
        let g_grad = 3.0;
        for (c, f) in combined.iter().zip(f_only) {
            assert!((c - (f + g_grad)).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_concat_parts_accumulate() {
        // the same node appearing twice in a concat must receive both
        // gradient contributions
        let x = Tensor::new(2, 1, vec![1.0, 2.0]);
        let mut tape = Tape::new();
        let id = tape.leaf(x);
        let cat = tape.concat_cols(&[id, id]);
        let s = tape.sum_all(cat);
        tape.backward(s);
        assert_eq!(tape.grad(id).data(), &[2.0, 2.0]);
    }
}
