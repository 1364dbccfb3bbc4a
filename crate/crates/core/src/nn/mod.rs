//! Minimal dense numeric core: 2-D tensors, a reverse-mode tape, Adam, and
//! a finite-difference gradient checker. Only the operations the decoder
//! models need — no broadcasting rules, no GPU, 64-bit floats throughout.

mod tape;

pub use tape::{NodeId, Tape};

/// Row-major dense tensor. Everything in the pipeline is at most 2-D;
/// scalars are [1×1] and vectors are single-row or single-column matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "shape does not match data length");
        Self { shape: vec![rows, cols], data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { shape: vec![rows, cols], data: vec![0.0; rows * cols] }
    }

    pub fn scalar(v: f64) -> Self {
        Self::new(1, 1, vec![v])
    }

    /// Single-column matrix from a slice.
    pub fn column(v: &[f64]) -> Self {
        Self::new(v.len(), 1, v.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.shape[1] + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.shape[1] + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A trainable tensor with its gradient accumulator and Adam state.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    adam_m: Tensor,
    adam_v: Tensor,
    step_count: u64,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let (r, c) = (value.rows(), value.cols());
        Self {
            value,
            grad: Tensor::zeros(r, c),
            adam_m: Tensor::zeros(r, c),
            adam_v: Tensor::zeros(r, c),
            step_count: 0,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.data.fill(0.0);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One bias-corrected Adam update over a set of parameters; gradients are
/// consumed (zeroed) by the step.
pub fn adam_step(params: &mut [&mut Param], cfg: &AdamConfig) {
    for p in params {
        p.step_count += 1;
        let t = p.step_count as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for i in 0..p.value.data.len() {
            let g = p.grad.data[i];
            let m = cfg.beta1 * p.adam_m.data[i] + (1.0 - cfg.beta1) * g;
            let v = cfg.beta2 * p.adam_v.data[i] + (1.0 - cfg.beta2) * g * g;
            p.adam_m.data[i] = m;
            p.adam_v.data[i] = v;
            p.value.data[i] -= cfg.lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
        }
        p.zero_grad();
    }
}

/// Compare analytic gradients against central finite differences.
///
/// `build` must construct the scalar loss graph from the given inputs on a
/// fresh tape; every input is treated as differentiable. Returns the max
/// over all coordinates of |analytic − numeric| / max(1, |analytic|, |numeric|).
pub fn grad_check(
    inputs: &[Tensor],
    build: impl Fn(&mut Tape, &[NodeId]) -> NodeId,
) -> f64 {
    const STEP: f64 = 1e-5;

    let eval = |points: &[Tensor]| -> (f64, Option<(Tape, Vec<NodeId>, NodeId)>) {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = points.iter().map(|t| tape.leaf(t.clone())).collect();
        let loss = build(&mut tape, &ids);
        assert_eq!(tape.value(loss).shape(), &[1, 1], "loss must be scalar");
        let v = tape.value(loss).data()[0];
        (v, Some((tape, ids, loss)))
    };

    let (_, recorded) = eval(inputs);
    let (mut tape, ids, loss) = recorded.unwrap();
    tape.backward(loss);

    let mut worst = 0.0f64;
    let mut points = inputs.to_vec();
    for (which, id) in ids.iter().enumerate() {
        for i in 0..points[which].data.len() {
            let orig = points[which].data[i];
            points[which].data[i] = orig + STEP;
            let (up, _) = eval(&points);
            points[which].data[i] = orig - STEP;
            let (down, _) = eval(&points);
            points[which].data[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let analytic = tape.grad(*id).data()[i];
            let rel = (analytic - numeric).abs() / 1.0f64.max(analytic.abs()).max(numeric.abs());
            worst = worst.max(rel);
        }
    }
    worst
}
