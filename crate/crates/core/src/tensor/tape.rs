//! Wengert tape: records primitive operations during the forward pass and
//! replays them in exact reverse order to accumulate gradients.
//!
//! Values are immutable once recorded. Gradients accumulate additively when a
//! value feeds multiple consumers. Execution is single-threaded by design;
//! parallelism in this crate happens across independent tapes.

use super::{Precision, Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Constant,
    Matmul { a: Var, b: Var },
    Transpose { x: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { x: Var, c: f64 },
    AddScalar { x: Var },
    BroadcastRows { x: Var, n: usize },
    Relu { x: Var },
    Tanh { x: Var },
    Exp { x: Var },
    Log { x: Var },
    Sqrt { x: Var },
    Sigmoid { x: Var },
    ConcatRows { parts: Vec<Var> },
    ConcatCols { parts: Vec<Var> },
    ReduceMeanRows { x: Var },
    ReduceMaxRows { x: Var, argmax: Vec<usize> },
    MeanAll { x: Var },
    SumAll { x: Var },
    SegmentMean { x: Var, ids: Vec<usize>, counts: Vec<usize> },
    SegmentMax { x: Var, argmax: Vec<usize> },
    GatherRows { x: Var, indices: Vec<usize> },
    GradReverse { x: Var, strength: f64 },
    Reshape { x: Var },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Map from tape variables to their gradients after [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`. Leaves untouched by the loss
    /// get an explicit zero gradient of the right shape.
    pub fn wrt(&self, v: Var) -> Result<Tensor> {
        match &self.grads[v.0] {
            Some(g) => Ok(g.clone()),
            None => Tensor::zeros(self.shapes[v.0].clone()),
        }
    }
}

pub struct Tape {
    nodes: Vec<Node>,
    precision: Precision,
}

impl Tape {
    pub fn new() -> Self {
        Self::with_precision(Precision::Double)
    }

    pub fn with_precision(precision: Precision) -> Self {
        Tape { nodes: Vec::new(), precision }
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a trainable parameter. Leaves always receive a gradient entry
    /// from [`Tape::backward`], zero if the loss never touches them.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_raw(value, Op::Leaf, true)
    }

    /// Registers an input that needs no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_raw(value, Op::Constant, false)
    }

    fn push_raw(&mut self, mut value: Tensor, op: Op, requires_grad: bool) -> Var {
        value.precision = self.precision;
        value.quantize();
        let id = self.nodes.len();
        self.nodes.push(Node { value, op, requires_grad });
        Var(id)
    }

    fn push(&mut self, op_name: &'static str, shape: Vec<usize>, data: Vec<f64>, op: Op, requires_grad: bool) -> Result<Var> {
        let value = Tensor::with_precision(shape, data, self.precision)
            .map_err(|e| match e {
                TensorError::NonFinite { .. } => TensorError::NonFinite { op: op_name },
                other => other,
            })?;
        let id = self.nodes.len();
        self.nodes.push(Node { value, op, requires_grad });
        Ok(Var(id))
    }

    fn needs_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn shape_err(op: &'static str, detail: String) -> TensorError {
        TensorError::Shape { op, detail }
    }

    // ── primitive operations ────────────────────────────────────────────

    /// Standard matrix product of two rank-2 tensors.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 {
            return Err(Self::shape_err("matmul", format!("expected rank-2 inputs, got {:?} and {:?}", ta.shape(), tb.shape())));
        }
        let (m, k) = (ta.shape()[0], ta.shape()[1]);
        let (k2, n) = (tb.shape()[0], tb.shape()[1]);
        if k != k2 {
            return Err(Self::shape_err("matmul", format!("inner dimensions disagree: {:?} x {:?}", ta.shape(), tb.shape())));
        }
        let mut out = vec![0.0; m * n];
        dgemm_rowmajor(m, k, n, ta.data(), false, tb.data(), false, &mut out, 0.0);
        let rg = self.needs_grad(&[a, b]);
        self.push("matmul", vec![m, n], out, Op::Matmul { a, b }, rg)
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.rank() != 2 {
            return Err(Self::shape_err("transpose", format!("expected rank-2, got {:?}", t.shape())));
        }
        let (r, c) = (t.shape()[0], t.shape()[1]);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = t.data()[i * c + j];
            }
        }
        let rg = self.needs_grad(&[x]);
        self.push("transpose", vec![c, r], out, Op::Transpose { x }, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_elementwise("add", a, b, |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_elementwise("sub", a, b, |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_elementwise("mul", a, b, |x, y| x * y, Op::Mul { a, b })
    }

    fn binary_elementwise(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Self::shape_err(name, format!("shape mismatch {:?} vs {:?}", ta.shape(), tb.shape())));
        }
        let data: Vec<f64> = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let shape = ta.shape().to_vec();
        let rg = self.needs_grad(&[a, b]);
        self.push(name, shape, data, op, rg)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        self.unary(x, |v| v * c, |x| Op::Scale { x, c }, "scale")
    }

    pub fn neg(&mut self, x: Var) -> Result<Var> {
        self.scale(x, -1.0)
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        self.unary(x, |v| v + c, |x| Op::AddScalar { x }, "add_scalar")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary(x, |v| v.max(0.0), |x| Op::Relu { x }, "relu")
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary(x, f64::tanh, |x| Op::Tanh { x }, "tanh")
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        self.unary(x, f64::exp, |x| Op::Exp { x }, "exp")
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.unary(x, f64::ln, |x| Op::Log { x }, "log")
    }

    /// Elementwise square root. The derivative at exactly zero is taken to be
    /// zero (subgradient convention) so that norms of identical batches stay
    /// finite end to end.
    pub fn sqrt(&mut self, x: Var) -> Result<Var> {
        self.unary(x, f64::sqrt, |x| Op::Sqrt { x }, "sqrt")
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(x, |v| 1.0 / (1.0 + (-v).exp()), |x| Op::Sigmoid { x }, "sigmoid")
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: impl Fn(Var) -> Op, name: &'static str) -> Result<Var> {
        let t = self.value(x);
        let data: Vec<f64> = t.data().iter().map(|&v| f(v)).collect();
        let shape = t.shape().to_vec();
        let rg = self.needs_grad(&[x]);
        self.push(name, shape, data, op(x), rg)
    }

    /// Repeats a row vector (`[c]` or `[1, c]`) across `n` rows.
    pub fn broadcast_rows(&mut self, x: Var, n: usize) -> Result<Var> {
        let t = self.value(x);
        if t.rows() != 1 {
            return Err(Self::shape_err("broadcast_rows", format!("expected a single row, got {:?}", t.shape())));
        }
        let c = t.cols();
        let mut data = Vec::with_capacity(n * c);
        for _ in 0..n {
            data.extend_from_slice(t.data());
        }
        let rg = self.needs_grad(&[x]);
        self.push("broadcast_rows", vec![n, c], data, Op::BroadcastRows { x, n }, rg)
    }

    /// Stacks parts vertically. Rank-1 parts count as single rows.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Self::shape_err("concat_rows", "no parts".into()));
        }
        let c = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != c {
                return Err(Self::shape_err("concat_rows", format!("column mismatch: {} vs {}", t.cols(), c)));
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let rg = self.needs_grad(parts);
        self.push("concat_rows", vec![rows, c], data, Op::ConcatRows { parts: parts.to_vec() }, rg)
    }

    /// Concatenates parts side by side. All parts must agree on rank and rows.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Self::shape_err("concat_cols", "no parts".into()));
        }
        let rank = self.value(parts[0]).rank();
        if rank == 1 {
            // vector concatenation
            let mut data = Vec::new();
            for &p in parts {
                let t = self.value(p);
                if t.rank() != 1 {
                    return Err(Self::shape_err("concat_cols", "mixed ranks".into()));
                }
                data.extend_from_slice(t.data());
            }
            let n = data.len();
            let rg = self.needs_grad(parts);
            return self.push("concat_cols", vec![n], data, Op::ConcatCols { parts: parts.to_vec() }, rg);
        }
        let rows = self.value(parts[0]).rows();
        let total_cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * total_cols);
        for r in 0..rows {
            for &p in parts {
                let t = self.value(p);
                if t.rows() != rows {
                    return Err(Self::shape_err("concat_cols", format!("row mismatch: {} vs {}", t.rows(), rows)));
                }
                data.extend_from_slice(t.row(r));
            }
        }
        let rg = self.needs_grad(parts);
        self.push("concat_cols", vec![rows, total_cols], data, Op::ConcatCols { parts: parts.to_vec() }, rg)
    }

    /// Column-wise mean over the rows of a rank-2 tensor, producing a vector.
    pub fn reduce_mean_rows(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.rank() != 2 {
            return Err(Self::shape_err("reduce_mean_rows", format!("expected rank-2, got {:?}", t.shape())));
        }
        let (n, c) = (t.shape()[0], t.shape()[1]);
        let mut out = vec![0.0; c];
        for r in 0..n {
            for (j, v) in t.row(r).iter().enumerate() {
                out[j] += v;
            }
        }
        for v in &mut out {
            *v /= n as f64;
        }
        let rg = self.needs_grad(&[x]);
        self.push("reduce_mean_rows", vec![c], out, Op::ReduceMeanRows { x }, rg)
    }

    /// Column-wise maximum over the rows of a rank-2 tensor. Ties resolve to
    /// the lowest row index so the backward pass is deterministic.
    pub fn reduce_max_rows(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.rank() != 2 {
            return Err(Self::shape_err("reduce_max_rows", format!("expected rank-2, got {:?}", t.shape())));
        }
        let (n, c) = (t.shape()[0], t.shape()[1]);
        let mut out = t.row(0).to_vec();
        let mut argmax = vec![0usize; c];
        for r in 1..n {
            for (j, v) in t.row(r).iter().enumerate() {
                if *v > out[j] {
                    out[j] = *v;
                    argmax[j] = r;
                }
            }
        }
        let rg = self.needs_grad(&[x]);
        self.push("reduce_max_rows", vec![c], out, Op::ReduceMaxRows { x, argmax }, rg)
    }

    pub fn mean_all(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let n = t.numel() as f64;
        let s: f64 = t.data().iter().sum();
        let rg = self.needs_grad(&[x]);
        self.push("mean_all", vec![1], vec![s / n], Op::MeanAll { x }, rg)
    }

    pub fn sum_all(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let s: f64 = t.data().iter().sum();
        let rg = self.needs_grad(&[x]);
        self.push("sum_all", vec![1], vec![s], Op::SumAll { x }, rg)
    }

    /// Row `s` of the output is the mean of the input rows with segment id `s`.
    /// Every segment in `[0, num_segments)` must be nonempty.
    pub fn segment_mean(&mut self, x: Var, ids: &[usize], num_segments: usize) -> Result<Var> {
        let t = self.value(x);
        if t.rank() != 2 || t.shape()[0] != ids.len() {
            return Err(Self::shape_err("segment_mean", format!("expected [{} x d] values, got {:?}", ids.len(), t.shape())));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= num_segments) {
            return Err(Self::shape_err("segment_mean", format!("segment id {bad} out of range 0..{num_segments}")));
        }
        let c = t.shape()[1];
        let mut out = vec![0.0; num_segments * c];
        let mut counts = vec![0usize; num_segments];
        for (r, &s) in ids.iter().enumerate() {
            counts[s] += 1;
            for (j, v) in t.row(r).iter().enumerate() {
                out[s * c + j] += v;
            }
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(TensorError::DegenerateSegment { segment: empty });
        }
        for (s, &cnt) in counts.iter().enumerate() {
            for j in 0..c {
                out[s * c + j] /= cnt as f64;
            }
        }
        let rg = self.needs_grad(&[x]);
        self.push(
            "segment_mean",
            vec![num_segments, c],
            out,
            Op::SegmentMean { x, ids: ids.to_vec(), counts },
            rg,
        )
    }

    /// Column-wise maximum within each segment. Ties resolve to the lowest
    /// row index.
    pub fn segment_max(&mut self, x: Var, ids: &[usize], num_segments: usize) -> Result<Var> {
        let t = self.value(x);
        if t.rank() != 2 || t.shape()[0] != ids.len() {
            return Err(Self::shape_err("segment_max", format!("expected [{} x d] values, got {:?}", ids.len(), t.shape())));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= num_segments) {
            return Err(Self::shape_err("segment_max", format!("segment id {bad} out of range 0..{num_segments}")));
        }
        let c = t.shape()[1];
        let mut out = vec![f64::NEG_INFINITY; num_segments * c];
        let mut argmax = vec![usize::MAX; num_segments * c];
        for (r, &s) in ids.iter().enumerate() {
            for (j, v) in t.row(r).iter().enumerate() {
                if *v > out[s * c + j] {
                    out[s * c + j] = *v;
                    argmax[s * c + j] = r;
                }
            }
        }
        if let Some(pos) = argmax.iter().position(|&a| a == usize::MAX) {
            return Err(TensorError::DegenerateSegment { segment: pos / c });
        }
        let rg = self.needs_grad(&[x]);
        self.push("segment_max", vec![num_segments, c], out, Op::SegmentMax { x, argmax }, rg)
    }

    /// Selects rows of `x` by index, duplicates allowed.
    pub fn gather_rows(&mut self, x: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(x);
        if t.rank() != 2 {
            return Err(Self::shape_err("gather_rows", format!("expected rank-2, got {:?}", t.shape())));
        }
        let rows = t.shape()[0];
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Self::shape_err("gather_rows", format!("row index {bad} out of range 0..{rows}")));
        }
        let c = t.shape()[1];
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            data.extend_from_slice(t.row(i));
        }
        let rg = self.needs_grad(&[x]);
        self.push("gather_rows", vec![indices.len(), c], data, Op::GatherRows { x, indices: indices.to_vec() }, rg)
    }

    /// Identity in the forward direction; multiplies the upstream gradient by
    /// `-strength` in the backward direction.
    pub fn grad_reverse(&mut self, x: Var, strength: f64) -> Result<Var> {
        let t = self.value(x);
        let data = t.data().to_vec();
        let shape = t.shape().to_vec();
        let rg = self.needs_grad(&[x]);
        self.push("grad_reverse", shape, data, Op::GradReverse { x, strength }, rg)
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(x);
        let numel: usize = shape.iter().product();
        if numel != t.numel() {
            return Err(Self::shape_err("reshape", format!("cannot reshape {:?} to {:?}", t.shape(), shape)));
        }
        let data = t.data().to_vec();
        let rg = self.needs_grad(&[x]);
        self.push("reshape", shape, data, Op::Reshape { x }, rg)
    }

    // ── composed helpers ────────────────────────────────────────────────

    /// GELU with the tanh approximation; the only activation used by the
    /// model bodies.
    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        const C: f64 = 0.7978845608028654; // sqrt(2/pi)
        let x3 = {
            let x2 = self.mul(x, x)?;
            self.mul(x2, x)?
        };
        let inner = {
            let t = self.scale(x3, 0.044715)?;
            let s = self.add(x, t)?;
            self.scale(s, C)?
        };
        let th = self.tanh(inner)?;
        let one_plus = self.add_scalar(th, 1.0)?;
        let prod = self.mul(x, one_plus)?;
        self.scale(prod, 0.5)
    }

    /// Numerically stable `log(1 + exp(x))`, composed from primitives:
    /// `relu(x) + log(1 + exp(-|x|))`.
    pub fn softplus(&mut self, x: Var) -> Result<Var> {
        let pos = self.relu(x)?;
        let negx = self.neg(x)?;
        let negpart = self.relu(negx)?;
        let absx = self.add(pos, negpart)?;
        let nabs = self.neg(absx)?;
        let e = self.exp(nabs)?;
        let e1 = self.add_scalar(e, 1.0)?;
        let l = self.log(e1)?;
        self.add(pos, l)
    }

    /// Euclidean norm of the flattened tensor as a scalar variable.
    pub fn l2_norm(&mut self, x: Var) -> Result<Var> {
        let sq = self.mul(x, x)?;
        let s = self.sum_all(sq)?;
        self.sqrt(s)
    }

    // ── backward ────────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Returns gradients for every variable
    /// that requires one; leaves the loss never touched get zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if !lt.is_scalar() {
            return Err(TensorError::NonScalarLoss { shape: lt.shape().to_vec() });
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.apply_backward(id, &g, &mut grads)?;
            if matches!(node.op, Op::Leaf) {
                grads[id] = Some(g); // keep leaf gradients for the caller
            }
        }

        let mut out = Vec::with_capacity(n);
        let mut shapes = Vec::with_capacity(n);
        for (id, node) in self.nodes.iter().enumerate() {
            shapes.push(node.value.shape().to_vec());
            match grads[id].take() {
                Some(data) => {
                    let t = Tensor::with_precision(node.value.shape().to_vec(), data, self.precision)
                        .map_err(|_| TensorError::NonFinite { op: "backward" })?;
                    out.push(Some(t));
                }
                None => out.push(None),
            }
        }
        Ok(Gradients { grads: out, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, contrib: impl FnOnce(&mut [f64])) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let numel = self.nodes[v.0].value.numel();
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; numel]);
        contrib(slot);
    }

    fn apply_backward(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        match &self.nodes[id].op {
            Op::Leaf | Op::Constant => {}
            Op::Matmul { a, b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k) = (ta.shape()[0], ta.shape()[1]);
                let n = tb.shape()[1];
                self.accumulate(grads, *a, |ga| {
                    // ga += g . b^T
                    dgemm_rowmajor(m, n, k, g, false, tb.data(), true, ga, 1.0);
                });
                self.accumulate(grads, *b, |gb| {
                    // gb += a^T . g
                    dgemm_rowmajor(k, m, n, ta.data(), true, g, false, gb, 1.0);
                });
            }
            Op::Transpose { x } => {
                let (c, r) = {
                    let s = self.nodes[id].value.shape();
                    (s[0], s[1])
                };
                self.accumulate(grads, *x, |gx| {
                    for i in 0..c {
                        for j in 0..r {
                            gx[j * c + i] += g[i * r + j];
                        }
                    }
                });
            }
            Op::Add { a, b } => {
                self.accumulate(grads, *a, |ga| add_assign(ga, g, 1.0));
                self.accumulate(grads, *b, |gb| add_assign(gb, g, 1.0));
            }
            Op::Sub { a, b } => {
                self.accumulate(grads, *a, |ga| add_assign(ga, g, 1.0));
                self.accumulate(grads, *b, |gb| add_assign(gb, g, -1.0));
            }
            Op::Mul { a, b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                self.accumulate(grads, *a, |ga| {
                    for ((ga, &g), &b) in ga.iter_mut().zip(g).zip(tb.data()) {
                        *ga += g * b;
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    for ((gb, &g), &a) in gb.iter_mut().zip(g).zip(ta.data()) {
                        *gb += g * a;
                    }
                });
            }
            Op::Scale { x, c } => {
                let c = *c;
                self.accumulate(grads, *x, |gx| add_assign(gx, g, c));
            }
            Op::AddScalar { x } => {
                self.accumulate(grads, *x, |gx| add_assign(gx, g, 1.0));
            }
            Op::BroadcastRows { x, n } => {
                let c = self.value(*x).cols();
                let n = *n;
                self.accumulate(grads, *x, |gx| {
                    for r in 0..n {
                        for j in 0..c {
                            gx[j] += g[r * c + j];
                        }
                    }
                });
            }
            Op::Relu { x } => {
                let tx = self.value(*x);
                self.accumulate(grads, *x, |gx| {
                    for ((gx, &g), &x) in gx.iter_mut().zip(g).zip(tx.data()) {
                        if x > 0.0 {
                            *gx += g;
                        }
                    }
                });
            }
            Op::Tanh { x } => {
                let out = &self.nodes[id].value;
                self.accumulate(grads, *x, |gx| {
                    for ((gx, &g), &y) in gx.iter_mut().zip(g).zip(out.data()) {
                        *gx += g * (1.0 - y * y);
                    }
                });
            }
            Op::Exp { x } => {
                let out = &self.nodes[id].value;
                self.accumulate(grads, *x, |gx| {
                    for ((gx, &g), &y) in gx.iter_mut().zip(g).zip(out.data()) {
                        *gx += g * y;
                    }
                });
            }
            Op::Log { x } => {
                let tx = self.value(*x);
                self.accumulate(grads, *x, |gx| {
                    for ((gx, &g), &x) in gx.iter_mut().zip(g).zip(tx.data()) {
                        *gx += g / x;
                    }
                });
            }
            Op::Sqrt { x } => {
                let out = &self.nodes[id].value;
                self.accumulate(grads, *x, |gx| {
                    for ((gx, &g), &y) in gx.iter_mut().zip(g).zip(out.data()) {
                        if y > 0.0 {
                            *gx += g * 0.5 / y;
                        }
                        // subgradient 0 at y == 0
                    }
                });
            }
            Op::Sigmoid { x } => {
                let out = &self.nodes[id].value;
                self.accumulate(grads, *x, |gx| {
                    for ((gx, &g), &y) in gx.iter_mut().zip(g).zip(out.data()) {
                        *gx += g * y * (1.0 - y);
                    }
                });
            }
            Op::ConcatRows { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let numel = self.value(p).numel();
                    let slice = &g[offset..offset + numel];
                    self.accumulate(grads, p, |gp| add_assign(gp, slice, 1.0));
                    offset += numel;
                }
            }
            Op::ConcatCols { parts } => {
                if self.nodes[id].value.rank() == 1 {
                    let mut offset = 0;
                    for &p in parts {
                        let numel = self.value(p).numel();
                        let slice = &g[offset..offset + numel];
                        self.accumulate(grads, p, |gp| add_assign(gp, slice, 1.0));
                        offset += numel;
                    }
                } else {
                    let rows = self.nodes[id].value.rows();
                    let total_cols = self.nodes[id].value.cols();
                    let mut col_off = 0;
                    for &p in parts {
                        let c = self.value(p).cols();
                        self.accumulate(grads, p, |gp| {
                            for r in 0..rows {
                                for j in 0..c {
                                    gp[r * c + j] += g[r * total_cols + col_off + j];
                                }
                            }
                        });
                        col_off += c;
                    }
                }
            }
            Op::ReduceMeanRows { x } => {
                let (n, c) = {
                    let s = self.value(*x).shape();
                    (s[0], s[1])
                };
                let inv = 1.0 / n as f64;
                self.accumulate(grads, *x, |gx| {
                    for r in 0..n {
                        for j in 0..c {
                            gx[r * c + j] += g[j] * inv;
                        }
                    }
                });
            }
            Op::ReduceMaxRows { x, argmax } => {
                let c = self.value(*x).cols();
                self.accumulate(grads, *x, |gx| {
                    for (j, &r) in argmax.iter().enumerate() {
                        gx[r * c + j] += g[j];
                    }
                });
            }
            Op::MeanAll { x } => {
                let n = self.value(*x).numel() as f64;
                self.accumulate(grads, *x, |gx| {
                    let s = g[0] / n;
                    for v in gx {
                        *v += s;
                    }
                });
            }
            Op::SumAll { x } => {
                self.accumulate(grads, *x, |gx| {
                    for v in gx {
                        *v += g[0];
                    }
                });
            }
            Op::SegmentMean { x, ids, counts } => {
                let c = self.value(*x).cols();
                self.accumulate(grads, *x, |gx| {
                    for (r, &s) in ids.iter().enumerate() {
                        let inv = 1.0 / counts[s] as f64;
                        for j in 0..c {
                            gx[r * c + j] += g[s * c + j] * inv;
                        }
                    }
                });
            }
            Op::SegmentMax { x, argmax } => {
                let c = self.value(*x).cols();
                self.accumulate(grads, *x, |gx| {
                    for (pos, &r) in argmax.iter().enumerate() {
                        let j = pos % c;
                        gx[r * c + j] += g[pos];
                    }
                });
            }
            Op::GatherRows { x, indices } => {
                let c = self.value(*x).cols();
                self.accumulate(grads, *x, |gx| {
                    for (e, &r) in indices.iter().enumerate() {
                        for j in 0..c {
                            gx[r * c + j] += g[e * c + j];
                        }
                    }
                });
            }
            Op::GradReverse { x, strength } => {
                let s = -strength;
                self.accumulate(grads, *x, |gx| add_assign(gx, g, s));
            }
            Op::Reshape { x } => {
                self.accumulate(grads, *x, |gx| add_assign(gx, g, 1.0));
            }
        }
        Ok(())
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn add_assign(dst: &mut [f64], src: &[f64], scale: f64) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s * scale;
    }
}

/// `c = alpha * op(a) . op(b) + beta * c` for row-major buffers, where `op`
/// is an optional transpose expressed through strides (no copies).
fn dgemm_rowmajor(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool, c: &mut [f64], beta: f64) {
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
