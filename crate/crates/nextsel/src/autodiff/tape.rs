use std::collections::HashMap;

use super::params::{ParamId, Params};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Probability clamp used by the cross-entropy node.
pub const BCE_EPS: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    /// `a * b^T`
    MatMulNT(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    HCat(Vec<NodeId>),
    VCat(Vec<NodeId>),
    Row(NodeId, usize),
    SliceCols(NodeId, usize, usize),
    Transpose(NodeId),
    SoftmaxRows(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    MaxOverRows(NodeId),
    Mean(NodeId),
    BceLoss { scores: Vec<NodeId>, labels: Vec<f64> },
}

/// Gradients collected by [`Tape::backward`], keyed by parameter.
#[derive(Debug, Default)]
pub struct Gradients {
    slots: HashMap<ParamId, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.slots.get(&id)
    }

    pub fn get_mut(&mut self, id: ParamId) -> Option<&mut Tensor> {
        self.slots.get_mut(&id)
    }

    /// Adds `other` into `self`, used for fixed-order accumulation across a
    /// batch of per-pair tapes.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (id, grad) in other.slots.iter() {
            match self.slots.get_mut(id) {
                Some(slot) => slot.add_assign(grad),
                None => {
                    self.slots.insert(*id, grad.clone());
                }
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for grad in self.slots.values_mut() {
            grad.scale_assign(s);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Records a forward computation so that [`Tape::backward`] can replay it in
/// reverse topological order. Node handles only reference earlier nodes, so
/// reverse creation order is a valid reverse topological order.
pub struct Tape {
    values: Vec<Tensor>,
    ops: Vec<Op>,
    param_nodes: HashMap<ParamId, NodeId>,
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            values: Vec::new(),
            ops: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.values[id.0]
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        let id = NodeId(self.values.len());
        self.values.push(value);
        self.ops.push(op);
        id
    }

    /// Records a constant input. No gradient flows into it.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// Leases a parameter onto the tape. Repeated leases of the same
    /// parameter return the same node so gradient fan-in accumulates
    /// naturally.
    pub fn param(&mut self, params: &Params, id: ParamId) -> NodeId {
        if let Some(&node) = self.param_nodes.get(&id) {
            return node;
        }
        let node = self.push(params.get(id).clone(), Op::Param(id));
        self.param_nodes.insert(id, node);
        node
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ar, ac) = self.value(a).shape();
        let (br, bc) = self.value(b).shape();
        if ac != br {
            return Err(Error::shape("matmul", format!("{ar}x{ac} * {br}x{bc}")));
        }
        let value = self.value(a).matmul(self.value(b));
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// `a * b^T`, the similarity-matrix product.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ar, ac) = self.value(a).shape();
        let (br, bc) = self.value(b).shape();
        if ac != bc {
            return Err(Error::shape("matmul_nt", format!("{ar}x{ac} * ({br}x{bc})^T")));
        }
        let value = self.value(a).matmul_nt(self.value(b));
        Ok(self.push(value, Op::MatMulNT(a, b)))
    }

    fn elementwise_pair(&mut self, op_name: &str, a: NodeId, b: NodeId) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::shape(
                op_name,
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise_pair("add", a, b)?;
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise_pair("sub", a, b)?;
        let value = {
            let ta = self.value(a);
            let tb = self.value(b);
            let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x - y).collect();
            Tensor::from_vec(ta.rows(), ta.cols(), data)?
        };
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise_pair("elemwise_mul", a, b)?;
        let value = {
            let ta = self.value(a);
            let tb = self.value(b);
            let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
            Tensor::from_vec(ta.rows(), ta.cols(), data)?
        };
        Ok(self.push(value, Op::Mul(a, b)))
    }

    /// Concatenates along columns: `(r x c1, r x c2, ...) -> r x (c1+c2+...)`.
    pub fn hcat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::shape("concat", "no inputs"));
        }
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(Error::shape(
                    "concat",
                    format!("row mismatch: {} vs {}", rows, self.value(p).rows()),
                ));
            }
            cols += self.value(p).cols();
        }
        let mut value = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let out = value.row_mut(r);
            let mut offset = 0;
            for &p in parts {
                let src = self.values[p.0].row(r);
                out[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        Ok(self.push(value, Op::HCat(parts.to_vec())))
    }

    /// Stacks along rows: `(r1 x c, r2 x c, ...) -> (r1+r2+...) x c`.
    pub fn vcat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::shape("vcat", "no inputs"));
        }
        let cols = self.value(parts[0]).cols();
        let mut rows = 0;
        for &p in parts {
            if self.value(p).cols() != cols {
                return Err(Error::shape(
                    "vcat",
                    format!("col mismatch: {} vs {}", cols, self.value(p).cols()),
                ));
            }
            rows += self.value(p).rows();
        }
        let mut data = Vec::with_capacity(rows * cols);
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let value = Tensor::from_vec(rows, cols, data)?;
        Ok(self.push(value, Op::VCat(parts.to_vec())))
    }

    pub fn row(&mut self, src: NodeId, r: usize) -> Result<NodeId> {
        let t = self.value(src);
        if r >= t.rows() {
            return Err(Error::shape("row", format!("row {} of {}x{}", r, t.rows(), t.cols())));
        }
        let value = Tensor::row_vector(t.row(r).to_vec());
        Ok(self.push(value, Op::Row(src, r)))
    }

    pub fn slice_cols(&mut self, src: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let t = self.value(src);
        if start >= end || end > t.cols() {
            return Err(Error::shape(
                "slice_cols",
                format!("[{start}, {end}) of {}x{}", t.rows(), t.cols()),
            ));
        }
        let mut value = Tensor::zeros(t.rows(), end - start);
        for r in 0..t.rows() {
            value.row_mut(r).copy_from_slice(&t.row(r)[start..end]);
        }
        Ok(self.push(value, Op::SliceCols(src, start, end)))
    }

    pub fn transpose(&mut self, src: NodeId) -> NodeId {
        let value = self.value(src).transposed();
        self.push(value, Op::Transpose(src))
    }

    /// Row-wise softmax, stabilized by max subtraction.
    pub fn softmax_rows(&mut self, src: NodeId) -> NodeId {
        let t = self.value(src);
        let mut value = Tensor::zeros(t.rows(), t.cols());
        for r in 0..t.rows() {
            let row = t.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let out = value.row_mut(r);
            let mut sum = 0.0;
            for (o, &x) in out.iter_mut().zip(row.iter()) {
                *o = (x - max).exp();
                sum += *o;
            }
            for o in out.iter_mut() {
                *o /= sum;
            }
        }
        self.push(value, Op::SoftmaxRows(src))
    }

    pub fn tanh(&mut self, src: NodeId) -> NodeId {
        let value = self.value(src).map(f64::tanh);
        self.push(value, Op::Tanh(src))
    }

    pub fn sigmoid(&mut self, src: NodeId) -> NodeId {
        let value = self.value(src).map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(value, Op::Sigmoid(src))
    }

    pub fn relu(&mut self, src: NodeId) -> NodeId {
        let value = self.value(src).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(value, Op::Relu(src))
    }

    /// Column-wise max over rows: `m x c -> 1 x c`. Gradient flows to the
    /// first maximal row per column.
    pub fn max_over_rows(&mut self, src: NodeId) -> NodeId {
        let t = self.value(src);
        let mut value = Tensor::zeros(1, t.cols());
        for c in 0..t.cols() {
            let mut best = f64::NEG_INFINITY;
            for r in 0..t.rows() {
                let v = t.get(r, c);
                if v > best {
                    best = v;
                }
            }
            value.set(0, c, best);
        }
        self.push(value, Op::MaxOverRows(src))
    }

    /// Mean over all entries: `m x c -> 1 x 1`.
    pub fn mean(&mut self, src: NodeId) -> NodeId {
        let t = self.value(src);
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Tensor::scalar(m), Op::Mean(src))
    }

    /// Mean binary cross-entropy over scalar probability nodes, with
    /// probabilities clamped to `[BCE_EPS, 1 - BCE_EPS]`.
    pub fn bce_loss(&mut self, scores: &[NodeId], labels: &[f64]) -> Result<NodeId> {
        if scores.len() != labels.len() {
            return Err(Error::shape(
                "bce_loss",
                format!("{} scores vs {} labels", scores.len(), labels.len()),
            ));
        }
        if scores.is_empty() {
            return Err(Error::shape("bce_loss", "empty batch"));
        }
        for (&s, &y) in scores.iter().zip(labels.iter()) {
            if !self.value(s).is_scalar() {
                return Err(Error::shape("bce_loss", "score is not a scalar".to_string()));
            }
            if y != 0.0 && y != 1.0 {
                return Err(Error::InvalidArgument(format!("label {y} is not binary")));
            }
        }
        let mut total = 0.0;
        for (&s, &y) in scores.iter().zip(labels.iter()) {
            let p = self.value(s).get(0, 0).clamp(BCE_EPS, 1.0 - BCE_EPS);
            total += -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
        }
        let value = Tensor::scalar(total / scores.len() as f64);
        Ok(self.push(
            value,
            Op::BceLoss {
                scores: scores.to_vec(),
                labels: labels.to_vec(),
            },
        ))
    }

    /// Reverse pass from a scalar loss. Visits nodes in reverse creation
    /// order exactly once; gradients accumulate additively at fan-in points.
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            let (r, c) = self.value(loss).shape();
            return Err(Error::shape("backward", format!("loss must be 1x1, got {r}x{c}")));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.values.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..self.values.len()).rev() {
            let grad = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            match self.ops[i].clone() {
                Op::Leaf | Op::Param(_) => {
                    // Param gradients are harvested below; leaves absorb.
                    grads[i] = Some(grad);
                }
                Op::MatMul(a, b) => {
                    let ga = grad.matmul_nt(self.value(b));
                    let gb = self.value(a).matmul_tn(&grad);
                    self.accumulate(&mut grads, a, ga);
                    self.accumulate(&mut grads, b, gb);
                }
                Op::MatMulNT(a, b) => {
                    // out = a b^T: d/da = g b, d/db = g^T a
                    let ga = grad.matmul(self.value(b));
                    let gb = grad.matmul_tn(self.value(a));
                    self.accumulate(&mut grads, a, ga);
                    self.accumulate(&mut grads, b, gb);
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut grads, a, grad.clone());
                    self.accumulate(&mut grads, b, grad);
                }
                Op::Sub(a, b) => {
                    let neg = grad.map(|v| -v);
                    self.accumulate(&mut grads, a, grad);
                    self.accumulate(&mut grads, b, neg);
                }
                Op::Mul(a, b) => {
                    let ga = {
                        let data = grad
                            .data()
                            .iter()
                            .zip(self.value(b).data())
                            .map(|(g, v)| g * v)
                            .collect();
                        Tensor::from_vec(grad.rows(), grad.cols(), data)?
                    };
                    let gb = {
                        let data = grad
                            .data()
                            .iter()
                            .zip(self.value(a).data())
                            .map(|(g, v)| g * v)
                            .collect();
                        Tensor::from_vec(grad.rows(), grad.cols(), data)?
                    };
                    self.accumulate(&mut grads, a, ga);
                    self.accumulate(&mut grads, b, gb);
                }
                Op::HCat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let w = self.value(p).cols();
                        let mut g = Tensor::zeros(grad.rows(), w);
                        for r in 0..grad.rows() {
                            g.row_mut(r).copy_from_slice(&grad.row(r)[offset..offset + w]);
                        }
                        offset += w;
                        self.accumulate(&mut grads, p, g);
                    }
                }
                Op::VCat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let h = self.value(p).rows();
                        let mut g = Tensor::zeros(h, grad.cols());
                        for r in 0..h {
                            g.row_mut(r).copy_from_slice(grad.row(offset + r));
                        }
                        offset += h;
                        self.accumulate(&mut grads, p, g);
                    }
                }
                Op::Row(src, r) => {
                    let mut g = Tensor::zeros(self.value(src).rows(), self.value(src).cols());
                    g.row_mut(r).copy_from_slice(grad.row(0));
                    self.accumulate(&mut grads, src, g);
                }
                Op::SliceCols(src, start, end) => {
                    let mut g = Tensor::zeros(self.value(src).rows(), self.value(src).cols());
                    for r in 0..g.rows() {
                        g.row_mut(r)[start..end].copy_from_slice(grad.row(r));
                    }
                    self.accumulate(&mut grads, src, g);
                }
                Op::Transpose(src) => {
                    self.accumulate(&mut grads, src, grad.transposed());
                }
                Op::SoftmaxRows(src) => {
                    let y = &self.values[i];
                    let mut g = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = grad.row(r);
                        let dot: f64 = yr.iter().zip(gr.iter()).map(|(a, b)| a * b).sum();
                        for (out, (&yv, &gv)) in g.row_mut(r).iter_mut().zip(yr.iter().zip(gr.iter())) {
                            *out = yv * (gv - dot);
                        }
                    }
                    self.accumulate(&mut grads, src, g);
                }
                Op::Tanh(src) => {
                    let y = &self.values[i];
                    let data = grad
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(g, t)| g * (1.0 - t * t))
                        .collect();
                    let g = Tensor::from_vec(grad.rows(), grad.cols(), data)?;
                    self.accumulate(&mut grads, src, g);
                }
                Op::Sigmoid(src) => {
                    let y = &self.values[i];
                    let data = grad
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(g, s)| g * s * (1.0 - s))
                        .collect();
                    let g = Tensor::from_vec(grad.rows(), grad.cols(), data)?;
                    self.accumulate(&mut grads, src, g);
                }
                Op::Relu(src) => {
                    let x = self.value(src);
                    let data = grad
                        .data()
                        .iter()
                        .zip(x.data())
                        .map(|(g, v)| if *v > 0.0 { *g } else { 0.0 })
                        .collect();
                    let g = Tensor::from_vec(grad.rows(), grad.cols(), data)?;
                    self.accumulate(&mut grads, src, g);
                }
                Op::MaxOverRows(src) => {
                    let x = self.value(src);
                    let mut g = Tensor::zeros(x.rows(), x.cols());
                    for c in 0..x.cols() {
                        let mut best_r = 0;
                        let mut best = f64::NEG_INFINITY;
                        for r in 0..x.rows() {
                            let v = x.get(r, c);
                            if v > best {
                                best = v;
                                best_r = r;
                            }
                        }
                        g.set(best_r, c, grad.get(0, c));
                    }
                    self.accumulate(&mut grads, src, g);
                }
                Op::Mean(src) => {
                    let n = self.value(src).len() as f64;
                    let gv = grad.get(0, 0) / n;
                    let t = self.value(src);
                    let g = Tensor::from_vec(t.rows(), t.cols(), vec![gv; t.len()])?;
                    self.accumulate(&mut grads, src, g);
                }
                Op::BceLoss { scores, labels } => {
                    let n = scores.len() as f64;
                    let gv = grad.get(0, 0);
                    for (&s, &y) in scores.iter().zip(labels.iter()) {
                        let p = self.value(s).get(0, 0);
                        let d = if p <= BCE_EPS || p >= 1.0 - BCE_EPS {
                            0.0
                        } else {
                            (-y / p + (1.0 - y) / (1.0 - p)) / n
                        };
                        self.accumulate(&mut grads, s, Tensor::scalar(gv * d));
                    }
                }
            }
        }

        let mut out = Gradients::default();
        for (i, op) in self.ops.iter().enumerate() {
            if let Op::Param(pid) = op {
                if let Some(g) = grads[i].take() {
                    out.slots.insert(*pid, g);
                }
            }
        }
        Ok(out)
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], target: NodeId, g: Tensor) {
        match &mut grads[target.0] {
            Some(slot) => slot.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(1, 2, vec![0.0, 0.0]).unwrap());
        let y = tape.softmax_rows(x);
        assert_eq!(tape.value(y).data(), &[0.5, 0.5]);
    }

    #[test]
    fn concat_rowwise_shapes() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(2, 3));
        let b = tape.leaf(Tensor::zeros(2, 5));
        let c = tape.hcat(&[a, b]).unwrap();
        assert_eq!(tape.value(c).shape(), (2, 8));
    }

    #[test]
    fn matmul_shape_error_names_op() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(2, 3));
        let b = tape.leaf(Tensor::zeros(2, 3));
        let err = tape.matmul(a, b).unwrap_err();
        assert!(err.to_string().contains("matmul"));
        assert!(err.to_string().contains("2x3"));
    }

    #[test]
    fn grad_of_sum_of_squares_is_2x() {
        // d/dx mean(x ⊙ x) * n = 2x, checked through mean with rescale by n.
        let mut params = Params::new();
        let pid = params.add("x", Tensor::from_vec(1, 3, vec![1.0, -2.0, 3.0]).unwrap());
        let mut tape = Tape::new();
        let x = tape.param(&params, pid);
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.mean(sq);
        let grads = tape.backward(loss).unwrap();
        let g = grads.get(pid).unwrap();
        // mean divides by 3, so expected gradient is 2x/3.
        let expected = [2.0 / 3.0, -4.0 / 3.0, 6.0 / 3.0];
        for (a, e) in g.data().iter().zip(expected.iter()) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_gradient_at_zero_is_quarter() {
        let mut params = Params::new();
        let pid = params.add("z", Tensor::scalar(0.0));
        let mut tape = Tape::new();
        let z = tape.param(&params, pid);
        let s = tape.sigmoid(z);
        let grads = tape.backward(s).unwrap();
        let g = grads.get(pid).unwrap().get(0, 0);
        assert!((g - 0.25).abs() < 1e-15);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(2, 2));
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn param_fanin_accumulates() {
        // loss = mean(x + x) -> grad = 2/len per entry
        let mut params = Params::new();
        let pid = params.add("x", Tensor::from_vec(1, 2, vec![1.0, 2.0]).unwrap());
        let mut tape = Tape::new();
        let x = tape.param(&params, pid);
        let s = tape.add(x, x).unwrap();
        let loss = tape.mean(s);
        let grads = tape.backward(loss).unwrap();
        let g = grads.get(pid).unwrap();
        assert_eq!(g.data(), &[1.0, 1.0]);
    }

    #[test]
    fn independent_subgraphs_gradient_like_separate_tapes() {
        let mut params = Params::new();
        let pa = params.add("a", Tensor::from_vec(1, 2, vec![0.3, -0.7]).unwrap());
        let pb = params.add("b", Tensor::from_vec(1, 2, vec![1.5, 0.2]).unwrap());

        // Joint tape: loss = mean(a ⊙ a) + mean(b ⊙ b)
        let mut tape = Tape::new();
        let a = tape.param(&params, pa);
        let b = tape.param(&params, pb);
        let sa = tape.mul(a, a).unwrap();
        let sb = tape.mul(b, b).unwrap();
        let ma = tape.mean(sa);
        let mb = tape.mean(sb);
        let loss = tape.add(ma, mb).unwrap();
        let joint = tape.backward(loss).unwrap();

        // Separate tapes.
        let mut ta = Tape::new();
        let a2 = ta.param(&params, pa);
        let sa2 = ta.mul(a2, a2).unwrap();
        let la = ta.mean(sa2);
        let only_a = ta.backward(la).unwrap();

        let mut tb = Tape::new();
        let b2 = tb.param(&params, pb);
        let sb2 = tb.mul(b2, b2).unwrap();
        let lb = tb.mean(sb2);
        let only_b = tb.backward(lb).unwrap();

        assert_eq!(joint.get(pa).unwrap(), only_a.get(pa).unwrap());
        assert_eq!(joint.get(pb).unwrap(), only_b.get(pb).unwrap());
    }

    #[test]
    fn softmax_rows_sum_to_one_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let rows = rng.gen_range(1..=32);
            let cols = rng.gen_range(1..=32);
            let data = (0..rows * cols).map(|_| rng.gen_range(-30.0..30.0)).collect();
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::from_vec(rows, cols, data).unwrap());
            let y = tape.softmax_rows(x);
            for r in 0..rows {
                let sum: f64 = tape.value(y).row(r).iter().sum();
                assert!((sum - 1.0).abs() < 1e-9, "row sum {sum}");
            }
        }
    }

    #[test]
    fn bce_loss_values() {
        let mut tape = Tape::new();
        let half = tape.leaf(Tensor::scalar(0.5));
        let loss = tape.bce_loss(&[half], &[1.0]).unwrap();
        assert!((tape.value(loss).get(0, 0) - std::f64::consts::LN_2).abs() < 1e-12);

        // perfect predictions after clamping
        let mut tape = Tape::new();
        let one = tape.leaf(Tensor::scalar(1.0));
        let zero = tape.leaf(Tensor::scalar(0.0));
        let loss = tape.bce_loss(&[one, zero], &[1.0, 0.0]).unwrap();
        assert!(tape.value(loss).get(0, 0) < 1e-10);

        // batch mean of two per-score losses
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::scalar(0.8));
        let b = tape.leaf(Tensor::scalar(0.3));
        let joint = tape.bce_loss(&[a, b], &[1.0, 0.0]).unwrap();
        let expected = (-(0.8f64.ln()) + -(0.7f64.ln())) / 2.0;
        assert!((tape.value(joint).get(0, 0) - expected).abs() < 1e-12);
    }

    #[test]
    fn bce_rejects_length_mismatch() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::scalar(0.5));
        assert!(tape.bce_loss(&[a], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn ops_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..48).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let run = |data: &[f64]| {
            let mut tape = Tape::new();
            let a = tape.leaf(Tensor::from_vec(6, 8, data.to_vec()).unwrap());
            let s = tape.softmax_rows(a);
            let t = tape.tanh(s);
            let m = tape.max_over_rows(t);
            tape.value(m).data().to_vec()
        };
        let first = run(&data);
        let second = run(&data);
        assert_eq!(first, second);
    }
}
