//! Define-by-run reverse-mode autodiff.
//!
//! Every op appends a node holding its output value and whatever it needs for
//! the backward pass. Leaves copy their tensor's data, so a graph never
//! borrows the parameters it was built from and the model stays free for the
//! optimizer once gradients are extracted.

use crate::error::{Error, Result};
use crate::numerics::kernels::{self, AttentionSpec};
use crate::numerics::rng::SeededRng;
use crate::numerics::scalar::Scalar;
use crate::numerics::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul { a: Var, b: Var, trans_b: bool, m: usize, k: usize, n: usize },
    AddBias { x: Var, bias: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { x: Var, factor: T },
    Sum { x: Var },
    Gelu { x: Var },
    Dropout { x: Var, mask: Vec<T> },
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<T>, rstd: Vec<T> },
    Softmax { x: Var, axis: usize },
    Embedding { table: Var, ids: Vec<usize> },
    Attention { q: Var, k: Var, v: Var, spec: AttentionSpec, probs: Vec<T> },
    CrossEntropy { logits: Var, targets: Vec<Option<usize>>, smoothing: T, probs: Vec<T> },
}

#[derive(Debug)]
struct Node<T> {
    shape: Vec<usize>,
    value: Vec<T>,
    op: Op<T>,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Leaf gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    leaves: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.leaves.get(v.0).and_then(|g| g.as_deref())
    }

    /// Adds the gradient of `v` into `tensor.grad`. A leaf the loss does not
    /// depend on contributes zeros.
    pub fn accumulate_into(&self, v: Var, tensor: &mut Tensor<T>) -> Result<()> {
        match self.get(v) {
            Some(g) => tensor.accumulate_grad(g),
            None => tensor.accumulate_grad(&vec![T::zero(); tensor.numel()]),
        }
    }
}

fn rows_of(shape: &[usize]) -> (usize, usize) {
    let cols = *shape.last().unwrap_or(&1);
    (shape.iter().product::<usize>() / cols.max(1), cols)
}

fn add_into<T: Scalar>(slot: &mut Option<Vec<T>>, g: &[T]) {
    match slot {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &b)| *a += b),
        None => *slot = Some(g.to_vec()),
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, name: &str, shape: Vec<usize>, value: Vec<T>, op: Op<T>, requires_grad: bool) -> Result<Var> {
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(name.to_string()));
        }
        self.nodes.push(Node { shape, value, op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Registers a tensor as a leaf. Gradients are tracked iff the tensor
    /// has `requires_grad` set.
    pub fn param(&mut self, t: &Tensor<T>) -> Result<Var> {
        self.push("leaf", t.shape().to_vec(), t.data().to_vec(), Op::Leaf, t.requires_grad())
    }

    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<T>) -> Result<Var> {
        let t = Tensor::new(shape, data)?;
        self.param(&t)
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn tensor(&self, v: Var) -> Tensor<T> {
        let n = &self.nodes[v.0];
        Tensor::new(n.shape.clone(), n.value.clone()).expect("graph nodes hold consistent shapes")
    }

    fn matrix(&self, v: Var, what: &str) -> Result<(usize, usize)> {
        let s = self.shape(v);
        if s.len() != 2 {
            return Err(Error::shape(format!("{what}: expected a matrix, got shape {s:?}")));
        }
        Ok((s[0], s[1]))
    }

    /// `a [m x k] * b [k x n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix(a, "matmul lhs")?;
        let (k2, n) = self.matrix(b, "matmul rhs")?;
        if k != k2 {
            return Err(Error::shape(format!("matmul: inner dimensions {k} and {k2} differ")));
        }
        let mut out = vec![T::zero(); m * n];
        kernels::gemm(false, false, m, k, n, self.value(a), self.value(b), &mut out, false);
        let rg = self.rg(a) || self.rg(b);
        self.push("matmul", vec![m, n], out, Op::MatMul { a, b, trans_b: false, m, k, n }, rg)
    }

    /// `a [m x k] * b^T` where `b` is `[n x k]`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix(a, "matmul_nt lhs")?;
        let (n, k2) = self.matrix(b, "matmul_nt rhs")?;
        if k != k2 {
            return Err(Error::shape(format!("matmul_nt: inner dimensions {k} and {k2} differ")));
        }
        let mut out = vec![T::zero(); m * n];
        kernels::gemm(false, true, m, k, n, self.value(a), self.value(b), &mut out, false);
        let rg = self.rg(a) || self.rg(b);
        self.push("matmul_nt", vec![m, n], out, Op::MatMul { a, b, trans_b: true, m, k, n }, rg)
    }

    /// Adds a bias vector to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (_, cols) = rows_of(self.shape(x));
        if self.shape(bias) != [cols] {
            return Err(Error::shape(format!("bias {:?} does not match {cols} columns", self.shape(bias))));
        }
        let bv = self.value(bias).to_vec();
        let out: Vec<T> = self.value(x).iter().enumerate().map(|(i, &v)| v + bv[i % cols]).collect();
        let rg = self.rg(x) || self.rg(bias);
        let shape = self.shape(x).to_vec();
        self.push("add_bias", shape, out, Op::AddBias { x, bias }, rg)
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        self.add_bias(y, b)
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(format!("{what}: shapes {:?} and {:?} differ", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x + y).collect();
        let rg = self.rg(a) || self.rg(b);
        let shape = self.shape(a).to_vec();
        self.push("add", shape, out, Op::Add { a, b }, rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x * y).collect();
        let rg = self.rg(a) || self.rg(b);
        let shape = self.shape(a).to_vec();
        self.push("mul", shape, out, Op::Mul { a, b }, rg)
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Result<Var> {
        let out = self.value(x).iter().map(|&v| v * factor).collect();
        let rg = self.rg(x);
        let shape = self.shape(x).to_vec();
        self.push("scale", shape, out, Op::Scale { x, factor }, rg)
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).iter().copied().sum();
        let rg = self.rg(x);
        self.push("sum", vec![1], vec![s], Op::Sum { x }, rg)
    }

    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).iter().map(|&v| kernels::gelu(v)).collect();
        let rg = self.rg(x);
        let shape = self.shape(x).to_vec();
        self.push("gelu", shape, out, Op::Gelu { x }, rg)
    }

    /// Inverted dropout. `rate == 0` returns `x` unchanged without a node.
    pub fn dropout(&mut self, x: Var, rate: f64, rng: &mut SeededRng) -> Result<Var> {
        if rate <= 0.0 {
            return Ok(x);
        }
        if rate >= 1.0 {
            return Err(Error::invalid(format!("dropout rate {rate} must be < 1")));
        }
        let keep = T::of(1.0 / (1.0 - rate));
        let mask: Vec<T> = (0..self.value(x).len()).map(|_| if rng.bernoulli(rate) { T::zero() } else { keep }).collect();
        let out = self.value(x).iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let rg = self.rg(x);
        let shape = self.shape(x).to_vec();
        self.push("dropout", shape, out, Op::Dropout { x, mask }, rg)
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: T) -> Result<Var> {
        let (_, cols) = rows_of(self.shape(x));
        if self.shape(gain) != [cols] || self.shape(bias) != [cols] {
            return Err(Error::shape(format!("layer_norm: gain/bias must have {cols} entries")));
        }
        let (y, xhat, rstd) = kernels::layer_norm_rows(self.value(x), cols, self.value(gain), self.value(bias), eps);
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        let shape = self.shape(x).to_vec();
        self.push("layer_norm", shape, y, Op::LayerNorm { x, gain, bias, xhat, rstd }, rg)
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::shape(format!("softmax axis {axis} out of range for {shape:?}")));
        }
        let out = kernels::softmax_axis(&shape, axis, self.value(x));
        let rg = self.rg(x);
        self.push("softmax", shape, out, Op::Softmax { x, axis }, rg)
    }

    /// Gathers rows of `table` (`[vocab x d]`).
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (rows, d) = self.matrix(table, "embedding table")?;
        if let Some(&bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(Error::invalid(format!("token id {bad} outside vocabulary of {rows}")));
        }
        if ids.is_empty() {
            return Err(Error::shape("embedding of an empty id list"));
        }
        let tv = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            out.extend_from_slice(&tv[i * d..(i + 1) * d]);
        }
        let rg = self.rg(table);
        self.push("embedding", vec![ids.len(), d], out, Op::Embedding { table, ids: ids.to_vec() }, rg)
    }

    pub fn attention(&mut self, q: Var, k: Var, v: Var, spec: AttentionSpec) -> Result<Var> {
        let (qr, d) = self.matrix(q, "attention queries")?;
        let (kr, dk) = self.matrix(k, "attention keys")?;
        self.same_shape(k, v, "attention keys/values")?;
        if dk != d || d % spec.heads != 0 {
            return Err(Error::shape(format!("attention: width {d}/{dk} with {} heads", spec.heads)));
        }
        if qr != spec.batch * spec.q_len || kr != spec.batch * spec.k_len || spec.key_lens.len() != spec.batch {
            return Err(Error::shape("attention: rows disagree with the batch layout"));
        }
        let (out, probs) = kernels::attention_forward(&spec, d, self.value(q), self.value(k), self.value(v));
        let rg = self.rg(q) || self.rg(k) || self.rg(v);
        self.push("attention", vec![qr, d], out, Op::Attention { q, k, v, spec, probs }, rg)
    }

    /// Mean label-smoothed negative log-likelihood over rows whose target is
    /// not `ignore_index`. The smoothed target puts `1 - eps` on the gold class
    /// plus `eps / vocab` on every class.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], smoothing: f64, ignore_index: usize) -> Result<Var> {
        let (rows, vocab) = self.matrix(logits, "cross_entropy logits")?;
        if targets.len() != rows {
            return Err(Error::shape(format!("{} targets for {rows} logit rows", targets.len())));
        }
        if !(0.0..1.0).contains(&smoothing) {
            return Err(Error::invalid(format!("label smoothing {smoothing} outside [0, 1)")));
        }
        let targets: Vec<Option<usize>> = targets
            .iter()
            .map(|&t| {
                if t == ignore_index {
                    Ok(None)
                } else if t < vocab {
                    Ok(Some(t))
                } else {
                    Err(Error::invalid(format!("target {t} outside vocabulary of {vocab}")))
                }
            })
            .collect::<Result<_>>()?;
        let count = targets.iter().filter(|t| t.is_some()).count();
        if count == 0 {
            return Err(Error::invalid("cross_entropy: every target is ignored"));
        }
        let eps = T::of(smoothing);
        let uniform = eps / T::of(vocab as f64);
        let mut probs = self.value(logits).to_vec();
        let mut total = T::zero();
        for (r, t) in targets.iter().enumerate() {
            let row = &mut probs[r * vocab..(r + 1) * vocab];
            let Some(t) = *t else { continue };
            kernels::log_softmax_row(row);
            let mut loss = -(T::one() - eps) * row[t];
            if smoothing > 0.0 {
                loss -= uniform * row.iter().copied().sum::<T>();
            }
            total += loss;
            row.iter_mut().for_each(|v| *v = v.exp());
        }
        let mean = total / T::of(count as f64);
        let rg = self.rg(logits);
        self.push("cross_entropy", vec![1], vec![mean], Op::CrossEntropy { logits, targets, smoothing: eps, probs }, rg)
    }

    /// Reverse pass from a scalar `loss`. Returns gradients for every leaf
    /// with `requires_grad`; the graph itself is not modified.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::shape(format!("backward needs a scalar loss, got shape {:?}", self.shape(loss))));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut leaves: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Leaf => leaves[idx] = Some(g),
                Op::MatMul { a, b, trans_b, m, k, n } => {
                    let (m, k, n) = (*m, *k, *n);
                    if self.rg(*a) {
                        // dA = G * op(B)^T
                        let mut da = vec![T::zero(); m * k];
                        kernels::gemm(false, !trans_b, m, n, k, &g, self.value(*b), &mut da, false);
                        add_into(&mut grads[a.0], &da);
                    }
                    if self.rg(*b) {
                        let mut db = vec![T::zero(); k * n];
                        if *trans_b {
                            // B is n x k: dB = G^T * A
                            kernels::gemm(true, false, n, m, k, &g, self.value(*a), &mut db, false);
                        } else {
                            kernels::gemm(true, false, k, m, n, self.value(*a), &g, &mut db, false);
                        }
                        add_into(&mut grads[b.0], &db);
                    }
                }
                Op::AddBias { x, bias } => {
                    if self.rg(*bias) {
                        let cols = self.shape(*bias)[0];
                        let mut db = vec![T::zero(); cols];
                        for row in g.chunks_exact(cols) {
                            db.iter_mut().zip(row).for_each(|(a, &b)| *a += b);
                        }
                        add_into(&mut grads[bias.0], &db);
                    }
                    if self.rg(*x) {
                        add_into(&mut grads[x.0], &g);
                    }
                }
                Op::Add { a, b } => {
                    if self.rg(*a) {
                        add_into(&mut grads[a.0], &g);
                    }
                    if self.rg(*b) {
                        add_into(&mut grads[b.0], &g);
                    }
                }
                Op::Mul { a, b } => {
                    if self.rg(*a) {
                        let d: Vec<T> = g.iter().zip(self.value(*b)).map(|(&g, &y)| g * y).collect();
                        add_into(&mut grads[a.0], &d);
                    }
                    if self.rg(*b) {
                        let d: Vec<T> = g.iter().zip(self.value(*a)).map(|(&g, &x)| g * x).collect();
                        add_into(&mut grads[b.0], &d);
                    }
                }
                Op::Scale { x, factor } => {
                    let d: Vec<T> = g.iter().map(|&v| v * *factor).collect();
                    add_into(&mut grads[x.0], &d);
                }
                Op::Sum { x } => {
                    let d = vec![g[0]; self.value(*x).len()];
                    add_into(&mut grads[x.0], &d);
                }
                Op::Gelu { x } => {
                    let d: Vec<T> = g.iter().zip(self.value(*x)).map(|(&g, &v)| g * kernels::gelu_grad(v)).collect();
                    add_into(&mut grads[x.0], &d);
                }
                Op::Dropout { x, mask } => {
                    let d: Vec<T> = g.iter().zip(mask).map(|(&g, &m)| g * m).collect();
                    add_into(&mut grads[x.0], &d);
                }
                Op::LayerNorm { x, gain, bias, xhat, rstd } => {
                    let cols = self.shape(*gain)[0];
                    let gv = self.value(*gain);
                    if self.rg(*gain) || self.rg(*bias) {
                        let mut dg = vec![T::zero(); cols];
                        let mut db = vec![T::zero(); cols];
                        for (grow, hrow) in g.chunks_exact(cols).zip(xhat.chunks_exact(cols)) {
                            for c in 0..cols {
                                dg[c] += grow[c] * hrow[c];
                                db[c] += grow[c];
                            }
                        }
                        if self.rg(*gain) {
                            add_into(&mut grads[gain.0], &dg);
                        }
                        if self.rg(*bias) {
                            add_into(&mut grads[bias.0], &db);
                        }
                    }
                    if self.rg(*x) {
                        let n = T::of(cols as f64);
                        let mut dx = vec![T::zero(); g.len()];
                        for (r, (grow, hrow)) in g.chunks_exact(cols).zip(xhat.chunks_exact(cols)).enumerate() {
                            let mut mean_d = T::zero();
                            let mut mean_dh = T::zero();
                            for c in 0..cols {
                                let dh = grow[c] * gv[c];
                                mean_d += dh;
                                mean_dh += dh * hrow[c];
                            }
                            mean_d /= n;
                            mean_dh /= n;
                            for c in 0..cols {
                                let dh = grow[c] * gv[c];
                                dx[r * cols + c] = rstd[r] * (dh - mean_d - hrow[c] * mean_dh);
                            }
                        }
                        add_into(&mut grads[x.0], &dx);
                    }
                }
                Op::Softmax { x, axis } => {
                    let shape = &node.shape;
                    let y = &node.value;
                    let outer: usize = shape[..*axis].iter().product();
                    let dim = shape[*axis];
                    let inner: usize = shape[axis + 1..].iter().product();
                    let mut dx = vec![T::zero(); y.len()];
                    for o in 0..outer {
                        for i in 0..inner {
                            let base = o * dim * inner + i;
                            let s: T = (0..dim).map(|d| g[base + d * inner] * y[base + d * inner]).sum();
                            for d in 0..dim {
                                let at = base + d * inner;
                                dx[at] = y[at] * (g[at] - s);
                            }
                        }
                    }
                    add_into(&mut grads[x.0], &dx);
                }
                Op::Embedding { table, ids } => {
                    let d = self.shape(*table)[1];
                    let mut dt = vec![T::zero(); self.value(*table).len()];
                    for (r, &id) in ids.iter().enumerate() {
                        kernels::axpy(T::one(), &g[r * d..(r + 1) * d], &mut dt[id * d..(id + 1) * d]);
                    }
                    add_into(&mut grads[table.0], &dt);
                }
                Op::Attention { q, k, v, spec, probs } => {
                    let d = self.shape(*q)[1];
                    let (dq, dk, dv) = kernels::attention_backward(spec, d, self.value(*q), self.value(*k), self.value(*v), probs, &g);
                    if self.rg(*q) {
                        add_into(&mut grads[q.0], &dq);
                    }
                    if self.rg(*k) {
                        add_into(&mut grads[k.0], &dk);
                    }
                    if self.rg(*v) {
                        add_into(&mut grads[v.0], &dv);
                    }
                }
                Op::CrossEntropy { logits, targets, smoothing, probs } => {
                    let vocab = self.shape(*logits)[1];
                    let count = targets.iter().filter(|t| t.is_some()).count();
                    let scale = g[0] / T::of(count as f64);
                    let uniform = *smoothing / T::of(vocab as f64);
                    let mut dl = vec![T::zero(); probs.len()];
                    for (r, t) in targets.iter().enumerate() {
                        let Some(t) = *t else { continue };
                        for c in 0..vocab {
                            let mut target = uniform;
                            if c == t {
                                target += T::one() - *smoothing;
                            }
                            dl[r * vocab + c] = (probs[r * vocab + c] - target) * scale;
                        }
                    }
                    add_into(&mut grads[logits.0], &dl);
                }
            }
        }
        Ok(Gradients { leaves })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_gradient_is_one() {
        let mut g = Graph::<f64>::new();
        let x = g.param(&Tensor::scalar(3.0).with_grad()).unwrap();
        let grads = g.backward(x).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[1.0]);
    }

    #[test]
    fn sum_of_squares_gradient_is_two_x() {
        let mut g = Graph::<f64>::new();
        let t = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap().with_grad();
        let x = g.param(&t).unwrap();
        let sq = g.mul(x, x).unwrap();
        let y = g.sum(sq).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::<f64>::new();
        let x = g.param(&Tensor::zeros(&[2]).with_grad()).unwrap();
        assert!(matches!(g.backward(x), Err(Error::Shape(_))));
    }

    #[test]
    fn repeated_accumulation_adds_up() {
        let mut t = Tensor::new(vec![2], vec![1.0f64, 2.0]).unwrap().with_grad();
        let mut g = Graph::new();
        let x = g.param(&t).unwrap();
        let y = g.sum(x).unwrap();
        let grads = g.backward(y).unwrap();
        grads.accumulate_into(x, &mut t).unwrap();
        grads.accumulate_into(x, &mut t).unwrap();
        assert_eq!(t.grad().unwrap(), &[2.0, 2.0]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut g = Graph::<f64>::new();
        let c = g.constant(vec![2], vec![1.0, 1.0]).unwrap();
        let x = g.param(&Tensor::new(vec![2], vec![3.0, 4.0]).unwrap().with_grad()).unwrap();
        let p = g.mul(c, x).unwrap();
        let y = g.sum(p).unwrap();
        let grads = g.backward(y).unwrap();
        assert!(grads.get(c).is_none());
        assert_eq!(grads.get(x).unwrap(), &[1.0, 1.0]);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut g = Graph::<f32>::new();
        let x = g.constant(vec![1], vec![f32::MAX]).unwrap();
        assert!(matches!(g.scale(x, 10.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn fully_ignored_targets_error() {
        let mut g = Graph::<f64>::new();
        let l = g.constant(vec![2, 3], vec![0.0; 6]).unwrap();
        assert!(g.cross_entropy(l, &[9, 9], 0.0, 9).is_err());
    }
}
