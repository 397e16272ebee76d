//! Raw slice kernels. Shape checking happens in the callers; these only assert.

use crate::numerics::scalar::Scalar;

/// `c (+)= op(a) * op(b)` where `op(a)` is `m x k` and `op(b)` is `k x n`.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Scalar>(trans_a: bool, trans_b: bool, m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T], accumulate: bool) {
    assert_eq!(a.len(), m * k, "gemm: lhs length");
    assert_eq!(b.len(), k * n, "gemm: rhs length");
    assert_eq!(c.len(), m * n, "gemm: output length");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c.iter_mut().for_each(|x| *x = T::zero());
        }
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { T::one() } else { T::zero() };
    // SAFETY: the asserts above pin every slice to exactly the extent the
    // strides describe.
    unsafe {
        T::gemm_raw(m, k, n, T::one(), a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
    }
}

/// Softmax along `axis` of a row-major tensor with the given shape.
pub fn softmax_axis<T: Scalar>(shape: &[usize], axis: usize, x: &[T]) -> Vec<T> {
    let outer: usize = shape[..axis].iter().product();
    let dim = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![T::zero(); x.len()];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * dim * inner + i;
            let mut max = T::neg_infinity();
            for d in 0..dim {
                max = max.max(x[base + d * inner]);
            }
            let mut sum = T::zero();
            for d in 0..dim {
                let e = (x[base + d * inner] - max).exp();
                out[base + d * inner] = e;
                sum += e;
            }
            for d in 0..dim {
                out[base + d * inner] /= sum;
            }
        }
    }
    out
}

/// In-place softmax of one contiguous row.
pub fn softmax_row<T: Scalar>(row: &mut [T]) {
    let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// In-place log-softmax of one contiguous row.
pub fn log_softmax_row<T: Scalar>(row: &mut [T]) {
    let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
    for v in row.iter_mut() {
        *v -= lse;
    }
}

/// Row-wise layer norm. Returns `(y, xhat, rstd)`.
pub fn layer_norm_rows<T: Scalar>(x: &[T], cols: usize, gain: &[T], bias: &[T], eps: T) -> (Vec<T>, Vec<T>, Vec<T>) {
    let rows = x.len() / cols;
    let n = T::of(cols as f64);
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut rstd = vec![T::zero(); rows];
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        let mean = row.iter().copied().sum::<T>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let rs = T::one() / (var + eps).sqrt();
        rstd[r] = rs;
        for c in 0..cols {
            let h = (row[c] - mean) * rs;
            xhat[r * cols + c] = h;
            y[r * cols + c] = h * gain[c] + bias[c];
        }
    }
    (y, xhat, rstd)
}

/// Layer norm of a single row into `out`, used by the incremental decoder.
pub fn layer_norm_row_into<T: Scalar>(x: &[T], gain: &[T], bias: &[T], eps: T, out: &mut [T]) {
    let n = T::of(x.len() as f64);
    let mean = x.iter().copied().sum::<T>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let rs = T::one() / (var + eps).sqrt();
    for c in 0..x.len() {
        out[c] = (x[c] - mean) * rs * gain[c] + bias[c];
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Tanh-approximated GELU.
#[inline]
pub fn gelu<T: Scalar>(x: T) -> T {
    let c = T::of(GELU_C);
    let a = T::of(GELU_A);
    let half = T::of(0.5);
    half * x * (T::one() + (c * (x + a * x * x * x)).tanh())
}

#[inline]
pub fn gelu_grad<T: Scalar>(x: T) -> T {
    let c = T::of(GELU_C);
    let a = T::of(GELU_A);
    let half = T::of(0.5);
    let u = c * (x + a * x * x * x);
    let t = u.tanh();
    let du = c * (T::one() + T::of(3.0) * a * x * x);
    half * (T::one() + t) + half * x * (T::one() - t * t) * du
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for l in 0..4 {
            acc[l] += a[i * 4 + l] * b[i * 4 + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Layout of a batched multi-head attention call.
///
/// Queries are `[batch * q_len, d]`, keys and values `[batch * k_len, d]`.
/// Keys at positions `>= key_lens[b]` are masked; with `causal`, query `i`
/// only sees keys `j <= i`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionSpec {
    pub batch: usize,
    pub q_len: usize,
    pub k_len: usize,
    pub heads: usize,
    pub causal: bool,
    pub key_lens: Vec<usize>,
}

impl AttentionSpec {
    fn visible(&self, b: usize, i: usize) -> usize {
        let mut n = self.key_lens[b].min(self.k_len);
        if self.causal {
            n = n.min(i + 1);
        }
        n
    }
}

/// Returns `(output, probs)` with probs laid out `[batch, heads, q_len, k_len]`.
pub fn attention_forward<T: Scalar>(spec: &AttentionSpec, d: usize, q: &[T], k: &[T], v: &[T]) -> (Vec<T>, Vec<T>) {
    let dh = d / spec.heads;
    let scale = T::one() / T::of(dh as f64).sqrt();
    let (tq, tk) = (spec.q_len, spec.k_len);
    let mut out = vec![T::zero(); spec.batch * tq * d];
    let mut probs = vec![T::zero(); spec.batch * spec.heads * tq * tk];
    for b in 0..spec.batch {
        for h in 0..spec.heads {
            for i in 0..tq {
                let n = spec.visible(b, i);
                let qrow = &q[(b * tq + i) * d + h * dh..][..dh];
                let p = &mut probs[((b * spec.heads + h) * tq + i) * tk..][..tk];
                for j in 0..n {
                    let krow = &k[(b * tk + j) * d + h * dh..][..dh];
                    p[j] = dot(qrow, krow) * scale;
                }
                softmax_row(&mut p[..n]);
                let o = &mut out[(b * tq + i) * d + h * dh..][..dh];
                for j in 0..n {
                    let vrow = &v[(b * tk + j) * d + h * dh..][..dh];
                    axpy(p[j], vrow, o);
                }
            }
        }
    }
    (out, probs)
}

/// Gradients `(dq, dk, dv)` of [`attention_forward`].
#[allow(clippy::too_many_arguments)]
pub fn attention_backward<T: Scalar>(spec: &AttentionSpec, d: usize, q: &[T], k: &[T], v: &[T], probs: &[T], dout: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let dh = d / spec.heads;
    let scale = T::one() / T::of(dh as f64).sqrt();
    let (tq, tk) = (spec.q_len, spec.k_len);
    let mut dq = vec![T::zero(); q.len()];
    let mut dk = vec![T::zero(); k.len()];
    let mut dv = vec![T::zero(); v.len()];
    let mut dp = vec![T::zero(); tk];
    for b in 0..spec.batch {
        for h in 0..spec.heads {
            for i in 0..tq {
                let n = spec.visible(b, i);
                let p = &probs[((b * spec.heads + h) * tq + i) * tk..][..tk];
                let go = &dout[(b * tq + i) * d + h * dh..][..dh];
                let mut inner = T::zero();
                for j in 0..n {
                    let vrow = &v[(b * tk + j) * d + h * dh..][..dh];
                    dp[j] = dot(go, vrow);
                    inner += dp[j] * p[j];
                    axpy(p[j], go, &mut dv[(b * tk + j) * d + h * dh..][..dh]);
                }
                let qrow = &q[(b * tq + i) * d + h * dh..][..dh];
                for j in 0..n {
                    let ds = p[j] * (dp[j] - inner) * scale;
                    if ds == T::zero() {
                        continue;
                    }
                    let krow = &k[(b * tk + j) * d + h * dh..][..dh];
                    axpy(ds, krow, &mut dq[(b * tq + i) * d + h * dh..][..dh]);
                    axpy(ds, qrow, &mut dk[(b * tk + j) * d + h * dh..][..dh]);
                }
            }
        }
    }
    (dq, dk, dv)
}
