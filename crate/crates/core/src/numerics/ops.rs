//! Gradient-free tensor ops. The same kernels back the graph versions in
//! [`crate::numerics::graph`].

use crate::error::{Error, Result};
use crate::numerics::kernels;
use crate::numerics::scalar::Scalar;
use crate::numerics::tensor::Tensor;

pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (&[m, k], &[k2, n]) = (a.shape(), b.shape()) else {
        return Err(Error::shape(format!("matmul needs matrices, got {:?} x {:?}", a.shape(), b.shape())));
    };
    if k != k2 {
        return Err(Error::shape(format!("matmul: inner dimensions {k} and {k2} differ")));
    }
    let mut out = vec![T::zero(); m * n];
    kernels::gemm(false, false, m, k, n, a.data(), b.data(), &mut out, false);
    Tensor::new(vec![m, n], out)
}

pub fn softmax<T: Scalar>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    if axis >= x.shape().len() {
        return Err(Error::shape(format!("softmax axis {axis} out of range for {:?}", x.shape())));
    }
    let out = kernels::softmax_axis(x.shape(), axis, x.data());
    Tensor::new(x.shape().to_vec(), out)
}

pub fn layer_norm<T: Scalar>(x: &Tensor<T>, gain: &Tensor<T>, bias: &Tensor<T>, eps: T) -> Result<Tensor<T>> {
    let (_, cols) = x.rows_cols();
    if gain.shape() != [cols] || bias.shape() != [cols] {
        return Err(Error::shape(format!("layer_norm: gain/bias must have {cols} entries")));
    }
    let (y, _, _) = kernels::layer_norm_rows(x.data(), cols, gain.data(), bias.data(), eps);
    Tensor::new(x.shape().to_vec(), y)
}
