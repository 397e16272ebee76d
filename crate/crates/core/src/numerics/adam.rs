use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::scalar::Scalar;
use crate::numerics::tensor::Tensor;

/// Adam optimizer state with bias correction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub step_count: u64,
    pub first_moment: Vec<Vec<T>>,
    pub second_moment: Vec<Vec<T>>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(sizes: impl IntoIterator<Item = usize>) -> Self {
        Self::with_hyper(sizes, 0.9, 0.999, 1e-8).expect("default Adam hyperparameters are valid")
    }

    pub fn with_hyper(sizes: impl IntoIterator<Item = usize>, beta1: f64, beta2: f64, epsilon: f64) -> Result<Self> {
        if !(0.0 < beta1 && beta1 < 1.0 && 0.0 < beta2 && beta2 < 1.0) || epsilon <= 0.0 {
            return Err(Error::config(format!("Adam betas ({beta1}, {beta2}) must lie in (0,1), eps > 0")));
        }
        let sizes: Vec<usize> = sizes.into_iter().collect();
        Ok(AdamState {
            step_count: 0,
            first_moment: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            second_moment: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            beta1,
            beta2,
            epsilon,
        })
    }
}

/// One Adam update over `params`, reading each parameter's accumulated
/// gradient (missing gradients count as zero). Gradients are left in place.
pub fn adam_step<T: Scalar>(params: &mut [&mut Tensor<T>], state: &mut AdamState<T>, lr: f64) -> Result<()> {
    if params.len() != state.first_moment.len() {
        return Err(Error::shape(format!("optimizer tracks {} tensors, got {}", state.first_moment.len(), params.len())));
    }
    for (i, p) in params.iter().enumerate() {
        if state.first_moment[i].len() != p.numel() {
            return Err(Error::shape(format!("parameter {i}: {} values vs moment of {}", p.numel(), state.first_moment[i].len())));
        }
        if let Some(g) = p.grad() {
            if let Some(pos) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of parameter {i} at element {pos}")));
            }
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (T::of(state.beta1), T::of(state.beta2));
    let c1 = T::of(1.0 - state.beta1.powi(t));
    let c2 = T::of(1.0 - state.beta2.powi(t));
    let eps = T::of(state.epsilon);
    let lr = T::of(lr);
    let one = T::one();
    for (i, p) in params.iter_mut().enumerate() {
        let Some(g) = p.grad().map(<[T]>::to_vec) else { continue };
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        let data = p.data_mut();
        for j in 0..data.len() {
            m[j] = b1 * m[j] + (one - b1) * g[j];
            v[j] = b2 * v[j] + (one - b2) * g[j] * g[j];
            let mhat = m[j] / c1;
            let vhat = v[j] / c2;
            data[j] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(v: f64, g: f64) -> Tensor<f64> {
        let mut t = Tensor::scalar(v).with_grad();
        t.accumulate_grad(&[g]).unwrap();
        t
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = Tensor::new(vec![3], vec![0.3f32, -1.0, 2.0]).unwrap().with_grad();
        p.accumulate_grad(&[0.0; 3]).unwrap();
        let before = p.clone();
        let mut st = AdamState::new([3]);
        adam_step(&mut [&mut p], &mut st, 0.1).unwrap();
        assert_eq!(p.data(), before.data());
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn single_step_matches_hand_formula() {
        // m = 0.1, v = 0.001, mhat = 1, vhat = 1 -> x - 0.1 * 1 / (1 + 1e-8)
        let mut p = param(0.5, 1.0);
        let mut st = AdamState::new([1]);
        adam_step(&mut [&mut p], &mut st, 0.1).unwrap();
        let want = 0.5 - 0.1 / (1.0 + 1e-8);
        assert!((p.data()[0] - want).abs() < 1e-15);
    }

    #[test]
    fn two_steps_match_scalar_recurrence() {
        let grads = [0.7, -0.3];
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.05);
        let (mut x, mut m, mut v) = (1.25f64, 0.0, 0.0);
        for (t, g) in grads.iter().enumerate() {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32 + 1));
            let vh = v / (1.0 - b2.powi(t as i32 + 1));
            x -= lr * mh / (vh.sqrt() + eps);
        }
        let mut p = Tensor::scalar(1.25f32).with_grad();
        let mut st = AdamState::new([1]);
        for g in grads {
            p.zero_grad();
            p.accumulate_grad(&[g as f32]).unwrap();
            adam_step(&mut [&mut p], &mut st, lr).unwrap();
        }
        assert!((p.data()[0] as f64 - x).abs() < 1e-6);
    }

    #[test]
    fn nan_gradient_halts() {
        let mut p = param(0.0, f64::NAN);
        let mut st = AdamState::new([1]);
        assert!(matches!(adam_step(&mut [&mut p], &mut st, 0.1), Err(Error::NonFinite(_))));
        assert_eq!(st.step_count, 0);
    }

    #[test]
    fn rejects_bad_betas() {
        assert!(AdamState::<f32>::with_hyper([1], 1.0, 0.9, 1e-8).is_err());
    }
}
