//! Adam and AdamW with bias correction.

use crate::numerics::tensor::Tensor2;
use crate::scalar::Scalar;

/// A learnable tensor paired with its gradient buffer of identical shape.
#[derive(Debug, Clone)]
pub struct ParamWithGrad<T> {
    pub value: Tensor2<T>,
    pub grad: Tensor2<T>,
}

impl<T: Scalar> ParamWithGrad<T> {
    pub fn new(value: Tensor2<T>) -> Self {
        let grad = Tensor2::zeros(value.rows(), value.cols());
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    AdamW,
}

/// Optimizer hyperparameters plus per-parameter moment buffers.
///
/// Moment buffers are allocated lazily on the first step and are keyed by
/// position, so the caller must pass parameters in a stable order.
#[derive(Debug)]
pub struct OptimizerState<T> {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub step_count: u64,
    first_moment: Vec<Tensor2<T>>,
    second_moment: Vec<Tensor2<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    /// Standard defaults: β = (0.9, 0.999), eps = 1e-8.
    pub fn new(kind: OptimizerKind, lr: f64, weight_decay: f64) -> Self {
        Self {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    /// One update over all parameters. Adam applies coupled L2 decay
    /// (gradient + wd·param); AdamW decays decoupled (param scaled by
    /// 1 − lr·wd before the moment update).
    pub fn step(&mut self, params: &mut [&mut ParamWithGrad<T>]) {
        if self.first_moment.is_empty() {
            for p in params.iter() {
                let (r, c) = p.value.shape();
                self.first_moment.push(Tensor2::zeros(r, c));
                self.second_moment.push(Tensor2::zeros(r, c));
            }
        }
        assert_eq!(
            self.first_moment.len(),
            params.len(),
            "optimizer state does not match parameter list"
        );
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);

        for (idx, p) in params.iter_mut().enumerate() {
            assert!(
                p.value.same_shape(&p.grad),
                "parameter {idx}: grad shape mismatch"
            );
            let m = &mut self.first_moment[idx];
            let v = &mut self.second_moment[idx];
            for i in 0..p.value.len() {
                let mut theta = p.value.as_slice()[i].to_f64();
                let mut g = p.grad.as_slice()[i].to_f64();
                match self.kind {
                    OptimizerKind::Adam => {
                        if self.weight_decay != 0.0 {
                            g += self.weight_decay * theta;
                        }
                    }
                    OptimizerKind::AdamW => {
                        theta *= 1.0 - self.lr * self.weight_decay;
                    }
                }
                let mi = self.beta1 * m.as_slice()[i].to_f64() + (1.0 - self.beta1) * g;
                let vi = self.beta2 * v.as_slice()[i].to_f64() + (1.0 - self.beta2) * g * g;
                m.as_mut_slice()[i] = T::from_f64(mi);
                v.as_mut_slice()[i] = T::from_f64(vi);
                let m_hat = mi / bc1;
                let v_hat = vi / bc2;
                theta -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                p.value.as_mut_slice()[i] = T::from_f64(theta);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64) -> ParamWithGrad<f64> {
        ParamWithGrad::new(Tensor2::from_vec(1, 1, vec![v]).unwrap())
    }

    #[test]
    fn zero_grad_adam_leaves_params_unchanged() {
        let mut p = scalar_param(1.25);
        let mut opt = OptimizerState::new(OptimizerKind::Adam, 0.1, 0.0);
        opt.step(&mut [&mut p]);
        assert_eq!(p.value.at(0, 0), 1.25);
        assert_eq!(opt.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // bias correction makes m̂ = g and v̂ = g², so the step is
        // −lr·g/(|g| + eps)
        let mut p = scalar_param(0.0);
        p.grad.set(0, 0, 1.0);
        let mut opt = OptimizerState::new(OptimizerKind::Adam, 0.1, 0.0);
        opt.step(&mut [&mut p]);
        assert!((p.value.at(0, 0) + 0.1).abs() < 1e-7);
    }

    #[test]
    fn adamw_decoupled_decay_only() {
        let mut p = scalar_param(1.0);
        let mut opt = OptimizerState::new(OptimizerKind::AdamW, 0.01, 0.1);
        opt.step(&mut [&mut p]);
        assert!((p.value.at(0, 0) - 0.999).abs() < 1e-12);
    }

    #[test]
    fn step_count_strictly_increases() {
        let mut p = scalar_param(0.5);
        let mut opt = OptimizerState::new(OptimizerKind::AdamW, 0.01, 0.0);
        for expect in 1..=5u64 {
            opt.step(&mut [&mut p]);
            assert_eq!(opt.step_count, expect);
        }
    }

    #[test]
    fn adam_converges_on_quadratic() {
        // minimize (x − 3)²
        let mut p = scalar_param(0.0);
        let mut opt = OptimizerState::new(OptimizerKind::Adam, 0.05, 0.0);
        for _ in 0..2000 {
            let x = p.value.at(0, 0);
            p.grad.set(0, 0, 2.0 * (x - 3.0));
            opt.step(&mut [&mut p]);
        }
        assert!((p.value.at(0, 0) - 3.0).abs() < 1e-3);
    }
}
