//! Adam with bias correction.

use ndarray::Array2;

use super::{real, Parameter, Real};

/// Per-parameter optimizer state plus the hyperparameters in effect.
pub struct AdamState<F: Real> {
    pub first_moment: Array2<F>,
    pub second_moment: Array2<F>,
    pub step_count: u64,
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub epsilon: F,
}

impl<F: Real> AdamState<F> {
    pub fn new(shape: (usize, usize), lr: F, beta1: F, beta2: F, epsilon: F) -> Self {
        Self {
            first_moment: Array2::zeros(shape),
            second_moment: Array2::zeros(shape),
            step_count: 0,
            lr,
            beta1,
            beta2,
            epsilon,
        }
    }
}

/// One published Adam update on `param` from its accumulated gradient:
///
/// `m <- b1 m + (1-b1) g`, `v <- b2 v + (1-b2) g^2`, bias-corrected
/// `m^ = m/(1-b1^t)`, `v^ = v/(1-b2^t)`,
/// `theta <- theta - lr * m^ / (sqrt(v^) + eps)`.
pub fn adam_step<F: Real>(param: &Parameter<F>, state: &mut AdamState<F>) {
    state.step_count += 1;
    let t = state.step_count as i32;
    let one = F::one();
    let b1 = state.beta1;
    let b2 = state.beta2;
    let corr1 = one - b1.powi(t);
    let corr2 = one - b2.powi(t);
    let lr = state.lr;
    let eps = state.epsilon;

    param.with_value_grad_mut(|value, grad| {
        azip_update(
            value,
            grad,
            &mut state.first_moment,
            &mut state.second_moment,
            b1,
            b2,
            corr1,
            corr2,
            lr,
            eps,
        );
    });
}

#[allow(clippy::too_many_arguments)]
fn azip_update<F: Real>(
    value: &mut Array2<F>,
    grad: &Array2<F>,
    m: &mut Array2<F>,
    v: &mut Array2<F>,
    b1: F,
    b2: F,
    corr1: F,
    corr2: F,
    lr: F,
    eps: F,
) {
    let one = F::one();
    for (((theta, &g), mi), vi) in value.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
        *mi = b1 * *mi + (one - b1) * g;
        *vi = b2 * *vi + (one - b2) * g * g;
        let m_hat = *mi / corr1;
        let v_hat = *vi / corr2;
        *theta -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Convenience wrapper driving [`adam_step`] over a parameter list.
pub struct Adam<F: Real> {
    params: Vec<Parameter<F>>,
    states: Vec<AdamState<F>>,
}

impl<F: Real> Adam<F> {
    /// Paper-schedule defaults: `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-9`.
    pub fn new(params: Vec<Parameter<F>>, lr: f64) -> Self {
        Self::with_hyper(params, lr, 0.9, 0.999, 1e-9)
    }

    pub fn with_hyper(params: Vec<Parameter<F>>, lr: f64, b1: f64, b2: f64, eps: f64) -> Self {
        let states = params
            .iter()
            .map(|p| AdamState::new(p.shape(), real(lr), real(b1), real(b2), real(eps)))
            .collect();
        Self { params, states }
    }

    pub fn set_lr(&mut self, lr: f64) {
        for s in &mut self.states {
            s.lr = real(lr);
        }
    }

    pub fn lr(&self) -> f64 {
        self.states.first().map(|s| s.lr.to_f64().unwrap()).unwrap_or(0.0)
    }

    pub fn zero_grad(&self) {
        for p in &self.params {
            p.zero_grad();
        }
    }

    pub fn step(&mut self) {
        for (p, s) in self.params.iter().zip(self.states.iter_mut()) {
            if p.trainable() {
                adam_step(p, s);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn scalar_param(v: f64) -> Parameter<f64> {
        Parameter::new("p", array![[v]])
    }

    #[test]
    fn zero_gradient_is_noop_on_values() {
        let p = scalar_param(0.7);
        let mut s = AdamState::new((1, 1), 1e-3, 0.9, 0.999, 1e-9);
        adam_step(&p, &mut s);
        assert_eq!(p.value(), array![[0.7]]);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn first_step_matches_scalar_oracle() {
        // theta=0, g=1, lr=1e-6: m^=1, v^=1, step = lr/(1+eps) ~ 1e-6
        let p = scalar_param(0.0);
        p.accumulate_grad(&array![[1.0]]);
        let mut s = AdamState::new((1, 1), 1e-6, 0.9, 0.999, 1e-9);
        adam_step(&p, &mut s);
        let got = p.value()[(0, 0)];
        let want = -1e-6 / (1.0 + 1e-9);
        assert!((got - want).abs() < 1e-18);
    }

    #[test]
    fn constant_gradient_keeps_moving() {
        let one = scalar_param(0.0);
        let mut s1 = AdamState::new((1, 1), 1e-3, 0.9, 0.999, 1e-9);
        one.accumulate_grad(&array![[1.0]]);
        adam_step(&one, &mut s1);
        let after_one = one.value()[(0, 0)];

        let two = scalar_param(0.0);
        let mut s2 = AdamState::new((1, 1), 1e-3, 0.9, 0.999, 1e-9);
        two.accumulate_grad(&array![[1.0]]);
        adam_step(&two, &mut s2);
        adam_step(&two, &mut s2); // gradient still 1 (not zeroed)
        let after_two = two.value()[(0, 0)];

        assert!(after_two < after_one && after_one < 0.0);
        assert_eq!(s2.step_count, 2);
    }

    #[test]
    fn wrapper_skips_frozen_params() {
        let p = Parameter::frozen("frozen", array![[1.0]]);
        p.accumulate_grad(&array![[5.0]]);
        let mut opt = Adam::new(vec![p.clone()], 0.1);
        opt.step();
        assert_eq!(p.value(), array![[1.0]]);
        opt.zero_grad();
        assert_eq!(p.grad(), array![[0.0]]);
    }
}
