//! Trainable parameters and weight initialization.

use std::cell::RefCell;
use std::rc::Rc;

use ndarray::Array2;
use rand::Rng;

use super::Real;

struct ParamInner<F: Real> {
    name: String,
    value: Array2<F>,
    grad: Array2<F>,
    trainable: bool,
}

/// A named tensor with an accumulated gradient of the same shape.
///
/// Cheap to clone (shared handle). Gradients accumulate across
/// [`crate::nn::Tape::backward`] calls until [`Parameter::zero_grad`].
#[derive(Clone)]
pub struct Parameter<F: Real> {
    inner: Rc<RefCell<ParamInner<F>>>,
}

impl<F: Real> Parameter<F> {
    pub fn new(name: impl Into<String>, value: Array2<F>) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Self {
            inner: Rc::new(RefCell::new(ParamInner {
                name: name.into(),
                value,
                grad,
                trainable: true,
            })),
        }
    }

    /// A parameter excluded from optimization and parameter counts.
    pub fn frozen(name: impl Into<String>, value: Array2<F>) -> Self {
        let p = Self::new(name, value);
        p.inner.borrow_mut().trainable = false;
        p
    }

    pub fn name(&self) -> String {
        self.inner.borrow().name.clone()
    }

    pub fn trainable(&self) -> bool {
        self.inner.borrow().trainable
    }

    pub fn shape(&self) -> (usize, usize) {
        self.inner.borrow().value.dim()
    }

    /// Number of scalar coordinates.
    pub fn len(&self) -> usize {
        self.inner.borrow().value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self) -> Array2<F> {
        self.inner.borrow().value.clone()
    }

    pub fn grad(&self) -> Array2<F> {
        self.inner.borrow().grad.clone()
    }

    pub fn set_value(&self, value: Array2<F>) {
        let mut inner = self.inner.borrow_mut();
        assert_eq!(inner.value.dim(), value.dim(), "parameter shape is fixed");
        inner.value = value;
    }

    pub fn zero_grad(&self) {
        self.inner.borrow_mut().grad.fill(F::zero());
    }

    pub(crate) fn accumulate_grad(&self, delta: &Array2<F>) {
        let mut inner = self.inner.borrow_mut();
        inner.grad += delta;
    }

    /// Mutable access to value and gradient together (optimizer updates).
    pub fn with_value_grad_mut(&self, f: impl FnOnce(&mut Array2<F>, &Array2<F>)) {
        let mut inner = self.inner.borrow_mut();
        let ParamInner { value, grad, .. } = &mut *inner;
        f(value, grad);
    }

    /// Read one coordinate by flat (row-major) index.
    pub fn coord(&self, flat: usize) -> F {
        let inner = self.inner.borrow();
        let cols = inner.value.ncols();
        inner.value[(flat / cols, flat % cols)]
    }

    /// Read one gradient coordinate by flat (row-major) index.
    pub fn grad_coord(&self, flat: usize) -> F {
        let inner = self.inner.borrow();
        let cols = inner.grad.ncols();
        inner.grad[(flat / cols, flat % cols)]
    }

    /// Add `delta` to one coordinate (finite-difference probing).
    pub fn nudge(&self, flat: usize, delta: F) {
        let mut inner = self.inner.borrow_mut();
        let cols = inner.value.ncols();
        inner.value[(flat / cols, flat % cols)] += delta;
    }

    /// Two handles referring to the same underlying parameter.
    pub fn same_as(&self, other: &Self) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }
}

impl<F: Real> std::fmt::Debug for Parameter<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let inner = self.inner.borrow();
        write!(f, "Parameter({}, {:?})", inner.name, inner.value.dim())
    }
}

/// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, the default for linear weights.
///
/// Sampling happens in f64 and is cast, so a given rng stream produces the
/// same weights (up to rounding) at every precision.
pub fn init_uniform_fan_in<F: Real>(
    rows: usize,
    cols: usize,
    fan_in: usize,
    rng: &mut impl Rng,
) -> Array2<F> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| {
        super::real(rng.gen_range(-bound..bound))
    })
}

/// `N(0, 1) * scale`, the default for embeddings with `scale = 1/sqrt(dim)`.
pub fn init_normal_scaled<F: Real>(
    rows: usize,
    cols: usize,
    scale: f64,
    rng: &mut impl Rng,
) -> Array2<F> {
    Array2::from_shape_fn((rows, cols), |_| {
        // Box-Muller keeps the dependency surface small and the stream
        // identical across precisions.
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        super::real(z * scale)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grad_starts_zero_and_resets() {
        let p: Parameter<f64> = Parameter::new("w", array![[1.0, 2.0]]);
        assert_eq!(p.grad(), array![[0.0, 0.0]]);
        p.accumulate_grad(&array![[3.0, 4.0]]);
        p.accumulate_grad(&array![[1.0, 1.0]]);
        assert_eq!(p.grad(), array![[4.0, 5.0]]);
        p.zero_grad();
        assert_eq!(p.grad(), array![[0.0, 0.0]]);
    }

    #[test]
    fn init_bounds_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w: Array2<f64> = init_uniform_fan_in(8, 4, 16, &mut rng);
        let bound = 1.0 / 4.0;
        assert!(w.iter().all(|&x| x > -bound && x < bound));

        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let a: Array2<f64> = init_normal_scaled(4, 4, 0.5, &mut r1);
        let b: Array2<f64> = init_normal_scaled(4, 4, 0.5, &mut r2);
        assert_eq!(a, b);
        assert!(a.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn same_stream_across_precisions() {
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let a: Array2<f64> = init_uniform_fan_in(3, 3, 9, &mut r1);
        let b: Array2<f32> = init_uniform_fan_in(3, 3, 9, &mut r2);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - *y as f64).abs() < 1e-7);
        }
    }
}
