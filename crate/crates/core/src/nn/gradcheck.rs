//! Finite-difference gradient checking.

use rand::Rng;

use super::{NnError, Parameter, Real, Tape, TensorId};

/// Outcome of a [`grad_check`] run.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    pub tolerance: f64,
    /// Parameter name and flat coordinate of the worst disagreement.
    pub worst: Option<(String, usize)>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

/// Compare reverse-mode gradients of a scalar loss against central finite
/// differences on `coords` randomly sampled parameter coordinates.
///
/// `forward` must rebuild the same deterministic loss on the tape it is
/// given. The difference step is `cbrt(eps_f) * max(|theta|, 1)` with
/// `eps_f = machine eps * max(|loss|, 1)`, the usual balance between
/// cancellation and truncation for a function of that magnitude. Two
/// gradients within `sqrt(eps_f)` of zero count as agreeing (they are
/// numerically indistinguishable from zero at this loss scale); otherwise
/// the error is `|ad - fd| / max(|ad|, |fd|)`.
pub fn grad_check<F: Real>(
    params: &[Parameter<F>],
    mut forward: impl FnMut(&Tape<F>) -> Result<TensorId, NnError>,
    coords: usize,
    tolerance: f64,
    rng: &mut impl Rng,
) -> Result<GradCheckReport, NnError> {
    for p in params {
        p.zero_grad();
    }
    let tape = Tape::new();
    let loss = forward(&tape)?;
    let loss_scale = tape.scalar(loss).to_f64().unwrap().abs().max(1.0);
    tape.backward(loss)?;

    let eps_f = F::epsilon().to_f64().unwrap() * loss_scale;
    let step_scale = eps_f.cbrt();
    let atol = eps_f.sqrt();

    let total: usize = params.iter().map(|p| p.len()).sum();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        checked: 0,
        tolerance,
        worst: None,
    };

    for _ in 0..coords {
        let mut flat = rng.gen_range(0..total);
        let mut pi = 0;
        while flat >= params[pi].len() {
            flat -= params[pi].len();
            pi += 1;
        }
        let p = &params[pi];
        let analytic = p.grad_coord(flat).to_f64().unwrap();

        let theta = p.coord(flat).to_f64().unwrap();
        let h = step_scale * theta.abs().max(1.0);
        let hf = super::real::<F>(h);

        p.nudge(flat, hf);
        let plus = eval_loss(&mut forward)?;
        p.nudge(flat, -(hf + hf));
        let minus = eval_loss(&mut forward)?;
        p.nudge(flat, hf); // restore

        let numeric = (plus - minus) / (2.0 * h);
        let diff = (analytic - numeric).abs();
        let rel = if analytic.abs() < atol && numeric.abs() < atol {
            0.0
        } else {
            diff / analytic.abs().max(numeric.abs())
        };
        report.checked += 1;
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst = Some((p.name(), flat));
        }
    }
    Ok(report)
}

fn eval_loss<F: Real>(
    forward: &mut impl FnMut(&Tape<F>) -> Result<TensorId, NnError>,
) -> Result<f64, NnError> {
    let tape = Tape::new();
    let loss = forward(&tape)?;
    Ok(tape.scalar(loss).to_f64().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerNorm, Linear, Mlp, MultiHeadAttention};
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::rc::Rc;

    fn random_input(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.5..1.5))
    }

    #[test]
    fn linear_layer_high_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let lin: Linear<f64> = Linear::new("l", 6, 4, &mut rng);
        let x = random_input(5, 6, &mut rng);
        let report = grad_check(
            &lin.parameters(),
            |tape| {
                let y = lin.forward(tape, tape.leaf(x.clone()))?;
                Ok(tape.mean_all(tape.mul(y, y)?))
            },
            28,
            1e-5,
            &mut rng,
        )
        .unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn layer_norm_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ln: LayerNorm<f64> = LayerNorm::new("ln", 6);
        // nonuniform gain so the full backward path is exercised
        ln.gain.set_value(random_input(1, 6, &mut rng));
        let x = Parameter::new("x", random_input(4, 6, &mut rng));
        let mut params = ln.parameters();
        params.push(x.clone());
        let report = grad_check(
            &params,
            |tape| {
                let y = ln.forward(tape, tape.param(&x))?;
                let w = tape.leaf(random_fixed_weights());
                Ok(tape.mean_all(tape.mul(y, w)?))
            },
            24,
            1e-5,
            &mut ChaCha8Rng::seed_from_u64(13),
        )
        .unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }

    fn random_fixed_weights() -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        Array2::from_shape_fn((4, 6), |_| rng.gen_range(0.5..1.5))
    }

    #[test]
    fn masked_attention_and_softmax_nll_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mha: MultiHeadAttention<f64> = MultiHeadAttention::new("a", 8, 2, &mut rng).unwrap();
        let head: Linear<f64> = Linear::new("head", 8, 5, &mut rng);
        let x = random_input(6, 8, &mut rng);
        let mask = Rc::new(Array2::from_shape_fn((6, 6), |(i, j)| j <= i));
        let labels = Rc::new(vec![0usize, 3, 1, 4, 2, 2]);
        let mut params = mha.parameters();
        params.extend(head.parameters());
        let report = grad_check(
            &params,
            |tape| {
                let h = mha.forward(tape, tape.leaf(x.clone()), &mask)?;
                let probs = tape.softmax(head.forward(tape, h)?);
                tape.nll_sum(probs, Rc::clone(&labels))
            },
            60,
            1e-4,
            &mut ChaCha8Rng::seed_from_u64(15),
        )
        .unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn mlp_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let mlp: Mlp<f64> = Mlp::new("m", &[5, 8, 8, 4], &mut rng);
        let x = random_input(7, 5, &mut rng);
        let report = grad_check(
            &mlp.parameters(),
            |tape| {
                let y = mlp.forward(tape, tape.leaf(x.clone()))?;
                Ok(tape.mean_all(tape.mul(y, y)?))
            },
            40,
            1e-4,
            &mut ChaCha8Rng::seed_from_u64(17),
        )
        .unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn zero_loss_region_has_near_zero_gradients() {
        // a detached perfect prediction: loss = -ln(1) = 0 with no
        // dependence on the parameter being checked
        let p = Parameter::new("w", ndarray::array![[0.4, -0.1]]);
        let report = grad_check(
            std::slice::from_ref(&p),
            |tape| {
                let _unused = tape.param(&p);
                let probs = tape.leaf(ndarray::array![[1.0, 0.0]]);
                tape.nll_sum(probs, Rc::new(vec![0]))
            },
            2,
            1e-6,
            &mut ChaCha8Rng::seed_from_u64(18),
        )
        .unwrap();
        assert_eq!(report.max_rel_err, 0.0);
    }
}
