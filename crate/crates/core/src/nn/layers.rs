//! Layers assembled from tape ops.

use std::rc::Rc;

use ndarray::{Array1, Array2};
use rand::Rng;

use super::{init_uniform_fan_in, real, NnError, Parameter, Real, Tape, TensorId};

/// `-ln(p[label])` for one probability row. The differentiable batched
/// form is [`Tape::nll_sum`]; this is the plain-value version used by
/// metrics code.
pub fn cross_entropy_nll<F: Real>(probabilities: &Array1<F>, label: usize) -> Result<F, NnError> {
    if label >= probabilities.len() {
        return Err(NnError::LabelOutOfRange { row: 0, label, classes: probabilities.len() });
    }
    Ok(-probabilities[label].ln())
}

/// Affine map along the last axis: `y = x W + b` with `W: [in, out]`.
pub struct Linear<F: Real> {
    pub weight: Parameter<F>,
    pub bias: Parameter<F>,
}

impl<F: Real> Linear<F> {
    pub fn new(name: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: Parameter::new(format!("{name}.w"), init_uniform_fan_in(d_in, d_out, d_in, rng)),
            bias: Parameter::new(format!("{name}.b"), Array2::zeros((1, d_out))),
        }
    }

    pub fn forward(&self, tape: &Tape<F>, x: TensorId) -> Result<TensorId, NnError> {
        let w = tape.param(&self.weight);
        let b = tape.param(&self.bias);
        tape.add_bias(tape.matmul(x, w)?, b)
    }

    pub fn parameters(&self) -> Vec<Parameter<F>> {
        vec![self.weight.clone(), self.bias.clone()]
    }
}

pub struct LayerNorm<F: Real> {
    pub gain: Parameter<F>,
    pub shift: Parameter<F>,
    pub eps: F,
}

impl<F: Real> LayerNorm<F> {
    pub fn new(name: &str, d: usize) -> Self {
        Self {
            gain: Parameter::new(format!("{name}.gain"), Array2::ones((1, d))),
            shift: Parameter::new(format!("{name}.shift"), Array2::zeros((1, d))),
            eps: real(1e-5),
        }
    }

    pub fn forward(&self, tape: &Tape<F>, x: TensorId) -> Result<TensorId, NnError> {
        let g = tape.param(&self.gain);
        let s = tape.param(&self.shift);
        tape.layer_norm(x, g, s, self.eps)
    }

    pub fn parameters(&self) -> Vec<Parameter<F>> {
        vec![self.gain.clone(), self.shift.clone()]
    }
}

/// Stack of linear layers with a ReLU after every layer except the last.
pub struct Mlp<F: Real> {
    layers: Vec<Linear<F>>,
}

impl<F: Real> Mlp<F> {
    /// `dims` lists input then every layer width, e.g. `[23, 128, 256, 512]`.
    pub fn new(name: &str, dims: &[usize], rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "Mlp needs at least one layer");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(&format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn forward(&self, tape: &Tape<F>, x: TensorId) -> Result<TensorId, NnError> {
        let last = self.layers.len() - 1;
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, h)?;
            if i < last {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }

    pub fn parameters(&self) -> Vec<Parameter<F>> {
        self.layers.iter().flat_map(|l| l.parameters()).collect()
    }
}

/// Scaled dot-product attention with per-head masking.
///
/// Input and output are `[S, d_model]`; the mask is `[S, S]` booleans with
/// `true` marking entries a query row may attend to.
pub struct MultiHeadAttention<F: Real> {
    pub wq: Linear<F>,
    pub wk: Linear<F>,
    pub wv: Linear<F>,
    pub wo: Linear<F>,
    heads: usize,
    d_head: usize,
}

impl<F: Real> MultiHeadAttention<F> {
    pub fn new(
        name: &str,
        d_model: usize,
        heads: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, NnError> {
        if heads == 0 || !d_model.is_multiple_of(heads) {
            return Err(NnError::IndivisibleHeads { d_model, heads });
        }
        Ok(Self {
            wq: Linear::new(&format!("{name}.wq"), d_model, d_model, rng),
            wk: Linear::new(&format!("{name}.wk"), d_model, d_model, rng),
            wv: Linear::new(&format!("{name}.wv"), d_model, d_model, rng),
            wo: Linear::new(&format!("{name}.wo"), d_model, d_model, rng),
            heads,
            d_head: d_model / heads,
        })
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn forward(
        &self,
        tape: &Tape<F>,
        x: TensorId,
        mask: &Rc<Array2<bool>>,
    ) -> Result<TensorId, NnError> {
        Ok(self.forward_with_weights(tape, x, mask)?.0)
    }

    /// Returns the attended output and the post-softmax weight node for
    /// each head (`[S, S]`, rows summing to 1 over allowed columns).
    pub fn forward_with_weights(
        &self,
        tape: &Tape<F>,
        x: TensorId,
        mask: &Rc<Array2<bool>>,
    ) -> Result<(TensorId, Vec<TensorId>), NnError> {
        let q = self.wq.forward(tape, x)?;
        let k = self.wk.forward(tape, x)?;
        let v = self.wv.forward(tape, x)?;
        let scale = real::<F>(1.0 / (self.d_head as f64).sqrt());

        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let lo = h * self.d_head;
            let hi = lo + self.d_head;
            let qh = tape.slice_cols(q, lo, hi)?;
            let kh = tape.slice_cols(k, lo, hi)?;
            let vh = tape.slice_cols(v, lo, hi)?;
            let scores = tape.scale(tape.matmul(qh, tape.transpose(kh))?, scale);
            let probs = tape.masked_softmax(scores, Rc::clone(mask))?;
            weights.push(probs);
            outs.push(tape.matmul(probs, vh)?);
        }
        let concat = tape.concat_cols(&outs)?;
        Ok((self.wo.forward(tape, concat)?, weights))
    }

    pub fn parameters(&self) -> Vec<Parameter<F>> {
        [&self.wq, &self.wk, &self.wv, &self.wo]
            .iter()
            .flat_map(|l| l.parameters())
            .collect()
    }
}
