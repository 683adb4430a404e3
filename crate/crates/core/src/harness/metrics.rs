//! Mean NLL and perplexity per trajectory bin.

use super::TrainError;
use crate::data::PlaySequence;
use crate::model::{GraphRecurrentModel, ModelError, MultiEntityTransformer};
use crate::nn::{Real, Tape, TensorId};

/// Evaluation summary. `perplexity == exp(mean_nll)` by construction: a
/// uniform predictor over `M` labels scores exactly `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Mean negative log-likelihood per prediction.
    pub mean_nll: f64,
    /// Perplexity per trajectory bin.
    pub perplexity: f64,
    pub sequences: usize,
    pub predictions: usize,
}

impl Metrics {
    pub fn from_totals(total_nll: f64, predictions: usize, sequences: usize) -> Self {
        let mean_nll = total_nll / predictions as f64;
        Self { mean_nll, perplexity: mean_nll.exp(), sequences, predictions }
    }
}

/// Anything trainable/evaluable on play sequences: a scalar sum-NLL loss
/// plus bookkeeping for per-prediction averaging.
pub trait SequenceModel<F: Real> {
    fn loss(&self, tape: &Tape<F>, seq: &PlaySequence) -> Result<TensorId, ModelError>;
    fn predictions(&self, seq: &PlaySequence) -> usize;
    fn parameters(&self) -> Vec<crate::nn::Parameter<F>>;
}

impl<F: Real> SequenceModel<F> for MultiEntityTransformer<F> {
    fn loss(&self, tape: &Tape<F>, seq: &PlaySequence) -> Result<TensorId, ModelError> {
        MultiEntityTransformer::loss(self, tape, seq)
    }

    fn predictions(&self, seq: &PlaySequence) -> usize {
        self.predictions_per_sequence(seq)
    }

    fn parameters(&self) -> Vec<crate::nn::Parameter<F>> {
        MultiEntityTransformer::parameters(self)
    }
}

impl<F: Real> SequenceModel<F> for GraphRecurrentModel<F> {
    fn loss(&self, tape: &Tape<F>, seq: &PlaySequence) -> Result<TensorId, ModelError> {
        self.loss_task_p(tape, seq)
    }

    fn predictions(&self, seq: &PlaySequence) -> usize {
        self.predictions_per_sequence(seq)
    }

    fn parameters(&self) -> Vec<crate::nn::Parameter<F>> {
        GraphRecurrentModel::parameters(self)
    }
}

/// Mean NLL over every (sequence, step, entity) prediction and its
/// perplexity. The reduction sorts per-sequence partial sums first, so
/// shuffling the evaluation set cannot change the result even at float
/// precision.
pub fn evaluate<F: Real>(
    model: &impl SequenceModel<F>,
    sequences: &[PlaySequence],
) -> Result<Metrics, TrainError> {
    if sequences.is_empty() {
        return Err(TrainError::EmptyEvalSet);
    }
    let mut parts: Vec<(u64, f64, usize)> = Vec::with_capacity(sequences.len());
    for seq in sequences {
        let tape = Tape::new();
        let loss = model.loss(&tape, seq)?;
        let value = tape.scalar(loss).to_f64().unwrap();
        parts.push((value.to_bits(), value, model.predictions(seq)));
    }
    parts.sort_unstable_by_key(|a| (a.0, a.2));
    let total: f64 = parts.iter().map(|p| p.1).sum();
    let predictions: usize = parts.iter().map(|p| p.2).sum();
    Ok(Metrics::from_totals(total, predictions, sequences.len()))
}
