//! Constant-predictor baseline from training-set label frequencies.

use super::{Metrics, TrainError};
use crate::data::PlaySequence;

/// Label-frequency distribution with add-one smoothing, used as the same
/// prediction for every query. Smoothing keeps labels unseen in training
/// at finite NLL.
#[derive(Debug, Clone)]
pub struct MarginalBaseline {
    probs: Vec<f64>,
}

impl MarginalBaseline {
    pub fn fit(labels: impl IntoIterator<Item = u32>, classes: usize) -> Self {
        let mut counts = vec![1u64; classes];
        let mut total = classes as u64;
        for l in labels {
            counts[l as usize] += 1;
            total += 1;
        }
        Self { probs: counts.iter().map(|&c| c as f64 / total as f64).collect() }
    }

    /// Fit on the player labels of training sequences.
    pub fn fit_players(sequences: &[PlaySequence], classes: usize) -> Self {
        Self::fit(
            sequences.iter().flat_map(|s| {
                (0..s.t_steps())
                    .flat_map(move |t| (0..s.players()).map(move |k| s.player_label(t, k)))
            }),
            classes,
        )
    }

    /// Fit on the ball labels of training sequences.
    pub fn fit_ball(sequences: &[PlaySequence], classes: usize) -> Self {
        Self::fit(
            sequences
                .iter()
                .flat_map(|s| (0..s.t_steps()).filter_map(move |t| s.ball_label(t))),
            classes,
        )
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn nll(&self, label: u32) -> f64 {
        -self.probs[label as usize].ln()
    }

    pub fn evaluate_players(&self, sequences: &[PlaySequence]) -> Result<Metrics, TrainError> {
        if sequences.is_empty() {
            return Err(TrainError::EmptyEvalSet);
        }
        let mut total = 0.0;
        let mut n = 0usize;
        for s in sequences {
            for t in 0..s.t_steps() {
                for k in 0..s.players() {
                    total += self.nll(s.player_label(t, k));
                    n += 1;
                }
            }
        }
        Ok(Metrics::from_totals(total, n, sequences.len()))
    }

    pub fn evaluate_ball(&self, sequences: &[PlaySequence]) -> Result<Metrics, TrainError> {
        if sequences.is_empty() {
            return Err(TrainError::EmptyEvalSet);
        }
        let mut total = 0.0;
        let mut n = 0usize;
        for s in sequences {
            for t in 0..s.t_steps() {
                if let Some(l) = s.ball_label(t) {
                    total += self.nll(l);
                    n += 1;
                }
            }
        }
        Ok(Metrics::from_totals(total, n, sequences.len()))
    }
}
