//! Training loop: on-the-fly sequence sampling, Adam, plateau learning
//! rate schedule, validation-based early stopping.

use std::time::Instant;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{evaluate, Metrics, SequenceModel, TrainError};
use crate::data::{sample_training_sequence, GameRecord, PlaySequence, SequenceConfig};
use crate::nn::{Adam, Real, Tape};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub samples_per_epoch: usize,
    pub epochs: usize,
    /// Optional wall-clock budget; checked between epochs.
    pub max_seconds: Option<f64>,
    pub lr: f64,
    pub reduced_lr: f64,
    /// Consecutive non-improving validation epochs before the single
    /// learning-rate drop.
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            samples_per_epoch: 20_000,
            epochs: 650,
            max_seconds: None,
            lr: 1e-6,
            reduced_lr: 1e-7,
            patience: 20,
            batch_size: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Minutes-scale schedule for the synthetic league.
    pub fn desk() -> Self {
        Self {
            samples_per_epoch: 1000,
            epochs: 8,
            max_seconds: None,
            lr: 1e-3,
            reduced_lr: 1e-4,
            patience: 20,
            batch_size: 1,
            seed: 0,
        }
    }
}

/// Drops the learning rate once, after `patience` consecutive epochs of
/// the validation loss not improving on the best seen so far.
#[derive(Debug)]
pub struct PlateauScheduler {
    initial: f64,
    reduced: f64,
    patience: usize,
    best: f64,
    streak: usize,
    dropped: bool,
}

impl PlateauScheduler {
    pub fn new(initial: f64, reduced: f64, patience: usize) -> Self {
        Self { initial, reduced, patience, best: f64::INFINITY, streak: 0, dropped: false }
    }

    /// Record one epoch's validation loss; returns the learning rate the
    /// next epoch should use.
    pub fn observe(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best {
            self.best = val_loss;
            self.streak = 0;
        } else {
            self.streak += 1;
            if self.streak >= self.patience {
                self.dropped = true;
            }
        }
        self.lr()
    }

    pub fn lr(&self) -> f64 {
        if self.dropped {
            self.reduced
        } else {
            self.initial
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_nll: f64,
    pub val_pp: f64,
    pub lr: f64,
    pub seconds: f64,
}

/// The metrics log in its external CSV form.
pub fn epoch_log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,train_nll,val_nll,val_pp,lr,seconds\n");
    for e in log {
        out.push_str(&format!(
            "{},{},{},{},{},{:.3}\n",
            e.epoch, e.train_nll, e.val_nll, e.val_pp, e.lr, e.seconds
        ));
    }
    out
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val: Metrics,
}

/// Train with on-the-fly sampling. Deterministic under `config.seed` for a
/// fixed model initialization. The model is left holding the parameters of
/// its best validation epoch.
pub fn train<F: Real, M: SequenceModel<F>>(
    model: &M,
    train_games: &[GameRecord],
    val_sequences: &[PlaySequence],
    seq_cfg: &SequenceConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    train_with(model, train_games, val_sequences, seq_cfg, config, |seq, _| seq)
}

/// [`train`] with a per-sample transform hook (ablation arms use it to
/// restrict inputs, e.g. to one random player per sample).
pub fn train_with<F: Real, M: SequenceModel<F>>(
    model: &M,
    train_games: &[GameRecord],
    val_sequences: &[PlaySequence],
    seq_cfg: &SequenceConfig,
    config: &TrainConfig,
    transform: impl Fn(PlaySequence, &mut ChaCha8Rng) -> PlaySequence,
) -> Result<TrainOutcome, TrainError> {
    let params = model.parameters();
    let mut opt = Adam::new(params.clone(), config.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut scheduler = PlateauScheduler::new(config.lr, config.reduced_lr, config.patience);

    let started = Instant::now();
    let mut log = Vec::new();
    let mut best_epoch = 0;
    let mut best_val: Option<Metrics> = None;
    let mut best_params: Vec<Array2<F>> = params.iter().map(|p| p.value()).collect();

    for epoch in 1..=config.epochs {
        let epoch_started = Instant::now();
        let mut epoch_nll = 0.0f64;
        let mut epoch_predictions = 0usize;
        let steps = config.samples_per_epoch.div_ceil(config.batch_size);
        for step in 0..steps {
            opt.zero_grad();
            let tape = Tape::new();
            let mut batch_loss = None;
            let mut first_id = (String::new(), 0usize);
            for _ in 0..config.batch_size {
                let seq = transform(
                    sample_training_sequence(train_games, seq_cfg, &mut rng)?,
                    &mut rng,
                );
                if first_id.0.is_empty() {
                    first_id = (seq.game_id.clone(), seq.start_frame);
                }
                let loss = model.loss(&tape, &seq)?;
                let value = tape.scalar(loss).to_f64().unwrap();
                if !value.is_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        epoch,
                        step,
                        game_id: seq.game_id.clone(),
                        start_frame: seq.start_frame,
                    });
                }
                epoch_nll += value;
                epoch_predictions += model.predictions(&seq);
                batch_loss = Some(match batch_loss {
                    None => loss,
                    Some(total) => tape.add(total, loss).map_err(crate::model::ModelError::from)?,
                });
            }
            let total = batch_loss.expect("batch_size >= 1");
            let scaled =
                tape.scale(total, crate::nn::real::<F>(1.0 / config.batch_size as f64));
            tape.backward(scaled).map_err(crate::model::ModelError::from)?;
            opt.step();
        }

        let val = evaluate(model, val_sequences)?;
        let lr_used = opt.lr();
        let next_lr = scheduler.observe(val.mean_nll);
        opt.set_lr(next_lr);

        log.push(EpochLog {
            epoch,
            train_nll: epoch_nll / epoch_predictions.max(1) as f64,
            val_nll: val.mean_nll,
            val_pp: val.perplexity,
            lr: lr_used,
            seconds: epoch_started.elapsed().as_secs_f64(),
        });

        if best_val.is_none_or(|b| val.mean_nll < b.mean_nll) {
            best_val = Some(val);
            best_epoch = epoch;
            for (snap, p) in best_params.iter_mut().zip(params.iter()) {
                *snap = p.value();
            }
        }

        if let Some(budget) = config.max_seconds {
            if started.elapsed().as_secs_f64() > budget {
                break;
            }
        }
    }

    // early stopping: restore the best-validation parameters
    for (snap, p) in best_params.iter().zip(params.iter()) {
        p.set_value(snap.clone());
    }
    Ok(TrainOutcome { log, best_epoch, best_val: best_val.expect("at least one epoch") })
}

/// True when `outcome.best_val` is the minimum of the logged curve.
pub fn best_is_curve_minimum(outcome: &TrainOutcome) -> bool {
    outcome
        .log
        .iter()
        .map(|e| e.val_nll)
        .fold(f64::INFINITY, f64::min)
        == outcome.best_val.mean_nll
}
