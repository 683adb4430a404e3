//! Ablation protocols and the training-speed benchmark.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{evaluate, train_with, Metrics, SequenceModel, TrainConfig, TrainError};
use crate::data::{
    sample_training_sequence, GameRecord, PlaySequence, SequenceConfig,
};
use crate::model::{GraphRecurrentModel, ModelConfig, MultiEntityTransformer, Task};
use crate::nn::{Real, Tape};

#[derive(Debug, Clone)]
pub struct AblationArm {
    pub name: &'static str,
    pub task: &'static str,
    pub nll: f64,
    pub pp: f64,
}

/// The ablation report in its external CSV form.
pub fn ablation_report_csv(arms: &[AblationArm]) -> String {
    let mut out = String::from("arm,task,nll,pp\n");
    for a in arms {
        out.push_str(&format!("{},{},{},{}\n", a.name, a.task, a.nll, a.pp));
    }
    out
}

/// Expand each sequence into all of its single-player views so one-player
/// arms score the same (sequence, step, player) triples as full arms.
fn expand_single_player(sequences: &[PlaySequence]) -> Vec<PlaySequence> {
    sequences
        .iter()
        .flat_map(|s| (0..s.players()).map(move |k| s.single_player_view(k)))
        .collect()
}

/// Train and evaluate the input/identity ablation arms on a common split
/// and a common evaluation set:
///
/// * `1-NI`  one player in the input, generic identity;
/// * `10-NI` all players (and ball), generic identity;
/// * `10-I`  all players (and ball), per-agent identity;
///
/// plus, when `include_ball_arms` is set, the ball-task pair `10-NI` /
/// `10-I`. Every arm shares `train_cfg.seed`.
pub fn run_ablations(
    train_games: &[GameRecord],
    val_sequences: &[PlaySequence],
    test_sequences: &[PlaySequence],
    base: &ModelConfig,
    seq_cfg: &SequenceConfig,
    train_cfg: &TrainConfig,
    include_ball_arms: bool,
) -> Result<Vec<AblationArm>, TrainError> {
    let mut arms = Vec::new();

    let single_val = expand_single_player(val_sequences);
    let single_test = expand_single_player(test_sequences);

    // 1-NI: each training sample restricts to one uniformly drawn player
    {
        let cfg = ModelConfig { task: Task::Players, identity: false, ..base.clone() };
        let model = new_transformer::<f32>(&cfg, train_cfg.seed);
        train_with(&model, train_games, &single_val, seq_cfg, train_cfg, |seq, rng| {
            let k = rng.gen_range(0..seq.players());
            seq.single_player_view(k)
        })?;
        let m = evaluate(&model, &single_test)?;
        arms.push(AblationArm { name: "1-NI", task: "players", nll: m.mean_nll, pp: m.perplexity });
    }

    for (name, identity) in [("10-NI", false), ("10-I", true)] {
        let cfg = ModelConfig { task: Task::Players, identity, ..base.clone() };
        let model = new_transformer::<f32>(&cfg, train_cfg.seed);
        super::train(&model, train_games, val_sequences, seq_cfg, train_cfg)?;
        let m = evaluate(&model, test_sequences)?;
        arms.push(AblationArm { name, task: "players", nll: m.mean_nll, pp: m.perplexity });
    }

    if include_ball_arms {
        for (name, identity) in [("10-NI", false), ("10-I", true)] {
            let cfg = ModelConfig { task: Task::Ball, identity, ..base.clone() };
            let model = new_transformer::<f32>(&cfg, train_cfg.seed);
            super::train(&model, train_games, val_sequences, seq_cfg, train_cfg)?;
            let m = evaluate(&model, test_sequences)?;
            arms.push(AblationArm { name, task: "ball", nll: m.mean_nll, pp: m.perplexity });
        }
    }

    Ok(arms)
}

fn new_transformer<F: Real>(cfg: &ModelConfig, seed: u64) -> MultiEntityTransformer<F> {
    MultiEntityTransformer::new(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f64).clone())
        .expect("valid ablation config")
}

/// Replace each sequence's players with distinct agents drawn uniformly
/// from the league; positions and labels are untouched.
pub fn swap_player_identities(
    sequences: &[PlaySequence],
    league_size: usize,
    rng: &mut impl Rng,
) -> Vec<PlaySequence> {
    sequences
        .iter()
        .map(|s| {
            let mut pool: Vec<u32> = (0..league_size as u32).collect();
            for i in (1..pool.len()).rev() {
                pool.swap(i, rng.gen_range(0..=i));
            }
            s.with_agent_ids(pool[..s.players()].to_vec())
        })
        .collect()
}

/// Re-evaluate under [`swap_player_identities`].
pub fn random_player_swap_eval<F: Real>(
    model: &impl SequenceModel<F>,
    sequences: &[PlaySequence],
    league_size: usize,
    rng: &mut impl Rng,
) -> Result<Metrics, TrainError> {
    evaluate(model, &swap_player_identities(sequences, league_size, rng))
}

/// Score only the first-step predictions: the same model applied to the
/// one-step truncation of every sequence.
pub fn single_frame_eval<F: Real>(
    model: &impl SequenceModel<F>,
    sequences: &[PlaySequence],
) -> Result<Metrics, TrainError> {
    let firsts: Vec<PlaySequence> = sequences.iter().map(|s| s.truncated(1)).collect();
    evaluate(model, &firsts)
}

#[derive(Debug, Clone, Copy)]
pub struct SpeedReport {
    pub transformer_spe: f64,
    pub grnn_spe: f64,
    pub epochs: usize,
    pub samples_per_epoch: usize,
}

/// Wall-clock seconds per training epoch for the transformer and the
/// parameter-matched graph-recurrent baseline, on identical data and
/// batch size.
pub fn speed_benchmark(
    transformer: &MultiEntityTransformer<f32>,
    grnn: &GraphRecurrentModel<f32>,
    games: &[GameRecord],
    seq_cfg: &SequenceConfig,
    samples_per_epoch: usize,
    epochs: usize,
    seed: u64,
) -> Result<SpeedReport, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sequences: Vec<PlaySequence> = (0..samples_per_epoch * epochs)
        .map(|_| sample_training_sequence(games, seq_cfg, &mut rng))
        .collect::<Result<_, _>>()?;

    let transformer_spe = time_epochs(transformer, &sequences, epochs)?;
    let grnn_spe = time_epochs(grnn, &sequences, epochs)?;
    Ok(SpeedReport { transformer_spe, grnn_spe, epochs, samples_per_epoch })
}

fn time_epochs<F: Real>(
    model: &impl SequenceModel<F>,
    sequences: &[PlaySequence],
    epochs: usize,
) -> Result<f64, TrainError> {
    let mut opt = crate::nn::Adam::new(model.parameters(), 1e-4);
    let start = Instant::now();
    for seq in sequences {
        opt.zero_grad();
        let tape = Tape::new();
        let loss = model.loss(&tape, seq)?;
        tape.backward(loss).map_err(crate::model::ModelError::from)?;
        opt.step();
    }
    Ok(start.elapsed().as_secs_f64() / epochs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_eval_set, generate_synthetic_league, SyntheticLeagueConfig};

    fn fixture() -> (Vec<GameRecord>, Vec<PlaySequence>, SequenceConfig) {
        let league = SyntheticLeagueConfig {
            league_size: 12,
            games: 2,
            frames_per_game: 700,
            seed: 91,
            ..SyntheticLeagueConfig::default()
        };
        let games = generate_synthetic_league(&league).unwrap();
        let cfg = SequenceConfig::default();
        let (seqs, _) = build_eval_set(&games, 6, &cfg);
        (games, seqs, cfg)
    }

    #[test]
    fn swap_is_a_noop_for_identity_ablated_models() {
        let (_, seqs, _) = fixture();
        let cfg = ModelConfig { identity: false, ..ModelConfig::tiny(Task::Players) };
        let model = new_transformer::<f32>(&cfg, 7);
        let base = evaluate(&model, &seqs).unwrap();
        let swapped =
            random_player_swap_eval(&model, &seqs, 12, &mut ChaCha8Rng::seed_from_u64(3))
                .unwrap();
        assert_eq!(base, swapped);
    }

    #[test]
    fn swap_moves_metrics_for_identity_models() {
        let (_, seqs, _) = fixture();
        let cfg = ModelConfig::tiny(Task::Players);
        let model = new_transformer::<f32>(&cfg, 7);
        let base = evaluate(&model, &seqs).unwrap();
        let swapped =
            random_player_swap_eval(&model, &seqs, 12, &mut ChaCha8Rng::seed_from_u64(3))
                .unwrap();
        assert_ne!(base.mean_nll, swapped.mean_nll);
    }

    #[test]
    fn single_frame_equals_full_for_a_uniform_model() {
        let (_, seqs, _) = fixture();
        let model = new_transformer::<f64>(&ModelConfig::tiny(Task::Players), 7);
        let params = model.parameters();
        let n = params.len();
        params[n - 2].set_value(ndarray::Array2::zeros(params[n - 2].shape()));
        params[n - 1].set_value(ndarray::Array2::zeros(params[n - 1].shape()));
        let full = evaluate(&model, &seqs).unwrap();
        let single = single_frame_eval(&model, &seqs).unwrap();
        assert!((full.perplexity - 121.0).abs() < 1e-9);
        assert!((single.perplexity - 121.0).abs() < 1e-9);
        assert_eq!(single.predictions, seqs.len() * 10);
    }

    #[test]
    fn expansion_matches_prediction_counts() {
        let (_, seqs, _) = fixture();
        let expanded = expand_single_player(&seqs);
        assert_eq!(expanded.len(), seqs.len() * 10);
        let total: usize = expanded.iter().map(|s| s.t_steps() * s.players()).sum();
        let full: usize = seqs.iter().map(|s| s.t_steps() * s.players()).sum();
        assert_eq!(total, full);
    }

    #[test]
    fn report_csv_shape() {
        let arms = vec![AblationArm { name: "10-I", task: "players", nll: 0.5, pp: 1.65 }];
        let csv = ablation_report_csv(&arms);
        assert_eq!(csv, "arm,task,nll,pp\n10-I,players,0.5,1.65\n");
    }
}
