//! Training, evaluation, baselines, ablations, and the speed benchmark.

mod ablation;
mod baseline;
mod metrics;
mod train;

pub use ablation::{
    ablation_report_csv, random_player_swap_eval, run_ablations, single_frame_eval,
    speed_benchmark, swap_player_identities, AblationArm, SpeedReport,
};
pub use baseline::MarginalBaseline;
pub use metrics::{evaluate, Metrics, SequenceModel};
pub use train::{
    best_is_curve_minimum, epoch_log_csv, train, train_with, EpochLog, PlateauScheduler,
    TrainConfig, TrainOutcome,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error("non-finite loss at epoch {epoch}, step {step}, sequence {game_id}@{start_frame}")]
    NonFiniteLoss { epoch: usize, step: usize, game_id: String, start_frame: usize },
    #[error("evaluation requires at least one sequence")]
    EmptyEvalSet,
}
