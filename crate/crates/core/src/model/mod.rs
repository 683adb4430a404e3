//! Model assembly: the multi-entity transformer, the graph-recurrent
//! baseline, and versioned binary checkpoints.

mod checkpoint;
mod features;
mod grnn;
mod transformer;

pub use checkpoint::{
    load_checkpoint, load_checkpoint_bytes, load_grnn, load_transformer, load_transformer_bytes,
    save_grnn, save_transformer, save_transformer_bytes, CheckpointError, LoadedCheckpoint,
    ModelKind, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use grnn::{GraphRecurrentModel, TffBlock};
pub use transformer::{AttentionCapture, MultiEntityTransformer};

use thiserror::Error;

use crate::bins::{BinGrid2D, BinGrid3D};
use crate::mask::MaskError;
use crate::nn::NnError;

/// Which classification head(s) a model carries and trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Per-player trajectory bins (121-way by default).
    Players,
    /// Ball trajectory bins (6,859-way by default).
    Ball,
    Both,
}

impl Task {
    pub fn wants_players(self) -> bool {
        matches!(self, Task::Players | Task::Both)
    }

    pub fn wants_ball(self) -> bool {
        matches!(self, Task::Ball | Task::Both)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("model with task {task:?} cannot produce {wanted} predictions")]
    TaskMismatch { task: Task, wanted: &'static str },
    #[error("sequence carries no ball track but the operation needs one")]
    MissingBall,
    #[error("unknown agent id {0} for league of size {1}")]
    UnknownAgent(u32, usize),
    #[error("layer {layer} out of range: model has {layers} layers")]
    LayerOutOfRange { layer: usize, layers: usize },
    #[error("head {head} out of range: model has {heads} heads")]
    HeadOutOfRange { head: usize, heads: usize },
    #[error("step {step} out of range: sequence has {t_steps} steps")]
    StepOutOfRange { step: usize, t_steps: usize },
    #[error("invalid model config: {0}")]
    BadConfig(String),
}

/// Architecture hyperparameters shared by both models.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub d_model: usize,
    pub heads: usize,
    pub d_ff: usize,
    pub layers: usize,
    pub embedding_dim: usize,
    /// Widths of the three player feature-MLP layers; last equals `d_model`.
    pub player_mlp: [usize; 3],
    pub ball_mlp: [usize; 3],
    pub player_grid: BinGrid2D,
    pub ball_grid: BinGrid3D,
    /// League size `B`: the number of distinct identity embeddings.
    pub league_size: usize,
    pub task: Task,
    /// `false` replaces all player embeddings with one shared generic
    /// vector (the "no identity" ablation).
    pub identity: bool,
    /// Inner width of the graph-recurrent baseline's TFF blocks.
    pub grnn_d_ff: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.heads == 0 || !self.d_model.is_multiple_of(self.heads) {
            return Err(ModelError::BadConfig(format!(
                "d_model {} not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        if self.player_mlp[2] != self.d_model || self.ball_mlp[2] != self.d_model {
            return Err(ModelError::BadConfig(
                "feature MLP output width must equal d_model".into(),
            ));
        }
        if self.layers == 0 || self.d_ff == 0 || self.embedding_dim == 0 {
            return Err(ModelError::BadConfig("zero-sized architecture field".into()));
        }
        if self.league_size == 0 {
            return Err(ModelError::BadConfig("league_size must be positive".into()));
        }
        Ok(())
    }

    /// Full-scale per-player configuration (121 labels, league of 450).
    pub fn paper_task_p() -> Self {
        Self {
            d_model: 512,
            heads: 8,
            d_ff: 2048,
            layers: 6,
            embedding_dim: 20,
            player_mlp: [128, 256, 512],
            ball_mlp: [128, 256, 512],
            player_grid: BinGrid2D::players_default(),
            ball_grid: BinGrid3D::ball_default(),
            league_size: 450,
            task: Task::Players,
            identity: true,
            grnn_d_ff: 2048,
        }
    }

    /// Full-scale ball configuration (6,859 labels).
    pub fn paper_task_b() -> Self {
        Self { task: Task::Ball, ..Self::paper_task_p() }
    }

    /// Desk-scale configuration: trains in minutes on a laptop core.
    pub fn desk(task: Task) -> Self {
        Self {
            d_model: 64,
            heads: 4,
            d_ff: 128,
            layers: 2,
            embedding_dim: 8,
            player_mlp: [16, 32, 64],
            ball_mlp: [16, 32, 64],
            player_grid: BinGrid2D::players_default(),
            ball_grid: BinGrid3D::ball_default(),
            league_size: 40,
            task,
            identity: true,
            grnn_d_ff: 64,
        }
    }

    /// Smallest config that still exercises every code path; used by
    /// gradient checks and the single-batch overfit test.
    pub fn tiny(task: Task) -> Self {
        Self {
            d_model: 32,
            heads: 4,
            d_ff: 64,
            layers: 2,
            embedding_dim: 4,
            player_mlp: [8, 16, 32],
            ball_mlp: [8, 16, 32],
            player_grid: BinGrid2D::players_default(),
            ball_grid: BinGrid3D::ball_default(),
            league_size: 12,
            task,
            identity: true,
            grnn_d_ff: 32,
        }
    }

    fn mlp_params(&self, widths: &[usize; 3]) -> usize {
        let dims = [self.embedding_dim + 3, widths[0], widths[1], widths[2]];
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn shared_params(&self) -> usize {
        let player_rows = if self.identity { self.league_size } else { 1 };
        (player_rows + 1) * self.embedding_dim
            + self.mlp_params(&self.player_mlp)
            + self.mlp_params(&self.ball_mlp)
    }

    fn head_params(&self) -> usize {
        let mut n = 0;
        if self.task.wants_players() {
            n += self.d_model * self.player_grid.label_count() + self.player_grid.label_count();
        }
        if self.task.wants_ball() {
            n += self.d_model * self.ball_grid.label_count() + self.ball_grid.label_count();
        }
        n
    }

    /// Closed-form trainable parameter count of the transformer.
    pub fn transformer_param_count(&self) -> usize {
        let d = self.d_model;
        let ff = self.d_ff;
        let per_layer = 4 * (d * d + d) + (d * ff + ff) + (ff * d + d) + 2 * (2 * d);
        self.shared_params() + self.layers * per_layer + self.head_params()
    }

    /// Closed-form trainable parameter count of the GRNN baseline
    /// (8 TFF blocks plus the shared featurizer and the player head).
    pub fn grnn_param_count(&self) -> usize {
        let d = self.d_model;
        let g = self.grnn_d_ff;
        let per_tff = (d * g + g) + (g * d + d) + 2 * d;
        let head = self.d_model * self.player_grid.label_count() + self.player_grid.label_count();
        self.shared_params() + 8 * per_tff + head
    }

    /// GRNN configuration whose parameter count matches this transformer's
    /// within a tight margin, by solving for the TFF inner width.
    pub fn paired_grnn(&self) -> Self {
        let d = self.d_model;
        let head = self.d_model * self.player_grid.label_count() + self.player_grid.label_count();
        let budget = self
            .transformer_param_count()
            .saturating_sub(self.shared_params() + head);
        // per-TFF params = (2d+1)g + 3d
        let g = ((budget as f64 / 8.0 - 3.0 * d as f64) / (2.0 * d as f64 + 1.0))
            .round()
            .max(1.0) as usize;
        Self { grnn_d_ff: g, task: Task::Players, ..self.clone() }
    }
}
