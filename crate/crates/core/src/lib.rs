//! Core library for `courtformer`: a multi-entity transformer that attends
//! over unordered sets of agents across time, trained to classify binned
//! trajectory displacements on basketball-style tracking data.
//!
//! The crate is organized around six subsystems:
//!
//! * [`nn`] — a minimal reverse-mode autodiff engine (tape over 2-D arrays)
//!   with the layers and the Adam optimizer the models need, plus
//!   finite-difference gradient checking.
//! * [`mask`] — the causal entity-attention mask in tensor and matrix form.
//! * [`bins`] — displacement-space discretizers (2-D player grid, 3-D ball
//!   grid) mapping continuous displacements to integer class labels.
//! * [`data`] — tracking-file ingestion, sequence sampling / augmentation /
//!   evaluation-set construction, and a seeded synthetic league generator.
//! * [`model`] — the multi-entity transformer, the graph-recurrent baseline,
//!   and versioned binary checkpoints.
//! * [`harness`] — training loop, metrics (NLL / perplexity per bin),
//!   baselines, ablations, and the speed benchmark.

pub mod bins;
pub mod data;
pub mod harness;
pub mod mask;
pub mod model;
pub mod nn;

pub use bins::{BinGrid2D, BinGrid3D};
pub use data::{GameRecord, PlaySequence, SequenceConfig, SyntheticLeagueConfig};
pub use harness::{Metrics, TrainConfig};
pub use mask::EntityMask;
pub use model::{GraphRecurrentModel, ModelConfig, MultiEntityTransformer, Task};
pub use nn::{Parameter, Tape, TensorId};
