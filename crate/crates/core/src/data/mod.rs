//! Tracking data: file ingestion, sequence sampling and augmentation,
//! evaluation-set construction, and the synthetic league generator.

mod format;
mod sequence;
mod synth;

pub use format::{
    format_game, ingest_game, parse_game, write_game, Frame, GameRecord, HoopSide, IngestReport,
    PlayerPos, RosterEntry, Team, COURT_LENGTH, COURT_WIDTH,
};
pub use sequence::{
    build_eval_set, rotate_180, sample_training_sequence, split_games, PlaySequence,
    SequenceConfig, WindowReject,
};
pub use synth::{generate_synthetic_league, SyntheticLeagueConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("no valid training window found after {tries} attempts")]
    NoValidWindow { tries: usize },
    #[error("invalid synthetic league config: {0}")]
    BadConfig(String),
    #[error("game set too small to split into train/val/test: {games} games")]
    TooFewGames { games: usize },
    #[error(transparent)]
    Bin(#[from] crate::bins::BinError),
}
