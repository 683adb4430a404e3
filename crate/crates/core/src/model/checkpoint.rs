//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "CRTFCKPT"
//! version  u32      currently 1
//! kind     u8       0 transformer, 1 graph-recurrent
//! config   fixed-order fields (see write_config)
//! count    u64      total scalar parameters
//! values   count x f32, parameters in declaration order, row-major
//! ```
//!
//! The loader rejects wrong magic, unsupported versions, invalid configs,
//! count mismatches, and trailing bytes.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{GraphRecurrentModel, ModelConfig, ModelError, MultiEntityTransformer, Task};
use crate::bins::{BinGrid2D, BinGrid3D};
use crate::nn::Parameter;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CRTFCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Transformer,
    GraphRecurrent,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown model kind tag {0}")]
    UnknownKind(u8),
    #[error("checkpoint config invalid: {0}")]
    BadConfig(String),
    #[error("parameter count mismatch: header says {header}, config implies {expected}")]
    CountMismatch { header: u64, expected: u64 },
    #[error("checkpoint has trailing bytes after the parameter block")]
    TrailingBytes,
    #[error("checkpoint holds a {found:?} model, expected {expected:?}")]
    WrongKind { expected: ModelKind, found: ModelKind },
}

fn write_u32(out: &mut impl Write, v: u32) -> std::io::Result<()> {
    out.write_all(&v.to_le_bytes())
}

fn write_f64(out: &mut impl Write, v: f64) -> std::io::Result<()> {
    out.write_all(&v.to_le_bytes())
}

fn read_u32(input: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(input: &mut impl Read) -> Result<u64, CheckpointError> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64(input: &mut impl Read) -> Result<f64, CheckpointError> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_u8(input: &mut impl Read) -> Result<u8, CheckpointError> {
    let mut buf = [0u8; 1];
    input.read_exact(&mut buf)?;
    Ok(buf[0])
}

fn write_config(out: &mut impl Write, c: &ModelConfig) -> std::io::Result<()> {
    for v in [
        c.d_model,
        c.heads,
        c.d_ff,
        c.layers,
        c.embedding_dim,
        c.player_mlp[0],
        c.player_mlp[1],
        c.player_mlp[2],
        c.ball_mlp[0],
        c.ball_mlp[1],
        c.ball_mlp[2],
    ] {
        write_u32(out, v as u32)?;
    }
    write_u32(out, c.player_grid.side() as u32)?;
    write_f64(out, c.player_grid.extent())?;
    write_u32(out, c.ball_grid.side() as u32)?;
    write_f64(out, c.ball_grid.extent())?;
    write_u32(out, c.league_size as u32)?;
    out.write_all(&[match c.task {
        Task::Players => 0u8,
        Task::Ball => 1,
        Task::Both => 2,
    }])?;
    out.write_all(&[u8::from(c.identity)])?;
    write_u32(out, c.grnn_d_ff as u32)
}

fn read_config(input: &mut impl Read) -> Result<ModelConfig, CheckpointError> {
    let mut ints = [0u32; 11];
    for v in ints.iter_mut() {
        *v = read_u32(input)?;
    }
    let pg_n = read_u32(input)? as usize;
    let pg_extent = read_f64(input)?;
    let bg_n = read_u32(input)? as usize;
    let bg_extent = read_f64(input)?;
    let league_size = read_u32(input)? as usize;
    let task = match read_u8(input)? {
        0 => Task::Players,
        1 => Task::Ball,
        2 => Task::Both,
        other => return Err(CheckpointError::BadConfig(format!("bad task tag {other}"))),
    };
    let identity = match read_u8(input)? {
        0 => false,
        1 => true,
        other => return Err(CheckpointError::BadConfig(format!("bad identity flag {other}"))),
    };
    let grnn_d_ff = read_u32(input)? as usize;

    let player_grid = BinGrid2D::new(pg_n, pg_extent)
        .map_err(|e| CheckpointError::BadConfig(e.to_string()))?;
    let ball_grid = BinGrid3D::new(bg_n, bg_extent)
        .map_err(|e| CheckpointError::BadConfig(e.to_string()))?;
    let config = ModelConfig {
        d_model: ints[0] as usize,
        heads: ints[1] as usize,
        d_ff: ints[2] as usize,
        layers: ints[3] as usize,
        embedding_dim: ints[4] as usize,
        player_mlp: [ints[5] as usize, ints[6] as usize, ints[7] as usize],
        ball_mlp: [ints[8] as usize, ints[9] as usize, ints[10] as usize],
        player_grid,
        ball_grid,
        league_size,
        task,
        identity,
        grnn_d_ff,
    };
    config.validate().map_err(|e| CheckpointError::BadConfig(e.to_string()))?;
    Ok(config)
}

fn write_checkpoint(
    out: &mut impl Write,
    kind: ModelKind,
    config: &ModelConfig,
    params: &[Parameter<f32>],
) -> Result<(), CheckpointError> {
    out.write_all(CHECKPOINT_MAGIC)?;
    write_u32(out, CHECKPOINT_VERSION)?;
    out.write_all(&[match kind {
        ModelKind::Transformer => 0u8,
        ModelKind::GraphRecurrent => 1,
    }])?;
    write_config(out, config)?;
    let count: u64 = params.iter().map(|p| p.len() as u64).sum();
    out.write_all(&count.to_le_bytes())?;
    for p in params {
        for &v in p.value().iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Header plus the flat parameter block of a checkpoint file.
#[derive(Debug)]
pub struct LoadedCheckpoint {
    pub kind: ModelKind,
    pub config: ModelConfig,
    pub values: Vec<f32>,
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint, CheckpointError> {
    load_checkpoint_bytes(&std::fs::read(path)?)
}

pub fn load_checkpoint_bytes(bytes: &[u8]) -> Result<LoadedCheckpoint, CheckpointError> {
    let mut input: &[u8] = bytes;

    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|_| CheckpointError::BadMagic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut input)?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let kind = match read_u8(&mut input)? {
        0 => ModelKind::Transformer,
        1 => ModelKind::GraphRecurrent,
        other => return Err(CheckpointError::UnknownKind(other)),
    };
    let config = read_config(&mut input)?;
    let expected = match kind {
        ModelKind::Transformer => config.transformer_param_count() as u64,
        ModelKind::GraphRecurrent => config.grnn_param_count() as u64,
    };
    let header = read_u64(&mut input)?;
    if header != expected {
        return Err(CheckpointError::CountMismatch { header, expected });
    }
    let mut values = vec![0f32; header as usize];
    for v in values.iter_mut() {
        let mut buf = [0u8; 4];
        input.read_exact(&mut buf)?;
        *v = f32::from_le_bytes(buf);
    }
    if !input.is_empty() {
        return Err(CheckpointError::TrailingBytes);
    }
    Ok(LoadedCheckpoint { kind, config, values })
}

fn assign_values(params: &[Parameter<f32>], values: &[f32]) {
    let mut at = 0;
    for p in params {
        let (rows, cols) = p.shape();
        let take = &values[at..at + rows * cols];
        p.set_value(Array2::from_shape_vec((rows, cols), take.to_vec()).expect("shape matches"));
        at += rows * cols;
    }
    debug_assert_eq!(at, values.len());
}

pub fn save_transformer_bytes(
    model: &MultiEntityTransformer<f32>,
) -> Result<Vec<u8>, CheckpointError> {
    let mut out = Vec::new();
    write_checkpoint(&mut out, ModelKind::Transformer, model.config(), &model.parameters())?;
    Ok(out)
}

pub fn save_transformer(
    model: &MultiEntityTransformer<f32>,
    path: &Path,
) -> Result<(), CheckpointError> {
    std::fs::write(path, save_transformer_bytes(model)?)?;
    Ok(())
}

pub fn save_grnn(model: &GraphRecurrentModel<f32>, path: &Path) -> Result<(), CheckpointError> {
    let mut out = std::fs::File::create(path)?;
    write_checkpoint(&mut out, ModelKind::GraphRecurrent, model.config(), &model.parameters())
}

pub fn load_transformer_bytes(
    bytes: &[u8],
) -> Result<MultiEntityTransformer<f32>, CheckpointError> {
    let loaded = load_checkpoint_bytes(bytes)?;
    if loaded.kind != ModelKind::Transformer {
        return Err(CheckpointError::WrongKind {
            expected: ModelKind::Transformer,
            found: loaded.kind,
        });
    }
    // initializer values are immediately overwritten
    let model = MultiEntityTransformer::new(loaded.config, &mut ChaCha8Rng::seed_from_u64(0))
        .map_err(|e: ModelError| CheckpointError::BadConfig(e.to_string()))?;
    assign_values(&model.parameters(), &loaded.values);
    Ok(model)
}

pub fn load_transformer(path: &Path) -> Result<MultiEntityTransformer<f32>, CheckpointError> {
    load_transformer_bytes(&std::fs::read(path)?)
}

pub fn load_grnn(path: &Path) -> Result<GraphRecurrentModel<f32>, CheckpointError> {
    let loaded = load_checkpoint(path)?;
    if loaded.kind != ModelKind::GraphRecurrent {
        return Err(CheckpointError::WrongKind {
            expected: ModelKind::GraphRecurrent,
            found: loaded.kind,
        });
    }
    let model = GraphRecurrentModel::new(loaded.config, &mut ChaCha8Rng::seed_from_u64(0))
        .map_err(|e: ModelError| CheckpointError::BadConfig(e.to_string()))?;
    assign_values(&model.parameters(), &loaded.values);
    Ok(model)
}
