//! Multi-entity self-attention masks.
//!
//! A sequence of `T` time steps with `K` entities per step flattens to
//! `T*K` tokens, token `(t, k)` at flat index `t*K + k`. The mask is the
//! matrix form of the four-index tensor rule "token `(t1, k1)` may look at
//! token `(t2, k2)`"; the causal default allows exactly the entries with
//! `t2 <= t1`, i.e. all entities at the same or earlier steps, self and
//! contemporaries included.

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MaskError {
    #[error("mask dimensions must be positive, got T={t}, K={k}")]
    ZeroDimension { t: usize, k: usize },
    #[error("token index (t={t}, k={k}) out of range for T={t_max}, K={k_max}")]
    IndexOutOfRange { t: usize, k: usize, t_max: usize, k_max: usize },
}

/// Flat token index of entity `k` at step `t` with `K` entities per step.
pub fn index_of(t: usize, k: usize, entities: usize) -> usize {
    t * entities + k
}

/// Boolean attention mask over `T*K` tokens; `allowed[(i, j)]` means token
/// `i` may attend to token `j`. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityMask {
    time_steps: usize,
    entities: usize,
    allowed: Array2<bool>,
}

impl EntityMask {
    /// Causal mask: deny exactly the entries with `t2 > t1`.
    pub fn causal(time_steps: usize, entities: usize) -> Result<Self, MaskError> {
        Self::custom(time_steps, entities, |_, _, _, _| true)
    }

    /// Causal skeleton intersected with `adjacency(t1, k1, t2, k2)`.
    ///
    /// The predicate is consulted only for non-future entries; anything it
    /// would allow at `t2 > t1` is ignored, so causality cannot be
    /// overridden. Self-visibility is forced: `(t, k)` can always see
    /// itself, keeping every row non-empty.
    pub fn custom<P>(time_steps: usize, entities: usize, adjacency: P) -> Result<Self, MaskError>
    where
        P: Fn(usize, usize, usize, usize) -> bool,
    {
        if time_steps == 0 || entities == 0 {
            return Err(MaskError::ZeroDimension { t: time_steps, k: entities });
        }
        let side = time_steps * entities;
        let mut allowed = Array2::from_elem((side, side), false);
        for t1 in 0..time_steps {
            for k1 in 0..entities {
                let i = index_of(t1, k1, entities);
                for t2 in 0..=t1 {
                    for k2 in 0..entities {
                        let j = index_of(t2, k2, entities);
                        let same = t1 == t2 && k1 == k2;
                        allowed[(i, j)] = same || adjacency(t1, k1, t2, k2);
                    }
                }
            }
        }
        Ok(Self { time_steps, entities, allowed })
    }

    pub fn time_steps(&self) -> usize {
        self.time_steps
    }

    pub fn entities(&self) -> usize {
        self.entities
    }

    /// Side of the matrix form, `T*K`.
    pub fn side(&self) -> usize {
        self.time_steps * self.entities
    }

    pub fn matrix(&self) -> &Array2<bool> {
        &self.allowed
    }

    pub fn is_allowed(&self, i: usize, j: usize) -> bool {
        self.allowed[(i, j)]
    }

    /// Range-checked flat index of `(t, k)` within this mask.
    pub fn flat_index(&self, t: usize, k: usize) -> Result<usize, MaskError> {
        if t >= self.time_steps || k >= self.entities {
            return Err(MaskError::IndexOutOfRange {
                t,
                k,
                t_max: self.time_steps,
                k_max: self.entities,
            });
        }
        Ok(index_of(t, k, self.entities))
    }

    /// Debug export: one row per line, `0`/`1` per entry, row-major.
    pub fn to_grid_string(&self) -> String {
        let mut out = String::with_capacity(self.side() * (self.side() + 1));
        for row in self.allowed.rows() {
            for &a in row {
                out.push(if a { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }
}
