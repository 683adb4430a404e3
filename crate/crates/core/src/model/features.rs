//! Shared featurizer: identity embeddings plus per-entity feature MLPs,
//! producing the `[T*K, d_model]` token matrix in `t*K + k` order.

use std::rc::Rc;

use ndarray::Array2;
use rand::Rng;

use super::{ModelConfig, ModelError};
use crate::data::PlaySequence;
use crate::nn::{init_normal_scaled, real, Mlp, Parameter, Real, Tape, TensorId};

pub(crate) struct EmbeddingTable<F: Real> {
    /// `[league_size, dim]`, or `[1, dim]` when identity is ablated.
    pub players: Parameter<F>,
    pub ball: Parameter<F>,
    identity: bool,
    league_size: usize,
}

impl<F: Real> EmbeddingTable<F> {
    pub fn new(league_size: usize, dim: usize, identity: bool, rng: &mut impl Rng) -> Self {
        let scale = 1.0 / (dim as f64).sqrt();
        let rows = if identity { league_size } else { 1 };
        Self {
            players: Parameter::new("embeddings.players", init_normal_scaled(rows, dim, scale, rng)),
            ball: Parameter::new("embeddings.ball", init_normal_scaled(1, dim, scale, rng)),
            identity,
            league_size,
        }
    }

    pub fn player_row(&self, agent_id: u32) -> Result<usize, ModelError> {
        if (agent_id as usize) >= self.league_size {
            return Err(ModelError::UnknownAgent(agent_id, self.league_size));
        }
        Ok(if self.identity { agent_id as usize } else { 0 })
    }

    pub fn parameters(&self) -> Vec<Parameter<F>> {
        vec![self.players.clone(), self.ball.clone()]
    }
}

pub(crate) struct Featurizer<F: Real> {
    pub embeddings: EmbeddingTable<F>,
    pub player_mlp: Mlp<F>,
    pub ball_mlp: Mlp<F>,
}

impl<F: Real> Featurizer<F> {
    pub fn new(config: &ModelConfig, rng: &mut impl Rng) -> Self {
        let e = config.embedding_dim;
        let p = &config.player_mlp;
        let b = &config.ball_mlp;
        Self {
            embeddings: EmbeddingTable::new(config.league_size, e, config.identity, rng),
            player_mlp: Mlp::new("player_mlp", &[e + 3, p[0], p[1], p[2]], rng),
            ball_mlp: Mlp::new("ball_mlp", &[e + 3, b[0], b[1], b[2]], rng),
        }
    }

    /// Token matrix `[T*K, d_model]` with players at `t*K + k` (slot order)
    /// and the ball, when present, at `t*K + players`.
    ///
    /// Player inputs are `[embedding, x, y, frontcourt]`; ball inputs are
    /// `[embedding, x, y, height]`. No positional encoding anywhere: order
    /// information enters only through the causal mask.
    pub fn tokens(&self, tape: &Tape<F>, seq: &PlaySequence) -> Result<TensorId, ModelError> {
        let t_steps = seq.t_steps();
        let players = seq.players();

        let mut emb_rows = Vec::with_capacity(t_steps * players);
        let mut feats = Array2::zeros((t_steps * players, 3));
        for t in 0..t_steps {
            for k in 0..players {
                let row = t * players + k;
                emb_rows.push(self.embeddings.player_row(seq.agent_ids[k])?);
                let (x, y) = seq.player_pos(t, k);
                feats[(row, 0)] = real(x);
                feats[(row, 1)] = real(y);
                feats[(row, 2)] = if seq.frontcourt(t, k) { F::one() } else { F::zero() };
            }
        }
        let emb = tape.gather_rows(tape.param(&self.embeddings.players), Rc::new(emb_rows))?;
        let pin = tape.concat_cols(&[emb, tape.leaf(feats)])?;
        let ptok = self.player_mlp.forward(tape, pin)?;

        if !seq.has_ball() {
            return Ok(ptok);
        }

        let mut bfeats = Array2::zeros((t_steps, 3));
        for t in 0..t_steps {
            let (x, y, z) = seq.ball_pos(t).expect("ball present");
            bfeats[(t, 0)] = real(x);
            bfeats[(t, 1)] = real(y);
            bfeats[(t, 2)] = real(z);
        }
        let bemb = tape.gather_rows(tape.param(&self.embeddings.ball), Rc::new(vec![0; t_steps]))?;
        let bin = tape.concat_cols(&[bemb, tape.leaf(bfeats)])?;
        let btok = self.ball_mlp.forward(tape, bin)?;

        // interleave to t*K + k order, ball in the last slot of each step
        let k_total = players + 1;
        let mut perm = Vec::with_capacity(t_steps * k_total);
        for t in 0..t_steps {
            for k in 0..players {
                perm.push(t * players + k);
            }
            perm.push(t_steps * players + t);
        }
        let combined = tape.concat_rows(&[ptok, btok])?;
        Ok(tape.gather_rows(combined, Rc::new(perm))?)
    }

    pub fn parameters(&self) -> Vec<Parameter<F>> {
        let mut out = self.embeddings.parameters();
        out.extend(self.player_mlp.parameters());
        out.extend(self.ball_mlp.parameters());
        out
    }
}
