//! Graph-recurrent baseline: per step, fully connected message passing
//! over the entities (ball included) through a TFF edge function, mean
//! aggregation into a TFF node function, then a gated recurrent update in
//! which each of the six gate transforms is itself a TFF. Strictly
//! sequential in time.

use std::rc::Rc;

use ndarray::{Array2, Array3};
use rand::Rng;

use super::features::Featurizer;
use super::{ModelConfig, ModelError};
use crate::data::PlaySequence;
use crate::nn::{real, LayerNorm, Linear, Parameter, Real, Tape, TensorId};

/// Transformer-like feedforward block:
/// `TFF(x) = LN(x + W2 ReLU(W1 x + b1) + b2)`. Residual form, so input and
/// output widths are equal.
pub struct TffBlock<F: Real> {
    pub inner: Linear<F>,
    pub outer: Linear<F>,
    pub norm: LayerNorm<F>,
}

impl<F: Real> TffBlock<F> {
    pub fn new(name: &str, d_model: usize, d_ff: usize, rng: &mut impl Rng) -> Self {
        Self {
            inner: Linear::new(&format!("{name}.w1"), d_model, d_ff, rng),
            outer: Linear::new(&format!("{name}.w2"), d_ff, d_model, rng),
            norm: LayerNorm::new(&format!("{name}.ln"), d_model),
        }
    }

    pub fn forward(&self, tape: &Tape<F>, x: TensorId) -> Result<TensorId, ModelError> {
        let h = self.outer.forward(tape, tape.relu(self.inner.forward(tape, x)?))?;
        Ok(self.norm.forward(tape, tape.add(x, h)?)?)
    }

    pub fn parameters(&self) -> Vec<Parameter<F>> {
        let mut out = self.inner.parameters();
        out.extend(self.outer.parameters());
        out.extend(self.norm.parameters());
        out
    }
}

pub struct GraphRecurrentModel<F: Real> {
    config: ModelConfig,
    featurizer: Featurizer<F>,
    edge: TffBlock<F>,
    node: TffBlock<F>,
    /// update-o, update-h, reset-o, reset-h, candidate-o, candidate-rh
    gates: Vec<TffBlock<F>>,
    head_players: Linear<F>,
}

impl<F: Real> GraphRecurrentModel<F> {
    pub fn new(config: ModelConfig, rng: &mut impl Rng) -> Result<Self, ModelError> {
        config.validate()?;
        let featurizer = Featurizer::new(&config, rng);
        let d = config.d_model;
        let g = config.grnn_d_ff;
        let edge = TffBlock::new("edge", d, g, rng);
        let node = TffBlock::new("node", d, g, rng);
        let gates = ["gate_zo", "gate_zh", "gate_ro", "gate_rh", "gate_co", "gate_crh"]
            .iter()
            .map(|n| TffBlock::new(n, d, g, rng))
            .collect();
        let head_players =
            Linear::new("head.players", d, config.player_grid.label_count(), rng);
        Ok(Self { config, featurizer, edge, node, gates, head_players })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn parameters(&self) -> Vec<Parameter<F>> {
        let mut out = self.featurizer.parameters();
        out.extend(self.edge.parameters());
        out.extend(self.node.parameters());
        for g in &self.gates {
            out.extend(g.parameters());
        }
        out.extend(self.head_players.parameters());
        out
    }

    pub fn count_parameters(&self) -> usize {
        self.parameters().iter().filter(|p| p.trainable()).map(|p| p.len()).sum()
    }

    /// Player hidden states per step, run strictly sequentially so the
    /// hidden state at `t` only ever sees inputs at steps `<= t`.
    fn encode(&self, tape: &Tape<F>, seq: &PlaySequence) -> Result<TensorId, ModelError> {
        let t_steps = seq.t_steps();
        let k_total = seq.entities();
        let players = seq.players();
        let d = self.config.d_model;
        let tokens = self.featurizer.tokens(tape, seq)?;

        // directed neighbor pairs (i, j), j != i, and the 1/(K-1)
        // averaging matrix that turns edge messages into node inputs
        let mut idx_i = Vec::with_capacity(k_total * (k_total - 1));
        let mut idx_j = Vec::with_capacity(k_total * (k_total - 1));
        for i in 0..k_total {
            for j in 0..k_total {
                if i != j {
                    idx_i.push(i);
                    idx_j.push(j);
                }
            }
        }
        let idx_i = Rc::new(idx_i);
        let idx_j = Rc::new(idx_j);
        let inv = real::<F>(1.0 / (k_total.max(2) - 1) as f64);
        let mut avg = Array2::zeros((k_total, idx_i.len()));
        for (pair, &i) in idx_i.iter().enumerate() {
            avg[(i, pair)] = inv;
        }
        let avg = tape.leaf(avg);
        let ones = tape.leaf(Array2::from_elem((k_total, d), F::one()));

        let mut hidden = tape.leaf(Array2::zeros((k_total, d)));
        let mut per_step_players = Vec::with_capacity(t_steps);
        for t in 0..t_steps {
            let rows: Vec<usize> = (0..k_total).map(|k| t * k_total + k).collect();
            let v = tape.gather_rows(tokens, Rc::new(rows))?;
            // e_ij = TFF_e(v_i + v_j); o_i = TFF_v(mean_j e_ij)
            let vi = tape.gather_rows(v, Rc::clone(&idx_i))?;
            let vj = tape.gather_rows(v, Rc::clone(&idx_j))?;
            let edges = self.edge.forward(tape, tape.add(vi, vj)?)?;
            let o = self.node.forward(tape, tape.matmul(avg, edges)?)?;

            // TFF-GRU update
            let z = tape.sigmoid(tape.add(
                self.gates[0].forward(tape, o)?,
                self.gates[1].forward(tape, hidden)?,
            )?);
            let r = tape.sigmoid(tape.add(
                self.gates[2].forward(tape, o)?,
                self.gates[3].forward(tape, hidden)?,
            )?);
            let candidate = tape.tanh(tape.add(
                self.gates[4].forward(tape, o)?,
                self.gates[5].forward(tape, tape.mul(r, hidden)?)?,
            )?);
            let keep = tape.mul(tape.sub(ones, z)?, hidden)?;
            hidden = tape.add(keep, tape.mul(z, candidate)?)?;

            let player_rows: Vec<usize> = (0..players).collect();
            per_step_players.push(tape.gather_rows(hidden, Rc::new(player_rows))?);
        }
        Ok(tape.concat_rows(&per_step_players)?)
    }

    /// Per-player bin probabilities `[T*players, labels]`.
    pub fn forward_task_p(&self, tape: &Tape<F>, seq: &PlaySequence) -> Result<TensorId, ModelError> {
        if !self.config.task.wants_players() {
            return Err(ModelError::TaskMismatch { task: self.config.task, wanted: "player" });
        }
        let states = self.encode(tape, seq)?;
        Ok(tape.softmax(self.head_players.forward(tape, states)?))
    }

    pub fn task_p_probs(&self, seq: &PlaySequence) -> Result<Array3<F>, ModelError> {
        let tape = Tape::new();
        let probs = self.forward_task_p(&tape, seq)?;
        let flat = tape.value(probs);
        let (t, p) = (seq.t_steps(), seq.players());
        let labels = flat.ncols();
        Ok(Array3::from_shape_fn((t, p, labels), |(ti, ki, li)| flat[(ti * p + ki, li)]))
    }

    pub fn loss_task_p(&self, tape: &Tape<F>, seq: &PlaySequence) -> Result<TensorId, ModelError> {
        let probs = self.forward_task_p(tape, seq)?;
        let labels: Vec<usize> = (0..seq.t_steps())
            .flat_map(|t| (0..seq.players()).map(move |k| seq.player_label(t, k) as usize))
            .collect();
        Ok(tape.nll_sum(probs, Rc::new(labels))?)
    }

    pub fn predictions_per_sequence(&self, seq: &PlaySequence) -> usize {
        seq.t_steps() * seq.players()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{
        generate_synthetic_league, sample_training_sequence, SequenceConfig,
        SyntheticLeagueConfig,
    };
    use crate::model::Task;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture(seed: u64) -> (GraphRecurrentModel<f64>, PlaySequence, SequenceConfig) {
        let league = SyntheticLeagueConfig {
            league_size: 12,
            games: 1,
            frames_per_game: 400,
            seed,
            ..SyntheticLeagueConfig::default()
        };
        let games = generate_synthetic_league(&league).unwrap();
        let cfg = SequenceConfig { rotate_prob: 0.0, ..SequenceConfig::default() };
        let seq =
            sample_training_sequence(&games, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let model = GraphRecurrentModel::new(
            ModelConfig::tiny(Task::Players),
            &mut ChaCha8Rng::seed_from_u64(seed ^ 0xdef),
        )
        .unwrap();
        (model, seq, cfg)
    }

    #[test]
    fn rows_are_distributions_and_zeroed_head_is_uniform() {
        let (model, seq, _) = fixture(51);
        let probs = model.task_p_probs(&seq).unwrap();
        for t in 0..seq.t_steps() {
            for k in 0..seq.players() {
                let s: f64 = (0..121).map(|l| probs[(t, k, l)]).sum();
                assert!((s - 1.0).abs() < 1e-6);
            }
        }
        model.head_players.weight.set_value(Array2::zeros(model.head_players.weight.shape()));
        model.head_players.bias.set_value(Array2::zeros(model.head_players.bias.shape()));
        let probs = model.task_p_probs(&seq).unwrap();
        for v in probs.iter() {
            assert!((v - 1.0 / 121.0).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_equivariance_via_mean_aggregation() {
        let (model, seq, _) = fixture(52);
        let perm: Vec<usize> = vec![9, 3, 1, 0, 7, 5, 6, 4, 8, 2];
        let base = model.task_p_probs(&seq).unwrap();
        let permuted = model.task_p_probs(&seq.permuted_players(&perm)).unwrap();
        let mut max_rel = 0.0f64;
        for t in 0..seq.t_steps() {
            for (k, &src) in perm.iter().enumerate() {
                for l in 0..121 {
                    let a = base[(t, src, l)];
                    let b = permuted[(t, k, l)];
                    let rel = (a - b).abs() / a.abs().max(1e-300);
                    max_rel = max_rel.max(rel);
                }
            }
        }
        assert!(max_rel < 1e-4, "max relative deviation {max_rel}");
    }

    #[test]
    fn recurrence_is_causal() {
        let (model, seq, cfg) = fixture(53);
        let t_cut = 6;
        let full = model.task_p_probs(&seq).unwrap();
        let poked = seq.perturbed_after(t_cut, 11.0, &cfg).unwrap();
        let after = model.task_p_probs(&poked).unwrap();
        for t in 0..=t_cut {
            for k in 0..seq.players() {
                for l in 0..121 {
                    assert_eq!(full[(t, k, l)], after[(t, k, l)]);
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (model, seq, _) = fixture(55);
        let short = seq.truncated(3);
        let report = crate::nn::grad_check(
            &model.parameters(),
            |tape| {
                model.loss_task_p(tape, &short).map_err(|e| match e {
                    ModelError::Nn(inner) => inner,
                    other => panic!("unexpected error {other}"),
                })
            },
            60,
            1e-3,
            &mut ChaCha8Rng::seed_from_u64(56),
        )
        .unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn paired_configs_count_within_ten_percent() {
        let b2v_cfg = ModelConfig::desk(Task::Players);
        let grnn_cfg = b2v_cfg.paired_grnn();
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        let grnn: GraphRecurrentModel<f64> =
            GraphRecurrentModel::new(grnn_cfg.clone(), &mut rng).unwrap();
        assert_eq!(grnn.count_parameters(), grnn_cfg.grnn_param_count());
        let a = b2v_cfg.transformer_param_count() as f64;
        let b = grnn.count_parameters() as f64;
        assert!((a - b).abs() / a < 0.10, "{a} vs {b}");
    }
}
