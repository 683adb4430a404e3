//! The multi-entity transformer: tokens for every (step, entity) pair, a
//! causal entity mask, a stack of post-norm encoder layers, and linear
//! softmax heads over trajectory bins.

use std::rc::Rc;

use ndarray::{Array2, Array3};
use rand::Rng;

use super::features::Featurizer;
use super::{ModelConfig, ModelError, Task};
use crate::data::PlaySequence;
use crate::mask::EntityMask;
use crate::nn::{LayerNorm, Linear, MultiHeadAttention, Parameter, Real, Tape, TensorId};

struct EncoderLayer<F: Real> {
    attn: MultiHeadAttention<F>,
    ln_attn: LayerNorm<F>,
    ff_in: Linear<F>,
    ff_out: Linear<F>,
    ln_ff: LayerNorm<F>,
}

impl<F: Real> EncoderLayer<F> {
    fn new(name: &str, d_model: usize, heads: usize, d_ff: usize, rng: &mut impl Rng) -> Result<Self, ModelError> {
        Ok(Self {
            attn: MultiHeadAttention::new(&format!("{name}.attn"), d_model, heads, rng)?,
            ln_attn: LayerNorm::new(&format!("{name}.ln_attn"), d_model),
            ff_in: Linear::new(&format!("{name}.ff_in"), d_model, d_ff, rng),
            ff_out: Linear::new(&format!("{name}.ff_out"), d_ff, d_model, rng),
            ln_ff: LayerNorm::new(&format!("{name}.ln_ff"), d_model),
        })
    }

    /// Post-norm residual block: `x = LN(x + Attn(x)); x = LN(x + FF(x))`.
    fn forward(
        &self,
        tape: &Tape<F>,
        x: TensorId,
        mask: &Rc<Array2<bool>>,
    ) -> Result<(TensorId, Vec<TensorId>), ModelError> {
        let (attended, weights) = self.attn.forward_with_weights(tape, x, mask)?;
        let x = self.ln_attn.forward(tape, tape.add(x, attended)?)?;
        let ff = self.ff_out.forward(tape, tape.relu(self.ff_in.forward(tape, x)?))?;
        let x = self.ln_ff.forward(tape, tape.add(x, ff)?)?;
        Ok((x, weights))
    }

    fn parameters(&self) -> Vec<Parameter<F>> {
        let mut out = self.attn.parameters();
        out.extend(self.ln_attn.parameters());
        out.extend(self.ff_in.parameters());
        out.extend(self.ff_out.parameters());
        out.extend(self.ln_ff.parameters());
        out
    }
}

/// Post-softmax attention weights of one head plus the temporal sums for a
/// ball-reference row: how much total weight each player slot (and the
/// ball itself) received across all of its occurrences in time.
#[derive(Debug, Clone)]
pub struct AttentionCapture<F: Real> {
    pub weights: Array2<F>,
    pub ref_row: usize,
    pub player_sums: Vec<F>,
    pub ball_sum: F,
}

pub struct MultiEntityTransformer<F: Real> {
    config: ModelConfig,
    featurizer: Featurizer<F>,
    layers: Vec<EncoderLayer<F>>,
    head_players: Option<Linear<F>>,
    head_ball: Option<Linear<F>>,
}

impl<F: Real> MultiEntityTransformer<F> {
    pub fn new(config: ModelConfig, rng: &mut impl Rng) -> Result<Self, ModelError> {
        config.validate()?;
        let featurizer = Featurizer::new(&config, rng);
        let layers = (0..config.layers)
            .map(|i| EncoderLayer::new(&format!("layer{i}"), config.d_model, config.heads, config.d_ff, rng))
            .collect::<Result<Vec<_>, _>>()?;
        let head_players = config
            .task
            .wants_players()
            .then(|| Linear::new("head.players", config.d_model, config.player_grid.label_count(), rng));
        let head_ball = config
            .task
            .wants_ball()
            .then(|| Linear::new("head.ball", config.d_model, config.ball_grid.label_count(), rng));
        Ok(Self { config, featurizer, layers, head_players, head_ball })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Per-agent identity embedding matrix `[league_size, dim]`, or `None`
    /// when identity is ablated to the single generic vector.
    pub fn player_embeddings(&self) -> Option<Array2<F>> {
        self.config.identity.then(|| self.featurizer.embeddings.players.value())
    }

    /// Parameters in declaration order (the checkpoint layout).
    pub fn parameters(&self) -> Vec<Parameter<F>> {
        let mut out = self.featurizer.parameters();
        for l in &self.layers {
            out.extend(l.parameters());
        }
        if let Some(h) = &self.head_players {
            out.extend(h.parameters());
        }
        if let Some(h) = &self.head_ball {
            out.extend(h.parameters());
        }
        out
    }

    /// Exact count of trainable scalar parameters.
    pub fn count_parameters(&self) -> usize {
        self.parameters().iter().filter(|p| p.trainable()).map(|p| p.len()).sum()
    }

    /// Run the token stack; returns final token representations and the
    /// per-layer, per-head attention weight nodes.
    fn encode(
        &self,
        tape: &Tape<F>,
        seq: &PlaySequence,
    ) -> Result<(TensorId, Vec<Vec<TensorId>>), ModelError> {
        let mask = EntityMask::causal(seq.t_steps(), seq.entities())?;
        let mask = Rc::new(mask.matrix().clone());
        let mut x = self.featurizer.tokens(tape, seq)?;
        let mut attn = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, weights) = layer.forward(tape, x, &mask)?;
            x = next;
            attn.push(weights);
        }
        Ok((x, attn))
    }

    fn player_rows(seq: &PlaySequence) -> Vec<usize> {
        let k_total = seq.entities();
        let players = seq.players();
        (0..seq.t_steps())
            .flat_map(|t| (0..players).map(move |k| t * k_total + k))
            .collect()
    }

    fn ball_rows(seq: &PlaySequence) -> Vec<usize> {
        let k_total = seq.entities();
        let players = seq.players();
        (0..seq.t_steps()).map(|t| t * k_total + players).collect()
    }

    /// Per-player bin probabilities as a `[T*players, labels]` node.
    pub fn forward_task_p(&self, tape: &Tape<F>, seq: &PlaySequence) -> Result<TensorId, ModelError> {
        let head = self
            .head_players
            .as_ref()
            .ok_or(ModelError::TaskMismatch { task: self.config.task, wanted: "player" })?;
        let (tokens, _) = self.encode(tape, seq)?;
        let rows = tape.gather_rows(tokens, Rc::new(Self::player_rows(seq)))?;
        Ok(tape.softmax(head.forward(tape, rows)?))
    }

    /// Ball bin probabilities as a `[T, labels]` node.
    pub fn forward_task_b(&self, tape: &Tape<F>, seq: &PlaySequence) -> Result<TensorId, ModelError> {
        let head = self
            .head_ball
            .as_ref()
            .ok_or(ModelError::TaskMismatch { task: self.config.task, wanted: "ball" })?;
        if !seq.has_ball() {
            return Err(ModelError::MissingBall);
        }
        let (tokens, _) = self.encode(tape, seq)?;
        let rows = tape.gather_rows(tokens, Rc::new(Self::ball_rows(seq)))?;
        Ok(tape.softmax(head.forward(tape, rows)?))
    }

    /// Convenience value form of [`Self::forward_task_p`]:
    /// `[T, players, labels]`.
    pub fn task_p_probs(&self, seq: &PlaySequence) -> Result<Array3<F>, ModelError> {
        let tape = Tape::new();
        let probs = self.forward_task_p(&tape, seq)?;
        let flat = tape.value(probs);
        let (t, p) = (seq.t_steps(), seq.players());
        let labels = flat.ncols();
        Ok(Array3::from_shape_fn((t, p, labels), |(ti, ki, li)| flat[(ti * p + ki, li)]))
    }

    pub fn task_b_probs(&self, seq: &PlaySequence) -> Result<Array2<F>, ModelError> {
        let tape = Tape::new();
        let probs = self.forward_task_b(&tape, seq)?;
        Ok(tape.value(probs))
    }

    /// Sum of per-player NLLs over all steps and player slots.
    pub fn loss_task_p(&self, tape: &Tape<F>, seq: &PlaySequence) -> Result<TensorId, ModelError> {
        let probs = self.forward_task_p(tape, seq)?;
        let labels: Vec<usize> = (0..seq.t_steps())
            .flat_map(|t| (0..seq.players()).map(move |k| seq.player_label(t, k) as usize))
            .collect();
        Ok(tape.nll_sum(probs, Rc::new(labels))?)
    }

    /// Sum of ball NLLs over all steps.
    pub fn loss_task_b(&self, tape: &Tape<F>, seq: &PlaySequence) -> Result<TensorId, ModelError> {
        let probs = self.forward_task_b(tape, seq)?;
        let labels: Vec<usize> = (0..seq.t_steps())
            .map(|t| seq.ball_label(t).expect("ball checked in forward") as usize)
            .collect();
        Ok(tape.nll_sum(probs, Rc::new(labels))?)
    }

    /// Training loss for the configured task (sum over both when `Both`).
    pub fn loss(&self, tape: &Tape<F>, seq: &PlaySequence) -> Result<TensorId, ModelError> {
        match self.config.task {
            Task::Players => self.loss_task_p(tape, seq),
            Task::Ball => self.loss_task_b(tape, seq),
            Task::Both => {
                let p = self.loss_task_p(tape, seq)?;
                let b = self.loss_task_b(tape, seq)?;
                Ok(tape.add(p, b)?)
            }
        }
    }

    /// Number of scalar predictions `loss` sums over for `seq`.
    pub fn predictions_per_sequence(&self, seq: &PlaySequence) -> usize {
        let t = seq.t_steps();
        match self.config.task {
            Task::Players => t * seq.players(),
            Task::Ball => t,
            Task::Both => t * seq.players() + t,
        }
    }

    /// Raw post-softmax weights of one attention head plus per-player
    /// temporal sums for the ball token at `ref_step`.
    pub fn attention_capture(
        &self,
        seq: &PlaySequence,
        layer: usize,
        head: usize,
        ref_step: usize,
    ) -> Result<AttentionCapture<F>, ModelError> {
        if layer >= self.layers.len() {
            return Err(ModelError::LayerOutOfRange { layer, layers: self.layers.len() });
        }
        if head >= self.config.heads {
            return Err(ModelError::HeadOutOfRange { head, heads: self.config.heads });
        }
        if ref_step >= seq.t_steps() {
            return Err(ModelError::StepOutOfRange { step: ref_step, t_steps: seq.t_steps() });
        }
        if !seq.has_ball() {
            return Err(ModelError::MissingBall);
        }
        let tape = Tape::new();
        let (_, attn) = self.encode(&tape, seq)?;
        let weights = tape.value(attn[layer][head]);

        let k_total = seq.entities();
        let players = seq.players();
        let ref_row = ref_step * k_total + players;
        let mut player_sums = vec![F::zero(); players];
        let mut ball_sum = F::zero();
        for t2 in 0..seq.t_steps() {
            for (k, sum) in player_sums.iter_mut().enumerate() {
                *sum += weights[(ref_row, t2 * k_total + k)];
            }
            ball_sum += weights[(ref_row, t2 * k_total + players)];
        }
        Ok(AttentionCapture { weights, ref_row, player_sums, ball_sum })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{
        generate_synthetic_league, sample_training_sequence, SequenceConfig,
        SyntheticLeagueConfig,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture(seed: u64) -> (MultiEntityTransformer<f64>, PlaySequence, SequenceConfig) {
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
        let model = MultiEntityTransformer::new(
            ModelConfig { task: Task::Both, ..ModelConfig::tiny(Task::Both) },
            &mut ChaCha8Rng::seed_from_u64(seed ^ 0xabc),
        )
        .unwrap();
        (model, seq, cfg)
    }

    #[test]
    fn featurize_shapes_and_slot_permutation() {
        let (model, seq, _) = fixture(31);
        let short = seq.truncated(1);
        let tape = Tape::new();
        let tokens = model.featurizer.tokens(&tape, &short).unwrap();
        assert_eq!(tape.shape(tokens), (11, 32));

        // swapping two slots permutes the token rows exactly
        let perm: Vec<usize> = vec![3, 1, 2, 0, 4, 5, 6, 7, 8, 9];
        let permuted = short.permuted_players(&perm);
        let tape2 = Tape::new();
        let ptok = model.featurizer.tokens(&tape2, &permuted).unwrap();
        let (a, b) = (tape.value(tokens), tape2.value(ptok));
        for k in 0..10 {
            for c in 0..32 {
                assert_eq!(b[(k, c)], a[(perm[k], c)]);
            }
        }
        assert_eq!(b.row(10), a.row(10)); // ball slot untouched
    }

    #[test]
    fn probability_rows_sum_to_one() {
        let (model, seq, _) = fixture(32);
        let probs = model.task_p_probs(&seq).unwrap();
        for t in 0..seq.t_steps() {
            for k in 0..seq.players() {
                let s: f64 = (0..121).map(|l| probs[(t, k, l)]).sum();
                assert!((s - 1.0).abs() < 1e-6);
            }
        }
        let bprobs = model.task_b_probs(&seq).unwrap();
        for t in 0..seq.t_steps() {
            let s: f64 = bprobs.row(t).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn zeroed_heads_give_uniform_distributions() {
        let (model, seq, _) = fixture(33);
        let h = model.head_players.as_ref().unwrap();
        h.weight.set_value(Array2::zeros(h.weight.shape()));
        h.bias.set_value(Array2::zeros(h.bias.shape()));
        let probs = model.task_p_probs(&seq).unwrap();
        for v in probs.iter() {
            assert!((v - 1.0 / 121.0).abs() < 1e-12);
        }
        let hb = model.head_ball.as_ref().unwrap();
        hb.weight.set_value(Array2::zeros(hb.weight.shape()));
        hb.bias.set_value(Array2::zeros(hb.bias.shape()));
        let bprobs = model.task_b_probs(&seq).unwrap();
        for v in bprobs.iter() {
            assert!((v - 1.0 / 6859.0).abs() < 1e-12);
        }
    }

    #[test]
    fn losses_match_closed_forms() {
        let (model, seq, _) = fixture(34);
        // uniform predictions: loss = T * players * ln(121)
        let h = model.head_players.as_ref().unwrap();
        h.weight.set_value(Array2::zeros(h.weight.shape()));
        h.bias.set_value(Array2::zeros(h.bias.shape()));
        let tape = Tape::new();
        let loss = model.loss_task_p(&tape, &seq).unwrap();
        let want = (seq.t_steps() * seq.players()) as f64 * 121.0_f64.ln();
        assert!((tape.scalar(loss) - want).abs() < 1e-9 * want);
    }

    #[test]
    fn task_mismatch_is_a_usage_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let model: MultiEntityTransformer<f64> =
            MultiEntityTransformer::new(ModelConfig::tiny(Task::Players), &mut rng).unwrap();
        let (_, seq, _) = fixture(35);
        assert!(matches!(
            model.task_b_probs(&seq),
            Err(ModelError::TaskMismatch { wanted: "ball", .. })
        ));
    }

    #[test]
    fn causality_is_exact() {
        let (model, seq, cfg) = fixture(36);
        let t_cut = 7;
        let full = model.task_p_probs(&seq).unwrap();

        // shove everything after t_cut across the court: exclusion
        // masking keeps earlier outputs bit-identical
        let poked = seq.perturbed_after(t_cut, 13.0, &cfg).unwrap();
        let after = model.task_p_probs(&poked).unwrap();
        for t in 0..=t_cut {
            for k in 0..seq.players() {
                for l in 0..121 {
                    assert_eq!(full[(t, k, l)], after[(t, k, l)], "t={t} k={k} l={l}");
                }
            }
        }
        // and the perturbation did change later outputs
        let mut moved = false;
        for t in t_cut + 1..seq.t_steps() {
            for k in 0..seq.players() {
                for l in 0..121 {
                    moved |= full[(t, k, l)] != after[(t, k, l)];
                }
            }
        }
        assert!(moved);

        // prefix closure: running only the first t_cut+1 steps reproduces
        // the full run's early outputs exactly as well
        let part = model.task_p_probs(&seq.truncated(t_cut + 1)).unwrap();
        for t in 0..=t_cut {
            for k in 0..seq.players() {
                for l in 0..121 {
                    assert_eq!(full[(t, k, l)], part[(t, k, l)]);
                }
            }
        }
    }

    #[test]
    fn identity_ablation_makes_players_interchangeable() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let cfg = ModelConfig { identity: false, ..ModelConfig::tiny(Task::Players) };
        let model: MultiEntityTransformer<f64> =
            MultiEntityTransformer::new(cfg, &mut rng).unwrap();
        let (_, seq, _) = fixture(37);
        // same coordinates, different identities: identical outputs
        let swapped = seq.with_agent_ids({
            let mut ids = seq.agent_ids.clone();
            ids.swap(0, 5);
            ids
        });
        let a = model.task_p_probs(&seq).unwrap();
        let b = model.task_p_probs(&swapped).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_agent_is_a_lookup_error() {
        let (model, seq, _) = fixture(38);
        let bad = seq.with_agent_ids(vec![900, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        assert!(matches!(
            model.task_p_probs(&bad),
            Err(ModelError::UnknownAgent(900, 12))
        ));
    }

    #[test]
    fn attention_capture_partitions_the_reference_row() {
        let (model, seq, _) = fixture(39);
        let cap = model.attention_capture(&seq, 0, 1, 5).unwrap();
        // every row sums to 1
        for r in 0..cap.weights.nrows() {
            let s: f64 = cap.weights.row(r).sum();
            assert!((s - 1.0).abs() < 1e-6, "row {r} sums to {s}");
        }
        // player sums plus the ball's own temporal sum total 1
        let total: f64 = cap.player_sums.iter().sum::<f64>() + cap.ball_sum;
        assert!((total - 1.0).abs() < 1e-6);
        assert!(cap.player_sums.iter().all(|&s| (0.0..=1.0 + 1e-9).contains(&s)));
        // masked future columns contribute exactly zero
        let k_total = seq.entities();
        for col in (5 + 1) * k_total..cap.weights.ncols() {
            assert_eq!(cap.weights[(cap.ref_row, col)], 0.0);
        }
        // out-of-range indices are rejected with the valid ranges named
        assert!(matches!(
            model.attention_capture(&seq, 9, 0, 0),
            Err(ModelError::LayerOutOfRange { .. })
        ));
        assert!(matches!(
            model.attention_capture(&seq, 0, 9, 0),
            Err(ModelError::HeadOutOfRange { .. })
        ));
    }

    #[test]
    fn count_matches_closed_form() {
        let (model, _, _) = fixture(40);
        assert_eq!(model.count_parameters(), model.config().transformer_param_count());

        // single linear 2 -> 3 with bias = 9 parameters
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let lin: Linear<f64> = Linear::new("l", 2, 3, &mut rng);
        let n: usize = lin.parameters().iter().map(|p| p.len()).sum();
        assert_eq!(n, 9);
    }
}
