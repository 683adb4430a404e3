//! Play sequences: the unit of training and evaluation.
//!
//! A sequence is `T+1` downsampled frames (default 21 at 5 Hz, i.e. every
//! 5th frame of the 25 Hz stream) over a fixed set of 10 players plus the
//! ball. The trajectory label of step `t` is the binned displacement from
//! frame `t` to frame `t+1`, so `T` input steps need one extra frame.
//!
//! Court rotation is stored as a view flag rather than baked into the
//! coordinates: accessors apply the `x -> 94-x, y -> 50-y` transform on
//! read. Rotating twice therefore restores every field bit-exactly, which
//! floating-point subtraction on eagerly rewritten coordinates would not.

use ndarray::{Array2, Array3};
use rand::Rng;
use thiserror::Error;

use super::format::{Frame, GameRecord, HoopSide, Team, COURT_LENGTH, COURT_WIDTH};
use super::DataError;
use crate::bins::{BinGrid2D, BinGrid3D};

/// Sampling protocol knobs; defaults follow the 5 Hz / 4 s regime.
#[derive(Debug, Clone)]
pub struct SequenceConfig {
    /// Input steps per sequence (labels exist for each).
    pub t_steps: usize,
    /// Downsampling stride over the 25 Hz frames.
    pub stride: usize,
    pub player_grid: BinGrid2D,
    pub ball_grid: BinGrid3D,
    /// Probability of the 180-degree court rotation augmentation.
    pub rotate_prob: f64,
    /// Resampling budget before sampling gives up.
    pub max_retries: usize,
    /// Per-step player displacement beyond this is treated as a glitch.
    pub teleport_limit: f64,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            t_steps: 20,
            stride: 5,
            player_grid: BinGrid2D::players_default(),
            ball_grid: BinGrid3D::ball_default(),
            rotate_prob: 0.5,
            max_retries: 200,
            teleport_limit: 10.0,
        }
    }
}

impl SequenceConfig {
    /// 25 Hz frames one window covers.
    pub fn window_span(&self) -> usize {
        self.t_steps * self.stride + 1
    }
}

/// Why a candidate window could not become a sequence.
#[derive(Debug, Error, PartialEq)]
pub enum WindowReject {
    #[error("window exceeds the frame range")]
    OutOfRange,
    #[error("window crosses a period boundary")]
    PeriodCrossing,
    #[error("player set changes inside the window (substitution)")]
    Substitution,
    #[error("player displacement exceeds the teleport limit")]
    Teleport,
    #[error("agent {0} missing from roster metadata")]
    UnknownAgent(u32),
}

/// One sampled sequence: slot-ordered players plus the ball.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaySequence {
    pub game_id: String,
    /// 25 Hz index of the first frame of the window.
    pub start_frame: usize,
    /// Player slot order is sequence-local (first frame's listing order).
    pub agent_ids: Vec<u32>,
    player_xy: Array3<f64>,         // [T+1, players, 2], unrotated
    ball_xyz: Option<Array2<f64>>,  // [T+1, 3], unrotated
    frontcourt_raw: Array2<bool>,   // [T, players], unrotated
    rotated: bool,
    player_labels: Array2<u32>,     // [T, players], for the current view
    ball_labels: Option<Vec<u32>>,  // [T]
}

impl PlaySequence {
    pub fn t_steps(&self) -> usize {
        self.player_labels.nrows()
    }

    pub fn players(&self) -> usize {
        self.agent_ids.len()
    }

    pub fn has_ball(&self) -> bool {
        self.ball_xyz.is_some()
    }

    /// Entities per step: players plus the ball slot when present.
    pub fn entities(&self) -> usize {
        self.players() + usize::from(self.has_ball())
    }

    pub fn is_rotated(&self) -> bool {
        self.rotated
    }

    /// Player position at downsampled frame `t` (0..=T), view-transformed.
    pub fn player_pos(&self, t: usize, k: usize) -> (f64, f64) {
        let (x, y) = (self.player_xy[(t, k, 0)], self.player_xy[(t, k, 1)]);
        if self.rotated {
            (COURT_LENGTH - x, COURT_WIDTH - y)
        } else {
            (x, y)
        }
    }

    /// Ball position at downsampled frame `t`; height is rotation-invariant.
    pub fn ball_pos(&self, t: usize) -> Option<(f64, f64, f64)> {
        self.ball_xyz.as_ref().map(|b| {
            let (x, y, z) = (b[(t, 0)], b[(t, 1)], b[(t, 2)]);
            if self.rotated {
                (COURT_LENGTH - x, COURT_WIDTH - y, z)
            } else {
                (x, y, z)
            }
        })
    }

    /// Frontcourt flag of player `k` at step `t`: true when the offensive
    /// hoop is the right end of the current view.
    pub fn frontcourt(&self, t: usize, k: usize) -> bool {
        self.frontcourt_raw[(t, k)] != self.rotated
    }

    pub fn player_label(&self, t: usize, k: usize) -> u32 {
        self.player_labels[(t, k)]
    }

    pub fn ball_label(&self, t: usize) -> Option<u32> {
        self.ball_labels.as_ref().map(|l| l[t])
    }

    pub fn player_displacement(&self, t: usize, k: usize) -> (f64, f64) {
        let (x0, y0) = self.player_pos(t, k);
        let (x1, y1) = self.player_pos(t + 1, k);
        (x1 - x0, y1 - y0)
    }

    pub fn ball_displacement(&self, t: usize) -> Option<(f64, f64, f64)> {
        let (x0, y0, z0) = self.ball_pos(t)?;
        let (x1, y1, z1) = self.ball_pos(t + 1)?;
        Some((x1 - x0, y1 - y0, z1 - z0))
    }

    fn recompute_labels(&mut self, cfg: &SequenceConfig) -> Result<(), DataError> {
        let t_steps = self.t_steps();
        let players = self.players();
        for t in 0..t_steps {
            for k in 0..players {
                let (dx, dy) = self.player_displacement(t, k);
                self.player_labels[(t, k)] = cfg.player_grid.bin(dx, dy)?;
            }
        }
        if self.has_ball() {
            let labels = (0..t_steps)
                .map(|t| {
                    let (dx, dy, dz) = self.ball_displacement(t).expect("ball present");
                    cfg.ball_grid.bin(dx, dy, dz)
                })
                .collect::<Result<Vec<_>, _>>()?;
            self.ball_labels = Some(labels);
        }
        Ok(())
    }

    /// True when every stored label matches re-binning the displacement
    /// read back from the stored positions.
    pub fn labels_consistent(&self, cfg: &SequenceConfig) -> bool {
        let mut probe = self.clone();
        probe.recompute_labels(cfg).is_ok()
            && probe.player_labels == self.player_labels
            && probe.ball_labels == self.ball_labels
    }

    /// First `t_steps` steps of this sequence (same view, same slots).
    pub fn truncated(&self, t_steps: usize) -> PlaySequence {
        assert!(t_steps >= 1 && t_steps <= self.t_steps());
        PlaySequence {
            game_id: self.game_id.clone(),
            start_frame: self.start_frame,
            agent_ids: self.agent_ids.clone(),
            player_xy: self
                .player_xy
                .slice(ndarray::s![..t_steps + 1, .., ..])
                .to_owned(),
            ball_xyz: self
                .ball_xyz
                .as_ref()
                .map(|b| b.slice(ndarray::s![..t_steps + 1, ..]).to_owned()),
            frontcourt_raw: self
                .frontcourt_raw
                .slice(ndarray::s![..t_steps, ..])
                .to_owned(),
            rotated: self.rotated,
            player_labels: self
                .player_labels
                .slice(ndarray::s![..t_steps, ..])
                .to_owned(),
            ball_labels: self.ball_labels.as_ref().map(|l| l[..t_steps].to_vec()),
        }
    }

    /// Restrict the input to a single player slot and drop the ball.
    pub fn single_player_view(&self, k: usize) -> PlaySequence {
        assert!(k < self.players());
        PlaySequence {
            game_id: self.game_id.clone(),
            start_frame: self.start_frame,
            agent_ids: vec![self.agent_ids[k]],
            player_xy: self.player_xy.slice(ndarray::s![.., k..k + 1, ..]).to_owned(),
            ball_xyz: None,
            frontcourt_raw: self.frontcourt_raw.slice(ndarray::s![.., k..k + 1]).to_owned(),
            rotated: self.rotated,
            player_labels: self.player_labels.slice(ndarray::s![.., k..k + 1]).to_owned(),
            ball_labels: None,
        }
    }

    /// Same positions and labels under different agent identities
    /// (the random-player-swap evaluation).
    pub fn with_agent_ids(&self, agent_ids: Vec<u32>) -> PlaySequence {
        assert_eq!(agent_ids.len(), self.players());
        let mut out = self.clone();
        out.agent_ids = agent_ids;
        out
    }

    /// Reorder player slots by `perm` (slot `k` of the result is slot
    /// `perm[k]` of `self`). Pure relabeling; the ball is unaffected.
    pub fn permuted_players(&self, perm: &[usize]) -> PlaySequence {
        assert_eq!(perm.len(), self.players());
        let mut out = self.clone();
        for (k, &src) in perm.iter().enumerate() {
            out.agent_ids[k] = self.agent_ids[src];
            for t in 0..=self.t_steps() {
                out.player_xy[(t, k, 0)] = self.player_xy[(t, src, 0)];
                out.player_xy[(t, k, 1)] = self.player_xy[(t, src, 1)];
            }
            for t in 0..self.t_steps() {
                out.frontcourt_raw[(t, k)] = self.frontcourt_raw[(t, src)];
                out.player_labels[(t, k)] = self.player_labels[(t, src)];
            }
        }
        out
    }

    /// Shift every coordinate at downsampled frames strictly after
    /// `t_cut` by `amount` feet (clamped to the court) and recompute
    /// labels. A causality probe: outputs at steps `<= t_cut` of a causal
    /// model must not react.
    pub fn perturbed_after(
        &self,
        t_cut: usize,
        amount: f64,
        cfg: &SequenceConfig,
    ) -> Result<PlaySequence, DataError> {
        let mut out = self.clone();
        for t in t_cut + 1..=self.t_steps() {
            for k in 0..self.players() {
                out.player_xy[(t, k, 0)] =
                    (out.player_xy[(t, k, 0)] + amount).clamp(0.0, COURT_LENGTH);
                out.player_xy[(t, k, 1)] =
                    (out.player_xy[(t, k, 1)] + amount).clamp(0.0, COURT_WIDTH);
            }
            if let Some(b) = out.ball_xyz.as_mut() {
                b[(t, 0)] = (b[(t, 0)] + amount).clamp(0.0, COURT_LENGTH);
                b[(t, 1)] = (b[(t, 1)] + amount).clamp(0.0, COURT_WIDTH);
                b[(t, 2)] = (b[(t, 2)] + amount).max(0.0);
            }
        }
        out.recompute_labels(cfg)?;
        Ok(out)
    }
}

/// Rotate the court 180 degrees: `x -> 94-x`, `y -> 50-y`, ball height
/// unchanged, frontcourt flags flipped, labels recomputed. An exact
/// involution.
pub fn rotate_180(seq: &PlaySequence, cfg: &SequenceConfig) -> Result<PlaySequence, DataError> {
    let mut out = seq.clone();
    out.rotated = !out.rotated;
    out.recompute_labels(cfg)?;
    Ok(out)
}

fn slot_positions(frame: &Frame, slots: &[u32]) -> Option<Vec<(f64, f64)>> {
    slots
        .iter()
        .map(|id| {
            frame
                .players
                .iter()
                .find(|p| p.id == *id)
                .map(|p| (p.x, p.y))
        })
        .collect()
}

/// Build a sequence from the window starting at 25 Hz index `start`.
pub fn extract_window(
    game: &GameRecord,
    start: usize,
    cfg: &SequenceConfig,
) -> Result<PlaySequence, WindowReject> {
    let t_steps = cfg.t_steps;
    let last = start + t_steps * cfg.stride;
    if last >= game.frames.len() {
        return Err(WindowReject::OutOfRange);
    }
    let first = &game.frames[start];
    let slots: Vec<u32> = first.players.iter().map(|p| p.id).collect();

    let mut player_xy = Array3::<f64>::zeros((t_steps + 1, 10, 2));
    let mut ball_xyz = Array2::<f64>::zeros((t_steps + 1, 3));
    for i in 0..=t_steps {
        let frame = &game.frames[start + i * cfg.stride];
        if frame.period != first.period {
            return Err(WindowReject::PeriodCrossing);
        }
        let Some(pos) = slot_positions(frame, &slots) else {
            return Err(WindowReject::Substitution);
        };
        for (k, (x, y)) in pos.into_iter().enumerate() {
            if i > 0 {
                let dx = (x - player_xy[(i - 1, k, 0)]).abs();
                let dy = (y - player_xy[(i - 1, k, 1)]).abs();
                if dx > cfg.teleport_limit || dy > cfg.teleport_limit {
                    return Err(WindowReject::Teleport);
                }
            }
            player_xy[(i, k, 0)] = x;
            player_xy[(i, k, 1)] = y;
        }
        ball_xyz[(i, 0)] = frame.ball[0];
        ball_xyz[(i, 1)] = frame.ball[1];
        ball_xyz[(i, 2)] = frame.ball[2];
    }

    let mut frontcourt_raw = Array2::from_elem((t_steps, 10), false);
    for (k, id) in slots.iter().enumerate() {
        let team: Team = game.team_of(*id).ok_or(WindowReject::UnknownAgent(*id))?;
        let side = game.frontcourt_side(team, first.period);
        for t in 0..t_steps {
            frontcourt_raw[(t, k)] = side == HoopSide::Right;
        }
    }

    let mut seq = PlaySequence {
        game_id: game.game_id.clone(),
        start_frame: start,
        agent_ids: slots,
        player_xy,
        ball_xyz: Some(ball_xyz),
        frontcourt_raw,
        rotated: false,
        player_labels: Array2::zeros((t_steps, 10)),
        ball_labels: None,
    };
    seq.recompute_labels(cfg).expect("finite in-court coordinates bin to valid labels");
    Ok(seq)
}

/// Draw one training sequence: uniform game, uniform start, resampling on
/// substitutions / teleports / period crossings, and the rotation
/// augmentation with probability `cfg.rotate_prob`.
pub fn sample_training_sequence(
    games: &[GameRecord],
    cfg: &SequenceConfig,
    rng: &mut impl Rng,
) -> Result<PlaySequence, DataError> {
    for _ in 0..cfg.max_retries {
        let game = &games[rng.gen_range(0..games.len())];
        if game.frames.len() < cfg.window_span() {
            continue;
        }
        let start = rng.gen_range(0..=game.frames.len() - cfg.window_span());
        let Ok(seq) = extract_window(game, start, cfg) else { continue };
        let rotate = rng.gen_bool(cfg.rotate_prob);
        return if rotate { rotate_180(&seq, cfg) } else { Ok(seq) };
    }
    Err(DataError::NoValidWindow { tries: cfg.max_retries })
}

/// Deterministic evaluation set: each game is divided into
/// `ceil(target / games)` non-overlapping chunks and the first window of
/// each chunk becomes one sequence. No rotation augmentation.
pub fn build_eval_set(
    games: &[GameRecord],
    target: usize,
    cfg: &SequenceConfig,
) -> (Vec<PlaySequence>, Vec<String>) {
    let mut sequences = Vec::new();
    let mut warnings = Vec::new();
    if games.is_empty() || target == 0 {
        return (sequences, warnings);
    }
    let want_chunks = target.div_ceil(games.len());
    let span = cfg.window_span();
    for game in games {
        let mut chunks = want_chunks;
        if game.frames.len() < span * chunks {
            chunks = game.frames.len() / span;
            warnings.push(format!(
                "game {}: too short for {} chunks, using {}",
                game.game_id, want_chunks, chunks
            ));
            if chunks == 0 {
                continue;
            }
        }
        let chunk_len = game.frames.len() / chunks;
        for c in 0..chunks {
            let start = c * chunk_len;
            match extract_window(game, start, cfg) {
                Ok(seq) => sequences.push(seq),
                Err(reason) => warnings.push(format!(
                    "game {}: chunk {} skipped: {}",
                    game.game_id, c, reason
                )),
            }
        }
    }
    (sequences, warnings)
}

/// Train / validation / test game slices, in that order.
pub type GameSplit<'a> = (&'a [GameRecord], &'a [GameRecord], &'a [GameRecord]);

/// Split games into train / validation / test without overlap, taking
/// ~5% (rounded up, at least one game) for test and ~5% of the remainder
/// for validation, preserving input order.
pub fn split_games(games: &[GameRecord]) -> Result<GameSplit<'_>, DataError> {
    let n = games.len();
    if n < 3 {
        return Err(DataError::TooFewGames { games: n });
    }
    let n_test = ((n as f64 * 0.05).ceil() as usize).max(1);
    let rest = n - n_test;
    let n_val = ((rest as f64 * 0.05).ceil() as usize).max(1);
    let n_train = n - n_test - n_val;
    Ok((
        &games[..n_train],
        &games[n_train..n_train + n_val],
        &games[n_train + n_val..],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{generate_synthetic_league, SyntheticLeagueConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_league(seed: u64) -> Vec<GameRecord> {
        let cfg = SyntheticLeagueConfig {
            league_size: 12,
            games: 3,
            frames_per_game: 650,
            seed,
            ..SyntheticLeagueConfig::default()
        };
        generate_synthetic_league(&cfg).unwrap()
    }

    #[test]
    fn sampling_is_deterministic_and_consistent() {
        let games = small_league(3);
        let cfg = SequenceConfig::default();
        let a = sample_training_sequence(&games, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = sample_training_sequence(&games, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.t_steps(), 20);
        assert_eq!(a.players(), 10);
        assert_eq!(a.entities(), 11);
        assert!(a.labels_consistent(&cfg));
    }

    #[test]
    fn windows_downsample_by_stride_without_interpolation() {
        let games = small_league(3);
        let cfg = SequenceConfig::default();
        let game = &games[0];
        let start = 37;
        let seq = extract_window(game, start, &cfg).unwrap();
        // positions are exactly every 5th 25 Hz frame starting at `start`
        for i in 0..=seq.t_steps() {
            let frame = &game.frames[start + i * cfg.stride];
            for (k, id) in seq.agent_ids.iter().enumerate() {
                let p = frame.players.iter().find(|p| p.id == *id).unwrap();
                assert_eq!(seq.player_pos(i, k), (p.x, p.y));
            }
            let (bx, by, bz) = seq.ball_pos(i).unwrap();
            assert_eq!([bx, by, bz], frame.ball);
        }
    }

    #[test]
    fn windows_reject_substitution_teleport_and_period_change() {
        let games = small_league(5);
        let cfg = SequenceConfig::default();

        // one on-court id changes midway through the window
        let mut subbed = games[0].clone();
        let victim = subbed.frames[0].players[0].id;
        let replacement = subbed.frames[0].players[1].id;
        for f in subbed.frames[60..].iter_mut() {
            for p in f.players.iter_mut() {
                if p.id == victim {
                    p.id = replacement;
                }
            }
        }
        assert_eq!(extract_window(&subbed, 0, &cfg), Err(WindowReject::Substitution));

        let mut teleported = games[0].clone();
        teleported.frames[60].players[3].x = 1.0;
        teleported.frames[60].players[3].y = 1.0;
        for f in teleported.frames[61..].iter_mut() {
            f.players[3].x = 90.0;
        }
        assert_eq!(extract_window(&teleported, 60, &cfg), Err(WindowReject::Teleport));

        let mut crossed = games[0].clone();
        for f in crossed.frames[80..].iter_mut() {
            f.period = 2;
        }
        assert_eq!(extract_window(&crossed, 0, &cfg), Err(WindowReject::PeriodCrossing));

        assert_eq!(
            extract_window(&games[0], games[0].frames.len() - 5, &cfg),
            Err(WindowReject::OutOfRange)
        );
    }

    #[test]
    fn sampling_gives_up_after_bounded_retries() {
        let games = small_league(7);
        let mut broken = games.clone();
        for game in &mut broken {
            // every window crosses a period boundary
            for (i, f) in game.frames.iter_mut().enumerate() {
                f.period = (i / 40) as u8 + 1;
                f.clock = 720.0 - (i % 40) as f64 * 0.04;
            }
        }
        let cfg = SequenceConfig { max_retries: 25, ..SequenceConfig::default() };
        let err =
            sample_training_sequence(&broken, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap_err();
        assert!(matches!(err, DataError::NoValidWindow { tries: 25 }));
    }

    #[test]
    fn stationary_league_yields_center_labels() {
        let cfg = SyntheticLeagueConfig {
            league_size: 12,
            games: 1,
            frames_per_game: 400,
            seed: 5,
            pass_hazard: 0.0,
            archetype_speeds: vec![1.0],
            archetype_noise: vec![0.0],
            archetype_ball_attraction: vec![0.0],
        };
        let games = generate_synthetic_league(&cfg).unwrap();
        let scfg = SequenceConfig { rotate_prob: 0.0, ..SequenceConfig::default() };
        let seq =
            sample_training_sequence(&games, &scfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        for t in 0..seq.t_steps() {
            for k in 0..seq.players() {
                assert_eq!(seq.player_label(t, k), 60);
            }
            assert_eq!(seq.ball_label(t), Some(3429));
        }
    }

    #[test]
    fn rotation_is_an_exact_involution() {
        let games = small_league(7);
        let cfg = SequenceConfig { rotate_prob: 0.0, ..SequenceConfig::default() };
        let seq =
            sample_training_sequence(&games, &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let once = rotate_180(&seq, &cfg).unwrap();
        assert_ne!(seq, once);
        let twice = rotate_180(&once, &cfg).unwrap();
        assert_eq!(seq, twice);
    }

    #[test]
    fn rotation_transforms_positions_and_flags() {
        let games = small_league(7);
        let cfg = SequenceConfig { rotate_prob: 0.0, ..SequenceConfig::default() };
        let seq =
            sample_training_sequence(&games, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let rot = rotate_180(&seq, &cfg).unwrap();
        let (x, y) = seq.player_pos(0, 0);
        let (rx, ry) = rot.player_pos(0, 0);
        assert_eq!(rx, COURT_LENGTH - x);
        assert_eq!(ry, COURT_WIDTH - y);
        assert_eq!(seq.frontcourt(0, 0), !rot.frontcourt(0, 0));
        let (_, _, z) = seq.ball_pos(0).unwrap();
        let (_, _, rz) = rot.ball_pos(0).unwrap();
        assert_eq!(z, rz);
        // labels of the rotated view equal bins of the negated displacement
        for t in 0..seq.t_steps() {
            for k in 0..seq.players() {
                let (dx, dy) = seq.player_displacement(t, k);
                let expect = cfg.player_grid.bin(-dx, -dy).unwrap();
                assert_eq!(rot.player_label(t, k), expect);
            }
        }
    }

    #[test]
    fn center_point_is_a_fixed_point() {
        assert_eq!(COURT_LENGTH - 47.0, 47.0);
        assert_eq!(COURT_WIDTH - 25.0, 25.0);
    }

    #[test]
    fn eval_chunks_do_not_overlap() {
        let games = small_league(11);
        let cfg = SequenceConfig::default();
        let (seqs, _warnings) = build_eval_set(&games[..1], 4, &cfg);
        assert_eq!(seqs.len(), 4);
        let span = cfg.window_span();
        for pair in seqs.windows(2) {
            assert!(pair[0].start_frame + span <= pair[1].start_frame + 1);
            assert!(pair[0].start_frame + span - 1 < pair[1].start_frame + span);
        }
        // ranges pairwise disjoint
        for i in 0..seqs.len() {
            for j in i + 1..seqs.len() {
                let (a, b) = (&seqs[i], &seqs[j]);
                let a_range = a.start_frame..a.start_frame + span;
                assert!(!a_range.contains(&b.start_frame));
            }
        }
    }

    #[test]
    fn eval_short_game_warns_and_shrinks() {
        let games = small_league(13);
        let cfg = SequenceConfig::default();
        // a 650-frame game fits at most 6 disjoint 101-frame windows
        let (seqs, warnings) = build_eval_set(&games[..1], 50, &cfg);
        assert!(seqs.len() <= 6);
        assert!(warnings.iter().any(|w| w.contains("too short")));
    }

    #[test]
    fn chunk_arithmetic_matches_protocol() {
        // 32 games at target 1000 -> ceil(1000/32) = 32 chunks per game
        assert_eq!(1000usize.div_ceil(32), 32);
    }

    #[test]
    fn splits_are_disjoint_and_cover() {
        let games = small_league(17);
        let (train, val, test) = split_games(&games).unwrap();
        assert_eq!(train.len() + val.len() + test.len(), games.len());
        assert!(!train.is_empty() && !val.is_empty() && !test.is_empty());
        let ids = |gs: &[GameRecord]| {
            gs.iter().map(|g| g.game_id.clone()).collect::<std::collections::HashSet<_>>()
        };
        let (a, b, c) = (ids(train), ids(val), ids(test));
        assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        assert!(split_games(&games[..2]).is_err());
    }

    #[test]
    fn paper_scale_split_proportions() {
        // 631 games -> 569 / 30 / 32
        let n = 631usize;
        let n_test = ((n as f64 * 0.05).ceil() as usize).max(1);
        let n_val = (((n - n_test) as f64 * 0.05).ceil() as usize).max(1);
        assert_eq!((n - n_test - n_val, n_val, n_test), (569, 30, 32));
    }

    #[test]
    fn shuffled_player_order_same_semantics() {
        let games = small_league(19);
        let mut shuffled = games.clone();
        for frame in &mut shuffled[0].frames {
            frame.players.reverse();
        }
        let cfg = SequenceConfig::default();
        let a = extract_window(&games[0], 40, &cfg).unwrap();
        let b = extract_window(&shuffled[0], 40, &cfg).unwrap();
        // slot order differs but per-agent content is identical
        for (slot_b, id) in b.agent_ids.iter().enumerate() {
            let slot_a = a.agent_ids.iter().position(|x| x == id).unwrap();
            for t in 0..=a.t_steps() {
                assert_eq!(a.player_pos(t, slot_a), b.player_pos(t, slot_b));
            }
            for t in 0..a.t_steps() {
                assert_eq!(a.player_label(t, slot_a), b.player_label(t, slot_b));
                assert_eq!(a.frontcourt(t, slot_a), b.frontcourt(t, slot_b));
            }
        }
    }

    #[test]
    fn truncation_and_single_player_views() {
        let games = small_league(23);
        let cfg = SequenceConfig { rotate_prob: 0.0, ..SequenceConfig::default() };
        let seq =
            sample_training_sequence(&games, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let short = seq.truncated(1);
        assert_eq!(short.t_steps(), 1);
        assert_eq!(short.player_label(0, 3), seq.player_label(0, 3));
        assert!(short.labels_consistent(&cfg));

        let solo = seq.single_player_view(4);
        assert_eq!(solo.players(), 1);
        assert_eq!(solo.entities(), 1);
        assert!(!solo.has_ball());
        assert_eq!(solo.agent_ids[0], seq.agent_ids[4]);
        assert_eq!(solo.player_label(7, 0), seq.player_label(7, 4));
        assert!(solo.labels_consistent(&cfg));
    }
}
