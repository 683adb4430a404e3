//! Seeded synthetic league generator.
//!
//! Agents carry persistent attributes (home anchor on the court, speed,
//! motion noise, ball attraction) drawn once per league, so identity is
//! learnable across games. Dynamics run at the downsampled 5 Hz step:
//!
//! * player velocity = `normalize(anchor - pos + attraction*(ball - pos))
//!   * speed + N(0, sigma)` per axis, clipped to the court;
//! * the ball tracks its holder (height jitters around 4 ft) and every
//!   `Geometric(pass_hazard)` steps flies to a teammate on a straight
//!   3-step line with a parabolic height arc.
//!
//! The emitted record is 25 Hz: consecutive 5 Hz states are linearly
//! interpolated, so stride-5 downsampling at any offset recovers blends of
//! the simulated steps with displacements bounded by the per-step speeds.
//! Coordinates are quantized to millifeet so the text round trip through
//! the tracking format is lossless.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::format::{
    Frame, GameRecord, HoopSide, PlayerPos, RosterEntry, Team, COURT_LENGTH, COURT_WIDTH,
};
use super::DataError;

#[derive(Debug, Clone)]
pub struct SyntheticLeagueConfig {
    /// Number of agents in the league (`B` for the model's embeddings).
    pub league_size: usize,
    pub games: usize,
    /// 25 Hz frames per game.
    pub frames_per_game: usize,
    pub seed: u64,
    /// Per-5Hz-step probability that the ball holder passes.
    pub pass_hazard: f64,
    /// Cycled over agents: agent `i` uses archetype `i % len`.
    pub archetype_speeds: Vec<f64>,
    pub archetype_noise: Vec<f64>,
    pub archetype_ball_attraction: Vec<f64>,
}

impl Default for SyntheticLeagueConfig {
    fn default() -> Self {
        Self {
            league_size: 40,
            games: 8,
            frames_per_game: 3000,
            seed: 7,
            pass_hazard: 0.08,
            archetype_speeds: vec![0.6, 1.4, 2.4, 3.2],
            archetype_noise: vec![0.15, 0.3, 0.2, 0.25],
            archetype_ball_attraction: vec![0.1, 0.5, 0.9, 0.3],
        }
    }
}

impl SyntheticLeagueConfig {
    /// Parse the flat `key = value` league config format. Unknown keys
    /// are errors; omitted keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut cfg = Self::default();
        for (number, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(DataError::BadConfig(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    number + 1
                )));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), DataError> {
        let bad = |what: &str| DataError::BadConfig(format!("bad {what} value `{value}`"));
        match key {
            "league_size" => self.league_size = value.parse().map_err(|_| bad(key))?,
            "games" => self.games = value.parse().map_err(|_| bad(key))?,
            "frames_per_game" => self.frames_per_game = value.parse().map_err(|_| bad(key))?,
            "seed" => self.seed = value.parse().map_err(|_| bad(key))?,
            "pass_hazard" => self.pass_hazard = value.parse().map_err(|_| bad(key))?,
            "archetype_speeds" => self.archetype_speeds = parse_list(value).ok_or_else(|| bad(key))?,
            "archetype_noise" => self.archetype_noise = parse_list(value).ok_or_else(|| bad(key))?,
            "archetype_ball_attraction" => {
                self.archetype_ball_attraction = parse_list(value).ok_or_else(|| bad(key))?
            }
            other => return Err(DataError::BadConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Render in the same `key = value` format [`Self::parse`] accepts.
    pub fn render(&self) -> String {
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        format!(
            "league_size = {}\ngames = {}\nframes_per_game = {}\nseed = {}\npass_hazard = {}\n\
             archetype_speeds = {}\narchetype_noise = {}\narchetype_ball_attraction = {}\n",
            self.league_size,
            self.games,
            self.frames_per_game,
            self.seed,
            self.pass_hazard,
            list(&self.archetype_speeds),
            list(&self.archetype_noise),
            list(&self.archetype_ball_attraction),
        )
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::BadConfig(m.to_string()));
        if self.league_size < 10 {
            return bad("league_size must be at least 10 (one game needs 10 agents)");
        }
        if self.frames_per_game < 5 {
            return bad("frames_per_game must cover at least one 5 Hz step");
        }
        if !(0.0..1.0).contains(&self.pass_hazard) {
            return bad("pass_hazard must lie in [0, 1)");
        }
        let lens = [
            self.archetype_speeds.len(),
            self.archetype_noise.len(),
            self.archetype_ball_attraction.len(),
        ];
        if lens.contains(&0) || lens.iter().any(|&l| l != lens[0]) {
            return bad("archetype lists must be non-empty and the same length");
        }
        for (&s, &n) in self.archetype_speeds.iter().zip(&self.archetype_noise) {
            // keep per-step displacements inside the 11 ft player bin
            // extent with margin (half-extent 5.5)
            if s + 3.0 * n > 5.0 {
                return bad("archetype speed + 3 sigma must stay below 5 ft per step");
            }
            if s < 0.0 || n < 0.0 {
                return bad("speeds and noise must be non-negative");
            }
        }
        if self.archetype_ball_attraction.iter().any(|&a| a < 0.0) {
            return bad("ball attraction weights must be non-negative");
        }
        Ok(())
    }
}

fn parse_list(value: &str) -> Option<Vec<f64>> {
    value.split(',').map(|p| p.trim().parse().ok()).collect()
}

struct AgentTraits {
    anchor: (f64, f64),
    speed: f64,
    noise: f64,
    attraction: f64,
}

const HELD_HEIGHT: f64 = 4.0;
const FLIGHT_STEPS: usize = 3;
const ARC_HEIGHT: f64 = 4.0;
const MAX_PASS_RANGE: f64 = 20.0;

struct BallState {
    /// Current holder, or the pass target while in flight.
    holder: usize,
    /// Held steps remaining until the next pass.
    countdown: u64,
    /// Flight steps remaining; 0 means held.
    flight_left: usize,
    launch: (f64, f64, f64),
    pos: (f64, f64, f64),
}

fn quantize(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn geometric(p: f64, rng: &mut impl Rng) -> u64 {
    if p <= 0.0 {
        return u64::MAX;
    }
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    (u.ln() / (1.0 - p).ln()).ceil().max(1.0) as u64
}

/// Deterministic under `config.seed`: the same config regenerates the same
/// games byte for byte.
pub fn generate_synthetic_league(
    config: &SyntheticLeagueConfig,
) -> Result<Vec<GameRecord>, DataError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let n_arch = config.archetype_speeds.len();
    let traits: Vec<AgentTraits> = (0..config.league_size)
        .map(|i| AgentTraits {
            anchor: (rng.gen_range(10.0..COURT_LENGTH - 10.0), rng.gen_range(8.0..COURT_WIDTH - 8.0)),
            speed: config.archetype_speeds[i % n_arch],
            noise: config.archetype_noise[i % n_arch],
            attraction: config.archetype_ball_attraction[i % n_arch],
        })
        .collect();

    let mut games = Vec::with_capacity(config.games);
    for gi in 0..config.games {
        games.push(simulate_game(config, &traits, gi, &mut rng));
    }
    Ok(games)
}

fn simulate_game(
    config: &SyntheticLeagueConfig,
    traits: &[AgentTraits],
    game_index: usize,
    rng: &mut ChaCha8Rng,
) -> GameRecord {
    // pick 10 distinct agents: home = first five, away = next five
    let mut ids: Vec<u32> = (0..config.league_size as u32).collect();
    for i in (1..ids.len()).rev() {
        ids.swap(i, rng.gen_range(0..=i));
    }
    let on_court: Vec<u32> = ids[..10].to_vec();
    let home_hoop = if rng.gen_bool(0.5) { HoopSide::Left } else { HoopSide::Right };

    let n_states = (config.frames_per_game - 1) / 5 + 2;
    let mut players: Vec<(f64, f64)> =
        on_court.iter().map(|&id| traits[id as usize].anchor).collect();
    let holder = rng.gen_range(0..10);
    let mut ball = BallState {
        holder,
        countdown: geometric(config.pass_hazard, rng),
        flight_left: 0,
        launch: (0.0, 0.0, 0.0),
        pos: (players[holder].0, players[holder].1, HELD_HEIGHT),
    };

    let mut player_states = Vec::with_capacity(n_states);
    let mut ball_states = Vec::with_capacity(n_states);
    player_states.push(players.clone());
    ball_states.push(ball.pos);

    for _ in 1..n_states {
        step_players(&mut players, traits, &on_court, ball.pos, rng);
        step_ball(&mut ball, &players, traits, &on_court, config.pass_hazard, rng);
        player_states.push(players.clone());
        ball_states.push(ball.pos);
    }

    let frames = emit_frames(config.frames_per_game, &player_states, &ball_states, &on_court);
    let roster = on_court
        .iter()
        .enumerate()
        .map(|(i, &id)| RosterEntry {
            agent_id: id,
            team: if i < 5 { Team::Home } else { Team::Away },
            name: None,
        })
        .collect();

    GameRecord {
        game_id: format!("synth-{game_index:03}"),
        home_team: "HOME".into(),
        away_team: "AWAY".into(),
        roster,
        home_hoop,
        frames,
    }
}

fn step_players(
    players: &mut [(f64, f64)],
    traits: &[AgentTraits],
    on_court: &[u32],
    ball: (f64, f64, f64),
    rng: &mut ChaCha8Rng,
) {
    for (slot, pos) in players.iter_mut().enumerate() {
        let tr = &traits[on_court[slot] as usize];
        let pull = (tr.anchor.0 - pos.0, tr.anchor.1 - pos.1);
        let dir = (
            pull.0 + tr.attraction * (ball.0 - pos.0),
            pull.1 + tr.attraction * (ball.1 - pos.1),
        );
        let norm = (dir.0 * dir.0 + dir.1 * dir.1).sqrt();
        let (mut vx, mut vy) = if norm > 1e-9 {
            (dir.0 / norm * tr.speed, dir.1 / norm * tr.speed)
        } else {
            (0.0, 0.0)
        };
        if tr.noise > 0.0 {
            let normal = Normal::new(0.0, tr.noise).expect("validated sigma");
            vx += normal.sample(rng);
            vy += normal.sample(rng);
        }
        pos.0 = (pos.0 + vx).clamp(0.0, COURT_LENGTH);
        pos.1 = (pos.1 + vy).clamp(0.0, COURT_WIDTH);
    }
}

fn step_ball(
    ball: &mut BallState,
    players: &[(f64, f64)],
    traits: &[AgentTraits],
    on_court: &[u32],
    pass_hazard: f64,
    rng: &mut ChaCha8Rng,
) {
    if ball.flight_left > 0 {
        // homing flight: re-aim at the target's current position so the
        // ball lands exactly on the receiver
        let f = (FLIGHT_STEPS - ball.flight_left + 1) as f64 / FLIGHT_STEPS as f64;
        let to = players[ball.holder];
        ball.pos = (
            ball.launch.0 + (to.0 - ball.launch.0) * f,
            ball.launch.1 + (to.1 - ball.launch.1) * f,
            (ball.launch.2 + (HELD_HEIGHT - ball.launch.2) * f
                + 4.0 * ARC_HEIGHT * f * (1.0 - f))
                .max(0.0),
        );
        ball.flight_left -= 1;
        if ball.flight_left == 0 {
            ball.countdown = geometric(pass_hazard, rng);
        }
        return;
    }

    let holder_pos = players[ball.holder];
    ball.countdown = ball.countdown.saturating_sub(1);
    if ball.countdown == 0 {
        // pass to a teammate, preferring someone within range
        let team = ball.holder / 5;
        let mates: Vec<usize> =
            (team * 5..team * 5 + 5).filter(|&s| s != ball.holder).collect();
        let in_range: Vec<usize> = mates
            .iter()
            .copied()
            .filter(|&s| dist(players[s], holder_pos) <= MAX_PASS_RANGE)
            .collect();
        let target = if in_range.is_empty() {
            *mates
                .iter()
                .min_by(|&&a, &&b| {
                    dist(players[a], holder_pos)
                        .partial_cmp(&dist(players[b], holder_pos))
                        .unwrap()
                })
                .unwrap()
        } else {
            in_range[rng.gen_range(0..in_range.len())]
        };
        ball.launch = ball.pos;
        ball.holder = target;
        ball.flight_left = FLIGHT_STEPS;
        step_ball(ball, players, traits, on_court, pass_hazard, rng);
    } else {
        // held: track the holder; the holder's motion noise doubles as the
        // height jitter so a zero-noise league is exactly stationary
        let sigma = traits[on_court[ball.holder] as usize].noise;
        let z = if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("validated sigma");
            (HELD_HEIGHT + normal.sample(rng)).max(0.0)
        } else {
            HELD_HEIGHT
        };
        ball.pos = (holder_pos.0, holder_pos.1, z);
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn emit_frames(
    frames_per_game: usize,
    player_states: &[Vec<(f64, f64)>],
    ball_states: &[(f64, f64, f64)],
    on_court: &[u32],
) -> Vec<Frame> {
    let mut frames = Vec::with_capacity(frames_per_game);
    for f in 0..frames_per_game {
        let m = f / 5;
        let a = (f % 5) as f64 / 5.0;
        let lerp = |x0: f64, x1: f64| x0 + (x1 - x0) * a;
        let period = (f / 18000) as u8 + 1;
        let in_period = f % 18000;
        let clock = ((720.0 - in_period as f64 * 0.04) * 100.0).round() / 100.0;

        let mut players = [PlayerPos { id: 0, x: 0.0, y: 0.0 }; 10];
        for slot in 0..10 {
            let p0 = player_states[m][slot];
            let p1 = player_states[m + 1][slot];
            players[slot] = PlayerPos {
                id: on_court[slot],
                x: quantize(lerp(p0.0, p1.0)),
                y: quantize(lerp(p0.1, p1.1)),
            };
        }
        let b0 = ball_states[m];
        let b1 = ball_states[m + 1];
        frames.push(Frame {
            period,
            clock,
            ball: [
                quantize(lerp(b0.0, b1.0)),
                quantize(lerp(b0.1, b1.1)),
                quantize(lerp(b0.2, b1.2)).max(0.0),
            ],
            players,
        });
    }
    frames
}
