//! The flat `key = value` run configuration: one namespace covering the
//! model architecture, the training schedule, the sampling protocol, and
//! paths. Unknown keys are rejected; every command writes the fully
//! resolved configuration next to its outputs.

use std::path::PathBuf;

use courtformer_core::bins::{BinGrid2D, BinGrid3D};
use courtformer_core::{ModelConfig, SequenceConfig, Task, TrainConfig};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seq: SequenceConfig,
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub eval_target: usize,
    /// True once `seed` was set explicitly (file or override); the
    /// `COURTFORMER_SEED` fallback only applies while false.
    pub seed_explicit: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::desk(Task::Players),
            train: TrainConfig::desk(),
            seq: SequenceConfig::default(),
            data_dir: None,
            out_dir: PathBuf::from("."),
            eval_target: 36,
            seed_explicit: false,
        }
    }
}

fn usage(msg: String) -> CliError {
    CliError::Usage(msg)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| usage(format!("bad value `{value}` for key `{key}`")))
}

fn parse_widths(key: &str, value: &str) -> Result<[usize; 3], CliError> {
    let parts: Vec<usize> = value
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("bad value `{value}` for key `{key}`")))?;
    if parts.len() != 3 {
        return Err(usage(format!("key `{key}` needs exactly three widths")));
    }
    Ok([parts[0], parts[1], parts[2]])
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (number, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(usage(format!(
                    "config line {}: expected `key = value`, got `{line}`",
                    number + 1
                )));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: Option<&PathBuf>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "d_model" => self.model.d_model = parse_num(key, value)?,
            "heads" => self.model.heads = parse_num(key, value)?,
            "d_ff" => self.model.d_ff = parse_num(key, value)?,
            "layers" => self.model.layers = parse_num(key, value)?,
            "embedding_dim" => self.model.embedding_dim = parse_num(key, value)?,
            "player_mlp" => self.model.player_mlp = parse_widths(key, value)?,
            "ball_mlp" => self.model.ball_mlp = parse_widths(key, value)?,
            "league_size" => self.model.league_size = parse_num(key, value)?,
            "grnn_d_ff" => self.model.grnn_d_ff = parse_num(key, value)?,
            "task" => {
                self.model.task = match value {
                    "players" => Task::Players,
                    "ball" => Task::Ball,
                    "both" => Task::Both,
                    other => return Err(usage(format!("bad task `{other}` (players|ball|both)"))),
                }
            }
            "identity" => self.model.identity = parse_num(key, value)?,
            "player_bins" => {
                let n = parse_num(key, value)?;
                self.model.player_grid = BinGrid2D::new(n, self.model.player_grid.extent())
                    .map_err(|e| usage(e.to_string()))?;
            }
            "player_extent" => {
                let e = parse_num(key, value)?;
                self.model.player_grid = BinGrid2D::new(self.model.player_grid.side(), e)
                    .map_err(|e| usage(e.to_string()))?;
            }
            "ball_bins" => {
                let n = parse_num(key, value)?;
                self.model.ball_grid = BinGrid3D::new(n, self.model.ball_grid.extent())
                    .map_err(|e| usage(e.to_string()))?;
            }
            "ball_extent" => {
                let e = parse_num(key, value)?;
                self.model.ball_grid = BinGrid3D::new(self.model.ball_grid.side(), e)
                    .map_err(|e| usage(e.to_string()))?;
            }
            "samples_per_epoch" => self.train.samples_per_epoch = parse_num(key, value)?,
            "epochs" => self.train.epochs = parse_num(key, value)?,
            "max_seconds" => {
                self.train.max_seconds =
                    if value.is_empty() { None } else { Some(parse_num(key, value)?) }
            }
            "lr" => self.train.lr = parse_num(key, value)?,
            "reduced_lr" => self.train.reduced_lr = parse_num(key, value)?,
            "patience" => self.train.patience = parse_num(key, value)?,
            "batch_size" => self.train.batch_size = parse_num(key, value)?,
            "seed" => {
                self.train.seed = parse_num(key, value)?;
                self.seed_explicit = true;
            }
            "t_steps" => self.seq.t_steps = parse_num(key, value)?,
            "stride" => self.seq.stride = parse_num(key, value)?,
            "rotate_prob" => self.seq.rotate_prob = parse_num(key, value)?,
            "teleport_limit" => self.seq.teleport_limit = parse_num(key, value)?,
            "data_dir" => self.data_dir = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "eval_target" => self.eval_target = parse_num(key, value)?,
            other => return Err(usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Render every effective key so a run can be reproduced from its
    /// resolved config alone.
    pub fn render(&self) -> String {
        let widths = |w: &[usize; 3]| format!("{},{},{}", w[0], w[1], w[2]);
        let mut out = String::new();
        out.push_str("# model\n");
        out.push_str(&format!("d_model = {}\n", self.model.d_model));
        out.push_str(&format!("heads = {}\n", self.model.heads));
        out.push_str(&format!("d_ff = {}\n", self.model.d_ff));
        out.push_str(&format!("layers = {}\n", self.model.layers));
        out.push_str(&format!("embedding_dim = {}\n", self.model.embedding_dim));
        out.push_str(&format!("player_mlp = {}\n", widths(&self.model.player_mlp)));
        out.push_str(&format!("ball_mlp = {}\n", widths(&self.model.ball_mlp)));
        out.push_str(&format!("league_size = {}\n", self.model.league_size));
        out.push_str(&format!("grnn_d_ff = {}\n", self.model.grnn_d_ff));
        out.push_str(&format!(
            "task = {}\n",
            match self.model.task {
                Task::Players => "players",
                Task::Ball => "ball",
                Task::Both => "both",
            }
        ));
        out.push_str(&format!("identity = {}\n", self.model.identity));
        out.push_str(&format!("player_bins = {}\n", self.model.player_grid.side()));
        out.push_str(&format!("player_extent = {}\n", self.model.player_grid.extent()));
        out.push_str(&format!("ball_bins = {}\n", self.model.ball_grid.side()));
        out.push_str(&format!("ball_extent = {}\n", self.model.ball_grid.extent()));
        out.push_str("# training\n");
        out.push_str(&format!("samples_per_epoch = {}\n", self.train.samples_per_epoch));
        out.push_str(&format!("epochs = {}\n", self.train.epochs));
        out.push_str(&format!(
            "max_seconds = {}\n",
            self.train.max_seconds.map(|s| s.to_string()).unwrap_or_default()
        ));
        out.push_str(&format!("lr = {}\n", self.train.lr));
        out.push_str(&format!("reduced_lr = {}\n", self.train.reduced_lr));
        out.push_str(&format!("patience = {}\n", self.train.patience));
        out.push_str(&format!("batch_size = {}\n", self.train.batch_size));
        out.push_str(&format!("seed = {}\n", self.train.seed));
        out.push_str("# sampling\n");
        out.push_str(&format!("t_steps = {}\n", self.seq.t_steps));
        out.push_str(&format!("stride = {}\n", self.seq.stride));
        out.push_str(&format!("rotate_prob = {}\n", self.seq.rotate_prob));
        out.push_str(&format!("teleport_limit = {}\n", self.seq.teleport_limit));
        out.push_str("# io\n");
        if let Some(d) = &self.data_dir {
            out.push_str(&format!("data_dir = {}\n", d.display()));
        }
        out.push_str(&format!("out_dir = {}\n", self.out_dir.display()));
        out.push_str(&format!("eval_target = {}\n", self.eval_target));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_render_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("d_model", "32").unwrap();
        cfg.set("task", "ball").unwrap();
        cfg.set("seed", "9").unwrap();
        let again = RunConfig::parse(&cfg.render()).unwrap();
        assert_eq!(again.model.d_model, 32);
        assert_eq!(again.model.task, Task::Ball);
        assert_eq!(again.train.seed, 9);
        assert!(again.seed_explicit);
        assert_eq!(again.render(), cfg.render());
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let err = RunConfig::parse("dropout = 0.1\n").unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
        let err = RunConfig::default().set("task", "goalie").unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
    }
}
