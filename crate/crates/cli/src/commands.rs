//! Command implementations.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use courtformer_core::data::{
    build_eval_set, ingest_game, split_games, write_game, GameRecord, PlaySequence,
    SyntheticLeagueConfig,
};
use courtformer_core::harness::{
    ablation_report_csv, epoch_log_csv, evaluate, run_ablations, single_frame_eval,
    speed_benchmark, swap_player_identities, train as train_model, Metrics,
};
use courtformer_core::model::{load_transformer, save_transformer};
use courtformer_core::{
    GraphRecurrentModel, ModelConfig, MultiEntityTransformer, SequenceConfig, Task,
};

use crate::{resolve_seed, CliError, ConfigArgs, RunConfig, SequenceSpec};

fn apply_sets(cfg: &mut RunConfig, sets: &[String]) -> Result<(), CliError> {
    for s in sets {
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set needs KEY=VALUE, got `{s}`")))?;
        cfg.set(key.trim(), value.trim())?;
    }
    Ok(())
}

fn resolve_run_config(args: &ConfigArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(args.config.as_ref())?;
    apply_sets(&mut cfg, &args.sets)?;
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(data_dir) = &args.data_dir {
        cfg.data_dir = Some(data_dir.clone());
    }
    cfg.train.seed = resolve_seed(args.seed, cfg.seed_explicit, cfg.train.seed);
    Ok(cfg)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn load_games(dir: &Path) -> Result<Vec<GameRecord>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("cannot read data dir {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Data(format!("no .txt game files in {}", dir.display())));
    }
    let mut games = Vec::with_capacity(paths.len());
    for p in paths {
        let report = ingest_game(&p)?;
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        games.push(report.record);
    }
    Ok(games)
}

fn data_dir_of(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.data_dir
        .clone()
        .ok_or_else(|| CliError::Usage("no data_dir configured (key `data_dir` or --data-dir)".into()))
}

fn split_of<'a>(
    games: &'a [GameRecord],
    split: &str,
) -> Result<&'a [GameRecord], CliError> {
    let (train, val, test) = split_games(games)?;
    match split {
        "train" => Ok(train),
        "val" => Ok(val),
        "test" => Ok(test),
        other => Err(CliError::Usage(format!("unknown split `{other}` (train|val|test)"))),
    }
}

fn eval_set_of(
    games: &[GameRecord],
    split: &str,
    target: usize,
    seq_cfg: &SequenceConfig,
) -> Result<Vec<PlaySequence>, CliError> {
    let subset = split_of(games, split)?;
    let (seqs, warnings) = build_eval_set(subset, target, seq_cfg);
    for w in warnings {
        eprintln!("warning: {w}");
    }
    if seqs.is_empty() {
        return Err(CliError::Data(format!("split `{split}` produced no evaluation sequences")));
    }
    Ok(seqs)
}

fn metrics_csv(split: &str, mode: &str, m: &Metrics) -> String {
    format!(
        "split,mode,sequences,predictions,mean_nll,pp\n{},{},{},{},{},{}\n",
        split, mode, m.sequences, m.predictions, m.mean_nll, m.perplexity
    )
}

pub fn synth(
    config: Option<PathBuf>,
    sets: Vec<String>,
    seed: Option<u64>,
    out: PathBuf,
) -> Result<(), CliError> {
    let mut seed_explicit = false;
    let mut league = match &config {
        None => SyntheticLeagueConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", p.display())))?;
            seed_explicit = text
                .lines()
                .filter_map(|l| l.split('#').next().unwrap_or("").split_once('='))
                .any(|(k, _)| k.trim() == "seed");
            SyntheticLeagueConfig::parse(&text)?
        }
    };
    for s in &sets {
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set needs KEY=VALUE, got `{s}`")))?;
        league.set(key.trim(), value.trim())?;
        seed_explicit |= key.trim() == "seed";
    }
    league.seed = resolve_seed(seed, seed_explicit, league.seed);

    let games = courtformer_core::data::generate_synthetic_league(&league)?;
    std::fs::create_dir_all(&out)?;
    if games.is_empty() {
        eprintln!("warning: games = 0, nothing generated");
    }
    let mut frames = 0usize;
    for g in &games {
        frames += g.frames.len();
        write_game(g, &out.join(format!("{}.txt", g.game_id)))?;
    }
    write_file(&out, "synth.resolved.cfg", &league.render())?;
    println!(
        "wrote {} games ({} frames, league of {}) to {}",
        games.len(),
        frames,
        league.league_size,
        out.display()
    );
    Ok(())
}

pub fn ingest_check(files: Vec<PathBuf>) -> Result<(), CliError> {
    if files.is_empty() {
        return Err(CliError::Usage("ingest-check needs at least one file".into()));
    }
    for path in files {
        let report = ingest_game(&path)?;
        println!(
            "{}: game {} ok, {} frames kept, {} warnings",
            path.display(),
            report.record.game_id,
            report.record.frames.len(),
            report.warnings.len()
        );
        for w in report.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(())
}

pub fn train(args: ConfigArgs) -> Result<(), CliError> {
    let cfg = resolve_run_config(&args)?;
    let games = load_games(&data_dir_of(&cfg)?)?;
    let (train_games, val_games, _) = split_games(&games)?;
    let (val_set, warnings) = build_eval_set(val_games, cfg.eval_target, &cfg.seq);
    for w in warnings {
        eprintln!("warning: {w}");
    }

    let model = MultiEntityTransformer::<f32>::new(
        cfg.model.clone(),
        &mut ChaCha8Rng::seed_from_u64(cfg.train.seed ^ 0x6d6f64),
    )?;
    println!(
        "training {} parameters on {} games ({} validation sequences)",
        model.count_parameters(),
        train_games.len(),
        val_set.len()
    );
    let outcome = train_model(&model, train_games, &val_set, &cfg.seq, &cfg.train)?;

    std::fs::create_dir_all(&cfg.out_dir)?;
    save_transformer(&model, &cfg.out_dir.join("checkpoint.ckpt"))?;
    write_file(&cfg.out_dir, "metrics.csv", &epoch_log_csv(&outcome.log))?;
    write_file(&cfg.out_dir, "train.resolved.cfg", &cfg.render())?;
    println!(
        "best validation NLL {} (PP {}) at epoch {}; checkpoint and logs in {}",
        outcome.best_val.mean_nll,
        outcome.best_val.perplexity,
        outcome.best_epoch,
        cfg.out_dir.display()
    );
    Ok(())
}

pub fn eval(
    checkpoint: PathBuf,
    spec: SequenceSpec,
    single_frame: bool,
    swap_players: bool,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let model = load_transformer(&checkpoint)?;
    let seq_cfg = SequenceConfig::default();
    let games = load_games(&spec.data_dir)?;
    let mut seqs = eval_set_of(&games, &spec.split, spec.eval_target, &seq_cfg)?;

    let seed = resolve_seed(seed, false, 0);
    let mut mode = String::from("full");
    if swap_players {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        seqs = swap_player_identities(&seqs, model.config().league_size, &mut rng);
        mode = "swap-players".into();
    }
    let metrics = if single_frame {
        mode = if swap_players { "swap-players+single-frame".into() } else { "single-frame".into() };
        single_frame_eval(&model, &seqs)?
    } else {
        evaluate(&model, &seqs)?
    };

    println!(
        "{} [{}]: {} sequences, {} predictions, mean NLL {}, PP {}",
        spec.split, mode, metrics.sequences, metrics.predictions, metrics.mean_nll, metrics.perplexity
    );
    if let Some(dir) = out {
        write_file(&dir, "eval.csv", &metrics_csv(&spec.split, &mode, &metrics))?;
        let mut resolved = RunConfig {
            model: model.config().clone(),
            data_dir: Some(spec.data_dir.clone()),
            out_dir: dir.clone(),
            eval_target: spec.eval_target,
            ..RunConfig::default()
        };
        resolved.train.seed = seed;
        write_file(&dir, "eval.resolved.cfg", &resolved.render())?;
    }
    Ok(())
}

pub fn ablate(args: ConfigArgs) -> Result<(), CliError> {
    let cfg = resolve_run_config(&args)?;
    let games = load_games(&data_dir_of(&cfg)?)?;
    let (train_games, val_games, test_games) = split_games(&games)?;
    let (val_set, _) = build_eval_set(val_games, cfg.eval_target, &cfg.seq);
    let (test_set, _) = build_eval_set(test_games, cfg.eval_target, &cfg.seq);
    if val_set.is_empty() || test_set.is_empty() {
        return Err(CliError::Data("empty evaluation split".into()));
    }

    let arms = run_ablations(
        train_games,
        &val_set,
        &test_set,
        &cfg.model,
        &cfg.seq,
        &cfg.train,
        true,
    )?;
    let csv = ablation_report_csv(&arms);
    print!("{csv}");
    write_file(&cfg.out_dir, "ablation.csv", &csv)?;
    write_file(&cfg.out_dir, "ablate.resolved.cfg", &cfg.render())?;
    Ok(())
}

pub fn bench(args: ConfigArgs, epochs: usize, samples_per_epoch: usize) -> Result<(), CliError> {
    let cfg = resolve_run_config(&args)?;
    let games = load_games(&data_dir_of(&cfg)?)?;
    let b2v_cfg = ModelConfig { task: Task::Players, ..cfg.model.clone() };
    let grnn_cfg = b2v_cfg.paired_grnn();
    let b2v = MultiEntityTransformer::<f32>::new(
        b2v_cfg,
        &mut ChaCha8Rng::seed_from_u64(cfg.train.seed ^ 0x6d6f64),
    )?;
    let grnn = GraphRecurrentModel::<f32>::new(
        grnn_cfg,
        &mut ChaCha8Rng::seed_from_u64(cfg.train.seed ^ 0x677272),
    )?;
    let report = speed_benchmark(
        &b2v,
        &grnn,
        &games,
        &cfg.seq,
        samples_per_epoch,
        epochs,
        cfg.train.seed,
    )?;
    let csv = format!(
        "model,params,seconds_per_epoch\ntransformer,{},{}\ngrnn,{},{}\n",
        b2v.count_parameters(),
        report.transformer_spe,
        grnn.count_parameters(),
        report.grnn_spe
    );
    print!("{csv}");
    write_file(&cfg.out_dir, "bench.csv", &csv)?;
    write_file(&cfg.out_dir, "bench.resolved.cfg", &cfg.render())?;
    Ok(())
}

pub fn embeddings(
    checkpoint: PathBuf,
    query_id: Option<u32>,
    k: usize,
    out: PathBuf,
) -> Result<(), CliError> {
    let model = load_transformer(&checkpoint)?;
    let table = model.player_embeddings().ok_or_else(|| {
        CliError::Usage(
            "checkpoint was trained without player identity; embeddings are unavailable".into(),
        )
    })?;

    let dim = table.ncols();
    let mut csv = String::from("agent_id");
    for d in 0..dim {
        csv.push_str(&format!(",dim_{d}"));
    }
    csv.push('\n');
    for (id, row) in table.rows().into_iter().enumerate() {
        csv.push_str(&id.to_string());
        for v in row {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    write_file(&out, "embeddings.csv", &csv)?;
    println!("wrote {} embeddings of dim {} to {}", table.nrows(), dim, out.display());

    if let Some(query) = query_id {
        if query as usize >= table.nrows() {
            return Err(CliError::Usage(format!(
                "query id {query} out of range for league of {}",
                table.nrows()
            )));
        }
        let q = table.row(query as usize);
        let mut dists: Vec<(u32, f64)> = table
            .rows()
            .into_iter()
            .enumerate()
            .filter(|(id, _)| *id != query as usize)
            .map(|(id, row)| {
                let d: f32 = q
                    .iter()
                    .zip(row.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f32>()
                    .sqrt();
                (id as u32, d as f64)
            })
            .collect();
        dists.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        let mut csv = String::from("rank,agent_id,distance\n");
        for (rank, (id, d)) in dists.iter().take(k).enumerate() {
            csv.push_str(&format!("{},{},{}\n", rank + 1, id, d));
        }
        write_file(&out, "neighbors.csv", &csv)?;
        println!("wrote {} nearest neighbors of agent {query}", k.min(dists.len()));
    }
    Ok(())
}

pub fn attention(
    checkpoint: PathBuf,
    spec: SequenceSpec,
    layer: usize,
    head: usize,
    ref_step: usize,
    full_matrix: bool,
    out: PathBuf,
) -> Result<(), CliError> {
    let model = load_transformer(&checkpoint)?;
    let games = load_games(&spec.data_dir)?;
    let seq_cfg = SequenceConfig::default();
    let seqs = eval_set_of(&games, &spec.split, spec.eval_target, &seq_cfg)?;
    let seq = seqs.get(spec.index).ok_or_else(|| {
        CliError::Usage(format!("index {} out of range ({} sequences)", spec.index, seqs.len()))
    })?;

    let capture = model.attention_capture(seq, layer, head, ref_step)?;
    let mut csv = String::from("agent_slot,temporal_sum\n");
    for (slot, sum) in capture.player_sums.iter().enumerate() {
        csv.push_str(&format!("{slot},{sum}\n"));
    }
    csv.push_str(&format!("ball,{}\n", capture.ball_sum));
    write_file(&out, "attention.csv", &csv)?;

    if full_matrix {
        let mut dump = String::new();
        for row in capture.weights.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            dump.push_str(&cells.join(","));
            dump.push('\n');
        }
        write_file(&out, "attention_matrix.csv", &dump)?;
    }
    println!(
        "layer {layer} head {head} ref step {ref_step}: ball temporal sum {}, outputs in {}",
        capture.ball_sum,
        out.display()
    );
    Ok(())
}

pub fn traj_dist(
    checkpoint: PathBuf,
    spec: SequenceSpec,
    step: usize,
    agent_slot: usize,
    out: PathBuf,
) -> Result<(), CliError> {
    let model = load_transformer(&checkpoint)?;
    let games = load_games(&spec.data_dir)?;
    let seq_cfg = SequenceConfig::default();
    let seqs = eval_set_of(&games, &spec.split, spec.eval_target, &seq_cfg)?;
    let seq = seqs.get(spec.index).ok_or_else(|| {
        CliError::Usage(format!("index {} out of range ({} sequences)", spec.index, seqs.len()))
    })?;

    if agent_slot >= seq.players() {
        return Err(CliError::Usage(format!(
            "agent slot {agent_slot} is not a player slot (0..{}); the ball has no player-bin distribution",
            seq.players() - 1
        )));
    }
    if step >= seq.t_steps() {
        return Err(CliError::Usage(format!(
            "step {step} out of range ({} steps)",
            seq.t_steps()
        )));
    }
    let probs = model.task_p_probs(seq)?;
    let mut csv = String::from("bin_label,probability\n");
    for label in 0..probs.dim().2 {
        csv.push_str(&format!("{},{}\n", label, probs[(step, agent_slot, label)]));
    }
    write_file(&out, "traj_dist.csv", &csv)?;
    println!(
        "trajectory-bin distribution for slot {agent_slot} at step {step} written to {}",
        out.display()
    );
    Ok(())
}
