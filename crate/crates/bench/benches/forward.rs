//! Forward/backward timing of the two models on one desk-scale sequence.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use courtformer_core::data::{generate_synthetic_league, sample_training_sequence};
use courtformer_core::{
    GraphRecurrentModel, ModelConfig, MultiEntityTransformer, PlaySequence, SequenceConfig,
    SyntheticLeagueConfig, Tape, Task,
};

fn sequence() -> PlaySequence {
    let league = SyntheticLeagueConfig {
        games: 1,
        frames_per_game: 400,
        ..SyntheticLeagueConfig::default()
    };
    let games = generate_synthetic_league(&league).unwrap();
    let cfg = SequenceConfig::default();
    sample_training_sequence(&games, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
}

fn bench_transformer(c: &mut Criterion) {
    let seq = sequence();
    let model: MultiEntityTransformer<f32> = MultiEntityTransformer::new(
        ModelConfig::desk(Task::Players),
        &mut ChaCha8Rng::seed_from_u64(2),
    )
    .unwrap();

    c.bench_function("transformer_forward", |b| {
        b.iter(|| {
            let tape = Tape::new();
            let loss = model.loss(&tape, black_box(&seq)).unwrap();
            black_box(tape.scalar(loss))
        })
    });

    c.bench_function("transformer_forward_backward", |b| {
        b.iter(|| {
            for p in model.parameters() {
                p.zero_grad();
            }
            let tape = Tape::new();
            let loss = model.loss(&tape, black_box(&seq)).unwrap();
            tape.backward(loss).unwrap();
        })
    });
}

fn bench_grnn(c: &mut Criterion) {
    let seq = sequence();
    let cfg = ModelConfig::desk(Task::Players).paired_grnn();
    let model: GraphRecurrentModel<f32> =
        GraphRecurrentModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();

    c.bench_function("grnn_forward_backward", |b| {
        b.iter(|| {
            for p in model.parameters() {
                p.zero_grad();
            }
            let tape = Tape::new();
            let loss = model.loss_task_p(&tape, black_box(&seq)).unwrap();
            tape.backward(loss).unwrap();
        })
    });
}

criterion_group!(benches, bench_transformer, bench_grnn);
criterion_main!(benches);
