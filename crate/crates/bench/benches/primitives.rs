//! Microbenchmarks: mask construction, binning, masked softmax.

use std::rc::Rc;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use courtformer_core::{BinGrid2D, BinGrid3D, EntityMask, Tape};

fn bench_mask(c: &mut Criterion) {
    c.bench_function("causal_mask_t20_k11", |b| {
        b.iter(|| EntityMask::causal(black_box(20), black_box(11)).unwrap())
    });
}

fn bench_binning(c: &mut Criterion) {
    let g2 = BinGrid2D::players_default();
    let g3 = BinGrid3D::ball_default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let points: Vec<(f64, f64, f64)> = (0..1024)
        .map(|_| (rng.gen_range(-7.0..7.0), rng.gen_range(-7.0..7.0), rng.gen_range(-10.0..10.0)))
        .collect();

    c.bench_function("bin2d_1024", |b| {
        b.iter(|| {
            let mut acc = 0u32;
            for &(x, y, _) in &points {
                acc = acc.wrapping_add(g2.bin(black_box(x), black_box(y)).unwrap());
            }
            acc
        })
    });
    c.bench_function("bin3d_1024", |b| {
        b.iter(|| {
            let mut acc = 0u32;
            for &(x, y, z) in &points {
                acc = acc.wrapping_add(g3.bin(black_box(x), black_box(y), black_box(z)).unwrap());
            }
            acc
        })
    });
}

fn bench_masked_softmax(c: &mut Criterion) {
    let mask = EntityMask::causal(20, 11).unwrap();
    let shared = Rc::new(mask.matrix().clone());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let logits =
        ndarray::Array2::from_shape_fn((220, 220), |_| rng.gen_range(-2.0f32..2.0));

    c.bench_function("masked_softmax_220", |b| {
        b.iter(|| {
            let tape: Tape<f32> = Tape::new();
            let x = tape.leaf(black_box(logits.clone()));
            let p = tape.masked_softmax(x, Rc::clone(&shared)).unwrap();
            black_box(tape.value(p))
        })
    });
}

criterion_group!(benches, bench_mask, bench_binning, bench_masked_softmax);
criterion_main!(benches);
