//! Assignment solver timings on dense random cost matrices.

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use airtrack_core::{assign_2d, HypothesisMatrix};

fn random_hypotheses(n_tracks: usize, n_dets: usize, seed: u64) -> HypothesisMatrix {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let distances = (0..n_tracks)
        .map(|_| (0..n_dets).map(|_| Some(rng.gen_range(0.0..30.0))).collect())
        .collect();
    HypothesisMatrix {
        distances,
        n_detections: n_dets,
        gate: 30.0,
        transforms: vec![Default::default(); n_tracks],
        transforms_computed: 0,
    }
}

fn assignment(c: &mut Criterion) {
    let mut group = c.benchmark_group("assign_2d");
    for n in [5usize, 20, 50, 100] {
        let hyp = random_hypotheses(n, n, 42);
        group.bench_function(format!("{n}x{n}"), |b| {
            b.iter(|| assign_2d(&hyp).unwrap());
        });
    }
    group.finish();
}

criterion_group!(benches, assignment);
criterion_main!(benches);
