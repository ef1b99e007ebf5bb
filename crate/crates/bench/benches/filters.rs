//! Single measurement-update timings for each filter in the family.

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use airtrack_bench::{bench_model, bench_state};
use airtrack_core::{update, FilterKind};

fn filter_updates(c: &mut Criterion) {
    let state = bench_state();
    let model = bench_model();
    let z = DVector::from_vec(vec![5000.0, 0.6435]);
    let kinds = [
        FilterKind::Ekf,
        FilterKind::ukf_defaults(),
        FilterKind::Ckf,
        FilterKind::Sif { iterations: 10 },
        FilterKind::Sif { iterations: 100 },
    ];
    let mut group = c.benchmark_group("update");
    for kind in kinds {
        let name = match kind {
            FilterKind::Sif { iterations } => format!("sif_{iterations}"),
            _ => kind.label().to_lowercase(),
        };
        group.bench_function(name, |b| {
            let mut rng = ChaCha12Rng::seed_from_u64(7);
            b.iter(|| update(&state, &model, &z, &kind, &mut rng).unwrap());
        });
    }
    group.finish();
}

criterion_group!(benches, filter_updates);
criterion_main!(benches);
