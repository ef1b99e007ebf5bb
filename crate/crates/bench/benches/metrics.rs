//! OSPA distance timings for growing point-set cardinalities.

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use airtrack_core::metrics::{ospa, OspaParams};

fn random_points(n: usize, rng: &mut impl Rng) -> Vec<DVector<f64>> {
    (0..n)
        .map(|_| DVector::from_vec(vec![rng.gen_range(0.0..1e4), rng.gen_range(0.0..1e4)]))
        .collect()
}

fn ospa_bench(c: &mut Criterion) {
    let params = OspaParams::new(2.0, 100.0).unwrap();
    let mut group = c.benchmark_group("ospa");
    for n in [10usize, 50, 100] {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let xs = random_points(n, &mut rng);
        let ys = random_points(n + 5, &mut rng);
        group.bench_function(format!("{}v{}", n, n + 5), |b| {
            b.iter(|| ospa(&xs, &ys, &params).unwrap());
        });
    }
    group.finish();
}

criterion_group!(benches, ospa_bench);
criterion_main!(benches);
