use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use num_bigint::BigInt;
use polyfree::harmonic::{fourier_grid, fourier_point, gauss_sum_sieved};
use polyfree::increment::increment_step;
use polyfree::intersective::padic_roots;
use polyfree::search::{exact_table, forbidden_values, greedy_avoiding};
use polyfree::{AuxBuilder, AuxiliaryContext, ForbiddenMode, Freq, IncrementConfig, IntPoly, SieveTable};

fn sextic() -> IntPoly {
    let f = |c: i64| IntPoly::from_i64(&[-c, 0, 1]);
    f(13).mul(&f(17)).mul(&f(221))
}

fn squares(x: u64) -> Vec<u64> {
    (1..).map(|n| n * n).take_while(|&v| v <= x).collect()
}

fn polynomials(c: &mut Criterion) {
    let h = sextic();
    let n = BigInt::from(10u64).pow(30);
    c.bench_function("eval sextic at 10^30", |b| b.iter(|| black_box(&h).eval(black_box(&n))));
    c.bench_function("padic roots of sextic, p = 2, precision 40", |b| {
        b.iter(|| padic_roots(black_box(&h), 2, 40).unwrap())
    });
}

fn sieves(c: &mut Criterion) {
    let ctx = AuxiliaryContext::identity(sextic());
    c.bench_function("sieve table, sextic, U = 20", |b| b.iter(|| SieveTable::new(black_box(&ctx), 20.0).unwrap()));
    let sq = AuxiliaryContext::identity(IntPoly::from_i64(&[0, 0, 1]));
    c.bench_function("sieved gauss sum, x^2, q = 997, U = 10", |b| {
        b.iter(|| gauss_sum_sieved(black_box(&sq), 1, 997, 10.0).unwrap())
    });
}

fn fourier(c: &mut Criterion) {
    let a = greedy_avoiding(&squares(100_000), 100_000);
    c.bench_function("fourier point of a greedy set in [10^5]", |b| {
        b.iter(|| fourier_point(black_box(&a), Freq::rational(1, 7)))
    });
    c.bench_function("fourier grid of a greedy set in [10^5], 2^18 points", |b| {
        b.iter(|| fourier_grid(black_box(&a), 1 << 18).unwrap())
    });
}

fn search(c: &mut Criterion) {
    c.bench_function("greedy square-avoiding set in [10^5]", |b| {
        b.iter(|| greedy_avoiding(black_box(&squares(100_000)), 100_000))
    });
    let sq = squares(120);
    let mut g = c.benchmark_group("exact");
    g.sample_size(10);
    g.bench_function("exact table of squares to 120", |b| b.iter(|| exact_table(black_box(&sq), 120).unwrap()));
    g.finish();
}

fn increment(c: &mut Criterion) {
    let builder = AuxBuilder::new(IntPoly::from_i64(&[0, 0, 1])).unwrap();
    let ctx = builder.context(1).unwrap();
    let a = greedy_avoiding(&forbidden_values(&ctx, 5000, ForbiddenMode::All).unwrap(), 5000);
    let cfg = IncrementConfig::default();
    let mut g = c.benchmark_group("increment");
    g.sample_size(10);
    g.bench_function("one step on a greedy set in [5000]", |b| {
        b.iter_batched(|| a.clone(), |a| increment_step(&a, &builder, 1, &cfg).unwrap(), BatchSize::SmallInput)
    });
    g.finish();
}

criterion_group!(benches, polynomials, sieves, fourier, search, increment);
criterion_main!(benches);
