mod common;

use std::f64::consts::PI;

use common::{coefficients, trig_polynomial};
use muhs_core::besov::{lp_norm, max_block_index, sobolev_norm, BesovIndex, DyadicCutoffs};
use muhs_core::spectral::{derivative, mean, PeriodicGrid, SpectralField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(
    grid: &PeriodicGrid,
    rng: &mut ChaCha8Rng,
    degree: usize,
    mean: f64,
) -> SpectralField {
    let c: Vec<(f64, f64)> = (1..=degree)
        .map(|b| {
            let w = 1.0 / (b * b) as f64;
            (
                w * rng.random_range(-1.0..1.0),
                w * rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    trig_polynomial(grid, mean, &c)
}

#[test]
fn partition_of_unity_on_dense_samples() {
    let cut = DyadicCutoffs::new();
    let half = 128.0;
    for i in 0..10_000 {
        let xi = -half + 2.0 * half * i as f64 / 9_999.0;
        let total = cut.chi(xi)
            + (0..12)
                .map(|q| cut.phi(xi * (-q as f64).exp2()))
                .sum::<f64>();
        assert!((total - 1.0).abs() <= 1e-10, "xi = {xi}: {total}");
    }
}

#[test]
fn sine_besov_norm_matches_block_sum() {
    let g = PeriodicGrid::new(64).unwrap();
    let cut = DyadicCutoffs::new();
    let f = g.sample(|x| (2.0 * PI * x).sin());
    for s in [0.5, 1.0, 2.0] {
        // Each block of sin is m·sin with m the block symbol at β = 1, so its
        // L² norm is |m|/√2.
        let direct = (-1..=max_block_index(&g))
            .map(|q| {
                let m = if q == -1 {
                    cut.chi(1.0)
                } else {
                    cut.phi((-q as f64).exp2())
                };
                ((q as f64 * s).exp2() * m.abs() / 2f64.sqrt()).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        let norm = cut.besov_norm(&f, BesovIndex::new(s, 2.0, 2.0).unwrap());
        assert!((norm - direct).abs() < 1e-13, "s = {s}");
    }
}

#[test]
fn constant_norm_is_weighted_low_block() {
    let g = PeriodicGrid::new(32).unwrap();
    let cut = DyadicCutoffs::new();
    for (c, s, p, r) in [
        (2.5, 1.0, 2.0, 2.0),
        (-0.7, 2.6, 1.0, f64::INFINITY),
        (4.0, -1.5, f64::INFINITY, 1.0),
    ] {
        let norm = cut.besov_norm(&g.constant(c), BesovIndex::new(s, p, r).unwrap());
        assert!((norm - (-s).exp2() * c.abs()).abs() < 1e-12);
    }
}

#[test]
fn block_bounds_and_equivalence_constants() {
    let g = PeriodicGrid::new(128).unwrap();
    let cut = DyadicCutoffs::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut block_ratio: f64 = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..100 {
        let m = rng.random_range(-1.0..1.0);
        let f = random_field(&g, &mut rng, 40, m);
        for p in [1.0, 2.0, f64::INFINITY] {
            let base = lp_norm(&f, p);
            for q in -1..=max_block_index(&g) {
                block_ratio = block_ratio.max(lp_norm(&cut.block(q, &f), p) / base);
            }
        }
        let ratio = sobolev_norm(&f, 2.0) / cut.besov_norm(&f, BesovIndex::sobolev(2.0));
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    println!("block ratio {block_ratio:.4}, sobolev/besov in [{lo:.4}, {hi:.4}]");
    assert!(block_ratio <= 2.0);
    // Per shell the weights differ by (2πβ/2^q)^s with 2^{-q}β in [3/4, 8/3].
    assert!(lo >= (1.5 * PI).powi(2) / 2.0 && hi <= (16.0 * PI / 3.0).powi(2));
}

#[test]
fn moser_ratio_is_bounded() {
    let g = PeriodicGrid::new(128).unwrap();
    let cut = DyadicCutoffs::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for s in [1.6, 2.0, 2.6] {
        let idx = BesovIndex::sobolev(s);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let (a, b) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let f = random_field(&g, &mut rng, 20, a);
            let h = random_field(&g, &mut rng, 20, b);
            let lhs = cut.besov_norm(&(&f * &h), idx);
            let rhs =
                cut.besov_norm(&f, idx) * h.sup_norm() + cut.besov_norm(&h, idx) * f.sup_norm();
            worst = worst.max(lhs / rhs);
        }
        println!("s = {s}: max Moser ratio {worst:.4}");
        assert!(worst <= 2.0);
    }
}

#[test]
fn mean_zero_sup_bound() {
    let g = PeriodicGrid::new(128).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let degree = rng.random_range(1..30);
        let f = random_field(&g, &mut rng, degree, 0.0);
        let interp = f.spectrum().interpolant();
        let peak = (0..2048)
            .map(|i| interp.eval(i as f64 / 2048.0).powi(2))
            .fold(0.0, f64::max);
        let energy = mean(&derivative(&f, 1).map(|v| v * v));
        assert!(peak <= energy / 12.0 * (1.0 + 1e-12));
    }
    let sine = g.sample(|x| (2.0 * PI * x).sin());
    let energy = mean(&derivative(&sine, 1).map(|v| v * v));
    assert!((energy / 12.0 - PI * PI / 6.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 100,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn blocks_sum_to_field(c in coefficients(31), m in -2.0..2.0f64) {
        let g = PeriodicGrid::new(64).unwrap();
        let cut = DyadicCutoffs::new();
        let f = trig_polynomial(&g, m, &c);
        let mut total = g.zeros();
        for q in -1..=max_block_index(&g) {
            total = &total + &cut.block(q, &f);
        }
        prop_assert!((&total - &f).sup_norm() < 1e-10);
    }

    #[test]
    fn distant_blocks_are_orthogonal(c in coefficients(31), p in -1i32..=6, q in -1i32..=6) {
        prop_assume!((p - q).abs() >= 2);
        let g = PeriodicGrid::new(64).unwrap();
        let cut = DyadicCutoffs::new();
        let f = trig_polynomial(&g, 0.5, &c);
        let both = cut.block(p, &cut.block(q, &f));
        prop_assert!(lp_norm(&both, 2.0) <= 1e-10 * lp_norm(&f, 2.0));
    }

    #[test]
    fn interpolation_inequality(
        c in coefficients(31),
        s1 in -1.0..3.0f64,
        s2 in -1.0..3.0f64,
        theta in 0.0..=1.0f64,
        p in prop::sample::select(vec![1.0, 2.0, 4.0, f64::INFINITY]),
        r in prop::sample::select(vec![1.0, 2.0, 3.0, f64::INFINITY]),
    ) {
        let g = PeriodicGrid::new(64).unwrap();
        let cut = DyadicCutoffs::new();
        let f = trig_polynomial(&g, 0.2, &c);
        let norm = |s: f64| cut.besov_norm(&f, BesovIndex::new(s, p, r).unwrap());
        let mid = norm(theta * s1 + (1.0 - theta) * s2);
        let bound = norm(s1).powf(theta) * norm(s2).powf(1.0 - theta);
        prop_assert!(mid <= bound + 1e-9 * bound.max(1.0));
    }

    #[test]
    fn embedding_is_monotone(c in coefficients(31), s1 in -1.0..3.0f64, gap in 0.0..2.0f64) {
        let g = PeriodicGrid::new(64).unwrap();
        let cut = DyadicCutoffs::new();
        let f = trig_polynomial(&g, -0.4, &c);
        let s2 = s1 + gap;
        let low = cut.besov_norm(&f, BesovIndex::new(s1, 2.0, 2.0).unwrap());
        let high = cut.besov_norm(&f, BesovIndex::new(s2, 2.0, 2.0).unwrap());
        prop_assert!(low <= gap.exp2() * high * (1.0 + 1e-12));
    }
}
