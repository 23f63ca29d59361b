mod common;

use common::random_graph;
use graphmgs_core::fingerprint::{BitFingerprint, BitScheme};
use graphmgs_core::similarity::{
    build_pair_set, cosine_similarity, dice, mgs, spearman, spectral_distance, tanimoto, Fingerprint,
    StructuralMetric,
};
use graphmgs_core::spectral::SpectralFingerprint;
use graphmgs_core::{seed, LabeledGraph, Result};
use proptest::prelude::*;
use rand::Rng;

const SCHEME: BitScheme = BitScheme::Morgan { radius: 2 };

fn random_bits(rng: &mut seed::Rng, nbits: usize, density: f64) -> BitFingerprint {
    let on: Vec<usize> = (0..nbits).filter(|_| rng.random::<f64>() < density).collect();
    BitFingerprint::from_bits(nbits, SCHEME, &on).unwrap()
}

fn random_vec(rng: &mut seed::Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
}

proptest! {
    #![proptest_config(common::cases(200))]

    #[test]
    fn kernels_are_symmetric(s in any::<u64>(), d in 1usize..12) {
        let mut rng = seed::rng(s);
        let (a, b) = (random_bits(&mut rng, 256, 0.2), random_bits(&mut rng, 256, 0.2));
        prop_assert_eq!(tanimoto(&a, &b).unwrap(), tanimoto(&b, &a).unwrap());
        prop_assert_eq!(dice(&a, &b).unwrap(), dice(&b, &a).unwrap());
        let (x, y) = (random_vec(&mut rng, d), random_vec(&mut rng, d));
        prop_assert_eq!(cosine_similarity(&x, &y).unwrap(), cosine_similarity(&y, &x).unwrap());
        let (p, q) = (
            SpectralFingerprint::from_eigenvalues(x.iter().map(|v| v.abs()).collect(), 8),
            SpectralFingerprint::from_eigenvalues(y.iter().map(|v| v.abs()).collect(), 8),
        );
        prop_assert_eq!(spectral_distance(&p, &q).unwrap(), spectral_distance(&q, &p).unwrap());
    }

    #[test]
    fn spearman_ignores_increasing_transforms(s in any::<u64>(), n in 3usize..40) {
        let mut rng = seed::rng(s);
        let (x, y) = (random_vec(&mut rng, n), random_vec(&mut rng, n));
        let r = spearman(&x, &y).unwrap();
        let maps: [fn(f64) -> f64; 3] = [f64::exp, |v| v * v * v, |v| 2.5 * v - 7.0];
        for f in maps {
            let fx: Vec<f64> = x.iter().map(|&v| f(v)).collect();
            let fy: Vec<f64> = y.iter().map(|&v| f(v)).collect();
            prop_assert!((spearman(&fx, &y).unwrap() - r).abs() < 1e-12);
            prop_assert!((spearman(&x, &fy).unwrap() - r).abs() < 1e-12);
        }
        prop_assert!((spearman(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert!((spearman(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
    }
}

#[test]
fn tanimoto_dice_mapping() {
    let mut rng = seed::rng(42);
    for i in 0..10_000 {
        let density = 0.02 + 0.5 * (i % 17) as f64 / 17.0;
        let (a, b) = (random_bits(&mut rng, 128, density), random_bits(&mut rng, 128, density));
        let t = tanimoto(&a, &b).unwrap();
        let d = dice(&a, &b).unwrap();
        assert!((t - d / (2.0 - d)).abs() < 1e-12);
        assert!(t <= d + 1e-15);
    }
}

#[test]
fn spearman_with_ties_matches_hand_computation() {
    // Ranks of x: [1, 2.5, 2.5, 4]; y is already ranked.
    let x = [1.0, 5.0, 5.0, 9.0];
    let y = [1.0, 2.0, 3.0, 4.0];
    let (rx, ry) = ([1.0, 2.5, 2.5, 4.0], [1.0, 2.0, 3.0, 4.0]);
    let mean = 2.5;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mean) * (b - mean)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mean) * (a - mean)).sum();
    let vy: f64 = ry.iter().map(|a| (a - mean) * (a - mean)).sum();
    assert!((spearman(&x, &y).unwrap() - cov / (vx * vy).sqrt()).abs() < 1e-15);
}

#[test]
fn mgs_ignores_embedding_scale() {
    let graphs: Vec<LabeledGraph> = (0..30).map(|s| random_graph(s, 4, 10, 0.3, &[3])).collect();
    let fps: Vec<Fingerprint> = {
        let mut rng = seed::rng(7);
        graphs.iter().map(|_| Fingerprint::Bits(random_bits(&mut rng, 256, 0.2))).collect()
    };
    let encoder = |g: &LabeledGraph| -> Result<Vec<f64>> {
        let n = g.node_count() as f64;
        Ok(vec![n, g.edge_count() as f64 - n, g.triangle_count() as f64 + 0.5])
    };
    let base = build_pair_set(&graphs, &encoder, &fps, StructuralMetric::Tanimoto, 200, &mut seed::rng(1)).unwrap();
    for c in [1e-3, 0.5, 17.0, 1e6] {
        let scaled = |g: &LabeledGraph| -> Result<Vec<f64>> { Ok(encoder(g)?.iter().map(|v| v * c).collect()) };
        let ps = build_pair_set(&graphs, &scaled, &fps, StructuralMetric::Tanimoto, 200, &mut seed::rng(1)).unwrap();
        assert_eq!(ps.pairs, base.pairs);
        assert!((mgs(&ps).unwrap() - mgs(&base).unwrap()).abs() < 1e-12);
    }
}
