//! Similarity kernels, rank statistics and the MGS score.
//!
//! MGS is the Spearman correlation between the structural similarity of a
//! sample of graph pairs (from their fingerprints) and the cosine similarity
//! of their embeddings.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fingerprint::BitFingerprint;
use crate::graph::LabeledGraph;
use crate::spectral::SpectralFingerprint;

/// `|a ∧ b| / (|a| + |b| − |a ∧ b|)`; two empty fingerprints score 1.
pub fn tanimoto(a: &BitFingerprint, b: &BitFingerprint) -> Result<f64> {
    let both = a.and_count(b)?;
    let union = a.count_ones() + b.count_ones() - both;
    Ok(if union == 0 {
        1.0
    } else {
        both as f64 / union as f64
    })
}

/// `2|a ∧ b| / (|a| + |b|)`; two empty fingerprints score 1.
pub fn dice(a: &BitFingerprint, b: &BitFingerprint) -> Result<f64> {
    let both = a.and_count(b)?;
    let total = a.count_ones() + b.count_ones();
    Ok(if total == 0 {
        1.0
    } else {
        2.0 * both as f64 / total as f64
    })
}

/// Squared Euclidean distance between two eigenvalue fingerprints.
pub fn spectral_distance(a: &SpectralFingerprint, b: &SpectralFingerprint) -> Result<f64> {
    if a.k() != b.k() {
        return Err(Error::LengthMismatch {
            left: a.k(),
            right: b.k(),
        });
    }
    Ok(a.eigenvalues()
        .iter()
        .zip(b.eigenvalues())
        .map(|(x, y)| (x - y) * (x - y))
        .sum())
}

/// Cosine of the angle between `a` and `b`, rounded to 12 decimals and
/// clamped to `[-1, 1]`. Rounding keeps values that are equal in exact
/// arithmetic (identical or rescaled embeddings) tied, so rank statistics
/// do not depend on last-bit rounding noise.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(a.iter().map(|x| x * x).sum());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let c = libm::round(dot / (na * nb) * 1e12) / 1e12;
    Ok(c.clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the positions they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end share their mean.
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::ZeroVariance);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Aligned structural and embedding similarities of sampled graph pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityPairSet {
    pub structural: Vec<f64>,
    pub embedding: Vec<f64>,
    /// Corpus indices of each pair.
    pub pairs: Vec<(usize, usize)>,
    /// Graph ids of each pair.
    pub pair_ids: Vec<(String, String)>,
}

impl SimilarityPairSet {
    pub fn len(&self) -> usize {
        self.structural.len()
    }

    pub fn is_empty(&self) -> bool {
        self.structural.is_empty()
    }
}

pub fn mgs(pairs: &SimilarityPairSet) -> Result<f64> {
    if pairs.structural.len() != pairs.embedding.len() {
        return Err(Error::LengthMismatch {
            left: pairs.structural.len(),
            right: pairs.embedding.len(),
        });
    }
    spearman(&pairs.structural, &pairs.embedding)
}

/// Per-graph structural summary.
#[derive(Debug, Clone, PartialEq)]
pub enum Fingerprint {
    Bits(BitFingerprint),
    Spectral(SpectralFingerprint),
}

/// Kernel used to compare two fingerprints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StructuralMetric {
    #[default]
    Tanimoto,
    Dice,
    /// Negated squared spectral distance, so larger means more similar.
    NegSpectralDistance,
}

pub fn structural_similarity(a: &Fingerprint, b: &Fingerprint, metric: StructuralMetric) -> Result<f64> {
    match (a, b, metric) {
        (Fingerprint::Bits(x), Fingerprint::Bits(y), StructuralMetric::Tanimoto) => tanimoto(x, y),
        (Fingerprint::Bits(x), Fingerprint::Bits(y), StructuralMetric::Dice) => dice(x, y),
        (Fingerprint::Spectral(x), Fingerprint::Spectral(y), StructuralMetric::NegSpectralDistance) => {
            Ok(-spectral_distance(x, y)?)
        }
        _ => Err(Error::FingerprintMismatch(alloc::format!(
            "metric {metric:?} does not apply to these fingerprints"
        ))),
    }
}

/// Anything that maps a graph to a fixed-size embedding.
pub trait GraphEncoder {
    fn embed(&self, g: &LabeledGraph) -> Result<Vec<f64>>;
}

impl<F> GraphEncoder for F
where
    F: Fn(&LabeledGraph) -> Result<Vec<f64>>,
{
    fn embed(&self, g: &LabeledGraph) -> Result<Vec<f64>> {
        self(g)
    }
}

/// Decodes a linear index into the `k`-th pair `(i, j)`, `i < j`, of `n`
/// items in row-major upper-triangle order.
fn pair_from_index(mut k: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
        i += 1;
    }
}

/// `n_pairs` distinct unordered pairs of `0..n`, uniformly without
/// replacement, sorted.
pub fn sample_pairs<R: Rng + ?Sized>(n: usize, n_pairs: usize, rng: &mut R) -> Result<Vec<(usize, usize)>> {
    let available = n * n.saturating_sub(1) / 2;
    if n_pairs > available {
        return Err(Error::TooManyPairs {
            requested: n_pairs,
            available,
        });
    }
    let mut picks = index::sample(rng, available, n_pairs).into_vec();
    picks.sort_unstable();
    Ok(picks.into_iter().map(|k| pair_from_index(k, n)).collect())
}

/// Samples pairs over `graphs` and fills both similarity columns.
pub fn build_pair_set<E, R>(
    graphs: &[LabeledGraph],
    encoder: &E,
    fingerprints: &[Fingerprint],
    metric: StructuralMetric,
    n_pairs: usize,
    rng: &mut R,
) -> Result<SimilarityPairSet>
where
    E: GraphEncoder + ?Sized,
    R: Rng + ?Sized,
{
    if fingerprints.len() != graphs.len() {
        return Err(Error::LengthMismatch {
            left: fingerprints.len(),
            right: graphs.len(),
        });
    }
    let pairs = sample_pairs(graphs.len(), n_pairs, rng)?;
    pair_set_for(graphs, encoder, fingerprints, metric, pairs)
}

/// Fills both similarity columns for fixed `pairs`.
pub fn pair_set_for<E>(
    graphs: &[LabeledGraph],
    encoder: &E,
    fingerprints: &[Fingerprint],
    metric: StructuralMetric,
    pairs: Vec<(usize, usize)>,
) -> Result<SimilarityPairSet>
where
    E: GraphEncoder + ?Sized,
{
    let mut embeddings: Vec<Option<Vec<f64>>> = vec![None; graphs.len()];
    for &(i, j) in &pairs {
        for k in [i, j] {
            if embeddings[k].is_none() {
                embeddings[k] = Some(encoder.embed(&graphs[k])?);
            }
        }
    }
    let mut structural = Vec::with_capacity(pairs.len());
    let mut embedding = Vec::with_capacity(pairs.len());
    let mut pair_ids = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        structural.push(structural_similarity(&fingerprints[i], &fingerprints[j], metric)?);
        let (ei, ej) = (embeddings[i].as_ref(), embeddings[j].as_ref());
        embedding.push(cosine_similarity(ei.expect("embedded"), ej.expect("embedded"))?);
        pair_ids.push((graphs[i].id().into(), graphs[j].id().into()));
    }
    Ok(SimilarityPairSet {
        structural,
        embedding,
        pairs,
        pair_ids,
    })
}
