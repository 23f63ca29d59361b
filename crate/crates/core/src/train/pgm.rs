use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::report::{EpochRecord, TrainReport};
use crate::autodiff::{Adam, AdamConfig, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::gnn::{GnnConfig, GnnModel, Mode, PreparedGraph};
use crate::graph::LabeledGraph;
use crate::hash::fnv1a;
use crate::seed::{derive_seed, rng, rng_for};
use crate::similarity::{
    average_ranks, cosine_similarity, pair_set_for, sample_pairs, spearman, structural_similarity, Fingerprint,
    GraphEncoder, SimilarityPairSet, StructuralMetric,
};

/// How the rank correlation is made differentiable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Surrogate {
    /// Pearson correlation between pairwise-sigmoid soft ranks of the
    /// embedding similarities and the exact ranks of the structural ones.
    #[default]
    SoftRank,
    /// Pearson correlation of the raw similarity vectors.
    Pearson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    /// `factor × IQR` of the batch's embedding similarities.
    IqrScaled(f64),
    Fixed(f64),
}

impl Default for Temperature {
    fn default() -> Self {
        Temperature::IqrScaled(0.05)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgmConfig {
    pub surrogate: Surrogate,
    pub temperature: Temperature,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub metric: StructuralMetric,
    /// Fraction of graphs held out for per-epoch MGS tracking.
    pub heldout_fraction: f64,
    pub heldout_pairs: usize,
    /// Dropout between encoder layers while pre-training.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for PgmConfig {
    fn default() -> Self {
        PgmConfig {
            surrogate: Surrogate::SoftRank,
            temperature: Temperature::default(),
            batch_size: 32,
            epochs: 100,
            adam: AdamConfig::default(),
            metric: StructuralMetric::Tanimoto,
            heldout_fraction: 0.1,
            heldout_pairs: 1000,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl PgmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 3 {
            return Err(Error::InvalidConfig("batch_size must be >= 3".into()));
        }
        match self.temperature {
            Temperature::IqrScaled(f) | Temperature::Fixed(f) if !(f > 0.0) => {
                return Err(Error::InvalidConfig(format!("temperature must be positive, got {f}")));
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.heldout_fraction) {
            return Err(Error::InvalidConfig("heldout_fraction must be in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn config_hash(&self, model: &GnnConfig) -> u64 {
        fnv1a(format!("{self:?}|{model:?}").as_bytes())
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Soft-rank temperature for a batch. A zero IQR falls back to the full
/// spread, and a constant batch to 1.
pub fn soft_rank_temperature(values: &[f64], temperature: Temperature) -> f64 {
    match temperature {
        Temperature::Fixed(t) => t,
        Temperature::IqrScaled(factor) => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            if sorted.is_empty() {
                return 1.0;
            }
            let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
            let spread = sorted[sorted.len() - 1] - sorted[0];
            if iqr > 0.0 {
                factor * iqr
            } else if spread > 0.0 {
                factor * spread
            } else {
                1.0
            }
        }
    }
}

/// Negative (surrogate) rank correlation between the embedding similarities
/// `embedding` (a tape vector) and fixed `structural` similarities.
///
/// Returns `Ok(None)` when the batch carries no rank information (constant
/// structural or embedding similarities); such batches are skipped.
pub fn pgm_loss(tape: &mut Tape, embedding: Var, structural: &[f64], cfg: &PgmConfig) -> Result<Option<Var>> {
    let len = tape.value(embedding).len();
    if len != structural.len() {
        return Err(Error::LengthMismatch {
            left: len,
            right: structural.len(),
        });
    }
    if len < 3 {
        return Err(Error::InvalidConfig(format!("pgm_loss needs at least 3 pairs, got {len}")));
    }
    if structural.iter().all(|&s| s == structural[0]) {
        log::warn!("skipping batch: constant structural similarities (zero rank variance)");
        return Ok(None);
    }
    let shape = [len];
    let corr = match cfg.surrogate {
        Surrogate::SoftRank => {
            let tau = soft_rank_temperature(tape.value(embedding).data(), cfg.temperature);
            let soft = tape.soft_rank(embedding, tau)?;
            let target = tape.constant(Tensor::new(&shape, average_ranks(structural))?);
            tape.pearson(soft, target)
        }
        Surrogate::Pearson => {
            let target = tape.constant(Tensor::new(&shape, structural.to_vec())?);
            tape.pearson(embedding, target)
        }
    };
    match corr {
        Ok(c) => Ok(Some(tape.scale(c, -1.0))),
        Err(Error::ZeroVariance) => {
            log::warn!("skipping batch: constant embedding similarities (zero rank variance)");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Cosine similarities of all `i < j` pairs of `[1, d]` graph embeddings, as
/// a `[pairs, 1]` tape vector with its index pairs.
pub fn batch_pair_similarities(tape: &mut Tape, embeddings: &[Var]) -> Result<(Var, Vec<(usize, usize)>)> {
    let b = embeddings.len();
    let z = tape.concat(embeddings, 0)?;
    let norms = tape.l2_norm(z)?;
    let inv = tape.recip(norms);
    let zn = tape.mul_col(z, inv)?;
    let znt = tape.transpose(zn)?;
    let gram = tape.matmul(zn, znt)?;
    let mut pairs = Vec::with_capacity(b * b.saturating_sub(1) / 2);
    let mut flat = Vec::with_capacity(pairs.capacity());
    for i in 0..b {
        for j in (i + 1)..b {
            pairs.push((i, j));
            flat.push(i * b + j);
        }
    }
    Ok((tape.gather(gram, &flat)?, pairs))
}

struct Heldout {
    graphs: Vec<usize>,
    /// Pairs as positions into `graphs`.
    pairs: Vec<(usize, usize)>,
    structural: Vec<f64>,
}

impl Heldout {
    fn mgs(&self, model: &GnnModel, prepared: &[PreparedGraph]) -> Result<Option<f64>> {
        if self.pairs.len() < 2 {
            return Ok(None);
        }
        let emb = self
            .graphs
            .iter()
            .map(|&g| model.embed_prepared(&prepared[g]))
            .collect::<Result<Vec<_>>>()?;
        let mut sims = Vec::with_capacity(self.pairs.len());
        for &(a, b) in &self.pairs {
            match cosine_similarity(&emb[a], &emb[b]) {
                Ok(c) => sims.push(c),
                Err(Error::ZeroNorm) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        match spearman(&self.structural, &sims) {
            Ok(r) => Ok(Some(r)),
            Err(Error::ZeroVariance) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Self-supervised pre-training of `model` on `graphs` with precomputed
/// `fingerprints`.
///
/// A seeded `heldout_fraction` of the graphs is set aside; a fixed sample
/// of their pairs scores MGS before training and after each epoch. The rest
/// is shuffled every epoch into batches, and all within-batch pairs enter
/// the loss.
pub fn pretrain(
    graphs: &[LabeledGraph],
    fingerprints: &[Fingerprint],
    model: &mut GnnModel,
    cfg: &PgmConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if graphs.len() != fingerprints.len() {
        return Err(Error::LengthMismatch {
            left: graphs.len(),
            right: fingerprints.len(),
        });
    }
    if graphs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut report = TrainReport::new("pretrain", cfg.seed, cfg.config_hash(model.config()));
    let prepared = graphs.iter().map(|g| model.prepare(g)).collect::<Result<Vec<_>>>()?;

    let mut order: Vec<usize> = (0..graphs.len()).collect();
    order.shuffle(&mut rng_for(cfg.seed, "pgm.split"));
    let n_held = if cfg.heldout_fraction > 0.0 {
        (libm::round(graphs.len() as f64 * cfg.heldout_fraction) as usize).max(3)
    } else {
        0
    };
    if n_held + 3 > graphs.len() && n_held > 0 {
        return Err(Error::InvalidConfig(format!(
            "{} graphs are too few to hold out {n_held} and still train",
            graphs.len()
        )));
    }
    let (held, train) = order.split_at(n_held);
    let mut train = train.to_vec();

    let heldout = {
        let available = n_held * n_held.saturating_sub(1) / 2;
        let pairs = sample_pairs(n_held, cfg.heldout_pairs.min(available), &mut rng_for(cfg.seed, "pgm.heldout"))?;
        let structural = pairs
            .iter()
            .map(|&(a, b)| structural_similarity(&fingerprints[held[a]], &fingerprints[held[b]], cfg.metric))
            .collect::<Result<Vec<_>>>()?;
        Heldout {
            graphs: held.to_vec(),
            pairs,
            structural,
        }
    };
    report.initial_mgs = heldout.mgs(model, &prepared)?;

    let mut adam = Adam::new(cfg.adam);
    let mut shuffle_rng = rng_for(cfg.seed, "pgm.shuffle");
    let mut dropout_rng = rng_for(cfg.seed, "pgm.dropout");
    for epoch in 1..=cfg.epochs {
        train.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut used, mut skipped) = (0.0, 0usize, 0usize);
        for batch in train.chunks(cfg.batch_size) {
            if batch.len() < 3 {
                skipped += 1;
                continue;
            }
            let mut tape = Tape::new();
            let vars = model.params().bind(&mut tape);
            let mut mode = if cfg.dropout > 0.0 {
                Mode::Train {
                    dropout: cfg.dropout,
                    rng: &mut dropout_rng,
                }
            } else {
                Mode::Eval
            };
            let mut embs = Vec::with_capacity(batch.len());
            for &g in batch {
                embs.push(model.forward_graph(&mut tape, &vars, &prepared[g], &mut mode)?);
            }
            let (sims, pairs) = batch_pair_similarities(&mut tape, &embs)?;
            let structural = pairs
                .iter()
                .map(|&(a, b)| structural_similarity(&fingerprints[batch[a]], &fingerprints[batch[b]], cfg.metric))
                .collect::<Result<Vec<_>>>()?;
            let Some(loss) = pgm_loss(&mut tape, sims, &structural, cfg)? else {
                skipped += 1;
                continue;
            };
            let value = tape.value(loss).item();
            let batch_ids = || batch.iter().map(|&g| String::from(graphs[g].id())).collect();
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { batch: batch_ids() });
            }
            let grads = tape.backward(loss)?;
            let grads = model.params().collect_grads(&grads, &vars);
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { batch: batch_ids() });
            }
            adam.step(model.params_mut(), &grads)?;
            loss_sum += value;
            used += 1;
        }
        let mgs = heldout.mgs(model, &prepared)?;
        log::debug!("pretrain epoch {epoch}: loss {:.6} mgs {mgs:?}", loss_sum / used.max(1) as f64);
        report.epochs.push(EpochRecord {
            epoch,
            loss: if used == 0 { 0.0 } else { loss_sum / used as f64 },
            skipped_batches: skipped,
            mgs,
            train_auc: None,
            valid_auc: None,
        });
    }
    Ok(report)
}

/// MGS of `encoder` over `n_pairs` pairs sampled with `seed`, together with
/// the pair set behind it.
pub fn evaluate_mgs<E: GraphEncoder + ?Sized>(
    graphs: &[LabeledGraph],
    encoder: &E,
    fingerprints: &[Fingerprint],
    metric: StructuralMetric,
    n_pairs: usize,
    seed: u64,
) -> Result<(f64, SimilarityPairSet)> {
    if fingerprints.len() != graphs.len() {
        return Err(Error::LengthMismatch {
            left: fingerprints.len(),
            right: graphs.len(),
        });
    }
    let pairs = sample_pairs(graphs.len(), n_pairs, &mut rng(derive_seed(seed, "mgs.pairs")))?;
    let set = pair_set_for(graphs, encoder, fingerprints, metric, pairs)?;
    Ok((crate::similarity::mgs(&set)?, set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn loss_of(e: &[f64], s: &[f64], cfg: &PgmConfig) -> f64 {
        let mut tape = Tape::new();
        let v = tape.leaf(Tensor::new(&[e.len()], e.to_vec()).unwrap(), true);
        let l = pgm_loss(&mut tape, v, s, cfg).unwrap().unwrap();
        tape.value(l).item()
    }

    #[test]
    fn pearson_mode_affine_examples() {
        let cfg = PgmConfig {
            surrogate: Surrogate::Pearson,
            ..PgmConfig::default()
        };
        let s = [0.1, 0.5, 0.3, 0.9];
        let e: Vec<f64> = s.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((loss_of(&e, &s, &cfg) + 1.0).abs() < 1e-12);
        let anti: Vec<f64> = s.iter().map(|x| -x).collect();
        assert!((loss_of(&anti, &s, &cfg) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn soft_rank_mode_aligned_reaches_minus_one() {
        let cfg = PgmConfig {
            temperature: Temperature::Fixed(1e-4),
            ..PgmConfig::default()
        };
        let s = [0.2, 0.9, 0.4, 0.1, 0.7];
        let e = [0.0, 0.8, 0.3, -0.5, 0.6];
        assert!((loss_of(&e, &s, &cfg) + 1.0).abs() < 1e-3);
    }

    #[test]
    fn constant_structural_batch_is_skipped() {
        let mut tape = Tape::new();
        let v = tape.leaf(Tensor::new(&[3], vec![0.1, 0.2, 0.3]).unwrap(), true);
        assert!(pgm_loss(&mut tape, v, &[0.5; 3], &PgmConfig::default()).unwrap().is_none());
    }

    #[test]
    fn too_few_pairs() {
        let mut tape = Tape::new();
        let v = tape.leaf(Tensor::new(&[2], vec![0.1, 0.2]).unwrap(), true);
        assert!(pgm_loss(&mut tape, v, &[0.5, 0.1], &PgmConfig::default()).is_err());
    }

    #[test]
    fn temperature_from_iqr() {
        let t = soft_rank_temperature(&[0.0, 1.0, 2.0, 3.0, 4.0], Temperature::IqrScaled(0.05));
        assert!((t - 0.1).abs() < 1e-15);
        assert_eq!(soft_rank_temperature(&[1.0; 4], Temperature::IqrScaled(0.05)), 1.0);
    }
}
