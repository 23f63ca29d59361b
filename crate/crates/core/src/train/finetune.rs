use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::metrics::mean_task_auc;
use super::report::{EpochRecord, TrainReport};
use crate::autodiff::{Adam, AdamConfig, Tape};
use crate::error::{Error, Result};
use crate::gnn::{GnnModel, Mode, PreparedGraph};
use crate::graph::LabeledGraph;
use crate::hash::fnv1a;
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fold {
    Train,
    Valid,
    Test,
}

/// Instrumentation for label reads during fine-tuning.
pub trait LabelObserver {
    fn label_read(&mut self, fold: Fold, graph: usize);

    /// Called once, after model selection and before test labels are read.
    fn final_evaluation(&mut self) {}
}

pub struct NoopObserver;

impl LabelObserver for NoopObserver {
    fn label_read(&mut self, _: Fold, _: usize) {}
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded random 80/10/10 split; validation and test get at least one graph.
pub fn split_indices(n: usize, seed: u64) -> Result<Split> {
    if n < 3 {
        return Err(Error::InvalidConfig(format!("cannot split {n} graphs three ways")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, "finetune.split"));
    let tenth = (libm::round(n as f64 * 0.1) as usize).max(1);
    let test = order.split_off(n - tenth);
    let valid = order.split_off(n - 2 * tenth);
    Ok(Split {
        train: order,
        valid,
        test,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            epochs: 100,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

struct Labels<'a, O: LabelObserver + ?Sized> {
    graphs: &'a [LabeledGraph],
    observer: &'a mut O,
}

impl<O: LabelObserver + ?Sized> Labels<'_, O> {
    fn read(&mut self, fold: Fold, g: usize) -> &[Option<u8>] {
        self.observer.label_read(fold, g);
        self.graphs[g].graph_labels().expect("checked on entry")
    }
}

fn fold_auc<O: LabelObserver + ?Sized>(
    model: &GnnModel,
    prepared: &[PreparedGraph],
    labels: &mut Labels<'_, O>,
    fold: Fold,
    idx: &[usize],
) -> Result<Option<f64>> {
    let scores = idx
        .iter()
        .map(|&g| model.classify_prepared(&prepared[g]))
        .collect::<Result<Vec<_>>>()?;
    let ys: Vec<Vec<Option<u8>>> = idx.iter().map(|&g| labels.read(fold, g).to_vec()).collect();
    let ys: Vec<&[Option<u8>]> = ys.iter().map(Vec::as_slice).collect();
    match mean_task_auc(&scores, &ys) {
        Ok(a) => Ok(Some(a)),
        Err(Error::AucUndefined) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Supervised fine-tuning with masked mean binary cross-entropy.
///
/// Parameters from the epoch with the best validation AUC (or the initial
/// ones if no epoch improves on them) are restored before the test fold is
/// scored. When validation AUC is undefined every epoch, the last epoch wins.
pub fn finetune<O: LabelObserver + ?Sized>(
    graphs: &[LabeledGraph],
    split: &Split,
    model: &mut GnnModel,
    cfg: &FinetuneConfig,
    observer: &mut O,
) -> Result<TrainReport> {
    if cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
    }
    let mut tasks = None;
    let mut any_label = false;
    for g in graphs {
        let l = g.graph_labels().ok_or(Error::MissingGraphLabels)?;
        any_label |= l.iter().any(Option::is_some);
        match tasks {
            None => tasks = Some(l.len()),
            Some(t) if t != l.len() => {
                return Err(Error::TaskCountMismatch {
                    expected: t,
                    found: l.len(),
                })
            }
            _ => {}
        }
    }
    let tasks = tasks.ok_or(Error::EmptyCorpus)?;
    if !any_label || tasks == 0 {
        return Err(Error::MissingGraphLabels);
    }
    for &i in split.train.iter().chain(&split.valid).chain(&split.test) {
        if i >= graphs.len() {
            return Err(Error::IndexOutOfRange {
                op: "finetune split",
                index: i,
                len: graphs.len(),
            });
        }
    }
    if model.head_tasks() != Some(tasks) {
        model.add_head(tasks, &mut rng_for(cfg.seed, "finetune.head"))?;
    }

    let hash = fnv1a(format!("{cfg:?}|{:?}|{split:?}", model.config()).as_bytes());
    let mut report = TrainReport::new("finetune", cfg.seed, hash);
    let prepared = graphs.iter().map(|g| model.prepare(g)).collect::<Result<Vec<_>>>()?;
    let mut labels = Labels { graphs, observer };

    let dropout = model.config().dropout;
    let mut adam = Adam::new(cfg.adam);
    let mut shuffle_rng = rng_for(cfg.seed, "finetune.shuffle");
    let mut dropout_rng = rng_for(cfg.seed, "finetune.dropout");
    let mut train = split.train.clone();
    let mut best: Option<(f64, usize)> = None;
    let mut best_params = model.params().clone();

    for epoch in 1..=cfg.epochs {
        train.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut used, mut skipped) = (0.0, 0usize, 0usize);
        for batch in train.chunks(cfg.batch_size) {
            let mut targets = Vec::with_capacity(batch.len() * tasks);
            let mut mask = Vec::with_capacity(batch.len() * tasks);
            for &g in batch {
                for &l in labels.read(Fold::Train, g) {
                    targets.push(f64::from(l.unwrap_or(0)));
                    mask.push(l.is_some());
                }
            }
            if !mask.iter().any(|&m| m) {
                skipped += 1;
                continue;
            }
            let mut tape = Tape::new();
            let vars = model.params().bind(&mut tape);
            let mut mode = Mode::Train {
                dropout,
                rng: &mut dropout_rng,
            };
            let mut rows = Vec::with_capacity(batch.len());
            for &g in batch {
                let hg = model.forward_graph(&mut tape, &vars, &prepared[g], &mut mode)?;
                rows.push(model.forward_logits(&mut tape, &vars, hg)?);
            }
            let logits = tape.concat(&rows, 0)?;
            let loss = tape.bce_with_logits(logits, &targets, &mask)?;
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

        let train_auc = fold_auc(model, &prepared, &mut labels, Fold::Train, &split.train)?;
        let valid_auc = fold_auc(model, &prepared, &mut labels, Fold::Valid, &split.valid)?;
        let improved = match (valid_auc, best) {
            (Some(v), Some((b, _))) => v > b,
            (Some(_), None) => true,
            (None, _) => best.is_none() && epoch == cfg.epochs,
        };
        if improved {
            best = valid_auc.map(|v| (v, epoch));
            best_params = model.params().clone();
            report.best_epoch = Some(epoch);
        }
        report.epochs.push(EpochRecord {
            epoch,
            loss: if used == 0 { 0.0 } else { loss_sum / used as f64 },
            skipped_batches: skipped,
            mgs: None,
            train_auc,
            valid_auc,
        });
    }

    *model.params_mut() = best_params;
    labels.observer.final_evaluation();
    report.test_auc = fold_auc(model, &prepared, &mut labels, Fold::Test, &split.test)?;
    if report.test_auc.is_none() {
        log::warn!("test AUC undefined: test fold labels contain a single class");
    }
    Ok(report)
}
