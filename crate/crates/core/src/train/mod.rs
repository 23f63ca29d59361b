//! Pre-training with the rank-correlation objective, fine-tuning, metrics
//! and synthetic corpora.

mod finetune;
mod metrics;
mod pgm;
mod report;
mod synthetic;

pub use finetune::{finetune, split_indices, Fold, FinetuneConfig, LabelObserver, NoopObserver, Split};
pub use metrics::{mean_task_auc, roc_auc};
pub use pgm::{
    batch_pair_similarities, evaluate_mgs, pgm_loss, pretrain, soft_rank_temperature, PgmConfig, Surrogate, Temperature,
};
pub use report::{EpochRecord, TrainReport};
pub use synthetic::{assign_graph_labels, generate_synthetic, LabelRule, SyntheticSpec};
