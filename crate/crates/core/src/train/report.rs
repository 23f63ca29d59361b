use alloc::string::String;
use alloc::vec::Vec;

/// One training epoch, numbered from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss over the batches that were not skipped (0 if all were).
    pub loss: f64,
    pub skipped_batches: usize,
    /// Held-out MGS (pre-training); `None` when undefined.
    pub mgs: Option<f64>,
    pub train_auc: Option<f64>,
    pub valid_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// `"pretrain"` or `"finetune"`.
    pub kind: String,
    pub seed: u64,
    pub config_hash: u64,
    pub epochs: Vec<EpochRecord>,
    /// Held-out MGS before the first update.
    pub initial_mgs: Option<f64>,
    pub best_epoch: Option<usize>,
    pub test_auc: Option<f64>,
    /// Filled in by callers that have a clock.
    pub wall_clock_secs: Option<f64>,
}

impl TrainReport {
    pub fn new(kind: &str, seed: u64, config_hash: u64) -> Self {
        TrainReport {
            kind: kind.into(),
            seed,
            config_hash,
            epochs: Vec::new(),
            initial_mgs: None,
            best_epoch: None,
            test_auc: None,
            wall_clock_secs: None,
        }
    }

    pub fn final_mgs(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.mgs).or(self.initial_mgs)
    }

    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }
}
