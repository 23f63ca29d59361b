//! Training reports as JSON.

use std::path::Path;

use graphmgs_core::train::{EpochRecord, TrainReport};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochJson {
    pub epoch: usize,
    pub loss: f64,
    pub skipped_batches: usize,
    pub mgs: Option<f64>,
    pub train_auc: Option<f64>,
    pub valid_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub kind: String,
    pub seed: u64,
    pub config_hash: String,
    pub initial_mgs: Option<f64>,
    pub final_mgs: Option<f64>,
    pub best_epoch: Option<usize>,
    pub test_auc: Option<f64>,
    pub wall_clock_secs: Option<f64>,
    pub epochs: Vec<EpochJson>,
}

impl From<&EpochRecord> for EpochJson {
    fn from(e: &EpochRecord) -> Self {
        EpochJson {
            epoch: e.epoch,
            loss: e.loss,
            skipped_batches: e.skipped_batches,
            mgs: e.mgs,
            train_auc: e.train_auc,
            valid_auc: e.valid_auc,
        }
    }
}

impl From<&TrainReport> for ReportJson {
    fn from(r: &TrainReport) -> Self {
        ReportJson {
            kind: r.kind.clone(),
            seed: r.seed,
            config_hash: format!("{:016x}", r.config_hash),
            initial_mgs: r.initial_mgs,
            final_mgs: r.final_mgs(),
            best_epoch: r.best_epoch,
            test_auc: r.test_auc,
            wall_clock_secs: r.wall_clock_secs,
            epochs: r.epochs.iter().map(EpochJson::from).collect(),
        }
    }
}

pub fn report_to_json(r: &TrainReport) -> String {
    let mut s = serde_json::to_string_pretty(&ReportJson::from(r)).expect("report serializes");
    s.push('\n');
    s
}

pub fn save_report(path: &Path, r: &TrainReport) -> Result<()> {
    std::fs::write(path, report_to_json(r)).map_err(|e| CliError::io(path, e))
}

pub fn load_report(path: &Path) -> Result<ReportJson> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut r = TrainReport::new("pretrain", 3, 0xabc);
        r.initial_mgs = Some(0.1);
        r.wall_clock_secs = Some(1.5);
        r.epochs.push(EpochRecord {
            epoch: 1,
            loss: -0.5,
            skipped_batches: 0,
            mgs: Some(0.4),
            train_auc: None,
            valid_auc: None,
        });
        let back: ReportJson = serde_json::from_str(&report_to_json(&r)).unwrap();
        assert_eq!(back, ReportJson::from(&r));
        assert_eq!(back.config_hash, "0000000000000abc");
        assert_eq!(back.final_mgs, Some(0.4));
    }
}
