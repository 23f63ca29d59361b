//! Pair-set scatter export: `pair_i,pair_j,structural_sim,embedding_sim`.

use std::path::Path;

use graphmgs_core::similarity::SimilarityPairSet;

use crate::error::{CliError, Result};

pub fn pairs_to_csv(set: &SimilarityPairSet) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record(["pair_i", "pair_j", "structural_sim", "embedding_sim"]).map_err(err)?;
    for (((a, b), s), e) in set.pair_ids.iter().zip(&set.structural).zip(&set.embedding) {
        w.write_record([a.as_str(), b.as_str(), &s.to_string(), &e.to_string()]).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

pub fn save_pairs(path: &Path, set: &SimilarityPairSet) -> Result<()> {
    std::fs::write(path, pairs_to_csv(set)?).map_err(|e| CliError::io(path, e))
}
