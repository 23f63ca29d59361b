use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::similarity::average_ranks;

/// Rank-based (Mann–Whitney) ROC-AUC; tied scores count one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::AucUndefined);
    }
    let ranks = average_ranks(scores);
    // Average ranks are half-integers, so this sum is exact.
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let p = pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// Mean AUC over the tasks whose non-missing labels contain both classes.
/// `scores[i][t]` and `labels[i][t]` index graph `i`, task `t`.
pub fn mean_task_auc(scores: &[Vec<f64>], labels: &[&[Option<u8>]]) -> Result<f64> {
    let tasks = labels.first().map_or(0, |l| l.len());
    let mut total = 0.0;
    let mut counted = 0usize;
    for t in 0..tasks {
        let (mut s, mut y) = (Vec::new(), Vec::new());
        for (row, lab) in scores.iter().zip(labels) {
            if let Some(v) = lab[t] {
                s.push(row[t]);
                y.push(v == 1);
            }
        }
        match roc_auc(&s, &y) {
            Ok(a) => {
                total += a;
                counted += 1;
            }
            Err(Error::AucUndefined) => {}
            Err(e) => return Err(e),
        }
    }
    if counted == 0 {
        return Err(Error::AucUndefined);
    }
    Ok(total / counted as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.9, 0.8, 0.3], &[true, false, true]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.4; 5], &[true, false, true, false, false]).unwrap(), 0.5);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(Error::AucUndefined)));
    }

    #[test]
    fn task_mean_skips_single_class_tasks() {
        let scores = vec![vec![0.9, 0.1], vec![0.1, 0.2], vec![0.5, 0.3]];
        let l0 = [Some(1), Some(1)];
        let l1 = [Some(0), Some(1)];
        let l2 = [None, Some(1)];
        let labels: Vec<&[Option<u8>]> = vec![&l0, &l1, &l2];
        assert_eq!(mean_task_auc(&scores, &labels).unwrap(), 1.0);
    }
}
