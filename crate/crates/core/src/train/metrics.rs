use crate::error::{Error, Result};
use crate::nn::bce_value;

/// Cut-offs reported for hit ratio.
pub const HR_KS: [usize; 6] = [1, 3, 10, 20, 50, 100];

/// Tie handling stamped into reports.
pub const TIE_RULE: &str = "HR@K: positive must beat the K-th highest negative strictly; MRR: rank = 1 + #(neg > pos)";

/// Mean binary cross-entropy of probabilities.
pub fn bce_loss(p: &[f64], labels: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::arg("BCE over an empty batch"));
    }
    if p.len() != labels.len() {
        return Err(Error::arg(format!("{} predictions for {} labels", p.len(), labels.len())));
    }
    Ok(bce_value(p.iter().copied(), labels.iter().copied()))
}

/// Fraction of positives scoring strictly above the K-th highest negative.
pub fn hr_at_k(pos: &[f64], neg: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > neg.len() {
        return Err(Error::arg(format!("HR@{k} needs at least {k} negatives, have {}", neg.len())));
    }
    if pos.is_empty() {
        return Err(Error::arg("HR@K over no positives"));
    }
    let mut sorted = neg.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let kth = sorted[k - 1];
    Ok(pos.iter().filter(|&&p| p > kth).count() as f64 / pos.len() as f64)
}

/// Mean reciprocal rank with each positive ranked against its own negatives.
pub fn mrr(items: &[(f64, &[f64])]) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::arg("MRR over no positives"));
    }
    let mut total = 0.0;
    for &(p, negs) in items {
        if negs.is_empty() {
            return Err(Error::arg("MRR needs at least one negative per positive"));
        }
        total += 1.0 / (1 + negs.iter().filter(|&&n| n > p).count()) as f64;
    }
    Ok(total / items.len() as f64)
}

/// MRR where every positive shares the same negative pool.
pub fn mrr_shared(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::arg("MRR needs positives and negatives"));
    }
    let mut sorted = neg.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let total: f64 = pos
        .iter()
        .map(|&p| {
            let above = sorted.len() - sorted.partition_point(|&n| n <= p);
            1.0 / (1 + above) as f64
        })
        .sum();
    Ok(total / pos.len() as f64)
}
