use serde::{Deserialize, Serialize};

use super::Strategy;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostMode {
    Gvn,
    Egvn,
}

/// Invocation counts and the dominant fusion term for one pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub mode: CostMode,
    pub strategy: Strategy,
    pub render_count: u64,
    pub encode_count: u64,
    /// Order expression of the fusion cost.
    pub integration_term: String,
    /// The same expression evaluated at the given sizes.
    pub integration_order: u128,
}

/// Images are produced per link for GVN (`l`) and per node for E-GVN (`n`).
/// The fusion term for E-GVN includes the adapter's `S²` per node.
pub fn estimate_costs(
    mode: CostMode,
    strategy: Strategy,
    n: u64,
    l: u64,
    f: u64,
    f_prime: u64,
    s: u64,
) -> Result<CostReport> {
    if [n, l, f, f_prime, s].contains(&0) {
        return Err(Error::arg("cost estimate needs positive sizes"));
    }
    let (n, l, f, fp, s) = (n as u128, l as u128, f as u128, f_prime as u128, s as u128);
    let (count, term, order) = match (mode, strategy) {
        (CostMode::Gvn, Strategy::Attention) => (l, "l·(S·F′ + F′²)", l * (s * fp + fp * fp)),
        (CostMode::Gvn, Strategy::Concat) => (l, "l·(F′ + S)", l * (fp + s)),
        (CostMode::Gvn, Strategy::Weighted) => (l, "l·S²", l * s * s),
        (CostMode::Egvn, Strategy::Attention) => (n, "n·(S² + S·F + F²)", n * (s * s + s * f + f * f)),
        (CostMode::Egvn, Strategy::Concat) => (n, "n·(S² + F + S)", n * (s * s + f + s)),
        (CostMode::Egvn, Strategy::Weighted) => (n, "n·(S² + F²)", n * (s * s + f * f)),
    };
    Ok(CostReport {
        mode,
        strategy,
        render_count: count as u64,
        encode_count: count as u64,
        integration_term: term.to_string(),
        integration_order: order,
    })
}
