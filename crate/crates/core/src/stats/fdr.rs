use serde::Serialize;

use super::StatsError;

/// Outcome of Benjamini–Hochberg at level `q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdrResult {
    pub q: f64,
    /// Largest p-value still rejected; `None` when nothing is rejected.
    pub threshold: Option<f64>,
    pub reject: Vec<bool>,
}

impl FdrResult {
    pub fn n_rejected(&self) -> usize {
        self.reject.iter().filter(|&&r| r).count()
    }
}

/// Benjamini–Hochberg step-up: the largest `k` with `p(k) ≤ q·k/m` sets the
/// threshold `p(k)`, and every `p ≤ p(k)` is rejected.
pub fn bh_fdr(pvals: &[f64], q: f64) -> Result<FdrResult, StatsError> {
    if let Some(&bad) = pvals.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(StatsError::InvalidPValue(bad));
    }
    let m = pvals.len();
    let mut sorted = pvals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let threshold = (1..=m).rev().find(|&k| sorted[k - 1] <= q * k as f64 / m as f64).map(|k| sorted[k - 1]);
    let reject = pvals.iter().map(|&p| threshold.is_some_and(|t| p <= t)).collect();
    Ok(FdrResult { q, threshold, reject })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let r = bh_fdr(&[0.01, 0.02, 0.5], 0.05).unwrap();
        assert_eq!(r.reject, vec![true, true, false]);
        assert_eq!(r.threshold, Some(0.02));
    }

    #[test]
    fn extremes() {
        assert_eq!(bh_fdr(&[1.0; 4], 0.05).unwrap().n_rejected(), 0);
        assert_eq!(bh_fdr(&[0.01; 4], 0.05).unwrap().n_rejected(), 4);
        assert_eq!(bh_fdr(&[], 0.05).unwrap().threshold, None);
        assert!(bh_fdr(&[0.0], 0.05).is_err());
    }

    #[test]
    fn step_up_not_step_down() {
        // p(1) fails its own bound but p(2) passes, so both are rejected
        let r = bh_fdr(&[0.04, 0.045], 0.05).unwrap();
        assert_eq!(r.reject, vec![true, true]);
    }
}
