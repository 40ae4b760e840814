use crate::bspline::BreakSequence;
use crate::collocation::CollocationPattern;
use crate::error::{invalid, Result};

/// Collocation abscissae, `k - 2` per interval, in increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasiteSet {
    tau: Vec<f64>,
    per_interval: usize,
}

impl DatasiteSet {
    pub fn as_slice(&self) -> &[f64] {
        &self.tau
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn per_interval(&self) -> usize {
        self.per_interval
    }

    pub fn intervals(&self) -> usize {
        self.tau.len() / self.per_interval
    }

    /// Zero-based interval holding site `j`.
    pub fn interval_of(&self, j: usize) -> usize {
        j / self.per_interval
    }
}

/// `tau = (xi_{i+1} + xi_i)/2 + rho_j (xi_{i+1} - xi_i)/2` for every interval.
pub fn build_datasites(breaks: &BreakSequence, pattern: &CollocationPattern) -> Result<DatasiteSet> {
    if pattern.is_empty() {
        return Err(invalid("collocation pattern is empty (order k must be >= 3)"));
    }
    let xi = breaks.as_slice();
    let mut tau = Vec::with_capacity(breaks.intervals() * pattern.len());
    for w in xi.windows(2) {
        let mid = 0.5 * (w[1] + w[0]);
        let half = 0.5 * (w[1] - w[0]);
        for &r in pattern.as_slice() {
            tau.push(mid + r * half);
        }
    }
    if let Some(i) = tau.windows(2).position(|w| w[0] >= w[1]) {
        return Err(invalid(format!(
            "datasites coalesce at index {}; mesh too fine for the pattern",
            i + 1
        )));
    }
    Ok(DatasiteSet {
        tau,
        per_interval: pattern.len(),
    })
}
