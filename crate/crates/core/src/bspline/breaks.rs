use crate::error::{invalid, Result};

/// Strictly increasing breakpoints `xi_0 < xi_1 < ... < xi_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakSequence {
    breaks: Vec<f64>,
}

impl BreakSequence {
    pub fn new(breaks: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(invalid("a break sequence needs at least two points"));
        }
        if breaks.iter().any(|b| !b.is_finite()) {
            return Err(invalid("break sequence contains a non-finite value"));
        }
        if let Some(i) = breaks.windows(2).position(|w| w[0] >= w[1]) {
            return Err(invalid(format!(
                "break sequence is not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self { breaks })
    }

    /// `l` equal intervals on `[a, b]`; the last break is exactly `b`.
    pub fn uniform(a: f64, b: f64, l: usize) -> Result<Self> {
        if l == 0 {
            return Err(invalid("number of intervals l must be at least 1"));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(invalid(format!("range requires a < b, got [{a}, {b}]")));
        }
        let width = b - a;
        let mut breaks: Vec<f64> = (0..=l)
            .map(|i| a + width * i as f64 / l as f64)
            .collect();
        breaks[l] = b;
        Self::new(breaks)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.breaks
    }

    /// Number of intervals `l`.
    pub fn intervals(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.breaks[0]
    }

    pub fn end(&self) -> f64 {
        self.breaks[self.breaks.len() - 1]
    }

    /// Mesh size `max_i (xi_{i+1} - xi_i)`.
    pub fn mesh(&self) -> f64 {
        self.breaks
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// The breaks `xi_from ..= xi_to`, sharing values bit-for-bit with `self`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.intervals() {
            return Err(invalid(format!(
                "break slice {from}..={to} is invalid for {} intervals",
                self.intervals()
            )));
        }
        Ok(Self {
            breaks: self.breaks[from..=to].to_vec(),
        })
    }
}
