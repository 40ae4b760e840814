//! Floating-point operation tally used to check the linear-in-`l` cost model.

/// Running count of floating-point operations.
///
/// A fused multiply-add is counted as two operations, a division as one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlopCounter {
    count: u64,
}

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, ops: u64) {
        self.count += ops;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn merge(&mut self, other: FlopCounter) {
        self.count += other.count;
    }
}
