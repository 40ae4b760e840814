use crate::bspline::BreakSequence;
use crate::error::{invalid, Error, Result};

/// Order-`k` knot sequence built from a break sequence and a continuity
/// vector `nu` (the Curry–Schoenberg construction).
///
/// The first and last `k` knots sit on the end breaks; interior break `xi_i`
/// is repeated `k - nu_i` times. The associated spline space has dimension
/// `n = k*l - sum(nu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
    order: usize,
    dimension: usize,
    breaks: BreakSequence,
    continuity: Vec<usize>,
}

impl KnotVector {
    /// Builds the knot sequence, requiring `1 <= nu_i <= k - 1`.
    pub fn build(breaks: BreakSequence, k: usize, continuity: &[usize]) -> Result<Self> {
        Self::build_inner(breaks, k, continuity, false)
    }

    /// Like [`KnotVector::build`] but also accepts `nu_i = k`, which removes
    /// the breakpoint from the knot sequence altogether.
    pub fn build_permissive(breaks: BreakSequence, k: usize, continuity: &[usize]) -> Result<Self> {
        Self::build_inner(breaks, k, continuity, true)
    }

    /// Knots for second-order ODE collocation: `nu = 2` at every interior
    /// break, giving `n = (k - 2) l + 2`.
    pub fn for_ode(breaks: BreakSequence, k: usize) -> Result<Self> {
        if k < 3 {
            return Err(invalid(format!("ODE collocation needs order k >= 3, got {k}")));
        }
        let nu = vec![2; breaks.intervals() - 1];
        Self::build(breaks, k, &nu)
    }

    fn build_inner(
        breaks: BreakSequence,
        k: usize,
        continuity: &[usize],
        allow_full: bool,
    ) -> Result<Self> {
        if k < 1 {
            return Err(invalid("spline order k must be at least 1"));
        }
        let l = breaks.intervals();
        if continuity.len() != l - 1 {
            return Err(invalid(format!(
                "continuity vector has length {}, expected l - 1 = {}",
                continuity.len(),
                l - 1
            )));
        }
        let max_nu = if allow_full { k } else { k - 1 };
        if let Some((i, &nu)) = continuity
            .iter()
            .enumerate()
            .find(|(_, &nu)| nu < 1 || nu > max_nu)
        {
            return Err(invalid(format!(
                "continuity nu[{i}] = {nu} outside the admissible range 1..={max_nu}"
            )));
        }

        let xi = breaks.as_slice();
        let mut knots = Vec::with_capacity(k * (l + 1));
        knots.extend(std::iter::repeat_n(xi[0], k));
        for (i, &nu) in continuity.iter().enumerate() {
            knots.extend(std::iter::repeat_n(xi[i + 1], k - nu));
        }
        knots.extend(std::iter::repeat_n(xi[l], k));

        let dimension = knots.len() - k;
        debug_assert_eq!(dimension, k * l - continuity.iter().sum::<usize>());
        Ok(Self {
            knots,
            order: k,
            dimension,
            breaks,
            continuity: continuity.to_vec(),
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of B-splines `n`.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn breaks(&self) -> &BreakSequence {
        &self.breaks
    }

    pub fn continuity(&self) -> &[usize] {
        &self.continuity
    }

    /// Left end `a = t_{k-1}` of the basic interval.
    pub fn start(&self) -> f64 {
        self.knots[self.order - 1]
    }

    /// Right end `b = t_n` of the basic interval.
    pub fn end(&self) -> f64 {
        self.knots[self.dimension]
    }

    /// Largest `j` with `t_j <= x < t_{j+1}`; at `x = b` this is the last
    /// non-trivial interval, so evaluation is left-continuous there.
    pub fn find_interval(&self, x: f64) -> Result<usize> {
        let (a, b) = (self.start(), self.end());
        if !(x >= a && x <= b) {
            return Err(Error::OutOfRange { x, lo: a, hi: b });
        }
        let k = self.order;
        let n = self.dimension;
        // candidates j = k-1 ..= n-1; t_{k-1} = a <= x so at least one qualifies
        let count = self.knots[k - 1..n].partition_point(|&t| t <= x);
        Ok(k - 1 + count - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn breaks(v: &[f64]) -> BreakSequence {
        BreakSequence::new(v.to_vec()).unwrap()
    }

    #[test]
    fn mixed_continuity_example() {
        let t = KnotVector::build(breaks(&[1.0, 2.0, 3.0, 4.0]), 4, &[1, 3]).unwrap();
        assert_eq!(
            t.knots(),
            &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 3.0, 4.0, 4.0, 4.0, 4.0]
        );
        assert_eq!(t.dimension(), 8);
    }

    #[test]
    fn ode_continuity_example() {
        let t = KnotVector::build(breaks(&[0.0, 1.0, 2.0, 3.0]), 4, &[2, 2]).unwrap();
        assert_eq!(
            t.knots(),
            &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 3.0]
        );
        assert_eq!(t.dimension(), 8);
        let same = KnotVector::for_ode(breaks(&[0.0, 1.0, 2.0, 3.0]), 4).unwrap();
        assert_eq!(same, t);
    }

    #[test]
    fn no_interior_breaks() {
        let t = KnotVector::build(breaks(&[0.0, 1.0]), 3, &[]).unwrap();
        assert_eq!(t.knots(), &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(t.dimension(), 3);
    }

    #[test]
    fn continuity_validation() {
        let b = breaks(&[0.0, 1.0, 2.0]);
        assert!(KnotVector::build(b.clone(), 4, &[]).is_err());
        assert!(KnotVector::build(b.clone(), 4, &[0]).is_err());
        assert!(KnotVector::build(b.clone(), 4, &[4]).is_err());
        let dropped = KnotVector::build_permissive(b, 4, &[4]).unwrap();
        assert_eq!(dropped.knots(), &[0.0, 0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 2.0]);
        assert_eq!(dropped.dimension(), 4);
    }

    #[test]
    fn curry_schoenberg_dimension() {
        for k in 2..8 {
            for l in 1..6 {
                let nu: Vec<usize> = (0..l - 1).map(|i| 1 + (i * 7 + k) % (k - 1)).collect();
                let b = BreakSequence::uniform(0.0, 1.0, l).unwrap();
                let t = KnotVector::build(b, k, &nu).unwrap();
                assert_eq!(t.dimension(), k * l - nu.iter().sum::<usize>());
                assert_eq!(t.knots().len(), t.dimension() + k);
            }
        }
    }

    #[test]
    fn interval_lookup() {
        let t = KnotVector::for_ode(breaks(&[0.0, 1.0, 2.0, 3.0]), 4).unwrap();
        // one-based indices 4 and 8 in the usual notation
        assert_eq!(t.find_interval(0.5).unwrap() + 1, 4);
        assert_eq!(t.find_interval(3.0).unwrap() + 1, 8);
        assert_eq!(t.find_interval(2.0).unwrap() + 1, 8);
        assert_eq!(t.find_interval(0.0).unwrap() + 1, 4);
        assert_eq!(t.find_interval(1.0).unwrap() + 1, 6);
        assert!(matches!(t.find_interval(3.5), Err(Error::OutOfRange { .. })));
        assert!(t.find_interval(-1e-12).is_err());
        assert!(t.find_interval(f64::NAN).is_err());
    }
}
