use crate::error::{invalid, Result};

/// Reference collocation points `rho_1 < ... < rho_m` in `(-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationPattern {
    rho: Vec<f64>,
}

impl CollocationPattern {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        if rho.iter().any(|r| !(r.abs() < 1.0)) {
            return Err(invalid("collocation points must lie strictly inside (-1, 1)"));
        }
        if rho.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("collocation points must be strictly increasing"));
        }
        Ok(Self { rho })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rho
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

/// `(P_m(x), P_m'(x))` by the three-term recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=m {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// The `m` zeros of the Legendre polynomial `P_m`, ascending.
///
/// Newton's method from the Chebyshev-angle guesses
/// `cos(pi (i - 1/4) / (m + 1/2))`; the negative half is the mirror image of
/// the positive half, so the pattern is exactly symmetric.
pub fn legendre_pattern(m: usize) -> CollocationPattern {
    let mut positive = Vec::with_capacity(m / 2);
    for i in 1..=m / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        // one polishing step after the update stalls
        let (p, dp) = legendre(m, x);
        x -= p / dp;
        positive.push(x);
    }
    let mut rho: Vec<f64> = positive.iter().map(|x| -x).collect();
    if m % 2 == 1 {
        rho.push(0.0);
    }
    rho.extend(positive.iter().rev());
    CollocationPattern { rho }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bisection on `P_m` over a sign-change bracket; independent of Newton.
    fn bisect(m: usize, mut lo: f64, mut hi: f64) -> f64 {
        let f = |x: f64| legendre(m, x).0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn low_degree_roots() {
        assert_eq!(legendre_pattern(0).as_slice(), &[] as &[f64]);
        assert_eq!(legendre_pattern(1).as_slice(), &[0.0]);
        let r2 = legendre_pattern(2);
        let b2 = bisect(2, 0.1, 0.9);
        assert!((b2 - 0.5773502691896257).abs() < 1e-15);
        assert!((r2.as_slice()[1] - b2).abs() < 1e-14);
        assert_eq!(r2.as_slice()[0], -r2.as_slice()[1]);
        let r3 = legendre_pattern(3);
        let b3 = bisect(3, 0.1, 0.99);
        assert!((b3 - 0.7745966692414834).abs() < 1e-15);
        assert!((r3.as_slice()[2] - b3).abs() < 1e-14);
        assert_eq!(r3.as_slice()[1], 0.0);
    }

    #[test]
    fn roots_for_higher_degrees() {
        for m in 1..=18 {
            let r = legendre_pattern(m);
            assert_eq!(r.len(), m);
            assert!(CollocationPattern::new(r.as_slice().to_vec()).is_ok());
            for (i, &x) in r.as_slice().iter().enumerate() {
                assert!(legendre(m, x).0.abs() < 1e-13, "m={m} root {i}");
                let y = r.as_slice()[m - 1 - i];
                assert!((x + y).abs() < 1e-12);
            }
        }
    }
}
