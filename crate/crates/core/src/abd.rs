//! The almost-block-diagonal collocation matrix.
//!
//! For order `k` and `l` intervals the `n x n` system (`n = (k-2) l + 2`)
//! consists of two initial-condition rows supported on the first two
//! columns, followed by `l` blocks of `k - 2` rows. Block `i` (zero-based)
//! occupies columns `(k-2) i ..= (k-2) i + k - 1`, overlapping its
//! predecessor in exactly two columns.
//!
//! Because each block only introduces `k - 2` new columns, the matrix is
//! block lower triangular: the solve is a left-to-right block forward
//! substitution, and coefficient `alpha_i` never depends on rows below the
//! block that introduces it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flops::FlopCounter;

const PIVOT_RTOL: f64 = 1e-14;

/// A diagonal block of the collocation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemBlock {
    InitialConditions,
    /// One-based interval index.
    Interval(usize),
}

impl fmt::Display for SystemBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemBlock::InitialConditions => write!(f, "initial-condition"),
            SystemBlock::Interval(i) => write!(f, "interval {i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbdMatrix {
    k: usize,
    l: usize,
    ic_rows: Vec<f64>,
    blocks: Vec<f64>,
}

impl AbdMatrix {
    pub fn zeros(k: usize, l: usize) -> Result<Self> {
        if k < 3 {
            return Err(invalid(format!("collocation order k must be >= 3, got {k}")));
        }
        if l == 0 {
            return Err(invalid("number of intervals l must be at least 1"));
        }
        Ok(Self {
            k,
            l,
            ic_rows: vec![0.0; 2 * k],
            blocks: vec![0.0; l * (k - 2) * k],
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn n(&self) -> usize {
        (self.k - 2) * self.l + 2
    }

    /// Stored entries, `2k + l k (k-2)`.
    pub fn stored_entries(&self) -> usize {
        self.ic_rows.len() + self.blocks.len()
    }

    /// First global column of block `block` (zero-based).
    pub fn block_column_offset(&self, block: usize) -> usize {
        (self.k - 2) * block
    }

    /// First global row of block `block` (zero-based).
    pub fn block_row_offset(&self, block: usize) -> usize {
        2 + (self.k - 2) * block
    }

    pub fn ic_row(&self, r: usize) -> &[f64] {
        &self.ic_rows[r * self.k..(r + 1) * self.k]
    }

    pub fn ic_row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.ic_rows[r * self.k..(r + 1) * self.k]
    }

    pub fn block_row(&self, block: usize, r: usize) -> &[f64] {
        let start = (block * (self.k - 2) + r) * self.k;
        &self.blocks[start..start + self.k]
    }

    pub fn block_row_mut(&mut self, block: usize, r: usize) -> &mut [f64] {
        let start = (block * (self.k - 2) + r) * self.k;
        &mut self.blocks[start..start + self.k]
    }

    /// The block rows in order, row `j` belonging to block `j / (k-2)`.
    pub(crate) fn block_rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, f64> {
        self.blocks.chunks_exact_mut(self.k)
    }

    /// Global row `row` as `(first column, k entries)`.
    pub fn row(&self, row: usize) -> (usize, &[f64]) {
        if row < 2 {
            (0, self.ic_row(row))
        } else {
            let block = (row - 2) / (self.k - 2);
            let r = (row - 2) % (self.k - 2);
            (self.block_column_offset(block), self.block_row(block, r))
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        (0..n)
            .map(|row| {
                let mut dense = vec![0.0; n];
                let (c0, vals) = self.row(row);
                dense[c0..c0 + self.k].copy_from_slice(vals);
                dense
            })
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n());
        (0..self.n())
            .map(|row| {
                let (c0, vals) = self.row(row);
                vals.iter().zip(&x[c0..c0 + self.k]).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n())
            .map(|row| self.row(row).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.ic_rows.iter().chain(&self.blocks).all(|v| v.is_finite())
    }

    fn check_ic_support(&self) -> Result<()> {
        for r in 0..2 {
            if self.ic_row(r)[2..].iter().any(|&v| v != 0.0) {
                return Err(invalid(
                    "initial-condition rows must be supported on the first two columns",
                ));
            }
        }
        Ok(())
    }
}

/// Right-hand side `s` of the collocation system.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsVector(Vec<f64>);

impl RhsVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("right-hand side entry {i} is not finite")));
        }
        Ok(Self(entries))
    }

    pub(crate) fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Solves `A alpha = s` block by block from the left.
pub fn solve_abd(a: &AbdMatrix, rhs: &RhsVector) -> Result<Vec<f64>> {
    let mut counter = FlopCounter::new();
    solve_abd_counted(a, rhs, &mut counter)
}

/// [`solve_abd`] with an operation tally.
pub fn solve_abd_counted(
    a: &AbdMatrix,
    rhs: &RhsVector,
    counter: &mut FlopCounter,
) -> Result<Vec<f64>> {
    if !a.is_finite() {
        return Err(invalid("collocation matrix contains a non-finite entry"));
    }
    solve_finite(a, rhs, counter)
}

/// [`solve_abd_counted`] for a matrix already known to be finite.
pub(crate) fn solve_finite(a: &AbdMatrix, rhs: &RhsVector, counter: &mut FlopCounter) -> Result<Vec<f64>> {
    a.check_ic_support()?;
    let n = a.n();
    if rhs.len() != n {
        return Err(invalid(format!(
            "right-hand side has length {}, expected {n}",
            rhs.len()
        )));
    }
    let k = a.k;
    let m = k - 2;
    let s = rhs.as_slice();
    let mut alpha = vec![0.0; n];

    let mut ic = [a.ic_row(0)[0], a.ic_row(0)[1], a.ic_row(1)[0], a.ic_row(1)[1]];
    let mut x = [s[0], s[1]];
    solve_dense(&mut ic, 2, &mut x, counter)
        .map_err(|_| Error::SingularBlock {
            block: SystemBlock::InitialConditions,
        })?;
    alpha[..2].copy_from_slice(&x);

    const STACK: usize = 8 * 8 + 8;
    let mut stack = [0.0; STACK];
    let mut heap = Vec::new();
    let scratch: &mut [f64] = if m * m + m <= STACK {
        &mut stack[..m * m + m]
    } else {
        heap.resize(m * m + m, 0.0);
        &mut heap
    };
    let (diag, local) = scratch.split_at_mut(m * m);
    for block in 0..a.l {
        let c0 = a.block_column_offset(block);
        let r0 = a.block_row_offset(block);
        let (known0, known1) = (alpha[c0], alpha[c0 + 1]);
        for r in 0..m {
            let row = a.block_row(block, r);
            diag[r * m..(r + 1) * m].copy_from_slice(&row[2..]);
            local[r] = s[r0 + r] - row[0] * known0 - row[1] * known1;
        }
        counter.add(4 * m as u64);
        solve_dense(diag, m, local, counter).map_err(|_| Error::SingularBlock {
            block: SystemBlock::Interval(block + 1),
        })?;
        alpha[c0 + 2..c0 + k].copy_from_slice(local);
    }
    Ok(alpha)
}

/// In-place solve of an `m x m` row-major system. Lower-triangular matrices
/// are forward-substituted directly; otherwise Gaussian elimination with
/// partial pivoting. A pivot at or below `1e-14 * ||M||_inf` is singular.
fn solve_dense(
    mat: &mut [f64],
    m: usize,
    rhs: &mut [f64],
    counter: &mut FlopCounter,
) -> std::result::Result<(), ()> {
    let mut norm = 0.0_f64;
    let mut lower = true;
    for (r, row) in mat.chunks_exact(m).enumerate() {
        norm = norm.max(row.iter().map(|v| v.abs()).sum::<f64>());
        lower &= row[r + 1..].iter().all(|&v| v == 0.0);
    }
    let tiny = PIVOT_RTOL * norm;

    if lower {
        for (r, row) in mat.chunks_exact(m).enumerate() {
            let d = row[r];
            if !(d.abs() > tiny) {
                return Err(());
            }
            let acc = row[..r]
                .iter()
                .zip(&rhs[..r])
                .fold(rhs[r], |acc, (a, x)| acc - a * x);
            rhs[r] = acc / d;
        }
        counter.add((m * m) as u64);
        return Ok(());
    }

    for c in 0..m {
        let mut p = c;
        let mut best = mat[c * m + c].abs();
        for r in c + 1..m {
            let v = mat[r * m + c].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if !(best > tiny) {
            return Err(());
        }
        if p != c {
            let (top, bottom) = mat.split_at_mut(p * m);
            top[c * m..(c + 1) * m].swap_with_slice(&mut bottom[..m]);
            rhs.swap(c, p);
        }
        let (head, tail) = mat.split_at_mut((c + 1) * m);
        let pivot_row = &head[c * m..];
        let pivot = pivot_row[c];
        for (i, row) in tail.chunks_exact_mut(m).enumerate() {
            let f = row[c] / pivot;
            if f == 0.0 {
                continue;
            }
            for (a, &u) in row[c + 1..].iter_mut().zip(&pivot_row[c + 1..]) {
                *a -= f * u;
            }
            rhs[c + 1 + i] -= f * rhs[c];
            counter.add(1 + 2 * (m - c - 1) as u64 + 2);
        }
    }
    for c in (0..m).rev() {
        let row = &mat[c * m..(c + 1) * m];
        let acc = row[c + 1..]
            .iter()
            .zip(&rhs[c + 1..])
            .fold(rhs[c], |acc, (a, x)| acc - a * x);
        rhs[c] = acc / row[c];
    }
    counter.add((m * m) as u64);
    Ok(())
}

/// For each coefficient (one-based `i`), the number of leading rows of the
/// system it depends on: 2 for `i <= 2`, else `m + 2` with
/// `m = (floor((i-3)/(k-2)) + 1)(k-2)`.
pub fn dependence_profile(a: &AbdMatrix) -> Vec<usize> {
    let m = a.k - 2;
    (1..=a.n())
        .map(|i| if i <= 2 { 2 } else { ((i - 3) / m + 1) * m + 2 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn identity(k: usize, l: usize) -> AbdMatrix {
        let mut a = AbdMatrix::zeros(k, l).unwrap();
        a.ic_row_mut(0)[0] = 1.0;
        a.ic_row_mut(1)[1] = 1.0;
        for b in 0..l {
            for r in 0..k - 2 {
                a.block_row_mut(b, r)[r + 2] = 1.0;
            }
        }
        a
    }

    fn random(k: usize, l: usize, rng: &mut StdRng) -> AbdMatrix {
        let mut a = AbdMatrix::zeros(k, l).unwrap();
        a.ic_row_mut(0)[0] = 1.0;
        a.ic_row_mut(1)[0] = rng.gen_range(-2.0..2.0);
        a.ic_row_mut(1)[1] = rng.gen_range(1.0..3.0);
        for b in 0..l {
            for r in 0..k - 2 {
                let row = a.block_row_mut(b, r);
                for v in row.iter_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
                row[r + 2] += k as f64; // diagonally dominant diagonal block
            }
        }
        a
    }

    /// Dense Gaussian elimination with partial pivoting, independent of the block solver.
    fn dense_solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
                .unwrap();
            m.swap(c, p);
            b.swap(c, p);
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for j in c..n {
                    m[r][j] -= f * m[c][j];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for c in (0..n).rev() {
            let s: f64 = (c + 1..n).map(|j| m[c][j] * x[j]).sum();
            x[c] = (b[c] - s) / m[c][c];
        }
        x
    }

    #[test]
    fn identity_structure() {
        let a = identity(4, 3);
        let r: Vec<f64> = (0..8).map(|i| i as f64 - 2.5).collect();
        let x = solve_abd(&a, &RhsVector::new(r.clone()).unwrap()).unwrap();
        assert_eq!(x, r);
    }

    #[test]
    fn multiply_then_solve() {
        let mut rng = StdRng::seed_from_u64(7);
        let a = random(4, 3, &mut rng);
        assert_eq!(a.n(), 8);
        let x_true: Vec<f64> = (0..8).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let s = a.mul_vec(&x_true);
        let x = solve_abd(&a, &RhsVector::new(s).unwrap()).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn agrees_with_dense_elimination() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let k = rng.gen_range(3..8);
            let l = rng.gen_range(1..=(48 / (k - 2)));
            let a = random(k, l, &mut rng);
            assert!(a.n() <= 50);
            let s: Vec<f64> = (0..a.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = solve_abd(&a, &RhsVector::new(s.clone()).unwrap()).unwrap();
            let y = dense_solve(a.to_dense(), s.clone());
            let scale = y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            for (u, v) in x.iter().zip(&y) {
                assert!((u - v).abs() <= 1e-9 * scale);
            }
            // residual bound
            let r = a.mul_vec(&x);
            let xn = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let sn = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let res = r.iter().zip(&s).fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()));
            assert!(res <= 1e-10 * (a.norm_inf() * xn + sn));
        }
    }

    #[test]
    fn singular_block_reported() {
        let mut a = identity(4, 3);
        for r in 0..2 {
            for v in a.block_row_mut(1, r)[2..].iter_mut() {
                *v = 0.0;
            }
        }
        let rhs = RhsVector::new(vec![1.0; 8]).unwrap();
        assert_eq!(
            solve_abd(&a, &rhs),
            Err(Error::SingularBlock {
                block: SystemBlock::Interval(2)
            })
        );

        let mut b = identity(4, 3);
        b.ic_row_mut(1)[1] = 0.0;
        assert_eq!(
            solve_abd(&b, &rhs),
            Err(Error::SingularBlock {
                block: SystemBlock::InitialConditions
            })
        );
    }

    #[test]
    fn rejects_wide_ic_rows() {
        let mut a = identity(4, 2);
        a.ic_row_mut(0)[3] = 1.0;
        let rhs = RhsVector::new(vec![0.0; 6]).unwrap();
        assert!(matches!(solve_abd(&a, &rhs), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn dependence_rows() {
        let a = AbdMatrix::zeros(4, 3).unwrap();
        assert_eq!(dependence_profile(&a), vec![2, 2, 4, 4, 6, 6, 8, 8]);
        let b = AbdMatrix::zeros(6, 2).unwrap();
        assert_eq!(dependence_profile(&b), vec![2, 2, 6, 6, 6, 6, 10, 10, 10, 10]);
    }

    #[test]
    fn storage_matches_population() {
        let a = AbdMatrix::zeros(5, 7).unwrap();
        assert_eq!(a.stored_entries(), 2 * 5 + 7 * 5 * 3);
        // blocks overlap their predecessor in exactly two columns
        for b in 1..7 {
            assert_eq!(a.block_column_offset(b - 1) + 5 - a.block_column_offset(b), 2);
        }
    }

    #[test]
    fn flops_linear_in_l() {
        let mut rng = StdRng::seed_from_u64(3);
        let mut counts = Vec::new();
        for l in [20, 40, 80, 160] {
            let a = random(5, l, &mut rng);
            let rhs = RhsVector::new(vec![1.0; a.n()]).unwrap();
            let mut c = FlopCounter::new();
            solve_abd_counted(&a, &rhs, &mut c).unwrap();
            counts.push(c.count() as f64);
        }
        for w in counts.windows(2) {
            let ratio = w[1] / w[0];
            assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
        }
    }
}
