use crate::error::{Error, Result};

const PIVOT_RTOL: f64 = 1e-14;

/// LU factorization with partial pivoting of a square banded matrix with
/// `kl` sub- and `ku` super-diagonals.
///
/// Row interchanges widen the upper band to `kl + ku`, so each row keeps
/// columns `i - kl ..= i + kl + ku`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    // row exchanged with row c while eliminating column c
    pivots: Vec<usize>,
    // last column that may hold a nonzero in each row
    row_end: Vec<usize>,
    factored: bool,
}

impl BandedLu {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
            row_end: (0..n).collect(),
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.kl + self.ku {
            None
        } else {
            Some(i * self.width + (j + self.kl - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Sets entry `(i, j)`; must lie within the original `kl`/`ku` band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside the band"
        );
        let s = self.slot(i, j).expect("in band");
        self.data[s] = v;
        self.row_end[i] = self.row_end[i].max(j);
    }

    /// Sets row `i` to `values` starting at column `first`; the run must lie
    /// within the original band.
    pub fn set_row(&mut self, i: usize, first: usize, values: &[f64]) {
        let last = first + values.len();
        assert!(
            first + self.kl >= i && last <= i + self.ku + 1,
            "row {i} run {first}..{last} outside the band"
        );
        let s = i * self.width + first + self.kl - i;
        self.data[s..s + values.len()].copy_from_slice(values);
        if last > first {
            self.row_end[i] = self.row_end[i].max(last - 1);
        }
    }

    /// Factorizes in place. Fails with the zero-based pivot row when a pivot
    /// falls below `1e-14` times the largest entry of the matrix.
    pub fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tiny = PIVOT_RTOL * scale;
        let w = self.width;
        let kl = self.kl;
        for c in 0..n {
            let last = (c + kl).min(n - 1);
            // column c of row r sits at r * w + c + kl - r
            let mut p = c;
            let mut best = self.data[c * w + kl].abs();
            for r in c + 1..=last {
                let v = self.data[r * w + c + kl - r].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(Error::Singular(format!("zero pivot in banded LU at row {c}")));
            }
            self.pivots[c] = p;
            if p != c {
                // p <= c + kl keeps columns c..=hi inside both rows' stored band
                let hi = self.row_end[c].max(self.row_end[p]);
                for j in c..=hi {
                    self.data.swap(c * w + j + kl - c, p * w + j + kl - p);
                }
                self.row_end.swap(c, p);
            }
            let pivot = self.data[c * w + kl];
            let hi = self.row_end[c];
            // row r keeps column j at r * w + j + kl - r, so the pivot-row tail
            // c+1..=hi is one contiguous run in every row
            let len = hi - c;
            for r in c + 1..=last {
                let sr = r * w + c + kl - r;
                let m = self.data[sr] / pivot;
                self.data[sr] = m;
                if m == 0.0 {
                    continue;
                }
                let (top, bottom) = self.data.split_at_mut(r * w);
                let src = &top[c * w + kl + 1..c * w + kl + 1 + len];
                let dst = &mut bottom[c + 1 + kl - r..c + 1 + kl - r + len];
                for (d, &u) in dst.iter_mut().zip(src) {
                    *d -= m * u;
                }
                self.row_end[r] = self.row_end[r].max(hi);
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A x = b` with the stored factors.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert!(self.factored, "solve called before factor");
        assert_eq!(rhs.len(), self.n);
        let n = self.n;
        let mut x = rhs.to_vec();
        let (w, kl) = (self.width, self.kl);
        // row interchanges are applied column by column; multipliers are stored unpermuted
        for c in 0..n {
            x.swap(c, self.pivots[c]);
            let last = (c + kl).min(n - 1);
            let xc = x[c];
            for r in c + 1..=last {
                x[r] -= self.data[r * w + c + kl - r] * xc;
            }
        }
        for c in (0..n).rev() {
            let hi = self.row_end[c];
            let row = &self.data[c * w + kl..c * w + kl + hi - c + 1];
            let acc = row[1..].iter().zip(&x[c + 1..=hi]).fold(x[c], |a, (u, v)| a - u * v);
            x[c] = acc / row[0];
        }
        x
    }
}
