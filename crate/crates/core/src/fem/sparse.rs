//! Minimal complex CSR matrix with the operations the solvers need.

use num_complex::Complex64;

use crate::parallel;

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    /// Builds an `n×n` matrix from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_counts = vec![0usize; n];
        let mut rows: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < n && c < n, "triplet ({r},{c}) out of range for n={n}");
            if rows.last() == Some(&r) && col_idx.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
                row_counts[r] += 1;
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + row_counts[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[Complex64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// `y = A x`, rows computed independently (deterministic under rayon).
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.n);
        parallel::map_indexed(self.n, |i| {
            let (cols, vals) = self.row(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            acc
        })
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter()
                    .zip(vals)
                    .find(|(c, _)| **c == i)
                    .map(|(_, v)| *v)
                    .unwrap_or_else(|| Complex64::new(0.0, 0.0))
            })
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Max |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for i in 0..self.n {
            for &c in self.row(i).0 {
                bw = bw.max(i.abs_diff(c));
            }
        }
        bw
    }

    /// Largest asymmetry `|A_ij - conj(A_ji)|` relative to the matrix norm.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.norm_inf().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let (jc, jv) = self.row(j);
                let back = jc
                    .iter()
                    .zip(jv)
                    .find(|(c, _)| **c == i)
                    .map(|(_, v)| *v)
                    .unwrap_or_else(|| Complex64::new(0.0, 0.0));
                worst = worst.max((v - back.conj()).norm());
            }
        }
        worst / scale
    }

    /// `A + shift * I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut triplets: Vec<(usize, usize, Complex64)> = Vec::with_capacity(self.nnz() + self.n);
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((r, *c, *v));
            }
        }
        for r in 0..self.n {
            triplets.push((r, r, Complex64::new(shift, 0.0)));
        }
        Self::from_triplets(self.n, triplets)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                m[(i, *c)] += v;
            }
        }
        m
    }

    /// Restriction to the rows/columns in `keep` (sorted dof list).
    /// `index_of[dof]` maps a kept dof to its position in `keep`.
    pub fn restrict(&self, keep: &[usize], index_of: &[Option<usize>]) -> Self {
        let mut triplets = Vec::new();
        for (new_r, &old_r) in keep.iter().enumerate() {
            let (cols, vals) = self.row(old_r);
            for (c, v) in cols.iter().zip(vals) {
                if let Some(new_c) = index_of[*c] {
                    triplets.push((new_r, new_c, *v));
                }
            }
        }
        Self::from_triplets(keep.len(), triplets)
    }
}
