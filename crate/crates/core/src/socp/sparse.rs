//! Minimal compressed-sparse-column matrix support for the conic solver.

/// CSC matrix with sorted, deduplicated row indices per column.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowidx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CscMatrix {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowidx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_unstable_by_key(|&(r, c, _)| (c, r));
        let mut colptr = vec![0usize; ncols + 1];
        let mut rowidx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for &(r, c, v) in &entries {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            rowidx.push(r);
            values.push(v);
            colptr[c + 1] += 1;
        }
        for c in 0..ncols {
            colptr[c + 1] += colptr[c];
        }
        // Merge duplicates in place (entries are sorted by (col, row)).
        let mut out = CscMatrix {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowidx: Vec::with_capacity(rowidx.len()),
            values: Vec::with_capacity(values.len()),
        };
        let mut k = 0;
        for c in 0..ncols {
            let hi = colptr[c + 1];
            while k < hi {
                let r = rowidx[k];
                let mut v = values[k];
                k += 1;
                while k < hi && rowidx[k] == r {
                    v += values[k];
                    k += 1;
                }
                out.rowidx.push(r);
                out.values.push(v);
                out.colptr[c + 1] += 1;
            }
        }
        for c in 0..ncols {
            out.colptr[c + 1] += out.colptr[c];
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// y += alpha * A * x
    pub fn axpy(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for c in 0..self.ncols {
            let xc = alpha * x[c];
            if xc == 0.0 {
                continue;
            }
            for k in self.colptr[c]..self.colptr[c + 1] {
                y[self.rowidx[k]] += self.values[k] * xc;
            }
        }
    }

    /// y += alpha * A^T * x
    pub fn axpy_transpose(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for c in 0..self.ncols {
            let mut acc = 0.0;
            for k in self.colptr[c]..self.colptr[c + 1] {
                acc += self.values[k] * x[self.rowidx[k]];
            }
            y[c] += alpha * acc;
        }
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.colptr[c]..self.colptr[c + 1]).map(move |k| (self.rowidx[k], c, self.values[k]))
        })
    }

    pub fn infinity_norm(v: &[f64]) -> f64 {
        v.iter().fold(0.0_f64, |a, &x| a.max(x.abs()))
    }
}
