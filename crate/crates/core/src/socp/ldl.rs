//! Simplicial sparse LDL^T for the quasi-definite KKT systems of the
//! interior-point method, plus a greedy minimum-degree fill-reducing
//! ordering.

/// Greedy minimum-degree ordering on a symmetric sparsity pattern given as
/// adjacency lists (no self loops). Returns `order` with `order[k]` = the
/// original index eliminated at position `k`.
pub fn min_degree_order(n: usize, adjacency: &[Vec<u32>]) -> Vec<usize> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let mut adj: Vec<Vec<u32>> = adjacency.to_vec();
    let mut eliminated = vec![false; n];
    let mut degree: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut heap: BinaryHeap<Reverse<(usize, u32)>> = (0..n)
        .map(|i| Reverse((degree[i], i as u32)))
        .collect();
    let mut order = Vec::with_capacity(n);
    let mut mark = vec![false; n];

    while let Some(Reverse((deg, v))) = heap.pop() {
        let v = v as usize;
        if eliminated[v] || deg != degree[v] {
            continue; // stale heap entry
        }
        eliminated[v] = true;
        order.push(v);

        // Live neighborhood of v becomes a clique.
        let neighbors: Vec<u32> = adj[v]
            .iter()
            .copied()
            .filter(|&u| !eliminated[u as usize])
            .collect();
        adj[v] = Vec::new();
        for &u in &neighbors {
            mark[u as usize] = true;
        }
        for &u in &neighbors {
            let u = u as usize;
            // adj[u] := (adj[u] ∪ neighbors) \ {v, eliminated}
            let mut merged: Vec<u32> = Vec::with_capacity(adj[u].len() + neighbors.len());
            for &w in &adj[u] {
                let wi = w as usize;
                if wi != v && !eliminated[wi] {
                    merged.push(w);
                    mark[wi] = false; // present already
                }
            }
            for &w in &neighbors {
                let wi = w as usize;
                if wi != u && mark[wi] {
                    merged.push(w);
                }
            }
            // Restore marks for the next neighbor's pass.
            for &w in &neighbors {
                mark[w as usize] = true;
            }
            mark[u] = true;
            merged.sort_unstable();
            degree[u] = merged.len();
            adj[u] = merged;
            heap.push(Reverse((degree[u], u as u32)));
        }
        for &u in &neighbors {
            mark[u as usize] = false;
        }
    }
    order
}

/// Symbolic structure of the factorization (elimination tree + column
/// pointers), computed once per sparsity pattern.
pub struct LdlSymbolic {
    n: usize,
    parent: Vec<i64>,
    lp: Vec<usize>,
}

/// Numeric factor `P A P^T = L D L^T` with unit lower-triangular L.
pub struct LdlFactor {
    pub li: Vec<usize>,
    pub lx: Vec<f64>,
    pub d: Vec<f64>,
    /// Number of diagonal pivots rescued by dynamic regularization.
    pub regularized_pivots: usize,
}

impl LdlSymbolic {
    /// `colptr`/`rowidx` describe the upper triangle (diagonal included) of
    /// the already-permuted matrix in CSC form.
    pub fn analyze(n: usize, colptr: &[usize], rowidx: &[usize]) -> Self {
        let mut parent = vec![-1i64; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for j in 0..n {
            flag[j] = j;
            for p in colptr[j]..colptr[j + 1] {
                let mut i = rowidx[p];
                if i >= j {
                    continue;
                }
                while flag[i] != j {
                    if parent[i] == -1 {
                        parent[i] = j as i64;
                    }
                    lnz[i] += 1;
                    flag[i] = j;
                    i = parent[i] as usize;
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for j in 0..n {
            lp[j + 1] = lp[j] + lnz[j];
        }
        LdlSymbolic { n, parent, lp }
    }

    pub fn nnz(&self) -> usize {
        self.lp[self.n]
    }

    /// Up-looking numeric factorization. `signs[j]` gives the expected pivot
    /// sign; pivots smaller than `dyn_reg` in that direction are clamped.
    pub fn factorize(
        &self,
        colptr: &[usize],
        rowidx: &[usize],
        values: &[f64],
        signs: &[i8],
        dyn_reg: f64,
    ) -> LdlFactor {
        let n = self.n;
        let mut li = vec![0usize; self.nnz()];
        let mut lx = vec![0f64; self.nnz()];
        let mut d = vec![0f64; n];
        let mut y = vec![0f64; n];
        let mut pattern = vec![0usize; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz_used = vec![0usize; n];
        let mut regularized = 0usize;

        for j in 0..n {
            let mut top = n;
            flag[j] = j;
            y[j] = 0.0;
            for p in colptr[j]..colptr[j + 1] {
                let i0 = rowidx[p];
                if i0 > j {
                    continue;
                }
                y[i0] += values[p];
                let mut len = 0;
                let mut i = i0;
                while flag[i] != j {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = j;
                    i = self.parent[i] as usize;
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[j] = y[j];
            y[j] = 0.0;
            while top < n {
                let i = pattern[top];
                top += 1;
                let yi = y[i];
                y[i] = 0.0;
                let base = self.lp[i];
                for p in base..base + lnz_used[i] {
                    y[li[p]] -= lx[p] * yi;
                }
                let lji = yi / d[i];
                d[j] -= lji * yi;
                li[base + lnz_used[i]] = j;
                lx[base + lnz_used[i]] = lji;
                lnz_used[i] += 1;
            }
            let sign = f64::from(signs[j]);
            if sign * d[j] < dyn_reg {
                d[j] = sign * dyn_reg;
                regularized += 1;
            }
        }
        LdlFactor {
            li,
            lx,
            d,
            regularized_pivots: regularized,
        }
    }

    /// Solves `L D L^T x = b` in place (permuted coordinates).
    pub fn solve(&self, factor: &LdlFactor, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let bi = b[i];
            if bi != 0.0 {
                for p in self.lp[i]..self.lp[i + 1] {
                    b[factor.li[p]] -= factor.lx[p] * bi;
                }
            }
        }
        for i in 0..n {
            b[i] /= factor.d[i];
        }
        for i in (0..n).rev() {
            let mut bi = b[i];
            for p in self.lp[i]..self.lp[i + 1] {
                bi -= factor.lx[p] * b[factor.li[p]];
            }
            b[i] = bi;
        }
    }
}
