//! Sparse LDLᵀ factorization for quasi-definite symmetric matrices.
//!
//! Symbolic analysis (ordering, elimination tree, column counts) runs once
//! per sparsity pattern; the numeric phase can be repeated with new values.
//! Pivots whose sign disagrees with the expected inertia are replaced by a
//! small signed regularization so the factorization never breaks down.

use alloc::vec;
use alloc::vec::Vec;

use super::ordering::{adjacency_from_upper, invert, minimum_degree};
use super::sparse::CscMatrix;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    // permuted upper-triangular pattern
    kp_colptr: Vec<usize>,
    kp_rowind: Vec<usize>,
    kp_values: Vec<f64>,
    /// original entry index -> permuted entry index
    map: Vec<usize>,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    // workspace
    y_markers: Vec<bool>,
    y_vals: Vec<f64>,
    y_idx: Vec<usize>,
    elim_buffer: Vec<usize>,
    next_in_col: Vec<usize>,
}

impl LdlFactor {
    /// Symbolic analysis of the upper-triangular pattern `k`. Every diagonal
    /// entry must be present in the pattern.
    pub fn analyze(k: &CscMatrix) -> Self {
        let n = k.ncols;
        let perm = minimum_degree(adjacency_from_upper(k));
        let iperm = invert(&perm);

        // permuted pattern, bucketed by new column
        let mut counts = vec![0usize; n + 1];
        for (i, j, _) in k.triplets() {
            let (a, b) = (iperm[i], iperm[j]);
            counts[a.max(b) + 1] += 1;
        }
        for c in 0..n {
            counts[c + 1] += counts[c];
        }
        let kp_colptr = counts.clone();
        let mut next = counts;
        let nnz = k.nnz();
        let mut kp_rowind = vec![0usize; nnz];
        let mut map = vec![0usize; nnz];
        for (e, (i, j, _)) in k.triplets().enumerate() {
            let (a, b) = (iperm[i], iperm[j]);
            let col = a.max(b);
            let slot = next[col];
            kp_rowind[slot] = a.min(b);
            map[e] = slot;
            next[col] += 1;
        }
        // sort rows inside each column, carrying the map along
        let mut inv_map = vec![0usize; nnz];
        for (e, &s) in map.iter().enumerate() {
            inv_map[s] = e;
        }
        for c in 0..n {
            let range = kp_colptr[c]..kp_colptr[c + 1];
            let mut pairs: Vec<(usize, usize)> = range
                .clone()
                .map(|s| (kp_rowind[s], inv_map[s]))
                .collect();
            pairs.sort_unstable();
            for (off, (r, e)) in pairs.into_iter().enumerate() {
                let s = range.start + off;
                kp_rowind[s] = r;
                map[e] = s;
            }
        }

        // elimination tree and column counts
        let mut work = vec![0usize; n];
        let mut lnz = vec![0usize; n];
        let mut etree = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for &row in &kp_rowind[kp_colptr[j]..kp_colptr[j + 1]] {
                let mut i = row;
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let lnnz = lp[n];

        Self {
            n,
            perm,
            kp_colptr,
            kp_rowind,
            kp_values: vec![0.0; nnz],
            map,
            etree,
            lp,
            li: vec![0; lnnz],
            lx: vec![0.0; lnnz],
            d: vec![0.0; n],
            dinv: vec![0.0; n],
            y_markers: vec![false; n],
            y_vals: vec![0.0; n],
            y_idx: vec![0; n],
            elim_buffer: vec![0; n],
            next_in_col: vec![0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }

    /// Numeric factorization. `values` follow the entry order of the matrix
    /// passed to [`LdlFactor::analyze`]; `signs[i]` is the expected pivot
    /// sign of original row `i` (+1 or -1). Pivots with `sign * d < eps` are
    /// replaced by `sign * delta`. Returns the number of replaced pivots.
    pub fn factor(&mut self, values: &[f64], signs: &[i8], eps: f64, delta: f64) -> usize {
        let n = self.n;
        for (e, &v) in values.iter().enumerate() {
            self.kp_values[self.map[e]] = v;
        }
        for i in 0..n {
            self.y_markers[i] = false;
            self.y_vals[i] = 0.0;
            self.d[i] = 0.0;
            self.next_in_col[i] = self.lp[i];
        }
        let mut regularized = 0;
        for k in 0..n {
            let mut nnz_y = 0;
            for p in self.kp_colptr[k]..self.kp_colptr[k + 1] {
                let bidx = self.kp_rowind[p];
                if bidx == k {
                    self.d[k] = self.kp_values[p];
                    continue;
                }
                self.y_vals[bidx] = self.kp_values[p];
                if !self.y_markers[bidx] {
                    self.y_markers[bidx] = true;
                    self.elim_buffer[0] = bidx;
                    let mut nnz_e = 1;
                    let mut next = self.etree[bidx];
                    while next != NONE && next < k {
                        if self.y_markers[next] {
                            break;
                        }
                        self.y_markers[next] = true;
                        self.elim_buffer[nnz_e] = next;
                        nnz_e += 1;
                        next = self.etree[next];
                    }
                    while nnz_e > 0 {
                        nnz_e -= 1;
                        self.y_idx[nnz_y] = self.elim_buffer[nnz_e];
                        nnz_y += 1;
                    }
                }
            }
            for idx in (0..nnz_y).rev() {
                let c = self.y_idx[idx];
                let slot = self.next_in_col[c];
                let yc = self.y_vals[c];
                for j in self.lp[c]..slot {
                    self.y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[slot] = k;
                let l = yc * self.dinv[c];
                self.lx[slot] = l;
                self.d[k] -= yc * l;
                self.next_in_col[c] += 1;
                self.y_vals[c] = 0.0;
                self.y_markers[c] = false;
            }
            let sign = f64::from(signs[self.perm[k]]);
            if self.d[k] * sign < eps {
                self.d[k] = sign * delta;
                regularized += 1;
            }
            self.dinv[k] = 1.0 / self.d[k];
        }
        regularized
    }

    /// Solve `K x = b` in place (original ordering).
    pub fn solve(&self, b: &mut [f64], work: &mut Vec<f64>) {
        let n = self.n;
        work.clear();
        work.extend(self.perm.iter().map(|&p| b[p]));
        let x = work.as_mut_slice();
        for i in 0..n {
            let xi = x[i];
            if xi != 0.0 {
                for j in self.lp[i]..self.lp[i + 1] {
                    x[self.li[j]] -= self.lx[j] * xi;
                }
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                acc -= self.lx[j] * x[self.li[j]];
            }
            x[i] = acc;
        }
        for (k, &xk) in x.iter().enumerate() {
            b[self.perm[k]] = xk;
        }
    }
}
