//! Fill-reducing ordering for symmetric sparse factorizations.
//!
//! Plain minimum-degree on an explicit elimination graph. Ties go to the
//! lowest original index so the ordering is deterministic.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use super::sparse::CscMatrix;

/// Symmetric adjacency (no self loops) of the pattern of an upper-triangular
/// CSC matrix.
pub fn adjacency_from_upper(m: &CscMatrix) -> Vec<Vec<usize>> {
    let n = m.ncols;
    let mut adj = vec![Vec::new(); n];
    for j in 0..n {
        for (i, _) in m.col(j) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// Returns `perm` with `perm[k]` = original index eliminated at step `k`.
pub fn minimum_degree(mut adj: Vec<Vec<usize>>) -> Vec<usize> {
    let n = adj.len();
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|v| Reverse((degree[v], v))).collect();
    let mut perm = Vec::with_capacity(n);
    let mut scratch = Vec::new();

    while let Some(Reverse((d, v))) = heap.pop() {
        if eliminated[v] || d != degree[v] {
            continue;
        }
        eliminated[v] = true;
        perm.push(v);
        let nbrs = core::mem::take(&mut adj[v]);
        for &u in &nbrs {
            merge_clique(&adj[u], &nbrs, u, v, &mut scratch);
            core::mem::swap(&mut adj[u], &mut scratch);
            degree[u] = adj[u].len();
            heap.push(Reverse((degree[u], u)));
        }
    }
    perm
}

/// `out = (a \ {drop}) ∪ (b \ {skip})`, all sorted.
fn merge_clique(a: &[usize], b: &[usize], skip: usize, drop: usize, out: &mut Vec<usize>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        if next != skip && next != drop {
            out.push(next);
        }
    }
}

/// Inverse permutation: `inv[perm[k]] = k`.
pub fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_graph_eliminates_leaves_first() {
        // hub 0 connected to 1..=4
        let adj = vec![vec![1, 2, 3, 4], vec![0], vec![0], vec![0], vec![0]];
        let perm = minimum_degree(adj);
        assert_eq!(perm.len(), 5);
        assert_eq!(perm[0], 1);
        let mut sorted = perm.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn inverse_roundtrip() {
        let perm = vec![2, 0, 3, 1];
        let inv = invert(&perm);
        for (k, &p) in perm.iter().enumerate() {
            assert_eq!(inv[p], k);
        }
    }
}
