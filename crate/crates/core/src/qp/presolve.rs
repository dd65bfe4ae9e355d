//! Removes fixed columns, empty and singleton rows, and rows that can never
//! bind; detects trivially infeasible data.

use alloc::vec;
use alloc::vec::Vec;

use super::sparse::{CscMatrix, TripletBuilder};
use super::{is_finite_bound, QuadProgram};

const FEAS_TOL: f64 = 1e-9;
const MAX_PASSES: usize = 8;

pub(super) struct Infeasible {
    pub residual: f64,
}

pub(super) struct Reduced {
    pub problem: QuadProgram,
    col_map: Vec<usize>,
    row_map: Vec<usize>,
    x_full: Vec<f64>,
}

impl Reduced {
    pub fn restore_x(&self, xr: &[f64]) -> Vec<f64> {
        let mut x = self.x_full.clone();
        for (r, &j) in self.col_map.iter().enumerate() {
            x[j] = xr[r];
        }
        x
    }

    pub fn restore_y(&self, yr: &[f64], m: usize) -> Vec<f64> {
        let mut y = vec![0.0; m];
        for (r, &i) in self.row_map.iter().enumerate() {
            y[i] = yr[r];
        }
        y
    }
}

fn tol(b: f64) -> f64 {
    FEAS_TOL * (1.0 + if b.is_finite() { b.abs() } else { 0.0 })
}

fn is_fixed(l: f64, u: f64) -> bool {
    l.is_finite() && u.is_finite() && u - l <= 1e-12 * l.abs().max(1.0)
}

pub(super) fn presolve(qp: &QuadProgram) -> Result<Reduced, Infeasible> {
    let n = qp.num_vars();
    let m = qp.num_rows();
    let mut lb = qp.col_lower.clone();
    let mut ub = qp.col_upper.clone();
    let mut rl = qp.row_lower.clone();
    let mut ru = qp.row_upper.clone();
    for v in lb.iter_mut().chain(rl.iter_mut()) {
        if !is_finite_bound(*v) {
            *v = f64::NEG_INFINITY;
        }
    }
    for v in ub.iter_mut().chain(ru.iter_mut()) {
        if !is_finite_bound(*v) {
            *v = f64::INFINITY;
        }
    }
    for j in 0..n {
        if lb[j] > ub[j] + tol(lb[j]) {
            return Err(Infeasible {
                residual: lb[j] - ub[j],
            });
        }
    }
    for i in 0..m {
        if rl[i] > ru[i] + tol(rl[i]) {
            return Err(Infeasible {
                residual: rl[i] - ru[i],
            });
        }
    }

    let rows = qp.a.transpose();
    let mut fixed = vec![false; n];
    let mut dropped = vec![false; m];
    let mut x_full = vec![0.0; n];

    for _ in 0..MAX_PASSES {
        let mut changed = false;
        for j in 0..n {
            if !fixed[j] && is_fixed(lb[j], ub[j]) {
                fixed[j] = true;
                x_full[j] = 0.5 * (lb[j] + ub[j]);
                changed = true;
            }
        }
        for i in 0..m {
            if dropped[i] {
                continue;
            }
            let mut constant = 0.0;
            let mut free_count = 0;
            let mut single = (0usize, 0.0f64);
            let mut amin = 0.0;
            let mut amax = 0.0;
            for (j, a) in rows.col(i) {
                if a == 0.0 {
                    continue;
                }
                if fixed[j] {
                    constant += a * x_full[j];
                    continue;
                }
                free_count += 1;
                single = (j, a);
                if a > 0.0 {
                    amin += a * lb[j];
                    amax += a * ub[j];
                } else {
                    amin += a * ub[j];
                    amax += a * lb[j];
                }
            }
            let lo = rl[i] - constant;
            let hi = ru[i] - constant;
            match free_count {
                0 => {
                    if 0.0 < lo - tol(lo) || 0.0 > hi + tol(hi) {
                        return Err(Infeasible {
                            residual: (lo).max(-hi),
                        });
                    }
                    dropped[i] = true;
                    changed = true;
                }
                1 => {
                    let (j, a) = single;
                    let (mut nl, mut nu) = if a > 0.0 { (lo / a, hi / a) } else { (hi / a, lo / a) };
                    if nl.is_nan() {
                        nl = f64::NEG_INFINITY;
                    }
                    if nu.is_nan() {
                        nu = f64::INFINITY;
                    }
                    if nl > lb[j] {
                        lb[j] = nl;
                    }
                    if nu < ub[j] {
                        ub[j] = nu;
                    }
                    if lb[j] > ub[j] {
                        if lb[j] - ub[j] > tol(lb[j]) {
                            return Err(Infeasible {
                                residual: (lb[j] - ub[j]) * a.abs(),
                            });
                        }
                        let mid = 0.5 * (lb[j] + ub[j]);
                        lb[j] = mid;
                        ub[j] = mid;
                    }
                    dropped[i] = true;
                    changed = true;
                }
                _ => {
                    if amin > hi + tol(hi) || amax < lo - tol(lo) {
                        return Err(Infeasible {
                            residual: (amin - hi).max(lo - amax),
                        });
                    }
                    if amin >= lo && amax <= hi {
                        dropped[i] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    for j in 0..n {
        if !fixed[j] && is_fixed(lb[j], ub[j]) {
            fixed[j] = true;
            x_full[j] = 0.5 * (lb[j] + ub[j]);
        }
    }

    // assemble the reduced problem
    let mut col_index = vec![usize::MAX; n];
    let mut col_map = Vec::new();
    for j in 0..n {
        if !fixed[j] {
            col_index[j] = col_map.len();
            col_map.push(j);
        }
    }
    let nr = col_map.len();
    let mut q: Vec<f64> = col_map.iter().map(|&j| qp.q[j]).collect();
    let mut offset = qp.offset;
    for j in 0..n {
        if fixed[j] {
            offset += qp.q[j] * x_full[j];
        }
    }
    let mut pb = TripletBuilder::new(nr, nr);
    for (i, j, v) in qp.p.triplets() {
        match (fixed[i], fixed[j]) {
            (false, false) => pb.push(col_index[i], col_index[j], v),
            (false, true) => q[col_index[i]] += v * x_full[j],
            (true, false) => q[col_index[j]] += v * x_full[i],
            (true, true) => {
                let w = if i == j { 0.5 } else { 1.0 };
                offset += w * v * x_full[i] * x_full[j];
            }
        }
    }

    let mut row_map = Vec::new();
    let mut row_lower = Vec::new();
    let mut row_upper = Vec::new();
    let mut ab = TripletBuilder::new(0, nr);
    for i in 0..m {
        if dropped[i] {
            continue;
        }
        let r = row_map.len();
        ab.grow_rows(r + 1);
        let mut constant = 0.0;
        for (j, a) in rows.col(i) {
            if fixed[j] {
                constant += a * x_full[j];
            } else if a != 0.0 {
                ab.push(r, col_index[j], a);
            }
        }
        row_map.push(i);
        row_lower.push(rl[i] - constant);
        row_upper.push(ru[i] - constant);
    }
    let a: CscMatrix = ab.build();

    Ok(Reduced {
        problem: QuadProgram {
            p: pb.build(),
            q,
            offset,
            a,
            row_lower,
            row_upper,
            col_lower: col_map.iter().map(|&j| lb[j]).collect(),
            col_upper: col_map.iter().map(|&j| ub[j]).collect(),
        },
        col_map,
        row_map,
        x_full,
    })
}
