use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{BinaryPair, QpProblem};
use crate::error::Result;
use crate::model::SlotDecision;
use crate::qp::{self, QpSettings, QpStatus, QuadProgram};

/// Power above which a pair member counts as active, kW.
pub const PAIR_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterLimit,
}

/// How the complementarity pairs ended up satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedBy {
    /// The relaxation was already complementary.
    Natural,
    Repair,
    Branch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MiqpMode {
    Repair,
    Branch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiqpLimits {
    pub max_repair_passes: usize,
    pub max_nodes: usize,
    pub qp: QpSettings,
}

impl Default for MiqpLimits {
    fn default() -> Self {
        Self {
            max_repair_passes: 20,
            max_nodes: 5000,
            qp: QpSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: f64,
    /// Objective of the root relaxation.
    pub relaxed_objective: f64,
    /// `objective - relaxed_objective`.
    pub relaxation_gap: f64,
    /// `[prosumer][k]` for slot `start + k`.
    pub decisions: Vec<Vec<SlotDecision>>,
    pub x: Vec<f64>,
    pub fixed_by: FixedBy,
    /// Interior-point iterations over every solve.
    pub iterations: usize,
    /// Relaxations solved.
    pub nodes: usize,
    /// For an infeasible status, the certificate residual.
    pub residual: f64,
}

/// Which member of each pair is forced to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fix {
    Inflow,
    Outflow,
}

struct Relaxation {
    status: QpStatus,
    x: Vec<f64>,
    objective: f64,
    iterations: usize,
    residual: f64,
}

fn relax(problem: &QpProblem, fixes: &[(usize, Fix)], settings: &QpSettings) -> Result<Relaxation> {
    let mut qp = problem.qp.clone();
    for &(i, f) in fixes {
        let p = &problem.pairs[i];
        let c = match f {
            Fix::Inflow => p.inflow,
            Fix::Outflow => p.outflow,
        };
        qp.col_upper[c] = 0.0;
        qp.col_lower[c] = 0.0;
    }
    let mut s = qp::solve(&qp, settings)?;
    if s.status == QpStatus::Optimal {
        s.objective -= unwash(problem, &qp, &mut s.x);
    }
    Ok(Relaxation {
        status: s.status,
        objective: s.objective,
        residual: s.primal_residual,
        x: s.x,
        iterations: s.iterations,
    })
}

/// Move flow that a relaxation puts on both members of a pair onto the
/// pair's bypass column where that does not raise the objective. Interior
/// point solutions sit inside the optimal face, so without this the search
/// would branch on pairs that cost nothing to separate. Returns the
/// objective decrease.
fn unwash(problem: &QpProblem, qp: &QuadProgram, x: &mut [f64]) -> f64 {
    let mut saved = 0.0;
    for p in &problem.pairs {
        let Some(b) = p.bypass else { continue };
        let dq = qp.q[p.inflow] + qp.q[p.outflow];
        if dq < 0.0 || qp.q[b] != 0.0 {
            continue;
        }
        let m = x[p.inflow].min(x[p.outflow]).min(qp.col_upper[b] - x[b]);
        if m > 0.0 {
            x[p.inflow] -= m;
            x[p.outflow] -= m;
            x[b] += m;
            saved += dq * m;
        }
    }
    saved
}

fn violated(problem: &QpProblem, x: &[f64]) -> Vec<usize> {
    problem
        .pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| x[p.inflow] > PAIR_TOL && x[p.outflow] > PAIR_TOL)
        .map(|(i, _)| i)
        .collect()
}

fn report(problem: &QpProblem, r: Relaxation, root: f64, fixed_by: FixedBy, iterations: usize, nodes: usize) -> SolveReport {
    let status = match r.status {
        QpStatus::Optimal => SolveStatus::Optimal,
        QpStatus::Infeasible => SolveStatus::Infeasible,
        QpStatus::IterLimit => SolveStatus::IterLimit,
    };
    SolveReport {
        status,
        objective: r.objective,
        relaxed_objective: root,
        relaxation_gap: r.objective - root,
        decisions: problem.decisions(&r.x),
        x: r.x,
        fixed_by,
        iterations,
        nodes,
        residual: r.residual,
    }
}

/// Solve the convex relaxation.
pub fn solve_qp(problem: &QpProblem, settings: &QpSettings) -> Result<SolveReport> {
    let r = relax(problem, &[], settings)?;
    let obj = r.objective;
    let it = r.iterations;
    Ok(report(problem, r, obj, FixedBy::Natural, it, 1))
}

/// Solve the problem with every complementarity pair enforced.
pub fn solve_miqp(problem: &QpProblem, mode: MiqpMode, limits: &MiqpLimits) -> Result<SolveReport> {
    let root = relax(problem, &[], &limits.qp)?;
    let root_obj = root.objective;
    let mut iterations = root.iterations;
    if root.status != QpStatus::Optimal || violated(problem, &root.x).is_empty() {
        return Ok(report(problem, root, root_obj, FixedBy::Natural, iterations, 1));
    }
    let root_x = root.x.clone();
    let (rep, used_it, used_nodes) = repair(problem, root, limits)?;
    iterations += used_it;
    let mut nodes = 1 + used_nodes;
    if mode == MiqpMode::Repair || rep.status == QpStatus::IterLimit {
        return Ok(report(problem, rep, root_obj, FixedBy::Repair, iterations, nodes));
    }

    // best-first branch and bound seeded with the repair incumbent
    let mut best = if rep.status == QpStatus::Optimal && violated(problem, &rep.x).is_empty() {
        Some(rep)
    } else {
        None
    };
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node {
        bound: root_obj,
        seq,
        fixes: Vec::new(),
        x: root_x,
    });
    let mut hit_limit = false;
    while let Some(node) = heap.pop() {
        if let Some(b) = &best {
            if node.bound >= b.objective - prune_tol(b.objective) {
                continue;
            }
        }
        if nodes >= limits.max_nodes {
            hit_limit = true;
            break;
        }
        let pick = violated(problem, &node.x)
            .into_iter()
            .map(|i| (i, node.x[problem.pairs[i].inflow].min(node.x[problem.pairs[i].outflow])))
            .fold(None, |acc: Option<(usize, f64)>, c| match acc {
                Some(a) if a.1 >= c.1 => Some(a),
                _ => Some(c),
            });
        let Some((pair, _)) = pick else { continue };
        for f in [Fix::Inflow, Fix::Outflow] {
            let mut fx = node.fixes.clone();
            fx.push((pair, f));
            let r = relax(problem, &fx, &limits.qp)?;
            nodes += 1;
            iterations += r.iterations;
            if r.status != QpStatus::Optimal {
                continue;
            }
            if let Some(b) = &best {
                if r.objective >= b.objective - prune_tol(b.objective) {
                    continue;
                }
            }
            if violated(problem, &r.x).is_empty() {
                best = Some(r);
            } else {
                seq += 1;
                heap.push(Node {
                    bound: r.objective,
                    seq,
                    fixes: fx,
                    x: r.x,
                });
            }
        }
    }
    match best {
        Some(b) => {
            let mut rep = report(problem, b, root_obj, FixedBy::Branch, iterations, nodes);
            if hit_limit {
                rep.status = SolveStatus::IterLimit;
            }
            Ok(rep)
        }
        None => {
            let status = if hit_limit {
                SolveStatus::IterLimit
            } else {
                SolveStatus::Infeasible
            };
            let r = relax(problem, &[], &limits.qp)?;
            let mut rep = report(problem, r, root_obj, FixedBy::Branch, iterations, nodes);
            rep.status = status;
            Ok(rep)
        }
    }
}

fn prune_tol(obj: f64) -> f64 {
    1e-9 * obj.abs().max(1.0)
}

/// Which member to zero when a pair is active on both sides: the smaller
/// one, with ties sent toward the arbitrage direction of the slot.
fn repair_choice(problem: &QpProblem, pair: &BinaryPair, x: &[f64]) -> Fix {
    let (a, b) = (x[pair.inflow], x[pair.outflow]);
    if (a - b).abs() > PAIR_TOL {
        return if a < b { Fix::Inflow } else { Fix::Outflow };
    }
    let price = problem.slot_price[pair.slot - problem.start];
    if price > problem.mean_price {
        Fix::Inflow
    } else {
        Fix::Outflow
    }
}

type RepairOutcome = (Relaxation, usize, usize);

fn repair(problem: &QpProblem, mut current: Relaxation, limits: &MiqpLimits) -> Result<RepairOutcome> {
    let mut fixes: Vec<(usize, Fix)> = Vec::new();
    let mut iterations = 0;
    let mut nodes = 0;
    for _ in 0..limits.max_repair_passes {
        let bad = violated(problem, &current.x);
        if bad.is_empty() {
            return Ok((current, iterations, nodes));
        }
        let choice: Vec<(usize, Fix)> = bad.iter().map(|&i| (i, repair_choice(problem, &problem.pairs[i], &current.x))).collect();
        let mut trial = fixes.clone();
        trial.extend_from_slice(&choice);
        let mut r = relax(problem, &trial, &limits.qp)?;
        nodes += 1;
        iterations += r.iterations;
        if r.status == QpStatus::Infeasible {
            // try the opposite members before giving up
            trial.truncate(fixes.len());
            trial.extend(choice.iter().map(|&(i, f)| {
                (
                    i,
                    match f {
                        Fix::Inflow => Fix::Outflow,
                        Fix::Outflow => Fix::Inflow,
                    },
                )
            }));
            r = relax(problem, &trial, &limits.qp)?;
            nodes += 1;
            iterations += r.iterations;
        }
        if r.status != QpStatus::Optimal {
            return Ok((r, iterations, nodes));
        }
        fixes = trial;
        current = r;
    }
    if !violated(problem, &current.x).is_empty() {
        current.status = QpStatus::IterLimit;
    }
    Ok((current, iterations, nodes))
}

struct Node {
    bound: f64,
    seq: usize,
    fixes: Vec<(usize, Fix)>,
    x: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // max-heap: smallest bound first, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}
