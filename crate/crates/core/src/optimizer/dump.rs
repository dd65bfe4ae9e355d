use alloc::string::String;
use core::fmt::Write;

use super::QpProblem;

/// Plain-text dump of a window problem for cross-checking with other
/// solvers.
///
/// ```text
/// qp <n> <m> <window start> <window end>
/// offset <value>
/// P <i> <j> <value>        upper triangle
/// A <i> <j> <value>
/// q <j> <value>
/// col <j> <lower> <upper>
/// row <i> <lower> <upper>
/// pair <prosumer> <slot> <charge|trade> <inflow col> <outflow col>
/// ```
pub fn dump(problem: &QpProblem) -> String {
    let qp = &problem.qp;
    let mut s = String::new();
    let _ = writeln!(s, "qp {} {} {} {}", qp.num_vars(), qp.num_rows(), problem.start, problem.end);
    let _ = writeln!(s, "offset {:e}", qp.offset);
    for (i, j, v) in qp.p.triplets() {
        let _ = writeln!(s, "P {i} {j} {v:e}");
    }
    for (i, j, v) in qp.a.triplets() {
        let _ = writeln!(s, "A {i} {j} {v:e}");
    }
    for (j, v) in qp.q.iter().enumerate() {
        if *v != 0.0 {
            let _ = writeln!(s, "q {j} {v:e}");
        }
    }
    for j in 0..qp.num_vars() {
        let _ = writeln!(s, "col {j} {:e} {:e}", qp.col_lower[j], qp.col_upper[j]);
    }
    for i in 0..qp.num_rows() {
        let _ = writeln!(s, "row {i} {:e} {:e}", qp.row_lower[i], qp.row_upper[i]);
    }
    for p in &problem.pairs {
        let kind = match p.kind {
            super::PairKind::Charge => "charge",
            super::PairKind::Trade => "trade",
        };
        let _ = writeln!(s, "pair {} {} {kind} {} {}", p.prosumer, p.slot, p.inflow, p.outflow);
    }
    s
}
