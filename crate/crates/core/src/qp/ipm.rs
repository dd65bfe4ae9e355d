//! Mehrotra predictor-corrector interior-point method for
//!
//! ```text
//! min ½ xᵀPx + qᵀx   s.t.  A x = b,  lb ≤ x ≤ ub
//! ```
//!
//! Inequality rows of the caller's problem are turned into equalities with a
//! bounded slack column. Iterates stay strictly inside the variable bounds.

use alloc::vec;
use alloc::vec::Vec;

use super::ldl::LdlFactor;
use super::sparse::{CscMatrix, TripletBuilder};
use super::{is_finite_bound, QpSettings, QpStatus, QuadProgram};

const STATIC_REG: f64 = 1e-9;
const DYN_EPS: f64 = 1e-13;
const DYN_DELTA: f64 = 1e-7;
const STEP_FRACTION: f64 = 0.99;

pub(super) struct Inner {
    pub status: QpStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

struct Scaling {
    /// column scaling, original x = d * scaled x
    d: Vec<f64>,
    /// row scaling, scaled row = e * original row
    e: Vec<f64>,
    /// cost scaling
    c: f64,
}

fn ruiz(p: &mut CscMatrix, a: &mut CscMatrix, q: &mut [f64], passes: usize) -> Scaling {
    let n = q.len();
    let m = a.nrows;
    let mut d = vec![1.0; n];
    let mut e = vec![1.0; m];
    let mut col_norm = vec![0.0f64; n];
    let mut row_norm = vec![0.0f64; m];
    for _ in 0..passes {
        col_norm.iter_mut().for_each(|v| *v = 0.0);
        row_norm.iter_mut().for_each(|v| *v = 0.0);
        for (i, j, v) in p.triplets() {
            col_norm[i] = col_norm[i].max(v.abs());
            col_norm[j] = col_norm[j].max(v.abs());
        }
        for (i, j, v) in a.triplets() {
            col_norm[j] = col_norm[j].max(v.abs());
            row_norm[i] = row_norm[i].max(v.abs());
        }
        let ds: Vec<f64> = col_norm.iter().map(|&v| inv_sqrt_clamped(v)).collect();
        let es: Vec<f64> = row_norm.iter().map(|&v| inv_sqrt_clamped(v)).collect();
        let mut k = 0;
        for j in 0..p.ncols {
            for t in p.colptr[j]..p.colptr[j + 1] {
                p.values[t] *= ds[p.rowind[t]] * ds[j];
                k += 1;
            }
        }
        debug_assert_eq!(k, p.nnz());
        for j in 0..a.ncols {
            for t in a.colptr[j]..a.colptr[j + 1] {
                a.values[t] *= es[a.rowind[t]] * ds[j];
            }
        }
        for j in 0..n {
            d[j] *= ds[j];
        }
        for i in 0..m {
            e[i] *= es[i];
        }
    }
    for j in 0..n {
        q[j] *= d[j];
    }
    // cost scaling
    let mut pcol = vec![0.0f64; n];
    for (i, j, v) in p.triplets() {
        pcol[i] = pcol[i].max(v.abs());
        pcol[j] = pcol[j].max(v.abs());
    }
    let mean_p = if n > 0 { pcol.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let q_inf = q.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let scale = mean_p.max(q_inf);
    let c = if scale > 0.0 { 1.0 / scale.clamp(1e-4, 1e4) } else { 1.0 };
    p.values.iter_mut().for_each(|v| *v *= c);
    q.iter_mut().for_each(|v| *v *= c);
    Scaling { d, e, c }
}

fn inv_sqrt_clamped(v: f64) -> f64 {
    if v > 0.0 {
        (1.0 / libm::sqrt(v)).clamp(1e-4, 1e4)
    } else {
        1.0
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Problem in standard form with its KKT pattern.
struct Standard {
    n: usize,
    /// primal columns incl. slacks
    nv: usize,
    /// equality rows
    m: usize,
    p: CscMatrix,
    q: Vec<f64>,
    /// rows x columns, incl. slack columns
    a: CscMatrix,
    b: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    has_l: Vec<bool>,
    has_u: Vec<bool>,
    /// unscaling factor per column (original = col_scale * scaled)
    col_scale: Vec<f64>,
    row_scale: Vec<f64>,
    cost_scale: f64,
}

pub(super) fn solve(qp: &QuadProgram, settings: &QpSettings) -> Inner {
    let n = qp.num_vars();
    let m0 = qp.num_rows();
    let mut p = qp.p.clone();
    let mut a0 = qp.a.clone();
    let mut q = qp.q.clone();
    let sc = ruiz(&mut p, &mut a0, &mut q, settings.scaling_passes);

    // classify rows, add slacks
    let rows = a0.transpose();
    let mut slack_of = vec![usize::MAX; m0];
    let mut nslack = 0;
    for i in 0..m0 {
        let (l, u) = (qp.row_lower[i], qp.row_upper[i]);
        if !(l == u) {
            slack_of[i] = n + nslack;
            nslack += 1;
        }
    }
    let nv = n + nslack;
    let mut ab = TripletBuilder::new(m0, nv);
    let mut b = vec![0.0; m0];
    let mut lb = vec![f64::NEG_INFINITY; nv];
    let mut ub = vec![f64::INFINITY; nv];
    let mut col_scale = vec![1.0; nv];
    for i in 0..m0 {
        for (j, v) in rows.col(i) {
            ab.push(i, j, v);
        }
        let e = sc.e[i];
        if slack_of[i] == usize::MAX {
            b[i] = qp.row_lower[i] * e;
        } else {
            let s = slack_of[i];
            ab.push(i, s, -1.0);
            if is_finite_bound(qp.row_lower[i]) {
                lb[s] = qp.row_lower[i] * e;
            }
            if is_finite_bound(qp.row_upper[i]) {
                ub[s] = qp.row_upper[i] * e;
            }
            col_scale[s] = 1.0 / e;
        }
    }
    for j in 0..n {
        let d = sc.d[j];
        if is_finite_bound(qp.col_lower[j]) {
            lb[j] = qp.col_lower[j] / d;
        }
        if is_finite_bound(qp.col_upper[j]) {
            ub[j] = qp.col_upper[j] / d;
        }
        col_scale[j] = d;
    }
    q.resize(nv, 0.0);
    let a = ab.build();
    let std = Standard {
        n,
        nv,
        m: m0,
        p,
        q,
        a,
        b,
        has_l: lb.iter().map(|v| v.is_finite()).collect(),
        has_u: ub.iter().map(|v| v.is_finite()).collect(),
        lb,
        ub,
        col_scale,
        row_scale: sc.e.clone(),
        cost_scale: sc.c,
    };
    let mut inner = run(&std, settings);
    // unscale
    let mut x = vec![0.0; n];
    for j in 0..n {
        x[j] = inner.x[j] * std.col_scale[j];
    }
    inner.x = x;
    for i in 0..m0 {
        inner.y[i] *= std.row_scale[i] / std.cost_scale;
    }
    inner
}

struct Kkt {
    matrix: CscMatrix,
    diag_pos: Vec<usize>,
    base_diag: Vec<f64>,
    signs: Vec<i8>,
    factor: LdlFactor,
    work: Vec<f64>,
    sol: Vec<f64>,
    resid: Vec<f64>,
}

impl Kkt {
    fn new(s: &Standard) -> Self {
        let dim = s.nv + s.m;
        let mut tb = TripletBuilder::new(dim, dim);
        for (i, j, v) in s.p.triplets() {
            tb.push(i, j, v);
        }
        for k in 0..dim {
            tb.push(k, k, 0.0);
        }
        for (i, j, v) in s.a.triplets() {
            tb.push(j, s.nv + i, v);
        }
        let matrix = tb.build();
        let mut diag_pos = vec![0; dim];
        let mut base_diag = vec![0.0; dim];
        for j in 0..dim {
            for t in matrix.colptr[j]..matrix.colptr[j + 1] {
                if matrix.rowind[t] == j {
                    diag_pos[j] = t;
                    base_diag[j] = matrix.values[t];
                }
            }
        }
        let signs = (0..dim).map(|k| if k < s.nv { 1 } else { -1 }).collect();
        let factor = LdlFactor::analyze(&matrix);
        Self {
            matrix,
            diag_pos,
            base_diag,
            signs,
            factor,
            work: Vec::new(),
            sol: vec![0.0; dim],
            resid: vec![0.0; dim],
        }
    }

    /// Factor `[P + diag(sigma), Aᵀ; A, 0]` (plus static regularization).
    fn factor(&mut self, sigma: &[f64], nv: usize) {
        for (k, &pos) in self.diag_pos.iter().enumerate() {
            self.matrix.values[pos] = if k < nv {
                self.base_diag[k] + sigma[k] + STATIC_REG
            } else {
                -STATIC_REG
            };
        }
        self.factor
            .factor(&self.matrix.values, &self.signs, DYN_EPS, DYN_DELTA);
    }

    /// Solve with iterative refinement against the unregularized matrix.
    fn solve(&mut self, rhs: &[f64], nv: usize) -> &[f64] {
        let dim = rhs.len();
        self.sol.copy_from_slice(rhs);
        self.factor.solve(&mut self.sol, &mut self.work);
        let rhs_norm = norm_inf(rhs);
        let mut last = f64::INFINITY;
        for _ in 0..8 {
            // resid = rhs - K_true * sol
            self.resid.copy_from_slice(rhs);
            let mut ks = vec![0.0; dim];
            self.matrix.sym_upper_mul_add(&self.sol, &mut ks);
            for k in 0..dim {
                let corr = if k < nv { STATIC_REG } else { -STATIC_REG };
                self.resid[k] -= ks[k] - corr * self.sol[k];
            }
            let rn = norm_inf(&self.resid);
            if rn <= 1e-14 * (1.0 + rhs_norm) || rn >= 0.5 * last {
                break;
            }
            last = rn;
            let mut delta = self.resid.clone();
            self.factor.solve(&mut delta, &mut self.work);
            for k in 0..dim {
                self.sol[k] += delta[k];
            }
        }
        &self.sol
    }
}

fn run(s: &Standard, settings: &QpSettings) -> Inner {
    let nv = s.nv;
    let m = s.m;
    let eps = settings.tolerance;

    let mut x = vec![0.0; nv];
    for j in 0..nv {
        x[j] = initial_value(s.lb[j], s.ub[j], s.has_l[j], s.has_u[j]);
    }
    let mut lam = vec![0.0; m];
    let mut zl: Vec<f64> = s.has_l.iter().map(|&h| if h { 1.0 } else { 0.0 }).collect();
    let mut zu: Vec<f64> = s.has_u.iter().map(|&h| if h { 1.0 } else { 0.0 }).collect();
    let nbounds = s.has_l.iter().filter(|&&h| h).count() + s.has_u.iter().filter(|&&h| h).count();

    let mut kkt = Kkt::new(s);
    let dim = nv + m;
    let mut rhs = vec![0.0; dim];
    let mut sigma = vec![0.0; nv];
    let mut sl = vec![0.0; nv];
    let mut su = vec![0.0; nv];
    let mut rd = vec![0.0; nv];
    let mut rp = vec![0.0; m];
    let mut px = vec![0.0; nv];
    let mut atl = vec![0.0; nv];
    let mut ax = vec![0.0; m];

    let q_inf_unscaled = (0..nv)
        .map(|j| (s.q[j] / (s.cost_scale * s.col_scale[j])).abs())
        .fold(0.0, f64::max);
    let b_inf_unscaled = (0..m).map(|i| (s.b[i] / s.row_scale[i]).abs()).fold(0.0, f64::max);

    let mut status = QpStatus::IterLimit;
    let mut iterations = 0;
    let mut pres = f64::INFINITY;
    let mut dres = f64::INFINITY;
    let mut stalls = 0;

    for iter in 0..=settings.max_iter {
        iterations = iter;
        for j in 0..nv {
            sl[j] = if s.has_l[j] { x[j] - s.lb[j] } else { 0.0 };
            su[j] = if s.has_u[j] { s.ub[j] - x[j] } else { 0.0 };
        }
        px.iter_mut().for_each(|v| *v = 0.0);
        s.p.sym_upper_mul_add(&x[..s.n], &mut px[..s.n]);
        atl.iter_mut().for_each(|v| *v = 0.0);
        s.a.mul_t_add(&lam, &mut atl);
        ax.iter_mut().for_each(|v| *v = 0.0);
        s.a.mul_add(&x, &mut ax);
        for j in 0..nv {
            rd[j] = px[j] + s.q[j] - atl[j] - zl[j] + zu[j];
        }
        for i in 0..m {
            rp[i] = ax[i] - s.b[i];
        }
        let compl: f64 = (0..nv).map(|j| sl[j] * zl[j] + su[j] * zu[j]).sum();
        let mu = if nbounds > 0 { compl / nbounds as f64 } else { 0.0 };

        // convergence in unscaled units
        pres = (0..m).map(|i| (rp[i] / s.row_scale[i]).abs()).fold(0.0, f64::max);
        dres = (0..nv)
            .map(|j| (rd[j] / (s.cost_scale * s.col_scale[j])).abs())
            .fold(0.0, f64::max);
        let ax_inf = (0..m).map(|i| (ax[i] / s.row_scale[i]).abs()).fold(0.0, f64::max);
        let px_inf = (0..nv)
            .map(|j| (px[j] / (s.cost_scale * s.col_scale[j])).abs())
            .fold(0.0, f64::max);
        let atl_inf = (0..nv)
            .map(|j| (atl[j] / (s.cost_scale * s.col_scale[j])).abs())
            .fold(0.0, f64::max);
        let obj: f64 = {
            let quad: f64 = (0..s.n).map(|j| px[j] * x[j]).sum();
            let lin: f64 = (0..nv).map(|j| s.q[j] * x[j]).sum();
            (0.5 * quad + lin) / s.cost_scale
        };
        let gap = compl / s.cost_scale;
        let p_ok = pres <= eps * (1.0 + ax_inf.max(b_inf_unscaled));
        let d_ok = dres <= eps * (1.0 + px_inf.max(atl_inf).max(q_inf_unscaled));
        let g_ok = gap <= eps * (1.0 + obj.abs());
        if p_ok && d_ok && g_ok {
            status = QpStatus::Optimal;
            break;
        }
        if iter == settings.max_iter {
            if !p_ok && pres > 1e-6 * (1.0 + ax_inf.max(b_inf_unscaled)) {
                status = QpStatus::Infeasible;
            }
            break;
        }
        if !p_ok && iter >= 5 && farkas_certificate(s, &lam) {
            status = QpStatus::Infeasible;
            break;
        }
        let lam_inf = norm_inf(&lam).max(norm_inf(&zl)).max(norm_inf(&zu));
        if lam_inf > 1e12 && !p_ok {
            status = QpStatus::Infeasible;
            break;
        }

        for j in 0..nv {
            let mut sg = 0.0;
            if s.has_l[j] {
                sg += zl[j] / sl[j];
            }
            if s.has_u[j] {
                sg += zu[j] / su[j];
            }
            sigma[j] = sg;
        }
        kkt.factor(&sigma, nv);

        // predictor
        for j in 0..nv {
            rhs[j] = -rd[j] - zl[j] + zu[j];
        }
        for i in 0..m {
            rhs[nv + i] = -rp[i];
        }
        let aff = kkt.solve(&rhs, nv).to_vec();
        let (dzl_a, dzu_a) = bound_directions(s, &aff[..nv], &sl, &su, &zl, &zu, None, 0.0);
        let alpha_aff = step_length(s, &aff[..nv], &dzl_a, &dzu_a, &sl, &su, &zl, &zu).min(1.0);
        let mu_aff = if nbounds > 0 {
            let mut acc = 0.0;
            for j in 0..nv {
                let dx = aff[j];
                if s.has_l[j] {
                    acc += (sl[j] + alpha_aff * dx) * (zl[j] + alpha_aff * dzl_a[j]);
                }
                if s.has_u[j] {
                    acc += (su[j] - alpha_aff * dx) * (zu[j] + alpha_aff * dzu_a[j]);
                }
            }
            acc / nbounds as f64
        } else {
            0.0
        };
        let sigma_c = if mu > 0.0 {
            let r = mu_aff / mu;
            (r * r * r).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let target = sigma_c * mu;

        // corrector
        for j in 0..nv {
            let dx = aff[j];
            let mut r = -rd[j];
            if s.has_l[j] {
                let rcl = target - sl[j] * zl[j] - dx * dzl_a[j];
                r += rcl / sl[j];
            }
            if s.has_u[j] {
                let rcu = target - su[j] * zu[j] + dx * dzu_a[j];
                r -= rcu / su[j];
            }
            rhs[j] = r;
        }
        let dir = kkt.solve(&rhs, nv).to_vec();
        let (dzl, dzu) = bound_directions(
            s,
            &dir[..nv],
            &sl,
            &su,
            &zl,
            &zu,
            Some((&aff[..nv], &dzl_a, &dzu_a)),
            target,
        );
        let alpha_max = step_length(s, &dir[..nv], &dzl, &dzu, &sl, &su, &zl, &zu);
        let alpha = (STEP_FRACTION * alpha_max).min(1.0);
        if alpha < 1e-10 {
            stalls += 1;
            if stalls > 5 {
                status = if p_ok { QpStatus::IterLimit } else { QpStatus::Infeasible };
                break;
            }
        } else {
            stalls = 0;
        }
        for j in 0..nv {
            x[j] += alpha * dir[j];
            zl[j] += alpha * dzl[j];
            zu[j] += alpha * dzu[j];
        }
        for i in 0..m {
            lam[i] -= alpha * dir[nv + i];
        }
        // keep iterates strictly interior against round-off
        for j in 0..nv {
            if s.has_l[j] && x[j] <= s.lb[j] {
                x[j] = s.lb[j] + 1e-14 * (1.0 + s.lb[j].abs());
            }
            if s.has_u[j] && x[j] >= s.ub[j] {
                x[j] = s.ub[j] - 1e-14 * (1.0 + s.ub[j].abs());
            }
        }
    }

    Inner {
        status,
        x,
        y: lam,
        iterations,
        primal_residual: pres,
        dual_residual: dres,
    }
}

/// `y` proves infeasibility when `yᵀA x = yᵀb` cannot hold for any `x`
/// inside the bounds.
fn farkas_certificate(s: &Standard, y: &[f64]) -> bool {
    let y_inf = norm_inf(y);
    if y_inf == 0.0 || !y_inf.is_finite() {
        return false;
    }
    let mut aty = vec![0.0; s.nv];
    s.a.mul_t_add(y, &mut aty);
    let yb: f64 = y.iter().zip(&s.b).map(|(a, b)| a * b).sum();
    let (mut lo, mut hi) = (0.0, 0.0);
    let mut scale = yb.abs();
    for j in 0..s.nv {
        let c = aty[j];
        if c.abs() <= 1e-10 * y_inf {
            continue;
        }
        let (a, b) = (c * s.lb[j], c * s.ub[j]);
        lo += a.min(b);
        hi += a.max(b);
        scale = scale.max(a.abs().min(b.abs()));
    }
    let margin = 1e-6 * (y_inf + scale);
    lo > yb + margin || hi < yb - margin
}

fn initial_value(l: f64, u: f64, has_l: bool, has_u: bool) -> f64 {
    match (has_l, has_u) {
        (true, true) => {
            if u - l <= 2.0 {
                0.5 * (l + u)
            } else {
                0.0f64.clamp(l + 1.0, u - 1.0)
            }
        }
        (true, false) => (l + 1.0).max(0.0),
        (false, true) => (u - 1.0).min(0.0),
        (false, false) => 0.0,
    }
}

/// Bound multiplier directions given a primal direction `dx`.
///
/// lower: `dz = (target - s z - corr - z dx) / s` with `corr = dx_aff dz_aff`,
/// upper: `dz = (target - s z + corr + z dx) / s` with `corr = dx_aff dz_aff`.
#[allow(clippy::too_many_arguments)]
fn bound_directions(
    s: &Standard,
    dx: &[f64],
    sl: &[f64],
    su: &[f64],
    zl: &[f64],
    zu: &[f64],
    affine: Option<(&[f64], &[f64], &[f64])>,
    target: f64,
) -> (Vec<f64>, Vec<f64>) {
    let nv = dx.len();
    let mut dzl = vec![0.0; nv];
    let mut dzu = vec![0.0; nv];
    for j in 0..nv {
        let (cl, cu) = match affine {
            Some((dxa, dzla, dzua)) => (dxa[j] * dzla[j], dxa[j] * dzua[j]),
            None => (0.0, 0.0),
        };
        if s.has_l[j] {
            dzl[j] = (target - sl[j] * zl[j] - cl - zl[j] * dx[j]) / sl[j];
        }
        if s.has_u[j] {
            dzu[j] = (target - su[j] * zu[j] + cu + zu[j] * dx[j]) / su[j];
        }
    }
    (dzl, dzu)
}

#[allow(clippy::too_many_arguments)]
fn step_length(
    s: &Standard,
    dx: &[f64],
    dzl: &[f64],
    dzu: &[f64],
    sl: &[f64],
    su: &[f64],
    zl: &[f64],
    zu: &[f64],
) -> f64 {
    let mut alpha = f64::INFINITY;
    for j in 0..dx.len() {
        if s.has_l[j] {
            if dx[j] < 0.0 {
                alpha = alpha.min(-sl[j] / dx[j]);
            }
            if dzl[j] < 0.0 {
                alpha = alpha.min(-zl[j] / dzl[j]);
            }
        }
        if s.has_u[j] {
            if dx[j] > 0.0 {
                alpha = alpha.min(su[j] / dx[j]);
            }
            if dzu[j] < 0.0 {
                alpha = alpha.min(-zu[j] / dzu[j]);
            }
        }
    }
    alpha.min(1.0 / STEP_FRACTION)
}
