//! Small dense strictly convex QP solver.
//!
//! Solves
//!
//! ```text
//!   minimize    1/2 * sum_k quad_diag[k] * x[k]^2
//!   subject to  coeffs_i . x >= rhs_i      for every row i
//!               box_lo <= x <= box_hi
//! ```
//!
//! The feasibility decision is made by a dual active-set projection of the box
//! center onto the constraint polyhedron (phase 1). The optimum is then found by
//! a primal active-set method started from that point. Both phases pivot on the
//! lowest index when ties occur, so results are bit-for-bit reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feasibility tolerance on every row.
pub const FEAS_TOL: f64 = 1e-9;
/// KKT residual bound on returned optima.
pub const KKT_TOL: f64 = 1e-8;
/// Rows with a smaller coefficient norm are treated as constant.
pub const DEGENERATE_ROW_NORM: f64 = 1e-12;

const ADD_TOL: f64 = 1e-11;
const MAX_ITER_FACTOR: usize = 50;

/// Where a constraint row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowTag {
    Clf,
    CbfAgent(usize),
    CbfObstacle(usize),
    Other,
}

/// A half-space `coeffs . x >= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub tag: RowTag,
}

impl ConstraintRow {
    pub fn new(coeffs: Vec<f64>, rhs: f64, tag: RowTag) -> Self {
        Self { coeffs, rhs, tag }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x)
    }

    /// `coeffs . x - rhs`; negative when violated.
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.eval(x) - self.rhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub dim: usize,
    pub quad_diag: Vec<f64>,
    pub rows: Vec<ConstraintRow>,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
}

impl QpProblem {
    pub fn objective(&self, x: &[f64]) -> f64 {
        0.5 * self
            .quad_diag
            .iter()
            .zip(x)
            .map(|(q, v)| q * v * v)
            .sum::<f64>()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim;
        if self.quad_diag.len() != n || self.box_lo.len() != n || self.box_hi.len() != n {
            return Err(Error::Config(format!(
                "QP dimension mismatch (dim {n}, quad_diag {}, box {}/{})",
                self.quad_diag.len(),
                self.box_lo.len(),
                self.box_hi.len()
            )));
        }
        if let Some(q) = self.quad_diag.iter().find(|q| !(**q > 0.0 && q.is_finite())) {
            return Err(Error::Config(format!(
                "quad_diag must be strictly positive, got {q}"
            )));
        }
        for k in 0..n {
            if !(self.box_lo[k] <= self.box_hi[k]) {
                return Err(Error::Config(format!("box_lo[{k}] > box_hi[{k}]")));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.coeffs.len() != n {
                return Err(Error::Config(format!("row {i} has wrong length")));
            }
            if !r.rhs.is_finite() || r.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::Config(format!("row {i} is not finite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: Option<Vec<f64>>,
    /// Indices into `QpProblem::rows` that are in the final working set.
    pub active_set: Vec<usize>,
    pub kkt_residual: f64,
}

impl QpSolution {
    fn infeasible() -> Self {
        Self {
            status: QpStatus::Infeasible,
            x: None,
            active_set: Vec::new(),
            kkt_residual: f64::INFINITY,
        }
    }
}

/// Box bounds; infinite entries mean unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxBounds {
    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&lo, &hi)| {
                if lo.is_finite() && hi.is_finite() {
                    0.5 * (lo + hi)
                } else {
                    0.0f64.clamp(lo, hi)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Phase1 {
    Feasible(Vec<f64>),
    /// The best point found still violates some constraint by `max_violation`.
    Infeasible { max_violation: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    Row(usize),
    Lower(usize),
    Upper(usize),
}

/// Uniform half-space view over rows and finite box bounds.
struct HalfSpace {
    a: Vec<f64>,
    b: f64,
    origin: Origin,
}

enum Assembled {
    Ok(Vec<HalfSpace>),
    /// A constant row demands `0 >= positive`.
    Empty,
}

fn assemble(rows: &[ConstraintRow], bounds: &BoxBounds) -> Assembled {
    let n = bounds.lo.len();
    let mut out = Vec::with_capacity(rows.len() + 2 * n);
    for (i, r) in rows.iter().enumerate() {
        if norm(&r.coeffs) < DEGENERATE_ROW_NORM {
            if r.rhs > 0.0 {
                return Assembled::Empty;
            }
            continue;
        }
        out.push(HalfSpace {
            a: r.coeffs.clone(),
            b: r.rhs,
            origin: Origin::Row(i),
        });
    }
    for k in 0..n {
        if bounds.lo[k].is_finite() {
            let mut a = vec![0.0; n];
            a[k] = 1.0;
            out.push(HalfSpace {
                a,
                b: bounds.lo[k],
                origin: Origin::Lower(k),
            });
        }
        if bounds.hi[k].is_finite() {
            let mut a = vec![0.0; n];
            a[k] = -1.0;
            out.push(HalfSpace {
                a,
                b: -bounds.hi[k],
                origin: Origin::Upper(k),
            });
        }
    }
    Assembled::Ok(out)
}

/// Exact phase-1 feasibility decision for `rows` intersected with `bounds`.
///
/// Returns the Euclidean projection of the box center onto the feasible set,
/// or the residual violation when that set is empty.
pub fn find_feasible_point(rows: &[ConstraintRow], bounds: &BoxBounds) -> Phase1 {
    let n = bounds.lo.len();
    let cons = match assemble(rows, bounds) {
        Assembled::Ok(c) => c,
        Assembled::Empty => {
            let worst = rows
                .iter()
                .filter(|r| norm(&r.coeffs) < DEGENERATE_ROW_NORM)
                .map(|r| r.rhs)
                .fold(0.0, f64::max);
            return Phase1::Infeasible {
                max_violation: worst,
            };
        }
    };
    match dual_projection(&vec![1.0; n], &bounds.center(), &cons) {
        DualOutcome::Optimal { x, .. } => Phase1::Feasible(x),
        DualOutcome::Infeasible { max_violation } => Phase1::Infeasible { max_violation },
    }
}

/// Solves the problem. Returns an `Infeasible` solution when the feasible set is
/// empty; errors only on malformed input.
pub fn solve_qp(problem: &QpProblem) -> Result<QpSolution> {
    problem.validate()?;
    let bounds = BoxBounds {
        lo: problem.box_lo.clone(),
        hi: problem.box_hi.clone(),
    };
    let cons = match assemble(&problem.rows, &bounds) {
        Assembled::Ok(c) => c,
        Assembled::Empty => return Ok(QpSolution::infeasible()),
    };
    let start = match dual_projection(&vec![1.0; problem.dim], &bounds.center(), &cons) {
        DualOutcome::Optimal { x, active } => (x, active),
        DualOutcome::Infeasible { .. } => return Ok(QpSolution::infeasible()),
    };

    let (mut x, working) = match primal_active_set(&problem.quad_diag, &cons, start.0, start.1) {
        Some(res) => res,
        None => {
            // Cycling guard: fall back to the dual method on the true objective.
            log::warn!("primal active-set hit its iteration cap; using dual method");
            match dual_projection(&problem.quad_diag, &vec![0.0; problem.dim], &cons) {
                DualOutcome::Optimal { x, active } => (x, active),
                DualOutcome::Infeasible { .. } => return Ok(QpSolution::infeasible()),
            }
        }
    };
    for k in 0..problem.dim {
        x[k] = x[k].clamp(problem.box_lo[k], problem.box_hi[k]);
    }

    let mut active_set: Vec<usize> = working
        .iter()
        .filter_map(|&c| match cons[c].origin {
            Origin::Row(i) => Some(i),
            _ => None,
        })
        .collect();
    active_set.sort_unstable();
    let kkt = kkt_residual(problem, &x);
    Ok(QpSolution {
        status: QpStatus::Feasible,
        x: Some(x),
        active_set,
        kkt_residual: kkt,
    })
}

enum DualOutcome {
    Optimal { x: Vec<f64>, active: Vec<usize> },
    Infeasible { max_violation: f64 },
}

/// Goldfarb-Idnani dual active-set method for
/// `min 1/2 sum h_k (x_k - c_k)^2  s.t.  a_i . x >= b_i`.
fn dual_projection(h: &[f64], c: &[f64], cons: &[HalfSpace]) -> DualOutcome {
    let n = h.len();
    let mut x = c.to_vec();
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let max_iter = MAX_ITER_FACTOR * (cons.len() + n + 1);
    let mut iter = 0;

    loop {
        // Most violated constraint, lowest index on ties.
        let mut pick: Option<(usize, f64)> = None;
        for (i, hs) in cons.iter().enumerate() {
            if active.contains(&i) {
                continue;
            }
            let viol = hs.b - dot(&hs.a, &x);
            if viol > ADD_TOL * (1.0 + hs.b.abs()) && pick.is_none_or(|(_, v)| viol > v) {
                pick = Some((i, viol));
            }
        }
        let Some((p, _)) = pick else {
            return DualOutcome::Optimal { x, active };
        };
        let ap = &cons[p].a;
        let hinv_ap: Vec<f64> = ap.iter().zip(h).map(|(a, h)| a / h).collect();
        let mut u_p = 0.0;

        loop {
            iter += 1;
            if iter > max_iter {
                return DualOutcome::Infeasible {
                    max_violation: max_violation(cons, &x),
                };
            }
            // r = (N^T H^-1 N)^-1 N^T H^-1 a_p ; z = H^-1 (a_p - N r)
            let r = if active.is_empty() {
                Vec::new()
            } else {
                let m = gram(h, cons, &active);
                let rhs: Vec<f64> = active.iter().map(|&j| dot(&cons[j].a, &hinv_ap)).collect();
                match solve_dense(m, rhs) {
                    Some(r) => r,
                    None => {
                        return DualOutcome::Infeasible {
                            max_violation: max_violation(cons, &x),
                        }
                    }
                }
            };
            let mut z = ap.clone();
            for (k, &j) in active.iter().enumerate() {
                for (zi, aj) in z.iter_mut().zip(&cons[j].a) {
                    *zi -= r[k] * aj;
                }
            }
            for (zi, hi) in z.iter_mut().zip(h) {
                *zi /= hi;
            }

            // Largest dual step keeping the active multipliers nonnegative.
            let mut t1 = f64::INFINITY;
            let mut drop: Option<usize> = None;
            for (k, &rk) in r.iter().enumerate() {
                if rk > 0.0 {
                    let t = u[k] / rk;
                    if t < t1 || (t == t1 && drop.is_some_and(|d| active[k] < active[d])) {
                        t1 = t;
                        drop = Some(k);
                    }
                }
            }

            let curvature = dot(&z, ap);
            let scale = dot(ap, &hinv_ap);
            // A full active set spans the space, so a_p is dependent on it even
            // when rounding leaves a tiny positive curvature.
            if active.len() >= n || curvature <= 1e-12 * scale {
                let Some(d) = drop else {
                    return DualOutcome::Infeasible {
                        max_violation: max_violation(cons, &x),
                    };
                };
                for (uk, rk) in u.iter_mut().zip(&r) {
                    *uk -= t1 * rk;
                }
                u_p += t1;
                active.remove(d);
                u.remove(d);
                continue;
            }

            let viol = cons[p].b - dot(ap, &x);
            let t2 = viol / curvature;
            let t = t1.min(t2);
            for (xi, zi) in x.iter_mut().zip(&z) {
                *xi += t * zi;
            }
            for (uk, rk) in u.iter_mut().zip(&r) {
                *uk -= t * rk;
            }
            u_p += t;

            if t2 <= t1 {
                active.push(p);
                u.push(u_p);
                break;
            }
            let d = drop.expect("finite t1 implies a blocking multiplier");
            active.remove(d);
            u.remove(d);
        }
    }
}

/// Primal active-set method for `min 1/2 sum q_k x_k^2` from a feasible start.
/// Returns `None` if the iteration cap is reached.
fn primal_active_set(
    q: &[f64],
    cons: &[HalfSpace],
    mut x: Vec<f64>,
    mut working: Vec<usize>,
) -> Option<(Vec<f64>, Vec<usize>)> {
    let n = q.len();
    let max_iter = MAX_ITER_FACTOR * (cons.len() + n + 1);
    for _ in 0..max_iter {
        // Minimizer on the working-set affine subspace: y = Q^-1 N lambda,
        // (N^T Q^-1 N) lambda = b_W.
        let lambda = if working.is_empty() {
            Vec::new()
        } else {
            let m = gram(q, cons, &working);
            let rhs: Vec<f64> = working.iter().map(|&j| cons[j].b).collect();
            solve_dense(m, rhs)?
        };
        let mut y = vec![0.0; n];
        for (k, &j) in working.iter().enumerate() {
            for (yi, aj) in y.iter_mut().zip(&cons[j].a) {
                *yi += lambda[k] * aj;
            }
        }
        for (yi, qi) in y.iter_mut().zip(q) {
            *yi /= qi;
        }
        let step: Vec<f64> = y.iter().zip(&x).map(|(y, x)| y - x).collect();
        let xscale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        if step.iter().all(|s| s.abs() <= 1e-14 * xscale) {
            let mut most_negative: Option<(usize, f64)> = None;
            for (k, &l) in lambda.iter().enumerate() {
                if l < -1e-13 && most_negative.is_none_or(|(_, m)| l < m) {
                    most_negative = Some((k, l));
                }
            }
            match most_negative {
                None => return Some((y, working)),
                Some((k, _)) => {
                    x = y;
                    working.remove(k);
                    continue;
                }
            }
        }

        let pnorm = norm(&step);
        let mut alpha = 1.0;
        let mut blocking: Option<usize> = None;
        for (i, hs) in cons.iter().enumerate() {
            if working.contains(&i) {
                continue;
            }
            let ap = dot(&hs.a, &step);
            if ap < -1e-14 * norm(&hs.a) * pnorm {
                let t = ((hs.b - dot(&hs.a, &x)) / ap).max(0.0);
                if t < alpha {
                    alpha = t;
                    blocking = Some(i);
                }
            }
        }
        for (xi, si) in x.iter_mut().zip(&step) {
            *xi += alpha * si;
        }
        if let Some(b) = blocking {
            working.push(b);
        }
    }
    None
}

fn max_violation(cons: &[HalfSpace], x: &[f64]) -> f64 {
    cons.iter()
        .map(|hs| hs.b - dot(&hs.a, x))
        .fold(0.0, f64::max)
}

/// `N^T H^-1 N` for the selected constraints.
fn gram(h: &[f64], cons: &[HalfSpace], sel: &[usize]) -> Vec<Vec<f64>> {
    sel.iter()
        .map(|&i| {
            sel.iter()
                .map(|&j| {
                    cons[i]
                        .a
                        .iter()
                        .zip(&cons[j].a)
                        .zip(h)
                        .map(|((a, b), h)| a * b / h)
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Independent optimality audit of `candidate`.
///
/// Returns the largest of: primal infeasibility, stationarity residual
/// `|Q x - sum lambda_j a_j|_inf` with nonnegative least-squares multipliers
/// over the constraints tight within [`FEAS_TOL`], and complementary slackness.
pub fn kkt_residual(problem: &QpProblem, candidate: &[f64]) -> f64 {
    let n = problem.dim;
    assert_eq!(candidate.len(), n, "candidate has wrong dimension");
    let mut primal = 0.0f64;
    let mut tight: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in &problem.rows {
        if norm(&r.coeffs) < DEGENERATE_ROW_NORM {
            primal = primal.max(r.rhs);
            continue;
        }
        let slack = r.slack(candidate);
        primal = primal.max(-slack);
        if slack.abs() <= FEAS_TOL {
            tight.push((r.coeffs.clone(), slack));
        }
    }
    for k in 0..n {
        let v = candidate[k];
        primal = primal.max(problem.box_lo[k] - v).max(v - problem.box_hi[k]);
        let mut e = vec![0.0; n];
        if problem.box_lo[k].is_finite() && (v - problem.box_lo[k]).abs() <= FEAS_TOL {
            e[k] = 1.0;
            tight.push((e.clone(), v - problem.box_lo[k]));
        }
        if problem.box_hi[k].is_finite() && (problem.box_hi[k] - v).abs() <= FEAS_TOL {
            e[k] = -1.0;
            tight.push((e, problem.box_hi[k] - v));
        }
    }

    let grad: Vec<f64> = problem
        .quad_diag
        .iter()
        .zip(candidate)
        .map(|(q, x)| q * x)
        .collect();
    let columns: Vec<&[f64]> = tight.iter().map(|(a, _)| a.as_slice()).collect();
    let lambda = nnls(&columns, &grad);
    let mut resid = grad.clone();
    for (l, col) in lambda.iter().zip(&columns) {
        for (r, a) in resid.iter_mut().zip(col.iter()) {
            *r -= l * a;
        }
    }
    let stationarity = resid.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let comp = lambda
        .iter()
        .zip(&tight)
        .fold(0.0f64, |m, (l, (_, s))| m.max((l * s).abs()));
    primal.max(stationarity).max(comp)
}

/// Lawson-Hanson nonnegative least squares: `min |A lambda - g|, lambda >= 0`
/// with `A` given by its columns.
fn nnls(columns: &[&[f64]], g: &[f64]) -> Vec<f64> {
    let k = columns.len();
    let mut lambda = vec![0.0; k];
    if k == 0 {
        return lambda;
    }
    let mut passive = vec![false; k];
    let residual = |lambda: &[f64]| -> Vec<f64> {
        let mut r = g.to_vec();
        for (l, col) in lambda.iter().zip(columns) {
            for (ri, a) in r.iter_mut().zip(col.iter()) {
                *ri -= l * a;
            }
        }
        r
    };
    for _outer in 0..(3 * k + 10) {
        let r = residual(&lambda);
        let w: Vec<f64> = columns.iter().map(|c| dot(c, &r)).collect();
        let mut best: Option<(usize, f64)> = None;
        for j in 0..k {
            if !passive[j] && w[j] > 1e-14 && best.is_none_or(|(_, b)| w[j] > b) {
                best = Some((j, w[j]));
            }
        }
        let Some((j, _)) = best else { break };
        passive[j] = true;

        for _inner in 0..(3 * k + 10) {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let s = match least_squares(columns, &idx, g) {
                Some(s) => s,
                None => {
                    // Dependent column: leave it out.
                    passive[j] = false;
                    break;
                }
            };
            if s.iter().all(|&v| v > 0.0) {
                for (t, &i) in idx.iter().enumerate() {
                    lambda[i] = s[t];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (t, &i) in idx.iter().enumerate() {
                if s[t] <= 0.0 {
                    let denom = lambda[i] - s[t];
                    if denom > 0.0 {
                        alpha = alpha.min(lambda[i] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (t, &i) in idx.iter().enumerate() {
                lambda[i] += alpha * (s[t] - lambda[i]);
                if lambda[i] <= 1e-15 {
                    lambda[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    lambda
}

fn least_squares(columns: &[&[f64]], idx: &[usize], g: &[f64]) -> Option<Vec<f64>> {
    let m: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| idx.iter().map(|&j| dot(columns[i], columns[j])).collect())
        .collect();
    let rhs: Vec<f64> = idx.iter().map(|&i| dot(columns[i], g)).collect();
    solve_dense(m, rhs)
}

/// Gaussian elimination with partial pivoting. `None` if numerically singular.
fn solve_dense(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = m
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |s, v| s.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if m[row][col].abs() > m[piv][col].abs() {
                piv = row;
            }
        }
        if m[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[row][c] -= f * m[col][c];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in row + 1..n {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
