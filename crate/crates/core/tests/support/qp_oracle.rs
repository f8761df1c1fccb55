//! Brute-force reference for small diagonal QPs.
//!
//! Enumerates every subset of at most `dim` constraints (rows and finite box
//! faces), solves the equality-constrained KKT system for each, and keeps the
//! best primal-feasible candidate. The true minimizer is one of these candidates,
//! so the feasibility decision and optimal value are exact up to rounding. A
//! uniform grid over the (finite) box supplies feasible upper bounds.

use cbfnav::qp::{QpProblem, QpStatus};
use rand::Rng;

pub const ORACLE_FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub feasible: bool,
    pub x: Option<Vec<f64>>,
    pub objective: f64,
}

fn halfspaces(p: &QpProblem) -> Vec<(Vec<f64>, f64)> {
    let mut out: Vec<(Vec<f64>, f64)> =
        p.rows.iter().map(|r| (r.coeffs.clone(), r.rhs)).collect();
    for k in 0..p.dim {
        if p.box_lo[k].is_finite() {
            let mut a = vec![0.0; p.dim];
            a[k] = 1.0;
            out.push((a, p.box_lo[k]));
        }
        if p.box_hi[k].is_finite() {
            let mut a = vec![0.0; p.dim];
            a[k] = -1.0;
            out.push((a, -p.box_hi[k]));
        }
    }
    out
}

fn feasible(hs: &[(Vec<f64>, f64)], x: &[f64]) -> bool {
    hs.iter().all(|(a, b)| {
        let v: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum();
        v >= b - ORACLE_FEAS_TOL
    })
}

fn objective(q: &[f64], x: &[f64]) -> f64 {
    0.5 * q.iter().zip(x).map(|(q, x)| q * x * x).sum::<f64>()
}

/// Solves `[Q -A^T; A 0] [x; l] = [0; b]` by Gauss-Jordan elimination.
fn eq_constrained(q: &[f64], rows: &[&(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let n = q.len();
    let m = rows.len();
    let sz = n + m;
    let mut a = vec![vec![0.0; sz + 1]; sz];
    for k in 0..n {
        a[k][k] = q[k];
        for (j, (row, _)) in rows.iter().enumerate() {
            a[k][n + j] = -row[k];
        }
    }
    for (j, (row, b)) in rows.iter().enumerate() {
        for k in 0..n {
            a[n + j][k] = row[k];
        }
        a[n + j][sz] = *b;
    }
    for col in 0..sz {
        let piv = (col..sz).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..sz {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=sz {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some((0..n).map(|k| a[k][sz] / a[k][k]).collect())
}

fn subsets(m: usize, max: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(
        start: usize,
        m: usize,
        max: usize,
        cur: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        f(cur);
        if cur.len() == max {
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, max, cur, f);
            cur.pop();
        }
    }
    rec(0, m, max, &mut Vec::new(), f);
}

pub fn enumerate(p: &QpProblem) -> OracleResult {
    let hs = halfspaces(p);
    let mut best: Option<(f64, Vec<f64>)> = None;
    subsets(hs.len(), p.dim, &mut |sel| {
        let rows: Vec<&(Vec<f64>, f64)> = sel.iter().map(|&i| &hs[i]).collect();
        if let Some(x) = eq_constrained(&p.quad_diag, &rows) {
            if feasible(&hs, &x) {
                let obj = objective(&p.quad_diag, &x);
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    best = Some((obj, x));
                }
            }
        }
    });
    match best {
        Some((objective, x)) => OracleResult {
            feasible: true,
            x: Some(x),
            objective,
        },
        None => OracleResult {
            feasible: false,
            x: None,
            objective: f64::INFINITY,
        },
    }
}

/// Smallest objective over feasible points of a uniform grid with `steps`
/// intervals per axis. Requires a finite box.
pub fn grid_upper_bound(p: &QpProblem, steps: usize) -> Option<f64> {
    let hs = halfspaces(p);
    let n = p.dim;
    let mut idx = vec![0usize; n];
    let mut best: Option<f64> = None;
    let mut x = vec![0.0; n];
    loop {
        for k in 0..n {
            x[k] = p.box_lo[k] + (p.box_hi[k] - p.box_lo[k]) * idx[k] as f64 / steps as f64;
        }
        if feasible(&hs, &x) {
            let obj = objective(&p.quad_diag, &x);
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            idx[k] += 1;
            if idx[k] <= steps {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// A random 3-variable instance with up to `max_rows` rows, coefficients in [-5, 5].
pub fn random_problem(rng: &mut impl Rng, max_rows: usize) -> QpProblem {
    use cbfnav::qp::{ConstraintRow, RowTag};
    let dim = 3;
    let quad_diag: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.1..5.0)).collect();
    let n_rows = rng.gen_range(0..=max_rows);
    let rows = (0..n_rows)
        .map(|_| {
            let coeffs: Vec<f64> = (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
            ConstraintRow::new(coeffs, rng.gen_range(-5.0..5.0), RowTag::Other)
        })
        .collect();
    let half: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.2..2.0)).collect();
    QpProblem {
        dim,
        quad_diag,
        rows,
        box_lo: half.iter().map(|h| -h).collect(),
        box_hi: half,
    }
}

#[derive(Debug, Default, Clone)]
pub struct OracleStats {
    pub cases: usize,
    pub feasible: usize,
    pub decision_mismatches: usize,
    pub worst_objective_gap: f64,
    pub worst_kkt: f64,
    pub grid_violations: usize,
}

/// Compares `solve_qp` against the oracle on one problem.
pub fn check_one(p: &QpProblem, grid_steps: usize, stats: &mut OracleStats) {
    let sol = cbfnav::qp::solve_qp(p).expect("well-formed problem");
    let oracle = enumerate(p);
    stats.cases += 1;
    let solver_feasible = sol.status == QpStatus::Feasible;
    if solver_feasible != oracle.feasible {
        stats.decision_mismatches += 1;
        return;
    }
    if !oracle.feasible {
        return;
    }
    stats.feasible += 1;
    let x = sol.x.as_ref().unwrap();
    let obj = p.objective(x);
    stats.worst_objective_gap = stats.worst_objective_gap.max((obj - oracle.objective).abs());
    stats.worst_kkt = stats.worst_kkt.max(sol.kkt_residual);
    if grid_steps > 0 {
        if let Some(ub) = grid_upper_bound(p, grid_steps) {
            if obj > ub + 1e-6 {
                stats.grid_violations += 1;
            }
        }
    }
}
