//! Decentralized CLF-CBF-QP controller for single-integrator agents.
//!
//! Decision variables are `(u1, u2, delta)`. All rows use the solver convention
//! `coeffs . (u1, u2, delta) >= rhs`:
//!
//! * CLF:      `2 (p - d)^T u + eps V + delta <= 0`,  `V = |p - d|^2`
//! * agent:    `2 (p_i - p_j)^T u - 2 (p_i - p_j)^T v_j + zeta_a h^eta_a >= 0`
//! * obstacle: `2 (p_i - p_o)^T u + zeta_o h^eta_o >= 0`
//!
//! with `h = |p_i - p_k|^2 - (R_i + R_k)^2`.

use serde::{Deserialize, Serialize};

use crate::error::{BodyRef, Error, Result};
use crate::geometry::{pairwise_clearance, Vec2};
use crate::qp::{self, ConstraintRow, QpProblem, QpStatus, RowTag};
use crate::types::{AgentSpec, AgentState, CbfParams, ControllerConfig, ObstacleSpec};

/// Another agent as seen from inside the sensing ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborAgent {
    pub id: usize,
    pub state: AgentState,
    pub radius: f64,
}

/// Everything one agent may use to choose its control.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalView {
    pub self_state: AgentState,
    pub self_spec: AgentSpec,
    pub neighbor_agents: Vec<NeighborAgent>,
    pub neighbor_obstacles: Vec<ObstacleSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision {
    pub u: Vec2,
    pub delta: f64,
    pub feasible: bool,
    /// Number of CBF rows (one per sensed agent or obstacle).
    pub constraint_count: usize,
    pub active_tags: Vec<RowTag>,
}

/// `zeta * h^eta`. Fails on a negative barrier value.
pub fn class_k(h: f64, zeta: f64, eta: f64) -> Result<f64> {
    if h < 0.0 || h.is_nan() {
        return Err(Error::NegativeBarrier(h));
    }
    Ok(zeta * h.powf(eta))
}

/// Squared-distance barrier between two disks.
pub fn barrier(p: Vec2, q: Vec2, r_p: f64, r_q: f64) -> f64 {
    let rr = r_p + r_q;
    (p - q).norm_sq() - rr * rr
}

pub fn clf_row(p: Vec2, goal: Vec2, epsilon: f64) -> ConstraintRow {
    let e = p - goal;
    ConstraintRow::new(
        vec![-2.0 * e.x, -2.0 * e.y, -1.0],
        epsilon * e.norm_sq(),
        RowTag::Clf,
    )
}

pub fn cbf_agent_row(
    me: &AgentState,
    my_radius: f64,
    other: &NeighborAgent,
    zeta_a: f64,
    eta_a: f64,
) -> Result<ConstraintRow> {
    let rel = me.position - other.state.position;
    let h = barrier(me.position, other.state.position, my_radius, other.radius);
    let alpha = class_k(h, zeta_a, eta_a)?;
    Ok(ConstraintRow::new(
        vec![2.0 * rel.x, 2.0 * rel.y, 0.0],
        2.0 * rel.dot(other.state.velocity) - alpha,
        RowTag::CbfAgent(other.id),
    ))
}

pub fn cbf_obstacle_row(
    me: &AgentState,
    my_radius: f64,
    obstacle: &ObstacleSpec,
    zeta_o: f64,
    eta_o: f64,
) -> Result<ConstraintRow> {
    let rel = me.position - obstacle.center;
    let h = barrier(me.position, obstacle.center, my_radius, obstacle.radius);
    let alpha = class_k(h, zeta_o, eta_o)?;
    Ok(ConstraintRow::new(
        vec![2.0 * rel.x, 2.0 * rel.y, 0.0],
        -alpha,
        RowTag::CbfObstacle(obstacle.id),
    ))
}

/// A row whose barrier is slightly negative is rebuilt with `alpha(h) = alpha(0) = 0`.
fn contact_clamped(
    row: Result<ConstraintRow>,
    at_contact: impl FnOnce() -> ConstraintRow,
) -> Result<ConstraintRow> {
    match row {
        Err(Error::NegativeBarrier(_)) => Ok(at_contact()),
        other => other,
    }
}

/// Assembles and solves one agent's QP. An infeasible QP yields `u = 0` with
/// `feasible == false`. Overlap deeper than `cfg.overlap_tolerance` is an error.
pub fn compute_control(
    view: &LocalView,
    params: &CbfParams,
    cfg: &ControllerConfig,
    u_max: f64,
) -> Result<ControlDecision> {
    let me = &view.self_state;
    let my_radius = view.self_spec.radius;
    let agent = view.self_spec.id;

    // Overlap within the tolerance is treated as contact; deeper overlap is a breach.
    let tol = cfg.overlap_tolerance;
    let mut neighbor_agents = view.neighbor_agents.clone();
    for n in &mut neighbor_agents {
        let gap = pairwise_clearance(me.position, n.state.position, my_radius, n.radius);
        if gap < -tol {
            return Err(Error::BarrierBreached {
                agent,
                other: BodyRef::Agent(n.id),
                barrier: barrier(me.position, n.state.position, my_radius, n.radius),
            });
        }
    }
    for o in &view.neighbor_obstacles {
        let gap = pairwise_clearance(me.position, o.center, my_radius, o.radius);
        if gap < -tol {
            return Err(Error::BarrierBreached {
                agent,
                other: BodyRef::Obstacle(o.id),
                barrier: barrier(me.position, o.center, my_radius, o.radius),
            });
        }
    }

    let mut rows = Vec::with_capacity(1 + view.neighbor_agents.len() + view.neighbor_obstacles.len());
    rows.push(clf_row(me.position, view.self_spec.goal, cfg.epsilon));
    for n in &neighbor_agents {
        rows.push(contact_clamped(cbf_agent_row(me, my_radius, n, params.zeta_a, params.eta_a), || {
            let rel = me.position - n.state.position;
            ConstraintRow::new(
                vec![2.0 * rel.x, 2.0 * rel.y, 0.0],
                2.0 * rel.dot(n.state.velocity),
                RowTag::CbfAgent(n.id),
            )
        })?);
    }
    for o in &view.neighbor_obstacles {
        rows.push(contact_clamped(cbf_obstacle_row(me, my_radius, o, params.zeta_o, params.eta_o), || {
            let rel = me.position - o.center;
            ConstraintRow::new(vec![2.0 * rel.x, 2.0 * rel.y, 0.0], 0.0, RowTag::CbfObstacle(o.id))
        })?);
    }
    let constraint_count = rows.len() - 1;

    let problem = QpProblem {
        dim: 3,
        quad_diag: vec![1.0, 1.0, cfg.xi],
        rows,
        box_lo: vec![-u_max, -u_max, f64::NEG_INFINITY],
        box_hi: vec![u_max, u_max, f64::INFINITY],
    };
    let sol = qp::solve_qp(&problem)?;
    Ok(match (sol.status, sol.x) {
        (QpStatus::Feasible, Some(x)) => ControlDecision {
            u: Vec2::new(x[0], x[1]),
            delta: x[2],
            feasible: true,
            constraint_count,
            active_tags: sol.active_set.iter().map(|&i| problem.rows[i].tag).collect(),
        },
        _ => ControlDecision {
            u: Vec2::ZERO,
            delta: 0.0,
            feasible: false,
            constraint_count,
            active_tags: Vec::new(),
        },
    })
}
