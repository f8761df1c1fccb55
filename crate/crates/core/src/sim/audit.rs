use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::BodyRef;
use crate::geometry::pairwise_clearance;
use crate::types::WorldConfig;

/// One recorded overlap deeper than the audit tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyRecord {
    pub step: usize,
    pub agent: usize,
    pub other: BodyRef,
    pub clearance: f64,
}

/// Displacement allowance between two Euler samples: `2 * u_max * dt`.
pub fn default_tolerance(config: &WorldConfig) -> f64 {
    2.0 * config.u_max * config.dt
}

/// Flags every recorded state in which two agents, or an agent and an
/// obstacle, overlap by more than `tol`.
pub fn check_safety(traj: &Trajectory, config: &WorldConfig, tol: f64) -> Vec<SafetyRecord> {
    let mut out = Vec::new();
    for s in &traj.steps {
        for (i, a) in s.agents.iter().enumerate() {
            let spec_i = &config.agents[i];
            for (j, b) in s.agents.iter().enumerate().skip(i + 1) {
                let spec_j = &config.agents[j];
                let c = pairwise_clearance(a.position, b.position, spec_i.radius, spec_j.radius);
                if c < -tol {
                    out.push(SafetyRecord {
                        step: s.t,
                        agent: spec_i.id,
                        other: BodyRef::Agent(spec_j.id),
                        clearance: c,
                    });
                }
            }
            for o in &config.obstacles {
                let c = pairwise_clearance(a.position, o.center, spec_i.radius, o.radius);
                if c < -tol {
                    out.push(SafetyRecord {
                        step: s.t,
                        agent: spec_i.id,
                        other: BodyRef::Obstacle(o.id),
                        clearance: c,
                    });
                }
            }
        }
    }
    out
}
