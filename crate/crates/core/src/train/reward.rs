//! Per-step rewards, discounted returns and advantage estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    /// Weight on the infeasibility term.
    pub beta: f64,
    /// Reward for one infeasible agent-step (nonpositive).
    pub r_qp_penalty: f64,
    pub gamma: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            r_qp_penalty: -1.0,
            gamma: 0.99,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1]".into()));
        }
        if !(self.beta >= 0.0) || !(self.r_qp_penalty <= 0.0) {
            return Err(Error::Config(
                "beta must be nonnegative and r_qp_penalty nonpositive".into(),
            ));
        }
        Ok(())
    }
}

/// The two reward components for one agent-step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardParts {
    pub progress: f64,
    pub penalty: f64,
}

impl RewardParts {
    pub fn total(&self) -> f64 {
        self.progress + self.penalty
    }
}

/// Velocity component along the unit vector towards the goal, plus the
/// weighted infeasibility penalty. The progress term is zero at the goal.
pub fn reward_parts(
    position: Vec2,
    goal: Vec2,
    applied_u: Vec2,
    feasible: bool,
    cfg: &RewardConfig,
) -> RewardParts {
    let to_goal = goal - position;
    let dist = to_goal.norm();
    let progress = if dist > 0.0 {
        (to_goal * (1.0 / dist)).dot(applied_u)
    } else {
        0.0
    };
    let penalty = if feasible {
        0.0
    } else {
        cfg.beta * cfg.r_qp_penalty
    };
    RewardParts { progress, penalty }
}

pub fn reward(position: Vec2, goal: Vec2, applied_u: Vec2, feasible: bool, cfg: &RewardConfig) -> f64 {
    reward_parts(position, goal, applied_u, feasible, cfg).total()
}

/// `sum_t gamma^t r_t`.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

/// Generalized advantage estimates. `values` carries one bootstrap entry past
/// the last reward.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    assert_eq!(values.len(), rewards.len() + 1, "values needs a bootstrap entry");
    let mut adv = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        let td = rewards[t] + gamma * values[t + 1] - values[t];
        acc = td + gamma * lambda * acc;
        adv[t] = acc;
    }
    adv
}
