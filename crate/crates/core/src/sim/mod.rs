//! Synchronous world stepping and episode execution.

pub mod audit;
pub mod log;
pub mod scenario;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{compute_control, LocalView, NeighborAgent};
use crate::error::{BodyRef, Error, Result};
use crate::geometry::Vec2;
use crate::policy::CbfPolicy;
use crate::train::reward::{reward_parts, RewardConfig};
use crate::types::{AgentState, CbfParams, ControllerConfig, WorldConfig};

pub use audit::{check_safety, default_tolerance, SafetyRecord};
pub use scenario::{make_scenario, ScenarioKind};

/// An agent counts as arrived once it is this close to its goal.
pub const ARRIVAL_RADIUS: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub t: usize,
    pub agents: Vec<AgentState>,
    pub done: Vec<bool>,
}

impl WorldState {
    pub fn initial(config: &WorldConfig) -> Self {
        let agents: Vec<AgentState> = config
            .agents
            .iter()
            .map(|a| AgentState::at_rest(a.start))
            .collect();
        let done = config
            .agents
            .iter()
            .map(|a| a.start.dist(a.goal) <= ARRIVAL_RADIUS)
            .collect();
        Self { t: 0, agents, done }
    }

    pub fn all_done(&self) -> bool {
        self.done.iter().all(|d| *d)
    }
}

/// Local view of agent `i` (an index into `config.agents`): every other agent
/// and obstacle whose center lies in the closed sensing ball.
pub fn neighbors(world: &WorldState, config: &WorldConfig, i: usize) -> LocalView {
    let me = world.agents[i];
    let sigma = config.sensing_radius;
    let neighbor_agents = config
        .agents
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i && me.position.dist(world.agents[j].position) <= sigma)
        .map(|(j, spec)| NeighborAgent {
            id: spec.id,
            state: world.agents[j],
            radius: spec.radius,
        })
        .collect();
    let neighbor_obstacles = config
        .obstacles
        .iter()
        .filter(|o| me.position.dist(o.center) <= sigma)
        .cloned()
        .collect();
    LocalView {
        self_state: me,
        self_spec: config.agents[i].clone(),
        neighbor_agents,
        neighbor_obstacles,
    }
}

/// Euler step of every agent at once. Arrived agents stay where they are.
pub fn step(world: &WorldState, controls: &[Vec2], config: &WorldConfig) -> Result<WorldState> {
    if controls.len() != world.agents.len() {
        return Err(Error::Contract(format!(
            "{} controls for {} agents",
            controls.len(),
            world.agents.len()
        )));
    }
    let mut next = world.clone();
    next.t += 1;
    for (i, u) in controls.iter().enumerate() {
        if !u.is_finite() || u.max_abs() > config.u_max * (1.0 + 1e-12) {
            return Err(Error::Contract(format!(
                "control {u:?} of agent {i} outside the box +-{}",
                config.u_max
            )));
        }
        if world.done[i] {
            next.agents[i].velocity = Vec2::ZERO;
            continue;
        }
        let a = &mut next.agents[i];
        a.position += *u * config.dt;
        a.velocity = *u;
        if a.position.dist(config.agents[i].goal) <= ARRIVAL_RADIUS {
            next.done[i] = true;
        }
    }
    Ok(next)
}

/// What one agent did on one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentAction {
    pub control: Vec2,
    pub params: CbfParams,
    pub feasible: bool,
    pub progress: f64,
    pub penalty: f64,
}

impl AgentAction {
    pub fn reward(&self) -> f64 {
        self.progress + self.penalty
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub position: Vec2,
    pub done: bool,
    /// `None` when the agent did not act (arrived, or last recorded state).
    pub action: Option<AgentAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub agents: Vec<AgentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpisodeOutcome {
    AllArrived,
    Timeout,
    SafetyViolation {
        step: usize,
        agent: usize,
        other: BodyRef,
        barrier: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub scenario_hash: String,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub outcome: EpisodeOutcome,
}

impl Trajectory {
    /// Number of recorded states (at most `max_steps + 1`).
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn num_agents(&self) -> usize {
        self.steps.first().map_or(0, |s| s.agents.len())
    }

    /// First recorded step at which agent `i` is marked arrived.
    pub fn arrival_step(&self, i: usize) -> Option<usize> {
        self.steps.iter().find(|s| s.agents[i].done).map(|s| s.t)
    }

    pub fn infeasible_steps(&self) -> usize {
        self.actions().filter(|(_, _, a)| !a.feasible).count()
    }

    /// Sum of all agents' rewards over the episode.
    pub fn total_reward(&self) -> f64 {
        self.actions().map(|(_, _, a)| a.reward()).sum()
    }

    /// `(t, agent index, action)` for every agent-step that acted.
    pub fn actions(&self) -> impl Iterator<Item = (usize, usize, &AgentAction)> {
        self.steps.iter().flat_map(|s| {
            s.agents
                .iter()
                .enumerate()
                .filter_map(move |(i, a)| a.action.as_ref().map(|act| (s.t, i, act)))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeOptions {
    pub controller: ControllerConfig,
    pub reward: RewardConfig,
}

/// Runs one episode: at every step each active agent asks `policy` for CBF
/// parameters from its local view, solves its QP, and all controls are applied
/// together. Stops when every agent has arrived, at `max_steps`, or on the
/// first breached barrier.
pub fn run_episode(
    config: &WorldConfig,
    policy: &mut dyn CbfPolicy,
    seed: u64,
    opts: &EpisodeOptions,
) -> Result<Trajectory> {
    let violations = crate::types::validate_config(config);
    if let Some(v) = violations.first() {
        return Err(Error::Config(v.reason.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    policy.reset();
    let n = config.agents.len();
    let mut world = WorldState::initial(config);
    let mut steps = Vec::with_capacity(config.max_steps.min(1024) + 1);

    let snapshot = |world: &WorldState| StepRecord {
        t: world.t,
        agents: (0..n)
            .map(|i| AgentRecord {
                position: world.agents[i].position,
                done: world.done[i],
                action: None,
            })
            .collect(),
    };

    let outcome = loop {
        let mut record = snapshot(&world);
        if world.all_done() {
            steps.push(record);
            break EpisodeOutcome::AllArrived;
        }
        if world.t >= config.max_steps {
            steps.push(record);
            break EpisodeOutcome::Timeout;
        }

        let mut controls = vec![Vec2::ZERO; n];
        let mut breach = None;
        for i in 0..n {
            if world.done[i] {
                continue;
            }
            let view = neighbors(&world, config, i);
            let params = policy.act(world.t, &view, &mut rng);
            let decision = match compute_control(&view, &params, &opts.controller, config.u_max) {
                Ok(d) => d,
                Err(Error::BarrierBreached {
                    agent,
                    other,
                    barrier,
                }) => {
                    breach = Some(EpisodeOutcome::SafetyViolation {
                        step: world.t,
                        agent,
                        other,
                        barrier,
                    });
                    break;
                }
                Err(e) => return Err(e),
            };
            let parts = reward_parts(
                world.agents[i].position,
                config.agents[i].goal,
                decision.u,
                decision.feasible,
                &opts.reward,
            );
            controls[i] = decision.u;
            record.agents[i].action = Some(AgentAction {
                control: decision.u,
                params,
                feasible: decision.feasible,
                progress: parts.progress,
                penalty: parts.penalty,
            });
        }
        if let Some(outcome) = breach {
            steps.push(snapshot(&world));
            break outcome;
        }
        steps.push(record);
        world = step(&world, &controls, config)?;
    };

    Ok(Trajectory {
        scenario_hash: config.content_hash(),
        seed,
        steps,
        outcome,
    })
}
