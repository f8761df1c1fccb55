//! Built-in scenario generators.
//!
//! All generators are seed-reproducible. Randomized layouts are redrawn until
//! they pass [`validate_config`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{pairwise_clearance, Aabb, Vec2};
use crate::types::{validate_config, AgentSpec, ObstacleSpec, WorldConfig};

pub const AGENT_RADIUS: f64 = 0.15;
pub const OBSTACLE_RADIUS: f64 = 0.5;
pub const SENSING_RADIUS: f64 = 2.0;
pub const DT: f64 = 0.05;
pub const U_MAX: f64 = 0.5;
pub const HORIZON: usize = 500;
pub const LONG_HORIZON: usize = 750;

/// Minimum start clearance kept by randomized layouts.
const SPAWN_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Four agents cross from the top region to the bottom region through
    /// four obstacles.
    ProofOfConcept,
    /// Two obstacles leave a gap narrower than two agent diameters; agents
    /// from both sides must pass through it.
    NarrowPassage,
    /// Agents on a circle, each heading to the diametrically opposite point.
    Cross,
    /// One agent, one obstacle, goal exactly behind the obstacle.
    Singularity,
    /// Eight obstacles, a longer horizon and seed-driven shifts.
    Generalization8,
    /// One agent, no obstacles.
    FreeSpace,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::ProofOfConcept,
        ScenarioKind::NarrowPassage,
        ScenarioKind::Cross,
        ScenarioKind::Singularity,
        ScenarioKind::Generalization8,
        ScenarioKind::FreeSpace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::ProofOfConcept => "proof-of-concept",
            ScenarioKind::NarrowPassage => "narrow-passage",
            ScenarioKind::Cross => "cross",
            ScenarioKind::Singularity => "singularity",
            ScenarioKind::Generalization8 => "generalization8",
            ScenarioKind::FreeSpace => "free-space",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
                format!("unknown scenario {s:?}; expected one of {}", names.join(", "))
            })
    }
}

/// Generator knobs. `Default` gives the standard layouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub n_agents: usize,
    /// Free gap between the two passage obstacles (meters).
    pub passage_width: f64,
    /// Half-width of the uniform shift applied to randomized positions.
    pub shift: f64,
}

impl ScenarioParams {
    pub fn default_for(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::ProofOfConcept => Self {
                n_agents: 4,
                passage_width: 0.0,
                shift: 0.2,
            },
            ScenarioKind::NarrowPassage => Self {
                n_agents: 2,
                passage_width: 0.4,
                shift: 0.0,
            },
            ScenarioKind::Cross => Self {
                n_agents: 4,
                passage_width: 0.0,
                shift: 0.0,
            },
            ScenarioKind::Singularity | ScenarioKind::FreeSpace => Self {
                n_agents: 1,
                passage_width: 0.0,
                shift: 0.0,
            },
            ScenarioKind::Generalization8 => Self {
                n_agents: 4,
                passage_width: 0.0,
                shift: 0.25,
            },
        }
    }
}

fn square(half: f64) -> Aabb {
    Aabb {
        min: Vec2::new(-half, -half),
        max: Vec2::new(half, half),
    }
}

fn world(agents: Vec<AgentSpec>, obstacles: Vec<ObstacleSpec>, max_steps: usize, half: f64) -> WorldConfig {
    WorldConfig {
        agents,
        obstacles,
        sensing_radius: SENSING_RADIUS,
        dt: DT,
        max_steps,
        u_max: U_MAX,
        workspace: square(half),
    }
}

fn agent(id: usize, start: Vec2, goal: Vec2) -> AgentSpec {
    AgentSpec {
        id,
        start,
        goal,
        radius: AGENT_RADIUS,
    }
}

fn obstacle(id: usize, center: Vec2) -> ObstacleSpec {
    ObstacleSpec {
        id,
        center,
        radius: OBSTACLE_RADIUS,
    }
}

fn jitter(rng: &mut impl Rng, p: Vec2, shift: f64) -> Vec2 {
    if shift <= 0.0 {
        return p;
    }
    p + Vec2::new(rng.gen_range(-shift..=shift), rng.gen_range(-shift..=shift))
}

/// Positions of the four agent slots and obstacles of the proof-of-concept layout.
const POC_STARTS: [[f64; 2]; 4] = [[-1.8, 2.3], [-0.6, 2.3], [0.6, 2.3], [1.8, 2.3]];
const POC_GOALS: [[f64; 2]; 4] = [[1.2, -2.3], [1.8, -2.3], [-1.8, -2.3], [-0.6, -2.3]];
const POC_OBSTACLES: [[f64; 2]; 4] = [[-1.7, 0.3], [-0.3, 0.6], [0.6, -0.4], [1.9, -0.3]];

const GEN8_OBSTACLES: [[f64; 2]; 8] = [
    [-2.0, 1.0],
    [-0.7, 1.2],
    [0.6, 1.0],
    [1.9, 1.2],
    [-1.4, -0.6],
    [-0.1, -0.4],
    [1.2, -0.6],
    [2.6, -0.5],
];

/// A canonical start clearance check that also keeps goals off obstacles.
fn roomy(cfg: &WorldConfig) -> bool {
    if !validate_config(cfg).is_empty() {
        return false;
    }
    let agents = &cfg.agents;
    for (k, a) in agents.iter().enumerate() {
        for b in &agents[k + 1..] {
            if pairwise_clearance(a.start, b.start, a.radius, b.radius) < SPAWN_MARGIN
                || pairwise_clearance(a.goal, b.goal, a.radius, b.radius) < SPAWN_MARGIN
            {
                return false;
            }
        }
        for o in &cfg.obstacles {
            if pairwise_clearance(a.start, o.center, a.radius, o.radius) < SPAWN_MARGIN
                || pairwise_clearance(a.goal, o.center, a.radius, o.radius) < SPAWN_MARGIN
            {
                return false;
            }
        }
    }
    true
}

fn shifted_layout(
    rng: &mut ChaCha8Rng,
    starts: &[[f64; 2]],
    goals: &[[f64; 2]],
    obstacles: &[[f64; 2]],
    shift: f64,
    obstacle_shift: f64,
    max_steps: usize,
) -> WorldConfig {
    for _attempt in 0..1000 {
        let agents = starts
            .iter()
            .zip(goals)
            .enumerate()
            .map(|(i, (s, g))| agent(i, jitter(rng, Vec2::from(*s), shift), jitter(rng, Vec2::from(*g), shift)))
            .collect();
        let obs = obstacles
            .iter()
            .enumerate()
            .map(|(i, c)| obstacle(i, jitter(rng, Vec2::from(*c), obstacle_shift)))
            .collect();
        let cfg = world(agents, obs, max_steps, 3.5);
        if roomy(&cfg) {
            return cfg;
        }
    }
    panic!("could not place a valid layout after 1000 attempts");
}

/// Builds the scenario `kind` with its default parameters.
pub fn make_scenario(kind: ScenarioKind, seed: u64) -> WorldConfig {
    make_scenario_with(kind, &ScenarioParams::default_for(kind), seed)
}

pub fn make_scenario_with(kind: ScenarioKind, params: &ScenarioParams, seed: u64) -> WorldConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ce7_a210_0000_0000);
    let cfg = match kind {
        ScenarioKind::ProofOfConcept => {
            let n = params.n_agents.min(POC_STARTS.len());
            shifted_layout(
                &mut rng,
                &POC_STARTS[..n],
                &POC_GOALS[..n],
                &POC_OBSTACLES,
                params.shift,
                0.0,
                HORIZON,
            )
        }
        ScenarioKind::Generalization8 => {
            let n = params.n_agents.min(POC_STARTS.len());
            let starts: Vec<[f64; 2]> = POC_STARTS[..n].iter().map(|p| [p[0], p[1] + 0.4]).collect();
            let goals: Vec<[f64; 2]> = POC_GOALS[..n].iter().map(|p| [p[0], p[1] - 0.4]).collect();
            shifted_layout(
                &mut rng,
                &starts,
                &goals,
                &GEN8_OBSTACLES,
                params.shift,
                params.shift,
                LONG_HORIZON,
            )
        }
        ScenarioKind::NarrowPassage => {
            let offset = OBSTACLE_RADIUS + 0.5 * params.passage_width;
            let obstacles = vec![
                obstacle(0, Vec2::new(-offset, 0.0)),
                obstacle(1, Vec2::new(offset, 0.0)),
            ];
            let n = params.n_agents.max(1);
            let agents = (0..n)
                .map(|i| {
                    // Alternate sides; stagger laterally so starts do not overlap.
                    let top = i % 2 == 0;
                    let lane = (i / 2) as f64;
                    let x = 0.15 * (if top { 1.0 } else { -1.0 }) + 0.45 * lane * if i % 4 < 2 { 1.0 } else { -1.0 };
                    let y = 2.0 + 0.4 * lane;
                    let (sy, gy) = if top { (y, -y) } else { (-y, y) };
                    agent(i, Vec2::new(x, sy), Vec2::new(-x, gy))
                })
                .collect();
            world(agents, obstacles, HORIZON, 3.5)
        }
        ScenarioKind::Cross => {
            let n = params.n_agents.max(2);
            let radius = 2.0;
            let agents = (0..n)
                .map(|i| {
                    let theta = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    let p = Vec2::new(radius * theta.cos(), radius * theta.sin());
                    agent(i, p, -p)
                })
                .collect();
            world(agents, Vec::new(), HORIZON, 3.0)
        }
        ScenarioKind::Singularity => world(
            vec![agent(0, Vec2::new(0.0, 0.0), Vec2::new(4.0, 0.0))],
            vec![obstacle(0, Vec2::new(2.0, 0.0))],
            HORIZON,
            5.0,
        ),
        ScenarioKind::FreeSpace => world(
            vec![agent(0, Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0))],
            Vec::new(),
            HORIZON,
            3.0,
        ),
    };
    debug_assert!(validate_config(&cfg).is_empty());
    cfg
}
