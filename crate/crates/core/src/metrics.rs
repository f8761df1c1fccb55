//! Navigation metrics, the fixed-parameter grid search, and multi-seed evaluation.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::policy::{fixed_policy, CbfPolicy};
use crate::sim::{run_episode, EpisodeOptions, EpisodeOutcome, Trajectory};
use crate::types::{CbfParams, Interval, WorldConfig};

/// One agent's inputs to SPL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplRecord {
    pub success: bool,
    pub shortest: f64,
    pub actual: f64,
}

/// Success weighted by path length, averaged over agents. Empty input gives 0.
pub fn spl(records: &[SplRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let sum: f64 = records
        .iter()
        .map(|r| {
            if r.success {
                r.shortest / r.actual.max(r.shortest)
            } else {
                0.0
            }
        })
        .sum();
    sum / records.len() as f64
}

/// Largest speed reachable under a per-axis bound `u_max`.
pub fn reference_speed(u_max: f64) -> f64 {
    u_max * std::f64::consts::SQRT_2
}

/// Mean commanded speed of `agent` over the steps on which it acted, divided
/// by `v_ref`. An agent that never acted scores 0.
pub fn pct_speed(traj: &Trajectory, agent: usize, v_ref: f64) -> f64 {
    let speeds: Vec<f64> = traj
        .actions()
        .filter(|(_, i, _)| *i == agent)
        .map(|(_, _, a)| a.control.norm())
        .collect();
    if speeds.is_empty() {
        return 0.0;
    }
    speeds.iter().sum::<f64>() / speeds.len() as f64 / v_ref
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMetrics {
    pub success: bool,
    pub path_length: f64,
    pub straight_line_length: f64,
    pub mean_speed: f64,
    pub pct_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub agents: Vec<AgentMetrics>,
    pub spl: f64,
    pub pct_speed: f64,
    pub success_rate: f64,
    /// Every agent arrived without a safety violation.
    pub success: bool,
    pub episode_steps: usize,
    pub infeasible_steps: usize,
    pub total_reward: f64,
}

pub fn episode_metrics(traj: &Trajectory, config: &WorldConfig) -> EpisodeMetrics {
    let n = traj.num_agents();
    let v_ref = reference_speed(config.u_max);
    let violated = matches!(traj.outcome, EpisodeOutcome::SafetyViolation { .. });
    let agents: Vec<AgentMetrics> = (0..n)
        .map(|i| {
            let path_length = traj
                .steps
                .windows(2)
                .map(|w| w[1].agents[i].position.dist(w[0].agents[i].position))
                .sum();
            let pct = pct_speed(traj, i, v_ref);
            AgentMetrics {
                success: !violated && traj.arrival_step(i).is_some(),
                path_length,
                straight_line_length: config.agents[i].start.dist(config.agents[i].goal),
                mean_speed: pct * v_ref,
                pct_speed: pct,
            }
        })
        .collect();
    let records: Vec<SplRecord> = agents
        .iter()
        .map(|a| SplRecord {
            success: a.success,
            shortest: a.straight_line_length,
            actual: a.path_length,
        })
        .collect();
    let mean = |f: &dyn Fn(&AgentMetrics) -> f64| {
        if n == 0 {
            0.0
        } else {
            agents.iter().map(f).sum::<f64>() / n as f64
        }
    };
    EpisodeMetrics {
        spl: spl(&records),
        pct_speed: mean(&|a| a.pct_speed),
        success_rate: mean(&|a| if a.success { 1.0 } else { 0.0 }),
        success: n > 0 && agents.iter().all(|a| a.success),
        episode_steps: traj.len().saturating_sub(1),
        infeasible_steps: traj.infeasible_steps(),
        total_reward: traj.total_reward(),
        agents,
    }
}

/// Two evenly spaced axes over `(zeta, eta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub zeta: Interval,
    pub eta: Interval,
    pub zeta_points: usize,
    pub eta_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            zeta: Interval::new(0.1, 10.0),
            eta: Interval::new(1.0, 2.0),
            zeta_points: 10,
            eta_points: 10,
        }
    }
}

/// `n` evenly spaced points including both endpoints.
pub fn linspace(range: Interval, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![range.lo],
        _ => (0..n)
            .map(|k| {
                if k + 1 == n {
                    range.hi
                } else {
                    range.lo + range.width() * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

impl GridSpec {
    pub fn points(&self) -> Vec<(f64, f64)> {
        let etas = linspace(self.eta, self.eta_points);
        linspace(self.zeta, self.zeta_points)
            .into_iter()
            .flat_map(|z| etas.iter().map(move |&e| (z, e)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub zeta: f64,
    pub eta: f64,
    pub spl: f64,
    pub pct_speed: f64,
    pub success: bool,
    pub success_rate: f64,
    pub infeasible_steps: usize,
}

fn rank(a: &GridRow, b: &GridRow) -> std::cmp::Ordering {
    b.spl
        .total_cmp(&a.spl)
        .then(b.pct_speed.total_cmp(&a.pct_speed))
        .then(a.zeta.total_cmp(&b.zeta))
        .then(a.eta.total_cmp(&b.eta))
}

/// One episode per grid point with `(zeta, eta)` applied to both agent and
/// obstacle constraints. Rows are best first.
pub fn grid_search(
    config: &WorldConfig,
    grid: &GridSpec,
    opts: &EpisodeOptions,
    seed: u64,
) -> Result<Vec<GridRow>> {
    let mut rows = grid
        .points()
        .into_par_iter()
        .map(|(zeta, eta)| {
            let mut policy = fixed_policy(CbfParams::uniform(zeta, eta));
            let traj = run_episode(config, &mut policy, seed, opts)?;
            let m = episode_metrics(&traj, config);
            Ok(GridRow {
                zeta,
                eta,
                spl: m.spl,
                pct_speed: m.pct_speed,
                success: m.success,
                success_rate: m.success_rate,
                infeasible_steps: m.infeasible_steps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(rank);
    Ok(rows)
}

pub fn write_grid_csv(rows: &[GridRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub spl: f64,
    pub pct_speed: f64,
    pub success_rate: f64,
    pub success: bool,
    pub episode_steps: usize,
    pub infeasible_steps: usize,
    pub total_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n_episodes: usize,
    pub spl: Stat,
    pub pct_speed: Stat,
    pub success_rate: Stat,
    pub infeasible_steps: Stat,
    pub total_reward: Stat,
    pub episodes: Vec<EpisodeSummary>,
}

impl EvalSummary {
    pub fn from_episodes(episodes: Vec<EpisodeSummary>) -> Self {
        let col = |f: &dyn Fn(&EpisodeSummary) -> f64| Stat::of(&episodes.iter().map(f).collect::<Vec<_>>());
        Self {
            n_episodes: episodes.len(),
            spl: col(&|e| e.spl),
            pct_speed: col(&|e| e.pct_speed),
            success_rate: col(&|e| e.success_rate),
            infeasible_steps: col(&|e| e.infeasible_steps as f64),
            total_reward: col(&|e| e.total_reward),
            episodes,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

pub type PolicyFactory<'a> = dyn Fn() -> Box<dyn CbfPolicy + Send> + Sync + 'a;
pub type ScenarioFamily<'a> = dyn Fn(u64) -> WorldConfig + Sync + 'a;

/// Runs episode `k` on `family(seed + k)` with episode seed `seed + k`.
pub fn evaluate(
    make_policy: &PolicyFactory<'_>,
    family: &ScenarioFamily<'_>,
    n_episodes: usize,
    seed: u64,
    opts: &EpisodeOptions,
) -> Result<EvalSummary> {
    let episodes = (0..n_episodes as u64)
        .into_par_iter()
        .map(|k| {
            let s = seed.wrapping_add(k);
            let config = family(s);
            let mut policy = make_policy();
            let traj = run_episode(&config, policy.as_mut(), s, opts)?;
            let m = episode_metrics(&traj, &config);
            Ok(EpisodeSummary {
                seed: s,
                spl: m.spl,
                pct_speed: m.pct_speed,
                success_rate: m.success_rate,
                success: m.success,
                episode_steps: m.episode_steps,
                infeasible_steps: m.infeasible_steps,
                total_reward: m.total_reward,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalSummary::from_episodes(episodes))
}
