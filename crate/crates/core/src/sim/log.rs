//! JSON-lines trajectory logs.
//!
//! The first line is a header object with the scenario hash and seed. Every
//! following line describes one agent at one step:
//! `{"t", "agent", "p", "u", "params", "feasible", "reward"}`. `params` is null
//! when the agent did not act on that step.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{EpisodeOutcome, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::types::CbfParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    pub scenario_hash: String,
    pub seed: u64,
    pub num_agents: usize,
    pub outcome: EpisodeOutcome,
    /// Per agent, the first step at which it was within the arrival radius.
    pub arrival_steps: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogLine {
    pub t: usize,
    pub agent: usize,
    pub p: Vec2,
    pub u: Vec2,
    pub params: Option<CbfParams>,
    pub feasible: bool,
    pub reward: f64,
}

pub fn header(traj: &Trajectory) -> LogHeader {
    LogHeader {
        scenario_hash: traj.scenario_hash.clone(),
        seed: traj.seed,
        num_agents: traj.num_agents(),
        outcome: traj.outcome.clone(),
        arrival_steps: (0..traj.num_agents()).map(|i| traj.arrival_step(i)).collect(),
    }
}

/// `agent` in each line is the agent's index in the scenario.
pub fn write_log(traj: &Trajectory, mut w: impl Write) -> Result<()> {
    serde_json::to_writer(&mut w, &header(traj))?;
    w.write_all(b"\n")?;
    for s in &traj.steps {
        for (i, a) in s.agents.iter().enumerate() {
            let line = LogLine {
                t: s.t,
                agent: i,
                p: a.position,
                u: a.action.map_or(Vec2::ZERO, |x| x.control),
                params: a.action.map(|x| x.params),
                feasible: a.action.is_none_or(|x| x.feasible),
                reward: a.action.map_or(0.0, |x| x.reward()),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn to_bytes(traj: &Trajectory) -> Vec<u8> {
    let mut buf = Vec::new();
    write_log(traj, &mut buf).expect("writing to memory");
    buf
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub header: LogHeader,
    pub lines: Vec<LogLine>,
}

impl TrajectoryLog {
    /// Per agent, the recorded positions in step order.
    pub fn paths(&self) -> Vec<Vec<Vec2>> {
        let mut paths = vec![Vec::new(); self.header.num_agents];
        for l in &self.lines {
            paths[l.agent].push(l.p);
        }
        paths
    }
}

pub fn read_log(r: impl BufRead) -> Result<TrajectoryLog> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Contract("empty trajectory log".into()))??;
    let header: LogHeader = serde_json::from_str(&first)?;
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: LogLine = serde_json::from_str(&line)?;
        if l.agent >= header.num_agents {
            return Err(Error::Contract(format!("agent index {} out of range", l.agent)));
        }
        out.push(l);
    }
    Ok(TrajectoryLog { header, lines: out })
}
