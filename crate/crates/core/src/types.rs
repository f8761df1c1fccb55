//! Shared domain types and configuration validation.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pairwise_clearance, Aabb, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: usize,
    pub start: Vec2,
    pub goal: Vec2,
    pub radius: f64,
}

/// Kinematic state of one agent. `velocity` is the control applied on the
/// previous step; it is what neighbors see as this agent's velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vec2,
    pub velocity: Vec2,
}

impl AgentState {
    pub fn at_rest(position: Vec2) -> Self {
        Self {
            position,
            velocity: Vec2::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub id: usize,
    pub center: Vec2,
    pub radius: f64,
}

/// Everything that defines an episode's world. This is also the scenario file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub agents: Vec<AgentSpec>,
    pub obstacles: Vec<ObstacleSpec>,
    pub sensing_radius: f64,
    pub dt: f64,
    pub max_steps: usize,
    pub u_max: f64,
    pub workspace: Aabb,
}

impl WorldConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world config serializes")
    }

    /// Hex SHA-256 of the canonical (compact) JSON encoding.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("world config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Closed interval used to bound one CBF parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// The class-K parameters for one agent at one step: `alpha(h) = zeta * h^eta`,
/// one pair for agent neighbors and one for obstacles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbfParams {
    #[serde(rename = "za")]
    pub zeta_a: f64,
    #[serde(rename = "ea")]
    pub eta_a: f64,
    #[serde(rename = "zo")]
    pub zeta_o: f64,
    #[serde(rename = "eo")]
    pub eta_o: f64,
}

impl CbfParams {
    pub const fn new(zeta_a: f64, eta_a: f64, zeta_o: f64, eta_o: f64) -> Self {
        Self {
            zeta_a,
            eta_a,
            zeta_o,
            eta_o,
        }
    }

    /// Same `(zeta, eta)` for agents and obstacles.
    pub const fn uniform(zeta: f64, eta: f64) -> Self {
        Self::new(zeta, eta, zeta, eta)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.zeta_a, self.eta_a, self.zeta_o, self.eta_o]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl fmt::Display for CbfParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "za={} ea={} zo={} eo={}",
            self.zeta_a, self.eta_a, self.zeta_o, self.eta_o
        )
    }
}

/// Admissible box for the four CBF parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub zeta: Interval,
    pub eta: Interval,
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            zeta: Interval::new(0.1, 10.0),
            eta: Interval::new(1.0, 2.0),
        }
    }
}

impl ParamBounds {
    /// Bounds in `CbfParams::to_array` order.
    pub fn as_array(&self) -> [Interval; 4] {
        [self.zeta, self.eta, self.zeta, self.eta]
    }

    pub fn contains(&self, p: &CbfParams) -> bool {
        self.as_array()
            .iter()
            .zip(p.to_array())
            .all(|(b, v)| b.contains(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    /// CLF decay rate.
    pub epsilon: f64,
    /// Penalty weight on the CLF slack.
    pub xi: f64,
    pub param_bounds: ParamBounds,
    /// Overlap depth (meters) accepted as Euler discretization error. Barriers
    /// that are negative but within this depth are treated as contact (h = 0).
    #[serde(default = "default_overlap_tolerance")]
    pub overlap_tolerance: f64,
}

fn default_overlap_tolerance() -> f64 {
    0.05
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            epsilon: 10.0,
            xi: 10.0,
            param_bounds: ParamBounds::default(),
            overlap_tolerance: default_overlap_tolerance(),
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config("epsilon must be nonnegative".into()));
        }
        if !(self.xi > 0.0) {
            return Err(Error::Config("xi must be positive".into()));
        }
        if !(self.overlap_tolerance >= 0.0) {
            return Err(Error::Config("overlap_tolerance must be nonnegative".into()));
        }
        for b in [self.param_bounds.zeta, self.param_bounds.eta] {
            if !(b.lo <= b.hi) {
                return Err(Error::Config(format!("empty parameter interval {b:?}")));
            }
        }
        if self.param_bounds.zeta.lo <= 0.0 || self.param_bounds.eta.lo < 1.0 {
            return Err(Error::Config(
                "zeta bounds must be positive and eta bounds at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One reason a [`WorldConfig`] is invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.reason)
    }
}

/// Returns every invariant violation in `config`; an empty list means valid.
pub fn validate_config(config: &WorldConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |reason: String| out.push(Violation { reason });

    if !(config.sensing_radius > 0.0) {
        push("sensing_radius must be positive".into());
    }
    if !(config.dt > 0.0) {
        push("dt must be positive".into());
    }
    if config.max_steps < 1 {
        push("max_steps must be at least 1".into());
    }
    if !(config.u_max > 0.0) {
        push("u_max must be positive".into());
    }
    let ws = config.workspace;
    if !(ws.min.x < ws.max.x && ws.min.y < ws.max.y) {
        push("workspace min must be strictly below max".into());
    }

    let mut seen = std::collections::BTreeSet::new();
    for a in &config.agents {
        if !seen.insert(a.id) {
            push(format!("duplicate agent id {}", a.id));
        }
        if !(a.radius > 0.0) {
            push(format!("agent {}: radius must be positive", a.id));
        }
        if !a.start.is_finite() || !ws.contains(a.start) {
            push(format!("agent {}: start outside workspace", a.id));
        }
        if !a.goal.is_finite() || !ws.contains(a.goal) {
            push(format!("agent {}: goal outside workspace", a.id));
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for o in &config.obstacles {
        if !seen.insert(o.id) {
            push(format!("duplicate obstacle id {}", o.id));
        }
        if !(o.radius > 0.0) {
            push(format!("obstacle {}: radius must be positive", o.id));
        }
    }

    for (k, a) in config.agents.iter().enumerate() {
        for b in &config.agents[k + 1..] {
            if !(pairwise_clearance(a.start, b.start, a.radius, b.radius) > 0.0) {
                push(format!("agents {} and {} overlap at start", a.id, b.id));
            }
        }
        for o in &config.obstacles {
            if !(pairwise_clearance(a.start, o.center, a.radius, o.radius) > 0.0) {
                push(format!("agent {} overlaps obstacle {} at start", a.id, o.id));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_by_four() -> WorldConfig {
        WorldConfig {
            agents: (0..4)
                .map(|i| AgentSpec {
                    id: i,
                    start: Vec2::new(-1.5 + i as f64, 2.0),
                    goal: Vec2::new(1.5 - i as f64, -2.0),
                    radius: 0.15,
                })
                .collect(),
            obstacles: (0..4)
                .map(|i| ObstacleSpec {
                    id: i,
                    center: Vec2::new(-2.1 + 1.4 * i as f64, 0.0),
                    radius: 0.5,
                })
                .collect(),
            sensing_radius: 2.0,
            dt: 0.05,
            max_steps: 500,
            u_max: 0.5,
            workspace: Aabb {
                min: Vec2::new(-3.0, -3.0),
                max: Vec2::new(3.0, 3.0),
            },
        }
    }

    #[test]
    fn valid_config_has_empty_report() {
        assert!(validate_config(&four_by_four()).is_empty());
    }

    #[test]
    fn coincident_start_and_obstacle_is_reported() {
        let mut cfg = four_by_four();
        cfg.agents[2].start = cfg.obstacles[1].center;
        let report = validate_config(&cfg);
        assert_eq!(report.len(), 1, "{report:?}");
        assert!(report[0].reason.contains("agent 2"));
        assert!(report[0].reason.contains("obstacle 1"));
    }

    #[test]
    fn zero_dt_is_reported() {
        let mut cfg = four_by_four();
        cfg.dt = 0.0;
        let report = validate_config(&cfg);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].reason, "dt must be positive");
    }

    #[test]
    fn scenario_file_rejects_unknown_keys() {
        let cfg = four_by_four();
        let mut v: serde_json::Value = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(WorldConfig::from_json(&v.to_string()).unwrap(), cfg);
        v["gravity"] = serde_json::json!(9.81);
        assert!(WorldConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&cfg.to_json()).unwrap();
        v["agents"][0]["color"] = serde_json::json!("red");
        assert!(WorldConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn params_serialize_with_short_keys() {
        let p = CbfParams::new(1.0, 1.5, 2.0, 1.25);
        assert_eq!(
            serde_json::to_string(&p).unwrap(),
            r#"{"za":1.0,"ea":1.5,"zo":2.0,"eo":1.25}"#
        );
    }

    #[test]
    fn controller_defaults_validate() {
        ControllerConfig::default().validate().unwrap();
        let bad = ControllerConfig {
            xi: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
