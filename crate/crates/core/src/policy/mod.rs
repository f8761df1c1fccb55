//! CBF-parameter policies.
//!
//! The learned policy is a one-round message-passing network shared by all
//! agents:
//!
//! ```text
//!   m   = sum_j F_agent(p_j - p_i, v_j - v_i) + sum_l F_obst(p_l - p_i)
//!   out = F_update(m)
//! ```
//!
//! Only relative quantities enter, so the output is translation invariant, and
//! the sums are taken in ascending neighbor id so that reordering a view does
//! not change a single bit. `out` is the mean of a diagonal Gaussian over raw
//! actions; a logistic squash maps raw actions into the parameter box.

pub mod baselines;
pub mod checkpoint;
pub mod mlp;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::controller::LocalView;
use crate::error::{Error, Result};
use crate::types::{CbfParams, ParamBounds};
pub use baselines::{fixed_policy, random_policy, FixedPolicy, RandomPolicy};
pub use mlp::{mlp_backward, mlp_forward, MlpSpec};

/// Anything that picks CBF parameters for one agent at one step.
pub trait CbfPolicy {
    /// Called at the start of every episode.
    fn reset(&mut self) {}

    fn act(&mut self, t: usize, view: &LocalView, rng: &mut dyn RngCore) -> CbfParams;
}

/// Layout of a message-passing network's flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GnnArch {
    pub agent_msg: MlpSpec,
    pub obstacle_msg: MlpSpec,
    pub update: MlpSpec,
    /// Trailing state-independent log standard deviations (0 for a critic).
    pub log_std_dim: usize,
}

pub const AGENT_FEATURES: usize = 4;
pub const OBSTACLE_FEATURES: usize = 2;
pub const ACTION_DIM: usize = 4;

impl GnnArch {
    pub fn policy(hidden: usize) -> Self {
        Self {
            agent_msg: MlpSpec::new(&[AGENT_FEATURES, hidden, hidden]),
            obstacle_msg: MlpSpec::new(&[OBSTACLE_FEATURES, hidden, hidden]),
            update: MlpSpec::new(&[hidden, hidden, ACTION_DIM]),
            log_std_dim: ACTION_DIM,
        }
    }

    pub fn critic(hidden: usize) -> Self {
        Self {
            agent_msg: MlpSpec::new(&[AGENT_FEATURES, hidden, hidden]),
            obstacle_msg: MlpSpec::new(&[OBSTACLE_FEATURES, hidden, hidden]),
            update: MlpSpec::new(&[hidden, hidden, 1]),
            log_std_dim: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let msg = self.agent_msg.output_dim();
        if self.agent_msg.input_dim() != AGENT_FEATURES
            || self.obstacle_msg.input_dim() != OBSTACLE_FEATURES
            || self.obstacle_msg.output_dim() != msg
            || self.update.input_dim() != msg
        {
            return Err(Error::Contract(format!("inconsistent architecture {self:?}")));
        }
        if self.log_std_dim != 0 && self.log_std_dim != self.update.output_dim() {
            return Err(Error::Contract("log_std width must match the output".into()));
        }
        Ok(())
    }

    fn ranges(&self) -> [std::ops::Range<usize>; 4] {
        let a = self.agent_msg.param_count();
        let o = self.obstacle_msg.param_count();
        let u = self.update.param_count();
        [
            0..a,
            a..a + o,
            a + o..a + o + u,
            a + o + u..a + o + u + self.log_std_dim,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.ranges()[3].end
    }

    pub fn log_std_range(&self) -> std::ops::Range<usize> {
        self.ranges()[3].clone()
    }
}

/// Flat parameter vector plus the architecture that gives it meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub arch: GnnArch,
    pub theta: Vec<f64>,
}

impl PolicyParams {
    pub fn new(arch: GnnArch, theta: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if theta.len() != arch.param_count() {
            return Err(Error::Contract(format!(
                "expected {} parameters, got {}",
                arch.param_count(),
                theta.len()
            )));
        }
        Ok(Self { arch, theta })
    }

    /// Random initialization. The output layer is scaled down so that the
    /// initial mean sits near the middle of the parameter box.
    pub fn init(arch: GnnArch, initial_log_std: f64, rng: &mut impl Rng) -> Self {
        let mut theta = Vec::with_capacity(arch.param_count());
        theta.extend(mlp::init_params(&arch.agent_msg, 1.0, rng));
        theta.extend(mlp::init_params(&arch.obstacle_msg, 1.0, rng));
        theta.extend(mlp::init_params(&arch.update, 0.01, rng));
        theta.extend(std::iter::repeat_n(initial_log_std, arch.log_std_dim));
        Self { arch, theta }
    }

    pub fn log_std(&self) -> &[f64] {
        &self.theta[self.arch.log_std_range()]
    }

    /// Network output for a precomputed observation.
    pub fn forward(&self, obs: &Observation) -> Vec<f64> {
        gnn_pass(&self.arch, &self.theta, obs, None)
    }

    /// Accumulates `d(upstream . forward(obs)) / d theta` into `grad`.
    pub fn backward(&self, obs: &Observation, upstream: &[f64], grad: &mut [f64]) {
        gnn_pass(&self.arch, &self.theta, obs, Some((upstream, grad)));
    }
}

/// Relative neighbor features in ascending-id order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Observation {
    pub agents: Vec<[f64; AGENT_FEATURES]>,
    pub obstacles: Vec<[f64; OBSTACLE_FEATURES]>,
}

pub fn observe(view: &LocalView) -> Observation {
    let me = view.self_state;
    let mut agents: Vec<_> = view.neighbor_agents.iter().collect();
    agents.sort_by_key(|n| n.id);
    let mut obstacles: Vec<_> = view.neighbor_obstacles.iter().collect();
    obstacles.sort_by_key(|o| o.id);
    Observation {
        agents: agents
            .iter()
            .map(|n| {
                let dp = n.state.position - me.position;
                let dv = n.state.velocity - me.velocity;
                [dp.x, dp.y, dv.x, dv.y]
            })
            .collect(),
        obstacles: obstacles
            .iter()
            .map(|o| {
                let dp = o.center - me.position;
                [dp.x, dp.y]
            })
            .collect(),
    }
}

/// Forward pass; with `backprop` set, also accumulates parameter gradients.
fn gnn_pass(
    arch: &GnnArch,
    theta: &[f64],
    obs: &Observation,
    backprop: Option<(&[f64], &mut [f64])>,
) -> Vec<f64> {
    let [ra, ro, ru, _] = arch.ranges();
    let width = arch.update.input_dim();
    let mut agg = vec![0.0; width];
    let mut agent_caches = Vec::new();
    let mut obstacle_caches = Vec::new();
    let keep = backprop.is_some();
    for f in &obs.agents {
        let c = mlp::forward_cached(&arch.agent_msg, &theta[ra.clone()], f);
        for (a, m) in agg.iter_mut().zip(c.output()) {
            *a += m;
        }
        if keep {
            agent_caches.push(c);
        }
    }
    for f in &obs.obstacles {
        let c = mlp::forward_cached(&arch.obstacle_msg, &theta[ro.clone()], f);
        for (a, m) in agg.iter_mut().zip(c.output()) {
            *a += m;
        }
        if keep {
            obstacle_caches.push(c);
        }
    }
    let upd = mlp::forward_cached(&arch.update, &theta[ru.clone()], &agg);
    let out = upd.output().to_vec();

    if let Some((upstream, grad)) = backprop {
        let d_agg = mlp::backward_accumulate(
            &arch.update,
            &theta[ru.clone()],
            &upd,
            upstream,
            &mut grad[ru.clone()],
        );
        for c in &agent_caches {
            mlp::backward_accumulate(&arch.agent_msg, &theta[ra.clone()], c, &d_agg, &mut grad[ra.clone()]);
        }
        for c in &obstacle_caches {
            mlp::backward_accumulate(
                &arch.obstacle_msg,
                &theta[ro.clone()],
                c,
                &d_agg,
                &mut grad[ro.clone()],
            );
        }
    }
    out
}

/// Diagonal Gaussian over raw (pre-squash) actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    pub mean: [f64; ACTION_DIM],
    pub log_std: [f64; ACTION_DIM],
    pub bounds: ParamBounds,
}

pub fn gnn_forward(params: &PolicyParams, view: &LocalView, bounds: ParamBounds) -> ActionDistribution {
    distribution(params, &observe(view), bounds)
}

pub fn distribution(params: &PolicyParams, obs: &Observation, bounds: ParamBounds) -> ActionDistribution {
    let out = params.forward(obs);
    let mut mean = [0.0; ACTION_DIM];
    mean.copy_from_slice(&out[..ACTION_DIM]);
    let mut log_std = [0.0; ACTION_DIM];
    log_std.copy_from_slice(params.log_std());
    ActionDistribution {
        mean,
        log_std,
        bounds,
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logistic map of each raw coordinate into its parameter interval.
pub fn squash(raw: &[f64; ACTION_DIM], bounds: &ParamBounds) -> CbfParams {
    let b = bounds.as_array();
    CbfParams::from_array(std::array::from_fn(|k| {
        b[k].lo + b[k].width() * sigmoid(raw[k])
    }))
}

/// `log |d squash / d raw|` summed over coordinates.
pub fn squash_log_jacobian(raw: &[f64; ACTION_DIM], bounds: &ParamBounds) -> f64 {
    bounds
        .as_array()
        .iter()
        .zip(raw)
        .map(|(b, &r)| {
            // log s(r) + log(1 - s(r)) = -softplus(-r) - softplus(r)
            b.width().ln() - softplus(-r) - softplus(r)
        })
        .sum()
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Gaussian log-density of a raw action (no squash correction).
pub fn raw_log_prob(raw: &[f64; ACTION_DIM], mean: &[f64], log_std: &[f64]) -> f64 {
    raw.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((x, m), ls)| {
            let z = (x - m) * (-ls).exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledAction {
    pub params: CbfParams,
    pub raw: [f64; ACTION_DIM],
    /// Log-density of `params` (includes the squash Jacobian).
    pub log_prob: f64,
}

pub fn sample_action(dist: &ActionDistribution, rng: &mut dyn RngCore) -> SampledAction {
    let mut raw = [0.0; ACTION_DIM];
    for k in 0..ACTION_DIM {
        let z: f64 = rng.sample(StandardNormal);
        let std = dist.log_std[k].exp();
        raw[k] = if std == 0.0 { dist.mean[k] } else { dist.mean[k] + std * z };
    }
    let log_prob = if dist.log_std.iter().any(|l| *l == f64::NEG_INFINITY) {
        f64::INFINITY
    } else {
        raw_log_prob(&raw, &dist.mean, &dist.log_std) - squash_log_jacobian(&raw, &dist.bounds)
    };
    SampledAction {
        params: squash(&raw, &dist.bounds),
        raw,
        log_prob,
    }
}

/// How the learned policy turns its distribution into parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    Mean,
}

/// The message-passing policy as a [`CbfPolicy`].
#[derive(Debug, Clone)]
pub struct GnnPolicy {
    pub params: PolicyParams,
    pub bounds: ParamBounds,
    pub mode: ActMode,
}

impl GnnPolicy {
    pub fn new(params: PolicyParams, bounds: ParamBounds, mode: ActMode) -> Self {
        Self {
            params,
            bounds,
            mode,
        }
    }
}

impl CbfPolicy for GnnPolicy {
    fn act(&mut self, _t: usize, view: &LocalView, rng: &mut dyn RngCore) -> CbfParams {
        let dist = gnn_forward(&self.params, view, self.bounds);
        match self.mode {
            ActMode::Mean => squash(&dist.mean, &self.bounds),
            ActMode::Sample => sample_action(&dist, rng).params,
        }
    }
}
