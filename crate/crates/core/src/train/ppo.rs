//! Clipped-surrogate policy optimization for the shared message-passing policy.
//!
//! Every agent-step is one sample. Each agent's transitions carry its own
//! reward; advantages come from GAE along that agent's sequence with a
//! separate message-passing critic. Gradients are computed by hand through the
//! networks and applied with Adam.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::reward::gae;
use crate::controller::LocalView;
use crate::error::{Error, Result};
use crate::metrics::ScenarioFamily;
use crate::policy::{
    distribution, observe, raw_log_prob, sample_action, CbfPolicy, GnnArch, Observation, PolicyParams, ACTION_DIM,
};
use crate::sim::{run_episode, EpisodeOptions, EpisodeOutcome};
use crate::types::{CbfParams, ParamBounds};

/// Samples per parallel gradient chunk. Fixed so that the summation order,
/// and therefore every bit of the result, does not depend on the thread count.
const GRAD_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub episodes_per_iteration: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub clip_ratio: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    pub critic_learning_rate: f64,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
    pub max_grad_norm: f64,
    pub hidden: usize,
    pub initial_log_std: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            episodes_per_iteration: 8,
            epochs: 4,
            minibatch_size: 512,
            clip_ratio: 0.2,
            gae_lambda: 0.95,
            learning_rate: 3e-4,
            critic_learning_rate: 1e-3,
            entropy_coeff: 0.0,
            value_coeff: 0.5,
            max_grad_norm: 0.5,
            hidden: 64,
            initial_log_std: -0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.clip_ratio > 0.0) {
            return bad("clip_ratio must be positive");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if self.episodes_per_iteration == 0 || self.minibatch_size == 0 || self.hidden == 0 {
            return bad("episodes_per_iteration, minibatch_size and hidden must be positive");
        }
        if !(self.learning_rate >= 0.0) || !(self.critic_learning_rate >= 0.0) {
            return bad("learning rates must be nonnegative");
        }
        if !(self.max_grad_norm > 0.0) || !(self.value_coeff >= 0.0) || !self.entropy_coeff.is_finite() {
            return bad("max_grad_norm must be positive, value_coeff nonnegative");
        }
        if !self.initial_log_std.is_finite() {
            return bad("initial_log_std must be finite");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One agent-step ready for optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub obs: Observation,
    pub raw: [f64; ACTION_DIM],
    /// Gaussian log-density of `raw` under the behavior policy. The squash
    /// Jacobian does not depend on the parameters and cancels in the ratio.
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutBatch {
    pub samples: Vec<Sample>,
    pub episode_rewards: Vec<f64>,
    pub episode_success: Vec<bool>,
    pub episode_infeasible: Vec<usize>,
}

impl RolloutBatch {
    pub fn mean_reward(&self) -> f64 {
        mean(&self.episode_rewards)
    }

    pub fn success_rate(&self) -> f64 {
        mean(&self.episode_success.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect::<Vec<_>>())
    }

    pub fn mean_infeasible(&self) -> f64 {
        mean(&self.episode_infeasible.iter().map(|&n| n as f64).collect::<Vec<_>>())
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

struct Transition {
    t: usize,
    id: usize,
    obs: Observation,
    raw: [f64; ACTION_DIM],
    log_prob: f64,
}

/// Samples from the stochastic policy and remembers what it did.
struct RecordingPolicy<'a> {
    params: &'a PolicyParams,
    bounds: ParamBounds,
    log: Vec<Transition>,
}

impl CbfPolicy for RecordingPolicy<'_> {
    fn reset(&mut self) {
        self.log.clear();
    }

    fn act(&mut self, t: usize, view: &LocalView, rng: &mut dyn RngCore) -> CbfParams {
        let obs = observe(view);
        let dist = distribution(self.params, &obs, self.bounds);
        let a = sample_action(&dist, rng);
        self.log.push(Transition {
            t,
            id: view.self_spec.id,
            log_prob: raw_log_prob(&a.raw, &dist.mean, &dist.log_std),
            obs,
            raw: a.raw,
        });
        a.params
    }
}

struct EpisodeRollout {
    samples: Vec<Sample>,
    reward: f64,
    success: bool,
    infeasible: usize,
}

fn rollout_episode(
    policy: &PolicyParams,
    critic: &PolicyParams,
    family: &ScenarioFamily<'_>,
    seed: u64,
    opts: &EpisodeOptions,
    gae_lambda: f64,
) -> Result<EpisodeRollout> {
    let config = family(seed);
    let mut rec = RecordingPolicy {
        params: policy,
        bounds: opts.controller.param_bounds,
        log: Vec::new(),
    };
    let traj = run_episode(&config, &mut rec, seed, opts)?;
    let n = config.agents.len();
    let index_of = |id: usize| config.agents.iter().position(|a| a.id == id).expect("known agent id");

    // Per agent: transitions that made it into the trajectory, in time order.
    let mut per_agent: Vec<Vec<(Transition, f64)>> = (0..n).map(|_| Vec::new()).collect();
    for tr in rec.log {
        let i = index_of(tr.id);
        let step = traj.steps.get(tr.t);
        if let Some(action) = step.and_then(|s| s.agents[i].action) {
            per_agent[i].push((tr, action.reward()));
        }
    }

    let violated = matches!(traj.outcome, EpisodeOutcome::SafetyViolation { .. });
    let mut samples = Vec::new();
    for (i, seq) in per_agent.into_iter().enumerate() {
        if seq.is_empty() {
            continue;
        }
        let mut values: Vec<f64> = seq.iter().map(|(tr, _)| critic.forward(&tr.obs)[0]).collect();
        let terminal = violated || traj.arrival_step(i).is_some();
        let bootstrap = if terminal { 0.0 } else { *values.last().unwrap() };
        values.push(bootstrap);
        let rewards: Vec<f64> = seq.iter().map(|(_, r)| *r).collect();
        let adv = gae(&rewards, &values, opts.reward.gamma, gae_lambda);
        for (k, (tr, r)) in seq.into_iter().enumerate() {
            samples.push(Sample {
                obs: tr.obs,
                raw: tr.raw,
                log_prob: tr.log_prob,
                reward: r,
                value: values[k],
                advantage: adv[k],
                ret: adv[k] + values[k],
            });
        }
    }
    Ok(EpisodeRollout {
        samples,
        reward: traj.total_reward(),
        success: traj.outcome == EpisodeOutcome::AllArrived,
        infeasible: traj.infeasible_steps(),
    })
}

/// Runs one stochastic episode per seed. Results are assembled in seed order.
pub fn collect_rollouts(
    policy: &PolicyParams,
    critic: &PolicyParams,
    family: &ScenarioFamily<'_>,
    seeds: &[u64],
    opts: &EpisodeOptions,
    gae_lambda: f64,
) -> Result<RolloutBatch> {
    let episodes = seeds
        .par_iter()
        .map(|&s| rollout_episode(policy, critic, family, s, opts, gae_lambda))
        .collect::<Result<Vec<_>>>()?;
    let mut batch = RolloutBatch::default();
    for e in episodes {
        batch.samples.extend(e.samples);
        batch.episode_rewards.push(e.reward);
        batch.episode_success.push(e.success);
        batch.episode_infeasible.push(e.infeasible);
    }
    Ok(batch)
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for k in 0..theta.len() {
            self.m[k] = Self::B1 * self.m[k] + (1.0 - Self::B1) * grad[k];
            self.v[k] = Self::B2 * self.v[k] + (1.0 - Self::B2) * grad[k] * grad[k];
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            theta[k] -= self.lr * mh / (vh.sqrt() + Self::EPS);
        }
    }
}

/// Per-sample clipped surrogate terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct SurrogateTerms {
    loss: f64,
    ratio: f64,
    clipped: bool,
    approx_kl: f64,
    clipped_count: usize,
}

/// Surrogate loss of one sample and `d loss / d log_prob`.
fn surrogate(new_log_prob: f64, old_log_prob: f64, advantage: f64, clip: f64) -> (SurrogateTerms, f64) {
    let ratio = (new_log_prob - old_log_prob).exp();
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    let (loss, dlogp) = if unclipped <= clipped {
        (-unclipped, -advantage * ratio)
    } else {
        (-clipped, 0.0)
    };
    let log_r = new_log_prob - old_log_prob;
    (
        SurrogateTerms {
            loss,
            ratio,
            clipped: (ratio - 1.0).abs() > clip,
            approx_kl: (ratio - 1.0) - log_r,
            clipped_count: 0,
        },
        dlogp,
    )
}

/// Gradient of the mean clipped surrogate (minus entropy bonus) over
/// `samples` with the advantages given, accumulated into `grad`.
fn policy_chunk_grad(
    params: &PolicyParams,
    samples: &[&Sample],
    advantages: &[f64],
    scale: f64,
    clip: f64,
    grad: &mut [f64],
) -> SurrogateTerms {
    let ls_range = params.arch.log_std_range();
    let log_std = params.log_std().to_vec();
    let mut acc = SurrogateTerms::default();
    for (s, &a) in samples.iter().zip(advantages) {
        let mean_out = params.forward(&s.obs);
        let mean = &mean_out[..ACTION_DIM];
        let new_lp = raw_log_prob(&s.raw, mean, &log_std);
        let (terms, dlogp) = surrogate(new_lp, s.log_prob, a, clip);
        acc.loss += terms.loss * scale;
        acc.ratio += terms.ratio * scale;
        acc.approx_kl += terms.approx_kl * scale;
        acc.clipped_count += terms.clipped as usize;
        if dlogp != 0.0 {
            let mut upstream = [0.0; ACTION_DIM];
            for k in 0..ACTION_DIM {
                let inv_var = (-2.0 * log_std[k]).exp();
                let diff = s.raw[k] - mean[k];
                upstream[k] = scale * dlogp * diff * inv_var;
                let z2 = diff * diff * inv_var;
                grad[ls_range.start + k] += scale * dlogp * (z2 - 1.0);
            }
            params.backward(&s.obs, &upstream, grad);
        }
    }
    acc
}

fn critic_chunk_grad(critic: &PolicyParams, samples: &[&Sample], scale: f64, grad: &mut [f64]) -> f64 {
    let mut loss = 0.0;
    for s in samples {
        let v = critic.forward(&s.obs)[0];
        let err = v - s.ret;
        loss += 0.5 * err * err * scale;
        critic.backward(&s.obs, &[scale * err], grad);
    }
    loss
}

fn clip_norm(grad: &mut [f64], max_norm: f64, what: &str) -> Result<()> {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(Error::NonFinite(format!("{what} gradient norm {norm}")));
    }
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    Ok(())
}

/// Advantages normalized to zero mean and unit variance over the batch.
pub fn normalized_advantages(batch: &RolloutBatch) -> Vec<f64> {
    let a: Vec<f64> = batch.samples.iter().map(|s| s.advantage).collect();
    let m = mean(&a);
    let var = mean(&a.iter().map(|x| (x - m) * (x - m)).collect::<Vec<_>>());
    let sd = var.sqrt().max(1e-8);
    a.iter().map(|x| (x - m) / sd).collect()
}

/// Mean clipped surrogate loss (no entropy or value terms) of `params` on
/// the samples, with the given advantages.
pub fn surrogate_loss(params: &PolicyParams, samples: &[Sample], advantages: &[f64], clip: f64) -> f64 {
    let log_std = params.log_std().to_vec();
    let total: f64 = samples
        .iter()
        .zip(advantages)
        .map(|(s, &a)| {
            let out = params.forward(&s.obs);
            let lp = raw_log_prob(&s.raw, &out[..ACTION_DIM], &log_std);
            surrogate(lp, s.log_prob, a, clip).0.loss
        })
        .sum();
    total / samples.len().max(1) as f64
}

/// Gradient of [`surrogate_loss`] with respect to the policy parameters.
pub fn surrogate_gradient(params: &PolicyParams, samples: &[Sample], advantages: &[f64], clip: f64) -> Vec<f64> {
    let refs: Vec<&Sample> = samples.iter().collect();
    let mut grad = vec![0.0; params.theta.len()];
    policy_chunk_grad(params, &refs, advantages, 1.0 / samples.len().max(1) as f64, clip, &mut grad);
    grad
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Optimizer state carried across iterations.
#[derive(Debug, Clone)]
pub struct PpoState {
    pub policy: PolicyParams,
    pub critic: PolicyParams,
    policy_opt: Adam,
    critic_opt: Adam,
}

impl PpoState {
    pub fn new(policy: PolicyParams, critic: PolicyParams, cfg: &TrainConfig) -> Self {
        Self {
            policy_opt: Adam::new(policy.theta.len(), cfg.learning_rate),
            critic_opt: Adam::new(critic.theta.len(), cfg.critic_learning_rate),
            policy,
            critic,
        }
    }
}

/// Several epochs of minibatch steps on one batch.
pub fn ppo_update(batch: &RolloutBatch, state: &mut PpoState, cfg: &TrainConfig, rng: &mut impl Rng) -> Result<UpdateStats> {
    if batch.samples.is_empty() {
        return Err(Error::Contract("empty rollout batch".into()));
    }
    let adv = normalized_advantages(batch);
    let mut order: Vec<usize> = (0..batch.samples.len()).collect();
    let mut stats = UpdateStats::default();
    let mut n_minibatches = 0usize;
    let mut clipped = 0usize;
    let mut seen = 0usize;

    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for mb in order.chunks(cfg.minibatch_size) {
            let samples: Vec<&Sample> = mb.iter().map(|&i| &batch.samples[i]).collect();
            let advs: Vec<f64> = mb.iter().map(|&i| adv[i]).collect();
            let scale = 1.0 / mb.len() as f64;

            let policy = &state.policy;
            let parts: Vec<(Vec<f64>, SurrogateTerms)> = samples
                .par_chunks(GRAD_CHUNK)
                .zip(advs.par_chunks(GRAD_CHUNK))
                .map(|(s, a)| {
                    let mut g = vec![0.0; policy.theta.len()];
                    let terms = policy_chunk_grad(policy, s, a, scale, cfg.clip_ratio, &mut g);
                    (g, terms)
                })
                .collect();
            let mut pgrad = vec![0.0; policy.theta.len()];
            for (g, t) in &parts {
                pgrad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
                stats.policy_loss += t.loss;
                stats.mean_ratio += t.ratio;
                stats.approx_kl += t.approx_kl;
                clipped += t.clipped_count;
            }
            seen += mb.len();
            // Entropy of a diagonal Gaussian grows by one per unit of log_std.
            for k in policy.arch.log_std_range() {
                pgrad[k] -= cfg.entropy_coeff;
            }

            let critic = &state.critic;
            let cparts: Vec<(Vec<f64>, f64)> = samples
                .par_chunks(GRAD_CHUNK)
                .map(|s| {
                    let mut g = vec![0.0; critic.theta.len()];
                    let l = critic_chunk_grad(critic, s, scale * cfg.value_coeff, &mut g);
                    (g, l)
                })
                .collect();
            let mut cgrad = vec![0.0; critic.theta.len()];
            for (g, l) in &cparts {
                cgrad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
                stats.value_loss += l;
            }

            clip_norm(&mut pgrad, cfg.max_grad_norm, "policy")?;
            clip_norm(&mut cgrad, cfg.max_grad_norm, "critic")?;
            state.policy_opt.step(&mut state.policy.theta, &pgrad);
            state.critic_opt.step(&mut state.critic.theta, &cgrad);
            n_minibatches += 1;
        }
    }
    if state.policy.theta.iter().chain(&state.critic.theta).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("parameters after update".into()));
    }
    let n = n_minibatches.max(1) as f64;
    stats.policy_loss /= n;
    stats.value_loss /= n;
    stats.mean_ratio /= n;
    stats.approx_kl /= n;
    stats.clip_fraction = clipped as f64 / seen.max(1) as f64;
    Ok(stats)
}

/// One row of the learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: usize,
    pub mean_reward: f64,
    pub success_rate: f64,
    pub infeasible_steps: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

pub fn write_curve_csv(rows: &[CurveRow], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["iteration", "mean_reward", "success_rate", "infeasible_steps", "clip_fraction", "approx_kl"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Stateful training loop; one call to [`Trainer::iterate`] is one iteration.
pub struct Trainer {
    pub cfg: TrainConfig,
    pub opts: EpisodeOptions,
    pub state: PpoState,
    pub curve: Vec<CurveRow>,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, opts: EpisodeOptions) -> Result<Self> {
        cfg.validate()?;
        opts.controller.validate()?;
        opts.reward.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let policy = PolicyParams::init(GnnArch::policy(cfg.hidden), cfg.initial_log_std, &mut rng);
        let critic = PolicyParams::init(GnnArch::critic(cfg.hidden), 0.0, &mut rng);
        Ok(Self {
            state: PpoState::new(policy, critic, &cfg),
            cfg,
            opts,
            curve: Vec::new(),
            rng,
        })
    }

    pub fn policy(&self) -> &PolicyParams {
        &self.state.policy
    }

    /// Collects a batch with the current policy and updates on it.
    pub fn iterate(&mut self, family: &ScenarioFamily<'_>) -> Result<CurveRow> {
        let seeds: Vec<u64> = (0..self.cfg.episodes_per_iteration).map(|_| self.rng.gen()).collect();
        let batch = collect_rollouts(
            &self.state.policy,
            &self.state.critic,
            family,
            &seeds,
            &self.opts,
            self.cfg.gae_lambda,
        )?;
        let stats = if batch.samples.is_empty() {
            UpdateStats::default()
        } else {
            ppo_update(&batch, &mut self.state, &self.cfg, &mut self.rng)?
        };
        let row = CurveRow {
            iteration: self.curve.len() + 1,
            mean_reward: batch.mean_reward(),
            success_rate: batch.success_rate(),
            infeasible_steps: batch.mean_infeasible(),
            clip_fraction: stats.clip_fraction,
            approx_kl: stats.approx_kl,
        };
        self.curve.push(row);
        Ok(row)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub policy: PolicyParams,
    pub critic: PolicyParams,
    pub curve: Vec<CurveRow>,
}

/// Runs `cfg.iterations` iterations on episodes drawn from `family`.
pub fn train(family: &ScenarioFamily<'_>, cfg: &TrainConfig, opts: &EpisodeOptions) -> Result<TrainOutput> {
    let mut trainer = Trainer::new(*cfg, *opts)?;
    for _ in 0..cfg.iterations {
        let row = trainer.iterate(family)?;
        log::info!(
            "iteration {} mean_reward {:.3} success {:.2} infeasible {:.1}",
            row.iteration,
            row.mean_reward,
            row.success_rate,
            row.infeasible_steps
        );
    }
    Ok(TrainOutput {
        policy: trainer.state.policy,
        critic: trainer.state.critic,
        curve: trainer.curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_at_unit_ratio_is_plain_policy_gradient() {
        let (t, d) = surrogate(-1.3, -1.3, 2.0, 0.2);
        assert_eq!(t.ratio, 1.0);
        assert_eq!(t.loss, -2.0);
        assert_eq!(d, -2.0);
        assert!(!t.clipped);
    }

    #[test]
    fn clipped_branch_has_zero_gradient() {
        let (t, d) = surrogate(1.5f64.ln(), 0.0, 1.0, 0.2);
        assert!((t.loss + 1.2).abs() < 1e-12);
        assert_eq!(d, 0.0);
        assert!(t.clipped);
        // Negative advantage below the band is clipped too.
        let (_, d) = surrogate(0.5f64.ln(), 0.0, -1.0, 0.2);
        assert_eq!(d, 0.0);
        // Negative advantage above the band keeps its gradient.
        let (_, d) = surrogate(1.5f64.ln(), 0.0, -1.0, 0.2);
        assert!((d - 1.5).abs() < 1e-12);
    }

    #[test]
    fn adam_with_zero_rate_is_a_no_op() {
        let mut theta = vec![0.3, -1.7, 2.5e-9];
        let before = theta.clone();
        let mut opt = Adam::new(3, 0.0);
        opt.step(&mut theta, &[1.0, -2.0, 0.5]);
        assert_eq!(
            theta.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            before.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn clip_norm_rejects_non_finite() {
        let mut g = vec![1.0, f64::NAN];
        assert!(matches!(clip_norm(&mut g, 1.0, "x"), Err(Error::NonFinite(_))));
        let mut g = vec![3.0, 4.0];
        clip_norm(&mut g, 1.0, "x").unwrap();
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn config_roundtrip_and_validation() {
        let cfg = TrainConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(TrainConfig::from_json(&text).unwrap(), cfg);
        assert!(TrainConfig::from_json(r#"{"clip_ratio": 0.0}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"gae_lambda": 1.5}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }
}
