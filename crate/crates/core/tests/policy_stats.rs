use cbfnav::controller::LocalView;
use cbfnav::policy::{random_policy, sample_action, ActionDistribution, CbfPolicy};
use cbfnav::train::gae;
use cbfnav::types::{AgentSpec, AgentState, ParamBounds};
use cbfnav::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Kolmogorov-Smirnov distance between a sample on [0, 1] and the uniform law.
fn ks_uniform(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn random_policy_draws_are_uniform() {
    let bounds = ParamBounds::default();
    let policy = random_policy(bounds, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 5000;
    let draws: Vec<[f64; 4]> = (0..n).map(|_| policy.draw(&mut rng).to_array()).collect();
    // 1% critical value of the one-sample KS statistic.
    let critical = 1.63 / (n as f64).sqrt();
    for (k, iv) in bounds.as_array().iter().enumerate() {
        let unit: Vec<f64> = draws.iter().map(|d| (d[k] - iv.lo) / iv.width()).collect();
        assert!(unit.iter().all(|u| (0.0..=1.0).contains(u)));
        let d = ks_uniform(unit);
        assert!(d < critical, "coordinate {k}: D = {d}");
    }
}

#[test]
fn random_policy_holds_draws_for_a_period() {
    let view = LocalView {
        self_state: AgentState::at_rest(Vec2::ZERO),
        self_spec: AgentSpec {
            id: 2,
            start: Vec2::ZERO,
            goal: Vec2::new(1.0, 0.0),
            radius: 0.15,
        },
        neighbor_agents: vec![],
        neighbor_obstacles: vec![],
    };
    let mut policy = random_policy(ParamBounds::default(), 10);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let acts: Vec<_> = (0..25).map(|t| policy.act(t, &view, &mut rng)).collect();
    assert!(acts[..10].iter().all(|a| *a == acts[0]));
    assert!(acts[10..20].iter().all(|a| *a == acts[10]));
    assert_ne!(acts[0], acts[10]);
    assert_ne!(acts[10], acts[20]);
}

/// Importance weighting by the reported density recovers the volume of a box
/// of parameters: E[1{x in B} / p(x)] = vol(B).
#[test]
fn log_prob_is_the_density_of_the_squashed_action() {
    let bounds = ParamBounds::default();
    let dist = ActionDistribution {
        mean: [0.3, -0.2, 0.1, 0.4],
        log_std: [0.0, -0.3, 0.2, -0.1],
        bounds,
    };
    let boxes: Vec<(f64, f64)> = bounds
        .as_array()
        .iter()
        .map(|iv| (iv.lo + 0.3 * iv.width(), iv.lo + 0.7 * iv.width()))
        .collect();
    let volume: f64 = boxes.iter().map(|(lo, hi)| hi - lo).product();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 400_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let a = sample_action(&dist, &mut rng);
        let x = a.params.to_array();
        if x.iter().zip(&boxes).all(|(v, (lo, hi))| lo <= v && v <= hi) {
            sum += (-a.log_prob).exp();
        }
    }
    let estimate = sum / n as f64;
    assert!(
        (estimate - volume).abs() <= 0.02 * volume,
        "estimate {estimate} vs volume {volume}"
    );
}

/// Advantages written as the explicit double sum over future TD errors.
#[test]
fn gae_matches_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let rewards: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let values: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let gamma = rng.gen_range(0.8..1.0);
        let lambda = rng.gen_range(0.0..1.0);
        let adv = gae(&rewards, &values, gamma, lambda);
        for t in 0..5 {
            let mut expected = 0.0;
            for l in 0..5 - t {
                let td = rewards[t + l] + gamma * values[t + l + 1] - values[t + l];
                expected += (gamma * lambda).powi(l as i32) * td;
            }
            assert!((adv[t] - expected).abs() <= 1e-12, "t {t}: {} vs {expected}", adv[t]);
        }
        // lambda = 1 telescopes to the bootstrapped discounted return minus the baseline.
        let mc = gae(&rewards, &values, gamma, 1.0);
        for t in 0..5 {
            let tail: f64 = (t..5).map(|k| gamma.powi((k - t) as i32) * rewards[k]).sum();
            let expected = tail + gamma.powi((5 - t) as i32) * values[5] - values[t];
            assert!((mc[t] - expected).abs() <= 1e-12);
        }
    }
}
