use cbfnav::policy::{fixed_policy, random_policy, ActMode, GnnArch, GnnPolicy, PolicyParams};
use cbfnav::sim::{
    check_safety, default_tolerance, make_scenario, run_episode, EpisodeOptions, EpisodeOutcome, ScenarioKind,
    ARRIVAL_RADIUS,
};
use cbfnav::types::{CbfParams, ControllerConfig, ParamBounds};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Arrival step of a lone agent on the x axis, iterating the closed-form
/// optimum of its CLF-QP: the unconstrained speed `2 eps r^3 / (4 r^2 + 1/xi)`
/// clamped to the box.
fn free_space_arrival(distance: f64, cfg: &ControllerConfig, u_max: f64, dt: f64) -> usize {
    let mut x = 0.0;
    let mut t = 0;
    while distance - x > ARRIVAL_RADIUS {
        let r = distance - x;
        let lambda = cfg.epsilon * r * r / (4.0 * r * r + 1.0 / cfg.xi);
        x += dt * (2.0 * lambda * r).min(u_max);
        t += 1;
    }
    t
}

#[test]
fn free_space_arrival_matches_closed_form() {
    let config = make_scenario(ScenarioKind::FreeSpace, 0);
    let opts = EpisodeOptions::default();
    let agent = &config.agents[0];
    assert_eq!(agent.goal.y, agent.start.y);
    let expected = free_space_arrival(agent.goal.x - agent.start.x, &opts.controller, config.u_max, config.dt);
    for params in [CbfParams::uniform(0.1, 2.0), CbfParams::uniform(10.0, 1.0)] {
        let traj = run_episode(&config, &mut fixed_policy(params), 0, &opts).unwrap();
        assert_eq!(traj.outcome, EpisodeOutcome::AllArrived);
        assert_eq!(traj.arrival_step(0), Some(expected));
    }
    assert!(expected < config.max_steps);
}

#[test]
fn feasible_episodes_never_breach_the_tolerance() {
    let opts = EpisodeOptions::default();
    let mut audited = 0;
    for kind in ScenarioKind::ALL {
        for seed in 0..15 {
            let config = make_scenario(kind, seed);
            let traj = run_episode(&config, &mut random_policy(ParamBounds::default(), 10), seed, &opts).unwrap();
            assert!(traj.len() <= config.max_steps + 1);
            assert_eq!(traj.steps[0].agents[0].position, config.agents[0].start);
            if traj.infeasible_steps() == 0 {
                audited += 1;
                assert!(
                    check_safety(&traj, &config, default_tolerance(&config)).is_empty(),
                    "{} seed {seed}",
                    kind.name()
                );
            }
        }
    }
    assert!(audited > 0);
}

#[test]
fn episodes_are_reproducible() {
    let opts = EpisodeOptions::default();
    let params = PolicyParams::init(GnnArch::policy(16), -0.5, &mut ChaCha8Rng::seed_from_u64(3));
    for seed in [0, 7, 19] {
        let config = make_scenario(ScenarioKind::ProofOfConcept, seed);
        let mut a = GnnPolicy::new(params.clone(), ParamBounds::default(), ActMode::Sample);
        let mut b = GnnPolicy::new(params.clone(), ParamBounds::default(), ActMode::Sample);
        assert_eq!(
            run_episode(&config, &mut a, seed, &opts).unwrap(),
            run_episode(&config, &mut b, seed, &opts).unwrap()
        );
        let mut r1 = random_policy(ParamBounds::default(), 10);
        let mut r2 = random_policy(ParamBounds::default(), 10);
        assert_eq!(
            run_episode(&config, &mut r1, seed, &opts).unwrap(),
            run_episode(&config, &mut r2, seed, &opts).unwrap()
        );
    }
}

/// Reordering the agent list (ids kept) permutes the trajectory and changes
/// nothing else beyond rounding in the QP.
#[test]
fn agent_order_does_not_matter() {
    let opts = EpisodeOptions::default();
    let params = PolicyParams::init(GnnArch::policy(16), -0.5, &mut ChaCha8Rng::seed_from_u64(11));
    for seed in 0..4 {
        let config = make_scenario(ScenarioKind::Cross, seed);
        let mut reversed = config.clone();
        reversed.agents.reverse();
        let n = config.agents.len();
        let mut p1 = GnnPolicy::new(params.clone(), ParamBounds::default(), ActMode::Mean);
        let mut p2 = GnnPolicy::new(params.clone(), ParamBounds::default(), ActMode::Mean);
        let a = run_episode(&config, &mut p1, seed, &opts).unwrap();
        let b = run_episode(&reversed, &mut p2, seed, &opts).unwrap();
        assert_eq!(a.len(), b.len());
        for (sa, sb) in a.steps.iter().zip(&b.steps) {
            for i in 0..n {
                let pa = sa.agents[i].position;
                let pb = sb.agents[n - 1 - i].position;
                assert!(pa.dist(pb) <= 1e-9, "step {} agent {i}: {pa:?} vs {pb:?}", sa.t);
            }
        }
    }
}
