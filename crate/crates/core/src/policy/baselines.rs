use rand::{Rng, RngCore};

use super::CbfPolicy;
use crate::controller::LocalView;
use crate::types::{CbfParams, ParamBounds};

/// Returns the same parameters on every query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPolicy(pub CbfParams);

pub fn fixed_policy(params: CbfParams) -> FixedPolicy {
    FixedPolicy(params)
}

impl CbfPolicy for FixedPolicy {
    fn act(&mut self, _t: usize, _view: &LocalView, _rng: &mut dyn RngCore) -> CbfParams {
        self.0
    }
}

/// Redraws uniform parameters for each agent on steps that are multiples of
/// `period` and holds them in between.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    bounds: ParamBounds,
    period: usize,
    held: Vec<Option<(usize, CbfParams)>>,
}

pub fn random_policy(bounds: ParamBounds, period: usize) -> RandomPolicy {
    assert!(period >= 1, "period must be at least one step");
    RandomPolicy {
        bounds,
        period,
        held: Vec::new(),
    }
}

impl RandomPolicy {
    pub fn draw(&self, rng: &mut dyn RngCore) -> CbfParams {
        let b = self.bounds.as_array();
        CbfParams::from_array(std::array::from_fn(|k| {
            if b[k].width() > 0.0 {
                rng.gen_range(b[k].lo..=b[k].hi)
            } else {
                b[k].lo
            }
        }))
    }
}

impl CbfPolicy for RandomPolicy {
    fn reset(&mut self) {
        self.held.clear();
    }

    fn act(&mut self, t: usize, view: &LocalView, rng: &mut dyn RngCore) -> CbfParams {
        let id = view.self_spec.id;
        if self.held.len() <= id {
            self.held.resize(id + 1, None);
        }
        let epoch = t / self.period;
        match self.held[id] {
            Some((e, p)) if e == epoch => p,
            _ => {
                let p = self.draw(rng);
                self.held[id] = Some((epoch, p));
                p
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::types::{AgentSpec, AgentState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn view(id: usize) -> LocalView {
        LocalView {
            self_state: AgentState::at_rest(Vec2::ZERO),
            self_spec: AgentSpec {
                id,
                start: Vec2::ZERO,
                goal: Vec2::ZERO,
                radius: 0.15,
            },
            neighbor_agents: vec![],
            neighbor_obstacles: vec![],
        }
    }

    #[test]
    fn fixed_is_constant() {
        let p = CbfParams::uniform(0.1, 2.0);
        let mut pol = fixed_policy(p);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in 0..100 {
            assert_eq!(pol.act(t, &view(t % 3), &mut rng), p);
        }
    }

    #[test]
    fn random_holds_for_each_period() {
        let mut pol = random_policy(ParamBounds::default(), 10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut outputs = vec![];
        for t in 0..30 {
            outputs.push((pol.act(t, &view(0), &mut rng), pol.act(t, &view(1), &mut rng)));
        }
        for block in outputs.chunks(10) {
            assert!(block.iter().all(|o| *o == block[0]));
        }
        assert_ne!(outputs[0].0, outputs[10].0);
        assert_ne!(outputs[0].0, outputs[0].1);
        assert!(outputs.iter().all(|(a, b)| {
            ParamBounds::default().contains(a) && ParamBounds::default().contains(b)
        }));
    }

    #[test]
    fn reset_forgets_held_values() {
        let mut pol = random_policy(ParamBounds::default(), 10);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = pol.act(3, &view(0), &mut rng);
        pol.reset();
        let b = pol.act(3, &view(0), &mut rng);
        assert_ne!(a, b);
    }
}
