pub mod ppo;
pub mod reward;

pub use ppo::{train, CurveRow, RolloutBatch, TrainConfig, TrainOutput, Trainer};
pub use reward::{discounted_return, gae, reward, RewardConfig};
