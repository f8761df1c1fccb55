use thiserror::Error;

/// Which body a barrier was evaluated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BodyRef {
    Agent(usize),
    Obstacle(usize),
}

impl std::fmt::Display for BodyRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BodyRef::Agent(id) => write!(f, "agent {id}"),
            BodyRef::Obstacle(id) => write!(f, "obstacle {id}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// A barrier function was already negative when it was evaluated.
    #[error("class-K function evaluated at negative barrier value {0}")]
    NegativeBarrier(f64),

    /// Two bodies in an agent's local view overlap deeper than the controller tolerates.
    #[error("agent {agent}: barrier against {other} is {barrier:.3e} < 0")]
    BarrierBreached {
        agent: usize,
        other: BodyRef,
        barrier: f64,
    },

    #[error("safety violation at step {step}: agent {agent} overlaps {other} (barrier {barrier:.3e})")]
    SafetyViolation {
        step: usize,
        agent: usize,
        other: BodyRef,
        barrier: f64,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
