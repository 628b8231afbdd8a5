//! Value-based agents: DQN, double DQN and dueling DQN over the masked
//! deployment environment.

mod dqn;
mod replay;

pub use dqn::{
    dueling_combine, epsilon_at, select_action, td_targets, train, Agent, AgentCheckpoint,
    QNetwork, TargetSync, TrainConfig, TrainOptions, TrainOutcome, Variant,
};
pub use replay::{ReplayBuffer, Transition};
