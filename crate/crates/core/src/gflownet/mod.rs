//! Preference-conditional GFlowNets trained with trajectory balance.

mod exact;
mod loss;
mod policy;
mod sample;
mod train;

pub use exact::{exact_policy_distribution, l1_distribution_gap, l1_gap, target_distribution};
pub use loss::{tb_loss, tb_loss_batch, tb_objective, BatchLoss};
pub(crate) use loss::transition_rows;
pub use policy::{ConditionalPolicyNet, PolicyCheckpoint, PolicyGrads};
pub use sample::{sample_candidates, sample_trajectories, sample_trajectory, Trajectory};
pub use train::{
    train_mogfn_pc, train_with_reward, LogReward, PcTrainer, ScalarizedReward, StepRecord, TrainConfig,
    TrainOutcome, MAX_SKIPPED_FRACTION,
};
