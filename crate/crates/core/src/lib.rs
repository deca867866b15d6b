//! Model-based reinforcement learning and inverse reinforcement learning
//! through a learned VR function `f(s) = r(s) + γ·V*(s)`.
//!
//! Any `f` induces action values `Q(s,a) = Σ P(s'|s,a) f(s')`, state values
//! `V = backup(Q)` and rewards `r = f - γV` that satisfy the Bellman
//! optimality equation by construction, so fitting `f` never requires
//! solving the MDP. [`rl`] fits `f` to observed rewards; [`irl`] fits it to
//! demonstrated actions under a Boltzmann policy.

pub mod approx;
pub mod error;
pub mod eval;
pub mod grid;
pub mod history;
pub mod ingest;
pub mod irl;
pub mod mdp;
pub mod rl;
pub mod trajectory;
pub mod vr;

pub use approx::{
    init_parameters, Activation, Approximator, Checkpoint, FeatureMatrix, InputNorm, NetworkConfig,
};
pub use error::{Error, Result};
pub use eval::{
    disagreement_rate, mean_q_error, reward_correlation, synth_operator, trajectory_nll,
    MetricsReport,
};
pub use grid::{build_grid, random_spec, sample_trajectories, GridSpec, GridWorld, SamplePolicy};
pub use history::EpochRecord;
pub use irl::{
    log_likelihood, log_likelihood_gradient, train_irl, IrlOutcome, IrlTrainConfig, RewardTruth,
};
pub use mdp::{
    backup_max, backup_softmax, boltzmann_probs, greedy_policy, softmax_weights, value_iteration,
    ActionId, Mdp, QTable, StateId, TransitionModel,
};
pub use rl::{lse_gradient, lse_objective, train_rl, ObservedRewards, RlOutcome, RlTrainConfig};
pub use trajectory::{Trajectory, TrajectorySet};
pub use vr::{q_from_f, r_from_f, solve_vr, v_from_q, BackupKind, VrSolution};
