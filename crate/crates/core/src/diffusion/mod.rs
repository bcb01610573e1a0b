//! Forward processes, losses, training and sampling for both modalities.

mod checkpoint;
mod schedule;
mod sequence;
mod structure;
mod trainer;

pub use checkpoint::{params_equal, Checkpoint, CHECKPOINT_SCHEMA};
pub use schedule::{cosine_schedule, NoiseSchedule, ScheduleKind, BETA_MAX, BETA_MIN};
pub use sequence::{
    blosum_stationary, blosum_to_stochastic, build_transitions, one_hot_rows, posterior, q_forward, q_sample_types,
    reverse_step_types, sample_categorical, seq_loss, seq_loss_grad, softmax, transitions_from_alphas, SeqLoss,
    SquareMatrix, TransitionMatrices, DEFAULT_TEMPERATURE, LOG_EPS,
};
pub use structure::{
    q_sample, reverse_step, smooth_l1, smooth_l1_grad, standard_normal, uniform_angles, wrapped_diff,
    wrapped_smooth_l1, wrapped_smooth_l1_grad, AngleNormalizer, DEFAULT_LOSS_BETA, DEFAULT_NOISE_SCALE,
};
pub use trainer::{
    angle_tensor, mean_wrapped_abs, train, DiffusionConfig, DiffusionModel, Draw, EpochRecord, LrDecay, PocketTensors,
    TrainConfig, TrainReport, TrainingExample,
};
