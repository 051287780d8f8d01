//! Dataset construction, minibatch training with AdamW and step decay,
//! relative-error metrics, and checkpoint files.

mod checkpoint;
pub mod container;
mod dataset;
mod metrics;
mod optim;
mod trainer;

pub use checkpoint::{
    load_checkpoint, load_dataset, save_checkpoint, save_dataset, Architecture, Checkpoint, CheckpointMeta,
    CHECKPOINT_MAGIC, DATASET_MAGIC,
};
pub use dataset::{
    build_dataset, build_datasets, common_fine_segments, sde_draw, test_seed, Dataset, Task, FBM_HORIZON,
    FINE_SEGMENTS, SDE_HORIZON, TEST_SEED_SALT,
};
pub use metrics::{mean_errors, per_sample_errors, Metrics};
pub use optim::{AdamW, StepDecay};
pub use trainer::{
    epoch_order, evaluate_model, train_model, train_model_with, Normalizer, TrainConfig, TrainedModel,
};
