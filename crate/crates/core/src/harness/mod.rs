//! Training loop, configuration, checkpoints, reports, the ablation runner
//! and the gradient-check suite.

mod ablation;
mod checkpoint;
mod config;
mod gradcheck;
mod report;
mod train;

pub use ablation::{
    run_ablation, split_hash, AblationDataConfig, AblationProtocol, AblationReport, Arm, ArmRun, ArmSummary,
};
pub use checkpoint::{format_checkpoint, load_checkpoint, parse_checkpoint, save_checkpoint, CHECKPOINT_HEADER};
pub use config::TrainConfig;
pub use gradcheck::{
    default_components, gradcheck, run_gradcheck, ComponentResult, GradComponent, GradInstance, GradcheckReport, Probe,
    FD_STEP, FD_TOLERANCE, KINK_MARGIN,
};
pub use report::{history_table, metrics_table, EpochRecord, RunReport};
pub use train::{class_map, evaluate, train, train_with};
