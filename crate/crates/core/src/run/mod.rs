//! Training orchestration: configuration, the training loop, metrics,
//! logging and multi-run fan-out.

pub mod config;
pub mod fleet;
pub mod logging;
pub mod metrics;
pub mod train;

pub use config::{CalibrationConfig, ConfigError, RunConfig, Variant};
pub use fleet::{run_ablation, run_seeds, AblationOutput};
pub use logging::{
    default_out_root, episode_log_string, read_episode_log, read_summary, write_run, LogLine,
    ParsedLog,
};
pub use metrics::{
    forward_step_ratio, recount_manual_resets, visitation_counts, CurriculumRecord, EndCause,
    EpisodeRecord, EvalPoint, MetricsSummary, ResetOutcomeTag,
};
pub use train::{checkpoint_bytes, evaluate, load_checkpoint, train, RunError, TrainOutput};
