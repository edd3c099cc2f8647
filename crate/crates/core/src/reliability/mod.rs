//! Judging reliability: splitting pools between assessors, merging their
//! judgments, agreement, noise-document checks and pool-size sweeps.

pub mod assign;
pub mod kappa;
pub mod kendall;
pub mod merge;
pub mod noise;
pub mod sweep;

pub use assign::{assign_judging, default_assessors};
pub use kappa::{agreement_tsv, cohen_kappa, cohen_kappa_weighted, topic_agreement, KappaWeighting, TopicAgreement};
pub use kendall::{kendall_tau, rank_by_score};
pub use merge::{merge_available, merge_judgments};
pub use noise::{
    format_percent, noise_quality_check, noise_quality_check_qrels, NoiseCounts, NoiseReport,
    DEFAULT_NOISE_THRESHOLD,
};
pub use sweep::{pool_sweep, relative_increment, SizeEvaluation, SweepCell, SweepConfig, SweepReport, SweepRow};
