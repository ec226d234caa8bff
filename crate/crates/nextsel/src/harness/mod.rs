//! Training loop, ranking metrics, subtask evaluation pipelines,
//! synthetic-corpus generation, and run configuration.

pub mod config;
pub mod evaluate;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod train;

pub use config::{lr_schedule, Config, TrainConfig, Variant};
pub use evaluate::{attach_knowledge, evaluate_subtask, EvalAssets, EvalOptions, KnowledgeSource};
pub use metrics::{compute_metrics, rank_candidates, Metrics, MetricsLine, Ranking};
pub use model::SelectionModel;
pub use synth::{generate_synthetic, load_pool, write_synthetic, SynthConfig, SynthOutput};
pub use train::{train, Adam, TrainReport};
