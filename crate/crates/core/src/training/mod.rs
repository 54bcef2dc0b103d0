//! Alternating adversarial training, checkpoints and the retrain protocol.

mod checkpoint;
mod config;
mod metrics;
mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION, MAGIC};
pub use config::{parse_kv_lines, TrainConfig};
pub use metrics::{read_metrics, write_metrics, MetricsRecord};
pub use trainer::{multi_retrain, multi_retrain_with, train, train_with_hooks, NoHooks, TrainHooks, TrainedRun, Trainer};
