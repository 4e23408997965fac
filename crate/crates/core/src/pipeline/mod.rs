//! Experimental harness: dataset synthesis, training, evaluation and noise sweeps.

mod csv_out;
mod dataset;
mod evaluate;
mod model;
mod sweep;
mod train;

pub use csv_out::{loss_csv, metrics_csv, write_loss_csv, write_metrics_csv};
pub use dataset::{dataset_geometry, make_dataset, make_dataset_with, DatasetPair, Provenance, DEFAULT_ELLIPSES, DEFAULT_FOV};
pub use evaluate::{evaluate, evaluate_inputs, restore, Metric, MetricsReport, Summary};
pub use model::{ModelKind, ModelSpec, Network};
pub use sweep::{noise_sweep, report_rows, SweepConfig, SweepRow};
pub use train::{split_indices, train, EpochLoss, TrainConfig, TrainOutcome, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_SPLIT};
