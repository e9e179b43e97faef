//! Network assembly, loss, optimizer, training and checkpoints.

pub mod augment;
pub mod checkpoint;
pub mod config;
pub mod loss;
pub mod model;
pub mod optim;
pub mod params;
pub mod train;

pub use config::{Config, ContextKind, NetworkConfig};
pub use model::{Forward, Model};
pub use optim::{poly_lr, sgd_step, OptimizerState};
pub use params::Params;
pub use train::{evaluate, load_data, train, TraceRow, TrainOutcome};
