//! Library surface of the perfusion pipeline CLI: configuration schema,
//! the eight commands, and provenance records. The binary in `main.rs` is a
//! thin argument-parsing shell over these functions so integration tests
//! can drive the exact command implementations in process.

pub mod commands;
pub mod config;
pub mod error;
pub mod provenance;

pub use commands::{
    cmd_bench, cmd_deconv, cmd_evaluate, cmd_phantom, cmd_predict, cmd_segment, cmd_sweep,
    cmd_train,
};
pub use config::{RunConfig, SweepAxis, ThresholdSpec};
pub use error::{CliError, CliResult};
