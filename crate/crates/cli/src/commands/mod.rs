//! The eight pipeline commands. Each takes the parsed configuration and an
//! output directory, works through the library, and leaves a provenance
//! record beside its outputs.

mod bench;
mod deconv;
mod evaluate;
mod phantom;
mod predict;
mod segment;
mod sweep;
mod train;

pub use bench::cmd_bench;
pub use deconv::cmd_deconv;
pub use evaluate::cmd_evaluate;
pub use phantom::cmd_phantom;
pub use predict::cmd_predict;
pub use segment::cmd_segment;
pub use sweep::cmd_sweep;
pub use train::cmd_train;

use std::fs;
use std::path::Path;

use crate::error::{CliError, CliResult};

pub(crate) fn ensure_out_dir(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| {
        CliError::Config(format!("cannot create output directory {}: {e}", out.display()))
    })
}

pub(crate) fn write_json_file<S: serde::Serialize>(path: &Path, value: &S) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("serialization failed: {e}")))?;
    fs::write(path, text + "\n")
        .map_err(|e| CliError::Core(perfquant_core::Error::io(path, e)))?;
    Ok(())
}
