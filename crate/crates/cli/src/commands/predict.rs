//! `perfquant predict`: whole-volume network inference from a checkpoint.

use std::path::Path;

use perfquant_core::io;
use perfquant_core::stnet::{load_checkpoint, predict_volume};
use perfquant_core::Real;

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::provenance::ProvenanceBuilder;

use super::ensure_out_dir;

pub fn cmd_predict(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let volume_path = cfg.paths.require("volume")?;
    let brain_path = cfg.paths.require("brain_mask")?;
    let aif_path = cfg.paths.require("aif")?;
    let ckpt_path = cfg.paths.require("checkpoint")?;
    ensure_out_dir(out)?;

    let volume = io::read_volume::<Real>(volume_path)?;
    let brain = io::read_mask(brain_path)?;
    let aif = io::read_series::<Real>(aif_path)?;
    let params = load_checkpoint::<Real>(ckpt_path)?;

    let maps = predict_volume(&volume, &brain, &aif, &params, cfg.train.n_pre)?;
    io::write_maps(&maps, out.join("maps.json"))?;

    let mut prov = ProvenanceBuilder::new("predict", cfg);
    prov.input_with_raw(volume_path, &[])?;
    prov.input_with_raw(brain_path, &[])?;
    prov.input(aif_path)?;
    prov.input(ckpt_path)?;
    prov.write(out)?;

    println!(
        "predict: {} voxels -> {}",
        brain.count(),
        out.join("maps.json").display()
    );
    Ok(())
}
