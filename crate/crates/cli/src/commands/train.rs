//! `perfquant train`: patch extraction, training, checkpoint + CSV log.

use std::fs;
use std::path::Path;

use perfquant_core::io;
use perfquant_core::stnet::{attach_labels, extract_patches, save_checkpoint, train};
use perfquant_core::tracer_kinetics::compute_kav;
use perfquant_core::Real;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::provenance::{ProvenanceBuilder, MAP_SUFFIXES};

use super::ensure_out_dir;

pub fn cmd_train(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let volume_path = cfg.paths.require("volume")?;
    let brain_path = cfg.paths.require("brain_mask")?;
    let truth_path = cfg.paths.require("truth_maps")?;
    let aif_path = cfg.paths.require("aif")?;
    let vof_path = cfg.paths.require("vof")?;
    ensure_out_dir(out)?;

    let volume = io::read_volume::<Real>(volume_path)?;
    let brain = io::read_mask(brain_path)?;
    let truth = io::read_maps::<Real>(truth_path)?;
    let aif = io::read_series::<Real>(aif_path)?;
    let vof = io::read_series::<Real>(vof_path)?;
    let lesion = cfg
        .paths
        .lesion_mask
        .as_deref()
        .map(io::read_mask)
        .transpose()?;

    let k = cfg.kinetics.constants();
    let kav = compute_kav(&aif, &vof)?;

    let mut patches = extract_patches(
        &volume,
        &brain,
        lesion.as_ref(),
        cfg.train.stride,
        cfg.train.ratio,
        cfg.train.n_pre,
        cfg.train.seed,
        &aif,
    )?;
    attach_labels(&mut patches, &truth)?;

    let (params, log) = train(&patches, &cfg.train, &k, kav)?;

    let ckpt_path = out.join("checkpoint.stn1");
    save_checkpoint(&params, &ckpt_path)?;
    let log_path = out.join("training_log.csv");
    fs::write(&log_path, log.to_csv())
        .map_err(|e| CliError::Core(perfquant_core::Error::io(&log_path, e)))?;

    let mut prov = ProvenanceBuilder::new("train", cfg);
    prov.input_with_raw(volume_path, &[])?;
    prov.input_with_raw(brain_path, &[])?;
    prov.input_with_raw(truth_path, &MAP_SUFFIXES)?;
    prov.input(aif_path)?;
    prov.input(vof_path)?;
    if let Some(p) = cfg.paths.lesion_mask.as_deref() {
        prov.input_with_raw(p, &[])?;
    }
    prov.write(out)?;

    println!(
        "train: {} patches, {} epochs run, best epoch {} with validation loss {}",
        patches.len(),
        log.records.len(),
        log.best_epoch,
        log.best_val_loss
    );
    Ok(())
}
