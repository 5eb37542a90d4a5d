//! `perfquant deconv`: classical SVD deconvolution over a masked volume.

use std::path::Path;

use perfquant_core::deconv::deconvolve_volume;
use perfquant_core::io;
use perfquant_core::Real;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::provenance::ProvenanceBuilder;

use super::{ensure_out_dir, write_json_file};

pub fn cmd_deconv(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let volume_path = cfg.paths.require("volume")?;
    let brain_path = cfg.paths.require("brain_mask")?;
    let aif_path = cfg.paths.require("aif")?;
    let vof_path = cfg.paths.require("vof")?;
    ensure_out_dir(out)?;

    let volume = io::read_volume::<Real>(volume_path)?;
    let brain = io::read_mask(brain_path)?;
    if brain.count() == 0 {
        return Err(CliError::Core(perfquant_core::Error::Invalid(
            "brain mask is empty".into(),
        )));
    }
    let aif = io::read_series::<Real>(aif_path)?;
    let vof = io::read_series::<Real>(vof_path)?;
    let k = cfg.kinetics.constants();

    let (maps, diagnostics) =
        deconvolve_volume(&volume, &brain, &aif, &vof, &k, &cfg.deconv, cfg.train.n_pre)?;

    io::write_maps(&maps, out.join("maps.json"))?;
    write_json_file(&out.join("diagnostics.json"), &diagnostics)?;

    let mut prov = ProvenanceBuilder::new("deconv", cfg);
    prov.input_with_raw(volume_path, &[])?;
    prov.input_with_raw(brain_path, &[])?;
    prov.input(aif_path)?;
    prov.input(vof_path)?;
    prov.write(out)?;

    println!(
        "deconv: {} voxels ({:?}, threshold {}) -> {}",
        brain.count(),
        cfg.deconv.mode,
        cfg.deconv.threshold_frac,
        out.join("maps.json").display()
    );
    Ok(())
}
