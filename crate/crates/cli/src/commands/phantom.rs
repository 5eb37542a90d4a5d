//! `perfquant phantom`: synthesize a volume with known ground truth.

use std::path::Path;

use perfquant_core::io;
use perfquant_core::phantom::{generate_truth, synthesize_dsc};
use perfquant_core::Real;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::provenance::ProvenanceBuilder;

use super::{ensure_out_dir, write_json_file};

pub fn cmd_phantom(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let pc = cfg
        .phantom
        .as_ref()
        .ok_or_else(|| CliError::Config("the phantom section is required".into()))?;
    ensure_out_dir(out)?;

    let k = cfg.kinetics.constants();
    let truth = generate_truth::<Real>(pc)?;
    let volume = synthesize_dsc(&truth, &k, &pc.header(), pc.s0, pc.snr, pc.seed)?;

    io::write_volume(&volume, out.join("volume.json"))?;
    io::write_maps(&truth.maps, out.join("truth_maps.json"))?;
    io::write_mask(&truth.brain_mask, out.join("brain_mask.json"))?;
    io::write_mask(&truth.lesion_mask, out.join("lesion_mask.json"))?;
    io::write_series(&truth.aif, out.join("aif.json"))?;
    io::write_series(&truth.vof, out.join("vof.json"))?;
    write_json_file(&out.join("class_summary.json"), &pc.classes)?;

    ProvenanceBuilder::new("phantom", cfg).write(out)?;
    println!(
        "phantom: {}x{}x{}x{} volume, {} brain voxels, {} lesion voxels -> {}",
        pc.dims[0],
        pc.dims[1],
        pc.dims[2],
        pc.dims[3],
        truth.brain_mask.count(),
        truth.lesion_mask.count(),
        out.display()
    );
    Ok(())
}
