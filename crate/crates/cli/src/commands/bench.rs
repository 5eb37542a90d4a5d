//! `perfquant bench`: wall-clock comparison of the two quantification
//! routes, normalized to 10,000 voxels. Timings are reported, never
//! asserted; they are whatever this machine does.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use perfquant_core::deconv::deconvolve_volume;
use perfquant_core::stnet::{load_checkpoint, predict_volume};
use perfquant_core::{io, Real};

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::provenance::ProvenanceBuilder;

use super::{ensure_out_dir, write_json_file};

#[derive(Serialize)]
pub struct BenchReport {
    pub voxels: usize,
    pub deconv_seconds_per_10k: f64,
    pub stnet_seconds_per_10k: f64,
    /// How many times slower deconvolution is than the network.
    pub ratio_deconv_over_stnet: f64,
    pub batch: usize,
}

pub fn cmd_bench(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let volume_path = cfg.paths.require("volume")?;
    let brain_path = cfg.paths.require("brain_mask")?;
    let aif_path = cfg.paths.require("aif")?;
    let vof_path = cfg.paths.require("vof")?;
    let ckpt_path = cfg.paths.require("checkpoint")?;
    ensure_out_dir(out)?;

    let volume = io::read_volume::<Real>(volume_path)?;
    let brain = io::read_mask(brain_path)?;
    let aif = io::read_series::<Real>(aif_path)?;
    let vof = io::read_series::<Real>(vof_path)?;
    let params = load_checkpoint::<Real>(ckpt_path)?;
    let k = cfg.kinetics.constants();
    let n = brain.count();

    let t0 = Instant::now();
    let _ = deconvolve_volume(&volume, &brain, &aif, &vof, &k, &cfg.deconv, cfg.train.n_pre)?;
    let deconv_s = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let _ = predict_volume(&volume, &brain, &aif, &params, cfg.train.n_pre)?;
    let stnet_s = t0.elapsed().as_secs_f64();

    let scale = 10_000.0 / n as f64;
    let report = BenchReport {
        voxels: n,
        deconv_seconds_per_10k: deconv_s * scale,
        stnet_seconds_per_10k: stnet_s * scale,
        ratio_deconv_over_stnet: deconv_s / stnet_s,
        batch: cfg.bench.batch,
    };
    write_json_file(&out.join("bench.json"), &report)?;

    let mut prov = ProvenanceBuilder::new("bench", cfg);
    prov.input_with_raw(volume_path, &[])?;
    prov.input_with_raw(brain_path, &[])?;
    prov.input(aif_path)?;
    prov.input(vof_path)?;
    prov.input(ckpt_path)?;
    prov.write(out)?;

    println!(
        "bench: {} voxels | deconv {:.3} s/10k | stnet {:.3} s/10k (batch {}) | ratio {:.2}",
        report.voxels,
        report.deconv_seconds_per_10k,
        report.stnet_seconds_per_10k,
        report.batch,
        report.ratio_deconv_over_stnet
    );
    Ok(())
}
