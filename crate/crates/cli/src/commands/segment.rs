//! `perfquant segment`: threshold a Tmax map into a hypo-perfusion mask.

use std::path::Path;

use serde::Serialize;

use perfquant_core::metrics::{
    dice, hd95, iou, roc_and_auc, segment_hypoperfusion, select_threshold,
};
use perfquant_core::{io, Real};

use crate::config::{RunConfig, ThresholdSpec};
use crate::error::{CliError, CliResult};
use crate::provenance::{ProvenanceBuilder, MAP_SUFFIXES};

use super::{ensure_out_dir, write_json_file};

#[derive(Serialize)]
struct SegmentReport {
    mode: &'static str,
    threshold_s: f64,
    voxels: usize,
    auc: Option<f64>,
    dice: Option<f64>,
    iou: Option<f64>,
    hd95_mm: Option<f64>,
}

pub fn cmd_segment(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let maps_path = cfg.paths.require("estimate_maps")?;
    let brain_path = cfg.paths.require("brain_mask")?;
    ensure_out_dir(out)?;

    let maps = io::read_maps::<Real>(maps_path)?;
    let brain = io::read_mask(brain_path)?;
    let lesion = cfg
        .paths
        .lesion_mask
        .as_deref()
        .map(io::read_mask)
        .transpose()?;

    let (mode, threshold_s, auc) = match cfg.segment.threshold {
        ThresholdSpec::Fixed(v) => {
            let auc = lesion
                .as_ref()
                .map(|l| roc_and_auc(&maps.tmax, l, &brain).map(|(_, a)| a))
                .transpose()?;
            ("fixed", v, auc)
        }
        ThresholdSpec::Auto => {
            let l = lesion.as_ref().ok_or_else(|| {
                CliError::Config(
                    "automatic threshold selection needs paths.lesion_mask ground truth".into(),
                )
            })?;
            let (roc, auc) = roc_and_auc(&maps.tmax, l, &brain)?;
            ("auto", select_threshold(&roc)?.max(0.0), Some(auc))
        }
    };

    let mask = segment_hypoperfusion(&maps.tmax, &brain, threshold_s)?;
    io::write_mask(&mask, out.join("hypoperfusion_mask.json"))?;

    let report = SegmentReport {
        mode,
        threshold_s,
        voxels: mask.count(),
        auc,
        dice: lesion.as_ref().map(|l| dice(&mask, l)).transpose()?,
        iou: lesion.as_ref().map(|l| iou(&mask, l)).transpose()?,
        hd95_mm: lesion
            .as_ref()
            .and_then(|l| hd95(&mask, l, maps.voxel_mm).ok()),
    };
    write_json_file(&out.join("report.json"), &report)?;

    let mut prov = ProvenanceBuilder::new("segment", cfg);
    prov.input_with_raw(maps_path, &MAP_SUFFIXES)?;
    prov.input_with_raw(brain_path, &[])?;
    if let Some(p) = cfg.paths.lesion_mask.as_deref() {
        prov.input_with_raw(p, &[])?;
    }
    prov.write(out)?;

    println!(
        "segment: threshold {threshold_s} s ({mode}), {} voxels -> {}",
        report.voxels,
        out.join("hypoperfusion_mask.json").display()
    );
    Ok(())
}
