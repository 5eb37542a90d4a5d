//! `perfquant evaluate`: voxel-level map metrics, segmentation scoring and
//! per-slice grayscale renders.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use perfquant_core::metrics::{
    dice, hd95, iou, nrmse, pcc, psnr, roc_and_auc, scc, segment_hypoperfusion, select_threshold,
    ssim, MaskedPair,
};
use perfquant_core::volume::{Mask3D, ParameterMaps};
use perfquant_core::{io, Real};

use crate::config::{RunConfig, ThresholdSpec};
use crate::error::{CliError, CliResult};
use crate::provenance::{ProvenanceBuilder, MAP_SUFFIXES};

use super::{ensure_out_dir, write_json_file};

#[derive(Serialize)]
pub struct MapScores {
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub pcc: Option<f64>,
    pub scc: Option<f64>,
    pub nrmse: Option<f64>,
}

#[derive(Serialize)]
pub struct SegmentationScores {
    pub auc: f64,
    pub dice: f64,
    pub iou: f64,
    pub hd95_mm: Option<f64>,
    pub threshold_s: f64,
}

#[derive(Serialize)]
pub struct EvaluationReport {
    pub maps: BTreeMap<String, MapScores>,
    pub segmentation: Option<SegmentationScores>,
}

pub fn score_maps(
    estimate: &ParameterMaps<Real>,
    truth: &ParameterMaps<Real>,
    brain: &Mask3D,
) -> CliResult<BTreeMap<String, MapScores>> {
    let mut out = BTreeMap::new();
    for ((name, est), (_, reference)) in estimate.named().iter().zip(truth.named().iter()) {
        let pair = MaskedPair::new(reference, est, brain, truth.voxel_mm)?;
        out.insert(
            name.to_string(),
            MapScores {
                psnr: psnr(&pair).ok(),
                ssim: ssim(&pair).ok(),
                pcc: pcc(&pair).ok(),
                scc: scc(&pair).ok(),
                nrmse: nrmse(&pair).ok(),
            },
        );
    }
    Ok(out)
}

pub fn score_segmentation(
    estimate_tmax: &[Real],
    lesion: &Mask3D,
    brain: &Mask3D,
    threshold: ThresholdSpec,
    voxel_mm: [f64; 3],
) -> CliResult<SegmentationScores> {
    let (roc, auc) = roc_and_auc(estimate_tmax, lesion, brain)?;
    let threshold_s = match threshold {
        ThresholdSpec::Fixed(v) => v,
        ThresholdSpec::Auto => select_threshold(&roc)?.max(0.0),
    };
    let mask = segment_hypoperfusion(estimate_tmax, brain, threshold_s)?;
    Ok(SegmentationScores {
        auc,
        dice: dice(&mask, lesion)?,
        iou: iou(&mask, lesion)?,
        hd95_mm: hd95(&mask, lesion, voxel_mm).ok(),
        threshold_s,
    })
}

/// Binary 8-bit PGM, one image per z slice, min-max scaled over the slice.
fn write_pgm_slices(
    maps: &ParameterMaps<Real>,
    tag: &str,
    out: &Path,
) -> CliResult<()> {
    let [nx, ny, nz] = maps.dims;
    for (name, data) in maps.named() {
        for z in 0..nz {
            let slice: Vec<f64> = (0..ny * nx)
                .map(|i| data[maps.idx(i % nx, i / nx, z)])
                .collect();
            let lo = slice.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            let mut bytes = format!("P5\n{nx} {ny}\n255\n").into_bytes();
            bytes.extend(slice.iter().map(|&v| {
                if span > 0.0 {
                    ((v - lo) / span * 255.0).round() as u8
                } else {
                    0u8
                }
            }));
            let path = out.join(format!("render_{tag}_{name}_z{z}.pgm"));
            fs::write(&path, bytes)
                .map_err(|e| CliError::Core(perfquant_core::Error::io(path, e)))?;
        }
    }
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let est_path = cfg.paths.require("estimate_maps")?;
    let truth_path = cfg.paths.require("truth_maps")?;
    let brain_path = cfg.paths.require("brain_mask")?;
    ensure_out_dir(out)?;

    let estimate = io::read_maps::<Real>(est_path)?;
    let truth = io::read_maps::<Real>(truth_path)?;
    let brain = io::read_mask(brain_path)?;
    let lesion = cfg
        .paths
        .lesion_mask
        .as_deref()
        .map(io::read_mask)
        .transpose()?;

    let maps = score_maps(&estimate, &truth, &brain)?;
    let segmentation = lesion
        .as_ref()
        .map(|l| {
            score_segmentation(
                &estimate.tmax,
                l,
                &brain,
                cfg.segment.threshold,
                truth.voxel_mm,
            )
        })
        .transpose()?;

    let report = EvaluationReport { maps, segmentation };
    write_json_file(&out.join("report.json"), &report)?;
    write_pgm_slices(&estimate, "est", out)?;
    write_pgm_slices(&truth, "ref", out)?;

    let mut prov = ProvenanceBuilder::new("evaluate", cfg);
    prov.input_with_raw(est_path, &MAP_SUFFIXES)?;
    prov.input_with_raw(truth_path, &MAP_SUFFIXES)?;
    prov.input_with_raw(brain_path, &[])?;
    if let Some(p) = cfg.paths.lesion_mask.as_deref() {
        prov.input_with_raw(p, &[])?;
    }
    prov.write(out)?;

    println!("evaluate: report -> {}", out.join("report.json").display());
    Ok(())
}
