//! `perfquant sweep`: train and evaluate once per value of one
//! hyperparameter, sharing the seed, and tabulate lesion-region accuracy.

use std::fs;
use std::path::Path;

use perfquant_core::metrics::{dice, nrmse, segment_hypoperfusion, ssim, MaskedPair};
use perfquant_core::stnet::{attach_labels, extract_patches, predict_volume, train, TrainConfig};
use perfquant_core::tracer_kinetics::compute_kav;
use perfquant_core::{io, Real};

use crate::config::{RunConfig, SweepAxis};
use crate::error::{CliError, CliResult};
use crate::provenance::{ProvenanceBuilder, MAP_SUFFIXES};

use super::ensure_out_dir;

fn apply_axis(base: &TrainConfig, axis: SweepAxis, value: f64) -> CliResult<TrainConfig> {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::Stride => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(CliError::Config(format!(
                    "stride values must be positive integers, got {value}"
                )));
            }
            cfg.stride = value as usize;
        }
        SweepAxis::Ratio => cfg.ratio = value,
        SweepAxis::WPhys => cfg.w_phys = value,
        SweepAxis::Lr => cfg.lr = value,
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("the sweep section is required".into()))?;

    let tr_volume = io::read_volume::<Real>(cfg.paths.require("train_volume")?)?;
    let tr_truth = io::read_maps::<Real>(cfg.paths.require("train_truth_maps")?)?;
    let tr_brain = io::read_mask(cfg.paths.require("train_brain_mask")?)?;
    let tr_lesion = cfg
        .paths
        .train_lesion_mask
        .as_deref()
        .map(io::read_mask)
        .transpose()?;
    let tr_aif = io::read_series::<Real>(cfg.paths.require("train_aif")?)?;
    let tr_vof = io::read_series::<Real>(cfg.paths.require("train_vof")?)?;

    let ev_volume = io::read_volume::<Real>(cfg.paths.require("volume")?)?;
    let ev_truth = io::read_maps::<Real>(cfg.paths.require("truth_maps")?)?;
    let ev_brain = io::read_mask(cfg.paths.require("brain_mask")?)?;
    let ev_lesion = io::read_mask(cfg.paths.require("lesion_mask")?)?;
    let ev_aif = io::read_series::<Real>(cfg.paths.require("aif")?)?;

    ensure_out_dir(out)?;
    let k = cfg.kinetics.constants();
    let kav = compute_kav(&tr_aif, &tr_vof)?;

    let mut csv = String::from(
        "axis,value,nrmse_cbv_lesion,nrmse_cbf_lesion,nrmse_tmax_lesion,ssim_tmax,dice_6s\n",
    );
    let axis_name = match sweep.axis {
        SweepAxis::Stride => "stride",
        SweepAxis::Ratio => "ratio",
        SweepAxis::WPhys => "w_phys",
        SweepAxis::Lr => "lr",
    };

    for &value in &sweep.values {
        let tcfg = apply_axis(&cfg.train, sweep.axis, value)?;
        let mut patches = extract_patches(
            &tr_volume,
            &tr_brain,
            tr_lesion.as_ref(),
            tcfg.stride,
            tcfg.ratio,
            tcfg.n_pre,
            tcfg.seed,
            &tr_aif,
        )?;
        attach_labels(&mut patches, &tr_truth)?;
        let (params, _) = train(&patches, &tcfg, &k, kav)?;
        let maps = predict_volume(&ev_volume, &ev_brain, &ev_aif, &params, tcfg.n_pre)?;

        let lesion_nrmse = |est: &[Real], reference: &[Real]| -> CliResult<f64> {
            let pair = MaskedPair::new(reference, est, &ev_lesion, ev_truth.voxel_mm)?;
            Ok(nrmse(&pair)?)
        };
        let n_cbv = lesion_nrmse(&maps.cbv, &ev_truth.cbv)?;
        let n_cbf = lesion_nrmse(&maps.cbf, &ev_truth.cbf)?;
        let n_tmax = lesion_nrmse(&maps.tmax, &ev_truth.tmax)?;
        let s_tmax = {
            let pair = MaskedPair::new(&ev_truth.tmax, &maps.tmax, &ev_brain, ev_truth.voxel_mm)?;
            ssim(&pair)?
        };
        let seg = segment_hypoperfusion(&maps.tmax, &ev_brain, 6.0)?;
        let d = dice(&seg, &ev_lesion)?;

        csv.push_str(&format!(
            "{axis_name},{value},{n_cbv},{n_cbf},{n_tmax},{s_tmax},{d}\n"
        ));
    }

    let csv_path = out.join("sweep.csv");
    fs::write(&csv_path, &csv).map_err(|e| CliError::Core(perfquant_core::Error::io(&csv_path, e)))?;

    let mut prov = ProvenanceBuilder::new("sweep", cfg);
    for field in [
        "train_volume",
        "train_brain_mask",
        "volume",
        "brain_mask",
        "lesion_mask",
    ] {
        prov.input_with_raw(cfg.paths.require(field)?, &[])?;
    }
    prov.input_with_raw(cfg.paths.require("train_truth_maps")?, &MAP_SUFFIXES)?;
    prov.input_with_raw(cfg.paths.require("truth_maps")?, &MAP_SUFFIXES)?;
    if let Some(p) = cfg.paths.train_lesion_mask.as_deref() {
        prov.input_with_raw(p, &[])?;
    }
    prov.input(cfg.paths.require("train_aif")?)?;
    prov.input(cfg.paths.require("train_vof")?)?;
    prov.input(cfg.paths.require("aif")?)?;
    prov.write(out)?;

    println!(
        "sweep: {} over {:?} -> {}",
        axis_name,
        sweep.values,
        csv_path.display()
    );
    Ok(())
}
