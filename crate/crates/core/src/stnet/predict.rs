//! Whole-volume inference: stride-1 patches over the brain mask.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::TimeSeries;
use crate::stnet::model::{forward_sample, ModelParams, SampleInput, Workspace, PATCH_T};
use crate::stnet::patches::sample_block;
use crate::tracer_kinetics::compute_mtt;
use crate::volume::{Mask3D, ParameterMaps, Volume4D};

/// Predict CBV/CBF/Tmax for every brain voxel and derive MTT. Negative raw
/// predictions are clamped to zero; voxels outside the mask stay zero.
pub fn predict_volume<T: Scalar>(
    v: &Volume4D<T>,
    brain: &Mask3D,
    aif: &TimeSeries<T>,
    params: &ModelParams<T>,
    n_pre: usize,
) -> Result<ParameterMaps<T>> {
    params.validate()?;
    if v.header.dims[3] != PATCH_T {
        return Err(Error::Dim(format!(
            "network inference needs {PATCH_T} time samples, volume has {}",
            v.header.dims[3]
        )));
    }
    if brain.dims != v.header.spatial_dims() {
        return Err(Error::Dim("brain mask does not match the volume".into()));
    }
    if aif.len() != PATCH_T {
        return Err(Error::Dim("arterial curve does not match the time axis".into()));
    }
    let aif_max = aif.values.iter().copied().fold(T::neg_infinity(), T::max);
    if !(aif_max > T::zero()) {
        return Err(Error::Domain("arterial curve must have a positive peak".into()));
    }
    let aif_norm: Vec<T> = aif.values.iter().map(|&v| v / aif_max).collect();

    let voxels = brain.set_voxels();
    let results: Vec<(usize, [T; 4])> = voxels
        .par_chunks(64)
        .flat_map_iter(|chunk| {
            let mut ws = Workspace::new();
            let mut out = Vec::with_capacity(chunk.len());
            for &(x, y, z) in chunk {
                let i = brain.idx(x, y, z);
                // voxels whose baseline cannot be formed stay zero
                let Ok((signal, baseline)) = sample_block(v, (x, y, z), n_pre) else {
                    out.push((i, [T::zero(); 4]));
                    continue;
                };
                let pred = forward_sample(
                    params,
                    &SampleInput {
                        signal: &signal,
                        baseline_norm: baseline / params.norm.signal_scale,
                        aif_norm: &aif_norm,
                    },
                    &mut ws,
                    None,
                );
                let phys = params.norm.denormalize(pred);
                let cbv = phys[0].max(T::zero());
                let cbf = phys[1].max(T::zero());
                let tmax = phys[2].max(T::zero());
                let mtt = compute_mtt(cbv, cbf).unwrap_or(T::zero());
                out.push((i, [cbv, cbf, mtt, tmax]));
            }
            out
        })
        .collect();

    let mut maps = ParameterMaps::zeros(brain.dims, v.header.voxel_mm);
    for (i, [cbv, cbf, mtt, tmax]) in results {
        maps.cbv[i] = cbv;
        maps.cbf[i] = cbf;
        maps.mtt[i] = mtt;
        maps.tmax[i] = tmax;
    }
    Ok(maps)
}
