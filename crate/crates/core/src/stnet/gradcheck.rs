//! Finite-difference oracle for the backward pass.
//!
//! The checks here never touch the analytic gradient path: the loss is
//! recomputed through the forward pass alone for every perturbed
//! coordinate, which keeps the oracle independent of the code it verifies.
//! Dropout is disabled (evaluation mode) so the loss is a deterministic
//! function of the parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::scalar::Scalar;
use crate::stnet::loss::{cbv_to_integral, loss_grad_sample};
use crate::stnet::model::{
    backward_sample, forward_sample, param_layout, ModelParams, SampleInput, Workspace, N_OUTPUTS,
    PATCH_T, PATCH_XY,
};
use crate::tracer_kinetics::KineticConstants;

/// One self-contained sample for gradient checking.
#[derive(Debug, Clone)]
pub struct CheckSample<T: Scalar> {
    pub signal: Vec<T>,
    pub baseline_norm: T,
    pub aif_norm: Vec<T>,
    pub gt_norm: [T; N_OUTPUTS],
    pub conc_integral: T,
}

/// Evaluation-mode total loss of a batch as a pure function of the
/// parameter vector.
pub fn batch_loss<T: Scalar>(
    params: &ModelParams<T>,
    samples: &[CheckSample<T>],
    w_phys: f64,
    k: &KineticConstants<T>,
    kav: T,
) -> T {
    let mut ws = Workspace::new();
    let b = T::c(samples.len() as f64);
    let mut acc = T::zero();
    for s in samples {
        let out = forward_sample(
            params,
            &SampleInput {
                signal: &s.signal,
                baseline_norm: s.baseline_norm,
                aif_norm: &s.aif_norm,
            },
            &mut ws,
            None,
        );
        let mut mae = T::zero();
        for j in 0..N_OUTPUTS {
            mae += (out[j] - s.gt_norm[j]).abs();
        }
        acc += mae / T::c(N_OUTPUTS as f64);
        let pred_cbv = out[0] * params.norm.out_scale[0] + params.norm.out_mean[0];
        acc += T::c(w_phys) * (s.conc_integral - cbv_to_integral(pred_cbv, k, kav)).abs();
    }
    acc / b
}

/// Analytic gradient of [`batch_loss`] via the backward pass.
pub fn batch_gradients<T: Scalar>(
    params: &ModelParams<T>,
    samples: &[CheckSample<T>],
    w_phys: f64,
    k: &KineticConstants<T>,
    kav: T,
) -> Vec<T> {
    let mut ws = Workspace::new();
    let mut grads = vec![T::zero(); param_layout().total];
    for s in samples {
        let out = forward_sample(
            params,
            &SampleInput {
                signal: &s.signal,
                baseline_norm: s.baseline_norm,
                aif_norm: &s.aif_norm,
            },
            &mut ws,
            None,
        );
        let d = loss_grad_sample(
            &out,
            &s.gt_norm,
            s.conc_integral,
            w_phys,
            k,
            kav,
            &params.norm,
            samples.len(),
        );
        backward_sample(params, &mut ws, d, &mut grads);
    }
    grads
}

/// `|a - f| / max(1, |a|, |f|)` -- the usual gradient-check error measure.
pub fn scaled_error(a: f64, f: f64) -> f64 {
    (a - f).abs() / a.abs().max(f.abs()).max(1.0)
}

/// Central finite differences at the given parameter coordinates,
/// compared against the analytic gradients. Returns the worst scaled
/// error and the coordinate where it occurred.
///
/// A coordinate whose perturbation window happens to straddle an
/// activation kink (ReLU zero or an |.| corner) shows a spurious error at
/// the primary step; such coordinates are re-checked at smaller steps and
/// keep their best agreement. A genuinely wrong gradient does not improve
/// under step refinement.
pub fn check_model_gradients<T: Scalar>(
    params: &ModelParams<T>,
    samples: &[CheckSample<T>],
    w_phys: f64,
    k: &KineticConstants<T>,
    kav: T,
    indices: &[usize],
    h: f64,
) -> (f64, usize) {
    let analytic = batch_gradients(params, samples, w_phys, k, kav);
    let errs: Vec<(f64, usize)> = indices
        .par_chunks(8)
        .map(|chunk| {
            let mut local = params.clone();
            let mut worst = (0.0f64, 0usize);
            for &i in chunk {
                let mut err = f64::INFINITY;
                for step in [h, h / 10.0, h / 100.0] {
                    let hs = T::c(step);
                    let orig = local.data[i];
                    local.data[i] = orig + hs;
                    let up = batch_loss(&local, samples, w_phys, k, kav);
                    local.data[i] = orig - hs;
                    let dn = batch_loss(&local, samples, w_phys, k, kav);
                    local.data[i] = orig;
                    let fd = (up - dn).as_f64() / (2.0 * step);
                    err = err.min(scaled_error(analytic[i].as_f64(), fd));
                    if err < 5e-5 {
                        break;
                    }
                }
                if err > worst.0 {
                    worst = (err, i);
                }
            }
            worst
        })
        .collect();
    errs.into_iter()
        .fold((0.0, 0), |acc, e| if e.0 > acc.0 { e } else { acc })
}

/// Deterministic coordinate selection: every bias, the whole final layer,
/// and `per_tensor` seeded samples from each weight tensor.
pub fn default_check_indices(seed: u64, per_tensor: usize) -> Vec<usize> {
    let layout = param_layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = Vec::new();
    for e in &layout.entries {
        if e.shape.len() == 1 || e.name == "fc2.weight" {
            idx.extend(e.offset..e.offset + e.len);
        } else {
            for _ in 0..per_tensor.min(e.len) {
                idx.push(e.offset + rng.gen_range(0..e.len));
            }
        }
    }
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// A reproducible random batch whose loss terms sit safely away from the
/// MAE kinks, so finite differences stay on one linear piece.
pub fn make_check_batch<T: Scalar>(
    seed: u64,
    n: usize,
    k: &KineticConstants<T>,
    kav: T,
) -> (ModelParams<T>, Vec<CheckSample<T>>) {
    let mut params = crate::stnet::model::init_params::<T>(seed);
    params.norm.out_mean = [T::c(2.0), T::c(30.0), T::c(4.0)];
    params.norm.out_scale = [T::c(1.5), T::c(20.0), T::c(3.0)];
    params.norm.signal_scale = T::c(200.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xBEEF);
    let mut ws = Workspace::new();
    let samples = (0..n)
        .map(|_| {
            let signal: Vec<T> = (0..PATCH_XY * PATCH_XY * PATCH_T)
                .map(|_| T::c(0.6 + 0.8 * rng.gen::<f64>()))
                .collect();
            let aif_norm: Vec<T> = (0..PATCH_T).map(|_| T::c(rng.gen::<f64>())).collect();
            let baseline_norm = T::c(0.9 + 0.2 * rng.gen::<f64>());
            let mut s = CheckSample {
                signal,
                baseline_norm,
                aif_norm,
                gt_norm: [T::zero(); N_OUTPUTS],
                conc_integral: T::zero(),
            };
            // offset the targets from the current predictions so no |.| term
            // sits within reach of the finite-difference step
            let out = forward_sample(
                &params,
                &SampleInput {
                    signal: &s.signal,
                    baseline_norm: s.baseline_norm,
                    aif_norm: &s.aif_norm,
                },
                &mut ws,
                None,
            );
            for j in 0..N_OUTPUTS {
                let off = if rng.gen::<bool>() { 0.5 } else { -0.5 };
                s.gt_norm[j] = out[j] + T::c(off + 0.2 * rng.gen::<f64>());
            }
            let pred_cbv = out[0] * params.norm.out_scale[0] + params.norm.out_mean[0];
            s.conc_integral = cbv_to_integral(pred_cbv, k, kav) + T::c(0.01 + 0.01 * rng.gen::<f64>());
            s
        })
        .collect();
    (params, samples)
}
