//! Combined training loss: supervised MAE on the normalized outputs plus a
//! weighted physical-consistency term tying the predicted CBV back to the
//! measured concentration integral.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stnet::model::{NormStats, N_OUTPUTS};
use crate::tracer_kinetics::{hematocrit_factor, KineticConstants};

/// `f(cbv)` inverts the volume formula: the concentration integral a voxel
/// with that CBV must have.
#[inline]
pub fn cbv_to_integral<T: Scalar>(cbv: T, k: &KineticConstants<T>, kav: T) -> T {
    cbv / (T::c(100.0) * hematocrit_factor(k, kav))
}

/// Mean absolute gap between the measured concentration integrals and the
/// integrals implied by the predicted CBV values (physical units).
pub fn physical_loss<T: Scalar>(
    pred_cbv: &[T],
    conc_integral: &[T],
    k: &KineticConstants<T>,
    kav: T,
) -> Result<T> {
    if pred_cbv.len() != conc_integral.len() {
        return Err(Error::Dim(format!(
            "batch size mismatch: {} predictions vs {} integrals",
            pred_cbv.len(),
            conc_integral.len()
        )));
    }
    if pred_cbv.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let sum: T = pred_cbv
        .iter()
        .zip(conc_integral)
        .map(|(&cbv, &ci)| (ci - cbv_to_integral(cbv, k, kav)).abs())
        .sum();
    Ok(sum / T::c(pred_cbv.len() as f64))
}

/// Total loss: MAE between normalized predictions and normalized targets
/// (averaged over the three outputs and the batch) plus
/// `w_phys * physical_loss` computed in physical space.
#[allow(clippy::too_many_arguments)]
pub fn total_loss<T: Scalar>(
    pred_norm: &[[T; N_OUTPUTS]],
    gt_norm: &[[T; N_OUTPUTS]],
    conc_integral: &[T],
    w_phys: f64,
    k: &KineticConstants<T>,
    kav: T,
    norm: &NormStats<T>,
) -> Result<T> {
    if pred_norm.len() != gt_norm.len() || pred_norm.len() != conc_integral.len() {
        return Err(Error::Dim("batch size mismatch in total loss".into()));
    }
    if pred_norm.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let mut mae = T::zero();
    for (p, g) in pred_norm.iter().zip(gt_norm) {
        for j in 0..N_OUTPUTS {
            mae += (p[j] - g[j]).abs();
        }
    }
    mae = mae / T::c((N_OUTPUTS * pred_norm.len()) as f64);

    let pred_cbv: Vec<T> = pred_norm
        .iter()
        .map(|p| p[0] * norm.out_scale[0] + norm.out_mean[0])
        .collect();
    let phys = physical_loss(&pred_cbv, conc_integral, k, kav)?;
    Ok(mae + T::c(w_phys) * phys)
}

#[inline]
fn sign<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Gradient of [`total_loss`] with respect to one sample's normalized
/// prediction. `batch` is the batch size the means run over.
pub fn loss_grad_sample<T: Scalar>(
    pred_norm: &[T; N_OUTPUTS],
    gt_norm: &[T; N_OUTPUTS],
    conc_integral: T,
    w_phys: f64,
    k: &KineticConstants<T>,
    kav: T,
    norm: &NormStats<T>,
    batch: usize,
) -> [T; N_OUTPUTS] {
    let b = T::c(batch as f64);
    let mut d = [T::zero(); N_OUTPUTS];
    for j in 0..N_OUTPUTS {
        d[j] = sign(pred_norm[j] - gt_norm[j]) / (T::c(N_OUTPUTS as f64) * b);
    }
    // physical term only touches the cbv output
    let denom = T::c(100.0) * hematocrit_factor(k, kav);
    let pred_cbv = pred_norm[0] * norm.out_scale[0] + norm.out_mean[0];
    let gap = pred_cbv / denom - conc_integral;
    d[0] += T::c(w_phys) * sign(gap) * norm.out_scale[0] / (denom * b);
    d
}
