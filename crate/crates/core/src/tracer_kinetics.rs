//! Indicator-dilution mathematics: signal-to-concentration conversion,
//! forward convolution, and the perfusion-parameter formulas.
//!
//! These functions are the shared ground truth for the phantom generator,
//! the SVD deconvolution baseline and the network's physical loss. All are
//! pure functions on immutable inputs.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{SeriesKind, TimeSeries};

/// Physical constants of the concentration and volume formulas.
///
/// `x_scale` is the proportionality constant between the relaxation-rate
/// change and concentration; it cancels in noiseless round trips and only
/// sets how strongly signal noise propagates into concentration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticConstants<T: Scalar> {
    /// Brain density, g/ml.
    pub rho: T,
    /// Large-vessel hematocrit, dimensionless in [0, 1).
    pub h_lv: T,
    /// Small-vessel (capillary) hematocrit, dimensionless in [0, 1).
    pub h_sv: T,
    /// Concentration scale per unit relaxation-rate change.
    pub x_scale: T,
}

impl<T: Scalar> Default for KineticConstants<T> {
    fn default() -> Self {
        KineticConstants {
            rho: T::c(1.04),
            h_lv: T::c(0.45),
            h_sv: T::c(0.25),
            x_scale: T::one(),
        }
    }
}

impl<T: Scalar> KineticConstants<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > T::zero()) {
            return Err(Error::Invalid(format!("rho must be positive, got {}", self.rho)));
        }
        for (name, h) in [("h_lv", self.h_lv), ("h_sv", self.h_sv)] {
            if !(h >= T::zero() && h < T::one()) {
                return Err(Error::Invalid(format!("{name} must be in [0, 1), got {h}")));
            }
        }
        if !(self.x_scale > T::zero()) {
            return Err(Error::Invalid(format!(
                "x_scale must be positive, got {}",
                self.x_scale
            )));
        }
        Ok(())
    }
}

/// Convert a signal curve to a concentration curve:
/// `c(t) = x_scale * (-1/te_s) * ln(s(t)/s0)`.
pub fn signal_to_concentration<T: Scalar>(
    s: &TimeSeries<T>,
    s0: T,
    te_s: T,
    k: &KineticConstants<T>,
) -> Result<TimeSeries<T>> {
    if !(s0 > T::zero()) {
        return Err(Error::Domain(format!("baseline s0 must be positive, got {s0}")));
    }
    if !(te_s > T::zero()) {
        return Err(Error::Domain(format!("te_s must be positive, got {te_s}")));
    }
    let scale = k.x_scale / te_s;
    let mut values = Vec::with_capacity(s.len());
    for &v in &s.values {
        if !(v > T::zero()) {
            return Err(Error::Domain(format!(
                "signal sample {v} is not positive; concentration undefined"
            )));
        }
        values.push(-scale * (v / s0).ln());
    }
    Ok(s.with_values(values, SeriesKind::Concentration))
}

/// Arithmetic mean of the first `n_pre` samples (the pre-contrast baseline).
pub fn compute_baseline<T: Scalar>(s: &TimeSeries<T>, n_pre: usize) -> Result<T> {
    if n_pre == 0 || n_pre >= s.len() {
        return Err(Error::Invalid(format!(
            "baseline window {n_pre} must be in [1, {})",
            s.len()
        )));
    }
    let sum: T = s.values[..n_pre].iter().copied().sum();
    let mean = sum / T::c(n_pre as f64);
    if !(mean > T::zero()) {
        return Err(Error::Domain(format!("baseline must be positive, got {mean}")));
    }
    Ok(mean)
}

/// Trapezoidal quadrature over the whole series:
/// `dt * (c0/2 + c1 + ... + c_{n-2} + c_{n-1}/2)`.
pub fn integrate<T: Scalar>(c: &TimeSeries<T>) -> T {
    let n = c.len();
    let half = T::c(0.5);
    let mut acc = half * (c.values[0] + c.values[n - 1]);
    for &v in &c.values[1..n - 1] {
        acc += v;
    }
    acc * c.dt_s
}

/// Arterial-to-venous area ratio `k_AV = integral(c_a) / integral(c_v)`.
pub fn compute_kav<T: Scalar>(c_a: &TimeSeries<T>, c_v: &TimeSeries<T>) -> Result<T> {
    if c_a.dt_s != c_v.dt_s {
        return Err(Error::Dim(format!(
            "arterial and venous curves have different sampling intervals ({} vs {})",
            c_a.dt_s, c_v.dt_s
        )));
    }
    let denom = integrate(c_v);
    if !(denom > T::zero()) {
        return Err(Error::Domain(format!(
            "venous curve area must be positive, got {denom}"
        )));
    }
    Ok(integrate(c_a) / denom)
}

/// Hematocrit/density prefactor of the volume and flow formulas:
/// `kav * (1 - h_sv) / (rho * (1 - h_lv))`.
pub fn hematocrit_factor<T: Scalar>(k: &KineticConstants<T>, kav: T) -> T {
    kav * (T::one() - k.h_sv) / (k.rho * (T::one() - k.h_lv))
}

/// Cerebral blood volume in ml/100g from the tissue concentration integral.
pub fn compute_cbv<T: Scalar>(c_t: &TimeSeries<T>, k: &KineticConstants<T>, kav: T) -> T {
    T::c(100.0) * hematocrit_factor(k, kav) * integrate(c_t)
}

/// Cerebral blood flow in ml/100g/min from the flow-scaled residue peak.
pub fn compute_cbf<T: Scalar>(r: &TimeSeries<T>, k: &KineticConstants<T>, kav: T) -> Result<T> {
    let max = r
        .values
        .iter()
        .copied()
        .fold(None::<T>, |m, v| Some(m.map_or(v, |m| if v > m { v } else { m })))
        .ok_or_else(|| Error::Invalid("residue series is empty".into()))?;
    Ok(T::c(100.0 * 60.0) * hematocrit_factor(k, kav) * max)
}

/// Mean transit time in seconds, `60 * cbv / cbf`. `None` when cbf <= 0
/// (callers map that to 0 with a validity flag).
pub fn compute_mtt<T: Scalar>(cbv: T, cbf: T) -> Option<T> {
    if cbf > T::zero() {
        Some(T::c(60.0) * cbv / cbf)
    } else {
        None
    }
}

/// Time of the residue peak in seconds. Ties break to the earliest index.
pub fn compute_tmax<T: Scalar>(r: &TimeSeries<T>) -> T {
    let mut best = 0usize;
    for (i, &v) in r.values.iter().enumerate().skip(1) {
        if v > r.values[best] {
            best = i;
        }
    }
    T::c(best as f64) * r.dt_s
}

/// Causal discrete convolution with the sampling-interval scaling:
/// `c_t[i] = dt * sum_{j=0..i} c_a[j] * r[i-j]`.
pub fn convolve_forward<T: Scalar>(
    c_a: &TimeSeries<T>,
    r: &TimeSeries<T>,
) -> Result<TimeSeries<T>> {
    if c_a.len() != r.len() {
        return Err(Error::Dim(format!(
            "convolution operands have different lengths ({} vs {})",
            c_a.len(),
            r.len()
        )));
    }
    if c_a.dt_s != r.dt_s {
        return Err(Error::Dim(format!(
            "convolution operands have different sampling intervals ({} vs {})",
            c_a.dt_s, r.dt_s
        )));
    }
    let n = c_a.len();
    let mut values = vec![T::zero(); n];
    for (i, out) in values.iter_mut().enumerate() {
        let mut acc = T::zero();
        for j in 0..=i {
            acc += c_a.values[j] * r.values[i - j];
        }
        *out = acc * c_a.dt_s;
    }
    Ok(c_a.with_values(values, SeriesKind::Concentration))
}
