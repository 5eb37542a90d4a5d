//! Synthetic DSC volumes with exactly known ground truth.
//!
//! A phantom is a stack of axis-aligned boxes, each carrying one tissue
//! class (CBV, CBF, arterial delay, lesion flag). The generator derives the
//! per-voxel residue from the class values, convolves it with a shared
//! arterial input function and maps concentration to signal, so that running
//! the analysis pipeline backwards recovers the class table.
//!
//! The sampled AIF is rescaled to unit area before synthesis: the volume
//! formula reads CBV off the tissue-curve integral while the flow formula
//! reads CBF off the deconvolved residue peak, and the two agree with
//! CBF*MTT/60 only when the arterial curve integrates to one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{SeriesKind, TimeSeries};
use crate::tracer_kinetics::{
    compute_kav, convolve_forward, hematocrit_factor, integrate, KineticConstants,
};
use crate::volume::{Mask3D, ParameterMaps, Volume4D, VolumeHeader};

/// Bolus shape parameters. The curve is peak-normalized: its maximum equals
/// `amplitude` and is attained at `t0_s + alpha*beta`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaVariateParams {
    pub t0_s: f64,
    pub alpha: f64,
    pub beta: f64,
    pub amplitude: f64,
}

impl GammaVariateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.amplitude > 0.0 && self.t0_s >= 0.0) {
            return Err(Error::Invalid(format!("invalid gamma-variate parameters: {self:?}")));
        }
        Ok(())
    }
}

/// One tissue class of the phantom.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TissueClass {
    pub name: String,
    /// ml/100g/min
    pub cbf: f64,
    /// ml/100g
    pub cbv: f64,
    /// Arterial delay in seconds; becomes the ground-truth Tmax.
    pub delay_s: f64,
    pub lesion: bool,
    /// Half-open voxel box `[x0, x1, y0, y1, z0, z1]`; later classes
    /// override earlier ones where boxes overlap.
    #[serde(rename = "box")]
    pub bounds: [usize; 6],
}

impl TissueClass {
    pub fn mtt_s(&self) -> f64 {
        60.0 * self.cbv / self.cbf
    }
}

/// Venous curve construction: the AIF delayed by whole samples and rescaled
/// so its area is `area_ratio` times the arterial area.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VofSpec {
    pub delay_samples: usize,
    pub area_ratio: f64,
}

impl Default for VofSpec {
    fn default() -> Self {
        VofSpec {
            delay_samples: 3,
            area_ratio: 2.0,
        }
    }
}

/// Full phantom description as it appears in the config JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomConfig {
    pub dims: [usize; 4],
    pub dt_s: f64,
    pub te_s: f64,
    pub s0: f64,
    pub snr: Option<f64>,
    pub seed: u64,
    #[serde(default = "default_voxel_mm")]
    pub voxel_mm: [f64; 3],
    pub aif: GammaVariateParams,
    #[serde(default)]
    pub vof: VofSpec,
    pub classes: Vec<TissueClass>,
}

fn default_voxel_mm() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

impl PhantomConfig {
    /// The desk phantom: a 32x32x4 grid with grey-matter shell, white-matter
    /// interior and a delayed hypo-perfused core.
    pub fn default_desk() -> Self {
        PhantomConfig {
            dims: [32, 32, 4, 50],
            dt_s: 1.0,
            te_s: 0.032,
            s0: 200.0,
            snr: None,
            seed: 17,
            voxel_mm: [1.0, 1.0, 1.0],
            aif: GammaVariateParams {
                t0_s: 5.0,
                alpha: 3.0,
                beta: 1.5,
                amplitude: 1.0,
            },
            vof: VofSpec::default(),
            classes: vec![
                TissueClass {
                    name: "gm".into(),
                    cbf: 60.0,
                    cbv: 4.0,
                    delay_s: 0.0,
                    lesion: false,
                    bounds: [2, 30, 2, 30, 0, 4],
                },
                TissueClass {
                    name: "wm".into(),
                    cbf: 25.0,
                    cbv: 2.0,
                    delay_s: 0.0,
                    lesion: false,
                    bounds: [8, 24, 8, 24, 0, 4],
                },
                TissueClass {
                    name: "lesion".into(),
                    cbf: 12.0,
                    cbv: 1.2,
                    delay_s: 8.0,
                    lesion: true,
                    bounds: [12, 20, 12, 20, 1, 3],
                },
            ],
        }
    }

    pub fn header(&self) -> VolumeHeader {
        VolumeHeader {
            dims: self.dims,
            dt_s: self.dt_s,
            te_s: self.te_s,
            voxel_mm: self.voxel_mm,
        }
    }
}

/// Ground truth bundle produced by [`generate_truth`].
#[derive(Debug, Clone)]
pub struct PhantomTruth<T: Scalar> {
    pub maps: ParameterMaps<T>,
    pub lesion_mask: Mask3D,
    pub brain_mask: Mask3D,
    pub aif: TimeSeries<T>,
    pub vof: TimeSeries<T>,
}

/// Sample the gamma-variate bolus on a uniform grid:
/// `c[i] = amplitude * (tau/(alpha*beta))^alpha * exp(alpha - tau/beta)`
/// for `tau = i*dt - t0 > 0`, zero before arrival.
pub fn gamma_variate<T: Scalar>(params: &GammaVariateParams, n: usize, dt_s: f64) -> TimeSeries<T> {
    let values = (0..n)
        .map(|i| {
            let tau = i as f64 * dt_s - params.t0_s;
            if tau <= 0.0 {
                T::zero()
            } else {
                let x = tau / (params.alpha * params.beta);
                T::c(params.amplitude * x.powf(params.alpha) * (params.alpha - tau / params.beta).exp())
            }
        })
        .collect();
    TimeSeries {
        values,
        dt_s: T::c(dt_s),
        kind: SeriesKind::Concentration,
    }
}

/// Single-compartment residue `R[i] = exp(-i*dt / mtt_s)`, so `R[0] = 1`.
pub fn residue_exponential<T: Scalar>(mtt_s: f64, n: usize, dt_s: f64) -> Result<TimeSeries<T>> {
    if !(mtt_s > 0.0) {
        return Err(Error::Domain(format!("mtt must be positive, got {mtt_s}")));
    }
    let values = (0..n).map(|i| T::c((-(i as f64) * dt_s / mtt_s).exp())).collect();
    Ok(TimeSeries {
        values,
        dt_s: T::c(dt_s),
        kind: SeriesKind::Residue,
    })
}

/// Inverse of the concentration conversion: `s = s0 * exp(-te * c / x_scale)`.
pub fn concentration_to_signal<T: Scalar>(
    c: &TimeSeries<T>,
    s0: T,
    te_s: T,
    k: &KineticConstants<T>,
) -> TimeSeries<T> {
    let values = c
        .values
        .iter()
        .map(|&v| s0 * (-te_s * v / k.x_scale).exp())
        .collect();
    c.with_values(values, SeriesKind::Signal)
}

/// Paint the class boxes onto the grid and derive maps, masks and curves.
pub fn generate_truth<T: Scalar>(config: &PhantomConfig) -> Result<PhantomTruth<T>> {
    let [nx, ny, nz, nt] = config.dims;
    if nx == 0 || ny == 0 || nz == 0 || nt < 2 {
        return Err(Error::Invalid(format!("bad phantom dims {:?}", config.dims)));
    }
    if config.classes.is_empty() {
        return Err(Error::Invalid("phantom needs at least one tissue class".into()));
    }
    config.aif.validate()?;
    if !(config.vof.area_ratio > 0.0) {
        return Err(Error::Invalid("vof area_ratio must be positive".into()));
    }
    for c in &config.classes {
        if !(c.cbf > 0.0 && c.cbv > 0.0 && c.delay_s >= 0.0) {
            return Err(Error::Invalid(format!("invalid class {:?}", c.name)));
        }
        let mtt = c.mtt_s();
        let (lo, hi) = (config.dt_s, nt as f64 * config.dt_s / 2.0);
        if !(mtt >= lo && mtt <= hi) {
            return Err(Error::Invalid(format!(
                "class {:?} has mtt {mtt:.3} s outside the resolvable range [{lo}, {hi}]",
                c.name
            )));
        }
        let [x0, x1, y0, y1, z0, z1] = c.bounds;
        if x1 > nx || y1 > ny || z1 > nz || x0 >= x1 || y0 >= y1 || z0 >= z1 {
            return Err(Error::Invalid(format!(
                "class {:?} box {:?} does not fit in {:?}",
                c.name, c.bounds, config.dims
            )));
        }
    }

    let dims3 = [nx, ny, nz];
    let mut maps = ParameterMaps::zeros(dims3, config.voxel_mm);
    let mut brain = Mask3D::zeros(dims3);
    let mut lesion = Mask3D::zeros(dims3);

    // later classes override earlier ones
    for c in &config.classes {
        let [x0, x1, y0, y1, z0, z1] = c.bounds;
        for z in z0..z1 {
            for y in y0..y1 {
                for x in x0..x1 {
                    let i = brain.idx(x, y, z);
                    brain.data[i] = 1;
                    lesion.data[i] = c.lesion as u8;
                    maps.cbv[i] = T::c(c.cbv);
                    maps.cbf[i] = T::c(c.cbf);
                    maps.mtt[i] = T::c(c.mtt_s());
                    maps.tmax[i] = T::c(c.delay_s);
                }
            }
        }
    }
    if brain.count() == 0 {
        return Err(Error::Invalid("phantom brain mask is empty".into()));
    }

    // unit-area arterial curve; see module docs
    let raw_aif = gamma_variate::<T>(&config.aif, nt, config.dt_s);
    let area = integrate(&raw_aif);
    if !(area > T::zero()) {
        return Err(Error::Invalid(
            "arterial curve has nonpositive area on this grid; move t0_s or widen the window".into(),
        ));
    }
    let aif = raw_aif.with_values(
        raw_aif.values.iter().map(|&v| v / area).collect(),
        SeriesKind::Concentration,
    );

    // venous curve: delayed copy rescaled to the configured area ratio
    let d = config.vof.delay_samples;
    if d >= nt {
        return Err(Error::Invalid(format!("vof delay {d} exceeds the time axis")));
    }
    let mut vof_vals = vec![T::zero(); nt];
    for i in d..nt {
        vof_vals[i] = aif.values[i - d];
    }
    let vof_raw = aif.with_values(vof_vals, SeriesKind::Concentration);
    let varea = integrate(&vof_raw);
    if !(varea > T::zero()) {
        return Err(Error::Invalid("venous curve area vanished after the delay".into()));
    }
    let scale = T::c(config.vof.area_ratio) / varea;
    let vof = vof_raw.with_values(
        vof_raw.values.iter().map(|&v| v * scale).collect(),
        SeriesKind::Concentration,
    );

    Ok(PhantomTruth {
        maps,
        lesion_mask: lesion,
        brain_mask: brain,
        aif,
        vof,
    })
}

/// Synthesize the 4-D signal volume from the ground truth.
///
/// Per brain voxel the flow-scaled residue is
/// `r(t) = F * exp(-(t - delay)/mtt)` for `t >= delay` with
/// `F = cbf / (6000 * hematocrit_factor)`, the tissue curve is the causal
/// convolution with the arterial curve, and the signal is the exponential
/// concentration model around `s0`. Optional Gaussian noise with
/// `sigma = s0/snr` is drawn from a per-voxel counter stream so the result
/// does not depend on scheduling.
pub fn synthesize_dsc<T: Scalar>(
    truth: &PhantomTruth<T>,
    k: &KineticConstants<T>,
    header: &VolumeHeader,
    s0: f64,
    snr: Option<f64>,
    seed: u64,
) -> Result<Volume4D<T>> {
    header.validate()?;
    k.validate()?;
    if truth.maps.dims != header.spatial_dims() {
        return Err(Error::Dim(format!(
            "truth dims {:?} do not match header {:?}",
            truth.maps.dims,
            header.spatial_dims()
        )));
    }
    let nt = header.dims[3];
    if truth.aif.len() != nt {
        return Err(Error::Dim(format!(
            "arterial curve length {} does not match nt {}",
            truth.aif.len(),
            nt
        )));
    }
    if let Some(snr) = snr {
        if !(snr > 0.0) {
            return Err(Error::Domain(format!("snr must be positive, got {snr}")));
        }
    }
    if !(s0 > 0.0) {
        return Err(Error::Domain(format!("s0 must be positive, got {s0}")));
    }

    let kav = compute_kav(&truth.aif, &truth.vof)?;
    let factor = hematocrit_factor(k, kav);
    let dt = header.dt_s;
    let te = T::c(header.te_s);
    let s0_t = T::c(s0);
    let sigma = snr.map(|snr| s0 / snr);
    let n_vox = header.n_voxels();

    let curves: Vec<Vec<T>> = (0..n_vox)
        .into_par_iter()
        .map(|vi| {
            let cbf = truth.maps.cbf[vi];
            let mut signal = if truth.brain_mask.data[vi] != 0 && cbf > T::zero() {
                let flow = cbf / (T::c(6000.0) * factor);
                let mtt = (T::c(60.0) * truth.maps.cbv[vi] / cbf).as_f64();
                let delay = truth.maps.tmax[vi].as_f64();
                // per-sample decay 1 - dt/mtt instead of exp(-dt/mtt): the
                // sampled residue then sums to exactly mtt/dt, so the
                // discrete pipeline reads the true CBV back off the tissue
                // curve (the continuous decay would overshoot by ~dt/(2 mtt))
                let ratio = (1.0 - dt / mtt).max(0.0);
                let residue = TimeSeries {
                    values: (0..nt)
                        .map(|i| {
                            let t = i as f64 * dt;
                            if t >= delay {
                                flow * T::c(ratio.powf((t - delay) / dt))
                            } else {
                                T::zero()
                            }
                        })
                        .collect(),
                    dt_s: T::c(dt),
                    kind: SeriesKind::Residue,
                };
                let ct = convolve_forward(&truth.aif, &residue).expect("grids match");
                concentration_to_signal(&ct, s0_t, te, k).values
            } else {
                vec![s0_t; nt]
            };
            if let Some(sigma) = sigma {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(vi as u64);
                for v in signal.iter_mut() {
                    let n: f64 = rng.sample(StandardNormal);
                    *v = (*v + T::c(n * sigma)).max(T::zero());
                }
            }
            signal
        })
        .collect();

    // scatter voxel curves into the x-fastest / t-slowest stream
    let mut data = vec![T::zero(); header.n_samples()];
    for (vi, curve) in curves.iter().enumerate() {
        for (t, &v) in curve.iter().enumerate() {
            data[vi + t * n_vox] = v;
        }
    }
    Volume4D::new(header.clone(), data)
}
