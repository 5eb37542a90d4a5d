//! Truncated-SVD deconvolution of the tissue curve with the arterial input.
//!
//! The convolution is discretized either as a lower-triangular Toeplitz
//! system (standard mode) or as a circulant system on a zero-padded grid
//! (block-circulant mode, insensitive to bolus arrival delay). The system
//! matrix depends only on the AIF, so it is factorized once per volume with
//! a one-sided Jacobi SVD and back-substituted per voxel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{SeriesKind, TimeSeries};
use crate::tracer_kinetics::{
    compute_baseline, compute_cbv, compute_kav, compute_mtt, compute_tmax, hematocrit_factor,
    signal_to_concentration, KineticConstants,
};
use crate::volume::{Mask3D, ParameterMaps, Volume4D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeconvMode {
    Standard,
    BlockCirculant,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeconvConfig {
    pub mode: DeconvMode,
    /// Singular values below `threshold_frac * sigma_max` are zeroed.
    pub threshold_frac: f64,
    /// Zero-padding multiple in block-circulant mode.
    pub pad_factor: usize,
}

impl Default for DeconvConfig {
    fn default() -> Self {
        DeconvConfig {
            mode: DeconvMode::BlockCirculant,
            threshold_frac: 0.10,
            pad_factor: 2,
        }
    }
}

impl DeconvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold_frac) {
            return Err(Error::Invalid(format!(
                "threshold_frac must be in [0, 1], got {}",
                self.threshold_frac
            )));
        }
        if self.pad_factor < 2 {
            return Err(Error::Invalid(format!(
                "pad_factor must be >= 2, got {}",
                self.pad_factor
            )));
        }
        Ok(())
    }
}

/// Discretized convolution operator, row-major `n x n`.
#[derive(Debug, Clone)]
pub struct ConvMatrix<T: Scalar> {
    pub n: usize,
    /// Length of the original (unpadded) time axis.
    pub nt: usize,
    pub mode: DeconvMode,
    pub dt_s: T,
    data: Vec<T>,
}

impl<T: Scalar> ConvMatrix<T> {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

/// Build the system matrix for the given AIF.
pub fn build_convolution_matrix<T: Scalar>(
    c_a: &TimeSeries<T>,
    mode: DeconvMode,
    pad_factor: usize,
) -> ConvMatrix<T> {
    let nt = c_a.len();
    let dt = c_a.dt_s;
    match mode {
        DeconvMode::Standard => {
            let mut data = vec![T::zero(); nt * nt];
            for i in 0..nt {
                for j in 0..=i {
                    data[i * nt + j] = dt * c_a.values[i - j];
                }
            }
            ConvMatrix {
                n: nt,
                nt,
                mode,
                dt_s: dt,
                data,
            }
        }
        DeconvMode::BlockCirculant => {
            let n = pad_factor.max(2) * nt;
            let mut padded = vec![T::zero(); n];
            padded[..nt].copy_from_slice(&c_a.values);
            let mut data = vec![T::zero(); n * n];
            for i in 0..n {
                for j in 0..n {
                    data[i * n + j] = dt * padded[(n + i - j) % n];
                }
            }
            ConvMatrix {
                n,
                nt,
                mode,
                dt_s: dt,
                data,
            }
        }
    }
}

/// Singular value decomposition of a square matrix, columns stored
/// column-major. `a = u * diag(s) * v^T`, `s` descending.
#[derive(Debug, Clone)]
pub struct SvdFactors<T: Scalar> {
    pub n: usize,
    u: Vec<T>,
    pub s: Vec<T>,
    v: Vec<T>,
}

const MAX_SWEEPS: usize = 60;

/// One-sided Jacobi SVD: rotate column pairs of a working copy until all
/// pairs are orthogonal, accumulating the rotations in `v`.
pub fn jacobi_svd<T: Scalar>(m: &ConvMatrix<T>) -> SvdFactors<T> {
    let n = m.n;
    // column-major working copy
    let mut u = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            u[j * n + i] = m.at(i, j);
        }
    }
    let mut v = vec![T::zero(); n * n];
    for j in 0..n {
        v[j * n + j] = T::one();
    }

    let eps = T::epsilon() * T::c(8.0);
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..n {
                    let up = u[p * n + i];
                    let uq = u[q * n + i];
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::c(2.0) * gamma);
                let t = if zeta >= T::zero() {
                    T::one() / (zeta + (T::one() + zeta * zeta).sqrt())
                } else {
                    -T::one() / (-zeta + (T::one() + zeta * zeta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let up = u[p * n + i];
                    let uq = u[q * n + i];
                    u[p * n + i] = c * up - s * uq;
                    u[q * n + i] = s * up + c * uq;
                }
                for i in 0..n {
                    let vp = v[p * n + i];
                    let vq = v[q * n + i];
                    v[p * n + i] = c * vp - s * vq;
                    v[q * n + i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // singular values are column norms; normalize and sort descending
    let mut s = vec![T::zero(); n];
    for j in 0..n {
        let norm = u[j * n..(j + 1) * n]
            .iter()
            .map(|&x| x * x)
            .sum::<T>()
            .sqrt();
        s[j] = norm;
        if norm > T::zero() {
            for x in &mut u[j * n..(j + 1) * n] {
                *x = *x / norm;
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());
    let mut us = vec![T::zero(); n * n];
    let mut vs = vec![T::zero(); n * n];
    let mut ss = vec![T::zero(); n];
    for (dst, &src) in order.iter().enumerate() {
        ss[dst] = s[src];
        us[dst * n..(dst + 1) * n].copy_from_slice(&u[src * n..(src + 1) * n]);
        vs[dst * n..(dst + 1) * n].copy_from_slice(&v[src * n..(src + 1) * n]);
    }
    SvdFactors {
        n,
        u: us,
        s: ss,
        v: vs,
    }
}

impl<T: Scalar> SvdFactors<T> {
    /// Minimum-norm solve with singular values below
    /// `threshold_frac * s_max` zeroed.
    pub fn solve(&self, b: &[T], threshold_frac: f64) -> Result<Vec<T>> {
        assert_eq!(b.len(), self.n);
        let smax = self.s[0];
        if !(smax > T::zero()) {
            return Err(Error::Domain("system matrix is zero (no singular values)".into()));
        }
        let cutoff = T::c(threshold_frac) * smax;
        let n = self.n;
        let mut x = vec![T::zero(); n];
        for j in 0..n {
            if self.s[j] < cutoff || self.s[j] == T::zero() {
                continue;
            }
            let uj = &self.u[j * n..(j + 1) * n];
            let coef = uj.iter().zip(b).map(|(&u, &b)| u * b).sum::<T>() / self.s[j];
            let vj = &self.v[j * n..(j + 1) * n];
            for (xi, &vij) in x.iter_mut().zip(vj) {
                *xi += coef * vij;
            }
        }
        Ok(x)
    }
}

/// Deconvolve one tissue concentration curve: `r = V * S^+ * U^T * c_t`.
/// In block-circulant mode the right-hand side is zero-padded and the
/// result truncated back to the original length.
pub fn svd_deconvolve<T: Scalar>(
    m: &ConvMatrix<T>,
    c_t: &TimeSeries<T>,
    threshold_frac: f64,
) -> Result<TimeSeries<T>> {
    if c_t.len() != m.nt {
        return Err(Error::Dim(format!(
            "tissue curve length {} does not match system length {}",
            c_t.len(),
            m.nt
        )));
    }
    let factors = jacobi_svd(m);
    let r = solve_residue(&factors, m, &c_t.values, threshold_frac)?;
    Ok(TimeSeries {
        values: r,
        dt_s: m.dt_s,
        kind: SeriesKind::Residue,
    })
}

fn solve_residue<T: Scalar>(
    factors: &SvdFactors<T>,
    m: &ConvMatrix<T>,
    c_t: &[T],
    threshold_frac: f64,
) -> Result<Vec<T>> {
    let mut rhs = vec![T::zero(); m.n];
    rhs[..m.nt].copy_from_slice(c_t);
    let mut r = factors.solve(&rhs, threshold_frac)?;
    r.truncate(m.nt);
    Ok(r)
}

/// Per-voxel failure counters emitted alongside the maps.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DeconvDiagnostics {
    pub counters: BTreeMap<String, u64>,
}

impl DeconvDiagnostics {
    fn bump(&mut self, key: &str) {
        *self.counters.entry(key.to_string()).or_insert(0) += 1;
    }
}

/// Run the full classical pipeline over a masked volume: baseline,
/// concentration, SVD residue, then CBV/CBF/MTT/Tmax per voxel.
/// Voxels outside the mask are zero; voxels whose signal cannot be
/// converted are zeroed and counted in the diagnostics.
pub fn deconvolve_volume<T: Scalar>(
    v: &Volume4D<T>,
    brain: &Mask3D,
    aif: &TimeSeries<T>,
    vof: &TimeSeries<T>,
    k: &KineticConstants<T>,
    cfg: &DeconvConfig,
    n_pre: usize,
) -> Result<(ParameterMaps<T>, DeconvDiagnostics)> {
    cfg.validate()?;
    k.validate()?;
    if brain.dims != v.header.spatial_dims() {
        return Err(Error::Dim(format!(
            "brain mask dims {:?} do not match volume {:?}",
            brain.dims,
            v.header.spatial_dims()
        )));
    }
    let nt = v.header.dims[3];
    if aif.len() != nt || vof.len() != nt {
        return Err(Error::Dim(format!(
            "arterial/venous curves ({}, {}) do not match nt {}",
            aif.len(),
            vof.len(),
            nt
        )));
    }

    let kav = compute_kav(aif, vof)?;
    let matrix = build_convolution_matrix(aif, cfg.mode, cfg.pad_factor);
    let factors = jacobi_svd(&matrix);
    if !(factors.s[0] > T::zero()) {
        return Err(Error::Domain("arterial curve is identically zero".into()));
    }
    let te = T::c(v.header.te_s);
    let voxels = brain.set_voxels();

    struct VoxelOut<T> {
        i: usize,
        cbv: T,
        cbf: T,
        mtt: T,
        tmax: T,
        flags: [bool; 3], // nonpositive signal, clamped negative, undefined mtt
    }

    let results: Vec<VoxelOut<T>> = voxels
        .par_iter()
        .map(|&(x, y, z)| {
            let i = brain.idx(x, y, z);
            let series = v.voxel_series(x, y, z);
            let zero = VoxelOut {
                i,
                cbv: T::zero(),
                cbf: T::zero(),
                mtt: T::zero(),
                tmax: T::zero(),
                flags: [true, false, false],
            };
            let baseline = match compute_baseline(&series, n_pre) {
                Ok(b) => b,
                Err(_) => return zero,
            };
            let conc = match signal_to_concentration(&series, baseline, te, k) {
                Ok(c) => c,
                Err(_) => return zero,
            };
            let mut clamped = false;
            let mut cbv = compute_cbv(&conc, k, kav);
            if cbv < T::zero() {
                cbv = T::zero();
                clamped = true;
            }
            let r = solve_residue(&factors, &matrix, &conc.values, cfg.threshold_frac)
                .expect("nonzero matrix already checked");
            let r = TimeSeries {
                values: r,
                dt_s: conc.dt_s,
                kind: SeriesKind::Residue,
            };
            let peak = r.values.iter().copied().fold(T::neg_infinity(), T::max);
            let mut cbf = T::c(6000.0) * hematocrit_factor(k, kav) * peak;
            if cbf < T::zero() {
                cbf = T::zero();
                clamped = true;
            }
            let tmax = compute_tmax(&r);
            let (mtt, undefined) = match compute_mtt(cbv, cbf) {
                Some(m) => (m, false),
                None => (T::zero(), true),
            };
            VoxelOut {
                i,
                cbv,
                cbf,
                mtt,
                tmax,
                flags: [false, clamped, undefined],
            }
        })
        .collect();

    let mut maps = ParameterMaps::zeros(brain.dims, v.header.voxel_mm);
    let mut diag = DeconvDiagnostics::default();
    diag.counters.insert("voxels_processed".into(), voxels.len() as u64);
    for r in &results {
        maps.cbv[r.i] = r.cbv;
        maps.cbf[r.i] = r.cbf;
        maps.mtt[r.i] = r.mtt;
        maps.tmax[r.i] = r.tmax;
        if r.flags[0] {
            diag.bump("voxels_zeroed_nonpositive_signal");
        }
        if r.flags[1] {
            diag.bump("voxels_clamped_negative");
        }
        if r.flags[2] {
            diag.bump("voxels_undefined_mtt");
        }
    }
    Ok((maps, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{generate_truth, synthesize_dsc, PhantomConfig};
    use crate::tracer_kinetics::convolve_forward;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn series(values: Vec<f64>, dt: f64, kind: SeriesKind) -> TimeSeries<f64> {
        TimeSeries::new(values, dt, kind).unwrap()
    }

    fn delta_aif(n: usize, dt: f64) -> TimeSeries<f64> {
        let mut v = vec![0.0; n];
        v[0] = 1.0 / dt;
        series(v, dt, SeriesKind::Concentration)
    }

    #[test]
    fn delta_aif_gives_identity_matrix() {
        let a = delta_aif(6, 0.5);
        let m = build_convolution_matrix(&a, DeconvMode::Standard, 2);
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((m.at(i, j) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn standard_matrix_is_lower_triangular() {
        let a = series(vec![0.0, 1.0, 2.0, 1.0, 0.5], 1.0, SeriesKind::Concentration);
        let m = build_convolution_matrix(&a, DeconvMode::Standard, 2);
        for i in 0..m.n {
            for j in i + 1..m.n {
                assert_eq!(m.at(i, j), 0.0);
            }
        }
    }

    #[test]
    fn matvec_matches_forward_convolution_in_both_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20;
        let dt = 1.2;
        let a = series((0..n).map(|_| rng.gen::<f64>()).collect(), dt, SeriesKind::Concentration);
        let r = series((0..n).map(|_| rng.gen::<f64>() - 0.3).collect(), dt, SeriesKind::Residue);
        let oracle = convolve_forward(&a, &r).unwrap();

        let m = build_convolution_matrix(&a, DeconvMode::Standard, 2);
        let got = m.matvec(&r.values);
        for (g, o) in got.iter().zip(&oracle.values) {
            assert!((g - o).abs() < 1e-12);
        }

        let m = build_convolution_matrix(&a, DeconvMode::BlockCirculant, 2);
        let mut padded = vec![0.0; m.n];
        padded[..n].copy_from_slice(&r.values);
        let got = m.matvec(&padded);
        for (g, o) in got.iter().take(n).zip(&oracle.values) {
            assert!((g - o).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_system_returns_input() {
        let a = delta_aif(8, 1.0);
        let m = build_convolution_matrix(&a, DeconvMode::Standard, 2);
        let ct = series(vec![0.0, 0.1, 0.5, 0.9, 0.7, 0.4, 0.2, 0.1], 1.0, SeriesKind::Concentration);
        let r = svd_deconvolve(&m, &ct, 0.0).unwrap();
        for (g, e) in r.values.iter().zip(&ct.values) {
            assert!((g - e).abs() < 1e-10);
        }
    }

    #[test]
    fn round_trip_recovers_residue_on_well_conditioned_system() {
        let n = 30;
        let dt = 1.0;
        // arterial curve with a strong leading sample keeps the Toeplitz
        // system well conditioned
        let a = series(
            (0..n).map(|i| (-(i as f64) / 3.0).exp()).collect(),
            dt,
            SeriesKind::Concentration,
        );
        let r_true = series(
            (0..n).map(|i| 0.01 * (-(i as f64) / 4.0).exp()).collect(),
            dt,
            SeriesKind::Residue,
        );
        let ct = convolve_forward(&a, &r_true).unwrap();
        for mode in [DeconvMode::Standard, DeconvMode::BlockCirculant] {
            let m = build_convolution_matrix(&a, mode, 2);
            let r = svd_deconvolve(&m, &ct, 1e-6).unwrap();
            let err: f64 = r
                .values
                .iter()
                .zip(&r_true.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let norm: f64 = r_true.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err / norm < 1e-6, "{mode:?} relative error {}", err / norm);
        }
    }

    #[test]
    fn full_threshold_keeps_only_rank_one_component() {
        // 5x5 system; oracle computes the dominant singular triple by power
        // iteration on A^T A and forms the rank-1 pseudo-inverse solution
        let a = series(vec![1.0, 0.8, 0.5, 0.2, 0.1], 1.0, SeriesKind::Concentration);
        let m = build_convolution_matrix(&a, DeconvMode::Standard, 2);
        let b = vec![0.3, 0.9, 0.4, 0.1, 0.6];

        let n = 5;
        let mut v = vec![1.0; n];
        for _ in 0..20_000 {
            // w = A^T (A v)
            let av: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| m.at(i, j) * v[j]).sum())
                .collect();
            let mut w: Vec<f64> = (0..n)
                .map(|j| (0..n).map(|i| m.at(i, j) * av[i]).sum())
                .collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            w.iter_mut().for_each(|x| *x /= norm);
            v = w;
        }
        let av: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| m.at(i, j) * v[j]).sum())
            .collect();
        let sigma = av.iter().map(|x| x * x).sum::<f64>().sqrt();
        let u: Vec<f64> = av.iter().map(|x| x / sigma).collect();
        let coef = u.iter().zip(&b).map(|(u, b)| u * b).sum::<f64>() / sigma;
        let oracle: Vec<f64> = v.iter().map(|vi| coef * vi).collect();

        let ct = series(b, 1.0, SeriesKind::Concentration);
        let r = svd_deconvolve(&m, &ct, 1.0).unwrap();
        for (g, o) in r.values.iter().zip(&oracle) {
            assert!((g - o).abs() < 1e-8, "got {g}, oracle {o}");
        }
    }

    #[test]
    fn zero_matrix_is_rejected() {
        let a = series(vec![0.0; 4], 1.0, SeriesKind::Concentration);
        let m = build_convolution_matrix(&a, DeconvMode::Standard, 2);
        let ct = series(vec![1.0; 4], 1.0, SeriesKind::Concentration);
        assert_eq!(svd_deconvolve(&m, &ct, 0.1).unwrap_err().category(), "domain");
    }

    #[test]
    fn regularization_shrinks_the_solution_norm() {
        // dropping singular components can only shrink the minimum-norm
        // solution; this holds for any system and right-hand side
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 12;
            let a = series(
                (0..n).map(|_| rng.gen::<f64>()).collect(),
                1.0,
                SeriesKind::Concentration,
            );
            let r_true: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let ct = convolve_forward(&a, &series(r_true, 1.0, SeriesKind::Residue)).unwrap();
            let m = build_convolution_matrix(&a, DeconvMode::Standard, 2);
            let mut prev = f64::INFINITY;
            for thr in [0.0, 0.01, 0.05, 0.1, 0.2, 0.5] {
                let r = svd_deconvolve(&m, &ct, thr).unwrap();
                let norm = r.values.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(norm <= prev + 1e-9, "thr {thr}: norm {norm} grew past {prev}");
                prev = norm;
            }
        }
    }

    #[test]
    fn regularization_does_not_grow_the_peak_on_physiological_systems() {
        // on the convolution systems deconvolution actually faces (smooth
        // bolus AIF, decaying residue) the flow-defining peak is also
        // bounded by its unregularized value
        let cfg = small_phantom();
        let truth = generate_truth::<f64>(&cfg).unwrap();
        for mode in [DeconvMode::Standard, DeconvMode::BlockCirculant] {
            let m = build_convolution_matrix(&truth.aif, mode, 2);
            for (mtt, delay) in [(4.0f64, 0usize), (6.0, 8)] {
                let rho = 1.0 - 1.0 / mtt;
                let r_true: Vec<f64> = (0..50)
                    .map(|i| {
                        if i >= delay {
                            0.01 * rho.powi((i - delay) as i32)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let ct =
                    convolve_forward(&truth.aif, &series(r_true, 1.0, SeriesKind::Residue)).unwrap();
                let unreg = svd_deconvolve(&m, &ct, 0.0).unwrap();
                let base = unreg.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for thr in [1e-6, 0.01, 0.05, 0.1, 0.2, 0.5] {
                    let r = svd_deconvolve(&m, &ct, thr).unwrap();
                    let peak = r.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    assert!(peak <= base + 1e-9, "{mode:?} thr {thr}: peak {peak} vs {base}");
                }
            }
        }
    }

    fn small_phantom() -> PhantomConfig {
        let mut cfg = PhantomConfig::default_desk();
        cfg.dims = [12, 12, 2, 50];
        cfg.classes[0].bounds = [1, 11, 1, 11, 0, 2];
        cfg.classes[1].bounds = [3, 9, 3, 9, 0, 2];
        cfg.classes[2].bounds = [5, 8, 5, 8, 0, 2];
        cfg
    }

    #[test]
    fn noiseless_phantom_recovery() {
        let cfg = small_phantom();
        let k = KineticConstants::<f64>::default();
        let truth = generate_truth::<f64>(&cfg).unwrap();
        let vol = synthesize_dsc(&truth, &k, &cfg.header(), cfg.s0, None, 1).unwrap();
        let dcfg = DeconvConfig {
            mode: DeconvMode::BlockCirculant,
            threshold_frac: 1e-6,
            pad_factor: 2,
        };
        let (maps, diag) =
            deconvolve_volume(&vol, &truth.brain_mask, &truth.aif, &truth.vof, &k, &dcfg, 5).unwrap();
        assert_eq!(diag.counters.get("voxels_zeroed_nonpositive_signal"), None);

        let mut ok = 0usize;
        let mut total = 0usize;
        for &(x, y, z) in &truth.brain_mask.set_voxels() {
            let i = maps.idx(x, y, z);
            total += 1;
            let cbv_ok = (maps.cbv[i] - truth.maps.cbv[i]).abs() / truth.maps.cbv[i] < 0.02;
            let cbf_ok = (maps.cbf[i] - truth.maps.cbf[i]).abs() / truth.maps.cbf[i] < 0.10;
            let tmax_ok = (maps.tmax[i] - truth.maps.tmax[i]).abs() <= cfg.dt_s + 1e-9;
            if cbv_ok && cbf_ok && tmax_ok {
                ok += 1;
            }
        }
        assert!(
            ok as f64 >= 0.99 * total as f64,
            "only {ok}/{total} voxels recovered"
        );
    }

    #[test]
    fn constant_signal_volume_gives_zero_maps() {
        let cfg = small_phantom();
        let truth = generate_truth::<f64>(&cfg).unwrap();
        let header = cfg.header();
        let vol = Volume4D::new(header.clone(), vec![200.0; header.n_samples()]).unwrap();
        let k = KineticConstants::<f64>::default();
        let (maps, _) = deconvolve_volume(
            &vol,
            &truth.brain_mask,
            &truth.aif,
            &truth.vof,
            &k,
            &DeconvConfig::default(),
            5,
        )
        .unwrap();
        assert!(maps.cbv.iter().all(|&v| v == 0.0));
        assert!(maps.cbf.iter().all(|&v| v == 0.0));
        assert!(maps.tmax.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standard_mode_overestimates_delayed_tmax() {
        let cfg = small_phantom();
        let k = KineticConstants::<f64>::default();
        let truth = generate_truth::<f64>(&cfg).unwrap();
        let vol = synthesize_dsc(&truth, &k, &cfg.header(), cfg.s0, None, 1).unwrap();
        let mut mean = [0.0f64; 2];
        for (mi, mode) in [DeconvMode::Standard, DeconvMode::BlockCirculant].iter().enumerate() {
            let dcfg = DeconvConfig {
                mode: *mode,
                threshold_frac: 0.10,
                pad_factor: 2,
            };
            let (maps, _) =
                deconvolve_volume(&vol, &truth.brain_mask, &truth.aif, &truth.vof, &k, &dcfg, 5)
                    .unwrap();
            let lesion = truth.lesion_mask.set_voxels();
            mean[mi] = lesion
                .iter()
                .map(|&(x, y, z)| maps.tmax[maps.idx(x, y, z)])
                .sum::<f64>()
                / lesion.len() as f64;
        }
        assert!(
            mean[0] >= mean[1],
            "standard-mode lesion tmax {} should not undercut block-circulant {}",
            mean[0],
            mean[1]
        );
    }

    #[test]
    fn deconvolution_is_deterministic() {
        let cfg = small_phantom();
        let k = KineticConstants::<f64>::default();
        let truth = generate_truth::<f64>(&cfg).unwrap();
        let vol = synthesize_dsc(&truth, &k, &cfg.header(), cfg.s0, Some(20.0), 5).unwrap();
        let dcfg = DeconvConfig::default();
        let (a, _) =
            deconvolve_volume(&vol, &truth.brain_mask, &truth.aif, &truth.vof, &k, &dcfg, 5).unwrap();
        let (b, _) =
            deconvolve_volume(&vol, &truth.brain_mask, &truth.aif, &truth.vof, &k, &dcfg, 5).unwrap();
        assert_eq!(a, b);
    }
}
