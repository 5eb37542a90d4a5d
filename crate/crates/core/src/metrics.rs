//! Map-similarity metrics and hypo-perfusion segmentation scoring.
//!
//! Voxel-level metrics (PSNR, SSIM, PCC, SCC, NRMSE) compare an estimated
//! map against a reference inside a mask; segmentation metrics (ROC/AUC,
//! Dice, IoU, HD95) score a thresholded Tmax map against a lesion mask.
//! Everything is deterministic and independent of voxel iteration order.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::volume::Mask3D;

/// A reference/estimate map pair restricted to a mask.
#[derive(Debug, Clone, Copy)]
pub struct MaskedPair<'a, T: Scalar> {
    pub reference: &'a [T],
    pub estimate: &'a [T],
    pub mask: &'a Mask3D,
    pub voxel_mm: [f64; 3],
}

impl<'a, T: Scalar> MaskedPair<'a, T> {
    pub fn new(
        reference: &'a [T],
        estimate: &'a [T],
        mask: &'a Mask3D,
        voxel_mm: [f64; 3],
    ) -> Result<Self> {
        let n = mask.data.len();
        if reference.len() != n || estimate.len() != n {
            return Err(Error::Dim(format!(
                "map lengths ({}, {}) do not match mask {:?}",
                reference.len(),
                estimate.len(),
                mask.dims
            )));
        }
        if mask.count() == 0 {
            return Err(Error::Invalid("mask is empty".into()));
        }
        Ok(MaskedPair {
            reference,
            estimate,
            mask,
            voxel_mm,
        })
    }

    fn masked_values(&self) -> (Vec<f64>, Vec<f64>) {
        let mut r = Vec::new();
        let mut e = Vec::new();
        for (i, &m) in self.mask.data.iter().enumerate() {
            if m != 0 {
                r.push(self.reference[i].as_f64());
                e.push(self.estimate[i].as_f64());
            }
        }
        (r, e)
    }
}

/// Peak signal-to-noise ratio in dB with the peak taken as the reference
/// maximum over the mask. Identical inputs return `f64::INFINITY`.
pub fn psnr<T: Scalar>(p: &MaskedPair<T>) -> Result<f64> {
    let (r, e) = p.masked_values();
    let peak = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == 0.0 {
        return Err(Error::Domain("psnr undefined: reference peak is zero".into()));
    }
    let mse = r
        .iter()
        .zip(&e)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / r.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// How the SSIM dynamic range is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsimRange {
    /// Reference max - min over the mask (the default).
    Reference,
    /// Joint max - min over both maps; makes ssim symmetric in its arguments.
    Shared,
}

/// Mean structural similarity over 7x7 uniform windows, computed per z
/// slice. A window enters the mean when its center voxel is masked; the
/// window itself spans all in-bounds pixels of the slice. Means, variances
/// and covariance are population statistics over the window.
pub fn ssim<T: Scalar>(p: &MaskedPair<T>) -> Result<f64> {
    ssim_with_range(p, SsimRange::Reference)
}

pub fn ssim_with_range<T: Scalar>(p: &MaskedPair<T>, range: SsimRange) -> Result<f64> {
    let (rv, ev) = p.masked_values();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &rv {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if range == SsimRange::Shared {
        for &v in &ev {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let l = hi - lo;
    if l == 0.0 {
        return Err(Error::Domain("ssim undefined: dynamic range is zero".into()));
    }
    let c1 = (0.01 * l) * (0.01 * l);
    let c2 = (0.03 * l) * (0.03 * l);

    let [nx, ny, nz] = p.mask.dims;
    let half = 3isize;
    let mut acc = 0.0;
    let mut count = 0usize;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if !p.mask.get(x, y, z) {
                    continue;
                }
                let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                let mut n = 0.0;
                for dy in -half..=half {
                    let yy = y as isize + dy;
                    if yy < 0 || yy >= ny as isize {
                        continue;
                    }
                    for dx in -half..=half {
                        let xx = x as isize + dx;
                        if xx < 0 || xx >= nx as isize {
                            continue;
                        }
                        let i = p.mask.idx(xx as usize, yy as usize, z);
                        let a = p.reference[i].as_f64();
                        let b = p.estimate[i].as_f64();
                        sx += a;
                        sy += b;
                        sxx += a * a;
                        syy += b * b;
                        sxy += a * b;
                        n += 1.0;
                    }
                }
                let mx = sx / n;
                let my = sy / n;
                let vx = sxx / n - mx * mx;
                let vy = syy / n - my * my;
                let cov = sxy / n - mx * my;
                let s = ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                acc += s;
                count += 1;
            }
        }
    }
    Ok(acc / count as f64)
}

/// Pearson correlation coefficient over masked voxels.
pub fn pcc<T: Scalar>(p: &MaskedPair<T>) -> Result<f64> {
    let (r, e) = p.masked_values();
    pearson(&r, &e)
}

fn pearson(r: &[f64], e: &[f64]) -> Result<f64> {
    let n = r.len();
    if n < 2 {
        return Err(Error::Invalid("pearson needs at least 2 voxels".into()));
    }
    let nf = n as f64;
    let mr = r.iter().sum::<f64>() / nf;
    let me = e.iter().sum::<f64>() / nf;
    let (mut vr, mut ve, mut cov) = (0.0, 0.0, 0.0);
    for (a, b) in r.iter().zip(e) {
        vr += (a - mr) * (a - mr);
        ve += (b - me) * (b - me);
        cov += (a - mr) * (b - me);
    }
    if vr == 0.0 || ve == 0.0 {
        return Err(Error::Domain("pearson undefined: zero variance".into()));
    }
    Ok(cov / (vr * ve).sqrt())
}

/// Spearman rank correlation: Pearson of midranks, ties averaged.
pub fn scc<T: Scalar>(p: &MaskedPair<T>) -> Result<f64> {
    let (r, e) = p.masked_values();
    pearson(&midranks(&r), &midranks(&e))
}

fn midranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        // ranks are 1-based; tied values share the average rank
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Root mean squared error divided by the reference mean over the mask.
pub fn nrmse<T: Scalar>(p: &MaskedPair<T>) -> Result<f64> {
    let (r, e) = p.masked_values();
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    if mean == 0.0 {
        return Err(Error::Domain("nrmse undefined: reference mean is zero".into()));
    }
    let mse = r
        .iter()
        .zip(&e)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / r.len() as f64;
    Ok(mse.sqrt() / mean)
}

/// Operating points of the Tmax segmentation sweep. Thresholds ascend;
/// a voxel is predicted hypo-perfused when its value exceeds the threshold
/// strictly, so the listed cut points sit between the distinct map values
/// (the lowest one below the map minimum, plus an all-negative sentinel at
/// +infinity).
#[derive(Debug, Clone)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
}

/// Sweep segmentation thresholds over the brain voxels of a Tmax map and
/// compute the area under the ROC curve by the trapezoid rule.
pub fn roc_and_auc<T: Scalar>(
    tmax: &[T],
    lesion: &Mask3D,
    brain: &Mask3D,
) -> Result<(RocCurve, f64)> {
    if tmax.len() != brain.data.len() {
        return Err(Error::Dim("tmax map does not match brain mask".into()));
    }
    if !lesion.is_subset_of(brain) {
        return Err(Error::Invalid("lesion mask must be a subset of the brain mask".into()));
    }
    let n_pos = lesion.count();
    let n_all = brain.count();
    if n_pos == 0 || n_pos == n_all {
        return Err(Error::Invalid(
            "lesion must be nonempty and strictly smaller than the brain".into(),
        ));
    }
    let n_neg = n_all - n_pos;

    // (value, is_lesion) for every brain voxel, sorted by value
    let mut scored: Vec<(f64, bool)> = Vec::with_capacity(n_all);
    for i in 0..brain.data.len() {
        if brain.data[i] != 0 {
            scored.push((tmax[i].as_f64(), lesion.data[i] != 0));
        }
    }
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // group by distinct value; suffix counts give the ">= value" points
    let mut groups: Vec<(f64, usize, usize)> = Vec::new(); // value, pos, neg
    for &(v, is_pos) in &scored {
        match groups.last_mut() {
            Some(g) if g.0 == v => {
                if is_pos {
                    g.1 += 1;
                } else {
                    g.2 += 1;
                }
            }
            _ => groups.push((v, is_pos as usize, !is_pos as usize)),
        }
    }

    let k = groups.len();
    let mut thresholds = Vec::with_capacity(k + 1);
    thresholds.push(groups[0].0 - 1.0);
    for w in groups.windows(2) {
        thresholds.push((w[0].0 + w[1].0) / 2.0);
    }
    thresholds.push(f64::INFINITY);

    // suffix sums: point j predicts positive for values >= groups[j].0;
    // the final sentinel predicts nothing positive
    let mut tpr = Vec::with_capacity(k + 1);
    let mut fpr = Vec::with_capacity(k + 1);
    let mut pos_left = n_pos;
    let mut neg_left = n_neg;
    for g in &groups {
        tpr.push(pos_left as f64 / n_pos as f64);
        fpr.push(neg_left as f64 / n_neg as f64);
        pos_left -= g.1;
        neg_left -= g.2;
    }
    tpr.push(0.0);
    fpr.push(0.0);

    // trapezoid over (fpr, tpr) with fpr ascending
    let mut auc = 0.0;
    for i in (1..tpr.len()).rev() {
        auc += (fpr[i - 1] - fpr[i]) * (tpr[i - 1] + tpr[i]) / 2.0;
    }

    Ok((RocCurve { thresholds, tpr, fpr }, auc))
}

/// The equal-error operating point: the threshold minimizing
/// `|TPR - (1 - FPR)|`, ties broken toward the smaller threshold.
pub fn select_threshold(roc: &RocCurve) -> Result<f64> {
    if roc.thresholds.is_empty() {
        return Err(Error::Invalid("empty roc curve".into()));
    }
    let mut best = 0usize;
    let mut best_gap = f64::INFINITY;
    for i in 0..roc.thresholds.len() {
        let gap = (roc.tpr[i] - (1.0 - roc.fpr[i])).abs();
        if gap < best_gap {
            best_gap = gap;
            best = i;
        }
    }
    Ok(roc.thresholds[best])
}

/// Voxels of the brain whose Tmax strictly exceeds the threshold.
pub fn segment_hypoperfusion<T: Scalar>(
    tmax: &[T],
    brain: &Mask3D,
    threshold_s: f64,
) -> Result<Mask3D> {
    if !(threshold_s >= 0.0) {
        return Err(Error::Invalid(format!(
            "segmentation threshold must be nonnegative, got {threshold_s}"
        )));
    }
    if tmax.len() != brain.data.len() {
        return Err(Error::Dim("tmax map does not match brain mask".into()));
    }
    let data = brain
        .data
        .iter()
        .zip(tmax)
        .map(|(&m, &v)| (m != 0 && v.as_f64() > threshold_s) as u8)
        .collect();
    Mask3D::new(brain.dims, data)
}

/// Dice coefficient `2|A∩B| / (|A|+|B|)`; 1 when both masks are empty.
pub fn dice(a: &Mask3D, b: &Mask3D) -> Result<f64> {
    let (inter, na, nb, _) = overlap(a, b)?;
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// Intersection over union `|A∩B| / |A∪B|`; 1 when both masks are empty.
pub fn iou(a: &Mask3D, b: &Mask3D) -> Result<f64> {
    let (inter, _, _, union) = overlap(a, b)?;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

fn overlap(a: &Mask3D, b: &Mask3D) -> Result<(usize, usize, usize, usize)> {
    if a.dims != b.dims {
        return Err(Error::Dim(format!("mask dims {:?} vs {:?}", a.dims, b.dims)));
    }
    let mut inter = 0;
    let mut na = 0;
    let mut nb = 0;
    for (&x, &y) in a.data.iter().zip(&b.data) {
        inter += (x != 0 && y != 0) as usize;
        na += (x != 0) as usize;
        nb += (y != 0) as usize;
    }
    Ok((inter, na, nb, na + nb - inter))
}

/// 95th-percentile Hausdorff distance in millimetres: for each surface voxel
/// of one mask take the distance to the nearest voxel of the other mask
/// (Euclidean between voxel centers, anisotropic spacing), then the maximum
/// of the two directed 95th percentiles (linear-interpolated).
pub fn hd95(a: &Mask3D, b: &Mask3D, voxel_mm: [f64; 3]) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::Dim(format!("mask dims {:?} vs {:?}", a.dims, b.dims)));
    }
    if a.count() == 0 || b.count() == 0 {
        return Err(Error::Domain("hd95 undefined for an empty mask".into()));
    }
    let da = directed_distances(a, b, voxel_mm);
    let db = directed_distances(b, a, voxel_mm);
    Ok(percentile_linear(da, 0.95).max(percentile_linear(db, 0.95)))
}

/// A set voxel is on the surface when a 6-neighbor is unset or out of bounds.
pub fn surface_voxels(m: &Mask3D) -> Vec<(usize, usize, usize)> {
    let [nx, ny, nz] = m.dims;
    let mut out = Vec::new();
    for &(x, y, z) in &m.set_voxels() {
        let mut boundary = false;
        for (dx, dy, dz) in [
            (-1isize, 0isize, 0isize),
            (1, 0, 0),
            (0, -1, 0),
            (0, 1, 0),
            (0, 0, -1),
            (0, 0, 1),
        ] {
            let (xx, yy, zz) = (x as isize + dx, y as isize + dy, z as isize + dz);
            if xx < 0 || yy < 0 || zz < 0 || xx >= nx as isize || yy >= ny as isize || zz >= nz as isize
            {
                boundary = true;
                break;
            }
            if !m.get(xx as usize, yy as usize, zz as usize) {
                boundary = true;
                break;
            }
        }
        if boundary {
            out.push((x, y, z));
        }
    }
    out
}

fn directed_distances(from: &Mask3D, to: &Mask3D, voxel_mm: [f64; 3]) -> Vec<f64> {
    let targets = to.set_voxels();
    surface_voxels(from)
        .iter()
        .map(|&(x, y, z)| {
            let mut best = f64::INFINITY;
            for &(tx, ty, tz) in &targets {
                let dx = (x as f64 - tx as f64) * voxel_mm[0];
                let dy = (y as f64 - ty as f64) * voxel_mm[1];
                let dz = (z as f64 - tz as f64) * voxel_mm[2];
                let d2 = dx * dx + dy * dy + dz * dz;
                if d2 < best {
                    best = d2;
                }
            }
            best.sqrt()
        })
        .collect()
}

fn percentile_linear(mut values: Vec<f64>, p: f64) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        values[n - 1]
    } else {
        values[lo] * (1.0 - frac) + values[lo + 1] * frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_mask(dims: [usize; 3]) -> Mask3D {
        Mask3D::new(dims, vec![1u8; dims[0] * dims[1] * dims[2]]).unwrap()
    }

    const MM: [f64; 3] = [1.0, 1.0, 1.0];

    #[test]
    fn psnr_examples() {
        let mask = full_mask([4, 1, 1]);
        let r = vec![100.0, 50.0, 25.0, 10.0];
        let p = MaskedPair::new(&r, &r, &mask, MM).unwrap();
        assert_eq!(psnr(&p).unwrap(), f64::INFINITY);

        let e: Vec<f64> = r.iter().map(|v| v + 10.0).collect();
        let p = MaskedPair::new(&r, &e, &mask, MM).unwrap();
        assert!((psnr(&p).unwrap() - 20.0).abs() < 1e-12);

        let e2: Vec<f64> = r.iter().map(|v| v + 5.0).collect();
        let p2 = MaskedPair::new(&r, &e2, &mask, MM).unwrap();
        let gain = psnr(&p2).unwrap() - 20.0;
        assert!((gain - 10.0 * 4.0f64.log10()).abs() < 1e-12);

        let zeros = vec![0.0; 4];
        let p = MaskedPair::new(&zeros, &r, &mask, MM).unwrap();
        assert!(psnr(&p).is_err());
    }

    #[test]
    fn ssim_of_identical_maps_is_one() {
        let mask = full_mask([9, 9, 1]);
        let r: Vec<f64> = (0..81).map(|i| (i % 7) as f64 + 0.5).collect();
        let p = MaskedPair::new(&r, &r, &mask, MM).unwrap();
        assert!((ssim(&p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_antisymmetry_on_zero_mean_windows() {
        // a period-7 zero-sum pattern along x makes every full 7x7 window
        // zero-mean; keep interior centers so all windows are full
        let dims = [13, 13, 1];
        let mut mask = Mask3D::zeros(dims);
        for y in 3..10 {
            for x in 3..10 {
                mask.set(x, y, 0, true);
            }
        }
        let f = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 0.0];
        let r: Vec<f64> = (0..169).map(|i| f[(i % 13) % 7]).collect();
        let e: Vec<f64> = r.iter().map(|v| -v).collect();
        let p = MaskedPair::new(&r, &e, &mask, MM).unwrap();
        let s = ssim_with_range(&p, SsimRange::Shared).unwrap();
        assert!(s < -0.99, "got {s}");
    }

    #[test]
    fn ssim_matches_direct_window_oracle() {
        // fixed 9x9 pair, every voxel masked; oracle recomputes each window
        // from the definition
        let dims = [9, 9, 1];
        let mask = full_mask(dims);
        let r: Vec<f64> = (0..81).map(|i| ((i * 37) % 19) as f64 * 0.5 + 1.0).collect();
        let e: Vec<f64> = (0..81).map(|i| ((i * 53) % 23) as f64 * 0.4 + 0.7).collect();
        let p = MaskedPair::new(&r, &e, &mask, MM).unwrap();
        let got = ssim(&p).unwrap();

        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let l = hi - lo;
        let (c1, c2) = ((0.01 * l) * (0.01 * l), (0.03 * l) * (0.03 * l));
        let mut acc = 0.0;
        for cy in 0..9i64 {
            for cx in 0..9i64 {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for dy in -3..=3i64 {
                    for dx in -3..=3i64 {
                        let (x, y) = (cx + dx, cy + dy);
                        if (0..9).contains(&x) && (0..9).contains(&y) {
                            xs.push(r[(y * 9 + x) as usize]);
                            ys.push(e[(y * 9 + x) as usize]);
                        }
                    }
                }
                let n = xs.len() as f64;
                let mx = xs.iter().sum::<f64>() / n;
                let my = ys.iter().sum::<f64>() / n;
                let vx = xs.iter().map(|v| (v - mx) * (v - mx)).sum::<f64>() / n;
                let vy = ys.iter().map(|v| (v - my) * (v - my)).sum::<f64>() / n;
                let cov = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
                acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
        }
        let oracle = acc / 81.0;
        assert!((got - oracle).abs() < 1e-12, "got {got}, oracle {oracle}");
    }

    #[test]
    fn correlation_examples() {
        let mask = full_mask([4, 1, 1]);
        let r = vec![1.0, 2.0, 3.0, 4.0];
        let e: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
        let p = MaskedPair::new(&r, &e, &mask, MM).unwrap();
        assert!((pcc(&p).unwrap() - 1.0).abs() < 1e-12);
        assert!((scc(&p).unwrap() - 1.0).abs() < 1e-12);

        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let p = MaskedPair::new(&r, &neg, &mask, MM).unwrap();
        assert!((pcc(&p).unwrap() + 1.0).abs() < 1e-12);

        // midrank ties: [1,2,2,3] vs [10,20,20,31]
        let a = vec![1.0, 2.0, 2.0, 3.0];
        let b = vec![10.0, 20.0, 20.0, 31.0];
        let p = MaskedPair::new(&a, &b, &mask, MM).unwrap();
        assert!((scc(&p).unwrap() - 1.0).abs() < 1e-12);

        let flat = vec![5.0; 4];
        let p = MaskedPair::new(&flat, &r, &mask, MM).unwrap();
        assert!(pcc(&p).is_err());
    }

    #[test]
    fn nrmse_examples() {
        let mask = full_mask([4, 1, 1]);
        let r = vec![10.0, 10.0, 10.0, 10.0];
        let p = MaskedPair::new(&r, &r, &mask, MM).unwrap();
        assert_eq!(nrmse(&p).unwrap(), 0.0);
        let e: Vec<f64> = r.iter().map(|v| v + 1.0).collect();
        let p = MaskedPair::new(&r, &e, &mask, MM).unwrap();
        assert!((nrmse(&p).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn auc_perfect_separation() {
        let dims = [4, 1, 1];
        let brain = full_mask(dims);
        let lesion = Mask3D::new(dims, vec![0, 0, 1, 1]).unwrap();
        let tmax = vec![0.0, 0.0, 10.0, 10.0];
        let (roc, auc) = roc_and_auc(&tmax, &lesion, &brain).unwrap();
        assert!((auc - 1.0).abs() < 1e-12);
        // first threshold sits below the map minimum, last is the sentinel
        assert!(roc.thresholds[0] < 0.0);
        assert!(roc.thresholds.last().unwrap().is_infinite());
        // tpr/fpr nonincreasing as the threshold ascends
        for w in roc.tpr.windows(2) {
            assert!(w[1] <= w[0]);
        }
        for w in roc.fpr.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn auc_degenerate_identical_map_is_half() {
        let dims = [4, 1, 1];
        let brain = full_mask(dims);
        let lesion = Mask3D::new(dims, vec![0, 0, 0, 1]).unwrap();
        let tmax = vec![3.0; 4];
        let (_, auc) = roc_and_auc(&tmax, &lesion, &brain).unwrap();
        assert!((auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn auc_matches_pair_counting_oracle() {
        // 6 voxels, one swapped pair
        let dims = [6, 1, 1];
        let brain = full_mask(dims);
        let lesion = Mask3D::new(dims, vec![0, 0, 0, 1, 1, 1]).unwrap();
        let tmax = vec![1.0, 2.0, 7.0, 5.0, 8.0, 9.0];
        let (_, auc) = roc_and_auc(&tmax, &lesion, &brain).unwrap();
        // oracle: P(lesion > normal) + 0.5 P(equal) over all pairs
        let mut num = 0.0;
        for &l in &tmax[3..] {
            for &n in &tmax[..3] {
                if l > n {
                    num += 1.0;
                } else if l == n {
                    num += 0.5;
                }
            }
        }
        let oracle = num / 9.0;
        assert!((auc - oracle).abs() < 1e-12, "auc {auc} oracle {oracle}");
    }

    #[test]
    fn roc_rejects_degenerate_masks() {
        let dims = [4, 1, 1];
        let brain = full_mask(dims);
        let tmax = vec![1.0; 4];
        let empty = Mask3D::zeros(dims);
        assert!(roc_and_auc(&tmax, &empty, &brain).is_err());
        assert!(roc_and_auc(&tmax, &brain, &brain).is_err());
    }

    #[test]
    fn select_threshold_equal_error_point() {
        let roc = RocCurve {
            thresholds: vec![1.0, 2.0, 3.0],
            tpr: vec![1.0, 0.8, 0.1],
            fpr: vec![0.9, 0.2, 0.0],
        };
        // |tpr - (1-fpr)|: 0.9, 0.0, 0.9
        assert_eq!(select_threshold(&roc).unwrap(), 2.0);
        // ties break to the smaller threshold
        let roc = RocCurve {
            thresholds: vec![1.0, 2.0],
            tpr: vec![1.0, 0.0],
            fpr: vec![1.0, 0.0],
        };
        assert_eq!(select_threshold(&roc).unwrap(), 1.0);
    }

    #[test]
    fn selected_threshold_sits_inside_the_class_gap() {
        let dims = [6, 1, 1];
        let brain = full_mask(dims);
        let lesion = Mask3D::new(dims, vec![0, 0, 0, 0, 1, 1]).unwrap();
        let tmax = vec![0.0, 0.0, 1.0, 1.0, 8.0, 9.0];
        let (roc, _) = roc_and_auc(&tmax, &lesion, &brain).unwrap();
        let thr = select_threshold(&roc).unwrap();
        assert!(thr > 1.0 && thr < 8.0, "threshold {thr} outside (1, 8)");
        // the induced segmentation is exact
        let seg = segment_hypoperfusion(&tmax, &brain, thr).unwrap();
        assert_eq!(seg, lesion);
    }

    #[test]
    fn segmentation_examples() {
        let dims = [4, 1, 1];
        let brain = full_mask(dims);
        let tmax = vec![0.0, 2.0, 7.0, 9.0];
        let seg = segment_hypoperfusion(&tmax, &brain, 6.0).unwrap();
        assert_eq!(seg.data, vec![0, 0, 1, 1]);
        let empty = segment_hypoperfusion(&tmax, &brain, 100.0).unwrap();
        assert_eq!(empty.count(), 0);
        assert!(segment_hypoperfusion(&tmax, &brain, -1.0).is_err());
    }

    #[test]
    fn dice_iou_examples() {
        let dims = [3, 1, 1];
        let a = Mask3D::new(dims, vec![1, 1, 0]).unwrap();
        let b = Mask3D::new(dims, vec![0, 1, 1]).unwrap();
        assert!((dice(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        assert!((iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);

        let empty = Mask3D::zeros(dims);
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        assert_eq!(iou(&empty, &empty).unwrap(), 1.0);

        let c = Mask3D::new(dims, vec![1, 0, 0]).unwrap();
        let d = Mask3D::new(dims, vec![0, 0, 1]).unwrap();
        assert_eq!(dice(&c, &d).unwrap(), 0.0);
        assert_eq!(iou(&c, &d).unwrap(), 0.0);
    }

    #[test]
    fn hd95_examples() {
        let dims = [5, 1, 1];
        let mut a = Mask3D::zeros(dims);
        a.set(0, 0, 0, true);
        let mut b = Mask3D::zeros(dims);
        b.set(3, 0, 0, true);
        assert!((hd95(&a, &b, MM).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(hd95(&a, &a, MM).unwrap(), 0.0);
        let empty = Mask3D::zeros(dims);
        assert!(hd95(&a, &empty, MM).is_err());
    }

    #[test]
    fn hd95_respects_anisotropic_spacing() {
        let dims = [2, 2, 2];
        let mut a = Mask3D::zeros(dims);
        a.set(0, 0, 0, true);
        let mut b = Mask3D::zeros(dims);
        b.set(0, 0, 1, true);
        assert!((hd95(&a, &b, [1.0, 1.0, 5.0]).unwrap() - 5.0).abs() < 1e-12);
    }
}
