//! Forward and backward kernels of the network layers.
//!
//! Layouts: 3-D activations are `[channel][x][y][t]` with t contiguous,
//! 1-D activations are `[channel][t]`. The 3-D convolutions use a fixed
//! (3, 3, 1) kernel, so they act per time sample; every inner loop runs
//! over the contiguous time axis. Backward kernels accumulate into their
//! gradient buffers.

use crate::scalar::Scalar;

#[inline]
pub(crate) fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

/// 3-D convolution with a (3, 3, 1) kernel and spatial padding `pad`.
/// `out_xy = in_xy + 2*pad - 2`. Weights are `[out_ch][in_ch][3][3]`.
#[allow(clippy::too_many_arguments)]
pub fn conv3d_forward<T: Scalar>(
    input: &[T],
    in_ch: usize,
    in_xy: usize,
    out: &mut [T],
    out_ch: usize,
    out_xy: usize,
    nt: usize,
    pad: usize,
    w: &[T],
    b: &[T],
) {
    debug_assert_eq!(input.len(), in_ch * in_xy * in_xy * nt);
    debug_assert_eq!(out.len(), out_ch * out_xy * out_xy * nt);
    for oc in 0..out_ch {
        let out_base = oc * out_xy * out_xy * nt;
        out[out_base..out_base + out_xy * out_xy * nt].fill(b[oc]);
        for ic in 0..in_ch {
            let in_base = ic * in_xy * in_xy * nt;
            for kx in 0..3usize {
                let ox_lo = pad.saturating_sub(kx);
                let ox_hi = (in_xy + pad - kx).min(out_xy);
                for ky in 0..3usize {
                    let wv = w[((oc * in_ch + ic) * 3 + kx) * 3 + ky];
                    let oy_lo = pad.saturating_sub(ky);
                    let oy_hi = (in_xy + pad - ky).min(out_xy);
                    for ox in ox_lo..ox_hi {
                        let ix = ox + kx - pad;
                        for oy in oy_lo..oy_hi {
                            let iy = oy + ky - pad;
                            let src = in_base + (ix * in_xy + iy) * nt;
                            let dst = out_base + (ox * out_xy + oy) * nt;
                            let (head, tail) = out.split_at_mut(dst);
                            let _ = head;
                            axpy(wv, &input[src..src + nt], &mut tail[..nt]);
                        }
                    }
                }
            }
        }
    }
}

/// Gradients of [`conv3d_forward`]. `g_in`, when given, must be zeroed by
/// the caller before the first accumulation.
#[allow(clippy::too_many_arguments)]
pub fn conv3d_backward<T: Scalar>(
    input: &[T],
    in_ch: usize,
    in_xy: usize,
    g_out: &[T],
    out_ch: usize,
    out_xy: usize,
    nt: usize,
    pad: usize,
    w: &[T],
    g_w: &mut [T],
    g_b: &mut [T],
    mut g_in: Option<&mut [T]>,
) {
    for oc in 0..out_ch {
        let out_base = oc * out_xy * out_xy * nt;
        let mut bsum = T::zero();
        for &g in &g_out[out_base..out_base + out_xy * out_xy * nt] {
            bsum += g;
        }
        g_b[oc] += bsum;
        for ic in 0..in_ch {
            let in_base = ic * in_xy * in_xy * nt;
            for kx in 0..3usize {
                let ox_lo = pad.saturating_sub(kx);
                let ox_hi = (in_xy + pad - kx).min(out_xy);
                for ky in 0..3usize {
                    let widx = ((oc * in_ch + ic) * 3 + kx) * 3 + ky;
                    let wv = w[widx];
                    let oy_lo = pad.saturating_sub(ky);
                    let oy_hi = (in_xy + pad - ky).min(out_xy);
                    let mut wgrad = T::zero();
                    for ox in ox_lo..ox_hi {
                        let ix = ox + kx - pad;
                        for oy in oy_lo..oy_hi {
                            let iy = oy + ky - pad;
                            let src = in_base + (ix * in_xy + iy) * nt;
                            let dst = out_base + (ox * out_xy + oy) * nt;
                            wgrad += dot(&g_out[dst..dst + nt], &input[src..src + nt]);
                            if let Some(gi) = g_in.as_deref_mut() {
                                axpy(wv, &g_out[dst..dst + nt], &mut gi[src..src + nt]);
                            }
                        }
                    }
                    g_w[widx] += wgrad;
                }
            }
        }
    }
}

/// 1-D convolution along time with kernel size `k` and padding `pad`,
/// length preserved (`k = 2*pad + 1`). Weights are `[out_ch][in_ch][k]`.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_forward<T: Scalar>(
    input: &[T],
    in_ch: usize,
    out: &mut [T],
    out_ch: usize,
    nt: usize,
    k: usize,
    pad: usize,
    w: &[T],
    b: &[T],
) {
    debug_assert_eq!(input.len(), in_ch * nt);
    debug_assert_eq!(out.len(), out_ch * nt);
    for oc in 0..out_ch {
        out[oc * nt..(oc + 1) * nt].fill(b[oc]);
        for ic in 0..in_ch {
            let in_row = &input[ic * nt..(ic + 1) * nt];
            for j in 0..k {
                let wv = w[(oc * in_ch + ic) * k + j];
                let shift = j as isize - pad as isize;
                let t0 = (-shift).max(0) as usize;
                let t1 = ((nt as isize - shift).min(nt as isize)).max(0) as usize;
                if t0 >= t1 {
                    continue;
                }
                let s0 = (t0 as isize + shift) as usize;
                let dst = oc * nt;
                axpy(wv, &in_row[s0..s0 + (t1 - t0)], &mut out[dst + t0..dst + t1]);
            }
        }
    }
}

/// Gradients of [`conv1d_forward`].
#[allow(clippy::too_many_arguments)]
pub fn conv1d_backward<T: Scalar>(
    input: &[T],
    in_ch: usize,
    g_out: &[T],
    out_ch: usize,
    nt: usize,
    k: usize,
    pad: usize,
    w: &[T],
    g_w: &mut [T],
    g_b: &mut [T],
    mut g_in: Option<&mut [T]>,
) {
    for oc in 0..out_ch {
        let g_row = &g_out[oc * nt..(oc + 1) * nt];
        let mut bsum = T::zero();
        for &g in g_row {
            bsum += g;
        }
        g_b[oc] += bsum;
        for ic in 0..in_ch {
            let in_row = &input[ic * nt..(ic + 1) * nt];
            for j in 0..k {
                let widx = (oc * in_ch + ic) * k + j;
                let shift = j as isize - pad as isize;
                let t0 = (-shift).max(0) as usize;
                let t1 = ((nt as isize - shift).min(nt as isize)).max(0) as usize;
                if t0 >= t1 {
                    continue;
                }
                let s0 = (t0 as isize + shift) as usize;
                g_w[widx] += dot(&g_row[t0..t1], &in_row[s0..s0 + (t1 - t0)]);
                if let Some(gi) = g_in.as_deref_mut() {
                    let base = ic * nt;
                    axpy(w[widx], &g_row[t0..t1], &mut gi[base + s0..base + s0 + (t1 - t0)]);
                }
            }
        }
    }
}

/// Fully connected layer, weights `[n_out][n_in]` row-major.
pub fn dense_forward<T: Scalar>(input: &[T], out: &mut [T], w: &[T], b: &[T]) {
    let n_in = input.len();
    for (o, out_v) in out.iter_mut().enumerate() {
        *out_v = b[o] + dot(&w[o * n_in..(o + 1) * n_in], input);
    }
}

pub fn dense_backward<T: Scalar>(
    input: &[T],
    g_out: &[T],
    w: &[T],
    g_w: &mut [T],
    g_b: &mut [T],
    g_in: Option<&mut [T]>,
) {
    let n_in = input.len();
    for (o, &g) in g_out.iter().enumerate() {
        g_b[o] += g;
        axpy(g, input, &mut g_w[o * n_in..(o + 1) * n_in]);
    }
    if let Some(gi) = g_in {
        for (o, &g) in g_out.iter().enumerate() {
            axpy(g, &w[o * n_in..(o + 1) * n_in], gi);
        }
    }
}

pub fn relu_forward<T: Scalar>(z: &[T], a: &mut [T]) {
    for (av, &zv) in a.iter_mut().zip(z) {
        *av = zv.max(T::zero());
    }
}

/// `g_z = g_a * [z > 0]`, written (not accumulated).
pub fn relu_backward<T: Scalar>(z: &[T], g_a: &[T], g_z: &mut [T]) {
    for ((gz, &za), &ga) in g_z.iter_mut().zip(z).zip(g_a) {
        *gz = if za > T::zero() { ga } else { T::zero() };
    }
}

pub const LEAKY_SLOPE: f64 = 0.01;

pub fn leaky_relu_forward<T: Scalar>(z: &[T], a: &mut [T]) {
    let slope = T::c(LEAKY_SLOPE);
    for (av, &zv) in a.iter_mut().zip(z) {
        *av = if zv > T::zero() { zv } else { slope * zv };
    }
}

pub fn leaky_relu_backward<T: Scalar>(z: &[T], g_a: &[T], g_z: &mut [T]) {
    let slope = T::c(LEAKY_SLOPE);
    for ((gz, &zv), &ga) in g_z.iter_mut().zip(z).zip(g_a) {
        *gz = if zv > T::zero() { ga } else { slope * ga };
    }
}

/// Inverted dropout: the mask holds `1/(1-p)` for kept units, 0 for dropped
/// ones, and is multiplied in both directions. Evaluation uses an all-ones
/// mask.
pub fn dropout_mask<T: Scalar>(mask: &mut [T], p: f64, rng: &mut impl rand::Rng) {
    let keep = T::c(1.0 / (1.0 - p));
    for m in mask.iter_mut() {
        *m = if rng.gen::<f64>() < p { T::zero() } else { keep };
    }
}

pub fn apply_mask<T: Scalar>(x: &[T], mask: &[T], out: &mut [T]) {
    for ((o, &xv), &mv) in out.iter_mut().zip(x).zip(mask) {
        *o = xv * mv;
    }
}
