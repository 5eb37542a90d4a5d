//! The spatiotemporal network: a 3-D spatial encoder over 7x7x50 patches
//! feeding a two-pathway 1-D temporal network that regresses CBV, CBF and
//! Tmax per voxel.
//!
//! Architecture (fixed):
//! * spatial encoder: four (3,3,1) convolutions, channels 1-8-16-32-64,
//!   the first padded (1,1,0), the rest unpadded, ReLU after each;
//!   output 64x1x1x50 squeezed to 64x50.
//! * temporal input 66x50: the 64 spatial features plus a replicated
//!   baseline channel and the arterial curve.
//! * merge conv (66-64, k3), then two parallel pathways: global
//!   (64-32-32, k11) for long-range structure and local (64-32-32, k3)
//!   for short-range structure, ReLU throughout; concatenated to 64x50.
//! * head: two convs (64-32, 32-16, k3), flatten to 800, FC 800-128 with
//!   Leaky ReLU and dropout, FC 128-3.
//!
//! Outputs are normalized regression targets; [`NormStats`] maps them back
//! to physical units.

use std::ops::Range;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stnet::layers::*;
use crate::stnet::patches::Patch;
use crate::stnet::tensor::Tensor;

pub const PATCH_XY: usize = 7;
pub const PATCH_T: usize = 50;
pub const N_OUTPUTS: usize = 3;

const D_IN: usize = PATCH_XY * PATCH_XY * PATCH_T;
const D1: usize = 8 * 7 * 7 * PATCH_T;
const D2: usize = 16 * 5 * 5 * PATCH_T;
const D3: usize = 32 * 3 * 3 * PATCH_T;
const D4: usize = 64 * PATCH_T;
const D_XT: usize = 66 * PATCH_T;
const D_M: usize = 64 * PATCH_T;
const D_P: usize = 32 * PATCH_T;
const D_CAT: usize = 64 * PATCH_T;
const D_H1: usize = 32 * PATCH_T;
const D_H2: usize = 16 * PATCH_T;
const D_FLAT: usize = D_H2;
const D_F1: usize = 128;

// layout indices; each layer's weight is immediately followed by its bias
pub(crate) const S1W: usize = 0;
pub(crate) const S2W: usize = 2;
pub(crate) const S3W: usize = 4;
pub(crate) const S4W: usize = 6;
pub(crate) const MGW: usize = 8;
pub(crate) const G1W: usize = 10;
pub(crate) const G2W: usize = 12;
pub(crate) const L1W: usize = 14;
pub(crate) const L2W: usize = 16;
pub(crate) const H1W: usize = 18;
pub(crate) const H2W: usize = 20;
pub(crate) const F1W: usize = 22;
pub(crate) const F2W: usize = 24;

#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// Fixed enumeration of every parameter tensor, in checkpoint order.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    pub entries: Vec<ParamEntry>,
    pub total: usize,
}

impl ParamLayout {
    pub fn range(&self, idx: usize) -> Range<usize> {
        let e = &self.entries[idx];
        e.offset..e.offset + e.len
    }

    pub fn by_name(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

pub fn param_layout() -> &'static ParamLayout {
    static LAYOUT: OnceLock<ParamLayout> = OnceLock::new();
    LAYOUT.get_or_init(|| {
        let shapes: Vec<(&'static str, Vec<usize>)> = vec![
            ("spatial1.weight", vec![8, 1, 3, 3]),
            ("spatial1.bias", vec![8]),
            ("spatial2.weight", vec![16, 8, 3, 3]),
            ("spatial2.bias", vec![16]),
            ("spatial3.weight", vec![32, 16, 3, 3]),
            ("spatial3.bias", vec![32]),
            ("spatial4.weight", vec![64, 32, 3, 3]),
            ("spatial4.bias", vec![64]),
            ("merge.weight", vec![64, 66, 3]),
            ("merge.bias", vec![64]),
            ("global1.weight", vec![32, 64, 11]),
            ("global1.bias", vec![32]),
            ("global2.weight", vec![32, 32, 11]),
            ("global2.bias", vec![32]),
            ("local1.weight", vec![32, 64, 3]),
            ("local1.bias", vec![32]),
            ("local2.weight", vec![32, 32, 3]),
            ("local2.bias", vec![32]),
            ("head1.weight", vec![32, 64, 3]),
            ("head1.bias", vec![32]),
            ("head2.weight", vec![16, 32, 3]),
            ("head2.bias", vec![16]),
            ("fc1.weight", vec![D_F1, D_FLAT]),
            ("fc1.bias", vec![D_F1]),
            ("fc2.weight", vec![N_OUTPUTS, D_F1]),
            ("fc2.bias", vec![N_OUTPUTS]),
        ];
        let mut entries = Vec::with_capacity(shapes.len());
        let mut offset = 0;
        for (name, shape) in shapes {
            let len = shape.iter().product();
            entries.push(ParamEntry {
                name,
                shape,
                offset,
                len,
            });
            offset += len;
        }
        ParamLayout {
            entries,
            total: offset,
        }
    })
}

/// Output de-normalization and input scaling statistics, learned from the
/// training split and stored with the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats<T: Scalar> {
    pub out_mean: [T; N_OUTPUTS],
    pub out_scale: [T; N_OUTPUTS],
    pub signal_scale: T,
}

impl<T: Scalar> Default for NormStats<T> {
    fn default() -> Self {
        NormStats {
            out_mean: [T::zero(); N_OUTPUTS],
            out_scale: [T::one(); N_OUTPUTS],
            signal_scale: T::one(),
        }
    }
}

impl<T: Scalar> NormStats<T> {
    pub fn denormalize(&self, out: [T; N_OUTPUTS]) -> [T; N_OUTPUTS] {
        let mut phys = [T::zero(); N_OUTPUTS];
        for i in 0..N_OUTPUTS {
            phys[i] = out[i] * self.out_scale[i] + self.out_mean[i];
        }
        phys
    }

    pub fn normalize(&self, phys: [T; N_OUTPUTS]) -> [T; N_OUTPUTS] {
        let mut out = [T::zero(); N_OUTPUTS];
        for i in 0..N_OUTPUTS {
            out[i] = (phys[i] - self.out_mean[i]) / self.out_scale[i];
        }
        out
    }
}

/// All weights and biases in one flat buffer, addressed by [`param_layout`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T: Scalar> {
    pub data: Vec<T>,
    pub norm: NormStats<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn n_params(&self) -> usize {
        self.data.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != param_layout().total {
            return Err(Error::Dim(format!(
                "parameter buffer has {} values, layout expects {}",
                self.data.len(),
                param_layout().total
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("parameters contain non-finite values".into()));
        }
        Ok(())
    }

    pub(crate) fn wb(&self, wi: usize) -> (&[T], &[T]) {
        let l = param_layout();
        (&self.data[l.range(wi)], &self.data[l.range(wi + 1)])
    }
}

/// Seeded He-uniform weights (`+-sqrt(6/fan_in)`), zero biases. The
/// rectifier gain keeps activation variance level through the deep ReLU
/// stack; the tanh-calibrated `sqrt(6/(fan_in+fan_out))` bound shrinks
/// activations layer by layer and stalls early training.
pub fn init_params<T: Scalar>(seed: u64) -> ModelParams<T> {
    let layout = param_layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![T::zero(); layout.total];
    for e in &layout.entries {
        if e.shape.len() == 1 {
            continue; // bias stays zero
        }
        let fan_in = match e.shape.len() {
            4 => e.shape[1] * 9,
            3 => e.shape[1] * e.shape[2],
            _ => e.shape[1],
        };
        let bound = (6.0 / fan_in as f64).sqrt();
        for v in &mut data[e.offset..e.offset + e.len] {
            *v = T::c((rng.gen::<f64>() * 2.0 - 1.0) * bound);
        }
    }
    ModelParams {
        data,
        norm: NormStats::default(),
    }
}

/// Per-sample activation and gradient buffers, reused across samples.
pub struct Workspace<T: Scalar> {
    input: Vec<T>,
    z1: Vec<T>,
    a1: Vec<T>,
    z2: Vec<T>,
    a2: Vec<T>,
    z3: Vec<T>,
    a3: Vec<T>,
    z4: Vec<T>,
    a4: Vec<T>,
    xt: Vec<T>,
    zm: Vec<T>,
    am: Vec<T>,
    zg1: Vec<T>,
    ag1: Vec<T>,
    zg2: Vec<T>,
    ag2: Vec<T>,
    zl1: Vec<T>,
    al1: Vec<T>,
    zl2: Vec<T>,
    al2: Vec<T>,
    cat: Vec<T>,
    zh1: Vec<T>,
    ah1: Vec<T>,
    zh2: Vec<T>,
    ah2: Vec<T>,
    zf1: Vec<T>,
    af1: Vec<T>,
    ad1: Vec<T>,
    drop_mask: Vec<T>,
    // backward scratch, one buffer per produced gradient
    g_ad1: Vec<T>,
    g_zf1: Vec<T>,
    g_flat: Vec<T>,
    g_zh2: Vec<T>,
    g_ah1: Vec<T>,
    g_zh1: Vec<T>,
    g_cat: Vec<T>,
    g_zp2: Vec<T>,
    g_ap1: Vec<T>,
    g_zp1: Vec<T>,
    g_am: Vec<T>,
    g_zm: Vec<T>,
    g_xt: Vec<T>,
    g_z4: Vec<T>,
    g_a3: Vec<T>,
    g_z3: Vec<T>,
    g_a2: Vec<T>,
    g_z2: Vec<T>,
    g_a1: Vec<T>,
    g_z1: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    pub fn new() -> Self {
        let z = |n| vec![T::zero(); n];
        Workspace {
            input: z(D_IN),
            z1: z(D1),
            a1: z(D1),
            z2: z(D2),
            a2: z(D2),
            z3: z(D3),
            a3: z(D3),
            z4: z(D4),
            a4: z(D4),
            xt: z(D_XT),
            zm: z(D_M),
            am: z(D_M),
            zg1: z(D_P),
            ag1: z(D_P),
            zg2: z(D_P),
            ag2: z(D_P),
            zl1: z(D_P),
            al1: z(D_P),
            zl2: z(D_P),
            al2: z(D_P),
            cat: z(D_CAT),
            zh1: z(D_H1),
            ah1: z(D_H1),
            zh2: z(D_H2),
            ah2: z(D_H2),
            zf1: z(D_F1),
            af1: z(D_F1),
            ad1: z(D_F1),
            drop_mask: vec![T::one(); D_F1],
            g_ad1: z(D_F1),
            g_zf1: z(D_F1),
            g_flat: z(D_FLAT),
            g_zh2: z(D_H2),
            g_ah1: z(D_H1),
            g_zh1: z(D_H1),
            g_cat: z(D_CAT),
            g_zp2: z(D_P),
            g_ap1: z(D_P),
            g_zp1: z(D_P),
            g_am: z(D_M),
            g_zm: z(D_M),
            g_xt: z(D_XT),
            g_z4: z(D4),
            g_a3: z(D3),
            g_z3: z(D3),
            g_a2: z(D2),
            g_z2: z(D2),
            g_a1: z(D1),
            g_z1: z(D1),
        }
    }
}

impl<T: Scalar> Default for Workspace<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// One sample's model inputs, already normalized.
pub struct SampleInput<'a, T: Scalar> {
    /// 7x7x50 signal block divided by the center baseline, `[x][y][t]`.
    pub signal: &'a [T],
    /// Center baseline divided by the training signal scale.
    pub baseline_norm: T,
    /// Arterial curve divided by its maximum, length 50.
    pub aif_norm: &'a [T],
}

fn spatial_stack<T: Scalar>(params: &ModelParams<T>, ws: &mut Workspace<T>) {
    let (w, b) = params.wb(S1W);
    conv3d_forward(&ws.input, 1, 7, &mut ws.z1, 8, 7, PATCH_T, 1, w, b);
    relu_forward(&ws.z1, &mut ws.a1);
    let (w, b) = params.wb(S2W);
    conv3d_forward(&ws.a1, 8, 7, &mut ws.z2, 16, 5, PATCH_T, 0, w, b);
    relu_forward(&ws.z2, &mut ws.a2);
    let (w, b) = params.wb(S3W);
    conv3d_forward(&ws.a2, 16, 5, &mut ws.z3, 32, 3, PATCH_T, 0, w, b);
    relu_forward(&ws.z3, &mut ws.a3);
    let (w, b) = params.wb(S4W);
    conv3d_forward(&ws.a3, 32, 3, &mut ws.z4, 64, 1, PATCH_T, 0, w, b);
    relu_forward(&ws.z4, &mut ws.a4);
}

fn temporal_stack<T: Scalar>(
    params: &ModelParams<T>,
    ws: &mut Workspace<T>,
    dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> [T; N_OUTPUTS] {
    let (w, b) = params.wb(MGW);
    conv1d_forward(&ws.xt, 66, &mut ws.zm, 64, PATCH_T, 3, 1, w, b);
    relu_forward(&ws.zm, &mut ws.am);

    let (w, b) = params.wb(G1W);
    conv1d_forward(&ws.am, 64, &mut ws.zg1, 32, PATCH_T, 11, 5, w, b);
    relu_forward(&ws.zg1, &mut ws.ag1);
    let (w, b) = params.wb(G2W);
    conv1d_forward(&ws.ag1, 32, &mut ws.zg2, 32, PATCH_T, 11, 5, w, b);
    relu_forward(&ws.zg2, &mut ws.ag2);

    let (w, b) = params.wb(L1W);
    conv1d_forward(&ws.am, 64, &mut ws.zl1, 32, PATCH_T, 3, 1, w, b);
    relu_forward(&ws.zl1, &mut ws.al1);
    let (w, b) = params.wb(L2W);
    conv1d_forward(&ws.al1, 32, &mut ws.zl2, 32, PATCH_T, 3, 1, w, b);
    relu_forward(&ws.zl2, &mut ws.al2);

    ws.cat[..D_P].copy_from_slice(&ws.ag2);
    ws.cat[D_P..].copy_from_slice(&ws.al2);

    let (w, b) = params.wb(H1W);
    conv1d_forward(&ws.cat, 64, &mut ws.zh1, 32, PATCH_T, 3, 1, w, b);
    relu_forward(&ws.zh1, &mut ws.ah1);
    let (w, b) = params.wb(H2W);
    conv1d_forward(&ws.ah1, 32, &mut ws.zh2, 16, PATCH_T, 3, 1, w, b);
    relu_forward(&ws.zh2, &mut ws.ah2);

    let (w, b) = params.wb(F1W);
    dense_forward(&ws.ah2, &mut ws.zf1, w, b);
    leaky_relu_forward(&ws.zf1, &mut ws.af1);

    match dropout {
        Some((p, rng)) if p > 0.0 => dropout_mask(&mut ws.drop_mask, p, rng),
        _ => ws.drop_mask.fill(T::one()),
    }
    apply_mask(&ws.af1, &ws.drop_mask, &mut ws.ad1);

    let (w, b) = params.wb(F2W);
    let mut out = [T::zero(); N_OUTPUTS];
    dense_forward(&ws.ad1, &mut out, w, b);
    out
}

/// Forward pass for one sample; returns the normalized output triple.
/// `dropout` carries the rate and a per-sample generator during training.
pub fn forward_sample<T: Scalar>(
    params: &ModelParams<T>,
    input: &SampleInput<T>,
    ws: &mut Workspace<T>,
    dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> [T; N_OUTPUTS] {
    ws.input.copy_from_slice(input.signal);
    spatial_stack(params, ws);
    ws.xt[..D4].copy_from_slice(&ws.a4);
    ws.xt[D4..D4 + PATCH_T].fill(input.baseline_norm);
    ws.xt[D4 + PATCH_T..].copy_from_slice(input.aif_norm);
    temporal_stack(params, ws, dropout)
}

fn grads_wb<T: Scalar>(grads: &mut [T], wi: usize) -> (&mut [T], &mut [T]) {
    let l = param_layout();
    let w = &l.entries[wi];
    let b = &l.entries[wi + 1];
    debug_assert_eq!(w.offset + w.len, b.offset);
    grads[w.offset..b.offset + b.len].split_at_mut(w.len)
}

/// Reverse pass for the sample currently held in `ws`; accumulates exact
/// parameter gradients (flat, layout order) into `grads`.
pub fn backward_sample<T: Scalar>(
    params: &ModelParams<T>,
    ws: &mut Workspace<T>,
    d_out: [T; N_OUTPUTS],
    grads: &mut [T],
) {
    // fc2
    ws.g_ad1.fill(T::zero());
    {
        let (w, _) = params.wb(F2W);
        let (gw, gb) = grads_wb(grads, F2W);
        dense_backward(&ws.ad1, &d_out, w, gw, gb, Some(&mut ws.g_ad1));
    }

    // dropout then leaky relu
    for (g, &m) in ws.g_ad1.iter_mut().zip(&ws.drop_mask) {
        *g = *g * m;
    }
    leaky_relu_backward(&ws.zf1, &ws.g_ad1, &mut ws.g_zf1);

    // fc1
    ws.g_flat.fill(T::zero());
    {
        let (w, _) = params.wb(F1W);
        let (gw, gb) = grads_wb(grads, F1W);
        dense_backward(&ws.ah2, &ws.g_zf1, w, gw, gb, Some(&mut ws.g_flat));
    }

    // head convolutions
    relu_backward(&ws.zh2, &ws.g_flat, &mut ws.g_zh2);
    ws.g_ah1.fill(T::zero());
    {
        let (w, _) = params.wb(H2W);
        let (gw, gb) = grads_wb(grads, H2W);
        conv1d_backward(&ws.ah1, 32, &ws.g_zh2, 16, PATCH_T, 3, 1, w, gw, gb, Some(&mut ws.g_ah1));
    }
    relu_backward(&ws.zh1, &ws.g_ah1, &mut ws.g_zh1);
    ws.g_cat.fill(T::zero());
    {
        let (w, _) = params.wb(H1W);
        let (gw, gb) = grads_wb(grads, H1W);
        conv1d_backward(&ws.cat, 64, &ws.g_zh1, 32, PATCH_T, 3, 1, w, gw, gb, Some(&mut ws.g_cat));
    }

    // both pathways read the merge output, so their input gradients add up
    ws.g_am.fill(T::zero());

    relu_backward(&ws.zg2, &ws.g_cat[..D_P], &mut ws.g_zp2);
    ws.g_ap1.fill(T::zero());
    {
        let (w, _) = params.wb(G2W);
        let (gw, gb) = grads_wb(grads, G2W);
        conv1d_backward(&ws.ag1, 32, &ws.g_zp2, 32, PATCH_T, 11, 5, w, gw, gb, Some(&mut ws.g_ap1));
    }
    relu_backward(&ws.zg1, &ws.g_ap1, &mut ws.g_zp1);
    {
        let (w, _) = params.wb(G1W);
        let (gw, gb) = grads_wb(grads, G1W);
        conv1d_backward(&ws.am, 64, &ws.g_zp1, 32, PATCH_T, 11, 5, w, gw, gb, Some(&mut ws.g_am));
    }

    relu_backward(&ws.zl2, &ws.g_cat[D_P..], &mut ws.g_zp2);
    ws.g_ap1.fill(T::zero());
    {
        let (w, _) = params.wb(L2W);
        let (gw, gb) = grads_wb(grads, L2W);
        conv1d_backward(&ws.al1, 32, &ws.g_zp2, 32, PATCH_T, 3, 1, w, gw, gb, Some(&mut ws.g_ap1));
    }
    relu_backward(&ws.zl1, &ws.g_ap1, &mut ws.g_zp1);
    {
        let (w, _) = params.wb(L1W);
        let (gw, gb) = grads_wb(grads, L1W);
        conv1d_backward(&ws.am, 64, &ws.g_zp1, 32, PATCH_T, 3, 1, w, gw, gb, Some(&mut ws.g_am));
    }

    // merge back to the 66-channel input; baseline/arterial channel
    // gradients are dropped with the rest of g_xt
    relu_backward(&ws.zm, &ws.g_am, &mut ws.g_zm);
    ws.g_xt.fill(T::zero());
    {
        let (w, _) = params.wb(MGW);
        let (gw, gb) = grads_wb(grads, MGW);
        conv1d_backward(&ws.xt, 66, &ws.g_zm, 64, PATCH_T, 3, 1, w, gw, gb, Some(&mut ws.g_xt));
    }

    // spatial encoder
    relu_backward(&ws.z4, &ws.g_xt[..D4], &mut ws.g_z4);
    ws.g_a3.fill(T::zero());
    {
        let (w, _) = params.wb(S4W);
        let (gw, gb) = grads_wb(grads, S4W);
        conv3d_backward(&ws.a3, 32, 3, &ws.g_z4, 64, 1, PATCH_T, 0, w, gw, gb, Some(&mut ws.g_a3));
    }
    relu_backward(&ws.z3, &ws.g_a3, &mut ws.g_z3);
    ws.g_a2.fill(T::zero());
    {
        let (w, _) = params.wb(S3W);
        let (gw, gb) = grads_wb(grads, S3W);
        conv3d_backward(&ws.a2, 16, 5, &ws.g_z3, 32, 3, PATCH_T, 0, w, gw, gb, Some(&mut ws.g_a2));
    }
    relu_backward(&ws.z2, &ws.g_a2, &mut ws.g_z2);
    ws.g_a1.fill(T::zero());
    {
        let (w, _) = params.wb(S2W);
        let (gw, gb) = grads_wb(grads, S2W);
        conv3d_backward(&ws.a1, 8, 7, &ws.g_z2, 16, 5, PATCH_T, 0, w, gw, gb, Some(&mut ws.g_a1));
    }
    relu_backward(&ws.z1, &ws.g_a1, &mut ws.g_z1);
    {
        let (w, _) = params.wb(S1W);
        let (gw, gb) = grads_wb(grads, S1W);
        conv3d_backward(&ws.input, 1, 7, &ws.g_z1, 8, 7, PATCH_T, 1, w, gw, gb, None);
    }
}

/// Run only the 3-D encoder on a patch; returns the 64x50 feature tensor.
pub fn spatial_forward<T: Scalar>(p: &Patch<T>, params: &ModelParams<T>) -> Result<Tensor<T>> {
    if p.signal.len() != D_IN {
        return Err(Error::Dim(format!(
            "patch signal has {} samples, expected {D_IN}",
            p.signal.len()
        )));
    }
    params.validate()?;
    let mut ws = Workspace::new();
    ws.input.copy_from_slice(&p.signal);
    spatial_stack(params, &mut ws);
    Tensor::from_values(&[64, PATCH_T], ws.a4.clone())
}

/// Run the temporal network on precomputed spatial features; returns the
/// de-normalized (CBV, CBF, Tmax) triple.
pub fn temporal_forward<T: Scalar>(
    features: &Tensor<T>,
    baseline: T,
    aif_channel: &[T],
    params: &ModelParams<T>,
) -> Result<(T, T, T)> {
    if features.shape != [64, PATCH_T] {
        return Err(Error::Dim(format!(
            "feature tensor has shape {:?}, expected [64, {PATCH_T}]",
            features.shape
        )));
    }
    if aif_channel.len() != PATCH_T {
        return Err(Error::Dim(format!(
            "arterial channel has {} samples, expected {PATCH_T}",
            aif_channel.len()
        )));
    }
    if !(baseline > T::zero()) {
        return Err(Error::Domain("baseline must be positive".into()));
    }
    let aif_max = aif_channel.iter().copied().fold(T::neg_infinity(), T::max);
    if !(aif_max > T::zero()) {
        return Err(Error::Domain("arterial channel must have a positive peak".into()));
    }

    let mut ws = Workspace::new();
    ws.xt[..D4].copy_from_slice(&features.values);
    ws.xt[D4..D4 + PATCH_T].fill(baseline / params.norm.signal_scale);
    for (dst, &v) in ws.xt[D4 + PATCH_T..].iter_mut().zip(aif_channel) {
        *dst = v / aif_max;
    }
    let out = temporal_stack(params, &mut ws, None);
    let phys = params.norm.denormalize(out);
    Ok((phys[0], phys[1], phys[2]))
}
