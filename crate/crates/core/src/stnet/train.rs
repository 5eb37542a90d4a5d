//! Mini-batch training with Adam, seeded shuffling, dropout and early
//! stopping on the validation loss.
//!
//! Within a batch, samples are processed in fixed-size groups that are
//! distributed over threads; group boundaries depend only on the batch
//! order, so gradients (and therefore training) are bit-identical for any
//! worker count.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stnet::adam::AdamState;
use crate::stnet::loss::{cbv_to_integral, loss_grad_sample};
use crate::stnet::model::{
    forward_sample, init_params, param_layout, ModelParams, NormStats, SampleInput, Workspace,
    N_OUTPUTS, PATCH_T,
};
use crate::stnet::patches::{concentration_integral, Patch};
use crate::tracer_kinetics::KineticConstants;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    /// Stop after this many consecutive epochs without a new best
    /// validation loss.
    pub patience: usize,
    pub stride: usize,
    /// Normal-to-lesion patch sampling ratio.
    pub ratio: f64,
    pub w_phys: f64,
    pub dropout_p: f64,
    pub seed: u64,
    pub val_frac: f64,
    /// Baseline window (pre-contrast samples).
    pub n_pre: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            batch: 512,
            max_epochs: 400,
            patience: 50,
            stride: 1,
            ratio: 2.0,
            w_phys: 0.1,
            dropout_p: 0.2,
            seed: 42,
            val_frac: 0.2,
            n_pre: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Invalid(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch == 0 || self.max_epochs == 0 || self.patience == 0 || self.stride == 0 {
            return Err(Error::Invalid(
                "batch, max_epochs, patience and stride must be positive".into(),
            ));
        }
        if !(self.ratio > 0.0) {
            return Err(Error::Invalid(format!("ratio must be positive, got {}", self.ratio)));
        }
        if !(self.val_frac > 0.0 && self.val_frac < 1.0) {
            return Err(Error::Invalid(format!(
                "val_frac must be in (0, 1), got {}",
                self.val_frac
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Invalid(format!(
                "dropout_p must be in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if self.w_phys < 0.0 {
            return Err(Error::Invalid(format!(
                "w_phys must be nonnegative, got {}",
                self.w_phys
            )));
        }
        if self.n_pre == 0 {
            return Err(Error::Invalid("n_pre must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_loss));
        }
        out
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Prepared<T: Scalar> {
    signal_ptr: usize, // index into the patch list
    baseline_norm: T,
    aif_norm: Vec<T>,
    gt_norm: [T; N_OUTPUTS],
    conc_integral: T,
}

// fixed group size for deterministic parallel gradient reduction
const GRAD_CHUNK: usize = 16;

#[allow(clippy::too_many_arguments)]
fn batch_pass<T: Scalar>(
    params: &ModelParams<T>,
    patches: &[Patch<T>],
    prep: &[Prepared<T>],
    order: &[usize],
    w_phys: f64,
    k: &KineticConstants<T>,
    kav: T,
    dropout: Option<(f64, u64, usize)>, // rate, per-epoch seed, epoch position offset
    want_grads: bool,
) -> (f64, Option<Vec<T>>) {
    let n_params = param_layout().total;
    let batch = order.len();
    let chunks: Vec<(usize, &[usize])> = order
        .chunks(GRAD_CHUNK)
        .enumerate()
        .map(|(i, c)| (i * GRAD_CHUNK, c))
        .collect();

    let partials: Vec<(f64, Option<Vec<T>>)> = chunks
        .par_iter()
        .map(|&(chunk_pos, chunk)| {
            let mut ws = Workspace::new();
            let mut grads = want_grads.then(|| vec![T::zero(); n_params]);
            let mut loss_sum = 0.0f64;
            for (slot, &pi) in chunk.iter().enumerate() {
                let p = &prep[pi];
                let patch = &patches[p.signal_ptr];
                let input = SampleInput {
                    signal: &patch.signal,
                    baseline_norm: p.baseline_norm,
                    aif_norm: &p.aif_norm,
                };
                let mut rng_holder;
                let dropout_arg = match dropout {
                    Some((rate, seed, base)) if rate > 0.0 => {
                        rng_holder = ChaCha8Rng::seed_from_u64(seed);
                        rng_holder.set_stream((base + chunk_pos + slot) as u64);
                        Some((rate, &mut rng_holder))
                    }
                    _ => None,
                };
                let out = forward_sample(params, &input, &mut ws, dropout_arg);

                let mut mae = T::zero();
                for j in 0..N_OUTPUTS {
                    mae += (out[j] - p.gt_norm[j]).abs();
                }
                mae = mae / T::c(N_OUTPUTS as f64);
                let pred_cbv = out[0] * params.norm.out_scale[0] + params.norm.out_mean[0];
                let phys = (p.conc_integral - cbv_to_integral(pred_cbv, k, kav)).abs();
                loss_sum += (mae + T::c(w_phys) * phys).as_f64();

                if let Some(g) = grads.as_deref_mut() {
                    let d = loss_grad_sample(
                        &out,
                        &p.gt_norm,
                        p.conc_integral,
                        w_phys,
                        k,
                        kav,
                        &params.norm,
                        batch,
                    );
                    crate::stnet::model::backward_sample(params, &mut ws, d, g);
                }
            }
            (loss_sum, grads)
        })
        .collect();

    // reduce in fixed chunk order
    let mut loss_sum = 0.0;
    let mut grads = want_grads.then(|| vec![T::zero(); n_params]);
    for (l, g) in partials {
        loss_sum += l;
        if let (Some(total), Some(part)) = (grads.as_deref_mut(), g) {
            for (t, p) in total.iter_mut().zip(part) {
                *t += p;
            }
        }
    }
    (loss_sum, grads)
}

/// Train on labeled patches; returns the parameters of the best validation
/// epoch and the per-epoch loss log.
pub fn train<T: Scalar>(
    patches: &[Patch<T>],
    cfg: &TrainConfig,
    k: &KineticConstants<T>,
    kav: T,
) -> Result<(ModelParams<T>, TrainLog)> {
    cfg.validate()?;
    k.validate()?;
    if patches.len() < 2 {
        return Err(Error::Invalid(format!(
            "training needs at least 2 patches, got {}",
            patches.len()
        )));
    }
    for p in patches {
        if p.labels.is_none() {
            return Err(Error::Invalid("all training patches need labels".into()));
        }
        if p.aif.len() != PATCH_T {
            return Err(Error::Dim("patch arterial curve has the wrong length".into()));
        }
    }

    // seeded validation split
    let n = patches.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut split_rng = ChaCha8Rng::seed_from_u64(splitmix(cfg.seed ^ 0x51));
    perm.shuffle(&mut split_rng);
    let n_val = ((cfg.val_frac * n as f64).round() as usize).clamp(1, n - 1);
    let val_idx: Vec<usize> = perm[n - n_val..].to_vec();
    let train_idx: Vec<usize> = perm[..n - n_val].to_vec();

    // normalization statistics from the training split only
    let mut mean = [0.0f64; N_OUTPUTS];
    let mut sq = [0.0f64; N_OUTPUTS];
    let mut base_mean = 0.0f64;
    for &i in &train_idx {
        let lab = patches[i].labels.unwrap();
        for j in 0..N_OUTPUTS {
            let v = lab[j].as_f64();
            mean[j] += v;
            sq[j] += v * v;
        }
        base_mean += patches[i].baseline.as_f64();
    }
    let nt = train_idx.len() as f64;
    let mut norm = NormStats::<T>::default();
    for j in 0..N_OUTPUTS {
        mean[j] /= nt;
        let var = (sq[j] / nt - mean[j] * mean[j]).max(0.0);
        let std = var.sqrt();
        norm.out_mean[j] = T::c(mean[j]);
        norm.out_scale[j] = if std > 1e-12 { T::c(std) } else { T::one() };
    }
    norm.signal_scale = T::c(base_mean / nt);

    // precompute per-sample inputs and targets
    let prep: Vec<Prepared<T>> = patches
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let aif_max = p.aif.iter().copied().fold(T::neg_infinity(), T::max);
            let aif_norm = if aif_max > T::zero() {
                p.aif.iter().map(|&v| v / aif_max).collect()
            } else {
                p.aif.clone()
            };
            Prepared {
                signal_ptr: i,
                baseline_norm: p.baseline / norm.signal_scale,
                aif_norm,
                gt_norm: norm.normalize(p.labels.unwrap()),
                conc_integral: concentration_integral(p, k),
            }
        })
        .collect();

    let mut params = init_params::<T>(splitmix(cfg.seed ^ 0x1717));
    params.norm = norm;
    let mut adam = AdamState::new(params.n_params());

    let shuffle_seed = splitmix(cfg.seed ^ 0xA5A5);
    let dropout_seed = splitmix(cfg.seed ^ 0xD0D0);

    let mut best_data = params.data.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut streak = 0usize;
    let mut records = Vec::new();

    for epoch in 0..cfg.max_epochs {
        let mut order = train_idx.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let mut pos = 0usize;
        for batch in order.chunks(cfg.batch) {
            let (_, grads) = batch_pass(
                &params,
                patches,
                &prep,
                batch,
                cfg.w_phys,
                k,
                kav,
                Some((cfg.dropout_p, dropout_seed.wrapping_add(epoch as u64), pos)),
                true,
            );
            adam.step(&mut params.data, &grads.unwrap(), cfg.lr);
            pos += batch.len();
        }

        // both logged losses are evaluation-mode (dropout off) so the train
        // column measures fit rather than dropout jitter
        let (train_sum, _) = batch_pass(
            &params, patches, &prep, &train_idx, cfg.w_phys, k, kav, None, false,
        );
        let train_loss = train_sum / train_idx.len() as f64;
        let (val_sum, _) = batch_pass(
            &params, patches, &prep, &val_idx, cfg.w_phys, k, kav, None, false,
        );
        let val_loss = val_sum / val_idx.len() as f64;

        records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });

        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_data.copy_from_slice(&params.data);
            streak = 0;
        } else {
            streak += 1;
            if streak >= cfg.patience {
                break;
            }
        }
    }

    let out = ModelParams {
        data: best_data,
        norm: params.norm,
    };
    Ok((
        out,
        TrainLog {
            records,
            best_epoch,
            best_val_loss: best_val,
        },
    ))
}
