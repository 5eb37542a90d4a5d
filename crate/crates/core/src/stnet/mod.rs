//! Spatiotemporal network for per-voxel perfusion regression: patch
//! extraction, the model itself with manual backpropagation, the combined
//! MAE + physical loss, Adam training with early stopping, whole-volume
//! inference and the checkpoint format.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod model;
pub mod patches;
pub mod predict;
pub mod tensor;
pub mod train;

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use loss::{physical_loss, total_loss};
pub use model::{
    init_params, param_layout, spatial_forward, temporal_forward, ModelParams, NormStats,
    PATCH_T, PATCH_XY,
};
pub use patches::{attach_labels, extract_patches, Patch};
pub use predict::predict_volume;
pub use tensor::Tensor;
pub use train::{train, TrainConfig, TrainLog};
