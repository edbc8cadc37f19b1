//! Encoder / residual / decoder fusion networks.
//!
//! Two variants share the residual trunk and decoder:
//!
//! - [`Variant::Max`]: every focal plane runs through the same 2D encoder and
//!   the feature maps are fused by an element-wise maximum. Works for any
//!   number of planes and is invariant to plane order.
//! - [`Variant::Volumetric`]: the stack is encoded as a volume with 3D
//!   convolutions and the features are averaged over z. The plane count is
//!   fixed by the model.
//!
//! All arithmetic is `f64`; [`Precision::Single`] only constrains stored
//! parameter values to be `f32`-representable so that the weights file
//! round-trips bit-exactly.

mod layers;
mod network;
mod train;
mod weights;

pub use layers::Volume;
pub use network::{
    backward, expected_shapes, forward, init_params, mse_loss, pre_upsample, ArchConfig,
    NetworkParams, Precision, Tensor, Variant,
};
pub use train::{train, TrainConfig};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights};
