//! Dense reverse-mode autodiff, parameter storage and the Adam optimizer.

mod conv;
mod layers;
mod params;
mod sparse;
mod tape;

pub use conv::{col2im, im2col, ConvGeom};
pub use layers::{Init, Linear, Mlp};
pub use params::{glorot, he_normal, Adam, AdamConfig, Gradients, LrGroup, ParamId, ParamStore};
pub use sparse::{Csr, SpOp};
pub use tape::{bce_value, sigmoid, Tape, Var, PROB_EPS};

#[cfg(test)]
pub(crate) mod gradcheck;
