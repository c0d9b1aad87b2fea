//! Visual structural features: the image encoder, the per-node VSF
//! repository used by E-GVN, and the trainable adapter.

mod adapter;
mod encoder;
mod repository;

pub use adapter::Adapter;
pub use encoder::{
    ConvSpec, EncoderArch, EncoderHandle, TapeEncoder, VsfVector, DEFAULT_ENCODER_ID, DEFAULT_VSF_DIM,
};
pub use repository::{BuildStats, RepoMeta, VsfRepository};
