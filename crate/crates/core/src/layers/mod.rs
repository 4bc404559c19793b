//! Complex-valued building blocks of the encoder and its heads.

pub mod activation;
pub mod attention;
pub mod dense;
pub mod dropout;
pub mod embedding;
pub mod heads;
pub mod norm;
pub mod regularizers;
pub mod unitary;

pub use activation::{activate, HiddenActivation};
pub use attention::{complex_attention, AttentionActivation, MultiHeadAttention};
pub use dense::{complex_dense, Dense};
pub use dropout::complex_dropout;
pub use embedding::{split_embed, Embeddings};
pub use heads::{measurement_cls_head, nsp_measurement_head, MeasurementHead, MlmDecoder, MlmHead, NspHead};
pub use norm::{normalize, Norm, NormKind};
pub use regularizers::{ortho_regularizers, RegConfig, RegKind};
pub use unitary::UnitaryLayer;
