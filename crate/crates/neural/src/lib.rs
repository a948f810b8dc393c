//! Dense f64 tensors with reverse-mode gradients and the point-cloud model
//! built on them: KNN edge convolutions, relational attention, a fingerprint
//! blend head and a fixed-epoch trainer.
//!
//! Point features are stored one point per row (N×F).

pub mod attention;
pub mod dropout;
pub mod error;
pub mod graph;
pub mod io;
pub mod kernels;
pub mod model;
pub mod params;
pub mod tape;
pub mod tensor;
pub mod train;

pub use attention::{AttentionBlock, AttentionContext, GeoMode};
pub use error::{Error, Result};
pub use graph::{edge_conv, knn_graph, KnnGraph};
pub use model::{fp_blend, Model, ModelConfig, ModelInput};
pub use params::ParamSet;
pub use tape::{grad_check, Tape, Var};
pub use tensor::Tensor;
pub use train::{train, Sample, Trained};
