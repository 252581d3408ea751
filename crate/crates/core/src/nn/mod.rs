//! From-scratch 1D-CNN machinery: tensors, layers, losses, the adaptive
//! moment optimizer, the Type-A/Type-B network assemblies and the training
//! loop. No autodiff framework; every backward pass is hand-derived and
//! checked against finite differences in the test suite.

mod adam;
mod checkpoint;
mod layers;
mod loss;
mod network;
mod tensor;
mod train;

pub use adam::Adam;
pub use checkpoint::{load_model, save_model, ModelMeta};
pub use layers::{Layer, LayerSpec};
pub use loss::{bce_with_logits, mse, LossKind};
pub use network::{Network, NetworkSpec, Task, Variant};
pub use tensor::Tensor3;
pub use train::{train, Hyper, TaskLabels, TrainCurves, TrainData, TrainedModel};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid network spec: {0}")]
    BadSpec(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },
    #[error(transparent)]
    Io(#[from] crate::io::IoError),
}
