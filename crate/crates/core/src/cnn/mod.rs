//! Two-layer CNN whose convolution products run through per-slot multipliers.

pub mod cifar;
mod engine;
pub mod fixture;
pub mod network;
pub mod reference;
pub mod synthetic;
mod tensor;
pub mod train;

pub use cifar::{load_cifar10, DatasetDir, Sample};
pub use engine::{conv2d_interleaved, evaluate_accuracy, infer, Engine, Inference};
pub use network::{load_weights, ConvLayer, DenseLayer, NetworkDef};
pub use tensor::Tensor;
pub use train::{train_reference, TrainParams, TrainReport};
