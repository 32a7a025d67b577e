//! Dense `f64` tensors, a tape for reverse-mode differentiation, the layers
//! used by the summarization networks, and Adam.

pub mod checkpoint;
mod error;
pub mod gradcheck;
mod graph;
pub mod layers;
pub mod optim;
mod params;
mod tensor;

pub use error::{Result, TensorError};
pub use graph::{sigmoid, softmax_rows, Graph, Var};
pub use layers::{AdditiveAttention, BiLstm, ConvEncoder, Embedding, Linear, LstmCell, LstmState};
pub use optim::{Adam, AdamConfig, StepStats};
pub use params::{Gradients, ParamId, ParamStore, Parameter};
pub use tensor::Tensor;
