//! Entity-driven content selection and abstractive rewriting for
//! single-document summarization.

pub mod coherence;
pub mod error;
pub mod generator;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod rewards;
pub mod selector;
pub mod textproc;

pub use error::{Result, SenecaError};
