//! Aspect extraction (BiGRU-CRF), aspect-level sentiment classifiers
//! (TC-LSTM, ATAE, IAN) and transfer of the extractor's contextual word
//! representations into the classifiers.

pub mod error;
pub mod ae;
pub mod alsa;
pub mod data;
pub mod crf;
pub mod layers;
pub mod harness;
pub mod numerics;

pub use error::{Error, Result};
