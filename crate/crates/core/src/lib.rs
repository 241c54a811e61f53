//! Multilingual denoising-pretraining data pipeline.
//!
//! Builds training records for three objectives from monolingual corpora,
//! bitext and bilingual dictionaries:
//!
//! * **mono**: reconstruct `x` from a span-masked, sentence-permuted `x`;
//! * **dict**: the same, but words are first code-switched through a
//!   dictionary;
//! * **bitext**: predict the clean reference `y` from a noised source `x`.
//!
//! Languages, directions and tasks are drawn with exponential sampling. Every
//! random choice flows from one seed through labelled [`rng::Rng`] splits, so
//! emission is reproducible bit-for-bit regardless of thread count.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod lang;
pub mod noising;
pub mod par;
pub mod pipeline;
pub mod records;
pub mod rng;
pub mod sampler;
pub mod tokenizer;
pub mod verify;

pub use error::{Error, Result};
pub use lang::{Direction, LanguageId};
