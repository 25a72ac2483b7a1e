//! Label-guided distance scaling for few-shot episodic classification.
//!
//! The crate is organised the way an experiment flows:
//!
//! * [`data`] loads newline-delimited JSON datasets and validates class splits.
//! * [`encoder`] turns prompted text and label names into vectors, either with a
//!   trainable mean-pooled embedding table or from precomputed embedding stores.
//! * [`sampler`] draws N-way K-shot episodes with reproducible RNG streams.
//! * [`losses`] holds the label-guided training objectives and their gradients.
//! * [`scaler`] is the test-time EM scaler that pulls support vectors toward
//!   their label representation.
//! * [`metalearners`] classifies queries with prototypes or a ridge head.
//! * [`harness`] wires everything into training, evaluation and ablations.

pub mod data;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod losses;
pub mod metalearners;
pub mod par;
pub mod rng;
pub mod sampler;
pub mod scaler;
pub mod vector;

pub use error::{Error, Result};
pub use vector::Vector;
