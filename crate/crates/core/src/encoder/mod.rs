//! Sample and label representations.
//!
//! The trainable backend is a token-embedding table whose output is the mean of
//! the embedding rows of a prompted text. There is no contextualization, so the
//! row at the `[MASK]` position would be the same for every input; pooling over
//! all prompted tokens keeps samples and label names in one shared space and
//! keeps the backward pass a plain scatter-add. Precomputed vectors from an
//! external model are read through [`EmbeddingStore`].

mod checkpoint;
mod params;
mod store;
mod template;
mod vocab;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use params::{EncoderParams, TableGrad};
pub use store::{EmbeddingStore, STORE_MAGIC, STORE_VERSION};
pub use template::PromptTemplate;
pub use vocab::{tokenize_words, TokenId, Vocabulary, MASK, MASK_TOKEN, UNK, UNK_TOKEN};
