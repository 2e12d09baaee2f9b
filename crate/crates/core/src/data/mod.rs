//! SemEval-2014 Task 4 ingestion, tokenization, BIO alignment, embeddings and
//! SA/MA slicing.

mod dataset;
mod embeddings;
mod semeval;
pub mod synth;
mod tokenize;

pub use dataset::{multi_aspect_mask, process_sentence, split_sa_ma, Dataset, LabelCounts, ProcessedAspect, ProcessedSentence};
pub use embeddings::{
    load_embeddings, load_embeddings_with, EmbeddingOptions, Vocabulary, DEFAULT_UNK_SEED, EMBED_DIM, UNK_BOUND,
    UNK_TOKEN,
};
pub use semeval::{parse_semeval, Domain, RawAspect, RawPolarity, RawSentence};
pub use tokenize::{align_bio, overlapping_span, tokenize, Token};
