//! Corpus ingestion, embedding stores, folds and input assembly.

mod corpus;
mod example;
mod input;
mod split;
mod vectors;

pub use corpus::{
    load_classification_csv, load_examples, load_sequence_jsonl, read_sequence_jsonl, write_classification_csv,
    write_sequence_jsonl, CSV_HEADER,
};
pub use example::{Example, Genre, LITERAL, METAPHOR};
pub use input::build_input_vector;
pub use split::{dev_split, dev_split_indices, make_folds, FoldPlan};
pub use vectors::{
    load_contextual, load_word_vectors, ContextualVectors, EmbeddingStore, WordVectors, CONTEXTUAL_DIM, WORD_DIM,
};
