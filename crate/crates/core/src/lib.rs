//! Open-domain question answering over a plain-text corpus.
//!
//! The system has three stages: a hashed unigram+bigram TF-IDF retriever
//! that narrows a corpus to a handful of documents, a distant-supervision
//! builder that turns bare question/answer pairs into span-labelled training
//! paragraphs, and a BiLSTM reader that extracts and scores answer spans,
//! aggregating them across every retrieved paragraph.

pub mod corpus;
pub mod dsbuilder;
pub mod error;
pub mod pipeline;
pub mod reader;
pub mod retriever;
pub mod textproc;

pub use error::{Error, Result};
