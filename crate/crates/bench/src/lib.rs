//! Synthetic fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use openqa_core::corpus::{DocStore, Document};
use openqa_core::reader::{EmbeddingTable, Reader, ReaderConfig};
use openqa_core::retriever::{build_index, IndexOptions, TfidfIndex};
use openqa_core::textproc::tokenize;

/// A store of `num_docs` synthetic documents over a closed vocabulary.
pub fn synthetic_store(dir: &tempfile::TempDir, num_docs: usize, seed: u64) -> DocStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vec<String> = (0..800).map(|i| format!("term{i}")).collect();
    let mut store = DocStore::create(dir.path().join("bench.store")).unwrap();
    for d in 0..num_docs {
        let len = rng.random_range(40..160);
        let words: Vec<&str> = (0..len)
            .map(|_| vocab[rng.random_range(0..vocab.len())].as_str())
            .collect();
        store
            .add(&Document {
                id: format!("doc{d:05}"),
                title: format!("Document {d}"),
                text: words.join(" "),
            })
            .unwrap();
    }
    store
}

pub fn synthetic_index(store: &DocStore) -> TfidfIndex {
    build_index(store, IndexOptions::default()).unwrap()
}

/// A small randomly initialized reader plus a (question, paragraph) pair
/// sized like real inputs.
pub fn synthetic_reader(seed: u64) -> (Reader, String, String) {
    let question = "which term did the synthetic survey record most often".to_string();
    let paragraph: String = (0..120)
        .map(|i| format!("term{}", i % 50))
        .collect::<Vec<_>>()
        .join(" ");
    let mut vocab: Vec<String> = Vec::new();
    for tok in tokenize(&format!("{question} {paragraph}")).tokens {
        vocab.push(tok.lower);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embedding = EmbeddingTable::random(&vocab, 64, &mut rng);
    let config = ReaderConfig {
        layers: 2,
        hidden: 32,
        dropout: 0.0,
        ..ReaderConfig::default()
    };
    let reader = Reader::new(config, embedding, Vec::new(), Vec::new(), seed).unwrap();
    (reader, question, paragraph)
}
