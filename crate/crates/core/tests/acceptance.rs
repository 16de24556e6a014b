//! Acceptance suite. Each test prints one PASS line (visible with
//! `cargo test --test acceptance -- --nocapture`) and fails loudly
//! otherwise.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use openqa_core::corpus::{Document, DocStore};
use openqa_core::reader::{
    decode_span, example_loss, example_loss_and_grads, EmbeddingTable, Reader, ReaderConfig,
    TrainExample,
};
use openqa_core::retriever::{build_index, hash_feature, murmur3_x86_32, IndexOptions};
use openqa_core::textproc::{normalize_for_retrieval, tokenize, LookupAnnotator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------
// Criterion 1: hashed top-k ranking equals a brute-force dense TF-IDF
// oracle on 50 random corpora, with verified zero hash collisions.
// ---------------------------------------------------------------------

/// Dense TF-IDF oracle computed over n-gram strings, no hashing.
struct DenseOracle {
    num_docs: usize,
    doc_freq: HashMap<String, u32>,
    rows: Vec<HashMap<String, u32>>,
    doc_ids: Vec<String>,
}

fn oracle_grams(text: &str) -> Vec<String> {
    let tokens = normalize_for_retrieval(text);
    let mut grams: Vec<String> = tokens.clone();
    grams.extend(tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    grams
}

impl DenseOracle {
    fn build(docs: &[(String, String)]) -> DenseOracle {
        let mut rows = Vec::new();
        let mut doc_freq: HashMap<String, u32> = HashMap::new();
        let mut doc_ids = Vec::new();
        for (id, text) in docs {
            let mut counts: HashMap<String, u32> = HashMap::new();
            // Index title + " " + text like the real index; titles are empty
            // in these fixtures so just the text.
            for gram in oracle_grams(&format!(" {text}")) {
                *counts.entry(gram).or_insert(0) += 1;
            }
            for gram in counts.keys() {
                *doc_freq.entry(gram.clone()).or_insert(0) += 1;
            }
            rows.push(counts);
            doc_ids.push(id.clone());
        }
        DenseOracle {
            num_docs: docs.len(),
            doc_freq,
            rows,
            doc_ids,
        }
    }

    fn idf(&self, gram: &str) -> f64 {
        let n = self.num_docs as f64;
        let df = self.doc_freq.get(gram).copied().unwrap_or(0) as f64;
        ((n - df + 0.5) / (df + 0.5)).ln().max(0.0)
    }

    fn top_k(&self, query: &str, k: usize) -> Vec<(String, f64)> {
        let mut q_counts: BTreeMap<String, u32> = BTreeMap::new();
        for gram in oracle_grams(query) {
            *q_counts.entry(gram).or_insert(0) += 1;
        }
        let mut scores: Vec<f64> = vec![0.0; self.num_docs];
        for (gram, &tf) in &q_counts {
            let idf = self.idf(gram);
            if idf <= 0.0 {
                continue;
            }
            let q_w = (1.0 + tf as f64).ln() * idf;
            for (row, counts) in self.rows.iter().enumerate() {
                if let Some(&c) = counts.get(gram) {
                    scores[row] += q_w * (1.0 + c as f64).ln() * idf;
                }
            }
        }
        let mut ranked: Vec<(String, f64)> = scores
            .into_iter()
            .enumerate()
            .filter(|(_, s)| *s > 0.0)
            .map(|(row, s)| (self.doc_ids[row].clone(), s))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }
}

fn random_corpus(rng: &mut ChaCha8Rng) -> Vec<(String, String)> {
    let vocab_size = rng.random_range(40..300);
    let vocab: Vec<String> = (0..vocab_size).map(|i| format!("w{i}")).collect();
    let num_docs = rng.random_range(5..=60);
    (0..num_docs)
        .map(|d| {
            let len = rng.random_range(5..40);
            let text: Vec<&str> = (0..len)
                .map(|_| vocab[rng.random_range(0..vocab.len())].as_str())
                .collect();
            (format!("doc{d:03}"), text.join(" "))
        })
        .collect()
}

/// All distinct grams of a corpus plus queries map to distinct bins.
fn collision_free(docs: &[(String, String)], queries: &[String]) -> bool {
    let mut bins: HashMap<u32, String> = HashMap::new();
    let texts = docs
        .iter()
        .map(|(_, t)| format!(" {t}"))
        .chain(queries.iter().cloned());
    for text in texts {
        for gram in oracle_grams(&text) {
            let bin = hash_feature(&gram, 0, 24);
            if let Some(existing) = bins.get(&bin) {
                if existing != &gram {
                    return false;
                }
            } else {
                bins.insert(bin, gram);
            }
        }
    }
    true
}

#[test]
fn c1_retriever_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let dir = tempfile::tempdir().unwrap();

    let mut tested = 0usize;
    let mut skipped_collisions = 0usize;
    let mut attempts = 0usize;
    while tested < 50 {
        attempts += 1;
        assert!(attempts < 500, "too many collision skips");
        let docs = random_corpus(&mut rng);
        let queries: Vec<String> = (0..5)
            .map(|_| {
                let (_, text) = &docs[rng.random_range(0..docs.len())];
                let words: Vec<&str> = text.split(' ').collect();
                let start = rng.random_range(0..words.len());
                let len = rng.random_range(1..=3.min(words.len() - start));
                words[start..start + len].join(" ")
            })
            .collect();

        // The equivalence claim is conditional on zero hash collisions;
        // corpora violating it are skipped (counted, never tested).
        if !collision_free(&docs, &queries) {
            skipped_collisions += 1;
            continue;
        }

        let mut store = DocStore::create(dir.path().join(format!("c1-{tested}.store"))).unwrap();
        for (id, text) in &docs {
            store
                .add(&Document {
                    id: id.clone(),
                    title: String::new(),
                    text: text.clone(),
                })
                .unwrap();
        }
        let index = build_index(&store, IndexOptions::default()).unwrap();
        let oracle = DenseOracle::build(&docs);

        for query in &queries {
            let got = index.top_k(query, 5);
            let want = oracle.top_k(query, 5);
            let got_ids: Vec<&String> = got.iter().map(|(id, _)| id).collect();
            let want_ids: Vec<&String> = want.iter().map(|(id, _)| id).collect();
            assert_eq!(got_ids, want_ids, "ranking mismatch for query {query:?}");
        }
        tested += 1;
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 10,
        "criterion requires < 10 s, took {elapsed:?}"
    );
    println!(
        "ACCEPTANCE 1 PASS: hashed top-k identical to dense oracle on 50 corpora \
         ({skipped_collisions} collision corpora skipped) in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------
// Criterion 2: murmur3 x86 32-bit reference vectors and binning.
// ---------------------------------------------------------------------

#[test]
fn c2_murmur3_reference_vectors() {
    // Truth values computed with the reference C++ implementation.
    let vectors: &[(&[u8], u32, u32)] = &[
        (b"", 0, 0),
        (b"", 1, 1364076727),
        (b"t", 0, 3397902157),
        (b"te", 0, 3988319771),
        (b"tes", 0, 196677210),
        (b"test", 0, 3127628307),
        (b"tested", 0, 2247989476),
        (b"1", 0, 2484513939),
        (b"12", 0, 4191350549),
        (b"123", 0, 2662625771),
        (b"1234", 0, 1914461635),
        (b"t", 25436347, 960607349),
        (b"tested", 25436347, 3592599130),
    ];
    for &(input, seed, want) in vectors {
        assert_eq!(
            murmur3_x86_32(input, seed),
            want,
            "murmur3({:?}, {seed})",
            String::from_utf8_lossy(input)
        );
    }

    // Modulo-2^24 binning.
    for &(input, seed, want) in vectors {
        if let Ok(s) = std::str::from_utf8(input) {
            assert_eq!(hash_feature(s, seed, 24), want % (1 << 24));
        }
    }
    println!("ACCEPTANCE 2 PASS: {} murmur3 reference vectors + 2^24 binning", vectors.len());
}

// ---------------------------------------------------------------------
// Criterion 3: span decoding equals exhaustive enumeration on 10^4
// random instances.
// ---------------------------------------------------------------------

#[allow(clippy::needless_range_loop)]
fn brute_force_span(start: &[f64], end: &[f64], max_len: usize) -> Option<(usize, usize, f64)> {
    let m = start.len();
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..m {
        for j in i..m {
            if j - i > max_len {
                continue;
            }
            let s = start[i] + end[j];
            if best.is_none() || s > best.unwrap().2 {
                best = Some((i, j, s));
            }
        }
    }
    best
}

#[test]
fn c3_span_decoding_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let lens = [0usize, 1, 15];
    let mut trials = 0usize;
    while trials < 10_000 {
        let m = rng.random_range(1..=50);
        let start: Vec<f64> = (0..m).map(|_| rng.random_range(-6.0..6.0)).collect();
        let end: Vec<f64> = (0..m).map(|_| rng.random_range(-6.0..6.0)).collect();
        let max_len = if trials % 4 == 3 {
            rng.random_range(0..=50)
        } else {
            lens[trials % 4]
        };
        let got = decode_span(&start, &end, max_len).expect("non-empty");
        let want = brute_force_span(&start, &end, max_len).expect("non-empty");
        assert_eq!((got.start, got.end), (want.0, want.1));
        assert_eq!(got.log_score, want.2);
        trials += 1;
    }
    println!("ACCEPTANCE 3 PASS: decode_span equals O(m^2) oracle on 10^4 instances");
}

// ---------------------------------------------------------------------
// Criterion 4: analytic gradients match central finite differences on a
// tiny model (h=4, layers=2, d=6), relative error < 1e-4.
// ---------------------------------------------------------------------

fn gradient_check_reader() -> (Reader, TrainExample) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let annotator = LookupAnnotator::new()
        .with_ner("chadwick", "PERSON")
        .with_pos("discovered", "VBD")
        .with_pos("neutron", "NN");
    let all = annotator.annotate_all();

    let question = "what did chadwick discover";
    // m = 7 once tokenized.
    let paragraph = "chadwick discovered the neutron in 1932 quietly";
    let vocab: Vec<String> = tokenize(&format!("{question} {paragraph}"))
        .tokens
        .into_iter()
        .map(|t| t.lower)
        .collect();
    let mut embedding = EmbeddingTable::random(&vocab, 6, &mut rng);
    embedding.set_trainable(&["what".to_string(), "chadwick".to_string(), "the".to_string()]);

    let config = ReaderConfig {
        layers: 2,
        hidden: 4,
        dropout: 0.0,
        use_exact_match: true,
        use_token_features: true,
        use_align: true,
        use_lemma: true,
        ..ReaderConfig::default()
    };
    let reader = Reader::new(
        config,
        embedding,
        vec!["VBD".into(), "NN".into(), "X".into()],
        vec!["PERSON".into()],
        0xC4,
    )
    .unwrap();

    let example = TrainExample::prepare(question, paragraph, vec![(3, 3)], Some(&all)).unwrap();
    assert_eq!(example.paragraph.tokens.len(), 7);
    assert_eq!(example.question.tokens.len(), 4);
    (reader, example)
}

#[test]
fn c4_gradient_check_all_parameter_groups() {
    let started = Instant::now();
    let (mut reader, example) = gradient_check_reader();

    let (_, grads) = example_loss_and_grads(&reader, &example, None).unwrap();
    let analytic = reader.flat_grads(&grads);
    let theta = reader.flat_params();
    assert_eq!(analytic.len(), theta.len());

    let eps = 1e-5;
    let mut worst: (f64, usize) = (0.0, 0);
    for k in 0..theta.len() {
        let mut plus = theta.clone();
        plus[k] += eps;
        reader.set_flat_params(&plus);
        let up = example_loss(&reader, &example).unwrap();

        let mut minus = theta.clone();
        minus[k] -= eps;
        reader.set_flat_params(&minus);
        let down = example_loss(&reader, &example).unwrap();

        let numeric = (up - down) / (2.0 * eps);
        let denom = analytic[k].abs().max(numeric.abs()).max(1e-6);
        let rel = (analytic[k] - numeric).abs() / denom;
        if rel > worst.0 {
            worst = (rel, k);
        }
        assert!(
            rel < 1e-4,
            "parameter {k}: analytic {} vs numeric {numeric} (rel {rel:.3e})",
            analytic[k]
        );
    }
    reader.set_flat_params(&theta);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "criterion requires < 60 s, took {elapsed:?}");
    println!(
        "ACCEPTANCE 4 PASS: {} parameters checked, worst relative error {:.3e} at index {}, {elapsed:?}",
        theta.len(),
        worst.0,
        worst.1
    );
}

// ---------------------------------------------------------------------
// Criterion 5: overfit sanity — 10 synthetic examples reach 100%
// training EM within 200 epochs, deterministically.
// ---------------------------------------------------------------------

fn synthetic_training_set() -> Vec<openqa_core::reader::RawExample> {
    let topics = [
        ("crystal", "cavern", "obsidian"),
        ("desert", "caravan", "cinnabar"),
        ("harbor", "lantern", "kelp"),
        ("meadow", "beacon", "clover"),
        ("glacier", "summit", "quartz"),
        ("orchard", "valley", "pomelo"),
        ("canyon", "river", "basalt"),
        ("forest", "trail", "amber"),
        ("island", "reef", "coral"),
        ("tundra", "ridge", "lichen"),
    ];
    topics
        .iter()
        .map(|(a, b, answer)| {
            let question = format!("what did the {a} {b} survey find");
            // Token positions: the(0) {a}(1) {b}(2) survey(3) found(4)
            // mostly(5) {answer}(6) deposits(7) during(8) review(9)
            let paragraph = format!("the {a} {b} survey found mostly {answer} deposits during review");
            (question, paragraph, vec![(6, 6)])
        })
        .collect()
}

fn overfit_reader(raw: &[openqa_core::reader::RawExample], seed: u64) -> Reader {
    let mut vocab: Vec<String> = Vec::new();
    for (q, p, _) in raw {
        for tok in tokenize(&format!("{q} {p}")).tokens {
            vocab.push(tok.lower);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embedding = EmbeddingTable::random(&vocab, 12, &mut rng);
    let config = ReaderConfig {
        layers: 1,
        hidden: 8,
        dropout: 0.0,
        learning_rate: 0.05,
        ..ReaderConfig::default()
    };
    Reader::new(config, embedding, Vec::new(), Vec::new(), seed).unwrap()
}

#[test]
fn c5_overfit_sanity() {
    use openqa_core::reader::{exact_match_rate, prepare_dataset, train, Regime, TrainOptions};

    let started = Instant::now();
    let raw = synthetic_training_set();
    assert_eq!(raw.len(), 10);

    let run = |seed: u64| -> (usize, Vec<f64>, f64) {
        let mut reader = overfit_reader(&raw, seed);
        let (examples, rejected) = prepare_dataset(raw.clone(), None);
        assert!(rejected.is_empty());
        let mut losses = Vec::new();
        let mut epochs_used = 0usize;
        let mut em = 0.0;
        // Train in 10-epoch rounds so the run can stop at 100% EM.
        for _ in 0..20 {
            let report = train(
                &mut reader,
                std::slice::from_ref(&examples),
                Regime::Single,
                &TrainOptions {
                    epochs: 10,
                    seed,
                    select_trainable: true,
                },
            )
            .unwrap();
            losses.extend(report.epoch_losses);
            epochs_used += 10;
            em = exact_match_rate(&reader, &examples).unwrap();
            if em == 1.0 {
                break;
            }
        }
        (epochs_used, losses, em)
    };

    let (epochs, losses, em) = run(7);
    assert_eq!(em, 1.0, "training EM must reach 100%, got {em}");
    assert!(epochs <= 200, "needed {epochs} epochs");

    // Determinism: identical loss curve on a second run with the same seed.
    let (_, losses2, em2) = run(7);
    assert_eq!(losses, losses2, "loss curve must be bit-reproducible");
    assert_eq!(em2, 1.0);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300, "criterion requires < 5 min, took {elapsed:?}");
    println!(
        "ACCEPTANCE 5 PASS: 100% training EM after {epochs} epochs (two identical runs) in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------
// Criterion 6: distant-supervision golden fixtures, one per filter rule,
// with hand-verified expected outputs.
// ---------------------------------------------------------------------

#[test]
fn c6_distant_supervision_golden_fixtures() {
    use openqa_core::dsbuilder::{build_ds, QAPair};

    let dir = tempfile::tempdir().unwrap();
    let mut store = DocStore::create(dir.path().join("ds.store")).unwrap();
    // One crafted corpus; the question terms retrieve doc "atom" plus the
    // distractor docs, and each paragraph trips exactly one rule.
    let atom_text = concat!(
        // P0: kept. Answer "neutron" present; 70 chars; contains "chadwick";
        // window overlap with the question is hand-counted below.
        "chadwick discovered the neutron after experiments with beryllium rays.",
        "\n\n",
        // P1: answer present but only 17 characters: length filter.
        "neutron chadwick!",
        "\n\n",
        // P2: answer present, long enough, positive overlap ("beryllium"),
        // but no question-entity "chadwick": only the named-entity filter
        // (with annotator) removes it.
        "the neutron mass was measured with beryllium rays in several labs.",
        "\n\n",
        // P3: answer present, long enough, has "chadwick", but shares no
        // content word with the question inside the 20-token window other
        // than none at all: zero-overlap discard. The match sits at the
        // start; "chadwick" appears 12 tokens later, outside the window.
        "neutron flux metering ran for eleven quiet months in a sealed annex basement before chadwick visited."
    );
    store
        .add(&Document {
            id: "atom".into(),
            title: "Atom".into(),
            text: atom_text.into(),
        })
        .unwrap();
    store
        .add(&Document {
            id: "d2".into(),
            title: "Other".into(),
            text: "padding text about oceans and tides for idf balance.".into(),
        })
        .unwrap();
    store
        .add(&Document {
            id: "d3".into(),
            title: "More".into(),
            text: "yet more padding about mountains and passes entirely.".into(),
        })
        .unwrap();

    let index = build_index(&store, IndexOptions::default()).unwrap();
    let annotator = LookupAnnotator::new().with_ner("chadwick", "PERSON");
    let qa = QAPair::new(
        "what did chadwick discover with beryllium",
        vec!["neutron".to_string()],
    );

    let examples = build_ds(&qa, &index, &store, Some(&annotator)).unwrap();
    assert_eq!(examples.len(), 1, "exactly one paragraph survives all filters");
    let ex = &examples[0];
    assert_eq!(ex.doc_id, "atom");
    assert!(ex.paragraph.starts_with("chadwick discovered"));
    // Answer span: token 3 ("neutron") of
    // [chadwick, discovered, the, neutron, after, experiments, with,
    //  beryllium, rays, .]
    assert_eq!(ex.answer_spans, vec![(3, 3)]);
    // Hand-verified overlap: question content grams {chadwick, discover,
    // beryllium} + bigrams {chadwick discover, discover beryllium}; window
    // content grams {chadwick, discovered, neutron, after, experiments,
    // beryllium, rays, ...}. Unigram hits: chadwick, beryllium = 2; bigram
    // hits: none ("discover" != "discovered"). Score = 2.
    assert_eq!(ex.overlap_score, 2);

    // Without the annotator the NE rule is off, so P2 (which passes every
    // other filter) comes back too — proof that NE filtering removed it.
    let without_ner = build_ds(&qa, &index, &store, None).unwrap();
    assert_eq!(without_ner.len(), 2);
    assert!(without_ner.iter().any(|e| e.paragraph.contains("mass was measured")));

    println!("ACCEPTANCE 6a PASS: answer-match, length [25,1500], NE and zero-overlap filters");

    // Top-5 cap: seven qualifying paragraphs, increasing overlap, only the
    // best five kept, scores non-increasing.
    let mut paras: Vec<String> = Vec::new();
    for i in 0..7 {
        let extras: Vec<String> = (0..i).map(|j| format!("marker{j}")).collect();
        paras.push(format!(
            "survey teams found zinc here {} across the wide basin region.",
            extras.join(" ")
        ));
    }
    let mut store2 = DocStore::create(dir.path().join("ds2.store")).unwrap();
    store2
        .add(&Document {
            id: "zinc".into(),
            title: "Zinc".into(),
            text: paras.join("\n\n"),
        })
        .unwrap();
    store2
        .add(&Document {
            id: "f1".into(),
            title: "Pad".into(),
            text: "unrelated padding text about rivers and dams.".into(),
        })
        .unwrap();
    store2
        .add(&Document {
            id: "f2".into(),
            title: "Pad2".into(),
            text: "extra padding about trade routes and caravans.".into(),
        })
        .unwrap();
    let index2 = build_index(&store2, IndexOptions::default()).unwrap();
    let qa2 = QAPair::new(
        "survey found zinc marker0 marker1 marker2 marker3 marker4 marker5",
        vec!["zinc".to_string()],
    );
    let kept = build_ds(&qa2, &index2, &store2, None).unwrap();
    assert_eq!(kept.len(), 5, "top-5 cap");
    for pair in kept.windows(2) {
        assert!(pair[0].overlap_score >= pair[1].overlap_score);
    }
    assert!(kept[0].paragraph.contains("marker5"), "highest overlap first");
    assert!(kept.iter().all(|e| e.overlap_score > 0));

    println!("ACCEPTANCE 6b PASS: top-5 paragraph cap with non-increasing scores");
}

// ---------------------------------------------------------------------
// Criterion 7: EM/F1 metric conformance on hand-computed fixtures.
// ---------------------------------------------------------------------

#[test]
fn c7_metric_conformance() {
    use openqa_core::pipeline::{exact_match, f1, normalize_answer};

    let golds = |xs: &[&str]| -> Vec<String> { xs.iter().map(|s| s.to_string()).collect() };
    // (prediction, golds, EM, F1) — F1 values hand-computed.
    let cases: Vec<(&str, Vec<String>, f64, f64)> = vec![
        ("32", golds(&["32"]), 1.0, 1.0),
        ("32 provinces", golds(&["32"]), 0.0, 2.0 / 3.0),
        ("The neutron", golds(&["neutron"]), 1.0, 1.0),
        ("U.S.", golds(&["US"]), 1.0, 1.0),
        ("a New  Hampshire.", golds(&["new hampshire"]), 1.0, 1.0),
        ("Martin", golds(&["Martin Brest", "Brest"]), 0.0, 2.0 / 3.0),
        ("brest martin", golds(&["Martin Brest"]), 0.0, 1.0),
        ("x x", golds(&["x"]), 0.0, 2.0 / 3.0),
        ("", golds(&["neutron"]), 0.0, 0.0),
        ("the", golds(&["a"]), 1.0, 1.0),
        ("Live Free or Die!", golds(&["live free or die"]), 1.0, 1.0),
        ("alpha beta", golds(&["gamma delta"]), 0.0, 0.0),
    ];
    for (pred, gs, want_em, want_f1) in &cases {
        let em = exact_match(pred, gs);
        let f = f1(pred, gs);
        assert_eq!(em, *want_em, "EM for {pred:?} vs {gs:?}");
        assert!(
            (f - want_f1).abs() < 1e-12,
            "F1 for {pred:?} vs {gs:?}: got {f}, want {want_f1}"
        );
        assert!(f >= em - 1e-12, "F1 >= EM must hold");
    }
    // Normalization pin: lowercase, delete ASCII punctuation, strip
    // articles, collapse whitespace.
    assert_eq!(normalize_answer("The U.S.  state's   motto!"), "us states motto");
    println!("ACCEPTANCE 7 PASS: {} hand-computed EM/F1 fixtures", cases.len());
}

// ---------------------------------------------------------------------
// Criterion 8: end-to-end answer() on a 50-document corpus with an
// overfitted toy reader; >= 9/10 planted questions answered, aggregation
// demonstrably selecting across >= 2 retrieved documents.
// ---------------------------------------------------------------------

#[test]
fn c8_end_to_end_miniature_corpus() {
    use openqa_core::pipeline::{default_pipeline_reader_config, exact_match, Pipeline};
    use openqa_core::reader::{exact_match_rate, prepare_dataset, train, Regime, TrainOptions};

    let started = Instant::now();
    let topics = [
        ("crystal", "cavern", "obsidian"),
        ("desert", "caravan", "cinnabar"),
        ("harbor", "lantern", "kelp"),
        ("meadow", "beacon", "clover"),
        ("glacier", "summit", "quartz"),
        ("orchard", "valley", "pomelo"),
        ("canyon", "rapids", "basalt"),
        ("spruce", "trailhead", "amber"),
        ("island", "lagoon", "coral"),
        ("tundra", "plateau", "lichen"),
    ];

    // 10 answer documents whose single paragraph is exactly the training
    // paragraph, plus 40 fillers; one filler shares "crystal" with the
    // first question so retrieval returns two documents for it.
    let dir = tempfile::tempdir().unwrap();
    let mut store = DocStore::create(dir.path().join("e2e.store")).unwrap();
    let mut questions = Vec::new();
    let mut raw_training = Vec::new();
    for (i, (a, b, answer)) in topics.iter().enumerate() {
        let question = format!("what did the {a} {b} survey find");
        let paragraph =
            format!("the {a} {b} survey found mostly {answer} deposits during review");
        store
            .add(&Document {
                id: format!("qd{i:02}"),
                title: format!("Survey {i}"),
                text: paragraph.clone(),
            })
            .unwrap();
        questions.push((question.clone(), answer.to_string()));
        raw_training.push((question, paragraph, vec![(6usize, 6usize)]));
    }
    store
        .add(&Document {
            id: "shared".into(),
            title: "Crystal trade".into(),
            text: "crystal shipments moved through royal markets without surveys last winter."
                .into(),
        })
        .unwrap();
    for i in 0..39 {
        store
            .add(&Document {
                id: format!("f{i:02}"),
                title: format!("Archive {i}"),
                text: format!(
                    "unrelated entry covering parcel{i} and registry{i} notes for archive{i}."
                ),
            })
            .unwrap();
    }
    assert_eq!(store.len(), 50);
    let index = build_index(&store, IndexOptions::default()).unwrap();

    // Overfit a streamlined toy reader on the 10 planted examples.
    let mut vocab: Vec<String> = Vec::new();
    for (q, p, _) in &raw_training {
        for tok in tokenize(&format!("{q} {p}")).tokens {
            vocab.push(tok.lower);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xE2E);
    let embedding = EmbeddingTable::random(&vocab, 12, &mut rng);
    let config = ReaderConfig {
        layers: 1,
        hidden: 8,
        dropout: 0.0,
        learning_rate: 0.05,
        ..default_pipeline_reader_config()
    };
    let mut reader = Reader::new(config, embedding, Vec::new(), Vec::new(), 0xE2E).unwrap();
    let (examples, rejected) = prepare_dataset(raw_training.clone(), None);
    assert!(rejected.is_empty());
    for _ in 0..20 {
        train(
            &mut reader,
            std::slice::from_ref(&examples),
            Regime::Single,
            &TrainOptions {
                epochs: 10,
                seed: 0xE2E,
                select_trainable: true,
            },
        )
        .unwrap();
        if exact_match_rate(&reader, &examples).unwrap() == 1.0 {
            break;
        }
    }
    assert_eq!(exact_match_rate(&reader, &examples).unwrap(), 1.0);

    // Ask the full pipeline every planted question.
    let pipeline = Pipeline::new(&index, &store, &reader, 5);
    let mut hits = 0usize;
    for (question, gold) in &questions {
        if let Some(pred) = pipeline.answer(question).unwrap() {
            if exact_match(&pred.text, std::slice::from_ref(gold)) == 1.0 {
                hits += 1;
            }
        }
    }
    assert!(hits >= 9, "expected >= 9/10 planted answers, got {hits}/10");

    // Aggregation visibly selects across documents: question 0 retrieves
    // both its survey document and the "shared" crystal document.
    let (best, candidates) = pipeline.answer_detailed(&questions[0].0).unwrap();
    let mut docs_seen: Vec<&str> = candidates.iter().map(|p| p.doc_id.as_str()).collect();
    docs_seen.sort_unstable();
    docs_seen.dedup();
    assert!(
        docs_seen.len() >= 2,
        "aggregate must consider spans from >= 2 documents, saw {docs_seen:?}"
    );
    let best = best.unwrap();
    assert_eq!(best.doc_id, "qd00");
    assert_eq!(exact_match(&best.text, &[questions[0].1.clone()]), 1.0);

    let elapsed = started.elapsed();
    println!(
        "ACCEPTANCE 8 PASS: {hits}/10 planted answers, aggregation over {} documents for q0, {elapsed:?}",
        docs_seen.len()
    );
}

// ---------------------------------------------------------------------
// Criterion 9: paper-scale numbers are documented reference points, not
// reproduction targets; the suites above substitute property-based
// acceptance.
// ---------------------------------------------------------------------

#[test]
fn c9_reference_numbers_documented_not_reproduced() {
    let readme_path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md");
    let readme = std::fs::read_to_string(readme_path).expect("workspace README.md");
    for number in ["77.8", "70.0", "79.0", "27.1"] {
        assert!(
            readme.contains(number),
            "README must record the reference point {number}"
        );
    }
    assert!(
        readme.to_lowercase().contains("reference"),
        "README must state these are reference points"
    );
    println!("ACCEPTANCE 9 PASS: reference-scale numbers documented, not asserted");
}
