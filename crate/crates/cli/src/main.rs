//! Command-line interface: ingest a corpus, build and query the TF-IDF
//! index, construct distant-supervision data, train the reader, answer
//! questions and evaluate.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use openqa_core::corpus::{ingest, DocStore};
use openqa_core::dsbuilder::{build_ds, DSExample, QAPair};
use openqa_core::pipeline::{
    char_span_to_token_span, eval_retrieval, evaluate, evaluate_gold, load_candidates,
    load_dataset, ConfigFile, EvalMode, ParagraphReader, Pipeline,
};
use openqa_core::reader::{
    prepare_dataset, train, EmbeddingTable, RawExample, Reader, Regime, TrainOptions,
};
use openqa_core::retriever::{build_index, IndexOptions, NgramMode, TfidfIndex};
use openqa_core::textproc::{tokenize, DefaultAnnotator};

#[derive(Parser)]
#[command(name = "openqa", about = "Open-domain question answering pipeline", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a line-delimited JSON corpus into a document store.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        store: PathBuf,
    },
    /// Build the hashed TF-IDF index over a document store.
    BuildIndex {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 24)]
        hash_bits: u32,
        #[arg(long, default_value_t = 0)]
        seed: u32,
        /// Index unigrams only (ablation mode; default indexes bigrams too).
        #[arg(long)]
        unigrams_only: bool,
    },
    /// Query the index; prints ranked documents as JSON lines.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        question: String,
    },
    /// Build distant-supervision training data from question/answer pairs.
    BuildDs {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Enable the named-entity question filter via the default annotator.
        #[arg(long)]
        with_annotator: bool,
    },
    /// Train the reader on DS and/or SQuAD-format data.
    TrainReader(TrainReaderArgs),
    /// Answer a single question with the full pipeline.
    Predict(AskArgs),
    /// Alias of `predict` driven by the config file's pipeline section.
    Answer(AskArgs),
    /// Evaluate EM/F1 over a dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Full)]
        mode: ModeArg,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a question-id -> answer JSON map here.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Top-k answer recall of the retriever over question/answer pairs.
    EvalRetrieval {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
}

#[derive(Args)]
struct TrainReaderArgs {
    /// DS training files (repeatable; JSON lines with question, paragraph,
    /// answer_spans).
    #[arg(long = "data")]
    data: Vec<PathBuf>,
    /// SQuAD-format training file.
    #[arg(long)]
    squad: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RegimeArg::Single)]
    regime: RegimeArg,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pretrained text embeddings (token then values, one per line).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Continue from an existing checkpoint (required for finetune).
    #[arg(long)]
    init_model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Override the config file's epoch count.
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the config file's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AskArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Candidate answers, one per line; spans outside the list are ignored.
    #[arg(long)]
    candidates: Option<PathBuf>,
    #[arg(long)]
    question: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Single,
    Finetune,
    Multitask,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Regime {
        match r {
            RegimeArg::Single => Regime::Single,
            RegimeArg::Finetune => Regime::Finetune,
            RegimeArg::Multitask => Regime::Multitask,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    GoldDoc,
    ReaderOnly,
}

impl From<ModeArg> for EvalMode {
    fn from(m: ModeArg) -> EvalMode {
        match m {
            ModeArg::Full => EvalMode::Full,
            ModeArg::GoldDoc => EvalMode::GoldDoc,
            ModeArg::ReaderOnly => EvalMode::ReaderOnly,
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ingest { corpus, store } => cmd_ingest(corpus, store),
        Command::BuildIndex {
            store,
            out,
            hash_bits,
            seed,
            unigrams_only,
        } => cmd_build_index(store, out, hash_bits, seed, unigrams_only),
        Command::Query { index, k, question } => cmd_query(index, k, &question),
        Command::BuildDs {
            index,
            store,
            input,
            out,
            with_annotator,
        } => cmd_build_ds(index, store, input, out, with_annotator),
        Command::TrainReader(args) => cmd_train_reader(args),
        Command::Predict(args) | Command::Answer(args) => cmd_answer(args),
        Command::Evaluate {
            model,
            index,
            store,
            dataset,
            mode,
            config,
            out,
            predictions,
        } => cmd_evaluate(model, index, store, dataset, mode.into(), config, out, predictions),
        Command::EvalRetrieval {
            index,
            store,
            input,
            k,
        } => cmd_eval_retrieval(index, store, input, k),
    }
}

fn cmd_ingest(corpus: PathBuf, store_path: PathBuf) -> Result<()> {
    let mut store = DocStore::create(&store_path)
        .with_context(|| format!("creating store {}", store_path.display()))?;
    let report = ingest(&corpus, &mut store)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn cmd_build_index(
    store_path: PathBuf,
    out: PathBuf,
    hash_bits: u32,
    seed: u32,
    unigrams_only: bool,
) -> Result<()> {
    let store = DocStore::open(&store_path)?;
    let index = build_index(
        &store,
        IndexOptions {
            hash_bits,
            seed,
            mode: if unigrams_only {
                NgramMode::Unigrams
            } else {
                NgramMode::UnigramsAndBigrams
            },
        },
    )?;
    index.save(&out)?;
    println!(
        "{}",
        json!({
            "documents": index.num_docs(),
            "hash_bits": hash_bits,
            "unigrams_only": unigrams_only,
            "out": out,
        })
    );
    Ok(())
}

fn cmd_query(index_path: PathBuf, k: usize, question: &str) -> Result<()> {
    let index = TfidfIndex::load(&index_path)?;
    for (rank, (doc_id, score)) in index.top_k(question, k).into_iter().enumerate() {
        println!(
            "{}",
            json!({"rank": rank + 1, "doc_id": doc_id, "score": score})
        );
    }
    Ok(())
}

fn cmd_build_ds(
    index_path: PathBuf,
    store_path: PathBuf,
    input: PathBuf,
    out: PathBuf,
    with_annotator: bool,
) -> Result<()> {
    let index = TfidfIndex::load(&index_path)?;
    let store = DocStore::open(&store_path)?;
    let annotator = DefaultAnnotator;
    // Accepts {question, answers} JSONL or SQuAD-format JSON; the latter
    // distantly re-labels SQuAD questions against the whole corpus.
    let questions = load_dataset(&input)?;
    let mut writer = BufWriter::new(
        File::create(&out).with_context(|| format!("creating {}", out.display()))?,
    );

    let mut pairs = 0usize;
    let mut kept = 0usize;
    let mut discarded = 0usize;
    for question in &questions {
        let qa: QAPair = question.qa_pair();
        pairs += 1;
        let examples = build_ds(
            &qa,
            &index,
            &store,
            if with_annotator {
                Some(&annotator)
            } else {
                None
            },
        )?;
        if examples.is_empty() {
            discarded += 1;
        }
        for ex in examples {
            writeln!(writer, "{}", serde_json::to_string(&ex)?)?;
            kept += 1;
        }
    }
    writer.flush()?;
    eprintln!(
        "{}",
        json!({"pairs": pairs, "examples": kept, "discarded_pairs": discarded})
    );
    Ok(())
}

fn load_ds_examples(path: &PathBuf) -> Result<Vec<RawExample>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut raw = Vec::new();
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: DSExample = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}", path.display(), line_no + 1))?;
        raw.push((ex.question, ex.paragraph, ex.answer_spans));
    }
    Ok(raw)
}

fn load_squad_examples(path: &PathBuf) -> Result<Vec<RawExample>> {
    let questions = load_dataset(path)?;
    let mut raw = Vec::new();
    for q in questions {
        let Some(paragraph) = q.paragraph else {
            continue;
        };
        let tt = tokenize(&paragraph);
        let mut spans = Vec::new();
        for (answer, start) in q.answers.iter().zip(&q.answer_starts) {
            if let Some(&Some(start)) = Some(start) {
                if let Some(span) = char_span_to_token_span(&tt, start, start + answer.len()) {
                    spans.push(span);
                }
            }
        }
        if !spans.is_empty() {
            spans.sort_unstable();
            spans.dedup();
            raw.push((q.question, paragraph, spans));
        }
    }
    Ok(raw)
}

fn cmd_train_reader(args: TrainReaderArgs) -> Result<()> {
    let config_file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let regime: Regime = args.regime.into();
    if regime == Regime::Finetune && args.init_model.is_none() {
        bail!("--regime finetune requires --init-model");
    }

    // Assemble sources: DS files plus the optional SQuAD file.
    let mut raw_sources: Vec<Vec<RawExample>> = Vec::new();
    for path in &args.data {
        raw_sources.push(load_ds_examples(path)?);
    }
    if let Some(squad) = &args.squad {
        raw_sources.push(load_squad_examples(squad)?);
    }
    if raw_sources.is_empty() {
        bail!("no training data: pass --data and/or --squad");
    }

    let annotator = DefaultAnnotator;
    let use_annotator = match &args.init_model {
        Some(_) => true, // checkpoint layout decides which fields matter
        None => config_file.reader.use_lemma,
    };
    let mut sources = Vec::new();
    let mut rejected_total = 0usize;
    for raw in raw_sources {
        let (examples, rejected) = prepare_dataset(
            raw,
            if use_annotator {
                Some(&annotator)
            } else {
                None
            },
        );
        for (i, reason) in &rejected {
            eprintln!("rejected example {i}: {reason}");
        }
        rejected_total += rejected.len();
        sources.push(examples);
    }

    let mut reader = match &args.init_model {
        Some(path) => Reader::load(path)?,
        None => {
            // Vocabulary from all training text, randomly initialized unless
            // an embedding file is given.
            let embedding = match &args.embeddings {
                Some(path) => EmbeddingTable::load_text(path, config_file.train.embedding_dim)?,
                None => {
                    let mut vocab = Vec::new();
                    for source in &sources {
                        for ex in source {
                            for tok in &ex.question.tokens {
                                vocab.push(tok.lower.clone());
                            }
                            for tok in &ex.paragraph.tokens {
                                vocab.push(tok.lower.clone());
                            }
                        }
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(
                        args.seed.unwrap_or(config_file.train.seed),
                    );
                    EmbeddingTable::random(&vocab, config_file.train.embedding_dim, &mut rng)
                }
            };
            Reader::new(
                config_file.reader.clone(),
                embedding,
                Vec::new(),
                Vec::new(),
                args.seed.unwrap_or(config_file.train.seed),
            )?
        }
    };

    let opts = TrainOptions {
        epochs: args.epochs.unwrap_or(config_file.train.epochs),
        seed: args.seed.unwrap_or(config_file.train.seed),
        select_trainable: args.init_model.is_none(),
    };
    let report = train(&mut reader, &sources, regime, &opts)?;
    reader.save(&args.out)?;
    println!(
        "{}",
        json!({
            "examples": sources.iter().map(|s| s.len()).sum::<usize>(),
            "rejected": rejected_total,
            "epochs": opts.epochs,
            "loss_curve": report.epoch_losses,
            "model": args.out,
        })
    );
    Ok(())
}

fn build_pipeline<'a>(
    index: &'a TfidfIndex,
    store: &'a DocStore,
    reader: &'a Reader,
    k: usize,
    candidates: Option<HashSet<String>>,
) -> Pipeline<'a> {
    let mut pipeline = Pipeline::new(index, store, reader, k);
    if let Some(c) = candidates {
        pipeline = pipeline.with_candidates(c);
    }
    pipeline
}

fn cmd_answer(args: AskArgs) -> Result<()> {
    let config = match &args.config {
        Some(path) => Some(ConfigFile::load(path)?),
        None => None,
    };
    let k = config.as_ref().map(|c| c.pipeline.k).unwrap_or(args.k);
    let candidates_path = args
        .candidates
        .clone()
        .or_else(|| config.as_ref().and_then(|c| c.pipeline.candidates.clone()));
    let candidates = candidates_path.map(load_candidates).transpose()?;

    let index = TfidfIndex::load(&args.index)?;
    let store = DocStore::open(&args.store)?;
    let reader = Reader::load(&args.model)?;
    let pipeline = build_pipeline(&index, &store, &reader, k, candidates);

    match pipeline.answer(&args.question)? {
        Some(pred) => println!(
            "{}",
            json!({
                "question": args.question,
                "answer": pred.text,
                "doc_id": pred.doc_id,
                "paragraph": pred.paragraph,
                "span": [pred.span.0, pred.span.1],
                "score": pred.score(),
                "log_score": pred.log_score,
            })
        ),
        None => println!("{}", json!({"question": args.question, "answer": null})),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    model: PathBuf,
    index_path: Option<PathBuf>,
    store_path: Option<PathBuf>,
    dataset_path: PathBuf,
    mode: EvalMode,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    predictions_out: Option<PathBuf>,
) -> Result<()> {
    let config = match &config {
        Some(path) => Some(ConfigFile::load(path)?),
        None => None,
    };
    let k = config.as_ref().map(|c| c.pipeline.k).unwrap_or(5);
    let candidates = config
        .as_ref()
        .and_then(|c| c.pipeline.candidates.clone())
        .map(load_candidates)
        .transpose()?;

    let reader = Reader::load(&model)?;
    let questions = load_dataset(&dataset_path)?;
    let dataset_name = dataset_path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "dataset".to_string());

    let report = match mode {
        EvalMode::Full => {
            let (Some(index_path), Some(store_path)) = (index_path, store_path) else {
                bail!("--mode full requires --index and --store");
            };
            let index = TfidfIndex::load(&index_path)?;
            let store = DocStore::open(&store_path)?;
            let pipeline = build_pipeline(&index, &store, &reader, k, candidates);
            evaluate(&pipeline, &dataset_name, &questions, mode)?
        }
        EvalMode::GoldDoc | EvalMode::ReaderOnly => {
            let mut gold_reader = ParagraphReader::new(&reader);
            if let Some(c) = candidates {
                gold_reader = gold_reader.with_candidates(c);
            }
            evaluate_gold(&gold_reader, &dataset_name, &questions, mode)?
        }
    };

    if let Some(path) = predictions_out {
        let map: serde_json::Map<String, serde_json::Value> = report
            .per_question
            .iter()
            .map(|r| {
                (
                    r.id.clone(),
                    r.prediction
                        .clone()
                        .map(serde_json::Value::String)
                        .unwrap_or(serde_json::Value::Null),
                )
            })
            .collect();
        std::fs::write(&path, serde_json::to_string_pretty(&map)?)?;
    }

    let payload = serde_json::to_string_pretty(&report)?;
    match out {
        Some(path) => {
            std::fs::write(&path, payload)?;
            println!(
                "{}",
                json!({
                    "dataset": report.dataset,
                    "mode": report.mode,
                    "exact_match": report.exact_match,
                    "f1": report.f1,
                    "top_k_recall": report.top_k_recall,
                    "report": path,
                })
            );
        }
        None => println!("{payload}"),
    }
    Ok(())
}

fn cmd_eval_retrieval(
    index_path: PathBuf,
    store_path: PathBuf,
    input: PathBuf,
    k: usize,
) -> Result<()> {
    let index = TfidfIndex::load(&index_path)?;
    let store = DocStore::open(&store_path)?;
    let questions = load_dataset(&input)?;
    let eval = eval_retrieval(&questions, &index, &store, k)?;
    println!(
        "{}",
        json!({"k": eval.k, "total": eval.total, "hits": eval.hits, "recall": eval.recall})
    );
    Ok(())
}
