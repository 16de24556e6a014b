//! TOML configuration file shared by the CLI commands.
//!
//! Documented keys (all optional, with defaults):
//!
//! ```toml
//! [reader]            # ReaderConfig fields
//! layers = 3
//! hidden = 128
//! dropout = 0.3
//! max_span_len = 15
//! finetune_top_k = 1000
//! batch_size = 32
//! use_exact_match = true
//! use_token_features = false
//! use_align = true
//! use_lemma = true
//! learning_rate = 0.002
//! beta1 = 0.9
//! beta2 = 0.999
//! epsilon = 1e-8
//!
//! [train]
//! epochs = 10
//! seed = 1
//! embedding_dim = 64  # used when no embedding file is given
//!
//! [pipeline]
//! k = 5                       # retrieved documents per question
//! candidates = "list.txt"     # optional candidate-answer file, one per line
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reader::ReaderConfig;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ConfigFile {
    pub reader: ReaderConfig,
    pub train: TrainSection,
    pub pipeline: PipelineSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub epochs: usize,
    pub seed: u64,
    /// Embedding dimension for randomly initialized tables.
    pub embedding_dim: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            epochs: 10,
            seed: 1,
            embedding_dim: 64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSection {
    pub k: usize,
    pub candidates: Option<PathBuf>,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection {
            k: 5,
            candidates: None,
        }
    }
}

impl ConfigFile {
    pub fn load(path: impl AsRef<Path>) -> Result<ConfigFile> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ConfigFile =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.reader.validate()?;
        Ok(config)
    }
}

/// Reader configuration the full pipeline trains with by default: the
/// streamlined feature set (no token features, no lemma matching).
pub fn default_pipeline_reader_config() -> ReaderConfig {
    ReaderConfig::default().streamlined()
}
