//! Variant-dispatching wrapper around the two scorers, plus checkpoint
//! metadata so a model can be rebuilt from its file alone.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Variant;
use crate::autodiff::{NodeId, Params, Tape};
use crate::corpus::Vocabulary;
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::esim::{EsimModel, ModelConfig, Score};
use crate::kesim::KesimModel;

/// One of the two scorers behind a common interface.
pub enum SelectionModel {
    Esim(EsimModel),
    Kesim(KesimModel),
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    variant: Variant,
    config: ModelConfig,
    vocab: Vec<String>,
    chars: Vec<char>,
    frozen_tables: bool,
}

impl SelectionModel {
    pub fn new(
        variant: Variant,
        cfg: ModelConfig,
        vocab: &Vocabulary,
        tables: Option<(EmbeddingTable, EmbeddingTable)>,
    ) -> Result<SelectionModel> {
        Ok(match variant {
            Variant::Esim => SelectionModel::Esim(EsimModel::new(cfg, vocab, tables)?),
            Variant::Kesim => SelectionModel::Kesim(KesimModel::new(cfg, vocab, tables)?),
        })
    }

    pub fn variant(&self) -> Variant {
        match self {
            SelectionModel::Esim(_) => Variant::Esim,
            SelectionModel::Kesim(_) => Variant::Kesim,
        }
    }

    pub fn cfg(&self) -> &ModelConfig {
        match self {
            SelectionModel::Esim(m) => &m.cfg,
            SelectionModel::Kesim(m) => &m.cfg,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        match self {
            SelectionModel::Esim(m) => &m.vocab,
            SelectionModel::Kesim(m) => &m.vocab,
        }
    }

    pub fn params(&self) -> &Params {
        match self {
            SelectionModel::Esim(m) => &m.params,
            SelectionModel::Kesim(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut Params {
        match self {
            SelectionModel::Esim(m) => &mut m.params,
            SelectionModel::Kesim(m) => &mut m.params,
        }
    }

    /// Scores one candidate on an existing tape. The pair scorer ignores
    /// knowledge; the knowledge scorer substitutes padding when it is
    /// absent.
    pub fn score_node(
        &self,
        tape: &mut Tape,
        context: &[String],
        response: &[String],
        knowledge: Option<&[String]>,
    ) -> Result<NodeId> {
        match self {
            SelectionModel::Esim(m) => m.score_node(tape, context, response),
            SelectionModel::Kesim(m) => m.score_node(tape, context, response, knowledge),
        }
    }

    pub fn score(
        &self,
        context: &[String],
        response: &[String],
        knowledge: Option<&[String]>,
    ) -> Result<f64> {
        let mut tape = Tape::new();
        let node = self.score_node(&mut tape, context, response, knowledge)?;
        Ok(Score::new(tape.value(node).get(0, 0)).value())
    }

    fn frozen_tables(&self) -> bool {
        // Trainable fallback (or finetuned) tables register emb.* params.
        self.params().id_of("emb.a").is_none()
    }

    /// Writes the parameter table with enough metadata (variant, config,
    /// vocabulary) to rebuild the model from the file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = CheckpointMeta {
            variant: self.variant(),
            config: self.cfg().clone(),
            vocab: self.vocab().tokens().to_vec(),
            chars: self.vocab().chars().to_vec(),
            frozen_tables: self.frozen_tables(),
        };
        let meta_json = serde_json::to_string(&meta).expect("metadata is serializable");
        self.params().save(path, &meta_json)
    }

    /// Rebuilds a model from a checkpoint. Models saved with frozen
    /// file-backed tables need the same tables supplied again; everything
    /// else lives in the parameter table.
    pub fn load(path: &Path, tables: Option<(EmbeddingTable, EmbeddingTable)>) -> Result<SelectionModel> {
        let (meta_json, tensors) = Params::load(path)?;
        let meta: CheckpointMeta = serde_json::from_str(&meta_json)
            .map_err(|e| Error::Checkpoint(format!("{}: bad metadata: {e}", path.display())))?;
        if meta.frozen_tables && tables.is_none() {
            return Err(Error::Checkpoint(format!(
                "{}: model was trained with frozen embedding tables; supply the same vector files",
                path.display()
            )));
        }
        let vocab = Vocabulary::from_parts(meta.vocab, meta.chars);
        let mut model = SelectionModel::new(meta.variant, meta.config, &vocab, tables)?;
        model.params_mut().restore(&tensors)?;
        Ok(model)
    }
}
