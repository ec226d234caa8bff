//! Word representation layer: two word-vector tables plus a
//! character-composed BiLSTM embedding, concatenated per token.
//!
//! Vector files hold one token per line followed by its values. When no
//! files are supplied (synthetic corpora), both tables fall back to
//! trainable lookup tables of the same widths so the pipeline stays
//! runnable without external assets.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{NodeId, ParamId, Params, Tape, Tensor};
use crate::corpus::{Vocabulary, PAD_INDEX, PAD_TOKEN};
use crate::error::{Error, Result};
use crate::esim::{BiLstm, ModelConfig};

/// A frozen token-to-vector table loaded from a text file. Lookups of
/// absent tokens get a hash-seeded random vector that depends only on the
/// token and the global seed, so it is identical across runs.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// Parses `token v1 .. vd` lines. Duplicate tokens keep the first
    /// occurrence; a line with the wrong number of values is an error that
    /// names its line number.
    pub fn load(path: &Path, expected_dim: usize) -> Result<EmbeddingTable> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let reader = BufReader::new(file);
        let mut vectors = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().expect("non-empty line has a first field");
            let values: std::result::Result<Vec<f64>, _> = parts.map(|p| p.parse::<f64>()).collect();
            let values = values.map_err(|e| Error::Parse {
                path: path.display().to_string(),
                record: idx + 1,
                message: format!("bad number: {e}"),
            })?;
            if values.len() != expected_dim {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    record: idx + 1,
                    message: format!("expected {} values, got {}", expected_dim, values.len()),
                });
            }
            vectors.entry(token.to_string()).or_insert(values);
        }
        Ok(EmbeddingTable {
            dim: expected_dim,
            vectors,
        })
    }

    pub fn from_pairs(dim: usize, pairs: &[(&str, Vec<f64>)]) -> Result<EmbeddingTable> {
        let mut vectors = HashMap::new();
        for (token, values) in pairs {
            if values.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "vector for {token:?} has length {}, expected {dim}",
                    values.len()
                )));
            }
            vectors.entry(token.to_string()).or_insert_with(|| values.clone());
        }
        Ok(EmbeddingTable { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn lookup(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(|v| v.as_slice())
    }

    /// Stored vector, deterministic OOV vector, or zeros for padding.
    pub fn embed(&self, token: &str, seed: u64) -> Vec<f64> {
        if token == PAD_TOKEN {
            return vec![0.0; self.dim];
        }
        match self.vectors.get(token) {
            Some(v) => v.clone(),
            None => oov_vector(token, self.dim, seed),
        }
    }
}

/// Deterministic out-of-vocabulary vector: uniform(-0.05, 0.05) drawn from a
/// ChaCha stream seeded by the token hash mixed with the global seed.
pub fn oov_vector(token: &str, dim: usize, seed: u64) -> Vec<f64> {
    use rand::SeedableRng;
    let h = crate::fnv1a(token.as_bytes());
    let mut rng = ChaCha8Rng::seed_from_u64(h ^ seed.rotate_left(17));
    (0..dim).map(|_| rng.gen_range(-0.05..0.05)).collect()
}

enum TableSource {
    /// File-backed frozen vectors.
    Frozen(EmbeddingTable),
    /// Trainable lookup rows over the vocabulary.
    Trainable(ParamId),
}

/// Character-composed embedding: a BiLSTM over per-character embeddings,
/// emitting the concatenated forward and backward final states.
pub struct CharEncoder {
    table: ParamId,
    lstm: BiLstm,
    out_dim: usize,
}

impl CharEncoder {
    fn new(cfg: &ModelConfig, vocab: &Vocabulary, params: &mut Params, rng: &mut ChaCha8Rng) -> CharEncoder {
        let table = params.add_uniform("char.table", vocab.char_len(), cfg.char_emb_dim, rng);
        let lstm = BiLstm::new("char", cfg.char_emb_dim, cfg.char_dim / 2, params, rng);
        CharEncoder {
            table,
            lstm,
            out_dim: cfg.char_dim,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Runs the character BiLSTM over a non-empty token.
    pub fn compose(
        &self,
        tape: &mut Tape,
        params: &Params,
        vocab: &Vocabulary,
        token: &str,
    ) -> Result<NodeId> {
        if token.is_empty() {
            return Err(Error::InvalidArgument("cannot char-compose an empty token".to_string()));
        }
        let table = tape.param(params, self.table);
        let rows: Vec<NodeId> = token
            .chars()
            .map(|c| tape.row(table, vocab.char_index(c)))
            .collect::<Result<_>>()?;
        let chars = tape.vcat(&rows)?;
        let encoded = self.lstm.run(tape, params, chars)?;
        Ok(encoded.final_state)
    }
}

/// Composes per-token input vectors: `[table_a; table_b; char]`, in that
/// fixed order.
pub struct WordReprLayer {
    table_a: TableSource,
    table_b: TableSource,
    pub char_encoder: CharEncoder,
    vocab: Vocabulary,
    dim_a: usize,
    dim_b: usize,
    seed: u64,
}

impl WordReprLayer {
    pub fn new(
        cfg: &ModelConfig,
        vocab: &Vocabulary,
        tables: Option<(EmbeddingTable, EmbeddingTable)>,
        params: &mut Params,
        rng: &mut ChaCha8Rng,
    ) -> Result<WordReprLayer> {
        let (table_a, table_b) = match tables {
            Some((a, b)) => {
                if a.dim() != cfg.emb_dim_a || b.dim() != cfg.emb_dim_b {
                    return Err(Error::Config(format!(
                        "embedding table dims ({}, {}) do not match config ({}, {})",
                        a.dim(),
                        b.dim(),
                        cfg.emb_dim_a,
                        cfg.emb_dim_b
                    )));
                }
                if cfg.finetune_pretrained {
                    (
                        TableSource::Trainable(init_from_table("emb.a", &a, vocab, cfg.seed, params)),
                        TableSource::Trainable(init_from_table("emb.b", &b, vocab, cfg.seed, params)),
                    )
                } else {
                    (TableSource::Frozen(a), TableSource::Frozen(b))
                }
            }
            None => (
                TableSource::Trainable(params.add_uniform("emb.a", vocab.len(), cfg.emb_dim_a, rng)),
                TableSource::Trainable(params.add_uniform("emb.b", vocab.len(), cfg.emb_dim_b, rng)),
            ),
        };
        let char_encoder = CharEncoder::new(cfg, vocab, params, rng);
        Ok(WordReprLayer {
            table_a,
            table_b,
            char_encoder,
            vocab: vocab.clone(),
            dim_a: cfg.emb_dim_a,
            dim_b: cfg.emb_dim_b,
            seed: cfg.seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.dim_a + self.dim_b + self.char_encoder.out_dim()
    }

    fn word_part(
        &self,
        tape: &mut Tape,
        params: &Params,
        source: &TableSource,
        dim: usize,
        token: &str,
    ) -> Result<NodeId> {
        match source {
            TableSource::Frozen(table) => Ok(tape.leaf(Tensor::row_vector(table.embed(token, self.seed)))),
            TableSource::Trainable(pid) => {
                if token == PAD_TOKEN {
                    // padding stays a zero constant, not a trained row
                    return Ok(tape.leaf(Tensor::zeros(1, dim)));
                }
                let node = tape.param(params, *pid);
                tape.row(node, self.vocab.token_index(token))
            }
        }
    }

    /// One token's representation `[a; b; char]`, width `input_dim()`.
    pub fn compose_token(&self, tape: &mut Tape, params: &Params, token: &str) -> Result<NodeId> {
        let a = self.word_part(tape, params, &self.table_a, self.dim_a, token)?;
        let b = self.word_part(tape, params, &self.table_b, self.dim_b, token)?;
        let ch = self.char_encoder.compose(tape, params, &self.vocab, token)?;
        tape.hcat(&[a, b, ch])
    }

    /// Stacks per-token representations into a `len x input_dim` matrix.
    /// Repeated tokens share nodes through `cache`, which also makes their
    /// gradients accumulate once per distinct token.
    pub fn compose(
        &self,
        tape: &mut Tape,
        params: &Params,
        tokens: &[String],
        cache: &mut HashMap<String, NodeId>,
    ) -> Result<NodeId> {
        if tokens.is_empty() {
            return Err(Error::shape("word_repr", "empty token sequence"));
        }
        let mut rows = Vec::with_capacity(tokens.len());
        for token in tokens {
            let node = match cache.get(token) {
                Some(&n) => n,
                None => {
                    let n = self.compose_token(tape, params, token)?;
                    cache.insert(token.clone(), n);
                    n
                }
            };
            rows.push(node);
        }
        tape.vcat(&rows)
    }
}

fn init_from_table(
    name: &str,
    table: &EmbeddingTable,
    vocab: &Vocabulary,
    seed: u64,
    params: &mut Params,
) -> ParamId {
    let mut init = Tensor::zeros(vocab.len(), table.dim());
    for (i, token) in vocab.tokens().iter().enumerate() {
        if i == PAD_INDEX {
            continue;
        }
        init.row_mut(i).copy_from_slice(&table.embed(token, seed));
    }
    params.add(name, init)
}
