//! Baseline co-attention scorer for (context, response) pairs.
//!
//! The pipeline is: shared-weight BiLSTM encoding of both sequences,
//! bidirectional co-attention, enrichment with difference and element-wise
//! product blocks, a second BiLSTM aggregation, max/final-state pooling, and
//! a two-layer ReLU prediction head ending in a sigmoid. The output is
//! `P(y=1 | context, response)`, the confidence that the response is the
//! correct next utterance.

use rand_chacha::ChaCha8Rng;

use crate::autodiff::{NodeId, ParamId, Params, Tape, Tensor};
use crate::corpus::{truncate_context, Vocabulary, PAD_TOKEN};
use crate::embedding::{EmbeddingTable, WordReprLayer};
use crate::error::{Error, Result};

/// Model dimensions and flags. Defaults are the full-scale profile
/// (300+100+80 inputs, hidden 200, 256-unit prediction head).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    /// Per-direction hidden units of both BiLSTMs.
    pub hidden: usize,
    /// Hidden units of the prediction head.
    pub mlp_hidden: usize,
    /// First word-embedding table width.
    pub emb_dim_a: usize,
    /// Second word-embedding table width.
    pub emb_dim_b: usize,
    /// Character-composed embedding width (split across two directions).
    pub char_dim: usize,
    /// Width of per-character embeddings fed to the char BiLSTM.
    pub char_emb_dim: usize,
    /// Contexts longer than this keep their most recent tokens.
    pub max_context_len: usize,
    /// Knowledge snippets longer than this keep their leading tokens.
    pub max_knowledge_len: usize,
    /// Give the knowledge stream its own encoder instead of sharing weights.
    pub untie_knowledge_encoder: bool,
    /// Update file-loaded embedding vectors during training.
    pub finetune_pretrained: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: 200,
            mlp_hidden: 256,
            emb_dim_a: 300,
            emb_dim_b: 100,
            char_dim: 80,
            char_emb_dim: 20,
            max_context_len: 400,
            max_knowledge_len: 200,
            untie_knowledge_encoder: false,
            finetune_pretrained: false,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Small dimensions for CPU-scale experiments.
    pub fn desk() -> Self {
        ModelConfig {
            hidden: 16,
            mlp_hidden: 32,
            emb_dim_a: 24,
            emb_dim_b: 8,
            char_dim: 16,
            char_emb_dim: 8,
            ..ModelConfig::default()
        }
    }

    /// Tiny dimensions for gradient checking.
    pub fn tiny() -> Self {
        ModelConfig {
            hidden: 4,
            mlp_hidden: 6,
            emb_dim_a: 6,
            emb_dim_b: 4,
            char_dim: 4,
            char_emb_dim: 3,
            ..ModelConfig::default()
        }
    }

    pub fn input_dim(&self) -> usize {
        self.emb_dim_a + self.emb_dim_b + self.char_dim
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden", self.hidden),
            ("mlp_hidden", self.mlp_hidden),
            ("emb_dim_a", self.emb_dim_a),
            ("emb_dim_b", self.emb_dim_b),
            ("char_dim", self.char_dim),
            ("char_emb_dim", self.char_emb_dim),
            ("max_context_len", self.max_context_len),
            ("max_knowledge_len", self.max_knowledge_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.char_dim % 2 != 0 {
            return Err(Error::Config("char_dim must be even (two directions)".to_string()));
        }
        Ok(())
    }
}

struct LstmDirection {
    wx: ParamId,
    wh: ParamId,
    b: ParamId,
}

impl LstmDirection {
    fn new(prefix: &str, input_dim: usize, hidden: usize, params: &mut Params, rng: &mut ChaCha8Rng) -> Self {
        let wx = params.add_uniform(&format!("{prefix}.wx"), input_dim, 4 * hidden, rng);
        let wh = params.add_uniform(&format!("{prefix}.wh"), hidden, 4 * hidden, rng);
        // Forget-gate bias starts at 1.0, everything else at zero.
        let mut bias = Tensor::zeros(1, 4 * hidden);
        for c in hidden..2 * hidden {
            bias.set(0, c, 1.0);
        }
        let b = params.add(&format!("{prefix}.b"), bias);
        LstmDirection { wx, wh, b }
    }

    /// One step: gates in [input, forget, candidate, output] order.
    fn step(
        &self,
        tape: &mut Tape,
        params: &Params,
        hidden: usize,
        x: NodeId,
        h: NodeId,
        c: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let wx = tape.param(params, self.wx);
        let wh = tape.param(params, self.wh);
        let b = tape.param(params, self.b);
        let xw = tape.matmul(x, wx)?;
        let hw = tape.matmul(h, wh)?;
        let z0 = tape.add(xw, hw)?;
        let z = tape.add(z0, b)?;
        let zi = tape.slice_cols(z, 0, hidden)?;
        let zf = tape.slice_cols(z, hidden, 2 * hidden)?;
        let zg = tape.slice_cols(z, 2 * hidden, 3 * hidden)?;
        let zo = tape.slice_cols(z, 3 * hidden, 4 * hidden)?;
        let i = tape.sigmoid(zi);
        let f = tape.sigmoid(zf);
        let g = tape.tanh(zg);
        let o = tape.sigmoid(zo);
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_next = tape.add(fc, ig)?;
        let c_tanh = tape.tanh(c_next);
        let h_next = tape.mul(o, c_tanh)?;
        Ok((h_next, c_next))
    }
}

/// Bidirectional LSTM over a sequence of row vectors.
pub struct BiLstm {
    hidden: usize,
    fwd: LstmDirection,
    bwd: LstmDirection,
}

impl BiLstm {
    pub fn new(prefix: &str, input_dim: usize, hidden: usize, params: &mut Params, rng: &mut ChaCha8Rng) -> Self {
        BiLstm {
            hidden,
            fwd: LstmDirection::new(&format!("{prefix}.fwd"), input_dim, hidden, params, rng),
            bwd: LstmDirection::new(&format!("{prefix}.bwd"), input_dim, hidden, params, rng),
        }
    }

    /// Per-direction hidden width; encoded rows have width `2 * hidden()`.
    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Runs both directions over the rows of `input` (`len x input_dim`).
    pub fn run(&self, tape: &mut Tape, params: &Params, input: NodeId) -> Result<EncodedSeq> {
        let len = tape.value(input).rows();
        if len == 0 {
            return Err(Error::shape("bilstm", "zero-length sequence"));
        }
        let rows: Vec<NodeId> = (0..len).map(|t| tape.row(input, t)).collect::<Result<_>>()?;

        let zero = tape.leaf(Tensor::zeros(1, self.hidden));
        let mut h = zero;
        let mut c = zero;
        let mut fwd_states = Vec::with_capacity(len);
        for &x in &rows {
            let (hn, cn) = self.fwd.step(tape, params, self.hidden, x, h, c)?;
            h = hn;
            c = cn;
            fwd_states.push(h);
        }

        let mut h = zero;
        let mut c = zero;
        let mut bwd_states = vec![zero; len];
        for t in (0..len).rev() {
            let (hn, cn) = self.bwd.step(tape, params, self.hidden, rows[t], h, c)?;
            h = hn;
            c = cn;
            bwd_states[t] = h;
        }

        let mut joined = Vec::with_capacity(len);
        for t in 0..len {
            joined.push(tape.hcat(&[fwd_states[t], bwd_states[t]])?);
        }
        let seq = tape.vcat(&joined)?;
        // Forward direction finishes at the last position, backward at the first.
        let final_state = tape.hcat(&[fwd_states[len - 1], bwd_states[0]])?;
        Ok(EncodedSeq {
            seq,
            final_state,
            width: 2 * self.hidden,
        })
    }
}

/// Two-layer ReLU feed-forward head producing one logit.
pub struct Mlp {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

impl Mlp {
    pub fn new(prefix: &str, input_dim: usize, hidden: usize, params: &mut Params, rng: &mut ChaCha8Rng) -> Self {
        Mlp {
            w1: params.add_uniform(&format!("{prefix}.w1"), input_dim, hidden, rng),
            b1: params.add_zeros(&format!("{prefix}.b1"), 1, hidden),
            w2: params.add_uniform(&format!("{prefix}.w2"), hidden, 1, rng),
            b2: params.add_zeros(&format!("{prefix}.b2"), 1, 1),
        }
    }

    pub fn logit(&self, tape: &mut Tape, params: &Params, v: NodeId) -> Result<NodeId> {
        let w1 = tape.param(params, self.w1);
        let b1 = tape.param(params, self.b1);
        let w2 = tape.param(params, self.w2);
        let b2 = tape.param(params, self.b2);
        let z1 = tape.matmul(v, w1)?;
        let z1 = tape.add(z1, b1)?;
        let a1 = tape.relu(z1);
        let z2 = tape.matmul(a1, w2)?;
        tape.add(z2, b2)
    }
}

/// A sequence encoded by a BiLSTM: per-position states (`len x 2h`) and the
/// concatenated forward/backward final states (`1 x 2h`).
#[derive(Debug, Clone, Copy)]
pub struct EncodedSeq {
    pub seq: NodeId,
    pub final_state: NodeId,
    pub width: usize,
}

/// Bidirectional attention between two encoded sequences.
#[derive(Debug, Clone, Copy)]
pub struct CoAttention {
    /// Similarity matrix `m x n`.
    pub scores: NodeId,
    /// Row-stochastic weights over response positions, `m x n`.
    pub weights_ab: NodeId,
    /// Row-stochastic weights over context positions, `n x m`.
    pub weights_ba: NodeId,
    /// Attended view of the second sequence for each first-sequence position.
    pub attended_a: NodeId,
    /// Attended view of the first sequence for each second-sequence position.
    pub attended_b: NodeId,
}

/// Pooled fixed vector `[max_a; max_b; last_a; last_b]`, width `8h`.
#[derive(Debug, Clone, Copy)]
pub struct Pooled {
    pub v: NodeId,
}

/// Probability that a response is the correct next utterance.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Score(f64);

impl Score {
    /// Clamps into the open unit interval; sigmoid saturation can otherwise
    /// round to exactly 0.0 or 1.0 in 64-bit floats.
    pub fn new(p: f64) -> Score {
        Score(p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Encodes a representation matrix with a BiLSTM; row `i` is the
/// concatenation of the forward and backward states at position `i`.
pub fn bilstm_encode(
    tape: &mut Tape,
    params: &Params,
    encoder: &BiLstm,
    reprs: NodeId,
) -> Result<EncodedSeq> {
    encoder.run(tape, params, reprs)
}

/// Bidirectional co-attention: `scores[i][j] = a_i . b_j`, each side then
/// attends over the other with row-wise softmax weights.
pub fn co_attend(tape: &mut Tape, a: &EncodedSeq, b: &EncodedSeq) -> Result<CoAttention> {
    if a.width != b.width {
        return Err(Error::shape(
            "co_attend",
            format!("width {} vs {}", a.width, b.width),
        ));
    }
    let scores = tape.matmul_nt(a.seq, b.seq)?;
    let weights_ab = tape.softmax_rows(scores);
    let scores_t = tape.transpose(scores);
    let weights_ba = tape.softmax_rows(scores_t);
    let attended_a = tape.matmul(weights_ab, b.seq)?;
    let attended_b = tape.matmul(weights_ba, a.seq)?;
    Ok(CoAttention {
        scores,
        weights_ab,
        weights_ba,
        attended_a,
        attended_b,
    })
}

/// Interaction enrichment: `[orig; attended; orig - attended; orig ⊙ attended]`.
pub fn enrich(tape: &mut Tape, orig: NodeId, attended: NodeId) -> Result<NodeId> {
    if tape.value(orig).shape() != tape.value(attended).shape() {
        return Err(Error::shape(
            "enrich",
            format!(
                "{:?} vs {:?}",
                tape.value(orig).shape(),
                tape.value(attended).shape()
            ),
        ));
    }
    let diff = tape.sub(orig, attended)?;
    let prod = tape.mul(orig, attended)?;
    tape.hcat(&[orig, attended, diff, prod])
}

/// Pools one aggregated sequence into `[max-over-time; final-state]` (`1 x 4h`).
pub fn pool_stream(tape: &mut Tape, encoded: &EncodedSeq) -> Result<NodeId> {
    let max = tape.max_over_rows(encoded.seq);
    tape.hcat(&[max, encoded.final_state])
}

/// Runs the aggregation BiLSTM over both enriched sequences and assembles
/// `v = [max_a; max_b; last_a; last_b]`.
pub fn aggregate_and_pool(
    tape: &mut Tape,
    params: &Params,
    aggregator: &BiLstm,
    m_a: NodeId,
    m_b: NodeId,
) -> Result<Pooled> {
    let va = aggregator.run(tape, params, m_a)?;
    let vb = aggregator.run(tape, params, m_b)?;
    let max_a = tape.max_over_rows(va.seq);
    let max_b = tape.max_over_rows(vb.seq);
    let v = tape.hcat(&[max_a, max_b, va.final_state, vb.final_state])?;
    Ok(Pooled { v })
}

/// Prediction layer: `sigmoid(W2 relu(W1 v + b1) + b2)`.
pub fn score(tape: &mut Tape, params: &Params, mlp: &Mlp, pooled: &Pooled) -> Result<NodeId> {
    let logit = mlp.logit(tape, params, pooled.v)?;
    Ok(tape.sigmoid(logit))
}

/// Mean binary cross-entropy over scalar score nodes.
pub fn bce_loss(tape: &mut Tape, scores: &[NodeId], labels: &[f64]) -> Result<NodeId> {
    tape.bce_loss(scores, labels)
}

/// The baseline pair scorer with all of its parameters.
pub struct EsimModel {
    pub cfg: ModelConfig,
    pub vocab: Vocabulary,
    pub params: Params,
    pub repr: WordReprLayer,
    pub enc: BiLstm,
    pub agg: BiLstm,
    pub mlp: Mlp,
}

impl EsimModel {
    /// Builds a model with seeded parameter initialization. When embedding
    /// tables are given they are frozen (unless `finetune_pretrained`);
    /// otherwise trainable lookup tables of the same widths are created over
    /// the vocabulary.
    pub fn new(
        cfg: ModelConfig,
        vocab: &Vocabulary,
        tables: Option<(EmbeddingTable, EmbeddingTable)>,
    ) -> Result<EsimModel> {
        cfg.validate()?;
        let mut params = Params::new();
        let mut rng = crate::seeded_rng(cfg.seed);
        let repr = WordReprLayer::new(&cfg, vocab, tables, &mut params, &mut rng)?;
        let enc = BiLstm::new("enc", cfg.input_dim(), cfg.hidden, &mut params, &mut rng);
        let agg = BiLstm::new("agg", 8 * cfg.hidden, cfg.hidden, &mut params, &mut rng);
        let mlp = Mlp::new("mlp", 8 * cfg.hidden, cfg.mlp_hidden, &mut params, &mut rng);
        Ok(EsimModel {
            cfg,
            vocab: vocab.clone(),
            params,
            repr,
            enc,
            agg,
            mlp,
        })
    }

    /// Scores one pair on an existing tape, returning the probability node.
    pub fn score_node(
        &self,
        tape: &mut Tape,
        context: &[String],
        response: &[String],
    ) -> Result<NodeId> {
        let context = truncate_context(context, self.cfg.max_context_len);
        let mut cache = std::collections::HashMap::new();
        let ctx_repr = self.repr.compose(tape, &self.params, context, &mut cache)?;
        let resp_repr = self.repr.compose(tape, &self.params, response, &mut cache)?;
        let a_bar = bilstm_encode(tape, &self.params, &self.enc, ctx_repr)?;
        let b_bar = bilstm_encode(tape, &self.params, &self.enc, resp_repr)?;
        let att = co_attend(tape, &a_bar, &b_bar)?;
        let m_a = enrich(tape, a_bar.seq, att.attended_a)?;
        let m_b = enrich(tape, b_bar.seq, att.attended_b)?;
        let pooled = aggregate_and_pool(tape, &self.params, &self.agg, m_a, m_b)?;
        score(tape, &self.params, &self.mlp, &pooled)
    }

    /// Scores one pair on a fresh tape.
    pub fn score_pair(&self, context: &[String], response: &[String]) -> Result<Score> {
        let mut tape = Tape::new();
        let node = self.score_node(&mut tape, context, response)?;
        Ok(Score::new(tape.value(node).get(0, 0)))
    }
}

/// Substitutes a single padding token for an empty sequence so attention to
/// a constant stream stays well-defined.
pub fn pad_if_empty(tokens: &[String]) -> Vec<String> {
    if tokens.is_empty() {
        vec![PAD_TOKEN.to_string()]
    } else {
        tokens.to_vec()
    }
}
