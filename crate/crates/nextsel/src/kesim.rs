//! Knowledge-grounded scorer: extends the pair scorer with a third stream
//! of external text (a command-description snippet or templated KB
//! sentences).
//!
//! All three streams share one encoder (optionally the knowledge stream
//! gets its own) and one aggregation BiLSTM. Attention runs over every
//! unordered pair of streams, so each stream ends up with two attended
//! views; the views are pooled separately and merged additively, and the
//! three merged stream vectors are concatenated for the prediction head.

use std::collections::HashMap;

use crate::autodiff::{NodeId, Params, Tape};
use crate::corpus::{truncate_context, Vocabulary};
use crate::embedding::{EmbeddingTable, WordReprLayer};
use crate::error::{Error, Result};
use crate::esim::{
    bilstm_encode, co_attend, enrich, pad_if_empty, pool_stream, score, BiLstm, EncodedSeq, Mlp,
    ModelConfig, Score,
};

/// Context, response, and knowledge encoded with shared weights.
#[derive(Debug, Clone, Copy)]
pub struct TripleEncoded {
    pub context: EncodedSeq,
    pub response: EncodedSeq,
    pub knowledge: EncodedSeq,
}

/// The six attended views. `x_from_y` lives at stream x's positions and is
/// built as convex combinations of stream y's rows.
#[derive(Debug, Clone, Copy)]
pub struct TripleAttended {
    pub ctx_from_resp: NodeId,
    pub ctx_from_kn: NodeId,
    pub resp_from_ctx: NodeId,
    pub resp_from_kn: NodeId,
    pub kn_from_ctx: NodeId,
    pub kn_from_resp: NodeId,
    /// The six row-stochastic weight matrices, in the same order as the
    /// fields above.
    pub weights: [NodeId; 6],
}

/// Pooled per-stream vectors after the additive merge, concatenated to
/// width `12h`.
#[derive(Debug, Clone, Copy)]
pub struct MergedPooled {
    pub v: NodeId,
}

/// Co-attention over each of the three stream pairs, yielding two attended
/// views per stream.
pub fn triple_co_attend(tape: &mut Tape, t: &TripleEncoded) -> Result<TripleAttended> {
    if t.context.width != t.response.width || t.context.width != t.knowledge.width {
        return Err(Error::shape(
            "triple_co_attend",
            format!(
                "widths {} / {} / {}",
                t.context.width, t.response.width, t.knowledge.width
            ),
        ));
    }
    let cr = co_attend(tape, &t.context, &t.response)?;
    let ck = co_attend(tape, &t.context, &t.knowledge)?;
    let rk = co_attend(tape, &t.response, &t.knowledge)?;
    Ok(TripleAttended {
        ctx_from_resp: cr.attended_a,
        ctx_from_kn: ck.attended_a,
        resp_from_ctx: cr.attended_b,
        resp_from_kn: rk.attended_a,
        kn_from_ctx: ck.attended_b,
        kn_from_resp: rk.attended_b,
        weights: [
            cr.weights_ab,
            ck.weights_ab,
            cr.weights_ba,
            rk.weights_ab,
            ck.weights_ba,
            rk.weights_ba,
        ],
    })
}

/// Enriches each (original, attended) pair, aggregates all six with the one
/// shared BiLSTM, pools each view into `[max; last]`, adds the two views of
/// every stream elementwise, and concatenates the three merged vectors.
pub fn merge_pool(
    tape: &mut Tape,
    params: &Params,
    aggregator: &BiLstm,
    views: &TripleAttended,
    t: &TripleEncoded,
) -> Result<MergedPooled> {
    let pairs = [
        (t.context.seq, views.ctx_from_resp),
        (t.context.seq, views.ctx_from_kn),
        (t.response.seq, views.resp_from_ctx),
        (t.response.seq, views.resp_from_kn),
        (t.knowledge.seq, views.kn_from_ctx),
        (t.knowledge.seq, views.kn_from_resp),
    ];
    let mut pooled = Vec::with_capacity(6);
    for (orig, attended) in pairs {
        let enriched = enrich(tape, orig, attended)?;
        let aggregated = aggregator.run(tape, params, enriched)?;
        pooled.push(pool_stream(tape, &aggregated)?);
    }
    let merged_ctx = tape.add(pooled[0], pooled[1])?;
    let merged_resp = tape.add(pooled[2], pooled[3])?;
    let merged_kn = tape.add(pooled[4], pooled[5])?;
    let v = tape.hcat(&[merged_ctx, merged_resp, merged_kn])?;
    Ok(MergedPooled { v })
}

/// Full matching-aggregation head: merge-pool then the prediction layer.
pub fn merge_pool_score(
    tape: &mut Tape,
    params: &Params,
    aggregator: &BiLstm,
    mlp: &Mlp,
    views: &TripleAttended,
    t: &TripleEncoded,
) -> Result<NodeId> {
    let merged = merge_pool(tape, params, aggregator, views, t)?;
    score(tape, params, mlp, &crate::esim::Pooled { v: merged.v })
}

/// The knowledge-grounded scorer with all of its parameters.
pub struct KesimModel {
    pub cfg: ModelConfig,
    pub vocab: Vocabulary,
    pub params: Params,
    pub repr: WordReprLayer,
    pub enc: BiLstm,
    /// Present only with `untie_knowledge_encoder`.
    pub knowledge_enc: Option<BiLstm>,
    pub agg: BiLstm,
    pub mlp: Mlp,
}

impl KesimModel {
    pub fn new(
        cfg: ModelConfig,
        vocab: &Vocabulary,
        tables: Option<(EmbeddingTable, EmbeddingTable)>,
    ) -> Result<KesimModel> {
        cfg.validate()?;
        let mut params = Params::new();
        let mut rng = crate::seeded_rng(cfg.seed);
        let repr = WordReprLayer::new(&cfg, vocab, tables, &mut params, &mut rng)?;
        let enc = BiLstm::new("enc", cfg.input_dim(), cfg.hidden, &mut params, &mut rng);
        let knowledge_enc = cfg
            .untie_knowledge_encoder
            .then(|| BiLstm::new("enc_k", cfg.input_dim(), cfg.hidden, &mut params, &mut rng));
        let agg = BiLstm::new("agg", 8 * cfg.hidden, cfg.hidden, &mut params, &mut rng);
        let mlp = Mlp::new("mlp", 12 * cfg.hidden, cfg.mlp_hidden, &mut params, &mut rng);
        Ok(KesimModel {
            cfg,
            vocab: vocab.clone(),
            params,
            repr,
            enc,
            knowledge_enc,
            agg,
            mlp,
        })
    }

    /// Scores one (context, response, knowledge) triple on an existing tape.
    /// Missing knowledge becomes a single padding token so the stream stays
    /// well-defined.
    pub fn score_node(
        &self,
        tape: &mut Tape,
        context: &[String],
        response: &[String],
        knowledge: Option<&[String]>,
    ) -> Result<NodeId> {
        let context = truncate_context(context, self.cfg.max_context_len);
        let knowledge = pad_if_empty(knowledge.unwrap_or(&[]));
        let knowledge = &knowledge[..knowledge.len().min(self.cfg.max_knowledge_len)];

        let mut cache = HashMap::new();
        let ctx_repr = self.repr.compose(tape, &self.params, context, &mut cache)?;
        let resp_repr = self.repr.compose(tape, &self.params, response, &mut cache)?;
        let kn_repr = self.repr.compose(tape, &self.params, knowledge, &mut cache)?;

        let context = bilstm_encode(tape, &self.params, &self.enc, ctx_repr)?;
        let response = bilstm_encode(tape, &self.params, &self.enc, resp_repr)?;
        let kn_encoder = self.knowledge_enc.as_ref().unwrap_or(&self.enc);
        let knowledge = bilstm_encode(tape, &self.params, kn_encoder, kn_repr)?;

        let triple = TripleEncoded {
            context,
            response,
            knowledge,
        };
        let views = triple_co_attend(tape, &triple)?;
        merge_pool_score(tape, &self.params, &self.agg, &self.mlp, &views, &triple)
    }

    pub fn score_triple(
        &self,
        context: &[String],
        response: &[String],
        knowledge: Option<&[String]>,
    ) -> Result<Score> {
        let mut tape = Tape::new();
        let node = self.score_node(&mut tape, context, response, knowledge)?;
        Ok(Score::new(tape.value(node).get(0, 0)))
    }
}
