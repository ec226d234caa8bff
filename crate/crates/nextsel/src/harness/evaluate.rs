//! Subtask evaluation pipelines.
//!
//! Subtasks 1, 3, 4, and 5 score the provided candidate set (the None
//! sentinel is already part of subtask-4 candidate lists). Subtask 2 runs
//! the global-pool pipeline: candidate reduction, then a top-100 IR
//! shortlist against the context, then model scoring. Retrieval
//! augmentation, when enabled, appends the top-1 similar response to the
//! context before anything else sees it.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::config::Variant;
use super::metrics::{compute_metrics, rank_candidates, Metrics, Ranking};
use super::model::SelectionModel;
use crate::corpus::{Candidate, Example, Subtask};
use crate::error::{Error, Result};
use crate::knowledge::{
    course_snippet, match_commands, select_snippet, CourseRecord, KnowledgeIndex,
    DEFAULT_MAX_SNIPPET_WORDS, DEFAULT_TOP_COMMANDS,
};
use crate::tesim::{augment, find_similar, reduce_candidates, AugmentMode, SubDialogIndex, EVAL_K};

/// Where knowledge snippets come from.
pub enum KnowledgeSource {
    /// Extract from indexed command documentation.
    Index(KnowledgeIndex),
    /// Template sentences for courses mentioned in the context.
    Courses(Vec<CourseRecord>),
    /// A precomputed example-id -> tokens cache.
    Snippets(HashMap<String, Vec<String>>),
}

impl KnowledgeSource {
    /// The snippet for one example, or None when nothing was extracted.
    pub fn snippet_for(&self, example: &Example, max_words: usize) -> Option<Vec<String>> {
        let tokens = match self {
            KnowledgeSource::Index(index) => {
                let commands = match_commands(&example.context_tokens, index);
                select_snippet(
                    &commands,
                    &example.context_tokens,
                    index,
                    DEFAULT_TOP_COMMANDS,
                    max_words,
                )
            }
            KnowledgeSource::Courses(courses) => {
                course_snippet(&example.context_tokens, courses, max_words)
            }
            KnowledgeSource::Snippets(cache) =>
                cache.get(&example.dialog_id).cloned().unwrap_or_default(),
        };
        if tokens.is_empty() {
            None
        } else {
            Some(tokens)
        }
    }
}

/// Sets `example.knowledge` from a source wherever it is still unset.
pub fn attach_knowledge(examples: &mut [Example], source: &KnowledgeSource, max_words: usize) {
    for example in examples.iter_mut() {
        if example.knowledge.is_none() {
            example.knowledge = source.snippet_for(example, max_words);
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub subtask: Subtask,
    /// Append the top-1 retrieved response to each context first.
    pub tesim: bool,
    /// Apply candidate reduction to provided candidate sets.
    pub cr: bool,
    /// Never reduce away an example's own correct candidates.
    pub protect_ground_truth: bool,
    /// Global-pool shortlist size for subtask 2.
    pub shortlist_size: usize,
}

impl EvalOptions {
    pub fn new(subtask: Subtask) -> EvalOptions {
        EvalOptions {
            subtask,
            tesim: false,
            cr: false,
            protect_ground_truth: true,
            shortlist_size: 100,
        }
    }
}

/// External resources an evaluation may need; which ones are required
/// depends on the options.
#[derive(Default)]
pub struct EvalAssets<'a> {
    pub subdialogs: Option<&'a SubDialogIndex>,
    pub knowledge: Option<&'a KnowledgeSource>,
    pub pool: Option<&'a [Candidate]>,
    pub seen_correct: Option<&'a HashSet<String>>,
}

/// Subtask-2 candidate pipeline: reduce the pool, shortlist against the
/// context, and map the example's correct responses onto pool ids by
/// normalized text.
fn subtask2_candidates(
    example: &Example,
    context: &[String],
    pool: &[Candidate],
    seen_correct: Option<&HashSet<String>>,
    opts: &EvalOptions,
) -> Result<(Vec<Candidate>, BTreeSet<String>)> {
    let correct_texts: HashSet<String> = example
        .candidates
        .iter()
        .filter(|c| example.correct_ids.contains(&c.id))
        .map(|c| c.normalized_text())
        .collect();

    let reduced: Vec<Candidate> = match seen_correct {
        Some(seen) => pool
            .iter()
            .filter(|c| {
                let protected = opts.protect_ground_truth && correct_texts.contains(&c.normalized_text());
                protected || !seen.contains(&c.normalized_text())
            })
            .cloned()
            .collect(),
        None => pool.to_vec(),
    };

    let shortlisted = crate::tesim::shortlist_global_pool(context, &reduced, opts.shortlist_size);
    let correct_ids: BTreeSet<String> = shortlisted
        .iter()
        .chain(reduced.iter())
        .filter(|c| correct_texts.contains(&c.normalized_text()))
        .map(|c| c.id.clone())
        .collect();
    if correct_ids.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "global pool has no candidate matching a correct response of example {}",
            example.dialog_id
        )));
    }
    Ok((shortlisted, correct_ids))
}

/// Scores a dataset under the given options and assets. Deterministic for
/// a fixed (model, dataset, options) triple.
pub fn evaluate_subtask(
    model: &SelectionModel,
    examples: &[Example],
    opts: &EvalOptions,
    assets: &EvalAssets,
) -> Result<Metrics> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("no examples to evaluate".to_string()));
    }
    if opts.tesim && assets.subdialogs.is_none() {
        return Err(Error::Config(
            "retrieval augmentation requested but no sub-dialog index supplied".to_string(),
        ));
    }
    if opts.subtask == Subtask::S2 && assets.pool.is_none() {
        return Err(Error::Config("subtask 2 needs a global candidate pool".to_string()));
    }
    if opts.cr && opts.subtask != Subtask::S2 && assets.seen_correct.is_none() {
        return Err(Error::Config(
            "candidate reduction requested but no seen-correct set supplied".to_string(),
        ));
    }
    if model.variant() == Variant::Kesim
        && assets.knowledge.is_none()
        && examples.iter().all(|e| e.knowledge.is_none())
    {
        return Err(Error::Config(
            "knowledge variant needs a knowledge source or pre-attached snippets".to_string(),
        ));
    }

    let max_words = model.cfg().max_knowledge_len.min(DEFAULT_MAX_SNIPPET_WORDS);
    let mut rankings = Vec::with_capacity(examples.len());
    for example in examples {
        // Retrieval augmentation comes first; everything downstream sees
        // the extended context.
        let augmented;
        let working: &Example = if opts.tesim {
            let index = assets.subdialogs.expect("checked above");
            let similar = find_similar(&example.context_tokens, index, EVAL_K, &example.dialog_id);
            augmented = augment(example, &similar, AugmentMode::Eval).remove(0).example;
            &augmented
        } else {
            example
        };

        let (candidates, correct_ids) = match opts.subtask {
            Subtask::S2 => subtask2_candidates(
                example,
                &working.context_tokens,
                assets.pool.expect("checked above"),
                assets.seen_correct,
                opts,
            )?,
            _ => {
                let (reduced, _) = if opts.cr {
                    reduce_candidates(
                        working,
                        assets.seen_correct.expect("checked above"),
                        opts.protect_ground_truth,
                    )
                } else {
                    (working.clone(), Vec::new())
                };
                (reduced.candidates, working.correct_ids.clone())
            }
        };

        let knowledge = match model.variant() {
            Variant::Esim => None,
            Variant::Kesim => working.knowledge.clone().or_else(|| {
                assets
                    .knowledge
                    .and_then(|source| source.snippet_for(working, max_words))
            }),
        };

        let mut scores = Vec::with_capacity(candidates.len());
        for candidate in &candidates {
            let p = model.score(&working.context_tokens, &candidate.tokens, knowledge.as_deref())?;
            scores.push((candidate.id.clone(), p));
        }
        rankings.push(Ranking {
            ranked_ids: rank_candidates(&scores),
            correct_ids,
        });
    }
    compute_metrics(&rankings)
}
