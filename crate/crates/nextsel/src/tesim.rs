//! Retrieval-based data strategies: a sub-dialog pool with TF-IDF
//! similarity search, context augmentation with retrieved responses,
//! negative sampling, candidate reduction, and global-pool shortlisting.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::corpus::{flatten_turns, Candidate, Dialog, Example, Speaker, Utterance, EOT_TOKEN};
use crate::error::{Error, Result};
use crate::tfidf::{cosine, SparseVec, TfidfModel};

/// Retrieved sub-dialogs appended during training.
pub const TRAIN_K: usize = 3;
/// Retrieved sub-dialogs appended during evaluation.
pub const EVAL_K: usize = 1;
/// Negatives kept by [`sample_negatives`].
pub const DEFAULT_NEGATIVES: usize = 9;

/// A (context-prefix, next-turn) pair carved from a dialog. `split_point`
/// is the 1-based index of the response turn, so it is always >= 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubDialog {
    pub parent_id: String,
    pub context: Vec<String>,
    pub response: Vec<String>,
    pub split_point: usize,
}

/// Splits a dialog at every turn index `t` in `[2, turn_count]`: the
/// context is the flattened turns before `t`, the response is turn `t`.
pub fn split_subdialogs(dialog: &Dialog) -> Vec<SubDialog> {
    let mut out = Vec::new();
    for t in 2..=dialog.turns.len() {
        out.push(SubDialog {
            parent_id: dialog.id.clone(),
            context: flatten_turns(&dialog.turns[..t - 1]),
            response: dialog.turns[t - 1].tokens.clone(),
            split_point: t,
        });
    }
    out
}

/// The sub-dialog pool with one TF-IDF vector per sub-dialog context.
/// Separator tokens are not vectorized; they appear in every context and
/// carry no content.
pub struct SubDialogIndex {
    subdialogs: Vec<SubDialog>,
    vectors: Vec<SparseVec>,
    tfidf: TfidfModel,
}

fn content_tokens(tokens: &[String]) -> Vec<String> {
    tokens.iter().filter(|t| *t != EOT_TOKEN).cloned().collect()
}

impl SubDialogIndex {
    pub fn build(dialogs: &[Dialog]) -> SubDialogIndex {
        let subdialogs: Vec<SubDialog> = dialogs.iter().flat_map(split_subdialogs).collect();
        Self::from_subdialogs(subdialogs)
    }

    pub fn from_subdialogs(subdialogs: Vec<SubDialog>) -> SubDialogIndex {
        let docs: Vec<Vec<String>> = subdialogs.iter().map(|s| content_tokens(&s.context)).collect();
        let tfidf = TfidfModel::fit(docs.iter().map(|d| d.as_slice()));
        let vectors = docs.iter().map(|d| tfidf.vector(d)).collect();
        SubDialogIndex {
            subdialogs,
            vectors,
            tfidf,
        }
    }

    pub fn len(&self) -> usize {
        self.subdialogs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdialogs.is_empty()
    }

    pub fn subdialogs(&self) -> &[SubDialog] {
        &self.subdialogs
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        for sd in &self.subdialogs {
            let line = serde_json::to_string(sd).expect("serializable");
            writeln!(file, "{line}").map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        Ok(())
    }

    /// Reloads a pool saved by [`SubDialogIndex::save`], refitting the
    /// TF-IDF statistics (they are a pure function of the pool).
    pub fn load(path: &Path) -> Result<SubDialogIndex> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut subdialogs = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let sd: SubDialog = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                record: idx,
                message: e.to_string(),
            })?;
            subdialogs.push(sd);
        }
        Ok(Self::from_subdialogs(subdialogs))
    }
}

/// Top-`k` sub-dialogs by TF-IDF cosine against the query context,
/// excluding every sub-dialog of `exclude_parent` (retrieving a dialog's
/// own children would leak the answer). Ties break by higher cosine, then
/// lower parent id, then lower split point.
pub fn find_similar<'a>(
    context_tokens: &[String],
    index: &'a SubDialogIndex,
    k: usize,
    exclude_parent: &str,
) -> Vec<&'a SubDialog> {
    if k == 0 || index.is_empty() {
        return Vec::new();
    }
    let query = index.tfidf.vector(&content_tokens(context_tokens));
    let mut scored: Vec<(f64, &SubDialog)> = index
        .subdialogs
        .iter()
        .zip(index.vectors.iter())
        .filter(|(sd, _)| sd.parent_id != exclude_parent)
        .map(|(sd, v)| (cosine(v, &query), sd))
        .collect();
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.1.parent_id.cmp(&b.1.parent_id))
            .then_with(|| a.1.split_point.cmp(&b.1.split_point))
    });
    scored.into_iter().take(k).map(|(_, sd)| sd).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentMode {
    Train,
    Eval,
}

/// An example whose context was extended with a retrieved response.
#[derive(Debug, Clone)]
pub struct AugmentedExample {
    pub example: Example,
    /// Parent dialog the response was retrieved from; `None` when the
    /// example passed through unmodified.
    pub source_parent: Option<String>,
    pub retrieved_response: Vec<String>,
}

fn append_retrieved(base: &Example, retrieved: &SubDialog) -> Example {
    let mut example = base.clone();
    let turn = Utterance::new(Speaker::Retrieved, retrieved.response.join(" "));
    example.context_tokens.extend(turn.tokens.iter().cloned());
    example.context_tokens.push(EOT_TOKEN.to_string());
    example.turns.push(turn);
    example
}

/// Appends retrieved responses as a new final turn. Train mode emits one
/// copy per retrieved sub-dialog (expanding the data by the retrieval
/// factor); eval mode emits exactly one copy using the top-1 response. An
/// empty retrieval list passes the example through unmodified. Candidates
/// and labels are untouched.
pub fn augment(example: &Example, similar: &[&SubDialog], mode: AugmentMode) -> Vec<AugmentedExample> {
    if similar.is_empty() {
        return vec![AugmentedExample {
            example: example.clone(),
            source_parent: None,
            retrieved_response: Vec::new(),
        }];
    }
    let take = match mode {
        AugmentMode::Train => similar.len(),
        AugmentMode::Eval => 1,
    };
    similar[..take]
        .iter()
        .map(|sd| AugmentedExample {
            example: append_retrieved(example, sd),
            source_parent: Some(sd.parent_id.clone()),
            retrieved_response: sd.response.clone(),
        })
        .collect()
}

/// Keeps all correct candidates plus `n` uniformly sampled incorrect ones,
/// then shuffles the order, all driven by (seed, example id) so the result
/// is stable across runs. Fewer than `n` negatives keeps them all.
pub fn sample_negatives(example: &Example, n: usize, seed: u64) -> Example {
    let mut rng =
        rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ crate::fnv1a(example.dialog_id.as_bytes()));
    let (correct, incorrect): (Vec<&Candidate>, Vec<&Candidate>) = example
        .candidates
        .iter()
        .partition(|c| example.correct_ids.contains(&c.id));
    let sampled: Vec<&Candidate> = if incorrect.len() <= n {
        incorrect
    } else {
        incorrect
            .choose_multiple(&mut rng, n)
            .copied()
            .collect()
    };
    let mut candidates: Vec<Candidate> = correct.into_iter().chain(sampled).cloned().collect();
    candidates.shuffle(&mut rng);
    Example {
        candidates,
        ..example.clone()
    }
}

/// Builds the normalized-text membership set used by candidate reduction
/// from the correct responses of earlier splits.
pub fn collect_seen_correct(examples: &[Example]) -> HashSet<String> {
    let mut seen = HashSet::new();
    for example in examples {
        for candidate in &example.candidates {
            if example.correct_ids.contains(&candidate.id) {
                seen.insert(candidate.normalized_text());
            }
        }
    }
    seen
}

/// Removes candidates whose normalized text was already seen as a correct
/// response. With `protect_ground_truth` (the default in every pipeline),
/// the example's own correct candidates are never removed. Returns the
/// reduced example and the removed candidate ids.
pub fn reduce_candidates(
    example: &Example,
    seen_correct: &HashSet<String>,
    protect_ground_truth: bool,
) -> (Example, Vec<String>) {
    let mut removed = Vec::new();
    let mut kept = Vec::new();
    for candidate in &example.candidates {
        let protected = protect_ground_truth && example.correct_ids.contains(&candidate.id);
        if !protected && seen_correct.contains(&candidate.normalized_text()) {
            removed.push(candidate.id.clone());
        } else {
            kept.push(candidate.clone());
        }
    }
    (
        Example {
            candidates: kept,
            ..example.clone()
        },
        removed,
    )
}

/// Top-`size` pool candidates by TF-IDF cosine against the context, with a
/// deterministic id tie-break. A pool smaller than `size` is returned
/// whole (reordered by the same ranking).
pub fn shortlist_global_pool(
    context_tokens: &[String],
    pool: &[Candidate],
    size: usize,
) -> Vec<Candidate> {
    let docs: Vec<Vec<String>> = pool.iter().map(|c| c.tokens.clone()).collect();
    let tfidf = TfidfModel::fit(docs.iter().map(|d| d.as_slice()));
    let query = tfidf.vector(&content_tokens(context_tokens));
    let mut scored: Vec<(f64, &Candidate)> = pool
        .iter()
        .zip(docs.iter())
        .map(|(c, d)| (cosine(&tfidf.vector(d), &query), c))
        .collect();
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.1.id.cmp(&b.1.id))
    });
    scored.into_iter().take(size).map(|(_, c)| c.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use std::collections::BTreeSet;

    fn dialog(id: &str, turns: &[&str]) -> Dialog {
        Dialog {
            id: id.to_string(),
            turns: turns
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    Utterance::new(if i % 2 == 0 { Speaker::A } else { Speaker::B }, *t)
                })
                .collect(),
        }
    }

    fn example(id: &str, context: &str, candidates: &[(&str, &str)], correct: &[&str]) -> Example {
        Example {
            dialog_id: id.to_string(),
            turns: vec![Utterance::new(Speaker::A, context)],
            context_tokens: flatten_turns(&[Utterance::new(Speaker::A, context)]),
            candidates: candidates.iter().map(|(id, text)| Candidate::new(*id, text)).collect(),
            correct_ids: correct.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
            knowledge: None,
            subtask: crate::corpus::Subtask::S1,
        }
    }

    #[test]
    fn split_counts_match_turn_counts() {
        assert_eq!(split_subdialogs(&dialog("d4", &["a", "b", "c", "d"])).len(), 3);
        assert_eq!(split_subdialogs(&dialog("d2", &["a", "b"])).len(), 1);
        assert_eq!(split_subdialogs(&dialog("d1", &["a"])).len(), 0);
    }

    #[test]
    fn split_points_and_contents() {
        let subs = split_subdialogs(&dialog("d", &["hello there", "general reply", "final word"]));
        assert_eq!(subs[0].split_point, 2);
        assert_eq!(subs[0].context, tokenize("hello there __eot__"));
        assert_eq!(subs[0].response, tokenize("general reply"));
        assert_eq!(subs[1].split_point, 3);
        assert_eq!(subs[1].response, tokenize("final word"));
    }

    fn fixture_index() -> SubDialogIndex {
        SubDialogIndex::build(&[
            dialog("p1", &["my printer is jammed", "try the reset script", "that fixed it"]),
            dialog("p2", &["my printer is jammed", "power cycle the spooler", "thanks"]),
            dialog("p3", &["the network drops hourly", "check the cable modem", "will do"]),
        ])
    }

    #[test]
    fn duplicate_context_under_other_parent_ranks_first() {
        let index = fixture_index();
        let query = tokenize("my printer is jammed __eot__");
        let hits = find_similar(&query, &index, 2, "p1");
        assert!(!hits.is_empty());
        assert_eq!(hits[0].parent_id, "p2");
        assert_eq!(hits[0].split_point, 2);
        // exact duplicate context -> cosine 1.0
        let v_query = index.tfidf.vector(&content_tokens(&query));
        let v_hit = index.tfidf.vector(&content_tokens(&hits[0].context));
        assert!((cosine(&v_query, &v_hit) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn own_parent_is_always_excluded() {
        let index = fixture_index();
        for sd in index.subdialogs() {
            let hits = find_similar(&sd.context, &index, 10, &sd.parent_id);
            assert!(hits.iter().all(|h| h.parent_id != sd.parent_id));
        }
    }

    #[test]
    fn all_entries_same_parent_yields_empty() {
        let index = SubDialogIndex::build(&[dialog("only", &["a b c", "d e f", "g h i"])]);
        let hits = find_similar(&tokenize("a b c"), &index, 3, "only");
        assert!(hits.is_empty());
    }

    #[test]
    fn k_larger_than_pool_is_clamped() {
        let index = fixture_index();
        let hits = find_similar(&tokenize("printer"), &index, 100, "p3");
        assert_eq!(hits.len(), 4); // p1 and p2 contribute two sub-dialogs each
    }

    #[test]
    fn results_sorted_by_non_increasing_cosine() {
        let index = fixture_index();
        let query = tokenize("printer jammed reset script");
        let hits = find_similar(&query, &index, 10, "none");
        let qv = index.tfidf.vector(&content_tokens(&query));
        let scores: Vec<f64> = hits
            .iter()
            .map(|h| cosine(&index.tfidf.vector(&content_tokens(&h.context)), &qv))
            .collect();
        for w in scores.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
    }

    #[test]
    fn augment_train_multiplies_by_retrieved_count() {
        let index = fixture_index();
        let ex = example("q", "my printer is jammed", &[("c0", "try the reset script")], &["c0"]);
        let hits = find_similar(&ex.context_tokens, &index, 3, "q");
        assert_eq!(hits.len(), 3);
        let augmented = augment(&ex, &hits, AugmentMode::Train);
        assert_eq!(augmented.len(), 3);
        for (a, h) in augmented.iter().zip(hits.iter()) {
            // appended as a new final turn after the original separator
            let ctx = &a.example.context_tokens;
            assert_eq!(ctx.last().unwrap(), EOT_TOKEN);
            let tail = &ctx[ex.context_tokens.len()..ctx.len() - 1];
            assert_eq!(tail, h.response.as_slice());
            assert_eq!(a.example.candidates, ex.candidates);
            assert_eq!(a.example.correct_ids, ex.correct_ids);
            assert_eq!(a.example.turns.last().unwrap().speaker, Speaker::Retrieved);
            assert_ne!(a.source_parent.as_deref(), Some("q"));
        }
    }

    #[test]
    fn augment_eval_takes_top_one() {
        let index = fixture_index();
        let ex = example("q", "my printer is jammed", &[("c0", "x")], &["c0"]);
        let hits = find_similar(&ex.context_tokens, &index, 1, "q");
        let augmented = augment(&ex, &hits, AugmentMode::Eval);
        assert_eq!(augmented.len(), 1);
        assert_eq!(augmented[0].retrieved_response, hits[0].response);
    }

    #[test]
    fn augment_empty_passes_through() {
        let ex = example("q", "hello", &[("c0", "x")], &["c0"]);
        let augmented = augment(&ex, &[], AugmentMode::Train);
        assert_eq!(augmented.len(), 1);
        assert_eq!(augmented[0].example, ex);
        assert!(augmented[0].source_parent.is_none());
    }

    fn hundred_candidate_example() -> Example {
        let candidates: Vec<(String, String)> = (0..100)
            .map(|i| (format!("c{i:02}"), format!("candidate text number {i}")))
            .collect();
        let cand_refs: Vec<(&str, &str)> = candidates
            .iter()
            .map(|(id, text)| (id.as_str(), text.as_str()))
            .collect();
        example("big", "some context", &cand_refs, &["c37"])
    }

    #[test]
    fn sample_negatives_keeps_correct_and_counts() {
        let ex = hundred_candidate_example();
        let sampled = sample_negatives(&ex, 9, 1234);
        assert_eq!(sampled.candidates.len(), 10);
        assert!(sampled.candidates.iter().any(|c| c.id == "c37"));

        let again = sample_negatives(&ex, 9, 1234);
        assert_eq!(sampled.candidates, again.candidates);

        let other_seed = sample_negatives(&ex, 9, 99);
        assert_ne!(
            sampled.candidates.iter().map(|c| &c.id).collect::<Vec<_>>(),
            other_seed.candidates.iter().map(|c| &c.id).collect::<Vec<_>>()
        );
    }

    #[test]
    fn sample_negatives_with_few_negatives_keeps_all() {
        let ex = example(
            "small",
            "ctx",
            &[("c0", "right answer"), ("c1", "wrong one"), ("c2", "wrong two")],
            &["c0"],
        );
        let sampled = sample_negatives(&ex, 9, 7);
        assert_eq!(sampled.candidates.len(), 3);
    }

    #[test]
    fn reduce_removes_seen_and_protects_truth() {
        let ex = example(
            "r",
            "ctx",
            &[
                ("c1", "alpha beta"),
                ("c2", "gamma delta"),
                ("c3", "epsilon zeta"),
                ("c4", "eta theta"),
                ("c5", "iota kappa"),
            ],
            &["c3"],
        );
        let mut seen = HashSet::new();
        seen.insert("gamma delta".to_string());
        let (reduced, removed) = reduce_candidates(&ex, &seen, true);
        assert_eq!(removed, vec!["c2"]);
        assert_eq!(reduced.candidates.len(), 4);

        // ground truth also in the seen set stays under protection
        seen.insert("epsilon zeta".to_string());
        let (reduced, removed) = reduce_candidates(&ex, &seen, true);
        assert!(reduced.candidates.iter().any(|c| c.id == "c3"));
        assert_eq!(removed, vec!["c2"]);

        // without protection it is removed
        let (reduced, _) = reduce_candidates(&ex, &seen, false);
        assert!(!reduced.candidates.iter().any(|c| c.id == "c3"));

        // empty set changes nothing
        let (unchanged, removed) = reduce_candidates(&ex, &HashSet::new(), true);
        assert_eq!(unchanged.candidates, ex.candidates);
        assert!(removed.is_empty());
    }

    #[test]
    fn reduce_never_increases_candidates() {
        let ex = hundred_candidate_example();
        let seen = collect_seen_correct(&[ex.clone()]);
        let (reduced, _) = reduce_candidates(&ex, &seen, true);
        assert!(reduced.candidates.len() <= ex.candidates.len());
        // own correct response is in `seen` but protected
        assert!(reduced.candidates.iter().any(|c| c.id == "c37"));
    }

    #[test]
    fn shortlist_takes_top_size_with_planted_duplicate() {
        let mut pool: Vec<Candidate> = (0..1000)
            .map(|i| Candidate::new(format!("p{i:04}"), &format!("filler sentence number {i} about nothing")))
            .collect();
        pool.push(Candidate::new("dup", "restart the frobd daemon and check its socket"));
        let ctx = tokenize("the frobd daemon will not restart after i removed its socket");
        let shortlisted = shortlist_global_pool(&ctx, &pool, 100);
        assert_eq!(shortlisted.len(), 100);
        assert!(shortlisted.iter().any(|c| c.id == "dup"));

        let small: Vec<Candidate> = pool.into_iter().take(50).collect();
        assert_eq!(shortlist_global_pool(&ctx, &small, 100).len(), 50);
    }
}
