//! Ranking metrics: recall at k over the candidate set and mean reciprocal
//! rank of the best-ranked correct candidate.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One evaluated example: candidate ids in ranked order plus the correct
/// id set.
#[derive(Debug, Clone)]
pub struct Ranking {
    pub ranked_ids: Vec<String>,
    pub correct_ids: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(rename = "recall@1")]
    pub recall_at_1: f64,
    #[serde(rename = "recall@10")]
    pub recall_at_10: f64,
    #[serde(rename = "recall@50")]
    pub recall_at_50: f64,
    pub mrr: f64,
    pub examples: usize,
}

/// Sorts candidates by descending score with an id tie-break, so permuting
/// the input candidate order never changes the ranking.
pub fn rank_candidates(scores: &[(String, f64)]) -> Vec<String> {
    let mut scored: Vec<(&String, f64)> = scores.iter().map(|(id, s)| (id, *s)).collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(b.0))
    });
    scored.into_iter().map(|(id, _)| id.clone()).collect()
}

/// Recall@k is the fraction of examples with any correct id in the top k;
/// MRR averages the reciprocal rank of each example's best-ranked correct
/// id (0 when no correct id was ranked at all).
pub fn compute_metrics(rankings: &[Ranking]) -> Result<Metrics> {
    if rankings.is_empty() {
        return Err(Error::InvalidArgument("no rankings to score".to_string()));
    }
    let mut hits1 = 0usize;
    let mut hits10 = 0usize;
    let mut hits50 = 0usize;
    let mut mrr_sum = 0.0;
    for (i, ranking) in rankings.iter().enumerate() {
        if ranking.correct_ids.is_empty() {
            return Err(Error::InvalidArgument(format!("example {i} has an empty correct set")));
        }
        let best_rank = ranking
            .ranked_ids
            .iter()
            .position(|id| ranking.correct_ids.contains(id))
            .map(|p| p + 1);
        if let Some(rank) = best_rank {
            if rank <= 1 {
                hits1 += 1;
            }
            if rank <= 10 {
                hits10 += 1;
            }
            if rank <= 50 {
                hits50 += 1;
            }
            mrr_sum += 1.0 / rank as f64;
        }
    }
    let n = rankings.len() as f64;
    Ok(Metrics {
        recall_at_1: hits1 as f64 / n,
        recall_at_10: hits10 as f64 / n,
        recall_at_50: hits50 as f64 / n,
        mrr: mrr_sum / n,
        examples: rankings.len(),
    })
}

/// The structured per-run output line: metrics plus the options that
/// produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsLine {
    #[serde(flatten)]
    pub metrics: Metrics,
    pub options: serde_json::Value,
}

impl MetricsLine {
    pub fn render(&self) -> String {
        serde_json::to_string(self).expect("metrics are serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn ranking(ids: &[&str], correct: &[&str]) -> Ranking {
        Ranking {
            ranked_ids: ids.iter().map(|s| s.to_string()).collect(),
            correct_ids: correct.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn single_example_values() {
        let m = compute_metrics(&[ranking(&["a", "b", "c"], &["a"])]).unwrap();
        assert_eq!(m.recall_at_1, 1.0);
        assert_eq!(m.mrr, 1.0);

        let m = compute_metrics(&[ranking(&["a", "b", "c", "d"], &["d"])]).unwrap();
        assert_eq!(m.recall_at_1, 0.0);
        assert_eq!(m.mrr, 0.25);
    }

    #[test]
    fn multi_correct_uses_any_hit_and_best_rank() {
        // correct at ranks 2 and 5: no top-1 hit, MRR contribution 1/2
        let m = compute_metrics(&[ranking(&["x", "a", "y", "z", "b"], &["a", "b"])]).unwrap();
        assert_eq!(m.recall_at_1, 0.0);
        assert_eq!(m.mrr, 0.5);
    }

    #[test]
    fn empty_correct_set_is_an_error() {
        assert!(compute_metrics(&[ranking(&["a"], &[])]).is_err());
    }

    #[test]
    fn ranking_is_order_invariant() {
        let scores = vec![
            ("c1".to_string(), 0.2),
            ("c2".to_string(), 0.9),
            ("c3".to_string(), 0.5),
        ];
        let mut permuted = scores.clone();
        permuted.reverse();
        assert_eq!(rank_candidates(&scores), rank_candidates(&permuted));
        assert_eq!(rank_candidates(&scores)[0], "c2");
    }

    #[test]
    fn tied_scores_break_by_id() {
        let scores = vec![
            ("z".to_string(), 0.5),
            ("a".to_string(), 0.5),
            ("m".to_string(), 0.5),
        ];
        assert_eq!(rank_candidates(&scores), vec!["a", "m", "z"]);
    }

    /// Brute-force oracle: scan every k explicitly and accumulate per-example
    /// reciprocal ranks with a direct loop.
    fn oracle(rankings: &[Ranking]) -> (f64, f64, f64, f64) {
        let n = rankings.len() as f64;
        let mut r = [0.0f64; 3];
        let mut mrr = 0.0;
        for ranking in rankings {
            for (slot, k) in [(0, 1usize), (1, 10), (2, 50)] {
                let hit = ranking.ranked_ids.iter().take(k).any(|id| ranking.correct_ids.contains(id));
                if hit {
                    r[slot] += 1.0;
                }
            }
            let mut best: Option<usize> = None;
            for correct in &ranking.correct_ids {
                if let Some(p) = ranking.ranked_ids.iter().position(|id| id == correct) {
                    best = Some(best.map_or(p, |b: usize| b.min(p)));
                }
            }
            if let Some(b) = best {
                mrr += 1.0 / (b + 1) as f64;
            }
        }
        (r[0] / n, r[1] / n, r[2] / n, mrr / n)
    }

    #[test]
    fn matches_brute_force_oracle_on_random_score_sets() {
        let mut rng = crate::seeded_rng(2024);
        for _ in 0..200 {
            let n_candidates = rng.gen_range(1..=120);
            let n_correct = rng.gen_range(1..=5.min(n_candidates));
            let scores: Vec<(String, f64)> = (0..n_candidates)
                .map(|i| (format!("c{i:03}"), rng.gen_range(0.0..1.0)))
                .collect();
            let mut correct: BTreeSet<String> = BTreeSet::new();
            while correct.len() < n_correct {
                correct.insert(format!("c{:03}", rng.gen_range(0..n_candidates)));
            }
            let ranking = Ranking {
                ranked_ids: rank_candidates(&scores),
                correct_ids: correct,
            };
            let m = compute_metrics(std::slice::from_ref(&ranking)).unwrap();
            let (r1, r10, r50, mrr) = oracle(std::slice::from_ref(&ranking));
            assert_eq!(m.recall_at_1, r1);
            assert_eq!(m.recall_at_10, r10);
            assert_eq!(m.recall_at_50, r50);
            assert!((m.mrr - mrr).abs() < 1e-15);
            // monotone structure
            assert!(m.recall_at_1 <= m.recall_at_10);
            assert!(m.recall_at_10 <= m.recall_at_50);
            assert!(m.mrr >= m.recall_at_1);
        }
    }

    #[test]
    fn metrics_line_is_one_json_object() {
        let m = compute_metrics(&[ranking(&["a"], &["a"])]).unwrap();
        let line = MetricsLine {
            metrics: m,
            options: serde_json::json!({"subtask": 1, "variant": "esim"}),
        };
        let rendered = line.render();
        assert!(rendered.starts_with('{') && rendered.ends_with('}'));
        assert!(!rendered.contains('\n'));
        let parsed: MetricsLine = serde_json::from_str(&rendered).unwrap();
        assert_eq!(parsed.metrics, line.metrics);
    }
}
