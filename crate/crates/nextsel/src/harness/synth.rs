//! Deterministic synthetic dialog corpora.
//!
//! Dialogs are four-turn problem/solution exchanges instantiated from a
//! small set of templates, so several dialogs share the same underlying
//! problem and the same (or near-identical) answer. That structure is what
//! makes retrieval augmentation useful: the answer to a test dialog already
//! appears as the response of a similar training sub-dialog. Some templates
//! mention a generated command name with a matching documentation page, so
//! knowledge extraction has something to find.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{flatten_turns, save_dataset, Candidate, Example, Speaker, Subtask, Utterance};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    /// Total dialogs across the three splits.
    pub n_dialogs: usize,
    pub n_templates: usize,
    /// Size of the generated pseudo-word pool.
    pub vocab_size: usize,
    pub candidates_per_example: usize,
    pub train_frac: f64,
    pub valid_frac: f64,
    /// Fraction of templates whose problem turn mentions a command.
    pub command_fraction: f64,
    /// Append the dialog's slot word to the solution, which makes the task
    /// solvable by lexical matching (used by quick-overfit corpora).
    pub slot_in_solution: bool,
    /// Distinct slot entities; 0 picks a quarter of the vocabulary.
    pub n_slots: usize,
}

impl SynthConfig {
    pub fn new(seed: u64, n_dialogs: usize, n_templates: usize, vocab_size: usize) -> SynthConfig {
        SynthConfig {
            seed,
            n_dialogs,
            n_templates,
            vocab_size,
            candidates_per_example: 10,
            train_frac: 0.8,
            valid_frac: 0.1,
            command_fraction: 0.5,
            slot_in_solution: false,
            n_slots: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_dialogs == 0 || self.n_templates < 2 || self.candidates_per_example < 2 {
            return Err(Error::InvalidArgument(
                "need at least 1 dialog, 2 templates, and 2 candidates".to_string(),
            ));
        }
        if self.vocab_size < 20 {
            return Err(Error::InvalidArgument("vocab_size must be at least 20".to_string()));
        }
        if self.train_frac <= 0.0 || self.valid_frac < 0.0 || self.train_frac + self.valid_frac >= 1.0 {
            return Err(Error::InvalidArgument("split fractions must leave room for a test split".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Template {
    problem: Vec<String>,
    clarify: Vec<String>,
    detail: Vec<String>,
    solution: Vec<String>,
    command: Option<String>,
}

impl Template {
    /// With a slot the solution echoes the slot and several problem words,
    /// giving the correct candidate rich lexical overlap with its context.
    fn solution_text(&self, slot: Option<&str>) -> String {
        match slot {
            Some(slot) => format!(
                "{} {} fix the {slot} {} after the {} {} check",
                self.solution[0], self.solution[1], self.problem[0], self.problem[1], self.detail[0]
            ),
            None => self.solution.join(" "),
        }
    }
}

#[derive(Debug)]
pub struct SynthOutput {
    pub train: Vec<Example>,
    pub valid: Vec<Example>,
    pub test: Vec<Example>,
    /// `(file name, page text)` for each generated command.
    pub man_pages: Vec<(String, String)>,
    /// Every distinct candidate text with a stable global id.
    pub pool: Vec<Candidate>,
}

const SYLLABLES: &[&str] = &[
    "ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du", "fa", "fe", "fi", "fo", "fu",
    "ga", "ge", "gi", "go", "gu", "ka", "ke", "ki", "ko", "ku", "la", "le", "li", "lo", "lu",
    "ma", "me", "mi", "mo", "mu", "na", "ne", "ni", "no", "nu", "pa", "pe", "pi", "po", "pu",
    "ra", "re", "ri", "ro", "ru", "sa", "se", "si", "so", "su", "ta", "te", "ti", "to", "tu",
    "va", "ve", "vi", "vo", "vu", "za", "ze", "zi", "zo", "zu",
];

fn pseudo_words(n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut words = Vec::with_capacity(n);
    let mut seen = std::collections::HashSet::new();
    while words.len() < n {
        let syllables = rng.gen_range(2..=3);
        let mut word = String::new();
        for _ in 0..syllables {
            word.push_str(SYLLABLES[rng.gen_range(0..SYLLABLES.len())]);
        }
        if seen.insert(word.clone()) {
            words.push(word);
        }
    }
    words
}

/// Deals `n` words per template from a shuffled pool, so templates get
/// disjoint word sets whenever the pool is big enough.
fn deal_template_words(pool: &[String], n_templates: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(rng);
    (0..n_templates)
        .map(|i| (0..n).map(|k| shuffled[(i * n + k) % shuffled.len()].clone()).collect())
        .collect()
}

/// Generates the corpus. Identical configs produce identical output,
/// including file bytes when written.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = crate::seeded_rng(cfg.seed ^ 0x73796e74);

    let words = pseudo_words(cfg.vocab_size, &mut rng);
    let slot_end = if cfg.n_slots > 0 {
        cfg.n_slots.min(cfg.vocab_size / 2)
    } else {
        (cfg.vocab_size / 4).max(4)
    };
    let template_end = slot_end + cfg.vocab_size / 2;
    let slots: Vec<String> = words[..slot_end].to_vec();
    let template_pool: Vec<String> = words[slot_end..template_end].to_vec();
    let fillers: Vec<String> = words[template_end..].to_vec();

    let n_commands = ((cfg.command_fraction * cfg.n_templates as f64).ceil() as usize).min(cfg.n_templates);
    let command_suffixes = ["ctl", "d", "fs", "mon"];
    let bags = deal_template_words(&template_pool, cfg.n_templates, 11, &mut rng);
    let templates: Vec<Template> = bags
        .into_iter()
        .enumerate()
        .map(|(i, bag)| {
            let command = (i < n_commands).then(|| {
                format!("{}{}", bag[0], command_suffixes[i % command_suffixes.len()])
            });
            Template {
                problem: bag[0..3].to_vec(),
                clarify: bag[3..5].to_vec(),
                detail: bag[5..7].to_vec(),
                solution: bag[7..11].to_vec(),
                command,
            }
        })
        .collect();

    let mut examples = Vec::with_capacity(cfg.n_dialogs);
    for d in 0..cfg.n_dialogs {
        let template_idx = d % cfg.n_templates;
        let template = &templates[template_idx];
        let slot = slots[rng.gen_range(0..slots.len())].clone();

        let mut problem = format!(
            "hi my {} {} keeps failing after the {} {}",
            slot, template.problem[0], template.problem[1], template.problem[2]
        );
        if let Some(command) = &template.command {
            problem.push_str(&format!(" when i run {command}"));
        }
        if rng.gen_bool(0.5) {
            problem.push_str(&format!(" {}", fillers[rng.gen_range(0..fillers.len())]));
        }
        let clarify = format!(
            "have you tried checking the {} {} settings",
            template.clarify[0], template.clarify[1]
        );
        let detail = format!(
            "yes the {} {} output still shows the {} error",
            template.detail[0], template.detail[1], slot
        );
        let solution_slot = cfg.slot_in_solution.then_some(slot.as_str());
        let solution = template.solution_text(solution_slot);

        let turns = vec![
            Utterance::new(Speaker::A, problem),
            Utterance::new(Speaker::B, clarify),
            Utterance::new(Speaker::A, detail),
        ];

        // Candidate set: the real solution plus distractor solutions from
        // other templates (and, in slot mode, wrong-slot variants of the
        // same template) plus filler noise.
        let mut texts: Vec<String> = vec![solution.clone()];
        let mut guard = 0;
        while texts.len() < cfg.candidates_per_example && guard < 1000 {
            guard += 1;
            let candidate_text = if cfg.slot_in_solution {
                let ti = rng.gen_range(0..templates.len());
                if ti == template_idx {
                    continue;
                }
                let wrong_slot = &slots[rng.gen_range(0..slots.len())];
                templates[ti].solution_text(Some(wrong_slot))
            } else {
                let ti = rng.gen_range(0..templates.len());
                if ti == template_idx {
                    continue;
                }
                templates[ti].solution_text(None)
            };
            if texts.contains(&candidate_text) {
                continue;
            }
            texts.push(candidate_text);
        }
        while texts.len() < cfg.candidates_per_example {
            let noise = format!(
                "maybe look into the {} {} {} thing",
                fillers[rng.gen_range(0..fillers.len())],
                fillers[rng.gen_range(0..fillers.len())],
                fillers[rng.gen_range(0..fillers.len())]
            );
            if !texts.contains(&noise) {
                texts.push(noise);
            }
        }
        let mut order: Vec<usize> = (0..texts.len()).collect();
        order.shuffle(&mut rng);
        let mut candidates = Vec::with_capacity(texts.len());
        let mut correct_id = String::new();
        for (position, &text_idx) in order.iter().enumerate() {
            let id = format!("c{position:02}");
            if text_idx == 0 {
                correct_id = id.clone();
            }
            candidates.push(Candidate::new(id, &texts[text_idx]));
        }

        examples.push(Example {
            dialog_id: format!("dlg-{d:04}"),
            context_tokens: flatten_turns(&turns),
            turns,
            candidates,
            correct_ids: [correct_id].into_iter().collect(),
            knowledge: None,
            subtask: Subtask::S1,
        });
    }

    let train_n = ((cfg.n_dialogs as f64) * cfg.train_frac).round() as usize;
    let valid_n = ((cfg.n_dialogs as f64) * cfg.valid_frac).round() as usize;
    let train_n = train_n.min(cfg.n_dialogs);
    let valid_n = valid_n.min(cfg.n_dialogs - train_n);
    let mut iter = examples.into_iter();
    let train: Vec<Example> = iter.by_ref().take(train_n).collect();
    let valid: Vec<Example> = iter.by_ref().take(valid_n).collect();
    let test: Vec<Example> = iter.collect();

    let man_pages = templates
        .iter()
        .filter_map(|t| {
            let command = t.command.as_ref()?;
            let text = format!(
                "NAME\n    {command} - manage the {} {} service state\n\nDESCRIPTION\n    The {command} service handles {} {} {} requests. Restarting {command} clears stale {} records after a failed {}. Use the {} option to inspect {} activity.\n",
                t.problem[0], t.problem[1],
                t.problem[0], t.problem[1], t.problem[2],
                t.problem[0], t.problem[2],
                t.detail[0], t.problem[1],
            );
            Some((format!("{command}.txt"), text))
        })
        .collect();

    let mut pool_texts: Vec<String> = train
        .iter()
        .chain(valid.iter())
        .chain(test.iter())
        .flat_map(|e| e.candidates.iter().map(|c| c.normalized_text()))
        .collect();
    pool_texts.sort();
    pool_texts.dedup();
    let pool = pool_texts
        .into_iter()
        .enumerate()
        .map(|(i, text)| Candidate::new(format!("g{i:05}"), &text))
        .collect();

    Ok(SynthOutput {
        train,
        valid,
        test,
        man_pages,
        pool,
    })
}

/// Writes `train.jsonl`, `valid.jsonl`, `test.jsonl`, `pool.jsonl`, and a
/// `manpages/` directory under `dir`.
pub fn write_synthetic(output: &SynthOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    save_dataset(&dir.join("train.jsonl"), &output.train, Some("train"))?;
    save_dataset(&dir.join("valid.jsonl"), &output.valid, Some("valid"))?;
    save_dataset(&dir.join("test.jsonl"), &output.test, Some("test"))?;

    let man_dir = dir.join("manpages");
    std::fs::create_dir_all(&man_dir).map_err(|e| Error::io(man_dir.display().to_string(), e))?;
    for (name, text) in &output.man_pages {
        let path = man_dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    }

    let pool_path = dir.join("pool.jsonl");
    let mut lines = String::new();
    for candidate in &output.pool {
        lines.push_str(&format!(
            "{}\n",
            serde_json::json!({"id": candidate.id, "text": candidate.tokens.join(" ")})
        ));
    }
    std::fs::write(&pool_path, lines).map_err(|e| Error::io(pool_path.display().to_string(), e))?;
    Ok(())
}

/// Reads a `pool.jsonl` written by [`write_synthetic`].
pub fn load_pool(path: &Path) -> Result<Vec<Candidate>> {
    use std::io::BufRead;
    #[derive(serde::Deserialize)]
    struct Line {
        id: String,
        text: String,
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut pool = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            record: idx,
            message: e.to_string(),
        })?;
        pool.push(Candidate::new(parsed.id, &parsed.text));
    }
    Ok(pool)
}
