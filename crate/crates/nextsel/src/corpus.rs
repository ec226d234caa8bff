//! Data model and ingestion for dialogs, candidate sets, and subtask
//! regimes, plus tokenization and vocabulary construction.
//!
//! Dataset files are line-delimited JSON records:
//!
//! ```text
//! {"split": "train", "example_id": "dlg-0001",
//!  "context": [{"speaker": "A", "text": "my frobd daemon keeps crashing"}, ...],
//!  "candidates": [{"id": "c00", "text": "restart the frobd service"}, ...],
//!  "correct_ids": ["c00"]}
//! ```
//!
//! Unknown fields are ignored. `split` is optional.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Padding token, index 0 in every vocabulary.
pub const PAD_TOKEN: &str = "__pad__";
/// Unknown-token placeholder, index 1.
pub const UNK_TOKEN: &str = "__unk__";
/// End-of-turn separator inserted between concatenated turns, index 2.
pub const EOT_TOKEN: &str = "__eot__";

/// Candidate id of the "no provided candidate is correct" sentinel.
pub const NONE_ID: &str = "__none__";
/// Literal surface text used when the sentinel is scored like an ordinary
/// candidate.
pub const NONE_TEXT: &str = "none";

pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;
pub const EOT_INDEX: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Speaker {
    A,
    B,
    Retrieved,
}

impl Speaker {
    pub fn label(&self) -> &'static str {
        match self {
            Speaker::A => "A",
            Speaker::B => "B",
            Speaker::Retrieved => "retrieved",
        }
    }

    pub fn other(&self) -> Speaker {
        match self {
            Speaker::A => Speaker::B,
            Speaker::B => Speaker::A,
            Speaker::Retrieved => Speaker::A,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Utterance {
    pub fn new(speaker: Speaker, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Utterance { speaker, text, tokens }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dialog {
    pub id: String,
    pub turns: Vec<Utterance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: String,
    pub tokens: Vec<String>,
}

impl Candidate {
    pub fn new(id: impl Into<String>, text: &str) -> Self {
        Candidate {
            id: id.into(),
            tokens: tokenize(text),
        }
    }

    /// Canonical single-space form used for candidate-reduction membership.
    pub fn normalized_text(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subtask {
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl Subtask {
    pub fn from_number(n: u8) -> Result<Subtask> {
        match n {
            1 => Ok(Subtask::S1),
            2 => Ok(Subtask::S2),
            3 => Ok(Subtask::S3),
            4 => Ok(Subtask::S4),
            5 => Ok(Subtask::S5),
            other => Err(Error::InvalidArgument(format!("subtask {other} is not in 1..=5"))),
        }
    }

    pub fn number(&self) -> u8 {
        match self {
            Subtask::S1 => 1,
            Subtask::S2 => 2,
            Subtask::S3 => 3,
            Subtask::S4 => 4,
            Subtask::S5 => 5,
        }
    }
}

/// One ranking instance: a flattened context, its candidate set, and the
/// correct-candidate ids. The original turns are retained so augmented
/// datasets can be re-serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub dialog_id: String,
    pub turns: Vec<Utterance>,
    pub context_tokens: Vec<String>,
    pub candidates: Vec<Candidate>,
    pub correct_ids: BTreeSet<String>,
    pub knowledge: Option<Vec<String>>,
    pub subtask: Subtask,
}

impl Example {
    pub fn is_correct(&self, candidate_id: &str) -> bool {
        self.correct_ids.contains(candidate_id)
    }
}

/// Lowercases, splits on whitespace, and strips surrounding punctuation
/// while preserving hyphens, underscores, and inner dots, so command names
/// like `apt-get` and flags like `-la` survive.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let token = raw
                .trim_matches(|c: char| c.is_ascii_punctuation() && c != '-' && c != '_')
                .to_lowercase();
            if token.is_empty() {
                None
            } else {
                Some(token)
            }
        })
        .collect()
}

/// Concatenates the turns of a dialog in order, each followed by the
/// end-of-turn separator.
pub fn flatten_context(dialog: &Dialog) -> Vec<String> {
    flatten_turns(&dialog.turns)
}

pub fn flatten_turns(turns: &[Utterance]) -> Vec<String> {
    let mut out = Vec::with_capacity(turns.iter().map(|t| t.tokens.len() + 1).sum());
    for turn in turns {
        out.extend(turn.tokens.iter().cloned());
        out.push(EOT_TOKEN.to_string());
    }
    out
}

/// Keeps the most recent `max_len` tokens of a context.
pub fn truncate_context(tokens: &[String], max_len: usize) -> &[String] {
    if tokens.len() > max_len {
        &tokens[tokens.len() - max_len..]
    } else {
        tokens
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawTurn {
    speaker: String,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawCandidate {
    id: String,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<String>,
    example_id: String,
    context: Vec<RawTurn>,
    candidates: Vec<RawCandidate>,
    #[serde(default)]
    correct_ids: Vec<String>,
}

/// Maps speaker labels to the two-party enum. `A`, `B`, and `retrieved` are
/// recognized directly (case-insensitive); any other labeling scheme is
/// accepted by assigning the first distinct label to A and the second to B.
struct SpeakerMapper {
    assigned: HashMap<String, Speaker>,
}

impl SpeakerMapper {
    fn new() -> Self {
        SpeakerMapper { assigned: HashMap::new() }
    }

    fn map(&mut self, label: &str) -> Result<Speaker> {
        match label.to_lowercase().as_str() {
            "a" => return Ok(Speaker::A),
            "b" => return Ok(Speaker::B),
            "retrieved" => return Ok(Speaker::Retrieved),
            _ => {}
        }
        if let Some(&s) = self.assigned.get(label) {
            return Ok(s);
        }
        let next = match self.assigned.len() {
            0 => Speaker::A,
            1 => Speaker::B,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "more than two distinct speaker labels (saw {label:?})"
                )))
            }
        };
        self.assigned.insert(label.to_string(), next);
        Ok(next)
    }
}

/// Loads a line-delimited dataset file, applying the given subtask's
/// invariants. For subtask 4 the None sentinel is appended to every
/// candidate list, and records with no listed correct candidate get
/// `correct_ids = {NONE_ID}`.
pub fn load_dataset(path: &Path, subtask: Subtask) -> Result<Vec<Example>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut examples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            record: idx,
            message: e.to_string(),
        })?;
        let example = example_from_record(record, subtask).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            record: idx,
            message: e.to_string(),
        })?;
        examples.push(example);
    }
    Ok(examples)
}

fn example_from_record(record: RawRecord, subtask: Subtask) -> Result<Example> {
    if record.context.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "example {} has no context turns",
            record.example_id
        )));
    }
    if record.candidates.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "example {} has no candidate list",
            record.example_id
        )));
    }

    let mut mapper = SpeakerMapper::new();
    let mut turns = Vec::with_capacity(record.context.len());
    for raw in &record.context {
        turns.push(Utterance::new(mapper.map(&raw.speaker)?, raw.text.as_str()));
    }

    let mut candidates: Vec<Candidate> = record
        .candidates
        .iter()
        .map(|c| Candidate::new(c.id.as_str(), &c.text))
        .collect();
    let mut correct_ids: BTreeSet<String> = record.correct_ids.iter().cloned().collect();

    if subtask == Subtask::S4 {
        if !candidates.iter().any(|c| c.id == NONE_ID) {
            candidates.push(Candidate::new(NONE_ID, NONE_TEXT));
        }
        if correct_ids.is_empty() {
            correct_ids.insert(NONE_ID.to_string());
        }
    }

    let candidate_ids: BTreeSet<&str> = candidates.iter().map(|c| c.id.as_str()).collect();
    for id in &correct_ids {
        if !candidate_ids.contains(id.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "example {}: correct id {id:?} is not in the candidate list",
                record.example_id
            )));
        }
    }

    match subtask {
        Subtask::S1 => {
            if correct_ids.len() != 1 {
                return Err(Error::InvalidArgument(format!(
                    "example {}: subtask 1 needs exactly 1 correct candidate, got {}",
                    record.example_id,
                    correct_ids.len()
                )));
            }
        }
        Subtask::S3 => {
            if correct_ids.is_empty() || correct_ids.len() > 5 {
                return Err(Error::InvalidArgument(format!(
                    "example {}: subtask 3 needs 1..=5 correct candidates, got {}",
                    record.example_id,
                    correct_ids.len()
                )));
            }
        }
        Subtask::S2 | Subtask::S5 => {
            if correct_ids.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "example {}: no correct candidate listed",
                    record.example_id
                )));
            }
        }
        Subtask::S4 => {}
    }

    let context_tokens = flatten_turns(&turns);
    Ok(Example {
        dialog_id: record.example_id,
        turns,
        context_tokens,
        candidates,
        correct_ids,
        knowledge: None,
        subtask,
    })
}

/// Writes examples back out in the dataset format. Token sequences are
/// serialized as single-space joined text, which re-tokenizes to the same
/// sequences.
pub fn save_dataset(path: &Path, examples: &[Example], split: Option<&str>) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    for example in examples {
        let record = RawRecord {
            split: split.map(|s| s.to_string()),
            example_id: example.dialog_id.clone(),
            context: example
                .turns
                .iter()
                .map(|t| RawTurn {
                    speaker: t.speaker.label().to_string(),
                    text: t.tokens.join(" "),
                })
                .collect(),
            candidates: example
                .candidates
                .iter()
                .map(|c| RawCandidate {
                    id: c.id.clone(),
                    text: c.tokens.join(" "),
                })
                .collect(),
            correct_ids: example.correct_ids.iter().cloned().collect(),
        };
        let line = serde_json::to_string(&record).expect("record is serializable");
        writeln!(file, "{line}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

/// Reconstructs full dialogs from a dataset file: context turns plus the
/// first correct candidate as the final turn. Records whose only correct
/// answer is the None sentinel are skipped. Used to build sub-dialog pools.
pub fn load_dialogs(path: &Path, subtask: Subtask) -> Result<Vec<Dialog>> {
    let examples = load_dataset(path, subtask)?;
    Ok(dialogs_from_examples(&examples))
}

pub fn dialogs_from_examples(examples: &[Example]) -> Vec<Dialog> {
    let mut dialogs = Vec::new();
    for example in examples {
        let response = example
            .correct_ids
            .iter()
            .find(|id| id.as_str() != NONE_ID)
            .and_then(|id| example.candidates.iter().find(|c| &c.id == id));
        let Some(response) = response else { continue };
        let responder = example
            .turns
            .last()
            .map(|t| t.speaker.other())
            .unwrap_or(Speaker::B);
        let mut turns = example.turns.clone();
        turns.push(Utterance::new(responder, response.tokens.join(" ")));
        dialogs.push(Dialog {
            id: example.dialog_id.clone(),
            turns,
        });
    }
    dialogs
}

/// Token and character index tables with fixed reserved entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    token_index: HashMap<String, usize>,
    chars: Vec<char>,
    char_index: HashMap<char, usize>,
}

impl Vocabulary {
    /// Indexes every token with corpus frequency >= `min_count`, ordered by
    /// (frequency desc, token asc) after the reserved entries. Characters
    /// seen in any counted token are indexed after a reserved unknown-char
    /// slot.
    pub fn build(examples: &[Example], min_count: usize) -> Result<Vocabulary> {
        if min_count < 1 {
            return Err(Error::InvalidArgument("min_count must be >= 1".to_string()));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut char_set: BTreeSet<char> = BTreeSet::new();
        let mut all_tokens: Vec<&str> = Vec::new();
        for example in examples {
            all_tokens.extend(example.context_tokens.iter().map(|s| s.as_str()));
            for cand in &example.candidates {
                all_tokens.extend(cand.tokens.iter().map(|s| s.as_str()));
            }
            if let Some(knowledge) = &example.knowledge {
                all_tokens.extend(knowledge.iter().map(|s| s.as_str()));
            }
        }
        for token in all_tokens {
            char_set.extend(token.chars());
            if token == PAD_TOKEN || token == UNK_TOKEN || token == EOT_TOKEN {
                continue;
            }
            *counts.entry(token).or_insert(0) += 1;
        }
        char_set.extend(PAD_TOKEN.chars());

        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count)
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut tokens = vec![
            PAD_TOKEN.to_string(),
            UNK_TOKEN.to_string(),
            EOT_TOKEN.to_string(),
        ];
        tokens.extend(ranked.into_iter().map(|(t, _)| t.to_string()));
        let token_index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();

        let mut chars = vec!['\u{0}'];
        chars.extend(char_set.into_iter());
        let char_index = chars.iter().enumerate().map(|(i, c)| (*c, i)).collect();

        Ok(Vocabulary {
            tokens,
            token_index,
            chars,
            char_index,
        })
    }

    pub fn token_index(&self, token: &str) -> usize {
        self.token_index.get(token).copied().unwrap_or(UNK_INDEX)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_index.contains_key(token)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Index of a character, 0 (unknown) if unseen.
    pub fn char_index(&self, c: char) -> usize {
        self.char_index.get(&c).copied().unwrap_or(0)
    }

    pub fn char_len(&self) -> usize {
        self.chars.len()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    /// Rebuilds a vocabulary from its serialized token and char lists.
    pub fn from_parts(tokens: Vec<String>, chars: Vec<char>) -> Vocabulary {
        let token_index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let char_index = chars.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        Vocabulary {
            tokens,
            token_index,
            chars,
            char_index,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Sudo Apt-Get UPDATE"), vec!["sudo", "apt-get", "update"]);
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(tokenize("try `ls -la`."), vec!["try", "ls", "-la"]);
    }

    #[test]
    fn tokenize_is_idempotent_on_its_own_output() {
        let tokens = tokenize("Hello, world! `ls -la` file.txt __eot__");
        let rejoined = tokens.join(" ");
        assert_eq!(tokenize(&rejoined), tokens);
    }

    #[test]
    fn flatten_inserts_separators() {
        let dialog = Dialog {
            id: "d".to_string(),
            turns: vec![
                Utterance::new(Speaker::A, "hi"),
                Utterance::new(Speaker::B, "hello"),
            ],
        };
        assert_eq!(flatten_context(&dialog), vec!["hi", "__eot__", "hello", "__eot__"]);

        let single = Dialog {
            id: "s".to_string(),
            turns: vec![Utterance::new(Speaker::A, "ok")],
        };
        assert_eq!(flatten_context(&single), vec!["ok", "__eot__"]);
    }

    #[test]
    fn flatten_length_is_tokens_plus_turn_count() {
        let dialog = Dialog {
            id: "d".to_string(),
            turns: vec![
                Utterance::new(Speaker::A, "one two three"),
                Utterance::new(Speaker::B, "four"),
                Utterance::new(Speaker::A, "five six"),
            ],
        };
        let total: usize = dialog.turns.iter().map(|t| t.tokens.len()).sum();
        assert_eq!(flatten_context(&dialog).len(), total + dialog.turns.len());
    }

    fn write_lines(lines: &[&str]) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        std::fs::write(&path, lines.join("\n")).unwrap();
        (dir, path)
    }

    fn subtask1_record(n_candidates: usize) -> String {
        let candidates: Vec<String> = (0..n_candidates)
            .map(|i| format!(r#"{{"id": "c{i:02}", "text": "candidate number {i}"}}"#))
            .collect();
        format!(
            r#"{{"example_id": "ex-0", "context": [{{"speaker": "A", "text": "hi there"}}, {{"speaker": "B", "text": "hello"}}], "candidates": [{}], "correct_ids": ["c07"]}}"#,
            candidates.join(", ")
        )
    }

    #[test]
    fn load_subtask1_hundred_candidates() {
        let (_dir, path) = write_lines(&[&subtask1_record(100)]);
        let examples = load_dataset(&path, Subtask::S1).unwrap();
        assert_eq!(examples.len(), 1);
        assert_eq!(examples[0].candidates.len(), 100);
        assert_eq!(examples[0].correct_ids.len(), 1);
    }

    #[test]
    fn load_subtask4_without_correct_gets_sentinel() {
        let record = r#"{"example_id": "ex-4", "context": [{"speaker": "A", "text": "anyone know why x fails"}], "candidates": [{"id": "c00", "text": "unrelated answer"}], "correct_ids": []}"#;
        let (_dir, path) = write_lines(&[record]);
        let examples = load_dataset(&path, Subtask::S4).unwrap();
        let ex = &examples[0];
        assert!(ex.correct_ids.contains(NONE_ID));
        assert!(ex.candidates.iter().any(|c| c.id == NONE_ID));
    }

    #[test]
    fn load_missing_candidates_names_record() {
        let good = subtask1_record(100);
        let bad = r#"{"example_id": "ex-bad", "context": [{"speaker": "A", "text": "hi"}], "candidates": [], "correct_ids": []}"#;
        let (_dir, path) = write_lines(&[&good, bad]);
        let err = load_dataset(&path, Subtask::S1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("record 1"), "got: {msg}");
        assert!(msg.contains("candidate"), "got: {msg}");
    }

    #[test]
    fn unknown_speaker_labels_are_accepted() {
        let record = r#"{"example_id": "ex-s", "context": [{"speaker": "student", "text": "hi"}, {"speaker": "advisor", "text": "hello"}], "candidates": [{"id": "c0", "text": "take eecs281"}], "correct_ids": ["c0"]}"#;
        let (_dir, path) = write_lines(&[record]);
        let examples = load_dataset(&path, Subtask::S1).unwrap();
        assert_eq!(examples[0].turns[0].speaker, Speaker::A);
        assert_eq!(examples[0].turns[1].speaker, Speaker::B);
    }

    #[test]
    fn round_trip_preserves_examples() {
        let (_dir, path) = write_lines(&[&subtask1_record(10)]);
        let examples = load_dataset(&path, Subtask::S1).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("roundtrip.jsonl");
        save_dataset(&out, &examples, Some("train")).unwrap();
        let reloaded = load_dataset(&out, Subtask::S1).unwrap();

        assert_eq!(examples.len(), reloaded.len());
        for (a, b) in examples.iter().zip(reloaded.iter()) {
            assert_eq!(a.dialog_id, b.dialog_id);
            assert_eq!(a.context_tokens, b.context_tokens);
            assert_eq!(a.candidates, b.candidates);
            assert_eq!(a.correct_ids, b.correct_ids);
        }
    }

    fn example_with_tokens(tokens: &[&str]) -> Example {
        Example {
            dialog_id: "d".to_string(),
            turns: vec![],
            context_tokens: tokens.iter().map(|s| s.to_string()).collect(),
            candidates: vec![],
            correct_ids: BTreeSet::new(),
            knowledge: None,
            subtask: Subtask::S1,
        }
    }

    #[test]
    fn vocabulary_min_count_filters() {
        let examples = vec![example_with_tokens(&["a", "a", "b"])];
        let vocab = Vocabulary::build(&examples, 2).unwrap();
        assert!(vocab.contains("a"));
        assert_eq!(vocab.token_index("b"), UNK_INDEX);
    }

    #[test]
    fn vocabulary_of_empty_corpus_is_reserved_only() {
        let vocab = Vocabulary::build(&[], 1).unwrap();
        assert_eq!(vocab.len(), 3);
        assert_eq!(vocab.token(PAD_INDEX), PAD_TOKEN);
        assert_eq!(vocab.token(UNK_INDEX), UNK_TOKEN);
        assert_eq!(vocab.token(EOT_INDEX), EOT_TOKEN);
    }

    #[test]
    fn vocabulary_is_deterministic() {
        let examples = vec![
            example_with_tokens(&["zeta", "alpha", "alpha", "mid", "mid"]),
            example_with_tokens(&["mid", "zeta", "beta"]),
        ];
        let a = Vocabulary::build(&examples, 1).unwrap();
        let b = Vocabulary::build(&examples, 1).unwrap();
        assert_eq!(a, b);
        // mid: 3, alpha: 2, zeta: 2, beta: 1; frequency desc then token asc.
        assert_eq!(a.token(3), "mid");
        assert_eq!(a.token(4), "alpha");
        assert_eq!(a.token(5), "zeta");
        assert_eq!(a.token(6), "beta");
    }

    #[test]
    fn vocabulary_rejects_zero_min_count() {
        assert!(Vocabulary::build(&[], 0).is_err());
    }

    #[test]
    fn truncate_keeps_most_recent() {
        let tokens: Vec<String> = (0..10).map(|i| i.to_string()).collect();
        let kept = truncate_context(&tokens, 3);
        assert_eq!(kept, &["7", "8", "9"]);
    }
}
