//! External-knowledge extraction: command documentation pages are indexed
//! into entity and relation hashtables with TF-IDF statistics, and course
//! KB records are templated into natural-language sentences.
//!
//! Page files are plain text with `NAME` and `DESCRIPTION` section
//! headings. The one-sentence `NAME` summary (`command - summary words`)
//! supplies relation keys; descriptions are the retrieval documents from
//! which snippets are assembled.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::tokenize;
use crate::error::{Error, Result};
use crate::tfidf::{cosine, SparseVec, TfidfModel};

/// Tokens longer than this are also checked for partial (substring)
/// matches against command names.
pub const PARTIAL_MATCH_MIN_LEN: usize = 8;
/// Commands kept after TF-IDF ranking.
pub const DEFAULT_TOP_COMMANDS: usize = 5;
/// Snippet budget in tokens.
pub const DEFAULT_MAX_SNIPPET_WORDS: usize = 200;

/// Common English words excluded from relation keys.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "cannot", "could", "did", "do", "does", "doing", "down", "during", "each",
    "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
    "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "itself", "just", "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of",
    "off", "on", "once", "only", "or", "other", "ought", "our", "ours", "ourselves", "out",
    "over", "own", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their",
    "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those", "through",
    "to", "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where",
    "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours",
    "yourself", "yourselves",
];

pub fn stopword_set() -> HashSet<&'static str> {
    STOPWORDS.iter().copied().collect()
}

/// One parsed documentation page.
#[derive(Debug, Clone, PartialEq)]
pub struct ManPage {
    pub command: String,
    /// Stopword-filtered tokens of the one-sentence NAME summary.
    pub name_summary: Vec<String>,
    /// Description split into sentences.
    pub description: Vec<String>,
}

impl ManPage {
    pub fn description_tokens(&self) -> Vec<String> {
        let mut out = Vec::new();
        for sentence in &self.description {
            out.extend(tokenize(sentence));
        }
        out
    }
}

/// Splits text into sentences on `.`, `!`, or `?` followed by whitespace.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        if matches!(c, '.' | '!' | '?') {
            match chars.peek() {
                Some(next) if next.is_whitespace() => {
                    let s = current.trim();
                    if !s.is_empty() {
                        sentences.push(s.to_string());
                    }
                    current.clear();
                }
                _ => {}
            }
        }
    }
    let s = current.trim();
    if !s.is_empty() {
        sentences.push(s.to_string());
    }
    sentences
}

fn is_section_heading(line: &str) -> bool {
    let t = line.trim();
    !t.is_empty()
        && !line.starts_with(char::is_whitespace)
        && t.chars().all(|c| c.is_ascii_uppercase() || c.is_whitespace())
}

fn section_text(lines: &[&str], heading: &str) -> Option<String> {
    let start = lines.iter().position(|l| l.trim() == heading)? + 1;
    let mut collected = Vec::new();
    for line in &lines[start..] {
        if is_section_heading(line) {
            break;
        }
        collected.push(line.trim());
    }
    let text = collected.join(" ").trim().to_string();
    if text.is_empty() {
        None
    } else {
        Some(text)
    }
}

/// Parses one page. The command name is the text before the first ` - ` in
/// the NAME section; the words after it become the (stopword-filtered)
/// summary.
pub fn parse_man_page(text: &str) -> Option<ManPage> {
    let lines: Vec<&str> = text.lines().collect();
    let name_text = section_text(&lines, "NAME")?;
    let (command, summary_text) = match name_text.split_once(" - ") {
        Some((cmd, rest)) => (cmd.trim().to_string(), rest.to_string()),
        None => (
            name_text.split_whitespace().next()?.to_string(),
            String::new(),
        ),
    };
    if command.is_empty() {
        return None;
    }
    let stop = stopword_set();
    let name_summary = tokenize(&summary_text)
        .into_iter()
        .filter(|t| !stop.contains(t.as_str()))
        .collect();
    let description = section_text(&lines, "DESCRIPTION")
        .map(|text| split_sentences(&text))
        .unwrap_or_default();
    Some(ManPage {
        command,
        name_summary,
        description,
    })
}

/// Parses every file in a directory, in filename order. Pages without a
/// NAME section are skipped with a warning.
pub fn parse_man_pages(dir: &Path) -> Result<Vec<ManPage>> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir.display().to_string(), e))?
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::io(dir.display().to_string(), e))?;
    entries.sort_by_key(|e| e.file_name());

    let mut pages = Vec::new();
    for entry in entries {
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        match parse_man_page(&text) {
            Some(page) => pages.push(page),
            None => log::warn!("skipping {}: no NAME section", path.display()),
        }
    }
    Ok(pages)
}

/// Entity and relation hashtables plus TF-IDF statistics over command
/// descriptions (one document per command).
pub struct KnowledgeIndex {
    entity: BTreeMap<String, ManPage>,
    relation: BTreeMap<String, Vec<String>>,
    tfidf: TfidfModel,
    doc_vectors: BTreeMap<String, SparseVec>,
}

/// Which matching stage produced each command, for fallback-order checks.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct MatchTrace {
    pub direct: Vec<String>,
    pub partial: Vec<String>,
    pub relation: Vec<String>,
}

impl KnowledgeIndex {
    /// Builds the index: commands key the entity table, filtered summary
    /// words key the relation table (values list the source commands), and
    /// each command description becomes one TF-IDF document.
    pub fn build(pages: Vec<ManPage>, stopwords: &HashSet<&str>) -> Result<KnowledgeIndex> {
        if pages.is_empty() {
            return Err(Error::InvalidArgument("no pages to index".to_string()));
        }
        let mut entity = BTreeMap::new();
        let mut relation: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for page in pages {
            for word in &page.name_summary {
                if stopwords.contains(word.as_str()) {
                    continue;
                }
                let commands = relation.entry(word.clone()).or_default();
                if !commands.contains(&page.command) {
                    commands.push(page.command.clone());
                }
            }
            entity.insert(page.command.clone(), page);
        }
        let docs: Vec<Vec<String>> = entity.values().map(|p| p.description_tokens()).collect();
        let tfidf = TfidfModel::fit(docs.iter().map(|d| d.as_slice()));
        let doc_vectors = entity
            .values()
            .map(|p| (p.command.clone(), tfidf.vector(&p.description_tokens())))
            .collect();
        Ok(KnowledgeIndex {
            entity,
            relation,
            tfidf,
            doc_vectors,
        })
    }

    pub fn entity(&self, command: &str) -> Option<&ManPage> {
        self.entity.get(command)
    }

    pub fn relation(&self, word: &str) -> Option<&[String]> {
        self.relation.get(word).map(|v| v.as_slice())
    }

    pub fn commands(&self) -> impl Iterator<Item = &str> {
        self.entity.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.entity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entity.is_empty()
    }

    pub fn tfidf(&self) -> &TfidfModel {
        &self.tfidf
    }
}

/// Finds commands relevant to a context: (1) direct entity-key matches,
/// (2) substring matches in either direction for tokens longer than
/// [`PARTIAL_MATCH_MIN_LEN`], and (3) only if both found nothing, relation
/// lookups pointing back to commands. De-duplicated in first-mention order.
pub fn match_commands(context_tokens: &[String], index: &KnowledgeIndex) -> Vec<String> {
    match_commands_traced(context_tokens, index).0
}

/// [`match_commands`] plus the per-stage trace.
pub fn match_commands_traced(
    context_tokens: &[String],
    index: &KnowledgeIndex,
) -> (Vec<String>, MatchTrace) {
    let mut trace = MatchTrace::default();
    let mut out: Vec<String> = Vec::new();
    let mut push = |cmd: &str, out: &mut Vec<String>, stage: &mut Vec<String>| {
        if !out.iter().any(|c| c == cmd) {
            out.push(cmd.to_string());
        }
        if !stage.iter().any(|c| c == cmd) {
            stage.push(cmd.to_string());
        }
    };

    for token in context_tokens {
        if index.entity.contains_key(token.as_str()) {
            push(token, &mut out, &mut trace.direct);
        }
        if token.chars().count() > PARTIAL_MATCH_MIN_LEN {
            // Partial match in either direction: the token contains a
            // command name or a command name contains the token.
            for command in index.entity.keys() {
                if command == token {
                    continue;
                }
                if token.contains(command.as_str()) || command.contains(token.as_str()) {
                    push(command, &mut out, &mut trace.partial);
                }
            }
        }
    }

    if out.is_empty() {
        for token in context_tokens {
            if let Some(commands) = index.relation.get(token.as_str()) {
                for command in commands {
                    push(command, &mut out, &mut trace.relation);
                }
            }
        }
    }

    (out, trace)
}

/// Ranks matched commands by the TF-IDF cosine of their descriptions
/// against the context, keeps the top `k`, splits those descriptions into
/// sentences ranked by descending cosine against the context, and emits
/// tokens until `max_words` is reached (truncating mid-sentence).
pub fn select_snippet(
    commands: &[String],
    context_tokens: &[String],
    index: &KnowledgeIndex,
    k: usize,
    max_words: usize,
) -> Vec<String> {
    if commands.is_empty() || max_words == 0 {
        return Vec::new();
    }
    let context_vec = index.tfidf.vector(context_tokens);

    let mut ranked_commands: Vec<(&String, f64)> = commands
        .iter()
        .filter(|c| index.entity.contains_key(c.as_str()))
        .map(|c| {
            let score = index
                .doc_vectors
                .get(c.as_str())
                .map(|v| cosine(v, &context_vec))
                .unwrap_or(0.0);
            (c, score)
        })
        .collect();
    ranked_commands.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(b.0))
    });
    ranked_commands.truncate(k);

    let mut sentences: Vec<(f64, &str, usize, &String)> = Vec::new();
    for (command, _) in &ranked_commands {
        let page = &index.entity[command.as_str()];
        for (i, sentence) in page.description.iter().enumerate() {
            let v = index.tfidf.vector(&tokenize(sentence));
            sentences.push((cosine(&v, &context_vec), command.as_str(), i, sentence));
        }
    }
    sentences.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.1.cmp(b.1))
            .then_with(|| a.2.cmp(&b.2))
    });

    let mut snippet = Vec::with_capacity(max_words);
    for (_, _, _, sentence) in sentences {
        for token in tokenize(sentence) {
            if snippet.len() >= max_words {
                return snippet;
            }
            snippet.push(token);
        }
    }
    snippet
}

/// One course KB record. Unknown attributes are kept in `extra`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseRecord {
    pub course: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_size: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credits: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discussion: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub days: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_of_day: Option<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// Renders a course record as one sentence with a fixed clause order:
/// id/name, workload, class size, credits, discussion, meeting times.
/// Absent fields omit their clause.
pub fn course_to_sentence(rec: &CourseRecord) -> String {
    let mut clauses: Vec<String> = Vec::new();
    match &rec.name {
        Some(name) => clauses.push(format!("{} is {}", rec.course, name)),
        None => clauses.push(rec.course.clone()),
    }
    if let Some(workload) = &rec.workload {
        clauses.push(format!("has {workload} workload"));
    }
    if let Some(size) = &rec.class_size {
        clauses.push(format!("{size} class size"));
    }
    if let Some(credits) = &rec.credits {
        clauses.push(format!("{credits} credits"));
    }
    match rec.discussion {
        Some(true) => clauses.push("has a discussion".to_string()),
        Some(false) => clauses.push("has no discussion".to_string()),
        None => {}
    }
    if !rec.days.is_empty() {
        let mut when = format!("the classes are on {}", rec.days.join(", "));
        if let Some(time) = &rec.time_of_day {
            when.push(' ');
            when.push_str(time);
        }
        clauses.push(when);
    }
    clauses.join(", ")
}

/// Loads line-delimited course records.
pub fn load_courses(path: &Path) -> Result<Vec<CourseRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CourseRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            record: idx,
            message: e.to_string(),
        })?;
        if rec.course.is_empty() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                record: idx,
                message: "empty course id".to_string(),
            });
        }
        records.push(rec);
    }
    Ok(records)
}

/// Knowledge for an advising-style dialog: sentences for every course whose
/// id appears in the context, concatenated up to the token budget.
pub fn course_snippet(
    context_tokens: &[String],
    courses: &[CourseRecord],
    max_words: usize,
) -> Vec<String> {
    let mentioned: Vec<&CourseRecord> = courses
        .iter()
        .filter(|rec| {
            let id = rec.course.to_lowercase();
            context_tokens.iter().any(|t| *t == id)
        })
        .collect();
    let mut out = Vec::new();
    for rec in mentioned {
        for token in tokenize(&course_to_sentence(rec)) {
            if out.len() >= max_words {
                return out;
            }
            out.push(token);
        }
    }
    out
}

/// Writes an `example_id -> snippet tokens` cache, one JSON object per line.
pub fn save_snippets(path: &Path, snippets: &[(String, Vec<String>)]) -> Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        example_id: &'a str,
        tokens: &'a [String],
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    for (example_id, tokens) in snippets {
        let line = serde_json::to_string(&Line { example_id, tokens }).expect("serializable");
        writeln!(file, "{line}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

/// Reads a snippet cache written by [`save_snippets`].
pub fn load_snippets(path: &Path) -> Result<Vec<(String, Vec<String>)>> {
    #[derive(Deserialize)]
    struct Line {
        example_id: String,
        tokens: Vec<String>,
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            record: idx,
            message: e.to_string(),
        })?;
        out.push((parsed.example_id, parsed.tokens));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GREP_PAGE: &str = "NAME\n    grep - print lines matching a pattern\n\nDESCRIPTION\n    grep searches the input files for lines containing a match to a given pattern list. When it finds a match in a line, it copies the line to standard output. The grep utility is useful for simple filtering tasks.\n";

    const XSERVER_PAGE: &str = "NAME\n    xserver-xorg - the display server core component\n\nDESCRIPTION\n    The display server accepts requests from client applications to create windows. It renders graphics on behalf of clients.\n";

    const TAR_PAGE: &str = "NAME\n    tar - an archiving utility for tape and disk archives\n\nDESCRIPTION\n    tar creates and extracts archives. An archive stores many files together. It preserves directory structure when extracting.\n";

    fn fixture_index() -> KnowledgeIndex {
        let pages = vec![
            parse_man_page(GREP_PAGE).unwrap(),
            parse_man_page(XSERVER_PAGE).unwrap(),
            parse_man_page(TAR_PAGE).unwrap(),
        ];
        KnowledgeIndex::build(pages, &stopword_set()).unwrap()
    }

    #[test]
    fn parse_extracts_command_and_filtered_summary() {
        let page = parse_man_page(GREP_PAGE).unwrap();
        assert_eq!(page.command, "grep");
        assert_eq!(page.name_summary, vec!["print", "lines", "matching", "pattern"]);
        assert_eq!(page.description.len(), 3);
    }

    #[test]
    fn parse_directory_counts_valid_pages() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("grep.txt"), GREP_PAGE).unwrap();
        std::fs::write(dir.path().join("tar.txt"), TAR_PAGE).unwrap();
        std::fs::write(dir.path().join("xserver-xorg.txt"), XSERVER_PAGE).unwrap();
        let pages = parse_man_pages(dir.path()).unwrap();
        assert_eq!(pages.len(), 3);
    }

    #[test]
    fn page_without_name_section_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("good.txt"), GREP_PAGE).unwrap();
        std::fs::write(
            dir.path().join("broken.txt"),
            "DESCRIPTION\n    An orphaned description with no name heading.\n",
        )
        .unwrap();
        let pages = parse_man_pages(dir.path()).unwrap();
        assert_eq!(pages.len(), 1);
        assert_eq!(pages[0].command, "grep");
    }

    #[test]
    fn index_entity_and_relation_tables() {
        let index = fixture_index();
        assert!(index.entity("grep").is_some());
        assert!(index.relation("pattern").unwrap().contains(&"grep".to_string()));
        // stopwords are filtered from relation keys
        assert!(index.relation("a").is_none());
        assert!(index.relation("the").is_none());
        // every relation value is an entity key
        for commands in index.relation.values() {
            for c in commands {
                assert!(index.entity(c).is_some());
            }
        }
    }

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn direct_match_finds_command() {
        let index = fixture_index();
        let (commands, trace) = match_commands_traced(&toks("how do i use grep here"), &index);
        assert_eq!(commands, vec!["grep"]);
        assert_eq!(trace.direct, vec!["grep"]);
        assert!(trace.relation.is_empty());
    }

    #[test]
    fn partial_match_requires_long_token() {
        let index = fixture_index();
        // 17 chars, contains the entity name
        let (commands, trace) = match_commands_traced(&toks("my xserver-xorg-core install broke"), &index);
        assert_eq!(commands, vec!["xserver-xorg"]);
        assert_eq!(trace.partial, vec!["xserver-xorg"]);

        // a short fragment must not partial-match
        let (commands, _) = match_commands_traced(&toks("xorg is broken"), &index);
        assert!(commands.is_empty() || commands != vec!["xserver-xorg".to_string()]);
    }

    #[test]
    fn relation_fallback_fires_only_when_entity_stages_are_empty() {
        let index = fixture_index();
        // no entity hit; "pattern" points back to grep
        let (commands, trace) = match_commands_traced(&toks("i need to find a pattern"), &index);
        assert_eq!(commands, vec!["grep"]);
        assert_eq!(trace.relation, vec!["grep"]);
        assert!(trace.direct.is_empty());

        // with a direct hit present the relation stage must stay silent
        let (commands, trace) = match_commands_traced(&toks("tar saves a pattern"), &index);
        assert_eq!(commands, vec!["tar"]);
        assert!(trace.relation.is_empty());
    }

    #[test]
    fn matched_commands_are_entity_keys() {
        let index = fixture_index();
        for text in ["grep tar xserver-xorg", "pattern archives windows", "nothing relevant"] {
            for c in match_commands(&toks(text), &index) {
                assert!(index.entity(&c).is_some());
            }
        }
    }

    #[test]
    fn snippet_orders_sentences_by_cosine() {
        let index = fixture_index();
        let context = toks("grep finds a match in a line of the input files");
        let commands = vec!["grep".to_string()];
        let snippet = select_snippet(&commands, &context, &index, 5, 200);

        // independent oracle: rank grep's sentences by cosine directly
        let page = index.entity("grep").unwrap();
        let ctx_vec = index.tfidf().vector(&context);
        let mut scored: Vec<(f64, usize)> = page
            .description
            .iter()
            .enumerate()
            .map(|(i, s)| (cosine(&index.tfidf().vector(&tokenize(s)), &ctx_vec), i))
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
        let mut expected = Vec::new();
        for (_, i) in &scored {
            expected.extend(tokenize(&page.description[*i]));
        }
        assert_eq!(snippet, expected);
    }

    #[test]
    fn snippet_respects_budget_and_empty_commands() {
        let index = fixture_index();
        let context = toks("archives and patterns and windows");
        let all: Vec<String> = index.commands().map(|c| c.to_string()).collect();
        let snippet = select_snippet(&all, &context, &index, 5, 7);
        assert_eq!(snippet.len(), 7);
        assert!(select_snippet(&[], &context, &index, 5, 200).is_empty());
    }

    #[test]
    fn course_sentence_matches_template() {
        let rec = CourseRecord {
            course: "EECS281".to_string(),
            name: Some("Data Structures and Algorithms".to_string()),
            workload: Some("moderate".to_string()),
            class_size: Some("large".to_string()),
            credits: Some("4".to_string()),
            discussion: Some(true),
            days: vec!["Thursday".to_string(), "Tuesday".to_string()],
            time_of_day: Some("afternoon".to_string()),
            extra: BTreeMap::new(),
        };
        assert_eq!(
            course_to_sentence(&rec),
            "EECS281 is Data Structures and Algorithms, has moderate workload, large class size, 4 credits, has a discussion, the classes are on Thursday, Tuesday afternoon"
        );
        assert_eq!(course_to_sentence(&rec), course_to_sentence(&rec));
    }

    #[test]
    fn course_sentence_omits_absent_clauses() {
        let rec = CourseRecord {
            course: "MATH217".to_string(),
            name: Some("Linear Algebra".to_string()),
            workload: None,
            class_size: None,
            credits: None,
            discussion: None,
            days: vec![],
            time_of_day: None,
            extra: BTreeMap::new(),
        };
        assert_eq!(course_to_sentence(&rec), "MATH217 is Linear Algebra");
    }

    #[test]
    fn course_snippet_picks_mentioned_courses() {
        let courses = vec![
            CourseRecord {
                course: "EECS281".to_string(),
                name: Some("Data Structures".to_string()),
                workload: None,
                class_size: None,
                credits: None,
                discussion: None,
                days: vec![],
                time_of_day: None,
                extra: BTreeMap::new(),
            },
            CourseRecord {
                course: "MATH217".to_string(),
                name: Some("Linear Algebra".to_string()),
                workload: None,
                class_size: None,
                credits: None,
                discussion: None,
                days: vec![],
                time_of_day: None,
                extra: BTreeMap::new(),
            },
        ];
        let ctx = toks("should i take eecs281 next term");
        let snippet = course_snippet(&ctx, &courses, 200);
        assert_eq!(snippet, toks("eecs281 is data structures"));
    }

    #[test]
    fn snippet_cache_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snippets.jsonl");
        let data = vec![
            ("ex-1".to_string(), toks("grep searches files")),
            ("ex-2".to_string(), vec![]),
        ];
        save_snippets(&path, &data).unwrap();
        assert_eq!(load_snippets(&path).unwrap(), data);
    }
}
