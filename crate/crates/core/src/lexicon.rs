//! Bilingual stereotype lexicons: target-word categories plus shared gender
//! attribute sets, stored as JSON.
//!
//! ```json
//! {
//!   "language": "en",
//!   "version": "1.0.0",
//!   "attributes": { "male": ["he", ...], "female": ["she", ...] },
//!   "categories": [
//!     { "id": "career_choices", "group": "career_role",
//!       "male_stereotyped": [{ "w": "engineer", "provenance": "paper" }, ...],
//!       "female_stereotyped": ["nurse", ...] }
//!   ]
//! }
//! ```
//!
//! A word entry is either a bare string or an object carrying its provenance.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embedding::{EmbeddingTable, LookupPolicy};
use crate::weat::WordSet;

/// Number of categories in a complete lexicon.
pub const EXPECTED_CATEGORIES: usize = 14;

const EN_JSON: &str = include_str!("../../../lexicons/en.json");
const ZH_JSON: &str = include_str!("../../../lexicons/zh.json");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    CareerRole,
    TraitsPerformance,
    EconFinancial,
}

impl Group {
    pub const ALL: [Group; 3] = [
        Group::CareerRole,
        Group::TraitsPerformance,
        Group::EconFinancial,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::CareerRole => "career_role",
            Group::TraitsPerformance => "traits_performance",
            Group::EconFinancial => "econ_financial",
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Paper,
    ToolkitDefault,
}

/// A lexicon word with optional provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WordEntry {
    Bare(String),
    Tagged { w: String, provenance: Provenance },
}

impl WordEntry {
    pub fn word(&self) -> &str {
        match self {
            WordEntry::Bare(w) | WordEntry::Tagged { w, .. } => w,
        }
    }

    pub fn provenance(&self) -> Option<Provenance> {
        match self {
            WordEntry::Bare(_) => None,
            WordEntry::Tagged { provenance, .. } => Some(*provenance),
        }
    }

    fn map_word(&self, f: impl Fn(&str) -> String) -> Self {
        match self {
            WordEntry::Bare(w) => WordEntry::Bare(f(w)),
            WordEntry::Tagged { w, provenance } => WordEntry::Tagged {
                w: f(w),
                provenance: *provenance,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attributes {
    pub male: Vec<WordEntry>,
    pub female: Vec<WordEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Category {
    pub id: String,
    pub group: Group,
    pub male_stereotyped: Vec<WordEntry>,
    pub female_stereotyped: Vec<WordEntry>,
}

impl Category {
    /// The male-stereotyped targets (`X`).
    pub fn x(&self) -> WordSet {
        word_set(
            format!("{}/male_stereotyped", self.id),
            &self.male_stereotyped,
        )
    }

    /// The female-stereotyped targets (`Y`).
    pub fn y(&self) -> WordSet {
        word_set(
            format!("{}/female_stereotyped", self.id),
            &self.female_stereotyped,
        )
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.male_stereotyped
            .iter()
            .chain(&self.female_stereotyped)
            .map(WordEntry::word)
    }
}

// Only called on validated lexicons.
fn word_set(label: String, entries: &[WordEntry]) -> WordSet {
    WordSet::new(label, entries.iter().map(|e| e.word().to_string()))
        .expect("lexicon was validated")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lexicon {
    pub language: String,
    pub version: String,
    pub attributes: Attributes,
    pub categories: Vec<Category>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Accept lexicons with fewer than 14 categories or missing groups.
    pub allow_partial: bool,
}

impl Lexicon {
    pub fn from_json_str(text: &str, options: LoadOptions) -> Result<Self, LexiconError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let lexicon: Lexicon = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            if inner.is_syntax() || inner.is_eof() {
                LexiconError::Syntax {
                    line: inner.line(),
                    column: inner.column(),
                    message: inner.to_string(),
                }
            } else {
                LexiconError::Schema {
                    pointer: json_pointer(e.path()),
                    message: inner.to_string(),
                }
            }
        })?;
        lexicon.validate(options)?;
        Ok(lexicon)
    }

    /// The shipped English lexicon.
    pub fn builtin_en() -> Self {
        Self::from_json_str(EN_JSON, LoadOptions::default()).expect("shipped en lexicon is valid")
    }

    /// The shipped Chinese lexicon.
    pub fn builtin_zh() -> Self {
        Self::from_json_str(ZH_JSON, LoadOptions::default()).expect("shipped zh lexicon is valid")
    }

    pub fn validate(&self, options: LoadOptions) -> Result<(), LexiconError> {
        let fail = |msg: String| Err(LexiconError::Validation(msg));
        if self.language.trim().is_empty() {
            return fail("language is empty".into());
        }
        if self.version.trim().is_empty() {
            return fail("version is empty".into());
        }
        check_words("attributes/male", &self.attributes.male, 1)?;
        check_words("attributes/female", &self.attributes.female, 1)?;
        if let Some(w) = overlap(&self.attributes.male, &self.attributes.female) {
            return fail(format!("attribute {w:?} is both male and female"));
        }

        let mut ids = HashSet::new();
        for c in &self.categories {
            if c.id.trim().is_empty() {
                return fail("category with empty id".into());
            }
            if !ids.insert(c.id.as_str()) {
                return fail(format!("duplicate category id {:?}", c.id));
            }
            check_words(
                &format!("{}/male_stereotyped", c.id),
                &c.male_stereotyped,
                2,
            )?;
            check_words(
                &format!("{}/female_stereotyped", c.id),
                &c.female_stereotyped,
                2,
            )?;
            if c.male_stereotyped.len() != c.female_stereotyped.len() {
                return fail(format!(
                    "{}: unequal target sets ({} male-stereotyped, {} female-stereotyped)",
                    c.id,
                    c.male_stereotyped.len(),
                    c.female_stereotyped.len()
                ));
            }
            if let Some(w) = overlap(&c.male_stereotyped, &c.female_stereotyped) {
                return fail(format!("{}: {w:?} is in both target sets", c.id));
            }
        }

        if !options.allow_partial {
            if self.categories.len() != EXPECTED_CATEGORIES {
                return fail(format!(
                    "expected {EXPECTED_CATEGORIES} categories, found {} (use allow-partial to override)",
                    self.categories.len()
                ));
            }
            let present: BTreeSet<Group> = self.categories.iter().map(|c| c.group).collect();
            if let Some(g) = Group::ALL.iter().find(|g| !present.contains(g)) {
                return fail(format!(
                    "group {g} has no categories (use allow-partial to override)"
                ));
            }
        }
        Ok(())
    }

    /// Attribute set `A`.
    pub fn attributes_male(&self) -> WordSet {
        word_set("attributes/male".into(), &self.attributes.male)
    }

    /// Attribute set `B`.
    pub fn attributes_female(&self) -> WordSet {
        word_set("attributes/female".into(), &self.attributes.female)
    }

    pub fn category(&self, id: &str) -> Option<&Category> {
        self.categories.iter().find(|c| c.id == id)
    }

    /// Every distinct phrase in the lexicon, sorted.
    pub fn all_phrases(&self) -> BTreeSet<&str> {
        self.attributes
            .male
            .iter()
            .chain(&self.attributes.female)
            .map(WordEntry::word)
            .chain(self.categories.iter().flat_map(Category::words))
            .collect()
    }

    /// A copy with every word lowercased. Fails if lowercasing creates
    /// duplicates or overlaps.
    pub fn lowercased(&self, options: LoadOptions) -> Result<Self, LexiconError> {
        let lower = |entries: &[WordEntry]| -> Vec<WordEntry> {
            entries
                .iter()
                .map(|e| e.map_word(str::to_lowercase))
                .collect()
        };
        let out = Lexicon {
            language: self.language.clone(),
            version: self.version.clone(),
            attributes: Attributes {
                male: lower(&self.attributes.male),
                female: lower(&self.attributes.female),
            },
            categories: self
                .categories
                .iter()
                .map(|c| Category {
                    id: c.id.clone(),
                    group: c.group,
                    male_stereotyped: lower(&c.male_stereotyped),
                    female_stereotyped: lower(&c.female_stereotyped),
                })
                .collect(),
        };
        out.validate(options)?;
        Ok(out)
    }

    /// Canonical serialization: fixed field order, two-space indentation,
    /// trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("lexicon serializes");
        s.push('\n');
        s
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_json().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

pub fn load_lexicon(path: impl AsRef<Path>, options: LoadOptions) -> Result<Lexicon, LexiconError> {
    let text = std::fs::read_to_string(path)?;
    Lexicon::from_json_str(&text, options)
}

fn check_words(label: &str, entries: &[WordEntry], min: usize) -> Result<(), LexiconError> {
    if entries.len() < min {
        return Err(LexiconError::Validation(format!(
            "{label}: needs at least {min} words, found {}",
            entries.len()
        )));
    }
    let mut seen = HashSet::new();
    for e in entries {
        let w = e.word();
        if w.trim().is_empty() {
            return Err(LexiconError::Validation(format!("{label}: empty word")));
        }
        if !seen.insert(w) {
            return Err(LexiconError::Validation(format!(
                "{label}: duplicate word {w:?}"
            )));
        }
    }
    Ok(())
}

fn overlap<'a>(left: &'a [WordEntry], right: &[WordEntry]) -> Option<&'a str> {
    let right: HashSet<&str> = right.iter().map(WordEntry::word).collect();
    left.iter().map(WordEntry::word).find(|w| right.contains(w))
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Resolvability of one category's phrases against a table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCoverage {
    pub id: String,
    pub runnable: bool,
    pub resolvable: Vec<String>,
    pub unresolvable: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub table: String,
    pub categories: Vec<CategoryCoverage>,
    /// Share of distinct lexicon phrases the table cannot resolve.
    pub oov_rate: f64,
}

impl CoverageReport {
    pub fn runnable(&self) -> impl Iterator<Item = &CategoryCoverage> {
        self.categories.iter().filter(|c| c.runnable)
    }

    pub fn runnable_count(&self) -> usize {
        self.runnable().count()
    }

    pub fn category(&self, id: &str) -> Option<&CategoryCoverage> {
        self.categories.iter().find(|c| c.id == id)
    }
}

/// Which phrases of each category (targets and attributes) resolve in
/// `table`. A category is runnable iff all of them do.
pub fn coverage_check(
    lexicon: &Lexicon,
    table: &EmbeddingTable,
    policy: LookupPolicy,
) -> CoverageReport {
    let attribute_words: Vec<&str> = lexicon
        .attributes
        .male
        .iter()
        .chain(&lexicon.attributes.female)
        .map(WordEntry::word)
        .collect();
    let categories = lexicon
        .categories
        .iter()
        .map(|c| {
            let (resolvable, unresolvable): (Vec<&str>, Vec<&str>) = c
                .words()
                .chain(attribute_words.iter().copied())
                .partition(|w| table.resolves(w, policy));
            CategoryCoverage {
                id: c.id.clone(),
                runnable: unresolvable.is_empty(),
                resolvable: resolvable.into_iter().map(String::from).collect(),
                unresolvable: unresolvable.into_iter().map(String::from).collect(),
            }
        })
        .collect();
    let phrases = lexicon.all_phrases();
    let missing = phrases
        .iter()
        .filter(|w| !table.resolves(w, policy))
        .count();
    CoverageReport {
        table: table.source_label().to_string(),
        categories,
        oov_rate: if phrases.is_empty() {
            0.0
        } else {
            missing as f64 / phrases.len() as f64
        },
    }
}
