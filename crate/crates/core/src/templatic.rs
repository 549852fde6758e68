//! Root-and-pattern word formation.
//!
//! A pattern is written with the placeholder radicals ف ع ل, e.g. مفعول.
//! Compiling it turns ف, ع and the first ل into slots 1-3 (a second ل is
//! slot 4); applying it to a root writes radical *i* into slot *i*.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{is_arabic_letter, strip_diacritics};

pub const FA: char = 'ف';
pub const AIN: char = 'ع';
pub const LAM: char = 'ل';

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplaticError {
    #[error("pattern {0:?} has no ف/ع/ل slot letters")]
    NoSlots(String),
    #[error("empty pattern")]
    EmptyPattern,
    #[error("pattern {pattern:?} needs {needed} radicals but root {root:?} has {found}")]
    ArityTooLow {
        pattern: String,
        root: String,
        needed: usize,
        found: usize,
    },
    #[error("root {0:?} must have 3 or 4 radicals")]
    RootArity(String),
    #[error("root {root:?}: {letter:?} is not an Arabic letter")]
    NotALetter { root: String, letter: char },
    #[error("unknown slot policy {0:?}")]
    UnknownPolicy(String),
}

/// Lexical status of a root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RootCategory {
    #[serde(rename = "high_frequency")]
    RealHighFrequency,
    #[serde(rename = "low_frequency")]
    RealLowFrequency,
    #[serde(rename = "nonce")]
    Nonce,
}

impl RootCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::RealHighFrequency => "high_frequency",
            Self::RealLowFrequency => "low_frequency",
            Self::Nonce => "nonce",
        }
    }

    pub fn is_real(self) -> bool {
        !matches!(self, Self::Nonce)
    }
}

impl fmt::Display for RootCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A consonantal root of three or four radicals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Root {
    radicals: Vec<char>,
    category: RootCategory,
}

impl Root {
    /// Parse a root from its written form; diacritics are ignored.
    pub fn parse(text: &str, category: RootCategory) -> Result<Self, TemplaticError> {
        let radicals: Vec<char> = strip_diacritics(text).chars().collect();
        Self::from_radicals(radicals, category).map_err(|e| match e {
            TemplaticError::RootArity(_) => TemplaticError::RootArity(text.to_owned()),
            other => other,
        })
    }

    pub fn from_radicals(radicals: Vec<char>, category: RootCategory) -> Result<Self, TemplaticError> {
        let text: String = radicals.iter().collect();
        if !(3..=4).contains(&radicals.len()) {
            return Err(TemplaticError::RootArity(text));
        }
        if let Some(&letter) = radicals.iter().find(|&&c| !is_arabic_letter(c)) {
            return Err(TemplaticError::NotALetter { root: text, letter });
        }
        Ok(Self { radicals, category })
    }

    pub fn radicals(&self) -> &[char] {
        &self.radicals
    }

    pub fn category(&self) -> RootCategory {
        self.category
    }

    pub fn text(&self) -> String {
        self.radicals.iter().collect()
    }
}

impl fmt::Display for Root {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

/// What slot 4 means when the root has only three radicals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotPolicy {
    /// Slot 4 repeats radical 3 (فعليل + كتب → كتبيب).
    #[default]
    Repeat3,
    /// Slot 4 needs a fourth radical.
    Require4,
}

impl FromStr for SlotPolicy {
    type Err = TemplaticError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "repeat3" => Ok(Self::Repeat3),
            "require4" => Ok(Self::Require4),
            other => Err(TemplaticError::UnknownPolicy(other.to_owned())),
        }
    }
}

impl fmt::Display for SlotPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Repeat3 => "repeat3",
            Self::Require4 => "require4",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Literal(String),
    /// 1-based radical index.
    Slot(usize),
}

/// A pattern split into literal runs and radical slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledPattern {
    source: String,
    segments: Vec<Segment>,
    policy: SlotPolicy,
}

/// Compile a pattern with the default slot policy.
pub fn compile_pattern(text: &str) -> Result<CompiledPattern, TemplaticError> {
    CompiledPattern::compile(text, SlotPolicy::default())
}

impl CompiledPattern {
    pub fn compile(text: &str, policy: SlotPolicy) -> Result<Self, TemplaticError> {
        let source = strip_diacritics(text.trim());
        if source.is_empty() {
            return Err(TemplaticError::EmptyPattern);
        }
        let mut segments = Vec::new();
        let mut seen_lam = false;
        for c in source.chars() {
            let slot = match c {
                FA => Some(1),
                AIN => Some(2),
                LAM if !seen_lam => {
                    seen_lam = true;
                    Some(3)
                }
                LAM => Some(4),
                _ => None,
            };
            match (slot, segments.last_mut()) {
                (Some(i), _) => segments.push(Segment::Slot(i)),
                (None, Some(Segment::Literal(run))) => run.push(c),
                (None, _) => segments.push(Segment::Literal(c.to_string())),
            }
        }
        if !segments.iter().any(|s| matches!(s, Segment::Slot(_))) {
            return Err(TemplaticError::NoSlots(source));
        }
        Ok(Self { source, segments, policy })
    }

    /// The undiacritized pattern text.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn policy(&self) -> SlotPolicy {
        self.policy
    }

    /// Highest slot index used.
    pub fn max_slot(&self) -> usize {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Slot(i) => Some(*i),
                Segment::Literal(_) => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Character offsets of each slot in the applied word, in pattern order.
    pub fn slot_positions(&self) -> Vec<(usize, usize)> {
        let mut pos = 0;
        let mut out = Vec::new();
        for s in &self.segments {
            match s {
                Segment::Literal(run) => pos += run.chars().count(),
                Segment::Slot(i) => {
                    out.push((pos, *i));
                    pos += 1;
                }
            }
        }
        out
    }

    /// Number of radicals a root needs for this pattern.
    pub fn required_radicals(&self) -> usize {
        match (self.max_slot(), self.policy) {
            (4, SlotPolicy::Repeat3) => 3,
            (n, _) => n,
        }
    }
}

impl fmt::Display for CompiledPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

/// Interleave the root's radicals into the pattern's slots.
pub fn apply_pattern(root: &Root, pattern: &CompiledPattern) -> Result<String, TemplaticError> {
    let radicals = root.radicals();
    if radicals.len() < pattern.required_radicals() {
        return Err(TemplaticError::ArityTooLow {
            pattern: pattern.source.clone(),
            root: root.text(),
            needed: pattern.required_radicals(),
            found: radicals.len(),
        });
    }
    let mut out = String::with_capacity(pattern.source.len() + 8);
    for seg in &pattern.segments {
        match seg {
            Segment::Literal(run) => out.push_str(run),
            Segment::Slot(i) => {
                let radical = radicals.get(i - 1).unwrap_or(&radicals[2]);
                out.push(*radical);
            }
        }
    }
    Ok(out)
}

/// `prefix ++ base ++ suffix`, with no sandhi.
pub fn attach_affixes(base: &str, prefix: &str, suffix: &str) -> String {
    let mut out = String::with_capacity(prefix.len() + base.len() + suffix.len());
    out.push_str(prefix);
    out.push_str(base);
    out.push_str(suffix);
    out
}

/// The thirteen derivational patterns of the probe dataset.
pub const DEFAULT_PATTERNS: [&str; 13] = [
    "مفعول", "فاعل", "فعالة", "استفعل", "فعليل", "فعلان", "مفعال", "انفعل", "مفتعل", "افتعال", "فَعول",
    "فعال", "فعلاء",
];

/// The five patterns paired with nonce roots.
pub const DEFAULT_NONCE_PATTERNS: [&str; 5] = ["مفعول", "فاعل", "استفعل", "فَعول", "فعال"];

/// A pattern entry as listed in an inventory, keeping its citation form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InventoryEntry {
    /// Citation form as written, possibly diacritized.
    pub citation: String,
    pub pattern: CompiledPattern,
}

#[derive(Debug, Error)]
pub enum InventoryError {
    #[error("line {line}: {source}")]
    Pattern { line: usize, source: TemplaticError },
    #[error("line {line}: expected `policy=repeat3|require4`, found {found:?}")]
    BadOption { line: usize, found: String },
    #[error("pattern inventory is empty")]
    Empty,
}

/// Parse a pattern inventory: one pattern per line, optional `<TAB>policy=...`.
pub fn parse_inventory(text: &str) -> Result<Vec<InventoryEntry>, InventoryError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let (citation, option) = match raw.split_once('\t') {
            Some((c, o)) => (c.trim(), Some(o.trim())),
            None => (raw.trim(), None),
        };
        let policy = match option {
            None | Some("") => SlotPolicy::default(),
            Some(o) => o
                .strip_prefix("policy=")
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| InventoryError::BadOption {
                    line,
                    found: o.to_owned(),
                })?,
        };
        let pattern = CompiledPattern::compile(citation, policy)
            .map_err(|source| InventoryError::Pattern { line, source })?;
        out.push(InventoryEntry {
            citation: citation.to_owned(),
            pattern,
        });
    }
    if out.is_empty() {
        return Err(InventoryError::Empty);
    }
    Ok(out)
}

/// Compiled entries for a list of citation forms, default policy.
pub fn inventory_from(citations: &[&str]) -> Vec<InventoryEntry> {
    citations
        .iter()
        .map(|c| InventoryEntry {
            citation: (*c).to_owned(),
            pattern: compile_pattern(c).expect("built-in pattern compiles"),
        })
        .collect()
}

pub fn default_inventory() -> Vec<InventoryEntry> {
    inventory_from(&DEFAULT_PATTERNS)
}

pub fn default_nonce_inventory() -> Vec<InventoryEntry> {
    inventory_from(&DEFAULT_NONCE_PATTERNS)
}
