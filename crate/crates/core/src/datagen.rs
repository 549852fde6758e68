//! Probe datasets: nonce root synthesis, record validation, and the
//! line-delimited JSON dataset format.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::strip_diacritics;
use crate::templatic::{
    apply_pattern, attach_affixes, compile_pattern, InventoryEntry, Root, RootCategory,
    TemplaticError,
};

/// Consonants nonce roots are drawn from: Arabic letters minus ا و ي, hamza
/// forms, ة and ى.
pub const STRONG_CONSONANTS: [char; 25] = [
    'ب', 'ت', 'ث', 'ج', 'ح', 'خ', 'د', 'ذ', 'ر', 'ز', 'س', 'ش', 'ص', 'ض', 'ط', 'ظ', 'ع', 'غ', 'ف',
    'ق', 'ك', 'ل', 'م', 'ن', 'ه',
];

/// One probe row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetInstance {
    pub root: String,
    pub template: String,
    pub base_form: String,
    pub prefix: String,
    pub suffix: String,
    pub full_form: String,
    #[serde(with = "bool_as_string")]
    pub has_affix: bool,
    pub root_category: RootCategory,
}

mod bool_as_string {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(if *value { "true" } else { "false" })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match String::deserialize(d)?.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(D::Error::custom(format!("expected \"true\" or \"false\", got {other:?}"))),
        }
    }
}

impl DatasetInstance {
    /// Build a consistent record from a root, a pattern, and affixes.
    pub fn derive(
        root: &Root,
        entry: &InventoryEntry,
        prefix: &str,
        suffix: &str,
    ) -> Result<Self, TemplaticError> {
        let base_form = apply_pattern(root, &entry.pattern)?;
        Ok(Self {
            root: root.text(),
            template: entry.citation.clone(),
            full_form: attach_affixes(&base_form, prefix, suffix),
            base_form,
            prefix: prefix.to_owned(),
            suffix: suffix.to_owned(),
            has_affix: !prefix.is_empty() || !suffix.is_empty(),
            root_category: root.category(),
        })
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("dataset records serialize")
    }
}

/// A broken invariant of a [`DatasetInstance`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("root: {0}")]
    Root(TemplaticError),
    #[error("template: {0}")]
    Template(TemplaticError),
    #[error("pattern cannot be applied: {0}")]
    Apply(TemplaticError),
    #[error("base_form {found:?} != apply_pattern(root, template) = {expected:?}")]
    BaseForm { expected: String, found: String },
    #[error("full_form {found:?} != prefix++base_form++suffix = {expected:?}")]
    FullForm { expected: String, found: String },
    #[error("has_affix = {has_affix} but prefix {prefix:?} / suffix {suffix:?}")]
    HasAffix {
        has_affix: bool,
        prefix: String,
        suffix: String,
    },
}

/// Every invariant the record violates; empty means valid.
pub fn validate_real_record(record: &DatasetInstance) -> Vec<Violation> {
    let mut violations = Vec::new();
    let root = Root::parse(&record.root, record.root_category).map_err(Violation::Root);
    let pattern = compile_pattern(&record.template).map_err(Violation::Template);
    match (root, pattern) {
        (Ok(root), Ok(pattern)) => match apply_pattern(&root, &pattern) {
            Ok(expected) if strip_diacritics(&record.base_form) != expected => {
                violations.push(Violation::BaseForm {
                    expected,
                    found: record.base_form.clone(),
                });
            }
            Ok(_) => {}
            Err(e) => violations.push(Violation::Apply(e)),
        },
        (root, pattern) => {
            violations.extend(root.err());
            violations.extend(pattern.err());
        }
    }
    let expected = attach_affixes(&record.base_form, &record.prefix, &record.suffix);
    if record.full_form != expected {
        violations.push(Violation::FullForm {
            expected,
            found: record.full_form.clone(),
        });
    }
    if record.has_affix != (!record.prefix.is_empty() || !record.suffix.is_empty()) {
        violations.push(Violation::HasAffix {
            has_affix: record.has_affix,
            prefix: record.prefix.clone(),
            suffix: record.suffix.clone(),
        });
    }
    violations
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatagenError {
    #[error("need at least one root")]
    ZeroRoots,
    #[error("alphabet has {0} letters; need at least 3")]
    AlphabetTooSmall(usize),
    #[error(
        "gave up after {attempts} draws with {found} of {wanted} roots: \
         too few {kind} roots outside the lexicon"
    )]
    AttemptCapExceeded {
        attempts: u64,
        found: usize,
        wanted: usize,
        kind: &'static str,
    },
}

/// Knobs for [`generate_nonce_roots`].
#[derive(Debug, Clone)]
pub struct NonceOptions {
    pub alphabet: Vec<char>,
    /// Allow repeated radicals (geminate roots).
    pub allow_geminate: bool,
    /// Draw cap per requested root.
    pub attempts_per_root: u64,
}

impl Default for NonceOptions {
    fn default() -> Self {
        Self {
            alphabet: STRONG_CONSONANTS.to_vec(),
            allow_geminate: false,
            attempts_per_root: 10_000,
        }
    }
}

/// A set of known roots, compared on undiacritized radicals.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    roots: HashSet<String>,
}

impl Lexicon {
    /// One root per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(strip_diacritics)
            .collect()
    }

    pub fn contains(&self, root: &str) -> bool {
        self.roots.contains(root)
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

impl FromIterator<String> for Lexicon {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        Self {
            roots: iter.into_iter().collect(),
        }
    }
}

/// Draw `n` distinct triliteral roots absent from `lexicon`, reproducibly.
pub fn generate_nonce_roots(
    n: usize,
    seed: u64,
    lexicon: &Lexicon,
    options: &NonceOptions,
) -> Result<Vec<Root>, DatagenError> {
    if n == 0 {
        return Err(DatagenError::ZeroRoots);
    }
    let alphabet = &options.alphabet;
    if alphabet.len() < 3 {
        return Err(DatagenError::AlphabetTooSmall(alphabet.len()));
    }
    let cap = options.attempts_per_root.saturating_mul(n as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut roots = Vec::with_capacity(n);
    let mut attempts = 0u64;
    while roots.len() < n {
        if attempts >= cap {
            return Err(DatagenError::AttemptCapExceeded {
                attempts,
                found: roots.len(),
                wanted: n,
                kind: if options.allow_geminate { "unused" } else { "unused distinct-radical" },
            });
        }
        attempts += 1;
        let radicals: Vec<char> = (0..3).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        if !options.allow_geminate
            && (radicals[0] == radicals[1] || radicals[1] == radicals[2] || radicals[0] == radicals[2])
        {
            continue;
        }
        let text: String = radicals.iter().collect();
        if lexicon.contains(&text) || !seen.insert(text) {
            continue;
        }
        roots.push(Root::from_radicals(radicals, RootCategory::Nonce).expect("alphabet letters"));
    }
    Ok(roots)
}

/// A (root, pattern) combination that could not be formed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairError {
    pub root: String,
    pub template: String,
    pub error: TemplaticError,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NonceSet {
    pub instances: Vec<DatasetInstance>,
    pub errors: Vec<PairError>,
}

/// Every root under every pattern, unaffixed, in root-major order.
pub fn build_nonce_set(roots: &[Root], patterns: &[InventoryEntry]) -> NonceSet {
    let mut set = NonceSet::default();
    for root in roots {
        for entry in patterns {
            match DatasetInstance::derive(root, entry, "", "") {
                Ok(mut inst) => {
                    inst.root_category = RootCategory::Nonce;
                    set.instances.push(inst);
                }
                Err(error) => set.errors.push(PairError {
                    root: root.text(),
                    template: entry.citation.clone(),
                    error,
                }),
            }
        }
    }
    set
}

/// Which root categories a dataset may contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CategoryRule {
    Real,
    Nonce,
    Any,
}

/// Expected shape of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeExpectation {
    pub patterns: Option<usize>,
    pub pairs: Option<usize>,
    pub rows: Option<usize>,
    /// Required (unaffixed, affixed) rows per (root, template) pair.
    pub forms_per_pair: Option<(usize, usize)>,
    pub categories: CategoryRule,
}

impl ShapeExpectation {
    /// 13 patterns, 130 pairs, each as one bare and two affixed forms.
    pub fn real_reference() -> Self {
        Self {
            patterns: Some(13),
            pairs: Some(130),
            rows: Some(390),
            forms_per_pair: Some((1, 2)),
            categories: CategoryRule::Real,
        }
    }

    /// 20 roots under 5 patterns, all unaffixed.
    pub fn nonce_reference() -> Self {
        Self {
            patterns: Some(5),
            pairs: Some(100),
            rows: Some(100),
            forms_per_pair: Some((1, 0)),
            categories: CategoryRule::Nonce,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShapeViolation {
    PatternCount { expected: usize, found: usize },
    PairCount { expected: usize, found: usize },
    RowCount { expected: usize, found: usize },
    PairForms {
        root: String,
        template: String,
        unaffixed: usize,
        affixed: usize,
    },
    DuplicateRow { index: usize },
    Category { index: usize, category: RootCategory },
}

impl fmt::Display for ShapeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PatternCount { expected, found } => {
                write!(f, "expected {expected} patterns, found {found}")
            }
            Self::PairCount { expected, found } => {
                write!(f, "expected {expected} root-pattern pairs, found {found}")
            }
            Self::RowCount { expected, found } => write!(f, "expected {expected} rows, found {found}"),
            Self::PairForms { root, template, unaffixed, affixed } => write!(
                f,
                "pair ({root}, {template}) has {unaffixed} unaffixed and {affixed} affixed rows"
            ),
            Self::DuplicateRow { index } => write!(f, "row {index} duplicates an earlier row"),
            Self::Category { index, category } => {
                write!(f, "row {index} has disallowed root_category {category}")
            }
        }
    }
}

/// Compare a dataset's counts against `expectation`.
pub fn dataset_shape_check(
    instances: &[DatasetInstance],
    expectation: &ShapeExpectation,
) -> Vec<ShapeViolation> {
    let mut out = Vec::new();
    let patterns: BTreeSet<String> = instances.iter().map(|i| strip_diacritics(&i.template)).collect();
    let mut pairs: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
    let mut rows = HashSet::new();
    for (index, inst) in instances.iter().enumerate() {
        let counts = pairs
            .entry((inst.root.clone(), strip_diacritics(&inst.template)))
            .or_default();
        if inst.has_affix {
            counts.1 += 1;
        } else {
            counts.0 += 1;
        }
        if !rows.insert(inst) {
            out.push(ShapeViolation::DuplicateRow { index });
        }
        let allowed = match expectation.categories {
            CategoryRule::Real => inst.root_category.is_real(),
            CategoryRule::Nonce => !inst.root_category.is_real(),
            CategoryRule::Any => true,
        };
        if !allowed {
            out.push(ShapeViolation::Category {
                index,
                category: inst.root_category,
            });
        }
    }
    if let Some(expected) = expectation.patterns.filter(|&e| e != patterns.len()) {
        out.push(ShapeViolation::PatternCount { expected, found: patterns.len() });
    }
    if let Some(expected) = expectation.pairs.filter(|&e| e != pairs.len()) {
        out.push(ShapeViolation::PairCount { expected, found: pairs.len() });
    }
    if let Some(expected) = expectation.rows.filter(|&e| e != instances.len()) {
        out.push(ShapeViolation::RowCount { expected, found: instances.len() });
    }
    if let Some(forms) = expectation.forms_per_pair {
        for ((root, template), (unaffixed, affixed)) in pairs {
            if (unaffixed, affixed) != forms {
                out.push(ShapeViolation::PairForms { root, template, unaffixed, affixed });
            }
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum DatasetFileError {
    #[error("line {line}: {source}")]
    Record { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Read a dataset file: one JSON object per line; `#` lines are metadata.
pub fn read_dataset<R: BufRead>(reader: R) -> Result<Vec<DatasetInstance>, DatasetFileError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let record = serde_json::from_str(trimmed)
            .map_err(|source| DatasetFileError::Record { line: idx + 1, source })?;
        out.push(record);
    }
    Ok(out)
}

/// Render records as dataset file lines (no metadata header).
pub fn write_dataset(instances: &[DatasetInstance]) -> String {
    let mut out = String::new();
    for inst in instances {
        out.push_str(&inst.to_json_line());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templatic::{default_nonce_inventory, inventory_from};

    fn figure_record() -> DatasetInstance {
        DatasetInstance {
            root: "ثمر".into(),
            template: "فعال".into(),
            base_form: "ثمار".into(),
            prefix: "ال".into(),
            suffix: "".into(),
            full_form: "الثمار".into(),
            has_affix: true,
            root_category: RootCategory::RealHighFrequency,
        }
    }

    #[test]
    fn published_record_round_trips_through_json() {
        let json = r#"{"root":"ثمر","template":"فعال","base_form":"ثمار","prefix":"ال","suffix":"","full_form":"الثمار","has_affix":"true","root_category":"high_frequency"}"#;
        let rec: DatasetInstance = serde_json::from_str(json).unwrap();
        assert_eq!(rec, figure_record());
        assert_eq!(rec.to_json_line(), json);
    }

    #[test]
    fn json_rejects_extra_fields_and_real_booleans() {
        let extra = r#"{"root":"ثمر","template":"فعال","base_form":"ثمار","prefix":"ال","suffix":"","full_form":"الثمار","has_affix":"true","root_category":"high_frequency","x":1}"#;
        assert!(serde_json::from_str::<DatasetInstance>(extra).is_err());
        let boolean = r#"{"root":"ثمر","template":"فعال","base_form":"ثمار","prefix":"ال","suffix":"","full_form":"الثمار","has_affix":true,"root_category":"high_frequency"}"#;
        assert!(serde_json::from_str::<DatasetInstance>(boolean).is_err());
    }

    #[test]
    fn validate_published_record() {
        assert!(validate_real_record(&figure_record()).is_empty());
    }

    #[test]
    fn validate_reports_full_form() {
        let mut r = figure_record();
        r.full_form = "الثمر".into();
        assert!(matches!(validate_real_record(&r).as_slice(), [Violation::FullForm { .. }]));
    }

    #[test]
    fn validate_reports_has_affix() {
        let mut r = figure_record();
        r.has_affix = false;
        assert!(matches!(validate_real_record(&r).as_slice(), [Violation::HasAffix { .. }]));
    }

    #[test]
    fn validate_reports_every_violation() {
        let mut r = figure_record();
        r.base_form = "ثمور".into();
        r.has_affix = false;
        let v = validate_real_record(&r);
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn nonce_roots_avoid_lexicon_and_repeat() {
        let lexicon = Lexicon::parse("كتب\nدرس\n");
        let opts = NonceOptions::default();
        let a = generate_nonce_roots(20, 7, &lexicon, &opts).unwrap();
        let b = generate_nonce_roots(20, 7, &lexicon, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        let distinct: HashSet<String> = a.iter().map(Root::text).collect();
        assert_eq!(distinct.len(), 20);
        for r in &a {
            assert!(!lexicon.contains(&r.text()));
            let rad = r.radicals();
            assert!(rad[0] != rad[1] && rad[1] != rad[2] && rad[0] != rad[2]);
            assert!(rad.iter().all(|c| STRONG_CONSONANTS.contains(c)));
        }
        assert_ne!(a, generate_nonce_roots(20, 8, &lexicon, &opts).unwrap());
    }

    #[test]
    fn nonce_generation_single_root_deterministic() {
        let lex = Lexicon::default();
        let opts = NonceOptions::default();
        assert_eq!(
            generate_nonce_roots(1, 42, &lex, &opts).unwrap(),
            generate_nonce_roots(1, 42, &lex, &opts).unwrap()
        );
    }

    #[test]
    fn nonce_generation_infeasible_lexicon() {
        let opts = NonceOptions {
            alphabet: vec!['ب', 'ت', 'ث', 'ج'],
            ..Default::default()
        };
        let mut all = Vec::new();
        for &a in &opts.alphabet {
            for &b in &opts.alphabet {
                for &c in &opts.alphabet {
                    if a != b && b != c && a != c {
                        all.push([a, b, c].iter().collect::<String>());
                    }
                }
            }
        }
        let lex: Lexicon = all.into_iter().collect();
        assert!(matches!(
            generate_nonce_roots(1, 1, &lex, &opts),
            Err(DatagenError::AttemptCapExceeded { attempts: 10_000, .. })
        ));
        assert_eq!(generate_nonce_roots(0, 1, &lex, &opts), Err(DatagenError::ZeroRoots));
    }

    #[test]
    fn nonce_set_cardinality() {
        let roots = generate_nonce_roots(20, 3, &Lexicon::default(), &NonceOptions::default()).unwrap();
        let set = build_nonce_set(&roots, &default_nonce_inventory());
        assert_eq!(set.instances.len(), 100);
        assert!(set.errors.is_empty());
        assert!(set.instances.iter().all(|i| validate_real_record(i).is_empty()));
        assert!(set.instances.iter().all(|i| !i.has_affix && i.prefix.is_empty() && i.suffix.is_empty()));
        assert!(dataset_shape_check(&set.instances, &ShapeExpectation::nonce_reference()).is_empty());
        assert!(build_nonce_set(&[], &default_nonce_inventory()).instances.is_empty());
    }

    #[test]
    fn nonce_set_attested_form() {
        let root = Root::parse("دغز", RootCategory::Nonce).unwrap();
        let set = build_nonce_set(&[root], &inventory_from(&["فعال"]));
        assert_eq!(set.instances[0].base_form, "دغاز");
        assert_eq!(set.instances[0].full_form, "دغاز");
    }

    #[test]
    fn nonce_set_collects_arity_errors() {
        use crate::templatic::{CompiledPattern, SlotPolicy};
        let strict = InventoryEntry {
            citation: "فعليل".into(),
            pattern: CompiledPattern::compile("فعليل", SlotPolicy::Require4).unwrap(),
        };
        let mut inv = inventory_from(&["فعال"]);
        inv.push(strict);
        let roots = generate_nonce_roots(3, 0, &Lexicon::default(), &NonceOptions::default()).unwrap();
        let set = build_nonce_set(&roots, &inv);
        assert_eq!(set.instances.len(), 3);
        assert_eq!(set.errors.len(), 3);
    }

    #[test]
    fn shape_check_empty_against_reference() {
        let v = dataset_shape_check(&[], &ShapeExpectation::real_reference());
        assert_eq!(
            v,
            vec![
                ShapeViolation::PatternCount { expected: 13, found: 0 },
                ShapeViolation::PairCount { expected: 130, found: 0 },
                ShapeViolation::RowCount { expected: 390, found: 0 },
            ]
        );
    }

    #[test]
    fn dataset_file_skips_metadata() {
        let text = format!("# morphprobe seed=1\n{}\n", figure_record().to_json_line());
        let read = read_dataset(text.as_bytes()).unwrap();
        assert_eq!(read, vec![figure_record()]);
        assert_eq!(write_dataset(&read), format!("{}\n", figure_record().to_json_line()));
        assert!(matches!(read_dataset("{}\n".as_bytes()), Err(DatasetFileError::Record { line: 1, .. })));
    }
}
