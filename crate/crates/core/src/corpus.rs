//! Arabic text normalization, the gold segmentation file format, and corpus
//! statistics.
//!
//! Gold files are UTF-8, one word per line as `surface<TAB>m1+m2+...+mk`.
//! A blank line ends a sentence and lines starting with `#` are comments.

use std::collections::BTreeSet;
use std::io::BufRead;

use thiserror::Error;

use crate::alignment::{reconcile_gold, ReconcileFlag};
use crate::scalar::Scalar;

/// Arabic tatweel (kashida).
pub const TATWEEL: char = '\u{0640}';

/// Harakat, tanwin, shadda, sukun, dagger alef, and tatweel.
pub fn is_diacritic(c: char) -> bool {
    matches!(c, '\u{064B}'..='\u{0652}' | '\u{0670}' | TATWEEL)
}

/// Letters of the Arabic block, excluding digits, punctuation, and marks.
pub fn is_arabic_letter(c: char) -> bool {
    matches!(
        c,
        '\u{0620}'..='\u{063F}'
            | '\u{0641}'..='\u{064A}'
            | '\u{0671}'..='\u{06D3}'
            | '\u{06D5}'
            | '\u{06EE}'..='\u{06EF}'
            | '\u{06FA}'..='\u{06FC}'
            | '\u{06FF}'
    )
}

/// Remove Arabic diacritics and tatweel, keeping everything else in order.
pub fn strip_diacritics(text: &str) -> String {
    text.chars().filter(|&c| !is_diacritic(c)).collect()
}

/// `true` for a non-empty word made only of Arabic letters once diacritics are gone.
pub fn is_arabic_word(word: &str) -> bool {
    let mut letters = word.chars().filter(|&c| !is_diacritic(c)).peekable();
    letters.peek().is_some() && letters.all(is_arabic_letter)
}

/// Keep only all-Arabic words. Mixed tokens are dropped whole, never trimmed.
pub fn clean_words<S: AsRef<str>>(words: &[S]) -> Vec<&str> {
    words
        .iter()
        .map(AsRef::as_ref)
        .filter(|w| is_arabic_word(w))
        .collect()
}

/// A surface word with its gold morpheme segmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldWord {
    surface: String,
    morphemes: Vec<String>,
    spans: Vec<(usize, usize)>,
    boundaries: BTreeSet<usize>,
}

impl GoldWord {
    /// Segment `surface` into `morphemes`, reconciling character offsets.
    pub fn new(surface: &str, morphemes: Vec<String>) -> Result<Self, ReconcileFlag> {
        let spans = reconcile_gold(surface, &morphemes)?;
        let boundaries = spans[..spans.len() - 1].iter().map(|&(_, end)| end).collect();
        Ok(Self {
            surface: surface.to_owned(),
            morphemes,
            spans,
            boundaries,
        })
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn morphemes(&self) -> &[String] {
        &self.morphemes
    }

    /// Half-open character spans, contiguous and covering the word.
    pub fn spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    /// Morpheme-internal boundaries as character offsets.
    pub fn boundaries(&self) -> &BTreeSet<usize> {
        &self.boundaries
    }

    /// Surface substrings at each span.
    pub fn span_texts(&self) -> Vec<String> {
        let chars: Vec<char> = self.surface.chars().collect();
        self.spans
            .iter()
            .map(|&(s, e)| chars[s..e].iter().collect())
            .collect()
    }
}

/// A gold word whose morphemes could not be placed on its surface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlaggedWord {
    pub surface: String,
    pub morphemes: Vec<String>,
    pub reason: ReconcileFlag,
}

/// One word line of a gold file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldEntry {
    /// 1-based line number in the source file.
    pub line: usize,
    pub word: Result<GoldWord, FlaggedWord>,
}

impl GoldEntry {
    pub fn surface(&self) -> &str {
        match &self.word {
            Ok(w) => w.surface(),
            Err(f) => &f.surface,
        }
    }

    pub fn morphemes(&self) -> &[String] {
        match &self.word {
            Ok(w) => w.morphemes(),
            Err(f) => &f.morphemes,
        }
    }
}

/// A parsed gold file: sentences of word entries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldCorpus {
    pub sentences: Vec<Vec<GoldEntry>>,
}

impl GoldCorpus {
    pub fn entries(&self) -> impl Iterator<Item = &GoldEntry> {
        self.sentences.iter().flatten()
    }

    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    /// Entries whose segmentation could not be reconciled.
    pub fn flagged(&self) -> impl Iterator<Item = &GoldEntry> {
        self.entries().filter(|e| e.word.is_err())
    }

    /// Serialize back to the gold file format.
    ///
    /// A file without comments, with single blank lines between sentences and
    /// a trailing newline, round-trips byte for byte.
    pub fn to_gold_string(&self) -> String {
        let mut out = String::new();
        for (i, sentence) in self.sentences.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            for entry in sentence {
                out.push_str(entry.surface());
                out.push('\t');
                out.push_str(&entry.morphemes().join("+"));
                out.push('\n');
            }
        }
        out
    }

    /// Per-sentence gold morpheme counts, for [`corpus_stats`].
    pub fn morpheme_counts(&self) -> Vec<Vec<usize>> {
        self.sentences
            .iter()
            .map(|s| s.iter().map(|e| e.morphemes().len()).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LineError {
    #[error("line {line}: missing tab between surface and segmentation")]
    MissingSeparator { line: usize },
    #[error("line {line}: empty surface")]
    EmptySurface { line: usize },
    #[error("line {line}: empty morpheme in segmentation")]
    EmptyMorpheme { line: usize },
    #[error("line {line}: more than one tab")]
    ExtraColumns { line: usize },
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{} malformed line(s); first: {}", .0.len(), .0[0])]
    Malformed(Vec<LineError>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_gold_line(line_no: usize, line: &str) -> Result<GoldEntry, LineError> {
    let mut cols = line.split('\t');
    let surface = cols.next().unwrap_or_default();
    let segmentation = cols.next().ok_or(LineError::MissingSeparator { line: line_no })?;
    if cols.next().is_some() {
        return Err(LineError::ExtraColumns { line: line_no });
    }
    if surface.is_empty() {
        return Err(LineError::EmptySurface { line: line_no });
    }
    let morphemes: Vec<String> = segmentation.split('+').map(str::to_owned).collect();
    if morphemes.iter().any(String::is_empty) {
        return Err(LineError::EmptyMorpheme { line: line_no });
    }
    let word = GoldWord::new(surface, morphemes.clone()).map_err(|reason| FlaggedWord {
        surface: surface.to_owned(),
        morphemes,
        reason,
    });
    Ok(GoldEntry { line: line_no, word })
}

/// Parse a gold segmentation stream, collecting every malformed line.
pub fn parse_gold<R: BufRead>(reader: R) -> Result<GoldCorpus, CorpusError> {
    let mut corpus = GoldCorpus::default();
    let mut current = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let line_no = idx + 1;
        if line.starts_with('#') {
            continue;
        }
        if line.trim().is_empty() {
            if !current.is_empty() {
                corpus.sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        match parse_gold_line(line_no, line) {
            Ok(entry) => current.push(entry),
            Err(e) => errors.push(e),
        }
    }
    if !current.is_empty() {
        corpus.sentences.push(current);
    }
    if errors.is_empty() {
        Ok(corpus)
    } else {
        Err(CorpusError::Malformed(errors))
    }
}

pub fn parse_gold_str(text: &str) -> Result<GoldCorpus, CorpusError> {
    parse_gold(text.as_bytes())
}

/// Outcome of [`clean_gold`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CleanSummary {
    pub words_in: usize,
    pub words_out: usize,
    pub sentences_in: usize,
    pub sentences_out: usize,
}

/// Strip diacritics from a gold corpus and drop every non-Arabic word.
///
/// Sentences left empty are dropped. Line numbers keep pointing at the source file.
pub fn clean_gold(corpus: &GoldCorpus) -> (GoldCorpus, CleanSummary) {
    let mut summary = CleanSummary {
        words_in: corpus.word_count(),
        sentences_in: corpus.sentences.len(),
        ..Default::default()
    };
    let mut cleaned = GoldCorpus::default();
    for sentence in &corpus.sentences {
        let kept: Vec<GoldEntry> = sentence
            .iter()
            .filter_map(|entry| {
                let surface = strip_diacritics(entry.surface());
                if !is_arabic_word(&surface) {
                    return None;
                }
                let morphemes: Vec<String> = entry
                    .morphemes()
                    .iter()
                    .map(|m| strip_diacritics(m))
                    .filter(|m| !m.is_empty())
                    .collect();
                let word = if morphemes.is_empty() {
                    Err(FlaggedWord {
                        surface,
                        morphemes,
                        reason: ReconcileFlag::NoMorphemes,
                    })
                } else {
                    GoldWord::new(&surface, morphemes.clone()).map_err(|reason| FlaggedWord {
                        surface,
                        morphemes,
                        reason,
                    })
                };
                Some(GoldEntry { line: entry.line, word })
            })
            .collect();
        if !kept.is_empty() {
            summary.words_out += kept.len();
            cleaned.sentences.push(kept);
        }
    }
    summary.sentences_out = cleaned.sentences.len();
    (cleaned, summary)
}

/// Sentence, word, and token counts for a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats<S> {
    pub sentence_count: u64,
    pub word_count: u64,
    pub token_count: u64,
    /// Zero for an empty corpus.
    pub avg_tokens_per_sentence: S,
}

/// Statistics from per-sentence, per-word token counts.
pub fn corpus_stats<S: Scalar, W: AsRef<[usize]>>(sentences: &[W]) -> CorpusStats<S> {
    let sentence_count = sentences.len() as u64;
    let word_count = sentences.iter().map(|s| s.as_ref().len() as u64).sum();
    let token_count = sentences
        .iter()
        .flat_map(|s| s.as_ref().iter())
        .map(|&n| n as u64)
        .sum();
    CorpusStats {
        sentence_count,
        word_count,
        token_count,
        avg_tokens_per_sentence: S::ratio_or_zero(token_count, sentence_count),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_harakat_and_tatweel() {
        assert_eq!(strip_diacritics("كَتَبَ"), "كتب");
        assert_eq!(strip_diacritics("كتب"), "كتب");
        assert_eq!(strip_diacritics("فَعول"), "فعول");
        assert_eq!(strip_diacritics("كـــتاب"), "كتاب");
        assert_eq!(strip_diacritics("مُحَمَّدٌ"), "محمد");
        assert_eq!(strip_diacritics("هٰذا"), "هذا");
    }

    #[test]
    fn hamza_and_alef_forms_are_kept() {
        assert_eq!(strip_diacritics("أإآؤئء"), "أإآؤئء");
    }

    #[test]
    fn clean_filters_non_arabic() {
        let words = ["الكتاب", "123", "!", "hello"];
        assert_eq!(clean_words(&words), vec!["الكتاب"]);
        let empty: [&str; 0] = [];
        assert!(clean_words(&empty).is_empty());
    }

    #[test]
    fn clean_drops_mixed_tokens_whole() {
        let words = ["كتابabc", "كتاب3", "كتاب،", "٣", "؟", "كِتَاب"];
        assert_eq!(clean_words(&words), vec!["كِتَاب"]);
    }

    #[test]
    fn parse_two_morphemes() {
        let c = parse_gold_str("الكتاب\tال+كتاب\n").unwrap();
        let w = c.sentences[0][0].word.as_ref().unwrap();
        assert_eq!(w.surface(), "الكتاب");
        assert_eq!(w.morphemes(), ["ال", "كتاب"]);
        assert_eq!(w.spans(), [(0, 2), (2, 6)]);
        assert_eq!(w.boundaries().iter().copied().collect::<Vec<_>>(), vec![2]);
        assert_eq!(w.span_texts().concat(), "الكتاب");
    }

    #[test]
    fn parse_single_morpheme_has_no_boundary() {
        let c = parse_gold_str("كتاب\tكتاب\n").unwrap();
        let w = c.sentences[0][0].word.as_ref().unwrap();
        assert!(w.boundaries().is_empty());
        assert_eq!(w.spans(), [(0, 4)]);
    }

    #[test]
    fn missing_column_is_a_located_error() {
        let err = parse_gold_str("كتاب\tكتاب\nالكتاب\n").unwrap_err();
        match err {
            CorpusError::Malformed(errs) => {
                assert_eq!(errs, vec![LineError::MissingSeparator { line: 2 }]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_morpheme_rejected() {
        assert!(parse_gold_str("كتاب\tكت++اب\n").is_err());
    }

    #[test]
    fn sentences_comments_and_flags() {
        let text = "# header\nالكتاب\tال+كتاب\nكتاب\tكتاب\n\n\nالكتاب\tال+قلم\n";
        let c = parse_gold_str(text).unwrap();
        assert_eq!(c.sentences.len(), 2);
        assert_eq!(c.word_count(), 3);
        let flagged: Vec<_> = c.flagged().collect();
        assert_eq!(flagged.len(), 1);
        assert_eq!(flagged[0].line, 6);
    }

    #[test]
    fn well_formed_file_round_trips() {
        let text = "الكتاب\tال+كتاب\nكتاب\tكتاب\n\nوالقلم\tو+ال+قلم\n";
        let c = parse_gold_str(text).unwrap();
        assert_eq!(c.to_gold_string(), text);
    }

    #[test]
    fn clean_gold_strips_and_drops() {
        let text = "الكِتَابُ\tال+كِتَابُ\n2020\t2020\nhello\thello\n\n.\t.\n";
        let c = parse_gold_str(text).unwrap();
        let (cleaned, summary) = clean_gold(&c);
        assert_eq!(cleaned.to_gold_string(), "الكتاب\tال+كتاب\n");
        assert_eq!(
            summary,
            CleanSummary { words_in: 4, words_out: 1, sentences_in: 2, sentences_out: 1 }
        );
    }

    #[test]
    fn stats_direct_counting() {
        let s: CorpusStats<f64> = corpus_stats(&[vec![2, 2, 1]]);
        assert_eq!((s.sentence_count, s.word_count, s.token_count), (1, 3, 5));
        assert_eq!(s.avg_tokens_per_sentence, 5.0);
        let empty: Vec<Vec<usize>> = vec![];
        let s: CorpusStats<f64> = corpus_stats(&empty);
        assert_eq!((s.sentence_count, s.word_count, s.token_count), (0, 0, 0));
        assert_eq!(s.avg_tokens_per_sentence, 0.0);
    }

    #[test]
    fn stats_average_matches_published_cleaned_treebank_row() {
        // 12,587 sentences carrying 526,745 tokens
        let avg = f64::ratio_or_zero(526_745, 12_587);
        assert_eq!(format!("{avg:.2}"), "41.85");
        // word retention 292,552 of 337,312
        assert_eq!(format!("{:.4}", 292_552f64 / 337_312f64), "0.8673");
    }
}
