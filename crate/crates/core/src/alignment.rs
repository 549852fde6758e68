//! Character-offset alignment of gold morphemes and tokenizer output.
//!
//! Offsets are counted in Unicode scalar values. A token boundary that falls
//! inside a multi-byte character (byte-level BPE) cannot coincide with a
//! morpheme boundary, so it is dropped from the boundary set while both
//! fragments still count as tokens.

use std::collections::BTreeSet;
use std::io::BufRead;

use thiserror::Error;

use crate::corpus::{is_diacritic, GoldCorpus, GoldWord};

/// Separator between tokens in a tokenization file (ASCII unit separator).
pub const TOKEN_SEPARATOR: char = '\u{001F}';

/// Why a gold segmentation could not be placed on its surface word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ReconcileFlag {
    #[error("no morphemes")]
    NoMorphemes,
    #[error("morpheme {index} is empty")]
    EmptyMorpheme { index: usize },
    #[error("character mismatch at offset {offset}")]
    CharacterMismatch { offset: usize },
    #[error("length mismatch: surface has {surface} characters, morphemes {morphemes}")]
    LengthMismatch { surface: usize, morphemes: usize },
}

/// Orthographic alternations tolerated when morphemes do not concatenate to the surface.
fn alternates(a: char, b: char) -> bool {
    const ALEFS: &[char] = &['ا', 'أ', 'إ', 'آ', 'ٱ'];
    a == b
        || (ALEFS.contains(&a) && ALEFS.contains(&b))
        || matches!((a, b), ('ة', 'ت') | ('ت', 'ة') | ('ة', 'ه') | ('ه', 'ة'))
        || matches!((a, b), ('ى', 'ي') | ('ي', 'ى') | ('ى', 'ا') | ('ا', 'ى'))
}

/// Character spans of `morphemes` on `surface`.
///
/// Exact concatenation gives cumulative-length cuts. Otherwise the morphemes
/// are stripped of diacritics and walked left to right against the surface,
/// accepting only the alternations in [`alternates`].
pub fn reconcile_gold<S: AsRef<str>>(
    surface: &str,
    morphemes: &[S],
) -> Result<Vec<(usize, usize)>, ReconcileFlag> {
    if morphemes.is_empty() {
        return Err(ReconcileFlag::NoMorphemes);
    }
    if let Some(index) = morphemes.iter().position(|m| m.as_ref().is_empty()) {
        return Err(ReconcileFlag::EmptyMorpheme { index });
    }
    let exact = morphemes.iter().map(AsRef::as_ref).collect::<String>() == surface;
    let pieces: Vec<Vec<char>> = morphemes
        .iter()
        .map(|m| {
            m.as_ref()
                .chars()
                .filter(|&c| exact || !is_diacritic(c))
                .collect()
        })
        .collect();
    if let Some(index) = pieces.iter().position(Vec::is_empty) {
        return Err(ReconcileFlag::EmptyMorpheme { index });
    }
    if !exact {
        let surface_chars: Vec<char> = surface.chars().collect();
        let joined: Vec<char> = pieces.iter().flatten().copied().collect();
        if let Some(offset) = surface_chars
            .iter()
            .zip(&joined)
            .position(|(&s, &m)| !alternates(s, m))
        {
            return Err(ReconcileFlag::CharacterMismatch { offset });
        }
        if surface_chars.len() != joined.len() {
            return Err(ReconcileFlag::LengthMismatch {
                surface: surface_chars.len(),
                morphemes: joined.len(),
            });
        }
    }
    let mut start = 0;
    Ok(pieces
        .iter()
        .map(|p| {
            let span = (start, start + p.len());
            start = span.1;
            span
        })
        .collect())
}

/// Predicted segmentation of one word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSplit {
    pub boundaries: BTreeSet<usize>,
    pub spans: Vec<(usize, usize)>,
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignError {
    #[error("tokens do not reassemble the surface")]
    ConcatenationMismatch,
    #[error("token {index} is empty")]
    EmptyToken { index: usize },
    #[error("no tokens")]
    NoTokens,
    #[error("gold surface {gold:?} differs from tokenized surface {tokens:?}")]
    SurfaceMismatch { gold: String, tokens: String },
}

/// Boundaries, spans, and token count of a decoded tokenization of `surface`.
pub fn align_tokens<T: AsRef<[u8]>>(surface: &str, tokens: &[T]) -> Result<TokenSplit, AlignError> {
    if tokens.is_empty() {
        return Err(AlignError::NoTokens);
    }
    if let Some(index) = tokens.iter().position(|t| t.as_ref().is_empty()) {
        return Err(AlignError::EmptyToken { index });
    }
    let joined: Vec<u8> = tokens.iter().flat_map(|t| t.as_ref().iter().copied()).collect();
    if joined != surface.as_bytes() {
        return Err(AlignError::ConcatenationMismatch);
    }

    let char_len = surface.chars().count();
    let mut boundaries = BTreeSet::new();
    let mut byte_offset = 0;
    for token in &tokens[..tokens.len() - 1] {
        byte_offset += token.as_ref().len();
        if surface.is_char_boundary(byte_offset) {
            boundaries.insert(surface[..byte_offset].chars().count());
        }
    }
    let cuts: Vec<usize> = std::iter::once(0)
        .chain(boundaries.iter().copied())
        .chain(std::iter::once(char_len))
        .collect();
    let spans = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    Ok(TokenSplit {
        boundaries,
        spans,
        token_count: tokens.len(),
    })
}

/// Gold and predicted segmentations of one word, side by side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordAlignment {
    pub surface: String,
    pub gold_boundaries: BTreeSet<usize>,
    pub gold_spans: BTreeSet<(usize, usize)>,
    pub pred_boundaries: BTreeSet<usize>,
    pub pred_spans: BTreeSet<(usize, usize)>,
    pub token_count: usize,
}

impl WordAlignment {
    /// `|B ∩ B̂|`
    pub fn matched_boundaries(&self) -> usize {
        self.gold_boundaries.intersection(&self.pred_boundaries).count()
    }

    /// `|M ∩ M̂|`
    pub fn matched_spans(&self) -> usize {
        self.gold_spans.intersection(&self.pred_spans).count()
    }

    /// Gold spans lying wholly inside a single predicted span.
    pub fn covered_spans(&self) -> usize {
        // pred_spans partition the word, so the containing span is the last
        // one starting at or before the gold start.
        self.gold_spans
            .iter()
            .filter(|&&(start, end)| {
                self.pred_spans
                    .range(..=(start, usize::MAX))
                    .next_back()
                    .is_some_and(|&(ps, pe)| ps <= start && end <= pe)
            })
            .count()
    }
}

/// Pair a gold word with its tokenization.
pub fn build_alignment<T: AsRef<[u8]>>(
    gold: &GoldWord,
    surface: &str,
    tokens: &[T],
) -> Result<WordAlignment, AlignError> {
    if gold.surface() != surface {
        return Err(AlignError::SurfaceMismatch {
            gold: gold.surface().to_owned(),
            tokens: surface.to_owned(),
        });
    }
    let split = align_tokens(surface, tokens)?;
    Ok(WordAlignment {
        surface: surface.to_owned(),
        gold_boundaries: gold.boundaries().clone(),
        gold_spans: gold.spans().iter().copied().collect(),
        pred_boundaries: split.boundaries,
        pred_spans: split.spans.into_iter().collect(),
        token_count: split.token_count,
    })
}

/// One word line of a tokenization file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenEntry {
    pub line: usize,
    pub surface: String,
    /// Decoded token bytes; a token may hold part of a character.
    pub tokens: Vec<Vec<u8>>,
}

#[derive(Debug, Error)]
pub enum TokenFileError {
    #[error("line {line}: missing tab between surface and tokens")]
    MissingSeparator { line: usize },
    #[error("line {line}: bad escape in token {token:?}")]
    BadEscape { line: usize, token: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Decode `\xHH` byte escapes and `\\` in a token.
pub fn decode_token(token: &str) -> Option<Vec<u8>> {
    let mut out = Vec::with_capacity(token.len());
    let mut rest = token;
    while let Some(pos) = rest.find('\\') {
        out.extend_from_slice(&rest.as_bytes()[..pos]);
        let tail = &rest[pos + 1..];
        if let Some(after) = tail.strip_prefix('\\') {
            out.push(b'\\');
            rest = after;
        } else {
            let hex = tail.strip_prefix('x')?;
            let digits = hex.get(..2)?;
            out.push(u8::from_str_radix(digits, 16).ok()?);
            rest = &hex[2..];
        }
    }
    out.extend_from_slice(rest.as_bytes());
    Some(out)
}

/// Inverse of [`decode_token`]: escapes bytes that do not form whole characters.
pub fn encode_token(bytes: &[u8]) -> String {
    let mut out = String::new();
    for chunk in bytes.utf8_chunks() {
        for c in chunk.valid().chars() {
            if c == '\\' {
                out.push_str("\\\\");
            } else {
                out.push(c);
            }
        }
        for b in chunk.invalid() {
            out.push_str(&format!("\\x{b:02X}"));
        }
    }
    out
}

/// Parse a tokenization file: `surface<TAB>tok1<US>tok2...` per word.
///
/// Blank lines and `#` comments are skipped so the file may mirror the gold
/// file's sentence layout.
pub fn parse_tokens<R: BufRead>(reader: R) -> Result<Vec<TokenEntry>, TokenFileError> {
    let mut entries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let line_no = idx + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let (surface, toks) = line
            .split_once('\t')
            .ok_or(TokenFileError::MissingSeparator { line: line_no })?;
        let tokens = toks
            .split(TOKEN_SEPARATOR)
            .map(|t| {
                decode_token(t).ok_or_else(|| TokenFileError::BadEscape {
                    line: line_no,
                    token: t.to_owned(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        entries.push(TokenEntry {
            line: line_no,
            surface: surface.to_owned(),
            tokens,
        });
    }
    Ok(entries)
}

/// Read a gold corpus as if it were a tokenization, one token per morpheme.
pub fn tokens_from_gold(corpus: &GoldCorpus) -> Vec<TokenEntry> {
    corpus
        .entries()
        .map(|e| TokenEntry {
            line: e.line,
            surface: e.surface().to_owned(),
            tokens: e.morphemes().iter().map(|m| m.as_bytes().to_vec()).collect(),
        })
        .collect()
}

/// Render token entries in the tokenization file format.
pub fn write_tokens(entries: &[TokenEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&e.surface);
        out.push('\t');
        let toks: Vec<String> = e.tokens.iter().map(|t| encode_token(t)).collect();
        out.push_str(&toks.join(&TOKEN_SEPARATOR.to_string()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn reconcile_cumulative_cuts() {
        assert_eq!(reconcile_gold("الكتاب", &["ال", "كتاب"]), Ok(vec![(0, 2), (2, 6)]));
        assert_eq!(reconcile_gold("كتاب", &["كتاب"]), Ok(vec![(0, 4)]));
    }

    #[test]
    fn reconcile_flags_character_mismatch() {
        assert_eq!(
            reconcile_gold("الكتاب", &["ال", "قلم"]),
            Err(ReconcileFlag::CharacterMismatch { offset: 2 })
        );
    }

    #[test]
    fn reconcile_flags_length_mismatch() {
        // لل+كتاب: the alef of the article is elided in writing
        assert_eq!(
            reconcile_gold("للكتاب", &["ل", "ال", "كتاب"]),
            Err(ReconcileFlag::CharacterMismatch { offset: 1 })
        );
        assert_eq!(
            reconcile_gold("كتاب", &["كتاب", "ه"]),
            Err(ReconcileFlag::LengthMismatch { surface: 4, morphemes: 5 })
        );
    }

    #[test]
    fn reconcile_accepts_ta_marbuta_alternation() {
        assert_eq!(reconcile_gold("مدرستها", &["مدرسة", "ها"]), Ok(vec![(0, 5), (5, 7)]));
    }

    #[test]
    fn reconcile_ignores_diacritics_in_morphemes() {
        assert_eq!(reconcile_gold("الكتاب", &["ال", "كِتاب"]), Ok(vec![(0, 2), (2, 6)]));
    }

    #[test]
    fn align_cumulative_boundaries() {
        let s = align_tokens("الكتاب", &["ال", "كت", "اب"]).unwrap();
        assert_eq!(s.boundaries, set(&[2, 4]));
        assert_eq!(s.spans, vec![(0, 2), (2, 4), (4, 6)]);
        assert_eq!(s.token_count, 3);
    }

    #[test]
    fn align_whole_word() {
        let s = align_tokens("كتاب", &["كتاب"]).unwrap();
        assert!(s.boundaries.is_empty());
        assert_eq!(s.spans, vec![(0, 4)]);
        assert_eq!(s.token_count, 1);
    }

    #[test]
    fn align_drops_mid_character_boundary() {
        let bytes = "كتاب".as_bytes();
        // ك is two bytes; split between them
        let first = bytes[..1].to_vec();
        let second = bytes[1..].to_vec();
        let s = align_tokens("كتاب", &[first, second]).unwrap();
        assert!(s.boundaries.is_empty());
        assert_eq!(s.spans, vec![(0, 4)]);
        assert_eq!(s.token_count, 2);
    }

    #[test]
    fn align_rejects_mismatch() {
        assert_eq!(align_tokens("كتاب", &["كت"]), Err(AlignError::ConcatenationMismatch));
        assert_eq!(align_tokens("كتاب", &["", "كتاب"]), Err(AlignError::EmptyToken { index: 0 }));
    }

    #[test]
    fn build_pairs_both_sides() {
        let gold = GoldWord::new("الكتاب", vec!["ال".into(), "كتاب".into()]).unwrap();
        let a = build_alignment(&gold, "الكتاب", &["ال", "كت", "اب"]).unwrap();
        assert_eq!(a.gold_boundaries, set(&[2]));
        assert_eq!(a.pred_boundaries, set(&[2, 4]));
        assert_eq!(a.matched_boundaries(), 1);
        assert_eq!(a.matched_spans(), 1);
        assert_eq!(a.covered_spans(), 1);

        let same = build_alignment(&gold, "الكتاب", &["ال", "كتاب"]).unwrap();
        assert_eq!(same.gold_boundaries, same.pred_boundaries);
        assert_eq!(same.gold_spans, same.pred_spans);

        assert!(matches!(
            build_alignment(&gold, "كتاب", &["كتاب"]),
            Err(AlignError::SurfaceMismatch { .. })
        ));
    }

    #[test]
    fn token_escapes() {
        assert_eq!(decode_token("\\xD9").unwrap(), vec![0xD9]);
        assert_eq!(decode_token("a\\\\b").unwrap(), b"a\\b".to_vec());
        assert!(decode_token("\\q").is_none());
        assert!(decode_token("\\x9").is_none());
        let bytes = "كتاب".as_bytes();
        assert_eq!(encode_token(&bytes[..1]), "\\xD9");
        assert_eq!(decode_token(&encode_token(&bytes[1..])).unwrap(), bytes[1..].to_vec());
    }

    #[test]
    fn parse_token_file() {
        let text = "الكتاب\tال\u{1f}كت\u{1f}اب\n\nكتاب\t\\xD9\u{1f}\\x83تاب\n";
        let entries = parse_tokens(text.as_bytes()).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[1].line, 3);
        let s = align_tokens(&entries[1].surface, &entries[1].tokens).unwrap();
        assert_eq!(s.token_count, 2);
        assert!(s.boundaries.is_empty());
        assert_eq!(write_tokens(&entries), text.replace("\n\n", "\n"));
    }
}
