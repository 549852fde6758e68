//! Corpus-level alignment metrics.
//!
//! Boundary precision and recall pool their counts over the whole corpus.
//! Morpheme F1 and morpheme coverage rate are means of per-word scores.
//! Any ratio with a zero denominator is taken as zero.

use thiserror::Error;

use crate::alignment::{build_alignment, AlignError, TokenEntry, WordAlignment};
use crate::corpus::GoldCorpus;
use crate::scalar::{harmonic_mean, pairwise_sum, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("no words to evaluate")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("gold has {gold} word lines but tokenization has {tokens}")]
    LineCountMismatch { gold: usize, tokens: usize },
    #[error("gold line {gold_line} ({gold:?}) pairs with tokenization line {token_line} ({tokens:?})")]
    SurfaceMismatch {
        gold_line: usize,
        token_line: usize,
        gold: String,
        tokens: String,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Precision, recall, and their harmonic mean.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryScores<S> {
    pub precision: S,
    pub recall: S,
    pub f1: S,
}

impl<S: Scalar> BoundaryScores<S> {
    fn from_pr(precision: S, recall: S) -> Self {
        let f1 = harmonic_mean(&precision, &recall);
        Self { precision, recall, f1 }
    }
}

/// Mean tokens per word.
pub fn fertility<S: Scalar>(alignments: &[WordAlignment]) -> Result<S, MetricError> {
    if alignments.is_empty() {
        return Err(MetricError::Empty);
    }
    let tokens: u64 = alignments.iter().map(|a| a.token_count as u64).sum();
    Ok(S::from_count(tokens) / S::from_count(alignments.len() as u64))
}

/// Boundary precision/recall with counts pooled over all words.
pub fn boundary_prf<S: Scalar>(alignments: &[WordAlignment]) -> BoundaryScores<S> {
    let (mut matched, mut gold, mut pred) = (0u64, 0u64, 0u64);
    for a in alignments {
        matched += a.matched_boundaries() as u64;
        gold += a.gold_boundaries.len() as u64;
        pred += a.pred_boundaries.len() as u64;
    }
    BoundaryScores::from_pr(S::ratio_or_zero(matched, pred), S::ratio_or_zero(matched, gold))
}

/// Boundary precision/recall averaged word by word; F1 is taken of the two means.
pub fn boundary_prf_per_word<S: Scalar>(
    alignments: &[WordAlignment],
) -> Result<BoundaryScores<S>, MetricError> {
    if alignments.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = S::from_count(alignments.len() as u64);
    let precisions: Vec<S> = alignments
        .iter()
        .map(|a| S::ratio_or_zero(a.matched_boundaries() as u64, a.pred_boundaries.len() as u64))
        .collect();
    let recalls: Vec<S> = alignments
        .iter()
        .map(|a| S::ratio_or_zero(a.matched_boundaries() as u64, a.gold_boundaries.len() as u64))
        .collect();
    Ok(BoundaryScores::from_pr(
        pairwise_sum(&precisions) / n.clone(),
        pairwise_sum(&recalls) / n,
    ))
}

fn word_morpheme_f1<S: Scalar>(a: &WordAlignment) -> S {
    S::ratio_or_zero(
        2 * a.matched_spans() as u64,
        (a.gold_spans.len() + a.pred_spans.len()) as u64,
    )
}

fn word_coverage<S: Scalar>(a: &WordAlignment) -> S {
    S::ratio_or_zero(a.covered_spans() as u64, a.gold_spans.len() as u64)
}

fn mean_of<S: Scalar>(
    alignments: &[WordAlignment],
    per_word: impl Fn(&WordAlignment) -> S,
) -> Result<S, MetricError> {
    if alignments.is_empty() {
        return Err(MetricError::Empty);
    }
    let scores: Vec<S> = alignments.iter().map(per_word).collect();
    Ok(pairwise_sum(&scores) / S::from_count(alignments.len() as u64))
}

/// Mean over words of the exact-span F1.
pub fn morpheme_f1<S: Scalar>(alignments: &[WordAlignment]) -> Result<S, MetricError> {
    mean_of(alignments, word_morpheme_f1)
}

/// Mean over words of the fraction of gold morphemes kept inside one token.
pub fn mcr<S: Scalar>(alignments: &[WordAlignment]) -> Result<S, MetricError> {
    mean_of(alignments, word_coverage)
}

/// The full metric bundle for one tokenizer on one corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport<S> {
    pub fertility: S,
    pub total_tokens: u64,
    pub boundary_precision: S,
    pub boundary_recall: S,
    pub boundary_f1: S,
    /// Word-averaged boundary scores, reported next to the pooled ones.
    pub per_word_boundary: BoundaryScores<S>,
    pub morpheme_f1: S,
    pub mcr: S,
    pub word_count: u64,
    pub excluded_count: u64,
    /// Gold words whose morphemes do not spell the surface.
    pub excluded_gold: u64,
    /// Words the tokenization does not reassemble.
    pub excluded_reconstruction: u64,
}

impl<S: Scalar> AlignmentReport<S> {
    /// Metrics over already-paired words.
    pub fn from_alignments(alignments: &[WordAlignment]) -> Result<Self, MetricError> {
        let pooled = boundary_prf(alignments);
        Ok(Self {
            fertility: fertility(alignments)?,
            total_tokens: alignments.iter().map(|a| a.token_count as u64).sum(),
            boundary_precision: pooled.precision,
            boundary_recall: pooled.recall,
            boundary_f1: pooled.f1,
            per_word_boundary: boundary_prf_per_word(alignments)?,
            morpheme_f1: morpheme_f1(alignments)?,
            mcr: mcr(alignments)?,
            word_count: alignments.len() as u64,
            excluded_count: 0,
            excluded_gold: 0,
            excluded_reconstruction: 0,
        })
    }
}

/// Paired words plus the tallies of what was left out.
#[derive(Debug, Clone, Default)]
pub struct Pairing {
    pub alignments: Vec<WordAlignment>,
    pub excluded_gold: u64,
    pub excluded_reconstruction: u64,
}

/// Pair gold entries with tokenization entries in file order.
pub fn pair_corpus(gold: &GoldCorpus, tokens: &[TokenEntry]) -> Result<Pairing, EvalError> {
    let gold_count = gold.word_count();
    if gold_count != tokens.len() {
        return Err(EvalError::LineCountMismatch {
            gold: gold_count,
            tokens: tokens.len(),
        });
    }
    let mut pairing = Pairing::default();
    for (entry, tok) in gold.entries().zip(tokens) {
        if entry.surface() != tok.surface {
            return Err(EvalError::SurfaceMismatch {
                gold_line: entry.line,
                token_line: tok.line,
                gold: entry.surface().to_owned(),
                tokens: tok.surface.clone(),
            });
        }
        let Ok(word) = &entry.word else {
            pairing.excluded_gold += 1;
            continue;
        };
        match build_alignment(word, &tok.surface, &tok.tokens) {
            Ok(a) => pairing.alignments.push(a),
            Err(AlignError::SurfaceMismatch { .. }) => unreachable!("surfaces compared above"),
            Err(e) => {
                log::debug!("line {}: excluded ({e})", tok.line);
                pairing.excluded_reconstruction += 1;
            }
        }
    }
    Ok(pairing)
}

/// Evaluate a tokenization against a gold corpus.
pub fn evaluate<S: Scalar>(
    gold: &GoldCorpus,
    tokens: &[TokenEntry],
) -> Result<AlignmentReport<S>, EvalError> {
    let pairing = pair_corpus(gold, tokens)?;
    let mut report = AlignmentReport::from_alignments(&pairing.alignments)?;
    report.excluded_gold = pairing.excluded_gold;
    report.excluded_reconstruction = pairing.excluded_reconstruction;
    report.excluded_count = pairing.excluded_gold + pairing.excluded_reconstruction;
    Ok(report)
}
