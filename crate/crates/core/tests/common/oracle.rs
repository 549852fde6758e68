//! Brute-force reference for the alignment metrics: explicit lists, nested
//! loops, no pooling shortcuts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Letters used for random words; all two bytes in UTF-8.
const LETTERS: &[char] = &[
    'ا', 'ب', 'ت', 'ث', 'ج', 'ح', 'خ', 'د', 'ذ', 'ر', 'ز', 'س', 'ش', 'ص', 'ض', 'ط', 'ظ', 'ع', 'غ', 'ف',
    'ق', 'ك', 'ل', 'م', 'ن', 'ه', 'و', 'ي', 'ة', 'ى', 'أ', 'إ', 'ء',
];

/// A word with a gold segmentation and a byte-level tokenization.
#[derive(Debug, Clone)]
pub struct Triple {
    pub surface: String,
    pub gold: Vec<String>,
    pub tokens: Vec<Vec<u8>>,
}

/// Random triple: 1 to 10 letters, random gold cuts, random token cuts that
/// sometimes fall inside a character.
pub fn random_triple(rng: &mut ChaCha8Rng) -> Triple {
    let len = rng.random_range(1..=10);
    let chars: Vec<char> = (0..len).map(|_| LETTERS[rng.random_range(0..LETTERS.len())]).collect();
    let surface: String = chars.iter().collect();

    let mut gold = Vec::new();
    let mut current = String::new();
    for (i, c) in chars.iter().enumerate() {
        if i > 0 && rng.random_bool(0.35) {
            gold.push(std::mem::take(&mut current));
        }
        current.push(*c);
    }
    gold.push(current);

    let bytes = surface.as_bytes();
    let mut tokens = Vec::new();
    let mut piece = Vec::new();
    for (i, b) in bytes.iter().enumerate() {
        if i > 0 {
            let at_char_start = surface.is_char_boundary(i);
            let p = if at_char_start { 0.4 } else { 0.1 };
            if rng.random_bool(p) {
                tokens.push(std::mem::take(&mut piece));
            }
        }
        piece.push(*b);
    }
    tokens.push(piece);
    Triple { surface, gold, tokens }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleScores {
    pub fertility: f64,
    pub bp: f64,
    pub br: f64,
    pub bf1: f64,
    pub mf1: f64,
    pub mcr: f64,
    pub total_tokens: usize,
}

fn spans_from_cuts(cuts: &[usize], len: usize) -> Vec<(usize, usize)> {
    let mut points = vec![0];
    points.extend_from_slice(cuts);
    points.push(len);
    let mut spans = Vec::new();
    for i in 0..points.len() - 1 {
        spans.push((points[i], points[i + 1]));
    }
    spans
}

/// Character cut points of the gold segmentation.
pub fn gold_cuts(triple: &Triple) -> Vec<usize> {
    let mut cuts = Vec::new();
    let mut at = 0;
    for m in &triple.gold[..triple.gold.len() - 1] {
        at += m.chars().count();
        cuts.push(at);
    }
    cuts
}

/// Character cut points of the tokenization; byte cuts inside a character vanish.
pub fn token_cuts(triple: &Triple) -> Vec<usize> {
    let mut char_starts = Vec::new();
    let mut offset = 0;
    for c in triple.surface.chars() {
        char_starts.push(offset);
        offset += c.len_utf8();
    }
    let mut cuts = Vec::new();
    let mut byte = 0;
    for t in &triple.tokens[..triple.tokens.len() - 1] {
        byte += t.len();
        for (index, &start) in char_starts.iter().enumerate() {
            if start == byte && !cuts.contains(&index) {
                cuts.push(index);
            }
        }
    }
    cuts
}

pub fn oracle(triples: &[Triple]) -> OracleScores {
    let mut total_tokens = 0usize;
    let (mut matched, mut gold_total, mut pred_total) = (0usize, 0usize, 0usize);
    let (mut mf1_sum, mut mcr_sum) = (0.0f64, 0.0f64);
    for t in triples {
        let len = t.surface.chars().count();
        total_tokens += t.tokens.len();
        let g = gold_cuts(t);
        let p = token_cuts(t);
        gold_total += g.len();
        pred_total += p.len();
        for &x in &g {
            if p.contains(&x) {
                matched += 1;
            }
        }
        let gs = spans_from_cuts(&g, len);
        let ps = spans_from_cuts(&p, len);
        let mut same = 0;
        let mut covered = 0;
        for &(gs0, ge0) in &gs {
            if ps.iter().any(|&(a, b)| a == gs0 && b == ge0) {
                same += 1;
            }
            if ps.iter().any(|&(a, b)| a <= gs0 && ge0 <= b) {
                covered += 1;
            }
        }
        mf1_sum += 2.0 * same as f64 / (gs.len() + ps.len()) as f64;
        mcr_sum += covered as f64 / gs.len() as f64;
    }
    let n = triples.len() as f64;
    let bp = if pred_total == 0 { 0.0 } else { matched as f64 / pred_total as f64 };
    let br = if gold_total == 0 { 0.0 } else { matched as f64 / gold_total as f64 };
    let bf1 = if bp + br == 0.0 { 0.0 } else { 2.0 * bp * br / (bp + br) };
    OracleScores {
        fertility: total_tokens as f64 / n,
        bp,
        br,
        bf1,
        mf1: mf1_sum / n,
        mcr: mcr_sum / n,
        total_tokens,
    }
}
