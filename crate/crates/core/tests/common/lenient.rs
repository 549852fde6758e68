//! Generated cases for lenient answer matching.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

const LETTERS: &[char] = &[
    'ب', 'ت', 'ث', 'ج', 'ح', 'خ', 'د', 'ذ', 'ر', 'ز', 'س', 'ش', 'ص', 'ض', 'ط', 'ظ', 'ع', 'غ', 'ف', 'ق',
    'ك', 'ل', 'م', 'ن', 'ه', 'و', 'ي', 'ا', 'ة',
];
const MARKS: &[char] = &['\u{064B}', '\u{064E}', '\u{064F}', '\u{0650}', '\u{0651}', '\u{0652}', '\u{0670}', '\u{0640}'];
const FILLERS: &[&str] = &[
    "The answer is", "Answer:", "Target form:", "->", "(", ")", ".", "\"", "**", "1.", "\n", ":", "word", "!",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Target embedded in longer text; must match.
    Embedded,
    /// Target glued inside a longer letter run; must not match.
    SubRun,
    /// Diacritized rendering of the target; must match.
    Diacritized,
}

#[derive(Debug, Clone)]
pub struct Case {
    pub kind: Kind,
    pub output: String,
    pub target: String,
    pub expected: bool,
}

fn word(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    (0..n).map(|_| LETTERS[rng.random_range(0..LETTERS.len())]).collect()
}

fn filler(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(0..=3);
    (0..n).map(|_| FILLERS[rng.random_range(0..FILLERS.len())]).collect::<Vec<_>>().join(" ")
}

fn diacritize(rng: &mut ChaCha8Rng, text: &str) -> String {
    let mut out = String::new();
    for c in text.chars() {
        out.push(c);
        for _ in 0..rng.random_range(0..=2) {
            out.push(MARKS[rng.random_range(0..MARKS.len())]);
        }
    }
    out
}

/// Cases cycling through the three kinds.
pub fn cases(rng: &mut ChaCha8Rng, count: usize) -> Vec<Case> {
    (0..count)
        .map(|i| {
            let target = word(rng, 2, 7);
            match i % 3 {
                0 => Case {
                    kind: Kind::Embedded,
                    output: format!("{} {target} {}", filler(rng), filler(rng)),
                    target,
                    expected: true,
                },
                1 => {
                    let (mut before, mut after) = (word(rng, 0, 3), word(rng, 0, 3));
                    if before.is_empty() && after.is_empty() {
                        after = word(rng, 1, 3);
                    }
                    if rng.random_bool(0.3) {
                        before = diacritize(rng, &before);
                    }
                    Case {
                        kind: Kind::SubRun,
                        output: format!("{} {before}{target}{after} {}", filler(rng), filler(rng)),
                        target,
                        expected: false,
                    }
                }
                _ => Case {
                    kind: Kind::Diacritized,
                    output: format!("{} {}{}", filler(rng), diacritize(rng, &target), filler(rng)),
                    target,
                    expected: true,
                },
            }
        })
        .collect()
}
