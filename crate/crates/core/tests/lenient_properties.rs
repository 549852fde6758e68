mod common;

use common::lenient::{cases, Kind};
use morphprobe::probe::{arabic_runs, lenient_match};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn generated_cases_behave() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let all = cases(&mut rng, 600);
    for kind in [Kind::Embedded, Kind::SubRun, Kind::Diacritized] {
        assert!(all.iter().filter(|c| c.kind == kind).count() >= 200);
    }
    for c in &all {
        assert_eq!(lenient_match(&c.output, &c.target), c.expected, "{:?}: {:?} / {:?}", c.kind, c.output, c.target);
    }
}

#[test]
fn examples() {
    assert!(lenient_match("الثمار", "الثمار"));
    assert!(lenient_match("The answer is: الثمار.", "الثمار"));
    assert!(lenient_match("اَلثِّمَارُ", "الثمار"));
    assert!(lenient_match("**مكتوب**", "مكتوب"));
    assert!(!lenient_match("والثمار", "الثمار"));
    assert!(!lenient_match("ثمار", "الثمار"));
    assert!(!lenient_match("", "ثمار"));
    assert!(!lenient_match("ثمار", ""));
    assert!(lenient_match("قال: كتب الولد", "كتب الولد"));
    assert!(!lenient_match("كتب والولد", "كتب الولد"));
}

proptest! {
    #[test]
    fn any_seed(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in cases(&mut rng, 30) {
            prop_assert_eq!(lenient_match(&c.output, &c.target), c.expected);
        }
    }

    #[test]
    fn runs_contain_no_delimiters(text in ".*") {
        for run in arabic_runs(&text) {
            prop_assert!(!run.is_empty());
            prop_assert!(run.chars().all(morphprobe::corpus::is_arabic_letter));
        }
    }

    #[test]
    fn output_equal_to_target_matches(target in "[ب-غ]{1,8}") {
        prop_assert!(lenient_match(&target, &target));
    }
}
