//! Dataset fixtures shaped like the reference real-root set.

use morphprobe::datagen::DatasetInstance;
use morphprobe::templatic::{default_inventory, Root, RootCategory};

pub const REAL_ROOTS: [&str; 10] = ["كتب", "درس", "علم", "حمل", "شرب", "فتح", "نصر", "قطع", "جمع", "سمع"];

/// 13 patterns x 10 roots, each pair as one bare and two affixed forms.
pub fn real_fixture() -> Vec<DatasetInstance> {
    let mut out = Vec::new();
    for (i, text) in REAL_ROOTS.iter().enumerate() {
        let category = if i < 5 { RootCategory::RealHighFrequency } else { RootCategory::RealLowFrequency };
        let root = Root::parse(text, category).unwrap();
        for entry in default_inventory() {
            for (prefix, suffix) in [("", ""), ("ال", ""), ("", "هم")] {
                out.push(DatasetInstance::derive(&root, &entry, prefix, suffix).unwrap());
            }
        }
    }
    out
}

/// Every single-field corruption of record `index`, labelled by field.
pub fn corruptions(records: &[DatasetInstance], index: usize) -> Vec<(&'static str, Vec<DatasetInstance>)> {
    let edit = |f: &dyn Fn(&mut DatasetInstance)| {
        let mut copy = records.to_vec();
        f(&mut copy[index]);
        copy
    };
    vec![
        ("root", edit(&|r| r.root = "زرع".into())),
        ("template", edit(&|r| r.template = if r.template == "فاعل" { "مفعول".into() } else { "فاعل".into() })),
        ("base_form", edit(&|r| r.base_form.push('ن'))),
        ("prefix", edit(&|r| r.prefix = "و".into())),
        ("suffix", edit(&|r| r.suffix = "ها".into())),
        ("full_form", edit(&|r| r.full_form.insert(0, 'ب'))),
        ("has_affix", edit(&|r| r.has_affix = !r.has_affix)),
        ("root_category", edit(&|r| r.root_category = RootCategory::Nonce)),
    ]
}
