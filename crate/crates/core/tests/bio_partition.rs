use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use idp_core::segmentation::{decode_bio, encode_sections, BioLabel, BioTag, Section};
use idp_core::OTHER_CLASS;

const CLASSES: [&str; 3] = ["invoice", "w2", "policy"];

fn random_label(rng: &mut StdRng) -> BioLabel {
    let class = CLASSES[rng.gen_range(0..CLASSES.len())];
    match rng.gen_range(0..3) {
        0 => BioLabel::begin(class),
        1 => BioLabel::inside(class),
        _ => BioLabel::outside(),
    }
}

fn assert_partition(sections: &[Section], n: usize) {
    let mut next = 0;
    for s in sections {
        assert!(!s.page_indices.is_empty());
        for &p in &s.page_indices {
            assert_eq!(p, next, "pages must be covered once, in order");
            next += 1;
        }
    }
    assert_eq!(next, n);
}

#[test]
fn ten_thousand_random_sequences_partition_and_round_trip() {
    let mut rng = StdRng::seed_from_u64(0xB10);
    for _ in 0..10_000 {
        let n = rng.gen_range(0..=50);
        let labels: Vec<BioLabel> = (0..n).map(|_| random_label(&mut rng)).collect();
        let sections = decode_bio(&labels);
        assert_partition(&sections, n);
        let again = decode_bio(&encode_sections(&sections));
        assert_eq!(again, sections);
    }
}

fn label() -> impl Strategy<Value = BioLabel> {
    (0..3usize, 0..CLASSES.len()).prop_map(|(tag, c)| match tag {
        0 => BioLabel::begin(CLASSES[c]),
        1 => BioLabel::inside(CLASSES[c]),
        _ => BioLabel::outside(),
    })
}

proptest! {
    #[test]
    fn continuation_pages_are_inside_labels_of_the_section_class(
        labels in prop::collection::vec(label(), 0..40)
    ) {
        let sections = decode_bio(&labels);
        assert_partition(&sections, labels.len());
        for s in &sections {
            for &p in &s.page_indices[1..] {
                prop_assert_eq!(labels[p].tag(), BioTag::I);
                prop_assert_eq!(labels[p].class_name(), s.class_name.as_str());
            }
            if labels[s.page_indices[0]].tag() == BioTag::O {
                prop_assert_eq!(s.class_name.as_str(), OTHER_CLASS);
                prop_assert_eq!(s.page_indices.len(), 1);
            }
        }
        let mut ids: Vec<&str> = sections.iter().map(|s| s.section_id.as_str()).collect();
        let n = ids.len();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), n);
    }
}
