use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;
use std::fs;

use fpembed_core::data_io::{
    load_dataset, parse_minutiae_file, split_train_val, synthetic_index, write_minutiae_file,
};
use fpembed_core::synth::generate_synthetic_fingerprint;
use fpembed_core::{Layout, Minutia, MinutiaKind, MinutiaSet, SynthSpec};
use proptest::prelude::*;

fn write_tiny_png(path: &std::path::Path) {
    let img = image::GrayImage::from_pixel(32, 32, image::Luma([128u8]));
    img.save(path).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn relabeling_is_a_bijection_on_finger_identity(
        labels in prop::collection::btree_set(0u32..500, 1..6),
        impressions in 1usize..4,
    ) {
        let dir = tempfile::tempdir().unwrap();
        for &f in &labels {
            for i in 1..=impressions {
                write_tiny_png(&dir.path().join(format!("{f}_{i}.png")));
            }
        }
        let index = load_dataset(dir.path(), Layout::Fvc).unwrap();
        prop_assert_eq!(index.class_count(), labels.len());
        prop_assert_eq!(index.len(), labels.len() * impressions);
        let mut forward: BTreeMap<u32, usize> = BTreeMap::new();
        for r in index.records() {
            let original: u32 = r.image_id.split('_').next().unwrap().parse().unwrap();
            let prev = forward.insert(original, r.finger_id);
            prop_assert!(prev.is_none() || prev == Some(r.finger_id));
        }
        let images: BTreeSet<usize> = forward.values().copied().collect();
        prop_assert_eq!(images.len(), forward.len());
        prop_assert_eq!(images, (0..labels.len()).collect::<BTreeSet<_>>());
    }

    #[test]
    fn splits_are_disjoint_and_exhaustive(fingers in 1usize..6, impressions in 2usize..6, val in 0usize..2) {
        let index = synthetic_index(fingers, 0..impressions, &SynthSpec::default(), 3).unwrap();
        let (train, valid) = split_train_val(&index, val).unwrap();
        let key = |r: &fpembed_core::Record| (r.finger_id, r.impression_id);
        let a: BTreeSet<_> = train.records().iter().map(key).collect();
        let b: BTreeSet<_> = valid.records().iter().map(key).collect();
        prop_assert!(a.is_disjoint(&b));
        let all: BTreeSet<_> = index.records().iter().map(key).collect();
        prop_assert_eq!(a.union(&b).copied().collect::<BTreeSet<_>>(), all);
        prop_assert_eq!(train.class_count(), index.class_count());
        prop_assert_eq!(valid.class_count(), index.class_count());
        prop_assert_eq!(valid.len(), fingers * val);
    }

    #[test]
    fn minutiae_file_round_trip(
        raw in prop::collection::vec((0.0f64..300.0, 0.0f64..300.0, -10.0f64..10.0, 0usize..3), 0..20)
    ) {
        let kinds = [MinutiaKind::Ending, MinutiaKind::Bifurcation, MinutiaKind::Unknown];
        let mut set = MinutiaSet::new(
            raw.iter().map(|&(x, y, t, k)| Minutia::new(x, y, t, kinds[k])).collect(),
            "img",
        );
        set.dedup();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.min");
        write_minutiae_file(&path, &set).unwrap();
        let mut back = parse_minutiae_file(&path).unwrap();
        back.image_ref = set.image_ref.clone();
        prop_assert_eq!(back, set);
    }
}

#[test]
fn parsed_angles_land_in_unit_circle_range() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.min");
    fs::write(&path, "# comment\n10 10 -1.5708 bifurcation\n5 5 6.2831853071795862 ending\n").unwrap();
    let set = parse_minutiae_file(&path).unwrap();
    assert!((set.items[0].theta - 3.0 * TAU / 4.0).abs() < 1e-4);
    assert!(set.items.iter().all(|m| (0.0..TAU).contains(&m.theta)));
}

#[test]
fn synthetic_seed_change_alters_image() {
    let spec = SynthSpec { width: 64, height: 64, minutia_count: 4, ..SynthSpec::default() };
    let (a, _) = generate_synthetic_fingerprint(9, &spec).unwrap();
    let (b, _) = generate_synthetic_fingerprint(10, &spec).unwrap();
    assert_ne!(a.pixels(), b.pixels());
}
