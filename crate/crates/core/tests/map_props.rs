use fpembed_core::minutia_map::{attention_mask_from_map, build_minutia_map};
use fpembed_core::{MapParams, Minutia, MinutiaKind, MinutiaMap, MinutiaSet};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn peak_cell(map: &MinutiaMap) -> (usize, usize) {
    let collapsed: Array2<f64> = map.collapse_max();
    let mut best = (f64::MIN, (0, 0));
    for ((r, c), &v) in collapsed.indexed_iter() {
        if v > best.0 {
            best = (v, (r, c));
        }
    }
    best.1
}

#[test]
fn translation_moves_peak_by_scaled_shift() {
    let params = MapParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let (x, y) = (rng.random_range(60.0..196.0), rng.random_range(60.0..196.0));
        let (dx, dy) = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let theta = rng.random_range(0.0..6.28);
        let one = |x, y| MinutiaSet::new(vec![Minutia::new(x, y, theta, MinutiaKind::Ending)], "m");
        let a = build_minutia_map(&one(x, y), 256, &params).unwrap();
        let b = build_minutia_map(&one(x + dx, y + dy), 256, &params).unwrap();
        let (ra, ca) = peak_cell(&a);
        let (rb, cb) = peak_cell(&b);
        let shift_c = cb as f64 - ca as f64;
        let shift_r = rb as f64 - ra as f64;
        assert!((shift_c - dx * a.scale).abs() <= 1.0, "col shift {shift_c} vs {}", dx * a.scale);
        assert!((shift_r - dy * a.scale).abs() <= 1.0, "row shift {shift_r} vs {}", dy * a.scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn map_values_bounded_by_contributor_count(
        pts in prop::collection::vec((0.0f64..255.0, 0.0f64..255.0, 0.0f64..6.28), 0..6)
    ) {
        let set = MinutiaSet::new(
            pts.iter().map(|&(x, y, t)| Minutia::new(x, y, t, MinutiaKind::Unknown)).collect(),
            "m",
        );
        let params = MapParams { map_side: 32, ..MapParams::default() };
        let map = build_minutia_map(&set, 256, &params).unwrap();
        let n = pts.len() as f64;
        prop_assert!(map.values.iter().all(|&v| v >= 0.0 && v <= n + 1e-12));
        let mask = attention_mask_from_map(&map, (8, 8));
        let sum: f64 = mask.weights.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-6);
        prop_assert!(mask.weights.iter().all(|&w| (0.0..=1.0).contains(&w)));
    }

    #[test]
    fn mask_ignores_positive_scaling(x in 10.0f64..240.0, y in 10.0f64..240.0, c in 0.01f64..100.0) {
        let set = MinutiaSet::new(vec![Minutia::new(x, y, 0.3, MinutiaKind::Ending)], "m");
        let params = MapParams { map_side: 32, ..MapParams::default() };
        let map = build_minutia_map(&set, 256, &params).unwrap();
        let scaled = MinutiaMap { values: &map.values * c, scale: map.scale };
        let a = attention_mask_from_map(&map, (16, 16));
        let b = attention_mask_from_map(&scaled, (16, 16));
        for (u, v) in a.weights.iter().zip(b.weights.iter()) {
            prop_assert!((u - v).abs() <= 1e-15);
        }
    }
}
