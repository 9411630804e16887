use std::f64::consts::PI;

use fpembed_core::augment::{
    apply_deformation, augment_pipeline, make_deformation_field, sample_gates, AugmentConfig,
    DeformParams, DeformationField,
};
use fpembed_core::minutia_map::wrapped_angle_diff;
use fpembed_core::synth::{generate_synthetic_fingerprint, synthetic_quadrature};
use fpembed_core::{MinutiaSet, SynthSpec};
use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn gate_rates_match_probabilities() {
    let cfg = AugmentConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 10_000;
    let mut hits = [0usize; 4];
    for _ in 0..n {
        let g = sample_gates(&cfg, &mut rng);
        for (h, on) in hits.iter_mut().zip([g.contrast, g.noise, g.deform, g.morph]) {
            *h += on as usize;
        }
    }
    for (h, p) in hits.iter().zip([0.8, 0.8, 0.5, 0.5]) {
        let rate = *h as f64 / n as f64;
        assert!((rate - p).abs() <= 0.02, "rate {rate} vs {p}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn deformation_is_lipschitz(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = DeformParams { max_displacement: 12.0, max_rotation: 0.2, ..DeformParams::default() };
        let f = make_deformation_field((96, 96), &params, &mut rng).unwrap();
        // largest rigid displacement magnitude over the grid
        let rigid = DeformationField::new((96, 96), f.center, 0.0, 1e-9, f.rotation, f.translation).unwrap();
        let max_rigid = rigid.dx.iter().zip(rigid.dy.iter()).fold(0.0f64, |m, (a, b)| m.max(a.hypot(*b)));
        let bound = max_rigid * PI / (f.outer_radius - f.inner_radius) + 1e-6;
        let (h, w) = f.dx.dim();
        for r in 0..h {
            for c in 0..w {
                for (rr, cc) in [(r + 1, c), (r, c + 1)] {
                    if rr < h && cc < w {
                        let d = (f.dx[[r, c]] - f.dx[[rr, cc]]).hypot(f.dy[[r, c]] - f.dy[[rr, cc]]);
                        prop_assert!(d <= bound, "step {d} exceeds {bound}");
                    }
                }
            }
        }
    }

    #[test]
    fn pipeline_keeps_range_shape_and_is_seeded(seed in any::<u64>()) {
        let spec = SynthSpec { width: 64, height: 64, minutia_count: 3, ..SynthSpec::default() };
        let (img, mins) = generate_synthetic_fingerprint(seed % 1000, &spec).unwrap();
        let cfg = AugmentConfig { p_noise: 1.0, p_contrast: 1.0, p_deform: 1.0, p_morph: 1.0, ..AugmentConfig::default() };
        let run = |s| augment_pipeline(img.pixels(), &mins, &cfg, &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
        let (a, ma, _) = run(seed);
        let (b, mb, _) = run(seed);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(ma, mb);
        prop_assert_eq!(a.dim(), (64, 64));
        prop_assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

/// Phase singularities (±2π winding around a 2×2 plaquette) of the ridge
/// field given its in-phase and quadrature rasters.
fn phase_singularities(cos_img: &Array2<f64>, sin_img: &Array2<f64>) -> Vec<(f64, f64)> {
    let phase = Array2::from_shape_fn(cos_img.dim(), |(r, c)| {
        (sin_img[[r, c]] - 0.5).atan2(cos_img[[r, c]] - 0.5)
    });
    let (h, w) = phase.dim();
    let mut out = Vec::new();
    for r in 0..h - 1 {
        for c in 0..w - 1 {
            let loop_ = [phase[[r, c]], phase[[r, c + 1]], phase[[r + 1, c + 1]], phase[[r + 1, c]], phase[[r, c]]];
            let winding: f64 = loop_.windows(2).map(|p| wrapped_angle_diff(p[1], p[0])).sum();
            if winding.abs() > PI {
                out.push((c as f64 + 0.5, r as f64 + 0.5));
            }
        }
    }
    out
}

#[test]
fn planted_minutiae_are_redetected_after_deformation() {
    let spec = SynthSpec {
        minutia_count: 12,
        core_probability: 0.0,
        noise_sigma: 0.0,
        contrast_jitter: 0.0,
        ..SynthSpec::default()
    };
    for seed in 0..3u64 {
        let (img, mins) = generate_synthetic_fingerprint(seed, &spec).unwrap();
        let quad = synthetic_quadrature(seed, &spec).unwrap();
        let field = DeformationField::new((256, 256), (127.5, 127.5), 40.0, 110.0, 0.08, (6.0, -4.0)).unwrap();
        let (warped_c, moved) = apply_deformation(img.pixels(), &mins, &field).unwrap();
        let (warped_s, _) = apply_deformation(&quad, &MinutiaSet::default(), &field).unwrap();
        let found = phase_singularities(&warped_c, &warped_s);
        assert!(!moved.is_empty());
        for m in &moved.items {
            if m.x < 4.0 || m.y < 4.0 || m.x > 251.0 || m.y > 251.0 {
                continue;
            }
            let nearest = found.iter().map(|&(x, y)| (x - m.x).hypot(y - m.y)).fold(f64::INFINITY, f64::min);
            assert!(nearest <= 2.0, "seed {seed}: minutia at ({:.1}, {:.1}) nearest singularity {nearest:.2}", m.x, m.y);
        }
    }
}
