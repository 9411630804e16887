use fpembed_core::preprocess::{spectral_energy, to_spectrum, zero_mean, SpectrumOptions};
use fpembed_core::synth::generate_synthetic_fingerprint;
use fpembed_core::SynthSpec;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_zero_mean(seed: u64, n: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    zero_mean(&Array2::from_shape_fn((n, n), |_| rng.random::<f64>()))
}

#[test]
fn band_holds_nearly_all_energy_of_synthetic_ridges() {
    let opts = SpectrumOptions::default();
    for (seed, f) in [(1u64, 0.06), (2, 0.1), (3, 0.14), (4, 0.2)] {
        let spec = SynthSpec { frequency_range: (f, f), ..SynthSpec::default() };
        let (img, _) = generate_synthetic_fingerprint(seed, &spec).unwrap();
        let x = zero_mean(img.pixels());
        let patch = to_spectrum(&x, &opts).unwrap();
        let total = spectral_energy(&x);
        let ratio = patch.energy() / total;
        assert!(ratio <= 1.0 + 1e-9);
        assert!(ratio >= 0.95, "band energy ratio {ratio} at f={f}");
    }
}

#[test]
fn dc_bin_vanishes_for_zero_mean_input() {
    let x = random_zero_mean(5, 64);
    let p = to_spectrum(&x, &SpectrumOptions::default()).unwrap();
    let (r, c) = p.dc_index();
    assert!(p.real[[r, c]].hypot(p.imag[[r, c]]) < 1e-4 * 64.0 * 64.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn spectrum_is_linear(sa in any::<u64>(), sb in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let x = random_zero_mean(sa, 32);
        let y = random_zero_mean(sb, 32);
        let opts = SpectrumOptions::default();
        let combo = to_spectrum(&(&x * a + &y * b), &opts).unwrap();
        let px = to_spectrum(&x, &opts).unwrap();
        let py = to_spectrum(&y, &opts).unwrap();
        let expect_re = &px.real * a + &py.real * b;
        let expect_im = &px.imag * a + &py.imag * b;
        let scale = expect_re.iter().chain(expect_im.iter()).fold(1e-12f64, |m, v| m.max(v.abs()));
        for (u, v) in combo.real.iter().zip(expect_re.iter()).chain(combo.imag.iter().zip(expect_im.iter())) {
            prop_assert!((u - v).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn real_input_spectrum_is_conjugate_symmetric(seed in any::<u64>()) {
        let x = random_zero_mean(seed, 32);
        let p = to_spectrum(&x, &SpectrumOptions::default()).unwrap();
        let (h, w) = p.shape();
        let (r0, c0) = p.dc_index();
        let scale = p.real.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for r in 0..h {
            for c in 0..w {
                // the mirror of (u, v) is (-u, -v); the most negative row/col has no partner in the crop
                let (mr, mc) = (2 * r0 as isize - r as isize, 2 * c0 as isize - c as isize);
                if mr < 0 || mc < 0 || mr >= h as isize || mc >= w as isize {
                    continue;
                }
                let (mr, mc) = (mr as usize, mc as usize);
                prop_assert!((p.real[[r, c]] - p.real[[mr, mc]]).abs() <= 1e-6 * scale);
                prop_assert!((p.imag[[r, c]] + p.imag[[mr, mc]]).abs() <= 1e-6 * scale);
            }
        }
    }
}
