mod common;

use common::{checkerboard, laplacian_energy, naive_resize, naive_resize_f32};
use objblur_core::image::Image;
use objblur_core::resample::{blur, resize_bilinear, resize_bilinear_f32, strength_to_resolution, BlurStrength};
use objblur_core::synth::natural_image;
use proptest::prelude::*;

fn arb_image() -> impl Strategy<Value = Image> {
    (1u32..=24, 1u32..=24, prop::sample::select(vec![1u8, 3])).prop_flat_map(|(w, h, c)| {
        prop::collection::vec(any::<u8>(), (w * h * c as u32) as usize)
            .prop_map(move |data| Image::from_raw(w, h, c, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn separable_resize_matches_direct_formula(img in arb_image(), ow in 1u32..=40, oh in 1u32..=40) {
        let f = img.to_float();
        let fast = resize_bilinear_f32(&f, ow, oh).unwrap();
        let slow = naive_resize_f32(&f, ow, oh);
        prop_assert_eq!(
            fast.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            slow.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        prop_assert_eq!(resize_bilinear(&img, ow, oh).unwrap(), naive_resize(&img, ow, oh));
    }

    #[test]
    fn float_samples_stay_in_unit_range(img in arb_image(), ow in 1u32..=40, oh in 1u32..=40) {
        let out = resize_bilinear_f32(&img.to_float(), ow, oh).unwrap();
        prop_assert!(out.data.iter().all(|&v| (-1e-6..=1.0 + 1e-6).contains(&v)));
    }
}

#[test]
fn checkerboard_loses_high_frequencies() {
    let img = checkerboard(128, 1);
    let blurred = blur(&img, BlurStrength::MAX, (4, 4)).unwrap();
    assert!(laplacian_energy(&blurred) < laplacian_energy(&img));
}

// Without a prefilter, shrinking by more than 8x point-samples the texture
// and the mean drifts by several levels; the bound is checked up to 8x.
#[test]
fn blur_is_near_mean_preserving() {
    for seed in 0..10 {
        let img = natural_image(128, 128, seed);
        for i in 1..=10 {
            let s = BlurStrength::new(i as f64 / 10.0).unwrap();
            let (w, _) = strength_to_resolution(s, (128, 128), (8, 8)).unwrap();
            if w * 8 < 128 {
                continue;
            }
            let out = blur(&img, s, (8, 8)).unwrap();
            let diff = (out.mean() - img.mean()).abs();
            assert!(diff <= 1.5, "seed {seed} s {s:?}: mean moved by {diff}");
        }
    }
}

#[test]
fn blur_is_deterministic_across_threads() {
    let img = natural_image(96, 80, 3);
    let s = BlurStrength::new(0.6).unwrap();
    let reference = blur(&img, s, (4, 4)).unwrap();
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let img = img.clone();
            std::thread::spawn(move || blur(&img, s, (4, 4)).unwrap())
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), reference);
    }
}
