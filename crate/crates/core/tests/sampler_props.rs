use eocsa_core::sampler::{background_fraction, patch_budget, sample_patches, ImageRef, SamplerConfig};
use image::{Rgb, RgbImage};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn patches_fit_and_are_mostly_tissue(
        w in 40u32..120,
        h in 40u32..120,
        tissue_w in 10u32..120,
        seed in any::<u64>(),
    ) {
        let img = RgbImage::from_fn(w, h, |x, _| if x < tissue_w { Rgb([120, 60, 140]) } else { Rgb([250, 250, 250]) });
        let cfg = SamplerConfig { side: 16, ratio: 0.5, ..SamplerConfig::default() };
        let src = ImageRef { patient_id: "P", image_path: "i.png", patch_prefix: "P_0" };
        let out = sample_patches(&img, &cfg, seed, src).unwrap();
        prop_assert_eq!(out.budget, patch_budget(h, w, &cfg).unwrap());
        prop_assert_eq!(out.patches.len() + out.shortfall, out.budget);
        for p in &out.patches {
            prop_assert!(p.x + p.side <= w && p.y + p.side <= h);
            prop_assert!(background_fraction(&img, p.x, p.y, p.side, cfg.bg_gray_threshold) <= cfg.bg_area_threshold);
        }
        let again = sample_patches(&img, &cfg, seed, src).unwrap();
        prop_assert_eq!(again, out);
    }
}
