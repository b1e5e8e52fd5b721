use anatpaste_core::augment::*;
use anatpaste_core::imgcore::{BinaryMask, GrayImage};
use anatpaste_core::phantom::{generate, PhantomClass, PhantomConfig};
use anatpaste_core::RngHandle;
use proptest::prelude::*;

fn small_phantom(index: usize) -> (GrayImage, BinaryMask) {
    let cfg = PhantomConfig {
        width: 96,
        height: 96,
        ..PhantomConfig::default()
    };
    let s = generate(&cfg, index, PhantomClass::Normal).unwrap();
    (s.image, s.gt_lung)
}

fn images(w: usize, h: usize) -> impl Strategy<Value = (GrayImage, GrayImage, GrayImage)> {
    let one =
        move || prop::collection::vec(0.0f64..=1.0, w * h).prop_map(move |v| GrayImage::from_vec(w, h, v).unwrap());
    (one(), one(), one())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compose_follows_blend_formula((n, p, m) in images(9, 7)) {
        let out = compose(&n, &p, &m).unwrap();
        for i in 0..out.data().len() {
            let want = n.data()[i] * (1.0 - m.data()[i]) + p.data()[i] * m.data()[i];
            prop_assert!((out.data()[i] - want).abs() <= 1e-12);
        }
        let zero = GrayImage::new(9, 7).unwrap();
        let one = GrayImage::filled(9, 7, 1.0).unwrap();
        prop_assert_eq!(compose(&n, &p, &zero).unwrap(), n.clone());
        prop_assert_eq!(compose(&n, &p, &one).unwrap(), p);
    }

    #[test]
    fn anat_paste_stays_in_lungs(index in 0usize..40, seed in any::<u64>()) {
        let (img, lung) = small_phantom(index);
        let cfg = AnatPasteConfig::default();
        let out = anat_paste(&img, &lung, &cfg, &mut RngHandle::new(seed)).unwrap();
        for i in 0..img.data().len() {
            let m = out.soft_mask.data()[i];
            if m > 0.0 {
                prop_assert!(lung.data()[i]);
            } else {
                prop_assert_eq!(out.anomaly_image.data()[i], img.data()[i]);
            }
            prop_assert!(m <= out.fill_value + 1e-12);
        }
        prop_assert!((0.59..=1.0).contains(&out.fill_value));
        prop_assert!((0.0..=15.0).contains(&out.blur_radius));
        prop_assert_eq!(out.patch_src_rect.width, out.patch_dst_rect.width);
        prop_assert_eq!(out.patch_src_rect.height, out.patch_dst_rect.height);
    }

    #[test]
    fn anat_paste_is_deterministic(index in 0usize..10, seed in any::<u64>()) {
        let (img, lung) = small_phantom(index);
        let cfg = AnatPasteConfig::default();
        let a = anat_paste(&img, &lung, &cfg, &mut RngHandle::new(seed)).unwrap();
        let b = anat_paste(&img, &lung, &cfg, &mut RngHandle::new(seed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn no_blur_masks_are_two_valued(index in 0usize..20, seed in any::<u64>()) {
        let (img, lung) = small_phantom(index);
        let out = anat_paste_ablated(&img, &lung, &AnatPasteConfig::default(), &mut RngHandle::new(seed), Ablation::NoBlur).unwrap();
        prop_assert_eq!(out.blur_radius, 0.0);
        prop_assert!(out.soft_mask.data().iter().all(|&v| v == 0.0 || v == out.fill_value));
    }

    #[test]
    fn scar_masks_are_binary(index in 0usize..20, seed in any::<u64>()) {
        let (img, _) = small_phantom(index);
        let out = cut_paste_scar(&img, &ScarConfig::default(), &mut RngHandle::new(seed)).unwrap();
        prop_assert!(out.soft_mask.data().iter().all(|&v| v == 0.0 || v == 1.0));
        prop_assert!(out.soft_mask.data().contains(&1.0));
        for i in 0..img.data().len() {
            if out.soft_mask.data()[i] == 0.0 {
                prop_assert_eq!(out.anomaly_image.data()[i], img.data()[i]);
            }
        }
    }
}

#[test]
fn without_segmentation_masks_leave_the_lung() {
    // A lung of a few pixels: almost every unconstrained paste lands outside it.
    let img = GrayImage::from_fn(64, 64, |x, y| ((x + y) % 7) as f64 / 7.0).unwrap();
    let lung = BinaryMask::from_fn(64, 64, |x, y| (30..34).contains(&x) && (30..34).contains(&y));
    let cfg = AnatPasteConfig::default();
    let outside = (0..20u64).any(|seed| {
        let out = anat_paste_ablated(&img, &lung, &cfg, &mut RngHandle::new(seed), Ablation::NoSegmentation).unwrap();
        out.soft_mask
            .data()
            .iter()
            .zip(lung.data())
            .any(|(&m, &l)| m > 0.0 && !l)
    });
    assert!(outside);
}

#[test]
fn empty_lung_is_rejected() {
    let img = GrayImage::filled(32, 32, 0.5).unwrap();
    let lung = BinaryMask::new(32, 32);
    let err = anat_paste(&img, &lung, &AnatPasteConfig::default(), &mut RngHandle::new(1)).unwrap_err();
    assert_eq!(err, anatpaste_core::Error::NoLungRegion);
}
