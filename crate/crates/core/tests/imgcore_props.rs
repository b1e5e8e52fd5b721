use anatpaste_core::imgcore::*;
use proptest::prelude::*;
use std::collections::VecDeque;

fn image_strategy(max: usize) -> impl Strategy<Value = GrayImage> {
    (1..=max, 1..=max, 1u32..=256).prop_flat_map(|(w, h, levels)| {
        prop::collection::vec(0..levels, w * h).prop_map(move |v| {
            let data = v.into_iter().map(|k| k as f64 / (levels.max(2) - 1) as f64).collect();
            GrayImage::from_vec(w, h, data).unwrap()
        })
    })
}

fn mask_strategy(max: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max, 1..=max, 0.05f64..0.95).prop_flat_map(|(w, h, p)| {
        prop::collection::vec(prop::bool::weighted(p), w * h).prop_map(move |v| BinaryMask::from_vec(w, h, v).unwrap())
    })
}

/// Threshold maximizing `(n1·s0 − n0·s1)² / (n0·n1)` with class sums counted
/// directly from the pixels for every candidate.
fn otsu_oracle(img: &GrayImage) -> Option<u8> {
    let bins: Vec<u64> = img.data().iter().map(|&v| intensity_bin(v) as u64).collect();
    let mut best: Option<(usize, u128, u128)> = None;
    for t in 0..256u64 {
        let (mut n0, mut s0, mut n1, mut s1) = (0u128, 0u128, 0u128, 0u128);
        for &b in &bins {
            if b <= t {
                n0 += 1;
                s0 += b as u128;
            } else {
                n1 += 1;
                s1 += b as u128;
            }
        }
        let (num, den) = if n0 == 0 || n1 == 0 {
            (0, 1)
        } else {
            let d = (n1 * s0).abs_diff(n0 * s1);
            (d * d, n0 * n1)
        };
        let better = match best {
            None => true,
            Some((_, bn, bd)) => num * bd > bn * den,
        };
        if better {
            best = Some((t as usize, num, den));
        }
    }
    best.filter(|b| b.1 > 0).map(|b| b.0 as u8)
}

fn neighbors(c: Connectivity) -> Vec<(isize, isize)> {
    let mut out = vec![(1, 0), (-1, 0), (0, 1), (0, -1)];
    if c == Connectivity::Eight {
        out.extend([(1, 1), (1, -1), (-1, 1), (-1, -1)]);
    }
    out
}

/// Breadth-first flood fill labels (0 background).
fn flood_labels(m: &BinaryMask, c: Connectivity) -> Vec<usize> {
    let (w, h) = m.dims();
    let mut labels = vec![0; w * h];
    let mut next = 0;
    for start in 0..w * h {
        if !m.data()[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            let (x, y) = ((p % w) as isize, (p / w) as isize);
            for (dx, dy) in neighbors(c) {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if m.data()[q] && labels[q] == 0 {
                    labels[q] = next;
                    queue.push_back(q);
                }
            }
        }
    }
    labels
}

fn same_partition(a: &[usize], b: &[u32]) -> bool {
    use std::collections::HashMap;
    let (mut ab, mut ba) = (HashMap::new(), HashMap::new());
    a.iter()
        .zip(b)
        .all(|(&x, &y)| (x == 0) == (y == 0) && *ab.entry(x).or_insert(y) == y && *ba.entry(y).or_insert(x) == x)
}

fn brute_dilate(m: &BinaryMask, se: StructuringElement) -> BinaryMask {
    let (w, h) = m.dims();
    let offs = se.offsets();
    BinaryMask::from_fn(w, h, |x, y| {
        offs.iter().any(|&(dx, dy)| {
            let (sx, sy) = (x as isize + dx, y as isize + dy);
            sx >= 0 && sy >= 0 && sx < w as isize && sy < h as isize && m.get(sx as usize, sy as usize)
        })
    })
}

fn brute_erode(m: &BinaryMask, se: StructuringElement) -> BinaryMask {
    let (w, h) = m.dims();
    let offs = se.offsets();
    BinaryMask::from_fn(w, h, |x, y| {
        offs.iter().all(|&(dx, dy)| {
            let (sx, sy) = (x as isize + dx, y as isize + dy);
            sx >= 0 && sy >= 0 && sx < w as isize && sy < h as isize && m.get(sx as usize, sy as usize)
        })
    })
}

fn element() -> impl Strategy<Value = StructuringElement> {
    (0usize..4, any::<bool>()).prop_map(|(r, disk)| {
        if disk {
            StructuringElement::disk(r)
        } else {
            StructuringElement::square(r)
        }
    })
}

fn reflect(i: isize, n: usize) -> usize {
    let mut i = i;
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Direct 2-D convolution with the outer product of the kernel.
fn blur_oracle(img: &GrayImage, radius: f64) -> Vec<f64> {
    let half = radius.ceil() as isize;
    let sigma = radius / 3.0;
    let raw: Vec<f64> = (-half..=half)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    let k: Vec<f64> = raw.iter().map(|v| v / s).collect();
    let (w, h) = img.dims();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, ky) in k.iter().enumerate() {
                for (i, kx) in k.iter().enumerate() {
                    let sx = reflect(x as isize + i as isize - half, w);
                    let sy = reflect(y as isize + j as isize - half, h);
                    acc += ky * kx * img.get(sx, sy);
                }
            }
            out.push(acc);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn otsu_matches_exhaustive_search(img in image_strategy(24)) {
        match (otsu_threshold(&img), otsu_oracle(&img)) {
            (Ok(t), Some(o)) => prop_assert_eq!(t, o),
            (Err(anatpaste_core::Error::Degenerate(_)), None) => {}
            (got, want) => prop_assert!(false, "otsu {:?} oracle {:?}", got, want),
        }
    }

    #[test]
    fn binarize_splits_on_threshold(img in image_strategy(16), t in any::<u8>()) {
        let below = binarize(&img, t, Polarity::Below);
        let above = binarize(&img, t, Polarity::Above);
        for (i, &v) in img.data().iter().enumerate() {
            prop_assert_eq!(below.data()[i], intensity_bin(v) <= t as usize);
            prop_assert_eq!(above.data()[i], !below.data()[i]);
        }
    }

    #[test]
    fn components_match_flood_fill(m in mask_strategy(20), eight in any::<bool>()) {
        let c = if eight { Connectivity::Eight } else { Connectivity::Four };
        let labels = connected_components(&m, c);
        let oracle = flood_labels(&m, c);
        prop_assert!(same_partition(&oracle, labels.labels()));
        prop_assert_eq!(labels.num_components(), oracle.iter().copied().max().unwrap_or(0));
        let total: usize = labels.component_sizes().iter().sum();
        prop_assert_eq!(total, m.count());
    }

    #[test]
    fn clear_border_removes_exactly_border_components(m in mask_strategy(20), eight in any::<bool>()) {
        let c = if eight { Connectivity::Eight } else { Connectivity::Four };
        let (w, h) = m.dims();
        let oracle = flood_labels(&m, c);
        let mut touching = std::collections::HashSet::new();
        for y in 0..h {
            for x in 0..w {
                if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                    touching.insert(oracle[y * w + x]);
                }
            }
        }
        let cleared = clear_border(&m, c);
        for (i, &l) in oracle.iter().enumerate() {
            prop_assert_eq!(cleared.data()[i], l != 0 && !touching.contains(&l));
        }
    }

    #[test]
    fn morphology_matches_minkowski_definitions(m in mask_strategy(16), se in element()) {
        prop_assert_eq!(dilate(&m, se), brute_dilate(&m, se));
        prop_assert_eq!(erode(&m, se), brute_erode(&m, se));
    }

    #[test]
    fn morphology_laws(m in mask_strategy(20), se in element()) {
        let o = open(&m, se);
        prop_assert!(o.is_subset_of(&m));
        prop_assert_eq!(open(&o, se), o.clone());
        prop_assert!(m.is_subset_of(&dilate(&m, se)));
        prop_assert!(erode(&m, se).is_subset_of(&m));
    }

    #[test]
    fn blur_matches_direct_convolution(img in image_strategy(12), radius in 0.2f64..6.0) {
        let got = gaussian_blur(&img, radius).unwrap();
        let want = blur_oracle(&img, radius);
        for (a, b) in got.data().iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
        }
    }

    #[test]
    fn kernel_is_normalized_and_symmetric(radius in 0.0f64..20.0) {
        let k = gaussian_kernel(radius).unwrap();
        prop_assert_eq!(k.len(), 2 * radius.ceil() as usize + 1);
        prop_assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..k.len() {
            prop_assert_eq!(k[i], k[k.len() - 1 - i]);
        }
    }

    #[test]
    fn clahe_output_in_range(img in image_strategy(40), tiles in 1usize..5, clip in 1.0f64..4.0) {
        let p = ClaheParams { tiles_x: tiles, tiles_y: tiles, clip_limit: clip };
        let out = clahe(&img, p).unwrap();
        prop_assert_eq!(out.dims(), img.dims());
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn single_tile_clahe_is_monotone(img in image_strategy(32), clip in 1.0f64..4.0) {
        let p = ClaheParams { tiles_x: 1, tiles_y: 1, clip_limit: clip };
        let out = clahe(&img, p).unwrap();
        let mut pairs: Vec<(usize, f64)> = img.data().iter().map(|&v| intensity_bin(v)).zip(out.data().iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                prop_assert_eq!(w[0].1, w[1].1);
            } else {
                prop_assert!(w[0].1 <= w[1].1);
            }
        }
    }
}

#[test]
fn constant_image_survives_clahe_and_blur() {
    let img = GrayImage::filled(33, 17, 0.37).unwrap();
    assert_eq!(clahe(&img, ClaheParams::default()).unwrap(), img);
    let b = gaussian_blur(&img, 4.5).unwrap();
    assert!(b.data().iter().all(|v| (v - 0.37).abs() < 1e-12));
}
