//! Anatomy-constrained paste augmentation and the CutPaste-Scar baseline.
//!
//! An AnatPaste call crops a rectangle from the normal image, translates it to a
//! random destination (`x_patch`, zero elsewhere), draws an ellipse or rectangle
//! inside the destination rectangle, blurs it into a soft blob of height `fill`,
//! multiplies that blob by the lung mask (`x_mask`) and blends
//! `x_normal·(1 − x_mask) + x_patch·x_mask`.
//!
//! All randomness comes from the supplied [`RngHandle`]; the draw order is fixed,
//! so equal seeds reproduce bit-identical outcomes.

use crate::error::{Error, Result};
use crate::imgcore::{blur_window, gaussian_blur, rasterize_shape, BinaryMask, GrayImage, Rect, Shape, ShapeKind};
use crate::rng::RngHandle;
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct AnatPasteConfig {
    /// Crop area as a fraction of `W × H`, sampled uniformly.
    pub patch_area_ratio: (f64, f64),
    /// Crop width/height ratio, sampled log-uniformly.
    pub patch_aspect: (f64, f64),
    /// Peak value of the blurred shape.
    pub fill_range: (f64, f64),
    pub blur_radius_range: (f64, f64),
    /// Shape half-axes as a fraction of the largest half-axes that fit strictly
    /// inside the pasted rectangle.
    pub shape_scale: (f64, f64),
    pub shape_kinds: Vec<ShapeKind>,
    pub max_placement_attempts: usize,
    pub max_crop_attempts: usize,
}

impl Default for AnatPasteConfig {
    fn default() -> Self {
        Self {
            patch_area_ratio: (0.02, 0.15),
            patch_aspect: (0.3, 3.3),
            fill_range: (0.59, 1.0),
            blur_radius_range: (0.0, 15.0),
            shape_scale: (0.5, 1.0),
            shape_kinds: vec![ShapeKind::Ellipse, ShapeKind::Rectangle],
            max_placement_attempts: 100,
            max_crop_attempts: 10,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), min: f64, max: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && min <= lo && lo <= hi && hi <= max) {
        return Err(Error::InvalidArgument(format!(
            "{name} range ({lo}, {hi}) must be ordered within [{min}, {max}]"
        )));
    }
    Ok(())
}

impl AnatPasteConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("patch_area_ratio", self.patch_area_ratio, f64::MIN_POSITIVE, 1.0)?;
        check_range("patch_aspect", self.patch_aspect, f64::MIN_POSITIVE, f64::MAX)?;
        check_range("fill_range", self.fill_range, 0.0, 1.0)?;
        check_range("blur_radius_range", self.blur_radius_range, 0.0, f64::MAX)?;
        check_range("shape_scale", self.shape_scale, 0.0, 1.0)?;
        if self.shape_kinds.is_empty() {
            return Err(Error::InvalidArgument("shape_kinds is empty".into()));
        }
        if self.max_placement_attempts == 0 || self.max_crop_attempts == 0 {
            return Err(Error::InvalidArgument("attempt limits must be positive".into()));
        }
        Ok(())
    }
}

/// Table-III style component removal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Ablation {
    #[default]
    None,
    /// Skip the lung constraint and multiplication: `x_mask = x_blur`.
    NoSegmentation,
    /// Force blur radius 0 (hard-edged shapes).
    NoBlur,
}

/// Augmented image together with everything needed to reproduce it.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentOutcome {
    pub anomaly_image: GrayImage,
    pub soft_mask: GrayImage,
    pub patch_src_rect: Rect,
    pub patch_dst_rect: Rect,
    pub shape: Shape,
    /// Patch rotation in degrees (CutPaste-Scar only; 0 otherwise).
    pub rotation_deg: f64,
    pub fill_value: f64,
    pub blur_radius: f64,
}

fn uniform(rng: &mut RngHandle, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Full-frame image holding the pixels of `src` translated to `dst_pos`, zero elsewhere.
pub fn crop_to_frame_patch(img: &GrayImage, src: Rect, dst_pos: (usize, usize)) -> Result<GrayImage> {
    let (w, h) = img.dims();
    let dst = Rect::new(dst_pos.0, dst_pos.1, src.width, src.height);
    if !src.fits_in(w, h) || !dst.fits_in(w, h) {
        return Err(Error::InvalidPlacement(format!(
            "patch {src:?} -> {dst:?} leaves the {w}x{h} frame"
        )));
    }
    let mut out = GrayImage::new(w, h)?;
    for dy in 0..src.height {
        let s = (src.y + dy) * w + src.x;
        let d = (dst.y + dy) * w + dst.x;
        out.data_mut()[d..d + src.width].copy_from_slice(&img.data()[s..s + src.width]);
    }
    Ok(out)
}

/// `shape` rasterized at `fill` and blurred with `blur_radius`.
pub fn make_blur_shape(shape: &Shape, fill: f64, blur_radius: f64, dims: (usize, usize)) -> Result<GrayImage> {
    let hard = rasterize_shape(shape, fill, dims)?;
    gaussian_blur(&hard, blur_radius)
}

/// `x_normal·(1 − x_mask) + x_patch·x_mask`, clamped to `[0, 1]`.
pub fn compose(x_normal: &GrayImage, x_patch: &GrayImage, x_mask: &GrayImage) -> Result<GrayImage> {
    if x_normal.dims() != x_patch.dims() || x_normal.dims() != x_mask.dims() {
        return Err(Error::InvalidDimensions(format!(
            "compose operands differ: {:?}, {:?}, {:?}",
            x_normal.dims(),
            x_patch.dims(),
            x_mask.dims()
        )));
    }
    let data = x_normal
        .data()
        .iter()
        .zip(x_patch.data())
        .zip(x_mask.data())
        .map(|((&n, &p), &m)| blend(n, p, m))
        .collect();
    Ok(GrayImage::from_raw(x_normal.width(), x_normal.height(), data))
}

#[inline]
fn blend(normal: f64, patch: f64, mask: f64) -> f64 {
    (normal * (1.0 - mask) + patch * mask).clamp(0.0, 1.0)
}

pub fn anat_paste(
    img: &GrayImage,
    lung: &BinaryMask,
    cfg: &AnatPasteConfig,
    rng: &mut RngHandle,
) -> Result<AugmentOutcome> {
    anat_paste_ablated(img, lung, cfg, rng, Ablation::None)
}

struct Placement {
    src: Rect,
    dst: Rect,
    shape: Shape,
}

fn sample_placement(
    img: &GrayImage,
    lung: Option<&BinaryMask>,
    cfg: &AnatPasteConfig,
    rng: &mut RngHandle,
) -> Result<Placement> {
    let (w, h) = img.dims();
    let frame = (w * h) as f64;
    let (log_lo, log_hi) = (cfg.patch_aspect.0.ln(), cfg.patch_aspect.1.ln());
    let mut attempts = 0;
    for _ in 0..cfg.max_crop_attempts {
        let area = uniform(rng, cfg.patch_area_ratio) * frame;
        let aspect = uniform(rng, (log_lo, log_hi)).exp();
        let pw = ((area * aspect).sqrt().round() as usize).min(w);
        let ph = ((area / aspect).sqrt().round() as usize).min(h);
        // The shape needs a one-pixel margin and half-axes of at least 1.
        if pw < 5 || ph < 5 {
            attempts += 1;
            continue;
        }
        let src = Rect::new(rng.gen_range(0..=w - pw), rng.gen_range(0..=h - ph), pw, ph);
        let max_a = (pw - 3) / 2;
        let max_b = (ph - 3) / 2;
        for _ in 0..cfg.max_placement_attempts {
            attempts += 1;
            let dst = Rect::new(rng.gen_range(0..=w - pw), rng.gen_range(0..=h - ph), pw, ph);
            let kind = cfg.shape_kinds[rng.gen_range(0..cfg.shape_kinds.len())];
            let a = ((uniform(rng, cfg.shape_scale) * max_a as f64).round() as usize).clamp(1, max_a);
            let b = ((uniform(rng, cfg.shape_scale) * max_b as f64).round() as usize).clamp(1, max_b);
            let cx = rng.gen_range(dst.x + 1 + a..=dst.right() - 2 - a);
            let cy = rng.gen_range(dst.y + 1 + b..=dst.bottom() - 2 - b);
            let shape = Shape {
                kind,
                center: (cx as f64, cy as f64),
                half_axes: (a as f64, b as f64),
            };
            let hits_lung = match lung {
                None => true,
                Some(lung) => {
                    let r = shape.pixel_rect(w, h).expect("shape inside patch");
                    (r.y..r.bottom()).any(|y| (r.x..r.right()).any(|x| lung.get(x, y) && shape.contains(x, y)))
                }
            };
            if hits_lung {
                return Ok(Placement { src, dst, shape });
            }
        }
    }
    Err(Error::NoValidPlacement { attempts })
}

pub fn anat_paste_ablated(
    img: &GrayImage,
    lung: &BinaryMask,
    cfg: &AnatPasteConfig,
    rng: &mut RngHandle,
    ablation: Ablation,
) -> Result<AugmentOutcome> {
    cfg.validate()?;
    let (w, h) = img.dims();
    if lung.dims() != img.dims() {
        return Err(Error::InvalidDimensions(format!(
            "lung mask {:?} does not match image {:?}",
            lung.dims(),
            img.dims()
        )));
    }
    let use_lung = ablation != Ablation::NoSegmentation;
    if use_lung && lung.is_empty() {
        return Err(Error::NoLungRegion);
    }

    let Placement { src, dst, shape } = sample_placement(img, use_lung.then_some(lung), cfg, rng)?;
    let fill_value = uniform(rng, cfg.fill_range);
    let sampled_radius = uniform(rng, cfg.blur_radius_range);
    let blur_radius = if ablation == Ablation::NoBlur {
        0.0
    } else {
        sampled_radius
    };

    let shape_rect = shape.pixel_rect(w, h).expect("shape inside patch");
    let mut window = Vec::with_capacity(shape_rect.area());
    for y in shape_rect.y..shape_rect.bottom() {
        window.extend((shape_rect.x..shape_rect.right()).map(|x| if shape.contains(x, y) { fill_value } else { 0.0 }));
    }
    // Outside `reach` the blurred shape, and so the mask, is exactly zero.
    let (reach, blurred) = blur_window(&window, shape_rect, (w, h), blur_radius)?;

    let mut soft_mask = GrayImage::new(w, h)?;
    let mut anomaly_image = img.clone();
    let (sx, sy) = (src.x as isize - dst.x as isize, src.y as isize - dst.y as isize);
    for (y, row) in (reach.y..reach.bottom()).zip(blurred.chunks(reach.width)) {
        for (x, &b) in (reach.x..reach.right()).zip(row) {
            let i = y * w + x;
            let m = if !use_lung || lung.data()[i] { b } else { 0.0 };
            if m == 0.0 {
                continue;
            }
            soft_mask.data_mut()[i] = m;
            let patch = if dst.contains_point(x, y) {
                img.get((x as isize + sx) as usize, (y as isize + sy) as usize)
            } else {
                0.0
            };
            anomaly_image.data_mut()[i] = blend(img.get(x, y), patch, m);
        }
    }

    Ok(AugmentOutcome {
        anomaly_image,
        soft_mask,
        patch_src_rect: src,
        patch_dst_rect: dst,
        shape,
        rotation_deg: 0.0,
        fill_value,
        blur_radius,
    })
}

/// CutPaste-Scar sampling ranges.
#[derive(Clone, Debug, PartialEq)]
pub struct ScarConfig {
    /// Scar width in pixels (inclusive integer range).
    pub width: (usize, usize),
    /// Scar length in pixels (inclusive integer range).
    pub length: (usize, usize),
    pub rotation_deg: (f64, f64),
    pub max_attempts: usize,
}

impl Default for ScarConfig {
    fn default() -> Self {
        Self {
            width: (2, 16),
            length: (10, 25),
            rotation_deg: (-45.0, 45.0),
            max_attempts: 100,
        }
    }
}

/// Cut a thin rectangle, rotate it (nearest neighbor) and hard-paste it elsewhere.
pub fn cut_paste_scar(img: &GrayImage, cfg: &ScarConfig, rng: &mut RngHandle) -> Result<AugmentOutcome> {
    let (w, h) = img.dims();
    if cfg.width.0 == 0 || cfg.width.0 > cfg.width.1 || cfg.length.0 == 0 || cfg.length.0 > cfg.length.1 {
        return Err(Error::InvalidArgument(
            "scar size ranges must be positive and ordered".into(),
        ));
    }
    check_range("rotation_deg", cfg.rotation_deg, -360.0, 360.0)?;
    for _ in 0..cfg.max_attempts {
        let sw = rng.gen_range(cfg.width.0..=cfg.width.1);
        let sl = rng.gen_range(cfg.length.0..=cfg.length.1);
        let theta_deg = uniform(rng, cfg.rotation_deg);
        if sw > w || sl > h {
            continue;
        }
        let theta = theta_deg.to_radians();
        let (sin, cos) = theta.sin_cos();
        let (cw, cl) = ((sw - 1) as f64 / 2.0, (sl - 1) as f64 / 2.0);
        let ex = cos.abs() * (cw + 0.5) + sin.abs() * (cl + 0.5);
        let ey = sin.abs() * (cw + 0.5) + cos.abs() * (cl + 0.5);
        let dx_lo = (ex - 0.5 - cw).ceil();
        let dx_hi = (w as f64 - 0.5 - ex - cw).floor();
        let dy_lo = (ey - 0.5 - cl).ceil();
        let dy_hi = (h as f64 - 0.5 - ey - cl).floor();
        if dx_lo > dx_hi || dy_lo > dy_hi {
            continue;
        }
        let src = Rect::new(rng.gen_range(0..=w - sw), rng.gen_range(0..=h - sl), sw, sl);
        let dx = rng.gen_range(dx_lo as i64..=dx_hi as i64) as f64;
        let dy = rng.gen_range(dy_lo as i64..=dy_hi as i64) as f64;
        let (dcx, dcy) = (dx + cw, dy + cl);

        let x0 = (dcx - ex).ceil().max(0.0) as usize;
        let x1 = ((dcx + ex).floor() as usize).min(w - 1);
        let y0 = (dcy - ey).ceil().max(0.0) as usize;
        let y1 = ((dcy + ey).floor() as usize).min(h - 1);

        let mut soft_mask = GrayImage::new(w, h)?;
        let mut anomaly_image = img.clone();
        for qy in y0..=y1 {
            for qx in x0..=x1 {
                let (ox, oy) = (qx as f64 - dcx, qy as f64 - dcy);
                // Inverse rotation into scar-local coordinates.
                let u = (cos * ox + sin * oy + cw).round();
                let v = (-sin * ox + cos * oy + cl).round();
                if u < 0.0 || v < 0.0 || u >= sw as f64 || v >= sl as f64 {
                    continue;
                }
                let value = img.get(src.x + u as usize, src.y + v as usize);
                anomaly_image.data_mut()[qy * w + qx] = value;
                soft_mask.data_mut()[qy * w + qx] = 1.0;
            }
        }
        return Ok(AugmentOutcome {
            anomaly_image,
            soft_mask,
            patch_src_rect: src,
            patch_dst_rect: Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
            shape: Shape {
                kind: ShapeKind::Rectangle,
                center: (dcx, dcy),
                half_axes: (sw as f64 / 2.0, sl as f64 / 2.0),
            },
            rotation_deg: theta_deg,
            fill_value: 1.0,
            blur_radius: 0.0,
        });
    }
    Err(Error::NoValidPlacement {
        attempts: cfg.max_attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::gaussian_kernel;

    fn gradient(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| ((x * 3 + y * 7) % 50) as f64 / 49.0).unwrap()
    }

    #[test]
    fn crop_in_place_keeps_window_only() {
        let img = gradient(20, 16);
        let src = Rect::new(3, 4, 6, 5);
        let out = crop_to_frame_patch(&img, src, (3, 4)).unwrap();
        for y in 0..16 {
            for x in 0..20 {
                let expect = if src.contains_point(x, y) { img.get(x, y) } else { 0.0 };
                assert_eq!(out.get(x, y), expect);
            }
        }
    }

    #[test]
    fn single_pixel_translation() {
        let img = GrayImage::filled(10, 10, 0.6).unwrap();
        let out = crop_to_frame_patch(&img, Rect::new(0, 0, 1, 1), (5, 5)).unwrap();
        assert_eq!(out.get(5, 5), 0.6);
        assert_eq!(out.data().iter().filter(|&&v| v != 0.0).count(), 1);
        assert!(matches!(
            crop_to_frame_patch(&img, Rect::new(0, 0, 3, 3), (8, 8)),
            Err(Error::InvalidPlacement(_))
        ));
    }

    #[test]
    fn compose_identities() {
        let n = gradient(12, 9);
        let p = GrayImage::from_fn(12, 9, |x, _| x as f64 / 11.0).unwrap();
        let zero = GrayImage::new(12, 9).unwrap();
        let one = GrayImage::filled(12, 9, 1.0).unwrap();
        let half = GrayImage::filled(12, 9, 0.5).unwrap();
        assert_eq!(compose(&n, &p, &zero).unwrap(), n);
        assert_eq!(compose(&n, &p, &one).unwrap(), p);
        let mean = compose(&n, &p, &half).unwrap();
        for i in 0..n.data().len() {
            assert!((mean.data()[i] - (n.data()[i] + p.data()[i]) / 2.0).abs() < 1e-15);
        }
        let small = GrayImage::new(3, 3).unwrap();
        assert!(matches!(compose(&n, &small, &zero), Err(Error::InvalidDimensions(_))));
    }

    #[test]
    fn blur_shape_limits() {
        let s = Shape {
            kind: ShapeKind::Ellipse,
            center: (30.0, 30.0),
            half_axes: (8.0, 5.0),
        };
        let hard = make_blur_shape(&s, 0.8, 0.0, (64, 64)).unwrap();
        assert!(hard.data().iter().all(|&v| v == 0.0 || v == 0.8));
        let soft = make_blur_shape(&s, 0.59, 12.0, (64, 64)).unwrap();
        assert!(soft.min_max().1 <= 0.59 + 1e-12);
    }

    #[test]
    fn impulse_shape_is_scaled_kernel() {
        // Smallest admissible shape: a 3x3 box. Its blur is fill times the outer
        // product of the kernel convolved with [1, 1, 1].
        let s = Shape {
            kind: ShapeKind::Rectangle,
            center: (20.0, 20.0),
            half_axes: (1.0, 1.0),
        };
        let out = make_blur_shape(&s, 0.7, 3.0, (41, 41)).unwrap();
        let k = gaussian_kernel(3.0).unwrap();
        let profile = |d: isize| -> f64 {
            (-1..=1)
                .map(|o: isize| {
                    let i = d - o + 3;
                    if (0..7).contains(&i) {
                        k[i as usize]
                    } else {
                        0.0
                    }
                })
                .sum()
        };
        for y in 14..27 {
            for x in 14..27 {
                let expect = 0.7 * profile(x as isize - 20) * profile(y as isize - 20);
                assert!((out.get(x, y) - expect).abs() < 1e-14);
            }
        }
    }

    fn disk_lung(w: usize, h: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| {
            let dx = x as f64 - w as f64 / 2.0;
            let dy = y as f64 - h as f64 / 2.0;
            dx * dx + dy * dy < (w as f64 / 4.0).powi(2)
        })
    }

    #[test]
    fn anat_paste_respects_lung_and_identity() {
        let img = gradient(96, 96);
        let lung = disk_lung(96, 96);
        let cfg = AnatPasteConfig::default();
        for seed in 0..50 {
            let mut rng = RngHandle::new(seed);
            let out = anat_paste(&img, &lung, &cfg, &mut rng).unwrap();
            for y in 0..96 {
                for x in 0..96 {
                    let m = out.soft_mask.get(x, y);
                    if m > 0.0 {
                        assert!(lung.get(x, y));
                    } else {
                        assert_eq!(out.anomaly_image.get(x, y), img.get(x, y));
                    }
                    assert!(m <= out.fill_value + 1e-12);
                }
            }
            let (x0, y0, x1, y1) = out.shape.bbox();
            let d = out.patch_dst_rect;
            assert!(x0 > d.x as f64 && y0 > d.y as f64);
            assert!(x1 < (d.right() - 1) as f64 && y1 < (d.bottom() - 1) as f64);
        }
    }

    #[test]
    fn anat_paste_equals_explicit_composition() {
        let img = gradient(80, 72);
        let lung = disk_lung(80, 72);
        let cfg = AnatPasteConfig::default();
        for seed in 0..20 {
            let out = anat_paste(&img, &lung, &cfg, &mut RngHandle::new(seed)).unwrap();
            let patch =
                crop_to_frame_patch(&img, out.patch_src_rect, (out.patch_dst_rect.x, out.patch_dst_rect.y)).unwrap();
            let blur = make_blur_shape(&out.shape, out.fill_value, out.blur_radius, (80, 72)).unwrap();
            let mask = GrayImage::from_fn(80, 72, |x, y| if lung.get(x, y) { blur.get(x, y) } else { 0.0 }).unwrap();
            assert_eq!(mask, out.soft_mask);
            assert_eq!(compose(&img, &patch, &mask).unwrap(), out.anomaly_image);
        }
    }

    #[test]
    fn same_seed_same_outcome() {
        let img = gradient(64, 64);
        let lung = disk_lung(64, 64);
        let cfg = AnatPasteConfig::default();
        let a = anat_paste(&img, &lung, &cfg, &mut RngHandle::new(11)).unwrap();
        let b = anat_paste(&img, &lung, &cfg, &mut RngHandle::new(11)).unwrap();
        assert_eq!(a, b);
        let c = anat_paste_ablated(&img, &lung, &cfg, &mut RngHandle::new(11), Ablation::None).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn empty_lung_rejected() {
        let img = gradient(32, 32);
        let lung = BinaryMask::new(32, 32);
        let r = anat_paste(&img, &lung, &AnatPasteConfig::default(), &mut RngHandle::new(0));
        assert_eq!(r.unwrap_err(), Error::NoLungRegion);
    }

    #[test]
    fn tiny_lung_far_away_exhausts_attempts() {
        let img = gradient(64, 64);
        let lung = BinaryMask::from_fn(64, 64, |x, y| x == 0 && y == 0);
        let cfg = AnatPasteConfig {
            max_placement_attempts: 3,
            max_crop_attempts: 2,
            ..AnatPasteConfig::default()
        };
        let r = anat_paste(&img, &lung, &cfg, &mut RngHandle::new(5));
        assert!(matches!(r, Err(Error::NoValidPlacement { .. })));
    }

    #[test]
    fn no_blur_gives_binary_levels() {
        let img = gradient(64, 64);
        let lung = disk_lung(64, 64);
        for seed in 0..20 {
            let out = anat_paste_ablated(
                &img,
                &lung,
                &AnatPasteConfig::default(),
                &mut RngHandle::new(seed),
                Ablation::NoBlur,
            )
            .unwrap();
            assert_eq!(out.blur_radius, 0.0);
            assert!(out.soft_mask.data().iter().all(|&v| v == 0.0 || v == out.fill_value));
        }
    }

    #[test]
    fn no_segmentation_leaks_outside_lung() {
        let img = gradient(64, 64);
        // Lung confined to the top-left corner; patches land everywhere.
        let lung = BinaryMask::from_fn(64, 64, |x, y| x < 8 && y < 8);
        let leaked = (0..20).any(|seed| {
            let out = anat_paste_ablated(
                &img,
                &lung,
                &AnatPasteConfig::default(),
                &mut RngHandle::new(seed),
                Ablation::NoSegmentation,
            )
            .unwrap();
            (0..64).any(|y| (0..64).any(|x| out.soft_mask.get(x, y) > 0.0 && !lung.get(x, y)))
        });
        assert!(leaked);
    }

    #[test]
    fn scar_without_rotation_is_translation() {
        let img = gradient(64, 64);
        let cfg = ScarConfig {
            rotation_deg: (0.0, 0.0),
            ..ScarConfig::default()
        };
        for seed in 0..30 {
            let out = cut_paste_scar(&img, &cfg, &mut RngHandle::new(seed)).unwrap();
            let s = out.patch_src_rect;
            let d = out.patch_dst_rect;
            assert_eq!((s.width, s.height), (d.width, d.height));
            for y in 0..s.height {
                for x in 0..s.width {
                    assert_eq!(out.anomaly_image.get(d.x + x, d.y + y), img.get(s.x + x, s.y + y));
                    assert_eq!(out.soft_mask.get(d.x + x, d.y + y), 1.0);
                }
            }
            assert_eq!(out.soft_mask.data().iter().filter(|&&v| v == 1.0).count(), s.area());
        }
    }

    #[test]
    fn scar_mask_is_binary_and_deterministic() {
        let img = gradient(64, 48);
        let cfg = ScarConfig::default();
        for seed in 0..30 {
            let a = cut_paste_scar(&img, &cfg, &mut RngHandle::new(seed)).unwrap();
            assert!(a.soft_mask.data().iter().all(|&v| v == 0.0 || v == 1.0));
            assert!((-45.0..=45.0).contains(&a.rotation_deg));
            let b = cut_paste_scar(&img, &cfg, &mut RngHandle::new(seed)).unwrap();
            assert_eq!(a, b);
        }
    }
}
