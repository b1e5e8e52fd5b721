//! Synthetic chest-radiograph phantoms with ground-truth lung and lesion masks.
//!
//! A phantom is a dark background, a bright body ellipse and two dark lung
//! ellipses, optionally overlaid with curved rib bands, softened slightly and
//! corrupted with Gaussian noise. Abnormal phantoms add bright Gaussian bumps
//! confined to the lungs. Geometry and noise are drawn from streams keyed by
//! `(seed, index)` only, so the normal and abnormal phantoms for the same index
//! differ exactly inside the lungs.

use crate::error::{Error, Result};
use crate::imgcore::{gaussian_blur, BinaryMask, GrayImage};
use crate::rng::RngHandle;
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PhantomClass {
    Normal,
    Abnormal,
}

impl PhantomClass {
    pub fn label(self) -> u8 {
        match self {
            PhantomClass::Normal => 0,
            PhantomClass::Abnormal => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PhantomClass::Normal => "normal",
            PhantomClass::Abnormal => "abnormal",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomConfig {
    pub width: usize,
    pub height: usize,
    /// Body half-axes as fractions of width and height.
    pub body_half_axes: ((f64, f64), (f64, f64)),
    /// Lung half-axes as fractions of width and height.
    pub lung_half_axes: ((f64, f64), (f64, f64)),
    /// Horizontal distance of each lung center from the body center, as a fraction of width.
    pub lung_offset: (f64, f64),
    pub background_level: f64,
    pub body_level: f64,
    pub lung_level: f64,
    /// Half-width of the per-sample uniform offset applied to the body and lung levels.
    pub level_jitter: f64,
    /// Largest change of a per-sample linear intensity ramp across the frame.
    pub exposure_gradient: f64,
    pub rib_texture: bool,
    pub rib_amplitude: f64,
    /// Rib spacing as a fraction of height.
    pub rib_period: f64,
    /// Edge softening radius in pixels at 256 px.
    pub edge_blur: f64,
    pub noise_sigma: f64,
    pub lesion_count: (usize, usize),
    pub lesion_amplitude: (f64, f64),
    /// Lesion radius in pixels at 256 px (scaled with the frame).
    pub lesion_radius: (f64, f64),
    pub seed: u64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            body_half_axes: ((0.36, 0.42), (0.40, 0.46)),
            lung_half_axes: ((0.11, 0.14), (0.24, 0.30)),
            lung_offset: (0.17, 0.20),
            background_level: 0.05,
            body_level: 0.75,
            lung_level: 0.25,
            level_jitter: 0.05,
            exposure_gradient: 0.1,
            rib_texture: true,
            rib_amplitude: 0.08,
            rib_period: 0.08,
            edge_blur: 2.0,
            noise_sigma: 0.02,
            lesion_count: (1, 3),
            lesion_amplitude: (0.3, 0.5),
            lesion_radius: (8.0, 20.0),
            seed: 0,
        }
    }
}

fn ordered(name: &str, (lo, hi): (f64, f64), min: f64, max: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && min <= lo && lo <= hi && hi <= max) {
        return Err(Error::InvalidArgument(format!(
            "phantom {name} range ({lo}, {hi}) invalid"
        )));
    }
    Ok(())
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 16 || self.height < 16 {
            return Err(Error::InvalidDimensions("phantoms need at least 16x16 pixels".into()));
        }
        ordered("body x half-axis", self.body_half_axes.0, 0.0, 0.5)?;
        ordered("body y half-axis", self.body_half_axes.1, 0.0, 0.5)?;
        ordered("lung x half-axis", self.lung_half_axes.0, 0.0, 0.5)?;
        ordered("lung y half-axis", self.lung_half_axes.1, 0.0, 0.5)?;
        ordered("lung offset", self.lung_offset, 0.0, 0.5)?;
        ordered("lesion amplitude", self.lesion_amplitude, 0.0, 1.0)?;
        ordered("lesion radius", self.lesion_radius, 1.0, f64::MAX)?;
        for (name, v) in [
            ("background level", self.background_level),
            ("body level", self.body_level),
            ("lung level", self.lung_level),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} {v} outside [0, 1]")));
            }
        }
        if self.lesion_count.0 > self.lesion_count.1 || self.lesion_count.1 == 0 {
            return Err(Error::InvalidArgument("lesion count range invalid".into()));
        }
        if !(self.level_jitter >= 0.0 && self.exposure_gradient >= 0.0) {
            return Err(Error::InvalidArgument(
                "level jitter and exposure gradient must be non-negative".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.edge_blur >= 0.0 && self.rib_period > 0.0) {
            return Err(Error::InvalidArgument(
                "noise, blur and rib period must be non-negative".into(),
            ));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        self.width.min(self.height) as f64 / 256.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub half_axes: (f64, f64),
}

impl Ellipse {
    fn value(&self, x: f64, y: f64) -> f64 {
        ((x - self.center.0) / self.half_axes.0).powi(2) + ((y - self.center.1) / self.half_axes.1).powi(2)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.value(x, y) <= 1.0
    }

    /// Whether `self` fits inside `outer` with `margin` pixels to spare (boundary sampling).
    fn inside(&self, outer: &Ellipse, margin: f64) -> bool {
        (0..720).all(|k| {
            let t = k as f64 * std::f64::consts::PI / 360.0;
            let (s, c) = t.sin_cos();
            let x = self.center.0 + (self.half_axes.0 + margin) * c;
            let y = self.center.1 + (self.half_axes.1 + margin) * s;
            outer.contains(x, y)
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Anatomy {
    pub body: Ellipse,
    pub lungs: [Ellipse; 2],
    pub rib_phase: f64,
    pub rib_curvature: f64,
    pub body_level: f64,
    pub lung_level: f64,
    /// Intensity change per pixel along x and y.
    pub ramp: (f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lesion {
    pub center: (f64, f64),
    pub radius: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSample {
    pub index: usize,
    pub class: PhantomClass,
    /// Per-sample seed (geometry and noise streams derive from it).
    pub seed: u64,
    pub image: GrayImage,
    pub gt_lung: BinaryMask,
    pub gt_lesion: BinaryMask,
    pub anatomy: Anatomy,
    pub lesions: Vec<Lesion>,
}

impl PhantomSample {
    pub fn label(&self) -> u8 {
        self.class.label()
    }
}

const TAG_SAMPLE: u64 = 0xA11A;
const TAG_GEOMETRY: u64 = 1;
const TAG_NOISE: u64 = 2;
const TAG_LESION: u64 = 3;
const GEOMETRY_RETRIES: usize = 64;

fn sample_anatomy(cfg: &PhantomConfig, rng: &mut RngHandle) -> Result<Anatomy> {
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let u = |rng: &mut RngHandle, (lo, hi): (f64, f64)| if lo == hi { lo } else { rng.gen_range(lo..=hi) };
    for _ in 0..GEOMETRY_RETRIES {
        let body = Ellipse {
            center: (w / 2.0 + u(rng, (-0.02, 0.02)) * w, h / 2.0 + u(rng, (-0.02, 0.02)) * h),
            half_axes: (u(rng, cfg.body_half_axes.0) * w, u(rng, cfg.body_half_axes.1) * h),
        };
        let lift = u(rng, (0.0, 0.05)) * h;
        let mut lungs = [body; 2];
        for (side, lung) in [-1.0, 1.0].into_iter().zip(lungs.iter_mut()) {
            *lung = Ellipse {
                center: (body.center.0 + side * u(rng, cfg.lung_offset) * w, body.center.1 - lift),
                half_axes: (u(rng, cfg.lung_half_axes.0) * w, u(rng, cfg.lung_half_axes.1) * h),
            };
        }
        let rib_phase = u(rng, (0.0, std::f64::consts::TAU));
        let rib_curvature = u(rng, (0.5, 1.5));
        let j = cfg.level_jitter;
        let body_level = (cfg.body_level + u(rng, (-j, j))).clamp(0.0, 1.0);
        let lung_level = (cfg.lung_level + u(rng, (-j, j))).clamp(0.0, 1.0);
        let g = cfg.exposure_gradient;
        let ramp_dir = u(rng, (0.0, std::f64::consts::TAU));
        let ramp_size = u(rng, (0.0, g));
        let ramp = (ramp_size * ramp_dir.cos() / w, ramp_size * ramp_dir.sin() / h);
        let margin = 3.0 * cfg.scale();
        let gap = (lungs[1].center.0 - lungs[1].half_axes.0) - (lungs[0].center.0 + lungs[0].half_axes.0);
        let body_in_frame = body.center.0 - body.half_axes.0 >= 2.0
            && body.center.0 + body.half_axes.0 <= w - 3.0
            && body.center.1 - body.half_axes.1 >= 2.0
            && body.center.1 + body.half_axes.1 <= h - 3.0;
        if body_in_frame && gap >= 2.0 * margin && lungs.iter().all(|l| l.inside(&body, margin)) {
            return Ok(Anatomy {
                body,
                lungs,
                rib_phase,
                rib_curvature,
                body_level,
                lung_level,
                ramp,
            });
        }
    }
    Err(Error::GenerationFailed(format!(
        "no feasible geometry in {GEOMETRY_RETRIES} tries"
    )))
}

fn sample_lesions(
    cfg: &PhantomConfig,
    anatomy: &Anatomy,
    gt_lung: &BinaryMask,
    rng: &mut RngHandle,
) -> Result<Vec<Lesion>> {
    let scale = cfg.scale();
    let count = rng.gen_range(cfg.lesion_count.0.max(1)..=cfg.lesion_count.1);
    let mut lesions = Vec::with_capacity(count);
    for _ in 0..count {
        let lung = anatomy.lungs[rng.gen_range(0..2)];
        let radius = rng.gen_range(cfg.lesion_radius.0..=cfg.lesion_radius.1) * scale;
        let amplitude = rng.gen_range(cfg.lesion_amplitude.0..=cfg.lesion_amplitude.1);
        let mut placed = None;
        for _ in 0..GEOMETRY_RETRIES {
            // Uniform point in the inner 70% of the lung ellipse.
            let r = 0.7 * rng.gen::<f64>().sqrt();
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            let cx = (lung.center.0 + r * lung.half_axes.0 * t.cos()).round();
            let cy = (lung.center.1 + r * lung.half_axes.1 * t.sin()).round();
            if gt_lung.get(cx as usize, cy as usize) {
                placed = Some((cx, cy));
                break;
            }
        }
        let center = placed.ok_or_else(|| Error::GenerationFailed("lesion center outside lung".into()))?;
        lesions.push(Lesion {
            center,
            radius,
            amplitude,
        });
    }
    Ok(lesions)
}

/// Deterministic phantom for `(cfg.seed, index, class)`.
pub fn generate(cfg: &PhantomConfig, index: usize, class: PhantomClass) -> Result<PhantomSample> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let seed = crate::rng::derive_seed(cfg.seed, &[TAG_SAMPLE, index as u64]);
    let anatomy = sample_anatomy(cfg, &mut RngHandle::derive(seed, &[TAG_GEOMETRY]))?;
    let in_lung = |x: f64, y: f64| anatomy.lungs.iter().any(|l| l.contains(x, y));
    let gt_lung = BinaryMask::from_fn(w, h, |x, y| in_lung(x as f64, y as f64));

    let period = cfg.rib_period * h as f64;
    let body_cx = anatomy.body.center.0;
    let base = GrayImage::from_fn(w, h, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let ramp = anatomy.ramp.0 * (fx - w as f64 / 2.0) + anatomy.ramp.1 * (fy - h as f64 / 2.0);
        if !anatomy.body.contains(fx, fy) {
            return cfg.background_level + ramp;
        }
        let mut v = ramp
            + if in_lung(fx, fy) {
                anatomy.lung_level
            } else {
                anatomy.body_level
            };
        if cfg.rib_texture {
            let bend = anatomy.rib_curvature * (fx - body_cx).powi(2) / w as f64;
            v += cfg.rib_amplitude * (std::f64::consts::TAU * (fy + bend) / period + anatomy.rib_phase).sin();
        }
        v
    })?;
    let base = gaussian_blur(&base, cfg.edge_blur * cfg.scale())?;

    let (lesions, lesion_map) = match class {
        PhantomClass::Normal => (Vec::new(), None),
        PhantomClass::Abnormal => {
            let lesions = sample_lesions(cfg, &anatomy, &gt_lung, &mut RngHandle::derive(seed, &[TAG_LESION]))?;
            let mut add = vec![0.0; w * h];
            for l in &lesions {
                let sigma = l.radius / 2.0;
                let reach = (3.0 * sigma).ceil() as isize;
                let (cx, cy) = (l.center.0 as isize, l.center.1 as isize);
                for y in (cy - reach).max(0)..=(cy + reach).min(h as isize - 1) {
                    for x in (cx - reach).max(0)..=(cx + reach).min(w as isize - 1) {
                        let (x, y) = (x as usize, y as usize);
                        if gt_lung.get(x, y) {
                            let d2 = (x as f64 - l.center.0).powi(2) + (y as f64 - l.center.1).powi(2);
                            add[y * w + x] += l.amplitude * (-d2 / (2.0 * sigma * sigma)).exp();
                        }
                    }
                }
            }
            (lesions, Some(add))
        }
    };

    let noise =
        Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut noise_rng = RngHandle::derive(seed, &[TAG_NOISE]);
    let mut data = Vec::with_capacity(w * h);
    for (i, &b) in base.data().iter().enumerate() {
        let n = if cfg.noise_sigma > 0.0 {
            noise.sample(&mut noise_rng)
        } else {
            0.0
        };
        let lesion = lesion_map.as_ref().map_or(0.0, |m| m[i]);
        data.push((b + lesion + n).clamp(0.0, 1.0));
    }
    let image = GrayImage::from_vec(w, h, data)?;

    let gt_lesion = BinaryMask::from_fn(w, h, |x, y| {
        gt_lung.get(x, y)
            && lesions
                .iter()
                .any(|l| (x as f64 - l.center.0).powi(2) + (y as f64 - l.center.1).powi(2) <= l.radius * l.radius)
    });

    Ok(PhantomSample {
        index,
        class,
        seed,
        image,
        gt_lung,
        gt_lesion,
        anatomy,
        lesions,
    })
}

/// `n_normal` normal phantoms (indices `0..n_normal`) followed by `n_abnormal`
/// abnormal ones (indices `n_normal..n_normal+n_abnormal`).
pub fn generate_corpus(cfg: &PhantomConfig, n_normal: usize, n_abnormal: usize) -> Result<Vec<PhantomSample>> {
    (0..n_normal + n_abnormal)
        .map(|i| {
            let class = if i < n_normal {
                PhantomClass::Normal
            } else {
                PhantomClass::Abnormal
            };
            generate(cfg, i, class)
        })
        .collect()
}
