//! Flat `key = value` configuration.
//!
//! Lines are `section.key = value`; `#` starts a comment. Ranges are written
//! `lo, hi` and lists as comma-separated values. Every key has a default, listed
//! by [`PipelineConfig::entries`], and unknown keys are rejected.

use crate::error::{CliError, CliResult};
use anatpaste_core::augment::{AnatPasteConfig, ScarConfig};
use anatpaste_core::classifier::{BatchCounting, Descriptor, TrainConfig};
use anatpaste_core::imgcore::{ClaheParams, Connectivity, Polarity, ShapeKind};
use anatpaste_core::lungseg::SegConfig;
use anatpaste_core::phantom::PhantomConfig;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Augmentation used for the pretext task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    #[default]
    Anat,
    AnatNoSeg,
    AnatNoBlur,
    CutPasteScar,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Anat, Mode::AnatNoSeg, Mode::AnatNoBlur, Mode::CutPasteScar];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Anat => "anat",
            Mode::AnatNoSeg => "anat-noseg",
            Mode::AnatNoBlur => "anat-noblur",
            Mode::CutPasteScar => "cutpaste-scar",
        }
    }

    /// Whether the mode needs lung masks.
    pub fn uses_lungs(self) -> bool {
        matches!(self, Mode::Anat | Mode::AnatNoBlur)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode '{s}' (expected anat, anat-noseg, anat-noblur or cutpaste-scar)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ScoreNormalization {
    /// Every split is normalized by its own raw-score range.
    #[default]
    Query,
    /// Test scores use the validation raw-score range (clamped to `[0, 1]`).
    Validation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: usize,
    pub val_normal: usize,
    pub val_abnormal: usize,
    pub test_normal: usize,
    pub test_abnormal: usize,
}

impl Default for Splits {
    fn default() -> Self {
        Self {
            train: 400,
            val_normal: 100,
            val_abnormal: 100,
            test_normal: 100,
            test_abnormal: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub runs: usize,
    pub mode: Mode,
    pub phantom: PhantomConfig,
    pub splits: Splits,
    /// Lesion radius (px at 256) separating the `small` and `large` groups.
    pub lesion_group_radius: f64,
    /// Radii are given for a 256-pixel frame and scaled to the image size.
    pub seg: SegConfig,
    pub aug: AnatPasteConfig,
    pub scar: ScarConfig,
    pub train: TrainConfig,
    pub descriptor: Descriptor,
    /// Standardize network inputs with this std floor; raw descriptors when `None`.
    pub input_scale_floor: Option<f64>,
    /// Keep the epoch with the best validation AUC instead of the last one.
    pub checkpoint_best: bool,
    pub bandwidth: f64,
    /// Floor for the per-dimension standard deviations of KDE features.
    pub std_floor: f64,
    pub normalization: ScoreNormalization,
    /// Fixed decision threshold; the best validation F1 threshold when `None`.
    pub threshold: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: 5,
            mode: Mode::Anat,
            phantom: PhantomConfig::default(),
            splits: Splits::default(),
            lesion_group_radius: 14.0,
            seg: SegConfig::default(),
            aug: AnatPasteConfig::default(),
            scar: ScarConfig::default(),
            train: TrainConfig::default(),
            descriptor: Descriptor::default(),
            input_scale_floor: Some(1e-3),
            checkpoint_best: false,
            bandwidth: 1.0,
            std_floor: anatpaste_core::scoring::STD_FLOOR,
            normalization: ScoreNormalization::Query,
            threshold: None,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.trim().parse().map_err(|e| format!("{key}: cannot parse '{v}': {e}"))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    v.split(',').map(|p| num(key, p)).collect()
}

fn pair<T: FromStr + Copy>(key: &str, v: &str) -> Result<(T, T), String>
where
    T::Err: fmt::Display,
{
    match list(key, v)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("{key}: expected 'lo, hi', got '{v}'")),
    }
}

fn flag(key: &str, v: &str) -> Result<bool, String> {
    match v.trim() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got '{v}'")),
    }
}

fn show_pair<T: fmt::Display>((a, b): (T, T)) -> String {
    format!("{a}, {b}")
}

fn show_list<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl PipelineConfig {
    pub fn from_text(text: &str, path: &Path) -> CliResult<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::parse(path, i + 1, format!("expected 'key = value', got '{line}'")))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|m| CliError::Config(format!("{}:{}: {m}", path.display(), i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_text(&text, path)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let p = &mut self.phantom;
        let s = &mut self.splits;
        let a = &mut self.aug;
        let t = &mut self.train;
        match key {
            "seed" => self.seed = num(key, v)?,
            "runs" => self.runs = num(key, v)?,
            "mode" => self.mode = v.parse()?,

            "phantom.seed" => p.seed = num(key, v)?,
            "phantom.width" => p.width = num(key, v)?,
            "phantom.height" => p.height = num(key, v)?,
            "phantom.body_half_x" => p.body_half_axes.0 = pair(key, v)?,
            "phantom.body_half_y" => p.body_half_axes.1 = pair(key, v)?,
            "phantom.lung_half_x" => p.lung_half_axes.0 = pair(key, v)?,
            "phantom.lung_half_y" => p.lung_half_axes.1 = pair(key, v)?,
            "phantom.lung_offset" => p.lung_offset = pair(key, v)?,
            "phantom.background_level" => p.background_level = num(key, v)?,
            "phantom.body_level" => p.body_level = num(key, v)?,
            "phantom.lung_level" => p.lung_level = num(key, v)?,
            "phantom.level_jitter" => p.level_jitter = num(key, v)?,
            "phantom.exposure_gradient" => p.exposure_gradient = num(key, v)?,
            "phantom.rib_texture" => p.rib_texture = flag(key, v)?,
            "phantom.rib_amplitude" => p.rib_amplitude = num(key, v)?,
            "phantom.rib_period" => p.rib_period = num(key, v)?,
            "phantom.edge_blur" => p.edge_blur = num(key, v)?,
            "phantom.noise_sigma" => p.noise_sigma = num(key, v)?,
            "phantom.lesion_count" => p.lesion_count = pair(key, v)?,
            "phantom.lesion_amplitude" => p.lesion_amplitude = pair(key, v)?,
            "phantom.lesion_radius" => p.lesion_radius = pair(key, v)?,
            "phantom.lesion_group_radius" => self.lesion_group_radius = num(key, v)?,
            "phantom.n_train" => s.train = num(key, v)?,
            "phantom.n_val_normal" => s.val_normal = num(key, v)?,
            "phantom.n_val_abnormal" => s.val_abnormal = num(key, v)?,
            "phantom.n_test_normal" => s.test_normal = num(key, v)?,
            "phantom.n_test_abnormal" => s.test_abnormal = num(key, v)?,

            "seg.clahe_tiles" => {
                let (x, y) = pair(key, v)?;
                self.seg.clahe = ClaheParams {
                    tiles_x: x,
                    tiles_y: y,
                    ..self.seg.clahe
                };
            }
            "seg.clahe_clip" => self.seg.clahe.clip_limit = num(key, v)?,
            "seg.open_radius" => self.seg.open_radius = num(key, v)?,
            "seg.dilate_radius" => self.seg.dilate_radius = num(key, v)?,
            "seg.min_component_fraction" => self.seg.min_component_fraction = num(key, v)?,
            "seg.connectivity" => {
                self.seg.connectivity = match v {
                    "4" => Connectivity::Four,
                    "8" => Connectivity::Eight,
                    _ => return Err(format!("{key}: expected 4 or 8, got '{v}'")),
                }
            }
            "seg.polarity" => {
                self.seg.polarity = match v {
                    "below" => Polarity::Below,
                    "above" => Polarity::Above,
                    _ => return Err(format!("{key}: expected below or above, got '{v}'")),
                }
            }

            "aug.patch_area" => a.patch_area_ratio = pair(key, v)?,
            "aug.patch_aspect" => a.patch_aspect = pair(key, v)?,
            "aug.fill" => a.fill_range = pair(key, v)?,
            "aug.blur_radius" => a.blur_radius_range = pair(key, v)?,
            "aug.shape_scale" => a.shape_scale = pair(key, v)?,
            "aug.shapes" => {
                a.shape_kinds = v
                    .split(',')
                    .map(|k| match k.trim() {
                        "ellipse" => Ok(ShapeKind::Ellipse),
                        "rectangle" => Ok(ShapeKind::Rectangle),
                        other => Err(format!("{key}: unknown shape '{other}'")),
                    })
                    .collect::<Result<_, _>>()?
            }
            "aug.max_placement_attempts" => a.max_placement_attempts = num(key, v)?,
            "aug.max_crop_attempts" => a.max_crop_attempts = num(key, v)?,
            "aug.scar_width" => self.scar.width = pair(key, v)?,
            "aug.scar_length" => self.scar.length = pair(key, v)?,
            "aug.scar_rotation" => self.scar.rotation_deg = pair(key, v)?,

            "train.batch_size" => t.batch_size = num(key, v)?,
            "train.batch_counting" => {
                t.batch_counting = match v {
                    "normals" => BatchCounting::Normals,
                    "samples" => BatchCounting::Samples,
                    _ => return Err(format!("{key}: expected normals or samples, got '{v}'")),
                }
            }
            "train.epochs" => t.epochs = num(key, v)?,
            "train.lr" => t.base_lr = num(key, v)?,
            "train.momentum" => t.momentum = num(key, v)?,
            "train.weight_decay" => t.weight_decay = num(key, v)?,
            "train.hidden" => t.hidden = list(key, v)?,
            "train.grid" => self.descriptor.grid_size = num(key, v)?,
            "train.hist_bins" => self.descriptor.histogram_bins = num(key, v)?,
            "train.input_scale_floor" => {
                self.input_scale_floor = match v {
                    "off" => None,
                    _ => Some(num(key, v)?),
                }
            }
            "train.checkpoint_best" => self.checkpoint_best = flag(key, v)?,

            "kde.bandwidth" => self.bandwidth = num(key, v)?,
            "kde.std_floor" => self.std_floor = num(key, v)?,
            "kde.normalization" => {
                self.normalization = match v {
                    "validation" => ScoreNormalization::Validation,
                    "query" => ScoreNormalization::Query,
                    _ => return Err(format!("{key}: expected validation or query, got '{v}'")),
                }
            }

            "eval.threshold" => {
                self.threshold = match v {
                    "auto" => None,
                    _ => Some(num(key, v)?),
                }
            }
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Every key with its current value, in a stable order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let p = &self.phantom;
        let s = &self.splits;
        let a = &self.aug;
        let t = &self.train;
        vec![
            ("seed", self.seed.to_string()),
            ("runs", self.runs.to_string()),
            ("mode", self.mode.to_string()),
            ("phantom.seed", p.seed.to_string()),
            ("phantom.width", p.width.to_string()),
            ("phantom.height", p.height.to_string()),
            ("phantom.body_half_x", show_pair(p.body_half_axes.0)),
            ("phantom.body_half_y", show_pair(p.body_half_axes.1)),
            ("phantom.lung_half_x", show_pair(p.lung_half_axes.0)),
            ("phantom.lung_half_y", show_pair(p.lung_half_axes.1)),
            ("phantom.lung_offset", show_pair(p.lung_offset)),
            ("phantom.background_level", p.background_level.to_string()),
            ("phantom.body_level", p.body_level.to_string()),
            ("phantom.lung_level", p.lung_level.to_string()),
            ("phantom.level_jitter", p.level_jitter.to_string()),
            ("phantom.exposure_gradient", p.exposure_gradient.to_string()),
            ("phantom.rib_texture", p.rib_texture.to_string()),
            ("phantom.rib_amplitude", p.rib_amplitude.to_string()),
            ("phantom.rib_period", p.rib_period.to_string()),
            ("phantom.edge_blur", p.edge_blur.to_string()),
            ("phantom.noise_sigma", p.noise_sigma.to_string()),
            ("phantom.lesion_count", show_pair(p.lesion_count)),
            ("phantom.lesion_amplitude", show_pair(p.lesion_amplitude)),
            ("phantom.lesion_radius", show_pair(p.lesion_radius)),
            ("phantom.lesion_group_radius", self.lesion_group_radius.to_string()),
            ("phantom.n_train", s.train.to_string()),
            ("phantom.n_val_normal", s.val_normal.to_string()),
            ("phantom.n_val_abnormal", s.val_abnormal.to_string()),
            ("phantom.n_test_normal", s.test_normal.to_string()),
            ("phantom.n_test_abnormal", s.test_abnormal.to_string()),
            (
                "seg.clahe_tiles",
                show_pair((self.seg.clahe.tiles_x, self.seg.clahe.tiles_y)),
            ),
            ("seg.clahe_clip", self.seg.clahe.clip_limit.to_string()),
            ("seg.open_radius", self.seg.open_radius.to_string()),
            ("seg.dilate_radius", self.seg.dilate_radius.to_string()),
            (
                "seg.min_component_fraction",
                self.seg.min_component_fraction.to_string(),
            ),
            (
                "seg.connectivity",
                match self.seg.connectivity {
                    Connectivity::Four => "4",
                    Connectivity::Eight => "8",
                }
                .into(),
            ),
            (
                "seg.polarity",
                match self.seg.polarity {
                    Polarity::Below => "below",
                    Polarity::Above => "above",
                }
                .into(),
            ),
            ("aug.patch_area", show_pair(a.patch_area_ratio)),
            ("aug.patch_aspect", show_pair(a.patch_aspect)),
            ("aug.fill", show_pair(a.fill_range)),
            ("aug.blur_radius", show_pair(a.blur_radius_range)),
            ("aug.shape_scale", show_pair(a.shape_scale)),
            (
                "aug.shapes",
                a.shape_kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join(", "),
            ),
            ("aug.max_placement_attempts", a.max_placement_attempts.to_string()),
            ("aug.max_crop_attempts", a.max_crop_attempts.to_string()),
            ("aug.scar_width", show_pair(self.scar.width)),
            ("aug.scar_length", show_pair(self.scar.length)),
            ("aug.scar_rotation", show_pair(self.scar.rotation_deg)),
            ("train.batch_size", t.batch_size.to_string()),
            (
                "train.batch_counting",
                match t.batch_counting {
                    BatchCounting::Normals => "normals",
                    BatchCounting::Samples => "samples",
                }
                .into(),
            ),
            ("train.epochs", t.epochs.to_string()),
            ("train.lr", t.base_lr.to_string()),
            ("train.momentum", t.momentum.to_string()),
            ("train.weight_decay", t.weight_decay.to_string()),
            ("train.hidden", show_list(&t.hidden)),
            ("train.grid", self.descriptor.grid_size.to_string()),
            ("train.hist_bins", self.descriptor.histogram_bins.to_string()),
            (
                "train.input_scale_floor",
                self.input_scale_floor
                    .map_or_else(|| "off".to_string(), |v| v.to_string()),
            ),
            ("train.checkpoint_best", self.checkpoint_best.to_string()),
            ("kde.bandwidth", self.bandwidth.to_string()),
            ("kde.std_floor", self.std_floor.to_string()),
            (
                "kde.normalization",
                match self.normalization {
                    ScoreNormalization::Validation => "validation",
                    ScoreNormalization::Query => "query",
                }
                .into(),
            ),
            (
                "eval.threshold",
                self.threshold.map_or_else(|| "auto".to_string(), |v| v.to_string()),
            ),
        ]
    }

    /// Text accepted by [`PipelineConfig::from_text`] that reproduces `self`.
    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Segmentation parameters scaled to a `width × height` frame.
    pub fn seg_for(&self, width: usize, height: usize) -> SegConfig {
        self.seg.scaled_to(width, height)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.splits.train == 0 {
            return bad("phantom.n_train must be at least 1".into());
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return bad(format!("kde.bandwidth must be positive, got {}", self.bandwidth));
        }
        if !(self.std_floor > 0.0 && self.std_floor.is_finite()) {
            return bad(format!("kde.std_floor must be positive, got {}", self.std_floor));
        }
        self.phantom.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.seg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.aug.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_text_round_trips() {
        let mut cfg = PipelineConfig::default();
        cfg.set("aug.fill", "0.6, 0.9").unwrap();
        cfg.set("train.hidden", "16,8").unwrap();
        cfg.set("eval.threshold", "0.25").unwrap();
        cfg.set("mode", "cutpaste-scar").unwrap();
        let back = PipelineConfig::from_text(&cfg.to_text(), Path::new("x")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(
            PipelineConfig::from_text(&PipelineConfig::default().to_text(), Path::new("x")).unwrap(),
            PipelineConfig::default()
        );
    }

    #[test]
    fn every_listed_key_is_settable() {
        let cfg = PipelineConfig::default();
        for (k, v) in cfg.entries() {
            let mut c = PipelineConfig::default();
            c.set(k, &v).unwrap_or_else(|e| panic!("{k}: {e}"));
            assert_eq!(c, cfg, "{k}");
        }
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = PipelineConfig::from_text("# header\n\nseed = 7  # trailing\nruns=2\n", Path::new("c")).unwrap();
        assert_eq!((cfg.seed, cfg.runs), (7, 2));
    }

    #[test]
    fn unknown_key_rejected() {
        let err = PipelineConfig::from_text("seed = 1\nseg.radius = 3\n", Path::new("c.txt")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("c.txt:2"));
        assert!(err.to_string().contains("seg.radius"));
    }

    #[test]
    fn malformed_line_is_parse_error() {
        let err = PipelineConfig::from_text("seed 1\n", Path::new("c")).unwrap_err();
        assert!(matches!(err, CliError::Parse { line: 1, .. }));
    }

    #[test]
    fn bad_values_rejected() {
        let mut cfg = PipelineConfig::default();
        assert!(cfg.set("aug.fill", "0.5").is_err());
        assert!(cfg.set("seg.connectivity", "6").is_err());
        assert!(cfg.set("mode", "anatpaste").is_err());
        assert!(cfg.set("runs", "-1").is_err());
        cfg.runs = 0;
        assert!(cfg.validate().is_err());
    }
}
