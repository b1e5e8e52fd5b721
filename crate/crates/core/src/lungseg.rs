//! Lung-field segmentation of a normal chest radiograph.
//!
//! CLAHE → Otsu binarization (dark fields as foreground) → opening → border
//! clearing → dilation → connected components → removal of components smaller
//! than `t = min_component_fraction · W · H`.

use crate::error::{Error, Result};
use crate::imgcore::{
    binarize, clahe, clear_border, connected_components, dilate, open, otsu_threshold, BinaryMask, ClaheParams,
    Connectivity, GrayImage, LabelMap, Polarity, StructuringElement,
};

/// Reference side length the default radii are tuned for.
pub const REFERENCE_SIDE: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegConfig {
    pub clahe: ClaheParams,
    pub open_radius: usize,
    pub dilate_radius: usize,
    /// Components smaller than this fraction of the frame are dropped.
    pub min_component_fraction: f64,
    pub connectivity: Connectivity,
    pub polarity: Polarity,
}

impl Default for SegConfig {
    fn default() -> Self {
        Self {
            clahe: ClaheParams::default(),
            open_radius: 2,
            dilate_radius: 6,
            min_component_fraction: 0.02,
            connectivity: Connectivity::Eight,
            polarity: Polarity::Below,
        }
    }
}

impl SegConfig {
    /// Defaults with radii scaled by `min(W, H) / 256`.
    pub fn for_dims(width: usize, height: usize) -> Self {
        Self::default().scaled_to(width, height)
    }

    /// Rescale the radii (given for a 256-pixel frame) to `width × height`.
    pub fn scaled_to(mut self, width: usize, height: usize) -> Self {
        let scale = width.min(height) as f64 / REFERENCE_SIDE as f64;
        self.open_radius = (self.open_radius as f64 * scale).round() as usize;
        self.dilate_radius = (self.dilate_radius as f64 * scale).round() as usize;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_component_fraction > 0.0 && self.min_component_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "min_component_fraction must lie in (0, 1), got {}",
                self.min_component_fraction
            )));
        }
        Ok(())
    }

    /// Minimum component size in pixels for a `width × height` frame.
    pub fn min_component_pixels(&self, width: usize, height: usize) -> usize {
        (self.min_component_fraction * (width * height) as f64).ceil() as usize
    }
}

/// Intermediate masks, in pipeline order.
#[derive(Clone, Debug, PartialEq)]
pub struct SegStages {
    pub equalized: GrayImage,
    pub binarized: BinaryMask,
    pub opened: BinaryMask,
    pub border_cleared: BinaryMask,
    pub dilated: BinaryMask,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegResult {
    pub mask: BinaryMask,
    pub stages: Option<SegStages>,
    pub components_kept: usize,
    pub threshold: Option<u8>,
    /// Otsu found no split (constant image); `mask` is empty.
    pub degenerate: bool,
}

pub fn segment_lungs(img: &GrayImage, cfg: &SegConfig) -> Result<SegResult> {
    run(img, cfg, false)
}

/// Like [`segment_lungs`] but keeps every intermediate stage.
pub fn segment_lungs_traced(img: &GrayImage, cfg: &SegConfig) -> Result<SegResult> {
    run(img, cfg, true)
}

fn run(img: &GrayImage, cfg: &SegConfig, keep_stages: bool) -> Result<SegResult> {
    cfg.validate()?;
    let (w, h) = img.dims();
    let equalized = clahe(img, cfg.clahe)?;
    let threshold = match otsu_threshold(&equalized) {
        Ok(t) => t,
        Err(Error::Degenerate(_)) => {
            return Ok(SegResult {
                mask: BinaryMask::new(w, h),
                stages: None,
                components_kept: 0,
                threshold: None,
                degenerate: true,
            })
        }
        Err(e) => return Err(e),
    };
    let binarized = binarize(&equalized, threshold, cfg.polarity);
    let opened = open(&binarized, StructuringElement::disk(cfg.open_radius));
    let border_cleared = clear_border(&opened, cfg.connectivity);
    let dilated = dilate(&border_cleared, StructuringElement::disk(cfg.dilate_radius));
    let labels = connected_components(&dilated, cfg.connectivity);
    let t = cfg.min_component_pixels(w, h);
    let mask = filter_small_components(&labels, t);
    let components_kept = labels.component_sizes().iter().filter(|&&s| s >= t).count();

    Ok(SegResult {
        mask,
        stages: keep_stages.then_some(SegStages {
            equalized,
            binarized,
            opened,
            border_cleared,
            dilated,
        }),
        components_kept,
        threshold: Some(threshold),
        degenerate: false,
    })
}

/// Union of the components with at least `t` pixels.
pub fn filter_small_components(labels: &LabelMap, t: usize) -> BinaryMask {
    labels.select(|l| labels.component_size(l) >= t)
}
