//! Contrast-limited adaptive histogram equalization.
//!
//! The image is reflected out to a multiple of the tile grid, a clipped 256-bin
//! histogram is built per tile and turned into an equalizing transfer curve, and
//! each pixel is bilinearly interpolated between the four nearest tile curves.
//! A tile whose raw histogram occupies a single bin keeps its intensities
//! unchanged, so a constant image maps to itself.

use super::image::{intensity_bin, reflect_index, GrayImage, HIST_BINS};
use crate::error::{Error, Result};

/// Tile grid and clip limit. `clip_limit` is a multiple of the mean bin height;
/// `f64::INFINITY` disables clipping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClaheParams {
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub clip_limit: f64,
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self {
            tiles_x: 8,
            tiles_y: 8,
            clip_limit: 2.0,
        }
    }
}

/// Per-tile transfer curve. `None` means identity.
type TileLut = Option<Box<[f64; HIST_BINS]>>;

fn tile_lut(hist: &[f64; HIST_BINS], clip_limit: f64) -> TileLut {
    let occupied = hist.iter().filter(|&&h| h > 0.0).count();
    if occupied <= 1 {
        return None;
    }
    let total: f64 = hist.iter().sum();
    let mut h = *hist;
    if clip_limit.is_finite() {
        let limit = clip_limit * total / HIST_BINS as f64;
        let excess: f64 = h.iter().map(|&v| (v - limit).max(0.0)).sum();
        let share = excess / HIST_BINS as f64;
        for v in h.iter_mut() {
            *v = v.min(limit) + share;
        }
    }
    let mut cdf = [0.0; HIST_BINS];
    let mut acc = 0.0;
    for (c, v) in cdf.iter_mut().zip(h.iter()) {
        acc += v;
        *c = acc;
    }
    let cdf_min = h
        .iter()
        .zip(cdf.iter())
        .find(|(&v, _)| v > 0.0)
        .map(|(_, &c)| c)
        .unwrap_or(0.0);
    let span = acc - cdf_min;
    if span <= 0.0 {
        return None;
    }
    let mut lut = Box::new([0.0; HIST_BINS]);
    for (l, c) in lut.iter_mut().zip(cdf.iter()) {
        *l = ((c - cdf_min) / span).clamp(0.0, 1.0);
    }
    Some(lut)
}

#[inline]
fn apply(lut: &TileLut, v: f64) -> f64 {
    match lut {
        Some(l) => l[intensity_bin(v)],
        None => v,
    }
}

/// Interpolation neighbors along one axis: (lower tile, upper tile, weight of upper).
#[inline]
fn axis_weights(pos: usize, tile_len: usize, tiles: usize) -> (usize, usize, f64) {
    let f = (pos as f64 + 0.5) / tile_len as f64 - 0.5;
    if f <= 0.0 {
        return (0, 0, 0.0);
    }
    let lo = f.floor() as usize;
    if lo >= tiles - 1 {
        return (tiles - 1, tiles - 1, 0.0);
    }
    (lo, lo + 1, f - lo as f64)
}

pub fn clahe(img: &GrayImage, params: ClaheParams) -> Result<GrayImage> {
    let ClaheParams {
        tiles_x,
        tiles_y,
        clip_limit,
    } = params;
    if tiles_x == 0 || tiles_y == 0 {
        return Err(Error::InvalidArgument("CLAHE needs at least one tile per axis".into()));
    }
    if clip_limit.is_nan() || clip_limit <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "CLAHE clip limit must be positive, got {clip_limit}"
        )));
    }
    let (w, h) = img.dims();
    let (luts, tile_w, tile_h) = build_luts(img, params);

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (ty0, ty1, wy) = axis_weights(y, tile_h, tiles_y);
        for x in 0..w {
            let (tx0, tx1, wx) = axis_weights(x, tile_w, tiles_x);
            let v = img.get(x, y);
            let top = (1.0 - wx) * apply(&luts[ty0 * tiles_x + tx0], v) + wx * apply(&luts[ty0 * tiles_x + tx1], v);
            let bottom = (1.0 - wx) * apply(&luts[ty1 * tiles_x + tx0], v) + wx * apply(&luts[ty1 * tiles_x + tx1], v);
            out.push(((1.0 - wy) * top + wy * bottom).clamp(0.0, 1.0));
        }
    }
    Ok(GrayImage::from_raw(w, h, out))
}

fn build_luts(img: &GrayImage, params: ClaheParams) -> (Vec<TileLut>, usize, usize) {
    let ClaheParams {
        tiles_x,
        tiles_y,
        clip_limit,
    } = params;
    let (w, h) = img.dims();
    let tile_w = w.div_ceil(tiles_x);
    let tile_h = h.div_ceil(tiles_y);

    let mut luts: Vec<TileLut> = Vec::with_capacity(tiles_x * tiles_y);
    for ty in 0..tiles_y {
        for tx in 0..tiles_x {
            let mut hist = [0.0; HIST_BINS];
            for py in ty * tile_h..(ty + 1) * tile_h {
                let sy = reflect_index(py as isize, h);
                for px in tx * tile_w..(tx + 1) * tile_w {
                    let sx = reflect_index(px as isize, w);
                    hist[intensity_bin(img.get(sx, sy))] += 1.0;
                }
            }
            luts.push(tile_lut(&hist, clip_limit));
        }
    }
    (luts, tile_w, tile_h)
}
