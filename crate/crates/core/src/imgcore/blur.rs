//! Separable Gaussian blur parameterized by a visual radius.
//!
//! `sigma = radius / 3`, the kernel is truncated at half-width `ceil(radius)` and
//! renormalized to sum 1, and borders are handled by symmetric reflection.

use super::image::{reflect_index, GrayImage, Rect};
use crate::error::{Error, Result};

/// Normalized 1-D kernel of length `2·ceil(radius) + 1`. Radius 0 gives `[1.0]`.
pub fn gaussian_kernel(radius: f64) -> Result<Vec<f64>> {
    if !radius.is_finite() || radius < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "blur radius must be finite and non-negative, got {radius}"
        )));
    }
    if radius == 0.0 {
        return Ok(vec![1.0]);
    }
    let half = radius.ceil() as isize;
    let sigma = radius / 3.0;
    let denom = 2.0 * sigma * sigma;
    let raw: Vec<f64> = (-half..=half).map(|k| (-((k * k) as f64) / denom).exp()).collect();
    let sum: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / sum).collect())
}

pub fn gaussian_blur(img: &GrayImage, radius: f64) -> Result<GrayImage> {
    let kernel = gaussian_kernel(radius)?;
    if kernel.len() == 1 {
        return Ok(img.clone());
    }
    let (w, h) = img.dims();
    let (_, out) = blur_window(img.data(), Rect::new(0, 0, w, h), (w, h), radius)?;
    Ok(GrayImage::from_raw(w, h, out))
}

/// Blur of an image that is zero outside `support`.
///
/// Only the pixels that can be reached from `support` are computed; every other
/// output pixel is zero. Results are bit-identical to [`gaussian_blur`] because the
/// skipped terms are exact zeros.
#[cfg(test)]
fn gaussian_blur_supported(img: &GrayImage, radius: f64, support: Rect) -> Result<GrayImage> {
    let (w, h) = img.dims();
    let mut window = Vec::with_capacity(support.area());
    for y in support.y..support.bottom() {
        window.extend_from_slice(&img.data()[y * w + support.x..y * w + support.right()]);
    }
    let (reach, values) = blur_window(&window, support, (w, h), radius)?;
    let mut out = vec![0.0; w * h];
    for (dy, row) in values.chunks(reach.width.max(1)).enumerate() {
        let y = reach.y + dy;
        out[y * w + reach.x..y * w + reach.right()].copy_from_slice(row);
    }
    Ok(GrayImage::from_raw(w, h, out))
}

/// Blur of a `dims` frame that holds `window` (row-major, `support`-sized) inside
/// `support` and zeros elsewhere. Returns the rectangle outside which the result
/// is zero, with the values inside it.
pub(crate) fn blur_window(
    window: &[f64],
    support: Rect,
    dims: (usize, usize),
    radius: f64,
) -> Result<(Rect, Vec<f64>)> {
    let kernel = gaussian_kernel(radius)?;
    let (w, h) = dims;
    debug_assert_eq!(window.len(), support.area());
    if kernel.len() == 1 {
        return Ok((support, window.iter().map(|v| v.clamp(0.0, 1.0)).collect()));
    }
    let half = kernel.len() / 2;
    let reach = if half >= w || half >= h {
        Rect::new(0, 0, w, h)
    } else {
        support.expand_clipped(half, w, h)
    };
    let (sw, rw) = (support.width, reach.width);
    let tap = |pos: usize, i: usize, n: usize| reflect_index(pos as isize + i as isize - half as isize, n);

    // Horizontal pass: rows of `support`, columns of `reach`.
    let mut tmp = vec![0.0; rw * support.height];
    for (row, out) in window.chunks(sw.max(1)).zip(tmp.chunks_mut(rw.max(1))) {
        for (o, x) in out.iter_mut().zip(reach.x..reach.right()) {
            *o = if x >= support.x + half && x + half < support.right() {
                let s = x - half - support.x;
                row[s..s + kernel.len()]
                    .iter()
                    .zip(&kernel)
                    .fold(0.0, |acc, (v, k)| acc + k * v)
            } else {
                kernel.iter().enumerate().fold(0.0, |acc, (i, k)| {
                    let sx = tap(x, i, w);
                    let v = if sx >= support.x && sx < support.right() {
                        row[sx - support.x]
                    } else {
                        0.0
                    };
                    acc + k * v
                })
            };
        }
    }

    // Vertical pass over `reach`; rows outside `support` are zero.
    let mut out = vec![0.0; rw * reach.height];
    for (y, dst) in (reach.y..reach.bottom()).zip(out.chunks_mut(rw.max(1))) {
        for (i, &k) in kernel.iter().enumerate() {
            let sy = tap(y, i, h);
            if sy >= support.y && sy < support.bottom() {
                let src = &tmp[(sy - support.y) * rw..(sy - support.y + 1) * rw];
                dst.iter_mut().zip(src).for_each(|(a, v)| *a += k * v);
            }
        }
        dst.iter_mut().for_each(|a| *a = a.clamp(0.0, 1.0));
    }
    Ok((reach, out))
}
