//! Binary erosion, dilation and opening with flat symmetric structuring elements.
//!
//! Pixels outside the frame count as background. Each element is decomposed into
//! one horizontal run per row offset, and run membership is answered from per-row
//! prefix counts, so the cost is `O(W·H·(2r+1))`.

use super::image::BinaryMask;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementShape {
    Disk,
    Square,
}

/// Flat structuring element centered on the origin. Radius 0 is the identity element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StructuringElement {
    pub shape: ElementShape,
    pub radius: usize,
}

impl StructuringElement {
    pub fn disk(radius: usize) -> Self {
        Self {
            shape: ElementShape::Disk,
            radius,
        }
    }

    pub fn square(radius: usize) -> Self {
        Self {
            shape: ElementShape::Square,
            radius,
        }
    }

    /// `(dy, half_width)` per row: offsets `(dx, dy)` with `|dx| <= half_width`.
    pub fn rows(&self) -> Vec<(isize, usize)> {
        let r = self.radius as isize;
        (-r..=r)
            .map(|dy| {
                let hx = match self.shape {
                    ElementShape::Square => self.radius,
                    ElementShape::Disk => {
                        let rem = (r * r - dy * dy) as usize;
                        let mut hx = (rem as f64).sqrt() as usize;
                        while hx * hx > rem {
                            hx -= 1;
                        }
                        while (hx + 1) * (hx + 1) <= rem {
                            hx += 1;
                        }
                        hx
                    }
                };
                (dy, hx)
            })
            .collect()
    }

    /// Every offset of the element.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        self.rows()
            .into_iter()
            .flat_map(|(dy, hx)| (-(hx as isize)..=hx as isize).map(move |dx| (dx, dy)))
            .collect()
    }
}

/// Per-row prefix counts: `pre[y*(w+1) + x]` = foreground pixels in row `y` before column `x`.
fn row_prefix(mask: &BinaryMask) -> Vec<u32> {
    let (w, h) = mask.dims();
    let mut pre = vec![0u32; (w + 1) * h];
    for y in 0..h {
        let base = y * (w + 1);
        for x in 0..w {
            pre[base + x + 1] = pre[base + x] + mask.get(x, y) as u32;
        }
    }
    pre
}

pub fn dilate(mask: &BinaryMask, se: StructuringElement) -> BinaryMask {
    if se.radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let pre = row_prefix(mask);
    let rows = se.rows();
    BinaryMask::from_fn(w, h, |x, y| {
        rows.iter().any(|&(dy, hx)| {
            let sy = y as isize + dy;
            if sy < 0 || sy >= h as isize {
                return false;
            }
            let base = sy as usize * (w + 1);
            let x0 = x.saturating_sub(hx);
            let x1 = (x + hx + 1).min(w);
            pre[base + x1] > pre[base + x0]
        })
    })
}

pub fn erode(mask: &BinaryMask, se: StructuringElement) -> BinaryMask {
    if se.radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let pre = row_prefix(mask);
    let rows = se.rows();
    BinaryMask::from_fn(w, h, |x, y| {
        rows.iter().all(|&(dy, hx)| {
            let sy = y as isize + dy;
            if sy < 0 || sy >= h as isize || x < hx || x + hx >= w {
                return false;
            }
            let base = sy as usize * (w + 1);
            (pre[base + x + hx + 1] - pre[base + x - hx]) as usize == 2 * hx + 1
        })
    })
}

/// Erosion followed by dilation with the same element.
pub fn open(mask: &BinaryMask, se: StructuringElement) -> BinaryMask {
    dilate(&erode(mask, se), se)
}
