//! Filled ellipse / rectangle rasterization.

use super::image::{GrayImage, Rect};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Ellipse,
    Rectangle,
}

impl ShapeKind {
    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Ellipse => "ellipse",
            ShapeKind::Rectangle => "rectangle",
        }
    }
}

/// Axis-aligned ellipse or rectangle given by center and half-axes in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shape {
    pub kind: ShapeKind,
    pub center: (f64, f64),
    pub half_axes: (f64, f64),
}

impl Shape {
    /// Whether pixel `(px, py)` lies inside the shape.
    #[inline]
    pub fn contains(&self, px: usize, py: usize) -> bool {
        let dx = px as f64 - self.center.0;
        let dy = py as f64 - self.center.1;
        let (a, b) = self.half_axes;
        match self.kind {
            ShapeKind::Ellipse => (dx / a).powi(2) + (dy / b).powi(2) <= 1.0,
            ShapeKind::Rectangle => dx.abs() <= a && dy.abs() <= b,
        }
    }

    /// Continuous bounding box `(x0, y0, x1, y1)`.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        let (cx, cy) = self.center;
        let (a, b) = self.half_axes;
        (cx - a, cy - b, cx + a, cy + b)
    }

    /// Smallest pixel rectangle containing every pixel of the shape, if the
    /// bounding box lies inside a `width × height` frame.
    pub fn pixel_rect(&self, width: usize, height: usize) -> Option<Rect> {
        let (x0, y0, x1, y1) = self.bbox();
        if x0 < 0.0 || y0 < 0.0 || x1 > (width - 1) as f64 || y1 > (height - 1) as f64 {
            return None;
        }
        let (px0, py0) = (x0.ceil() as usize, y0.ceil() as usize);
        let (px1, py1) = (x1.floor() as usize, y1.floor() as usize);
        Some(Rect::new(px0, py0, px1 - px0 + 1, py1 - py0 + 1))
    }

    fn validate(&self, width: usize, height: usize) -> Result<Rect> {
        let (a, b) = self.half_axes;
        if !(a >= 1.0 && b >= 1.0) || !self.center.0.is_finite() || !self.center.1.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "shape half-axes must be >= 1, got ({a}, {b})"
            )));
        }
        self.pixel_rect(width, height).ok_or_else(|| {
            Error::InvalidPlacement(format!(
                "{} bounding box {:?} outside {width}x{height} frame",
                self.kind.name(),
                self.bbox()
            ))
        })
    }
}

/// Shape drawn at `fill` on a zero `width × height` canvas.
pub fn rasterize_shape(shape: &Shape, fill: f64, dims: (usize, usize)) -> Result<GrayImage> {
    let (width, height) = dims;
    let mut img = GrayImage::new(width, height)?;
    if !(0.0..=1.0).contains(&fill) {
        return Err(Error::InvalidArgument(format!("fill {fill} outside [0, 1]")));
    }
    let rect = shape.validate(width, height)?;
    for y in rect.y..rect.bottom() {
        for x in rect.x..rect.right() {
            if shape.contains(x, y) {
                img.set(x, y, fill);
            }
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(kind: ShapeKind, c: (f64, f64), a: (f64, f64)) -> Shape {
        Shape {
            kind,
            center: c,
            half_axes: a,
        }
    }

    #[test]
    fn unit_rectangle_is_three_by_three() {
        let img = rasterize_shape(&shape(ShapeKind::Rectangle, (4.0, 4.0), (1.0, 1.0)), 1.0, (9, 9)).unwrap();
        let ones: Vec<(usize, usize)> = (0..9)
            .flat_map(|y| (0..9).map(move |x| (x, y)))
            .filter(|&(x, y)| img.get(x, y) == 1.0)
            .collect();
        assert_eq!(ones.len(), 9);
        assert!(ones.iter().all(|&(x, y)| (3..=5).contains(&x) && (3..=5).contains(&y)));
    }

    #[test]
    fn circle_matches_inequality() {
        let r = 6.0;
        let img = rasterize_shape(&shape(ShapeKind::Ellipse, (10.0, 9.0), (r, r)), 0.7, (24, 20)).unwrap();
        for y in 0..20 {
            for x in 0..24 {
                let inside = (x as f64 - 10.0).powi(2) + (y as f64 - 9.0).powi(2) <= r * r;
                assert_eq!(img.get(x, y), if inside { 0.7 } else { 0.0 });
            }
        }
    }

    #[test]
    fn zero_fill_is_blank() {
        let img = rasterize_shape(&shape(ShapeKind::Ellipse, (5.0, 5.0), (3.0, 2.0)), 0.0, (11, 11)).unwrap();
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn outside_frame_rejected() {
        let s = shape(ShapeKind::Rectangle, (1.0, 5.0), (2.0, 2.0));
        assert!(matches!(
            rasterize_shape(&s, 1.0, (10, 10)),
            Err(Error::InvalidPlacement(_))
        ));
        let s = shape(ShapeKind::Ellipse, (5.0, 5.0), (0.5, 2.0));
        assert!(matches!(
            rasterize_shape(&s, 1.0, (10, 10)),
            Err(Error::InvalidArgument(_))
        ));
    }
}
