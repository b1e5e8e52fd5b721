//! Otsu threshold selection and binarization on the 256-bin histogram.

use super::image::{intensity_bin, BinaryMask, GrayImage, HIST_BINS};
use crate::error::{Error, Result};
use std::cmp::Ordering;

/// Which side of the threshold becomes foreground.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    /// Foreground where `bin(v) <= threshold`.
    Below,
    /// Foreground where `bin(v) > threshold`.
    Above,
}

pub fn histogram(img: &GrayImage) -> [u64; HIST_BINS] {
    let mut hist = [0u64; HIST_BINS];
    for &v in img.data() {
        hist[intensity_bin(v)] += 1;
    }
    hist
}

/// Between-class variance of a split, kept as an exact ratio
/// `(n·s0 − S·n0)² / (n0·n1)` (the common `1/n²` factor is dropped).
#[derive(Clone, Copy, Debug)]
pub(crate) struct SplitScore {
    num: u128,
    den: u128,
}

impl SplitScore {
    pub(crate) fn new(n: u64, total_sum: u64, n0: u64, s0: u64) -> Self {
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            return Self { num: 0, den: 1 };
        }
        let diff = (n as i128 * s0 as i128 - total_sum as i128 * n0 as i128).unsigned_abs();
        Self {
            num: diff * diff,
            den: n0 as u128 * n1 as u128,
        }
    }

    fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub(crate) fn cmp(&self, other: &Self) -> Ordering {
        match (self.num.checked_mul(other.den), other.num.checked_mul(self.den)) {
            (Some(a), Some(b)) => a.cmp(&b),
            // Very large images: fall back to floating point.
            _ => {
                let a = self.num as f64 / self.den as f64;
                let b = other.num as f64 / other.den as f64;
                a.total_cmp(&b)
            }
        }
    }
}

/// Bin maximizing between-class variance when class 0 is `bins <= t`.
/// Ties go to the lowest bin. A histogram with one occupied bin is `Degenerate`.
pub fn otsu_threshold(img: &GrayImage) -> Result<u8> {
    let hist = histogram(img);
    let n: u64 = hist.iter().sum();
    let total_sum: u64 = hist.iter().enumerate().map(|(b, &c)| b as u64 * c).sum();

    let mut best: Option<(usize, SplitScore)> = None;
    let (mut n0, mut s0) = (0u64, 0u64);
    for (t, &count) in hist.iter().enumerate() {
        n0 += count;
        s0 += t as u64 * count;
        let score = SplitScore::new(n, total_sum, n0, s0);
        match &best {
            Some((_, b)) if score.cmp(b) != Ordering::Greater => {}
            _ => best = Some((t, score)),
        }
    }
    match best {
        Some((t, score)) if !score.is_zero() => Ok(t as u8),
        _ => Err(Error::Degenerate(
            "histogram has a single occupied bin; Otsu threshold undefined".into(),
        )),
    }
}

pub fn binarize(img: &GrayImage, threshold: u8, polarity: Polarity) -> BinaryMask {
    let t = threshold as usize;
    let data = img
        .data()
        .iter()
        .map(|&v| {
            let b = intensity_bin(v);
            match polarity {
                Polarity::Below => b <= t,
                Polarity::Above => b > t,
            }
        })
        .collect();
    BinaryMask::from_vec(img.width(), img.height(), data).expect("same dims")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_image_is_separated() {
        let img = GrayImage::from_vec(2, 2, vec![0.1, 0.1, 0.9, 0.9]).unwrap();
        let t = otsu_threshold(&img).unwrap() as usize;
        assert!(t >= intensity_bin(0.1) && t < intensity_bin(0.9));
        // Every separating bin scores the same; the lowest wins.
        assert_eq!(t, intensity_bin(0.1));
        let mask = binarize(&img, t as u8, Polarity::Below);
        assert_eq!(mask.data(), &[true, true, false, false]);
    }

    #[test]
    fn constant_image_is_degenerate() {
        let img = GrayImage::filled(8, 8, 0.5).unwrap();
        assert!(matches!(otsu_threshold(&img), Err(Error::Degenerate(_))));
    }

    #[test]
    fn binarize_edges() {
        let zeros = GrayImage::filled(3, 3, 0.0).unwrap();
        assert_eq!(binarize(&zeros, 0, Polarity::Below).count(), 9);
        let ones = GrayImage::filled(3, 3, 1.0).unwrap();
        assert_eq!(binarize(&ones, 0, Polarity::Below).count(), 0);
        assert_eq!(binarize(&ones, 0, Polarity::Above).count(), 9);
        let pair = GrayImage::from_vec(2, 1, vec![0.1, 0.9]).unwrap();
        let m = binarize(&pair, intensity_bin(0.5) as u8, Polarity::Below);
        assert_eq!(m.data(), &[true, false]);
    }

    #[test]
    fn split_score_ordering_is_exact() {
        let a = SplitScore::new(4, 2, 2, 0);
        let b = SplitScore::new(4, 2, 1, 0);
        assert_eq!(a.cmp(&b), Ordering::Greater);
        assert_eq!(a.cmp(&a), Ordering::Equal);
    }
}
