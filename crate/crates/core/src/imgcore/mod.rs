//! Pixel-level primitives: CLAHE, Otsu thresholding, binary morphology,
//! border clearing, connected components, Gaussian blur and shape rasterization.

mod blur;
mod clahe;
mod components;
mod image;
mod morphology;
mod shape;
mod threshold;

pub(crate) use blur::blur_window;
pub use blur::{gaussian_blur, gaussian_kernel};
pub use clahe::{clahe, ClaheParams};
pub use components::{clear_border, connected_components, Connectivity, LabelMap};
pub use image::{intensity_bin, BinaryMask, Dimensioned, GrayImage, Rect, HIST_BINS};
pub use morphology::{dilate, erode, open, ElementShape, StructuringElement};
pub use shape::{rasterize_shape, Shape, ShapeKind};
pub use threshold::{binarize, histogram, otsu_threshold, Polarity};
