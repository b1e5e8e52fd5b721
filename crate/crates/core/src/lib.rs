//! Anatomy-aware paste augmentation for self-supervised anomaly detection on chest
//! radiographs, with the supporting segmentation, scoring and evaluation stages.
//!
//! * [`imgcore`] pixel primitives (CLAHE, Otsu, morphology, labeling, blur, shapes)
//! * [`lungseg`] lung-field mask extraction
//! * [`augment`] AnatPaste, its ablations and the CutPaste-Scar baseline
//! * [`classifier`] descriptor features and the pretext classifier
//! * [`scoring`] kernel density anomaly scores and ensembles
//! * [`metrics`] ROC / AUC / F1 evaluation
//! * [`phantom`] synthetic test images with ground truth

pub mod augment;
pub mod classifier;
mod error;
pub mod imgcore;
pub mod lungseg;
pub mod metrics;
pub mod phantom;
pub mod rng;
pub mod scoring;

pub use error::{Error, Result};
pub use rng::RngHandle;

/// Real-valued feature vector.
pub type FeatureVector = Vec<f64>;
