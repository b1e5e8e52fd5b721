//! Self-supervised pretext classifier: a fixed image descriptor feeding a small
//! fully connected network trained to separate normal images (label 0) from their
//! augmented copies (label 1) with cross entropy, SGD with momentum and weight
//! decay, and a single-cycle cosine learning-rate schedule.

use crate::error::{Error, Result};
use crate::imgcore::{GrayImage, Rect};
use crate::rng::RngHandle;
use crate::FeatureVector;
use rand::seq::SliceRandom;
use rand::Rng;

/// Label of untouched training images.
pub const LABEL_NORMAL: usize = 0;
/// Label of augmented training images.
pub const LABEL_AUGMENTED: usize = 1;

/// Grid of cell means followed by a normalized intensity histogram.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Descriptor {
    pub grid_size: usize,
    pub histogram_bins: usize,
}

impl Default for Descriptor {
    fn default() -> Self {
        Self {
            grid_size: 16,
            histogram_bins: 32,
        }
    }
}

impl Descriptor {
    pub fn dim(&self) -> usize {
        self.grid_size * self.grid_size + self.histogram_bins
    }
}

pub fn extract_features(img: &GrayImage, d: &Descriptor) -> Result<FeatureVector> {
    Ok(DescriptorCache::new(img, d)?.features())
}

/// Per-cell sums and histogram counts of one image. Images that differ from it
/// only inside a small rectangle get their descriptor by recomputing the
/// touched cells, with results bit-identical to [`extract_features`].
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorCache {
    descriptor: Descriptor,
    width: usize,
    height: usize,
    sums: Vec<f64>,
    counts: Vec<usize>,
    hist: Vec<f64>,
}

impl DescriptorCache {
    pub fn new(img: &GrayImage, d: &Descriptor) -> Result<Self> {
        let (w, h) = img.dims();
        let g = d.grid_size;
        if g == 0 || d.histogram_bins == 0 {
            return Err(Error::InvalidArgument(
                "descriptor grid and bins must be positive".into(),
            ));
        }
        if w < g || h < g {
            return Err(Error::InvalidDimensions(format!(
                "{w}x{h} image is smaller than the {g}x{g} descriptor grid"
            )));
        }
        let mut cache = Self {
            descriptor: *d,
            width: w,
            height: h,
            sums: vec![0.0; g * g],
            counts: vec![0; g * g],
            hist: vec![0.0; d.histogram_bins],
        };
        for y in 0..h {
            let row_cell = y * g / h;
            for (x, &v) in img.data()[y * w..(y + 1) * w].iter().enumerate() {
                let c = row_cell * g + x * g / w;
                cache.sums[c] += v;
                cache.counts[c] += 1;
                let b = cache.bin(v);
                cache.hist[b] += 1.0;
            }
        }
        Ok(cache)
    }

    fn bin(&self, v: f64) -> usize {
        let b = self.descriptor.histogram_bins;
        ((v * b as f64) as usize).min(b - 1)
    }

    fn assemble(&self, sums: &[f64], hist: &[f64]) -> FeatureVector {
        let n = (self.width * self.height) as f64;
        let mut out: Vec<f64> = sums.iter().zip(&self.counts).map(|(s, &c)| s / c as f64).collect();
        out.extend(hist.iter().map(|c| c / n));
        out
    }

    pub fn features(&self) -> FeatureVector {
        self.assemble(&self.sums, &self.hist)
    }

    /// Descriptor of `img`, which must equal `base` (the cached image) outside `changed`.
    pub fn features_with_changes(&self, base: &GrayImage, img: &GrayImage, changed: Rect) -> Result<FeatureVector> {
        let (w, h) = (self.width, self.height);
        if img.dims() != (w, h) || base.dims() != (w, h) {
            return Err(Error::InvalidDimensions(
                "image and base disagree with the cache".into(),
            ));
        }
        if changed.area() == 0 {
            return Ok(self.features());
        }
        if !changed.fits_in(w, h) {
            return Err(Error::InvalidDimensions(format!(
                "change rectangle {changed:?} leaves the frame"
            )));
        }
        let g = self.descriptor.grid_size;
        let mut hist = self.hist.clone();
        for y in changed.y..changed.bottom() {
            for x in changed.x..changed.right() {
                hist[self.bin(base.get(x, y))] -= 1.0;
                hist[self.bin(img.get(x, y))] += 1.0;
            }
        }
        let mut sums = self.sums.clone();
        let first_y = |cy: usize| (cy * h).div_ceil(g);
        let first_x = |cx: usize| (cx * w).div_ceil(g);
        let (cy0, cy1) = (changed.y * g / h, (changed.bottom() - 1) * g / h);
        let (cx0, cx1) = (changed.x * g / w, (changed.right() - 1) * g / w);
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                let mut acc = 0.0;
                for y in first_y(cy)..first_y(cy + 1) {
                    for &v in &img.data()[y * w + first_x(cx)..y * w + first_x(cx + 1)] {
                        acc += v;
                    }
                }
                sums[cy * g + cx] = acc;
            }
        }
        Ok(self.assemble(&sums, &hist))
    }
}

/// Per-dimension input standardization `(x − mean) / scale` with
/// `scale = max(std, floor)` over a reference set.
#[derive(Clone, Debug, PartialEq)]
pub struct InputScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputScaler {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn fit(references: &[FeatureVector], floor: f64) -> Result<Self> {
        let n = references.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "scale floor must be positive, got {floor}"
            )));
        }
        let d = references[0].len();
        if references.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidDimensions("reference vectors differ in length".into()));
        }
        let mut mean = vec![0.0; d];
        for r in references {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for r in references {
            var.iter_mut()
                .zip(r)
                .zip(&mean)
                .for_each(|((s, v), m)| *s += (v - m).powi(2));
        }
        let scale = var.iter().map(|s| (s / n as f64).sqrt().max(floor)).collect();
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<FeatureVector> {
        if x.len() != self.dim() {
            return Err(Error::InvalidDimensions(format!(
                "scaler expects {} values, got {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }
}

/// Fully connected layer; `weights` is `outputs × inputs`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (o, row) in self.weights.chunks_exact(self.inputs).enumerate() {
            let dot: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(dot + self.bias[o]);
        }
    }

    fn same_shape(&self, other: &Dense) -> bool {
        self.inputs == other.inputs && self.outputs == other.outputs
    }
}

/// Rectifier network `d_in → hidden… → 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    layers: Vec<Dense>,
}

/// Logits and the last hidden activation (the input itself when there is no hidden layer).
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    pub logits: [f64; 2],
    pub penultimate: FeatureVector,
}

impl MlpModel {
    /// Layers sized `sizes[0] → … → sizes[last]`; the last size must be 2.
    /// Weights and biases are uniform in `±1/√fan_in`.
    pub fn new(sizes: &[usize], rng: &mut RngHandle) -> Result<Self> {
        let mut model = Self::zeros(sizes)?;
        for layer in &mut model.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(model)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) || *sizes.last().unwrap() != 2 {
            return Err(Error::InvalidArgument(format!(
                "layer sizes {sizes:?} must be positive and end in 2 logits"
            )));
        }
        Ok(Self {
            layers: sizes.windows(2).map(|p| Dense::zeros(p[0], p[1])).collect(),
        })
    }

    /// Assemble from explicit layers, checking that consecutive dims agree.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let ok = !layers.is_empty()
            && layers.last().unwrap().outputs == 2
            && layers.windows(2).all(|p| p[0].outputs == p[1].inputs)
            && layers.iter().all(|l| {
                l.weights.len() == l.inputs * l.outputs
                    && l.bias.len() == l.outputs
                    && l.weights.iter().chain(&l.bias).all(|v| v.is_finite())
            });
        if !ok {
            return Err(Error::InvalidDimensions("inconsistent layer shapes".into()));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn penultimate_dim(&self) -> usize {
        self.layers.last().unwrap().inputs
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::InvalidDimensions(format!(
                "feature vector has {} components, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Activations after every layer: index 0 is the input, the last entry the logits.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.apply(acts.last().unwrap(), &mut out);
            if i < last {
                for v in out.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardOutput> {
        self.check_input(x)?;
        let mut acts = self.trace(x);
        let logits = acts.pop().unwrap();
        Ok(ForwardOutput {
            logits: [logits[0], logits[1]],
            penultimate: acts.pop().unwrap(),
        })
    }

    /// Loss and exact parameter gradients of `cross_entropy(forward(x), label)`.
    pub fn backward(&self, x: &[f64], label: usize) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros_like(self);
        let loss = self.accumulate_gradients(x, label, 1.0, &mut grads)?;
        Ok((loss, grads))
    }

    /// Add `scale · ∇loss` into `grads`; returns the loss.
    pub fn accumulate_gradients(&self, x: &[f64], label: usize, scale: f64, grads: &mut Gradients) -> Result<f64> {
        self.check_input(x)?;
        if label > 1 {
            return Err(Error::InvalidArgument(format!("label {label} is not 0 or 1")));
        }
        let acts = self.trace(x);
        let z = acts.last().unwrap();
        let logits = [z[0], z[1]];
        let loss = cross_entropy(logits, label);
        let p = softmax(logits);
        let mut delta: Vec<f64> = (0..2)
            .map(|k| scale * (p[k] - if k == label { 1.0 } else { 0.0 }))
            .collect();

        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &acts[i];
            let g = &mut grads.layers[i];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
                if d != 0.0 {
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, &a) in row.iter_mut().zip(input) {
                        *gw += d * a;
                    }
                }
            }
            if i == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (pv, &w) in prev.iter_mut().zip(row) {
                    *pv += d * w;
                }
            }
            // Rectifier derivative of the hidden layer feeding this one.
            for (pv, &a) in prev.iter_mut().zip(input) {
                if a <= 0.0 {
                    *pv = 0.0;
                }
            }
            delta = prev;
        }
        Ok(loss)
    }
}

pub fn softmax(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

/// `−log softmax(logits)[label]` with log-sum-exp stabilization.
pub fn cross_entropy(logits: [f64; 2], label: usize) -> f64 {
    let m = logits[0].max(logits[1]);
    let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    (lse - logits[label]).max(0.0)
}

/// Parameter-shaped buffers (gradients or velocities).
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            layers: model.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    fn matches(&self, model: &MlpModel) -> bool {
        self.layers.len() == model.layers.len() && self.layers.iter().zip(&model.layers).all(|(a, b)| a.same_shape(b))
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= s);
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }
}

/// SGD state: `v ← μ·v + (g + λ·θ)`, `θ ← θ − η·v`.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub velocity: Gradients,
}

impl OptimState {
    pub fn new(model: &MlpModel, learning_rate: f64, momentum: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            momentum,
            weight_decay,
            velocity: Gradients::zeros_like(model),
        }
    }
}

pub fn sgd_step(model: &mut MlpModel, grads: &Gradients, opt: &mut OptimState) -> Result<()> {
    if !grads.matches(model) || !opt.velocity.matches(model) {
        return Err(Error::InvalidDimensions(
            "gradient shapes do not match the model".into(),
        ));
    }
    let (lr, mu, wd) = (opt.learning_rate, opt.momentum, opt.weight_decay);
    for ((layer, g), v) in model
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(opt.velocity.layers.iter_mut())
    {
        let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
        let gs = g.weights.iter().chain(&g.bias);
        let vs = v.weights.iter_mut().chain(v.bias.iter_mut());
        for ((p, g), v) in params.zip(gs).zip(vs) {
            *v = mu * *v + (g + wd * *p);
            *p -= lr * *v;
        }
    }
    Ok(())
}

/// Single-cycle cosine annealing `η₀/2 · (1 + cos(π t / T))`.
pub fn cosine_lr(step: usize, total: usize, base: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::InvalidArgument("cosine schedule needs at least one step".into()));
    }
    if step > total {
        return Err(Error::InvalidArgument(format!(
            "step {step} beyond schedule length {total}"
        )));
    }
    let phase = std::f64::consts::PI * step as f64 / total as f64;
    Ok((base / 2.0 * (1.0 + phase.cos())).max(0.0))
}

/// What `batch_size` counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BatchCounting {
    /// `batch_size` normal images, i.e. `2·batch_size` loss terms.
    #[default]
    Normals,
    /// `batch_size` loss terms, i.e. `batch_size/2` normal images.
    Samples,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub batch_counting: BatchCounting,
    pub epochs: usize,
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            batch_counting: BatchCounting::Normals,
            epochs: 64,
            base_lr: 0.03,
            momentum: 0.9,
            weight_decay: 0.00003,
            hidden: vec![128, 64, 32],
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn normals_per_batch(&self) -> usize {
        match self.batch_counting {
            BatchCounting::Normals => self.batch_size,
            BatchCounting::Samples => (self.batch_size / 2).max(1),
        }
    }
}

/// Supplies descriptor features for each training item and its augmentation.
pub trait PairSource {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// `(original, augmented)` features for `items`, in the given order. The
    /// augmentation of item `i` at `epoch` must depend only on `(i, epoch)`.
    fn pairs(&self, items: &[usize], epoch: usize) -> Result<Vec<(FeatureVector, FeatureVector)>>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Learning rate at the epoch's first step.
    pub lr: f64,
    pub mean_loss: f64,
    pub batches: usize,
    /// Loss terms (originals plus augmentations) seen this epoch.
    pub terms: usize,
    /// Validation score from the monitor, if one was supplied.
    pub monitor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutput {
    pub model: MlpModel,
    pub log: Vec<EpochLog>,
    /// Epoch whose parameters were returned (the last one without a monitor).
    pub selected_epoch: usize,
}

/// Per-epoch validation hook for [`train_monitored`]; returns a score to maximize.
pub type EpochMonitor<'a> = dyn FnMut(usize, &MlpModel) -> Result<f64> + 'a;

const TAG_INIT: u64 = 0x1717;
const TAG_SHUFFLE: u64 = 0x5417;

pub fn train(source: &dyn PairSource, cfg: &TrainConfig) -> Result<TrainOutput> {
    train_monitored(source, cfg, None)
}

/// Train, optionally keeping the parameters with the highest monitor score
/// (evaluated after every epoch; ties keep the earlier epoch).
pub fn train_monitored(
    source: &dyn PairSource,
    cfg: &TrainConfig,
    mut monitor: Option<&mut EpochMonitor>,
) -> Result<TrainOutput> {
    if source.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::InvalidArgument("batch_size and epochs must be positive".into()));
    }
    let mut sizes = vec![source.dim()];
    sizes.extend(&cfg.hidden);
    sizes.push(2);
    let mut model = MlpModel::new(&sizes, &mut RngHandle::derive(cfg.seed, &[TAG_INIT]))?;
    let mut opt = OptimState::new(&model, cfg.base_lr, cfg.momentum, cfg.weight_decay);

    let n = source.len();
    let per_batch = cfg.normals_per_batch();
    let batches_per_epoch = n.div_ceil(per_batch);
    let total_steps = batches_per_epoch * cfg.epochs;
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, MlpModel)> = None;
    let mut step = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut RngHandle::derive(cfg.seed, &[TAG_SHUFFLE, epoch as u64]));
        let epoch_lr = cosine_lr(step, total_steps, cfg.base_lr)?;
        let (mut loss_sum, mut terms) = (0.0, 0usize);
        for items in order.chunks(per_batch) {
            let pairs = source.pairs(items, epoch)?;
            let mut grads = Gradients::zeros_like(&model);
            let scale = 1.0 / (2 * pairs.len()) as f64;
            for (orig, aug) in &pairs {
                loss_sum += model.accumulate_gradients(orig, LABEL_NORMAL, scale, &mut grads)?;
                loss_sum += model.accumulate_gradients(aug, LABEL_AUGMENTED, scale, &mut grads)?;
                terms += 2;
            }
            opt.learning_rate = cosine_lr(step, total_steps, cfg.base_lr)?;
            sgd_step(&mut model, &grads, &mut opt)?;
            step += 1;
        }
        let score = match monitor.as_mut() {
            Some(m) => {
                let s = m(epoch, &model)?;
                if best.as_ref().is_none_or(|(b, _, _)| s > *b) {
                    best = Some((s, epoch, model.clone()));
                }
                Some(s)
            }
            None => None,
        };
        log.push(EpochLog {
            epoch,
            lr: epoch_lr,
            mean_loss: loss_sum / terms as f64,
            batches: batches_per_epoch,
            terms,
            monitor: score,
        });
    }

    let (model, selected_epoch) = match best {
        Some((_, e, m)) => (m, e),
        None => (model, cfg.epochs - 1),
    };
    Ok(TrainOutput {
        model,
        log,
        selected_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_features() {
        let img = GrayImage::filled(32, 32, 0.5).unwrap();
        let d = Descriptor::default();
        let f = extract_features(&img, &d).unwrap();
        assert_eq!(f.len(), d.dim());
        assert!(f[..256].iter().all(|&v| v == 0.5));
        let hist = &f[256..];
        assert_eq!(hist[16], 1.0);
        assert_eq!(hist.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn cached_update_is_bit_identical() {
        let base = GrayImage::from_fn(45, 37, |x, y| ((x * 13 + y * 29) % 97) as f64 / 96.0).unwrap();
        let d = Descriptor {
            grid_size: 7,
            histogram_bins: 11,
        };
        let cache = DescriptorCache::new(&base, &d).unwrap();
        assert_eq!(cache.features(), extract_features(&base, &d).unwrap());
        for changed in [
            Rect::new(0, 0, 1, 1),
            Rect::new(10, 5, 13, 20),
            Rect::new(30, 30, 15, 7),
            Rect::new(0, 0, 45, 37),
        ] {
            let mut img = base.clone();
            for y in changed.y..changed.bottom() {
                for x in changed.x..changed.right() {
                    img.set(x, y, ((x * 5 + y * 3) % 17) as f64 / 16.0);
                }
            }
            assert_eq!(
                cache.features_with_changes(&base, &img, changed).unwrap(),
                extract_features(&img, &d).unwrap()
            );
        }
        assert!(cache
            .features_with_changes(&base, &base, Rect::new(40, 0, 6, 1))
            .is_err());
        assert_eq!(
            cache
                .features_with_changes(&base, &base, Rect::new(0, 0, 0, 0))
                .unwrap(),
            cache.features()
        );
    }

    #[test]
    fn image_smaller_than_grid_rejected() {
        let img = GrayImage::filled(8, 20, 0.5).unwrap();
        assert!(matches!(
            extract_features(&img, &Descriptor::default()),
            Err(Error::InvalidDimensions(_))
        ));
    }

    #[test]
    fn scaler_standardizes_references() {
        let refs = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let sc = InputScaler::fit(&refs, 1e-3).unwrap();
        assert_eq!(sc.mean, vec![2.0, 5.0]);
        assert_eq!(sc.scale, vec![1.0, 1e-3]);
        assert_eq!(sc.apply(&[3.0, 5.002]).unwrap()[0], 1.0);
        assert!((sc.apply(&[3.0, 5.002]).unwrap()[1] - 2.0).abs() < 1e-9);
        assert_eq!(InputScaler::identity(2).apply(&[0.5, -1.0]).unwrap(), vec![0.5, -1.0]);
        assert!(sc.apply(&[1.0]).is_err());
        assert!(InputScaler::fit(&[], 1.0).is_err());
    }

    #[test]
    fn zero_model_gives_zero_logits() {
        let m = MlpModel::zeros(&[5, 4, 3, 2]).unwrap();
        let out = m.forward(&[0.3, -1.0, 2.0, 0.0, 1.0]).unwrap();
        assert_eq!(out.logits, [0.0, 0.0]);
        assert_eq!(out.penultimate, vec![0.0; 3]);
        assert!(m.forward(&[1.0]).is_err());
    }

    #[test]
    fn hand_computed_forward() {
        // Single hidden layer of 2 units, then 2 logits.
        let l1 = Dense {
            inputs: 2,
            outputs: 2,
            weights: vec![1.0, 0.0, 0.0, 1.0],
            bias: vec![0.0, -1.0],
        };
        let l2 = Dense {
            inputs: 2,
            outputs: 2,
            weights: vec![2.0, 1.0, -1.0, 3.0],
            bias: vec![0.5, 0.0],
        };
        let m = MlpModel::from_layers(vec![l1, l2]).unwrap();
        // h = relu([0.5, 0.25 - 1]) = [0.5, 0]; z = [2*0.5 + 0.5, -0.5].
        let out = m.forward(&[0.5, 0.25]).unwrap();
        assert_eq!(out.penultimate, vec![0.5, 0.0]);
        assert_eq!(out.logits, [1.5, -0.5]);
        let p = softmax(out.logits);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_values() {
        assert!((cross_entropy([0.0, 0.0], 0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((cross_entropy([0.0, 0.0], 1) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(cross_entropy([20.0, -20.0], 0) < 1e-8);
        assert!(cross_entropy([800.0, -800.0], 1).is_finite());
    }

    #[test]
    fn zero_input_gives_zero_first_layer_weight_grads() {
        let mut rng = RngHandle::new(3);
        let mut m = MlpModel::new(&[4, 6, 2], &mut rng).unwrap();
        for l in m.layers_mut() {
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        let (_, g) = m.backward(&[0.0; 4], 1).unwrap();
        assert!(g.layers[0].weights.iter().all(|&v| v == 0.0));
        assert!(g.matches(&m));
    }

    #[test]
    fn sgd_zero_grad_decays_velocity_only() {
        let mut m = MlpModel::new(&[3, 2], &mut RngHandle::new(1)).unwrap();
        let before = m.clone();
        let zero = Gradients::zeros_like(&m);
        let mut opt = OptimState::new(&m, 0.1, 0.9, 0.0);
        sgd_step(&mut m, &zero, &mut opt).unwrap();
        assert_eq!(m, before);
        assert_eq!(opt.velocity, zero);

        opt.velocity.layers[0].weights[0] = 1.0;
        sgd_step(&mut m, &zero, &mut opt).unwrap();
        assert_eq!(opt.velocity.layers[0].weights[0], 0.9);
    }

    #[test]
    fn sgd_two_step_recurrence() {
        let mut m = MlpModel::zeros(&[1, 2]).unwrap();
        let mut g = Gradients::zeros_like(&m);
        g.layers[0].weights[0] = 0.5;
        let mut opt = OptimState::new(&m, 0.03, 0.9, 0.0);
        sgd_step(&mut m, &g, &mut opt).unwrap();
        sgd_step(&mut m, &g, &mut opt).unwrap();
        // v1 = g, v2 = 0.9 g + g; delta = -lr (v1 + v2).
        let expected = -0.03 * (0.5 + (0.9 * 0.5 + 0.5));
        assert!((m.layers()[0].weights[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn sgd_weight_decay_closed_form() {
        let mut m = MlpModel::zeros(&[2, 2]).unwrap();
        m.layers_mut()[0].weights = vec![1.0, -2.0, 0.5, 4.0];
        let before = m.layers()[0].weights.clone();
        let zero = Gradients::zeros_like(&m);
        let mut opt = OptimState::new(&m, 0.03, 0.9, 0.00003);
        sgd_step(&mut m, &zero, &mut opt).unwrap();
        for (a, b) in m.layers()[0].weights.iter().zip(before) {
            assert!((a - b * (1.0 - 0.03 * 0.00003)).abs() < 1e-15);
        }
        let wrong = Gradients::zeros_like(&MlpModel::zeros(&[3, 2]).unwrap());
        assert!(matches!(
            sgd_step(&mut m, &wrong, &mut opt),
            Err(Error::InvalidDimensions(_))
        ));
    }

    #[test]
    fn cosine_schedule_points() {
        assert_eq!(cosine_lr(0, 100, 0.03).unwrap(), 0.03);
        assert!((cosine_lr(50, 100, 0.03).unwrap() - 0.015).abs() < 1e-15);
        assert!(cosine_lr(100, 100, 0.03).unwrap().abs() < 1e-15);
        assert!(matches!(cosine_lr(0, 0, 0.03), Err(Error::InvalidArgument(_))));
        let lrs: Vec<f64> = (0..=37).map(|t| cosine_lr(t, 37, 0.03).unwrap()).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    /// Two well separated Gaussian-ish clusters standing in for originals and augmentations.
    struct Clusters {
        n: usize,
    }

    impl PairSource for Clusters {
        fn dim(&self) -> usize {
            4
        }
        fn len(&self) -> usize {
            self.n
        }
        fn pairs(&self, items: &[usize], epoch: usize) -> Result<Vec<(FeatureVector, FeatureVector)>> {
            Ok(items
                .iter()
                .map(|&i| {
                    let mut r = RngHandle::derive(99, &[i as u64, epoch as u64]);
                    let a: Vec<f64> = (0..4).map(|_| r.gen_range(-0.1..0.1)).collect();
                    let b: Vec<f64> = (0..4).map(|_| 1.0 + r.gen_range(-0.1..0.1)).collect();
                    (a, b)
                })
                .collect())
        }
    }

    #[test]
    fn separable_clusters_loss_decreases() {
        let cfg = TrainConfig {
            epochs: 10,
            hidden: vec![8, 8, 4],
            batch_size: 16,
            seed: 4,
            ..TrainConfig::default()
        };
        let out = train(&Clusters { n: 128 }, &cfg).unwrap();
        let losses: Vec<f64> = out.log.iter().map(|e| e.mean_loss).collect();
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
        let again = train(&Clusters { n: 128 }, &cfg).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn batch_pairs_double_terms() {
        let cfg = TrainConfig {
            epochs: 1,
            hidden: vec![4],
            ..TrainConfig::default()
        };
        let out = train(&Clusters { n: 64 }, &cfg).unwrap();
        assert_eq!(out.log[0].batches, 1);
        assert_eq!(out.log[0].terms, 128);
        let cfg = TrainConfig {
            batch_counting: BatchCounting::Samples,
            ..cfg
        };
        let out = train(&Clusters { n: 64 }, &cfg).unwrap();
        assert_eq!(out.log[0].batches, 2);
        assert!(matches!(train(&Clusters { n: 0 }, &cfg), Err(Error::EmptyDataset)));
    }

    #[test]
    fn monitor_keeps_best_epoch() {
        let cfg = TrainConfig {
            epochs: 4,
            hidden: vec![4],
            batch_size: 32,
            ..TrainConfig::default()
        };
        let mut scores = [0.2, 0.9, 0.9, 0.1].into_iter();
        let mut mon = |_e: usize, _m: &MlpModel| Ok(scores.next().unwrap());
        let out = train_monitored(&Clusters { n: 64 }, &cfg, Some(&mut mon)).unwrap();
        assert_eq!(out.selected_epoch, 1);
        assert_eq!(out.log[3].monitor, Some(0.1));
    }
}
