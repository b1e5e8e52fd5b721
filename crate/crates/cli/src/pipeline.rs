//! End-to-end experiment: phantom corpus, pretext training, KDE scoring,
//! thresholding and evaluation over several seeded runs plus their ensemble.

use crate::config::{Mode, PipelineConfig, ScoreNormalization};
use crate::error::{CliError, CliResult, StageContext};
use anatpaste_core::augment::{anat_paste_ablated, cut_paste_scar, Ablation, AnatPasteConfig, ScarConfig};
use anatpaste_core::classifier::{
    extract_features, train_monitored, Descriptor, DescriptorCache, EpochLog, EpochMonitor, InputScaler, MlpModel,
    PairSource, TrainConfig,
};
use anatpaste_core::imgcore::{BinaryMask, GrayImage, Rect};
use anatpaste_core::lungseg::{segment_lungs, SegConfig};
use anatpaste_core::metrics::{
    auc, best_f1_threshold, metrics_at, metrics_by_group, roc_curve, LabeledScore, LabeledScores, MetricsReport,
    RocPoint,
};
use anatpaste_core::phantom::{generate, PhantomClass, PhantomSample};
use anatpaste_core::scoring::{ensemble_average, normalize_scores, KdeModel, Normalization, ScoreSet};
use anatpaste_core::{Error, FeatureVector, RngHandle};
use rayon::prelude::*;
use std::collections::{BTreeMap, HashSet};

const TAG_AUGMENT: u64 = 0xA0;
const AUGMENT_RETRIES: u64 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Item {
    pub id: String,
    pub split: Split,
    pub sample: PhantomSample,
    /// Lesion-size group for abnormal items.
    pub group: Option<String>,
}

impl Item {
    pub fn label(&self) -> u8 {
        self.sample.label()
    }

    pub fn image(&self) -> &GrayImage {
        &self.sample.image
    }
}

/// Generated phantoms and the segmented lung masks of the training split.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub train: Vec<Item>,
    pub val: Vec<Item>,
    pub test: Vec<Item>,
    pub train_lungs: Vec<BinaryMask>,
}

impl Corpus {
    pub fn items(&self) -> impl Iterator<Item = &Item> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }
}

/// Thread pool with `workers` threads (at least one).
pub fn pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))
}

/// Phantom indices: training normals first, then validation normals and
/// abnormals, then test normals and abnormals.
pub fn build_corpus(cfg: &PipelineConfig) -> CliResult<Corpus> {
    let s = &cfg.splits;
    let layout = [
        (Split::Train, PhantomClass::Normal, s.train),
        (Split::Val, PhantomClass::Normal, s.val_normal),
        (Split::Val, PhantomClass::Abnormal, s.val_abnormal),
        (Split::Test, PhantomClass::Normal, s.test_normal),
        (Split::Test, PhantomClass::Abnormal, s.test_abnormal),
    ];
    let mut jobs = Vec::new();
    for (split, class, n) in layout {
        for _ in 0..n {
            jobs.push((jobs.len(), split, class));
        }
    }
    let scale = cfg.phantom.width.min(cfg.phantom.height) as f64 / 256.0;
    let items = jobs
        .par_iter()
        .map(|&(index, split, class)| {
            let sample = generate(&cfg.phantom, index, class).stage("phantom", None)?;
            let group = (class == PhantomClass::Abnormal).then(|| {
                let r = sample.lesions.iter().map(|l| l.radius).fold(0.0, f64::max);
                if r < cfg.lesion_group_radius * scale {
                    "small"
                } else {
                    "large"
                }
                .to_string()
            });
            Ok(Item {
                id: format!("p{index:05}"),
                split,
                sample,
                group,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let seg = cfg.seg_for(cfg.phantom.width, cfg.phantom.height);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for item in items {
        match item.split {
            Split::Train => train.push(item),
            Split::Val => val.push(item),
            Split::Test => test.push(item),
        }
    }
    let train_lungs = if cfg.mode.uses_lungs() {
        segment_all(train.iter().map(Item::image).collect::<Vec<_>>().as_slice(), &seg)?
    } else {
        train
            .iter()
            .map(|i| BinaryMask::new(i.image().width(), i.image().height()))
            .collect()
    };
    let corpus = Corpus {
        train,
        val,
        test,
        train_lungs,
    };
    let val_ids: HashSet<&str> = corpus.val.iter().map(|i| i.id.as_str()).collect();
    assert!(
        corpus.test.iter().all(|i| !val_ids.contains(i.id.as_str())),
        "validation and test ids overlap"
    );
    Ok(corpus)
}

pub fn segment_all(images: &[&GrayImage], seg: &SegConfig) -> CliResult<Vec<BinaryMask>> {
    images
        .par_iter()
        .map(|img| segment_lungs(img, seg).map(|r| r.mask).stage("segment", None))
        .collect()
}

/// Augmented training pairs for one run. Each augmentation uses its own stream
/// keyed by `(seed, epoch, item)`, so results do not depend on scheduling.
pub struct AugmentedPairs<'a> {
    pub images: Vec<&'a GrayImage>,
    pub lungs: &'a [BinaryMask],
    pub originals: &'a [FeatureVector],
    pub caches: &'a [DescriptorCache],
    pub descriptor: Descriptor,
    pub scaler: &'a InputScaler,
    pub mode: Mode,
    pub aug: &'a AnatPasteConfig,
    pub scar: &'a ScarConfig,
    pub seed: u64,
}

/// One augmentation of `img` in `mode`, retried on fresh streams when no placement fits.
pub fn augment_one(
    img: &GrayImage,
    lung: &BinaryMask,
    mode: Mode,
    aug: &AnatPasteConfig,
    scar: &ScarConfig,
    seed: u64,
    tags: &[u64],
) -> anatpaste_core::Result<anatpaste_core::augment::AugmentOutcome> {
    let mut last = Error::NoValidPlacement { attempts: 0 };
    for attempt in 0..AUGMENT_RETRIES {
        let mut path = tags.to_vec();
        path.push(attempt);
        let mut rng = RngHandle::derive(seed, &path);
        let out = match mode {
            Mode::Anat => anat_paste_ablated(img, lung, aug, &mut rng, Ablation::None),
            Mode::AnatNoSeg => anat_paste_ablated(img, lung, aug, &mut rng, Ablation::NoSegmentation),
            Mode::AnatNoBlur => anat_paste_ablated(img, lung, aug, &mut rng, Ablation::NoBlur),
            Mode::CutPasteScar => cut_paste_scar(img, scar, &mut rng),
        };
        match out {
            Err(e @ Error::NoValidPlacement { .. }) => last = e,
            other => return other,
        }
    }
    Err(last)
}

impl PairSource for AugmentedPairs<'_> {
    fn dim(&self) -> usize {
        self.descriptor.dim()
    }

    fn len(&self) -> usize {
        self.images.len()
    }

    fn pairs(&self, items: &[usize], epoch: usize) -> anatpaste_core::Result<Vec<(FeatureVector, FeatureVector)>> {
        items
            .par_iter()
            .map(|&i| {
                let out = augment_one(
                    self.images[i],
                    &self.lungs[i],
                    self.mode,
                    self.aug,
                    self.scar,
                    self.seed,
                    &[TAG_AUGMENT, epoch as u64, i as u64],
                )?;
                let changed = changed_rect(self.images[i], &out.anomaly_image);
                let raw = self.caches[i].features_with_changes(self.images[i], &out.anomaly_image, changed)?;
                let aug = self.scaler.apply(&raw)?;
                Ok((self.originals[i].clone(), aug))
            })
            .collect()
    }
}

/// Bounding box of the pixels where `a` and `b` differ (empty when identical).
pub fn changed_rect(a: &GrayImage, b: &GrayImage) -> Rect {
    let w = a.width();
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for (y, (ra, rb)) in a.data().chunks(w).zip(b.data().chunks(w)).enumerate() {
        if let Some(first) = ra.iter().zip(rb).position(|(p, q)| p != q) {
            let last = w
                - 1
                - ra.iter()
                    .rev()
                    .zip(rb.iter().rev())
                    .position(|(p, q)| p != q)
                    .unwrap_or(0);
            x0 = x0.min(first);
            x1 = x1.max(last);
            y0 = y0.min(y);
            y1 = y;
        }
    }
    if x0 == usize::MAX {
        Rect::new(0, 0, 0, 0)
    } else {
        Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
    }
}

pub fn descriptors(items: &[Item], d: &Descriptor) -> CliResult<Vec<FeatureVector>> {
    items
        .par_iter()
        .map(|i| extract_features(i.image(), d).stage("features", None))
        .collect()
}

/// Penultimate-layer embeddings.
pub fn embed(
    model: &MlpModel,
    ids: &[&str],
    features: &[FeatureVector],
) -> anatpaste_core::Result<Vec<(String, FeatureVector)>> {
    features
        .par_iter()
        .zip(ids.par_iter())
        .map(|(f, id)| Ok((id.to_string(), model.forward(f)?.penultimate)))
        .collect()
}

pub fn kde_scores(
    model: &KdeModel,
    queries: &[(String, FeatureVector)],
    norm: Normalization,
) -> anatpaste_core::Result<ScoreSet> {
    let raws = queries
        .par_iter()
        .map(|(_, z)| model.raw_score(z))
        .collect::<anatpaste_core::Result<Vec<_>>>()?;
    normalize_scores(queries.iter().map(|(id, _)| id.clone()).collect(), raws, norm)
}

pub fn labeled(set: &ScoreSet, items: &[Item]) -> anatpaste_core::Result<LabeledScores> {
    LabeledScores::new(
        set.entries
            .iter()
            .zip(items)
            .map(|(e, item)| {
                debug_assert_eq!(e.id, item.id);
                LabeledScore {
                    id: e.id.clone(),
                    score: e.score,
                    label: item.label(),
                    group: item.group.clone(),
                }
            })
            .collect(),
    )
}

/// Threshold choice, test metrics and curves for one score source.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub val: ScoreSet,
    pub test: ScoreSet,
    pub threshold: f64,
    /// Validation F1 at `threshold`.
    pub val_f1: f64,
    pub report: MetricsReport,
    pub roc: Vec<RocPoint>,
    pub groups: BTreeMap<String, MetricsReport>,
}

fn evaluate(
    cfg: &PipelineConfig,
    corpus: &Corpus,
    val: ScoreSet,
    test: ScoreSet,
    run: Option<usize>,
) -> CliResult<Evaluation> {
    let val_ls = labeled(&val, &corpus.val).stage("threshold", run)?;
    let (threshold, val_f1) = match cfg.threshold {
        Some(t) => (t, metrics_at(&val_ls, t).f1),
        None => best_f1_threshold(&val_ls).stage("threshold", run)?,
    };
    let test_ls = labeled(&test, &corpus.test).stage("evaluate", run)?;
    let report = metrics_at(&test_ls, threshold);
    let roc = roc_curve(&test_ls).stage("evaluate", run)?;
    let groups = metrics_by_group(&test_ls, threshold);
    Ok(Evaluation {
        val,
        test,
        threshold,
        val_f1,
        report,
        roc,
        groups,
    })
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub model: MlpModel,
    pub log: Vec<EpochLog>,
    pub selected_epoch: usize,
    pub train_embeddings: Vec<(String, FeatureVector)>,
    pub val_embeddings: Vec<(String, FeatureVector)>,
    pub test_embeddings: Vec<(String, FeatureVector)>,
    pub eval: Evaluation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample standard deviation (zero for a single value).
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub mode: Mode,
    pub runs: Vec<RunResult>,
    pub ensemble: Evaluation,
    pub auc: MeanStd,
    pub accuracy: MeanStd,
    pub f1: MeanStd,
}

impl ExperimentResult {
    pub fn run_aucs(&self) -> Vec<f64> {
        self.runs
            .iter()
            .map(|r| r.eval.report.auc.unwrap_or(f64::NAN))
            .collect()
    }

    pub fn ensemble_auc(&self) -> f64 {
        self.ensemble.report.auc.unwrap_or(f64::NAN)
    }
}

/// Seed of run `r` (0-based): the base seed plus the run index.
pub fn run_seed(base: u64, r: usize) -> u64 {
    base.wrapping_add(r as u64)
}

fn ids(items: &[Item]) -> Vec<&str> {
    items.iter().map(|i| i.id.as_str()).collect()
}

pub fn run_once(cfg: &PipelineConfig, corpus: &Corpus, feats: &SplitFeatures, run: usize) -> CliResult<RunResult> {
    let seed = run_seed(cfg.seed, run);
    let r = Some(run);
    let source = AugmentedPairs {
        images: corpus.train.iter().map(Item::image).collect(),
        lungs: &corpus.train_lungs,
        originals: &feats.train,
        caches: &feats.train_caches,
        descriptor: cfg.descriptor,
        scaler: &feats.scaler,
        mode: cfg.mode,
        aug: &cfg.aug,
        scar: &cfg.scar,
        seed,
    };
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let val_ids = ids(&corpus.val);
    let mut monitor = |_epoch: usize, model: &MlpModel| -> anatpaste_core::Result<f64> {
        let train = embed(model, &ids(&corpus.train), &feats.train)?;
        let kde = KdeModel::fit_with_floor(
            &train.iter().map(|(_, z)| z.clone()).collect::<Vec<_>>(),
            cfg.bandwidth,
            cfg.std_floor,
        )?;
        let val = kde_scores(&kde, &embed(model, &val_ids, &feats.val)?, Normalization::Query)?;
        auc(&labeled(&val, &corpus.val)?)
    };
    let monitor: Option<&mut EpochMonitor> = if cfg.checkpoint_best { Some(&mut monitor) } else { None };
    let out = train_monitored(&source, &train_cfg, monitor).stage("train", r)?;

    let train_embeddings = embed(&out.model, &ids(&corpus.train), &feats.train).stage("embed", r)?;
    let val_embeddings = embed(&out.model, &val_ids, &feats.val).stage("embed", r)?;
    let test_embeddings = embed(&out.model, &ids(&corpus.test), &feats.test).stage("embed", r)?;
    let refs: Vec<FeatureVector> = train_embeddings.iter().map(|(_, z)| z.clone()).collect();
    let kde = KdeModel::fit_with_floor(&refs, cfg.bandwidth, cfg.std_floor).stage("kde", r)?;
    let val = kde_scores(&kde, &val_embeddings, Normalization::Query).stage("score", r)?;
    let test_norm = match cfg.normalization {
        ScoreNormalization::Validation => Normalization::Frozen {
            min: val.normalization.0,
            max: val.normalization.1,
        },
        ScoreNormalization::Query => Normalization::Query,
    };
    let test = kde_scores(&kde, &test_embeddings, test_norm).stage("score", r)?;
    let eval = evaluate(cfg, corpus, val, test, r)?;
    Ok(RunResult {
        run,
        seed,
        model: out.model,
        log: out.log,
        selected_epoch: out.selected_epoch,
        train_embeddings,
        val_embeddings,
        test_embeddings,
        eval,
    })
}

/// Network inputs of every split: descriptors passed through the input scaler
/// fitted on the training normals.
#[derive(Clone, Debug)]
pub struct SplitFeatures {
    pub scaler: InputScaler,
    pub train_caches: Vec<DescriptorCache>,
    pub train: Vec<FeatureVector>,
    pub val: Vec<FeatureVector>,
    pub test: Vec<FeatureVector>,
}

impl SplitFeatures {
    pub fn compute(corpus: &Corpus, cfg: &PipelineConfig) -> CliResult<Self> {
        let d = &cfg.descriptor;
        let train_caches = corpus
            .train
            .par_iter()
            .map(|i| DescriptorCache::new(i.image(), d).stage("features", None))
            .collect::<CliResult<Vec<_>>>()?;
        let train: Vec<FeatureVector> = train_caches.iter().map(DescriptorCache::features).collect();
        let scaler = match cfg.input_scale_floor {
            Some(floor) => InputScaler::fit(&train, floor).stage("features", None)?,
            None => InputScaler::identity(d.dim()),
        };
        let apply = |xs: Vec<FeatureVector>| -> CliResult<Vec<FeatureVector>> {
            xs.iter().map(|x| scaler.apply(x).stage("features", None)).collect()
        };
        Ok(Self {
            train: apply(train)?,
            val: apply(descriptors(&corpus.val, d)?)?,
            test: apply(descriptors(&corpus.test, d)?)?,
            scaler,
            train_caches,
        })
    }
}

/// All runs of `cfg.mode` on `corpus`, then their ensemble. Runs execute one
/// after another; parallelism lives inside each stage.
pub fn run_experiment(cfg: &PipelineConfig, corpus: &Corpus, feats: &SplitFeatures) -> CliResult<ExperimentResult> {
    cfg.validate()?;
    if corpus.val.is_empty() || corpus.test.is_empty() {
        return Err(CliError::Config("validation and test splits must be non-empty".into()));
    }
    let runs = (0..cfg.runs)
        .map(|r| {
            log::info!(
                "{} run {}/{} (seed {})",
                cfg.mode,
                r + 1,
                cfg.runs,
                run_seed(cfg.seed, r)
            );
            run_once(cfg, corpus, feats, r)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let val_sets: Vec<ScoreSet> = runs.iter().map(|r| r.eval.val.clone()).collect();
    let test_sets: Vec<ScoreSet> = runs.iter().map(|r| r.eval.test.clone()).collect();
    let ens_val = ensemble_average(&val_sets).stage("ensemble", None)?;
    let ens_test = ensemble_average(&test_sets).stage("ensemble", None)?;
    let ensemble = evaluate(cfg, corpus, ens_val, ens_test, None)?;
    let pick = |f: fn(&MetricsReport) -> f64| MeanStd::of(&runs.iter().map(|r| f(&r.eval.report)).collect::<Vec<_>>());
    Ok(ExperimentResult {
        mode: cfg.mode,
        auc: pick(|m| m.auc.unwrap_or(f64::NAN)),
        accuracy: pick(|m| m.accuracy),
        f1: pick(|m| m.f1),
        runs,
        ensemble,
    })
}

/// Corpus generation and every run, executed on `workers` threads.
pub fn run_pipeline(cfg: &PipelineConfig, workers: usize) -> CliResult<(Corpus, ExperimentResult)> {
    cfg.validate()?;
    pool(workers)?.install(|| {
        let corpus = build_corpus(cfg)?;
        let feats = SplitFeatures::compute(&corpus, cfg)?;
        let result = run_experiment(cfg, &corpus, &feats)?;
        Ok((corpus, result))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.phantom.width = 64;
        cfg.phantom.height = 64;
        cfg.phantom.level_jitter = 0.0;
        cfg.phantom.exposure_gradient = 0.0;
        cfg.splits = crate::config::Splits {
            train: 12,
            val_normal: 4,
            val_abnormal: 4,
            test_normal: 4,
            test_abnormal: 4,
        };
        cfg.runs = 2;
        cfg.train.epochs = 2;
        cfg.train.batch_size = 4;
        cfg.train.hidden = vec![8, 4];
        cfg.descriptor = Descriptor {
            grid_size: 8,
            histogram_bins: 8,
        };
        cfg
    }

    #[test]
    fn corpus_layout_and_labels() {
        let cfg = tiny();
        let c = build_corpus(&cfg).unwrap();
        assert_eq!((c.train.len(), c.val.len(), c.test.len()), (12, 8, 8));
        assert!(c.train.iter().all(|i| i.label() == 0 && i.group.is_none()));
        assert_eq!(c.val.iter().filter(|i| i.label() == 1).count(), 4);
        assert!(c.test.iter().filter(|i| i.label() == 1).all(|i| i.group.is_some()));
        assert_eq!(c.train_lungs.len(), 12);
        assert!(c.train_lungs.iter().all(|m| !m.is_empty()));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cfg = tiny();
        let (_, a) = run_pipeline(&cfg, 1).unwrap();
        let (_, b) = run_pipeline(&cfg, 3).unwrap();
        assert_eq!(a.ensemble.test, b.ensemble.test);
        for (x, y) in a.runs.iter().zip(&b.runs) {
            assert_eq!(x.model, y.model);
            assert_eq!(x.eval.test, y.eval.test);
        }
    }

    #[test]
    fn identical_run_seeds_give_ensemble_equal_to_single_run() {
        let mut cfg = tiny();
        cfg.runs = 1;
        let (corpus, single) = run_pipeline(&cfg, 2).unwrap();
        let feats = SplitFeatures::compute(&corpus, &cfg).unwrap();
        let again = run_once(&cfg, &corpus, &feats, 0).unwrap();
        let ens = ensemble_average(&[again.eval.test.clone(), single.runs[0].eval.test.clone()]).unwrap();
        assert_eq!(ens.scores(), single.runs[0].eval.test.scores());
        assert_eq!(single.ensemble.report, single.runs[0].eval.report);
    }

    #[test]
    fn changed_rect_bounds_differences() {
        let a = GrayImage::new(10, 8).unwrap();
        assert_eq!(changed_rect(&a, &a).area(), 0);
        let mut b = a.clone();
        b.set(3, 2, 0.5);
        b.set(7, 5, 0.1);
        assert_eq!(changed_rect(&a, &b), Rect::new(3, 2, 5, 4));
        b.set(0, 7, 1.0);
        assert_eq!(changed_rect(&a, &b), Rect::new(0, 2, 8, 6));
    }

    #[test]
    fn mean_std() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.std, 1.0);
        assert_eq!(MeanStd::of(&[4.0]).std, 0.0);
    }
}
