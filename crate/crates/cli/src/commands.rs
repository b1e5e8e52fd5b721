//! Subcommands and their argument definitions.

use crate::config::{Mode, PipelineConfig};
use crate::error::{CliError, CliResult, StageContext};
use crate::io::{self, Checkpoint, ScoreRow};
use crate::pipeline::{self, augment_one, AugmentedPairs, Evaluation, ExperimentResult, Item, RunResult};
use anatpaste_core::classifier::{train, DescriptorCache, InputScaler, TrainConfig};
use anatpaste_core::imgcore::{BinaryMask, GrayImage};
use anatpaste_core::lungseg::{segment_lungs_traced, SegResult};
use anatpaste_core::metrics::{
    auc, best_f1_threshold, metrics_at, roc_curve, LabeledScore, LabeledScores, MetricsReport, RocPoint,
};
use anatpaste_core::phantom::{generate, PhantomClass, PhantomSample};
use anatpaste_core::scoring::{KdeModel, Normalization};
use anatpaste_core::FeatureVector;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use std::collections::HashMap;
use std::path::{Path, PathBuf};

const TAG_CLI_AUGMENT: u64 = 0xA6;

#[derive(Debug, Parser)]
#[command(
    name = "anatpaste",
    version,
    about = "Lung-constrained paste augmentation for chest X-ray anomaly detection"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub sets: Vec<String>,
    /// Base seed (for `phantom`, the corpus seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Worker threads.
    #[arg(long, default_value_t = 1, global = true)]
    pub parallel: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus with ground-truth masks and a manifest.
    Phantom {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        normal: usize,
        #[arg(long, default_value_t = 100)]
        abnormal: usize,
    },
    /// Segment lung fields.
    Segment {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write every intermediate stage.
        #[arg(long)]
        snapshots: bool,
    },
    /// Write augmented images, their blend masks and a provenance table.
    Augment {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Directory of lung masks named like the inputs; segmented on the fly when absent.
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        per_image: usize,
    },
    /// Train the classifier on normal images.
    Train {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score images against the training features of a model.
    Score {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        /// `features.csv` written by `train`.
        #[arg(long)]
        features: PathBuf,
        /// Manifest supplying labels by id.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics for a labeled scores CSV.
    Eval {
        scores: PathBuf,
        /// Fixed threshold; the F1-optimal one is used when absent.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Phantom corpus, every run, the ensemble and a summary.
    Pipeline {
        #[arg(long)]
        out: PathBuf,
    },
}

impl Common {
    pub fn config(&self) -> CliResult<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        for s in &self.sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
            cfg.set(k.trim(), v.trim()).map_err(CliError::Config)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(mode) = self.mode {
            cfg.mode = mode;
        }
        if let Some(runs) = self.runs {
            cfg.runs = runs;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    let mut cfg = cli.common.config()?;
    let workers = cli.common.parallel;
    pipeline::pool(workers)?.install(|| match cli.command {
        Command::Phantom { out, normal, abnormal } => {
            if let Some(seed) = cli.common.seed {
                cfg.phantom.seed = seed;
            }
            cmd_phantom(&cfg, &out, normal, abnormal)
        }
        Command::Segment { inputs, out, snapshots } => cmd_segment(&cfg, &inputs, &out, snapshots).map(|_| ()),
        Command::Augment {
            inputs,
            masks,
            out,
            per_image,
        } => cmd_augment(&cfg, &inputs, masks.as_deref(), &out, per_image),
        Command::Train { inputs, masks, out } => cmd_train(&cfg, &inputs, masks.as_deref(), &out),
        Command::Score {
            inputs,
            model,
            features,
            labels,
            out,
        } => cmd_score(&cfg, &inputs, &model, &features, labels.as_deref(), &out),
        Command::Eval { scores, threshold, out } => cmd_eval(&scores, threshold.or(cfg.threshold), &out).map(|_| ()),
        Command::Pipeline { out } => cmd_pipeline(&cfg, &out).map(|_| ()),
    })
}

fn lesion_field(s: &PhantomSample) -> String {
    s.lesions
        .iter()
        .map(|l| format!("{}:{}:{}:{}", l.center.0, l.center.1, l.radius, l.amplitude))
        .collect::<Vec<_>>()
        .join(";")
}

const MANIFEST_HEADER: [&str; 8] = [
    "id",
    "class",
    "seed",
    "label",
    "split",
    "group",
    "lesion_count",
    "lesions",
];

/// Manifest rows; `lesions` is `x:y:radius:amplitude` per lesion, `;`-separated.
fn manifest_row(id: &str, s: &PhantomSample, split: &str, group: Option<&str>) -> Vec<String> {
    vec![
        id.to_string(),
        s.class.name().to_string(),
        s.seed.to_string(),
        s.label().to_string(),
        split.to_string(),
        group.unwrap_or_default().to_string(),
        s.lesions.len().to_string(),
        lesion_field(s),
    ]
}

pub fn cmd_phantom(cfg: &PipelineConfig, out: &Path, normal: usize, abnormal: usize) -> CliResult<()> {
    let classes: Vec<PhantomClass> = std::iter::repeat_n(PhantomClass::Normal, normal)
        .chain(std::iter::repeat_n(PhantomClass::Abnormal, abnormal))
        .collect();
    let samples = classes
        .par_iter()
        .enumerate()
        .map(|(i, &class)| {
            let s = generate(&cfg.phantom, i, class).stage("phantom", None)?;
            let id = format!("p{i:05}");
            io::write_image(&out.join("images").join(format!("{id}.png")), &s.image)?;
            io::write_mask(&out.join("gt_lung").join(format!("{id}.png")), &s.gt_lung)?;
            io::write_mask(&out.join("gt_lesion").join(format!("{id}.png")), &s.gt_lesion)?;
            Ok((id, s))
        })
        .collect::<CliResult<Vec<_>>>()?;
    io::write_csv(
        &out.join("manifest.csv"),
        &MANIFEST_HEADER,
        samples.iter().map(|(id, s)| manifest_row(id, s, "", None)),
    )?;
    log::info!("wrote {} phantoms to {}", samples.len(), out.display());
    Ok(())
}

/// Segments every input; returns `(id, result)` in input order. Degenerate inputs
/// get an empty mask and a warning.
pub fn cmd_segment(
    cfg: &PipelineConfig,
    inputs: &[PathBuf],
    out: &Path,
    snapshots: bool,
) -> CliResult<Vec<(String, SegResult)>> {
    let files = io::collect_inputs(inputs)?;
    files
        .par_iter()
        .map(|f| {
            let img = io::read_image(f)?;
            let seg = cfg.seg_for(img.width(), img.height());
            let r = segment_lungs_traced(&img, &seg).stage("segment", None)?;
            let id = io::stem(f);
            if r.degenerate {
                log::warn!("{}: constant image, writing an empty mask", f.display());
            }
            io::write_mask(&out.join(format!("{id}.png")), &r.mask)?;
            if snapshots {
                if let Some(st) = &r.stages {
                    let dir = out.join("snapshots").join(&id);
                    io::write_image(&dir.join("1_equalized.png"), &st.equalized)?;
                    for (name, m) in [
                        ("2_binarized", &st.binarized),
                        ("3_opened", &st.opened),
                        ("4_border_cleared", &st.border_cleared),
                        ("5_dilated", &st.dilated),
                        ("6_filtered", &r.mask),
                    ] {
                        io::write_mask(&dir.join(format!("{name}.png")), m)?;
                    }
                }
            }
            Ok((id, r))
        })
        .collect()
}

/// Lung masks for `images`: read from `dir/<id>.png` or segmented here.
fn lung_masks(
    cfg: &PipelineConfig,
    files: &[PathBuf],
    images: &[GrayImage],
    dir: Option<&Path>,
) -> CliResult<Vec<BinaryMask>> {
    files
        .par_iter()
        .zip(images)
        .map(|(f, img)| {
            if !cfg.mode.uses_lungs() {
                return Ok(BinaryMask::new(img.width(), img.height()));
            }
            let mask = match dir {
                Some(d) => io::read_mask(&d.join(format!("{}.png", io::stem(f))))?,
                None => {
                    anatpaste_core::lungseg::segment_lungs(img, &cfg.seg_for(img.width(), img.height()))
                        .stage("segment", None)?
                        .mask
                }
            };
            if mask.dims() != img.dims() {
                return Err(CliError::Config(format!(
                    "{}: mask size does not match the image",
                    f.display()
                )));
            }
            Ok(mask)
        })
        .collect()
}

fn read_all(files: &[PathBuf]) -> CliResult<Vec<GrayImage>> {
    files.par_iter().map(|f| io::read_image(f)).collect()
}

/// Augmentation `k` of image `i` uses the stream `(seed, i, k)`.
pub fn cmd_augment(
    cfg: &PipelineConfig,
    inputs: &[PathBuf],
    masks: Option<&Path>,
    out: &Path,
    per_image: usize,
) -> CliResult<()> {
    let files = io::collect_inputs(inputs)?;
    let images = read_all(&files)?;
    let lungs = lung_masks(cfg, &files, &images, masks)?;
    let jobs: Vec<(usize, usize)> = (0..files.len())
        .flat_map(|i| (0..per_image).map(move |k| (i, k)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, k)| {
            let id = format!("{}_{k}", io::stem(&files[i]));
            let r = augment_one(
                &images[i],
                &lungs[i],
                cfg.mode,
                &cfg.aug,
                &cfg.scar,
                cfg.seed,
                &[TAG_CLI_AUGMENT, i as u64, k as u64],
            );
            let o = match r {
                Ok(o) => o,
                Err(e) => {
                    log::warn!("{}: {e}", files[i].display());
                    return Ok(None);
                }
            };
            io::write_image(&out.join("images").join(format!("{id}.png")), &o.anomaly_image)?;
            io::write_image(&out.join("masks").join(format!("{id}.png")), &o.soft_mask)?;
            let (s, d) = (o.patch_src_rect, o.patch_dst_rect);
            Ok(Some(vec![
                id,
                io::stem(&files[i]),
                k.to_string(),
                cfg.mode.to_string(),
                s.x.to_string(),
                s.y.to_string(),
                d.x.to_string(),
                d.y.to_string(),
                s.width.to_string(),
                s.height.to_string(),
                o.shape.kind.name().to_string(),
                o.rotation_deg.to_string(),
                o.fill_value.to_string(),
                o.blur_radius.to_string(),
            ]))
        })
        .collect::<CliResult<Vec<_>>>()?;
    io::write_csv(
        &out.join("provenance.csv"),
        &[
            "id",
            "source",
            "rep",
            "mode",
            "src_x",
            "src_y",
            "dst_x",
            "dst_y",
            "width",
            "height",
            "shape",
            "rotation",
            "fill",
            "blur_radius",
        ],
        rows.into_iter().flatten(),
    )
}

fn log_rows(log: &[anatpaste_core::classifier::EpochLog]) -> impl Iterator<Item = Vec<String>> + '_ {
    log.iter()
        .map(|l| vec![l.epoch.to_string(), l.lr.to_string(), l.mean_loss.to_string()])
}

pub fn cmd_train(cfg: &PipelineConfig, inputs: &[PathBuf], masks: Option<&Path>, out: &Path) -> CliResult<()> {
    let files = io::collect_inputs(inputs)?;
    if files.is_empty() {
        return Err(CliError::Config("no training images".into()));
    }
    let images = read_all(&files)?;
    let lungs = lung_masks(cfg, &files, &images, masks)?;
    let caches = images
        .par_iter()
        .map(|img| DescriptorCache::new(img, &cfg.descriptor).stage("features", None))
        .collect::<CliResult<Vec<_>>>()?;
    let raw: Vec<FeatureVector> = caches.iter().map(DescriptorCache::features).collect();
    let scaler = match cfg.input_scale_floor {
        Some(floor) => InputScaler::fit(&raw, floor).stage("features", None)?,
        None => InputScaler::identity(cfg.descriptor.dim()),
    };
    let originals = raw
        .iter()
        .map(|x| scaler.apply(x))
        .collect::<anatpaste_core::Result<Vec<_>>>()
        .stage("features", None)?;
    let source = AugmentedPairs {
        images: images.iter().collect(),
        lungs: &lungs,
        originals: &originals,
        caches: &caches,
        descriptor: cfg.descriptor,
        scaler: &scaler,
        mode: cfg.mode,
        aug: &cfg.aug,
        scar: &cfg.scar,
        seed: cfg.seed,
    };
    let train_cfg = TrainConfig {
        seed: cfg.seed,
        ..cfg.train.clone()
    };
    let trained = train(&source, &train_cfg).stage("train", None)?;
    let ids: Vec<String> = files.iter().map(|f| io::stem(f)).collect();
    let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let embeddings = pipeline::embed(&trained.model, &id_refs, &originals).stage("embed", None)?;
    io::write_checkpoint(
        &out.join("model.txt"),
        &Checkpoint {
            model: trained.model,
            scaler,
        },
    )?;
    io::write_csv(
        &out.join("train_log.csv"),
        &["epoch", "lr", "mean_loss"],
        log_rows(&trained.log),
    )?;
    io::write_features(&out.join("features.csv"), &embeddings)
}

/// Labels by id from a manifest or scores CSV with `id` and `label` columns.
fn read_labels(path: &Path) -> CliResult<HashMap<String, u8>> {
    let (header, rows) = io::read_csv(path)?;
    let col = |n: &str| header.iter().position(|h| h == n);
    let (Some(id), Some(label)) = (col("id"), col("label")) else {
        return Err(CliError::parse(path, 1, "labels need 'id' and 'label' columns"));
    };
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let l = match r.get(label).map(|s| s.trim()) {
                Some("0") => 0,
                Some("1") => 1,
                _ => return Err(CliError::parse(path, i + 2, "label must be 0 or 1")),
            };
            Ok((r[id].clone(), l))
        })
        .collect()
}

pub fn cmd_score(
    cfg: &PipelineConfig,
    inputs: &[PathBuf],
    model: &Path,
    features: &Path,
    labels: Option<&Path>,
    out: &Path,
) -> CliResult<()> {
    let ck = io::read_checkpoint(model)?;
    let refs: Vec<FeatureVector> = io::read_features(features)?.into_iter().map(|(_, z)| z).collect();
    let kde = KdeModel::fit_with_floor(&refs, cfg.bandwidth, cfg.std_floor).stage("kde", None)?;
    let files = io::collect_inputs(inputs)?;
    let queries = files
        .par_iter()
        .map(|f| {
            let img = io::read_image(f)?;
            let x = anatpaste_core::classifier::extract_features(&img, &cfg.descriptor)
                .and_then(|x| ck.scaler.apply(&x))
                .and_then(|x| ck.model.forward(&x))
                .stage("embed", None)?;
            Ok((io::stem(f), x.penultimate))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let set = pipeline::kde_scores(&kde, &queries, Normalization::Query).stage("score", None)?;
    let labels = labels.map(read_labels).transpose()?;
    let rows: Vec<ScoreRow> = set
        .entries
        .iter()
        .map(|e| ScoreRow {
            id: e.id.clone(),
            raw: e.raw,
            score: e.score,
            label: labels.as_ref().and_then(|l| l.get(&e.id).copied()),
        })
        .collect();
    io::write_scores(out, &rows)
}

fn metrics_text(m: &MetricsReport, val_f1: Option<f64>) -> String {
    let c = &m.confusion;
    let mut s = format!(
        "auc {}\naccuracy {}\nf1 {}\nthreshold {}\ntp {}\nfp {}\ntn {}\nfn {}\n",
        m.auc.map(|a| a.to_string()).unwrap_or_else(|| "undefined".into()),
        m.accuracy,
        m.f1,
        m.threshold,
        c.tp,
        c.fp,
        c.tn,
        c.fn_
    );
    if let Some(f) = val_f1 {
        s.push_str(&format!("val_f1 {f}\n"));
    }
    s
}

fn metrics_row(scope: &str, m: &MetricsReport) -> Vec<String> {
    let c = &m.confusion;
    vec![
        scope.to_string(),
        m.auc.map(|a| a.to_string()).unwrap_or_default(),
        m.accuracy.to_string(),
        m.f1.to_string(),
        m.threshold.to_string(),
        c.tp.to_string(),
        c.fp.to_string(),
        c.tn.to_string(),
        c.fn_.to_string(),
    ]
}

const METRICS_HEADER: [&str; 9] = ["scope", "auc", "accuracy", "f1", "threshold", "tp", "fp", "tn", "fn"];

fn write_roc(path: &Path, roc: &[RocPoint]) -> CliResult<()> {
    io::write_csv(
        path,
        &["fpr", "tpr", "threshold"],
        roc.iter()
            .map(|p| [p.fpr.to_string(), p.tpr.to_string(), p.threshold.to_string()]),
    )
}

pub fn cmd_eval(scores: &Path, threshold: Option<f64>, out: &Path) -> CliResult<MetricsReport> {
    let rows = io::read_scores(scores)?;
    let entries = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let label = r.label.ok_or_else(|| CliError::parse(scores, i + 2, "missing label"))?;
            Ok(LabeledScore {
                id: r.id.clone(),
                score: r.score,
                label,
                group: None,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let ls = LabeledScores::new(entries).map_err(|e| CliError::parse(scores, 1, e.to_string()))?;
    auc(&ls).stage("eval", None)?;
    let threshold = match threshold {
        Some(t) => t,
        None => best_f1_threshold(&ls).stage("eval", None)?.0,
    };
    let report = metrics_at(&ls, threshold);
    io::write_text(&out.join("metrics.txt"), &metrics_text(&report, None))?;
    io::write_csv(&out.join("metrics.csv"), &METRICS_HEADER, [metrics_row("all", &report)])?;
    write_roc(&out.join("roc.csv"), &roc_curve(&ls).stage("eval", None)?)?;
    Ok(report)
}

fn score_rows(set: &anatpaste_core::scoring::ScoreSet, items: &[Item]) -> Vec<ScoreRow> {
    set.entries
        .iter()
        .zip(items)
        .map(|(e, i)| ScoreRow {
            id: e.id.clone(),
            raw: e.raw,
            score: e.score,
            label: Some(i.label()),
        })
        .collect()
}

fn write_evaluation(dir: &Path, e: &Evaluation, corpus: &pipeline::Corpus) -> CliResult<()> {
    io::write_scores(&dir.join("scores_val.csv"), &score_rows(&e.val, &corpus.val))?;
    io::write_scores(&dir.join("scores_test.csv"), &score_rows(&e.test, &corpus.test))?;
    io::write_text(&dir.join("metrics.txt"), &metrics_text(&e.report, Some(e.val_f1)))?;
    let rows = std::iter::once(metrics_row("all", &e.report)).chain(e.groups.iter().map(|(g, m)| metrics_row(g, m)));
    io::write_csv(&dir.join("metrics.csv"), &METRICS_HEADER, rows)?;
    write_roc(&dir.join("roc.csv"), &e.roc)
}

fn write_run(dir: &Path, r: &RunResult, scaler: &InputScaler, corpus: &pipeline::Corpus) -> CliResult<()> {
    io::write_checkpoint(
        &dir.join("model.txt"),
        &Checkpoint {
            model: r.model.clone(),
            scaler: scaler.clone(),
        },
    )?;
    io::write_csv(
        &dir.join("train_log.csv"),
        &["epoch", "lr", "mean_loss"],
        log_rows(&r.log),
    )?;
    io::write_features(&dir.join("features.csv"), &r.train_embeddings)?;
    write_evaluation(dir, &r.eval, corpus)
}

fn summary_text(cfg: &PipelineConfig, x: &ExperimentResult) -> String {
    let e = &x.ensemble.report;
    let mut s = format!("mode {}\nruns {}\nseed {}\n", cfg.mode, x.runs.len(), cfg.seed);
    for (name, ms, ens) in [
        ("auc", x.auc, e.auc.unwrap_or(f64::NAN)),
        ("accuracy", x.accuracy, e.accuracy),
        ("f1", x.f1, e.f1),
    ] {
        s.push_str(&format!(
            "{name} {:.4} +/- {:.4} (ensemble {:.4})\n",
            ms.mean, ms.std, ens
        ));
    }
    for r in &x.runs {
        s.push_str(&format!(
            "run {} seed {} auc {:.4} threshold {}\n",
            r.run,
            r.seed,
            r.eval.report.auc.unwrap_or(f64::NAN),
            r.eval.threshold
        ));
    }
    s
}

/// Runs the whole experiment and writes:
///
/// ```text
/// config.txt  manifest.csv  summary.txt  summary.csv
/// run_<r>/    model.txt train_log.csv features.csv scores_val.csv scores_test.csv
///             metrics.txt metrics.csv roc.csv
/// ensemble/   scores_val.csv scores_test.csv metrics.txt metrics.csv roc.csv
/// ```
pub fn cmd_pipeline(cfg: &PipelineConfig, out: &Path) -> CliResult<ExperimentResult> {
    cfg.validate()?;
    let corpus = pipeline::build_corpus(cfg)?;
    let feats = pipeline::SplitFeatures::compute(&corpus, cfg)?;
    let result = pipeline::run_experiment(cfg, &corpus, &feats)?;
    io::write_text(&out.join("config.txt"), &cfg.to_text())?;
    io::write_csv(
        &out.join("manifest.csv"),
        &MANIFEST_HEADER,
        corpus
            .items()
            .map(|i| manifest_row(&i.id, &i.sample, i.split.name(), i.group.as_deref())),
    )?;
    for r in &result.runs {
        write_run(&out.join(format!("run_{}", r.run)), r, &feats.scaler, &corpus)?;
    }
    write_evaluation(&out.join("ensemble"), &result.ensemble, &corpus)?;
    io::write_text(&out.join("summary.txt"), &summary_text(cfg, &result))?;
    let e = &result.ensemble.report;
    io::write_csv(
        &out.join("summary.csv"),
        &["metric", "mean", "std", "ensemble"],
        [
            ("auc", result.auc, e.auc.unwrap_or(f64::NAN)),
            ("accuracy", result.accuracy, e.accuracy),
            ("f1", result.f1, e.f1),
        ]
        .map(|(n, ms, ens)| [n.to_string(), ms.mean.to_string(), ms.std.to_string(), ens.to_string()]),
    )?;
    log::info!(
        "{}: auc {:.4} +/- {:.4}, ensemble {:.4}",
        cfg.mode,
        result.auc.mean,
        result.auc.std,
        result.ensemble_auc()
    );
    Ok(result)
}
