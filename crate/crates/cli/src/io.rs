//! Image and CSV file formats.
//!
//! * Images are read from 8- or 16-bit grayscale PNG or PGM; a stored value `v`
//!   becomes `v / maxval`. Color inputs are converted to 16-bit luma first.
//! * Intensity images are written as 16-bit PNG with `round(v · 65535)`, so a
//!   written file reads back and rewrites bit-identically.
//! * Masks are 8-bit PNG holding 0 or 255; any nonzero value reads as inside.
//! * Floats in CSV files use the shortest text that parses back to the same value.

use crate::error::{CliError, CliResult};
use anatpaste_core::classifier::{Dense, InputScaler, MlpModel};
use anatpaste_core::imgcore::{BinaryMask, GrayImage};
use anatpaste_core::FeatureVector;
use image::{DynamicImage, ImageBuffer, Luma};
use std::fs;
use std::path::{Path, PathBuf};

pub fn read_image(path: &Path) -> CliResult<GrayImage> {
    let img = image::open(path).map_err(|e| CliError::io(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
        other => {
            log::warn!("{}: not grayscale, converting to luma", path.display());
            other
                .to_luma16()
                .into_raw()
                .into_iter()
                .map(|v| v as f64 / 65535.0)
                .collect()
        }
    };
    GrayImage::from_vec(w, h, data).map_err(|e| CliError::io(path, e))
}

pub fn read_mask(path: &Path) -> CliResult<BinaryMask> {
    let img = image::open(path).map_err(|e| CliError::io(path, e))?.to_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    BinaryMask::from_vec(w, h, img.into_raw().into_iter().map(|v| v != 0).collect()).map_err(|e| CliError::io(path, e))
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(())
}

pub fn write_image(path: &Path, img: &GrayImage) -> CliResult<()> {
    ensure_parent(path)?;
    let raw: Vec<u16> = img.data().iter().map(|v| (v * 65535.0).round() as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, raw).expect("buffer matches dims");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| CliError::io(path, e))
}

pub fn write_mask(path: &Path, mask: &BinaryMask) -> CliResult<()> {
    ensure_parent(path)?;
    let raw: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, raw).expect("buffer matches dims");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// CSV file from a header and rows of already formatted fields.
pub fn write_csv<R, I>(path: &Path, header: &[&str], rows: R) -> CliResult<()>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = String>,
{
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())
            .map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Header and records; line numbers in errors count the header as line 1.
pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let header = r
        .headers()
        .map_err(|e| CliError::parse(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::parse(path, i + 2, e.to_string()))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

pub fn parse_f64(path: &Path, line: usize, field: &str, value: &str) -> CliResult<f64> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::parse(path, line, format!("{field}: '{value}' is not a number")))
}

pub fn features_header(dim: usize) -> Vec<String> {
    std::iter::once("id".to_string())
        .chain((0..dim).map(|k| format!("f{k}")))
        .collect()
}

/// Features CSV `id,f0,...,f{d-1}`.
pub fn write_features(path: &Path, rows: &[(String, FeatureVector)]) -> CliResult<()> {
    let dim = rows.first().map_or(0, |(_, f)| f.len());
    let header = features_header(dim);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        path,
        &header,
        rows.iter()
            .map(|(id, f)| std::iter::once(id.clone()).chain(f.iter().map(|v| v.to_string()))),
    )
}

pub fn read_features(path: &Path) -> CliResult<Vec<(String, FeatureVector)>> {
    let (header, rows) = read_csv(path)?;
    if header.first().map(String::as_str) != Some("id") || header[1..] != features_header(header.len() - 1)[1..] {
        return Err(CliError::parse(path, 1, "expected header id,f0,f1,..."));
    }
    rows.into_iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != header.len() {
                return Err(CliError::parse(
                    path,
                    i + 2,
                    format!("expected {} fields, got {}", header.len(), row.len()),
                ));
            }
            let f = row[1..]
                .iter()
                .enumerate()
                .map(|(k, v)| parse_f64(path, i + 2, &format!("f{k}"), v))
                .collect::<CliResult<Vec<_>>>()?;
            Ok((row[0].clone(), f))
        })
        .collect()
}

/// Row of a scores CSV `id,raw,score,label`; the label column may be empty.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub id: String,
    pub raw: f64,
    pub score: f64,
    pub label: Option<u8>,
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> CliResult<()> {
    write_csv(
        path,
        &["id", "raw", "score", "label"],
        rows.iter().map(|r| {
            [
                r.id.clone(),
                r.raw.to_string(),
                r.score.to_string(),
                r.label.map(|l| l.to_string()).unwrap_or_default(),
            ]
        }),
    )
}

/// Reads `id,raw,score[,label]` or the minimal `id,score[,label]`.
pub fn read_scores(path: &Path) -> CliResult<Vec<ScoreRow>> {
    let (header, rows) = read_csv(path)?;
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(id), Some(score)) = (col("id"), col("score")) else {
        return Err(CliError::parse(path, 1, "scores need 'id' and 'score' columns"));
    };
    let (raw, label) = (col("raw"), col("label"));
    rows.into_iter()
        .enumerate()
        .map(|(i, row)| {
            let line = i + 2;
            if row.len() != header.len() {
                return Err(CliError::parse(
                    path,
                    line,
                    format!("expected {} fields, got {}", header.len(), row.len()),
                ));
            }
            let score = parse_f64(path, line, "score", &row[score])?;
            let raw = match raw {
                Some(c) => parse_f64(path, line, "raw", &row[c])?,
                None => f64::NAN,
            };
            let label = match label.map(|c| row[c].trim()) {
                None | Some("") => None,
                Some("0") => Some(0),
                Some("1") => Some(1),
                Some(other) => return Err(CliError::parse(path, line, format!("label: '{other}' is not 0 or 1"))),
            };
            Ok(ScoreRow {
                id: row[id].clone(),
                raw,
                score,
                label,
            })
        })
        .collect()
}

const MODEL_MAGIC: &str = "anatpaste-mlp 1";

/// Text checkpoint:
///
/// ```text
/// anatpaste-mlp 1
/// layers <n0> <n1> ... <nk>
/// w <layer> <row-major weights of that layer, outputs × inputs>
/// b <layer> <biases>
/// ```
///
/// with one `w` and one `b` line per layer, floats in shortest round-trip form.
pub fn model_to_text(model: &MlpModel) -> String {
    let sizes: Vec<String> = model.layer_sizes().iter().map(|s| s.to_string()).collect();
    let mut out = format!("{MODEL_MAGIC}\nlayers {}\n", sizes.join(" "));
    let join = |xs: &[f64]| xs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
    for (k, l) in model.layers().iter().enumerate() {
        out.push_str(&format!("w {k} {}\nb {k} {}\n", join(&l.weights), join(&l.bias)));
    }
    out
}

pub fn model_from_text(text: &str, path: &Path) -> CliResult<MlpModel> {
    let mut lines = text.lines().enumerate();
    let err = |line: usize, m: &str| CliError::parse(path, line + 1, m.to_string());
    match lines.next() {
        Some((_, l)) if l.trim() == MODEL_MAGIC => {}
        _ => return Err(err(0, "not an anatpaste-mlp 1 checkpoint")),
    }
    let (i, l) = lines.next().ok_or_else(|| err(1, "missing layers line"))?;
    let sizes: Vec<usize> = match l.split_whitespace().collect::<Vec<_>>().split_first() {
        Some((&"layers", rest)) => rest
            .iter()
            .map(|s| s.parse().map_err(|_| err(i, "bad layer size")))
            .collect::<CliResult<_>>()?,
        _ => return Err(err(i, "expected 'layers ...'")),
    };
    let mut layers = Vec::new();
    for (k, win) in sizes.windows(2).enumerate() {
        let (inputs, outputs) = (win[0], win[1]);
        let mut read = |tag: &str, n: usize| -> CliResult<Vec<f64>> {
            let (i, l) = lines
                .next()
                .ok_or_else(|| err(usize::MAX - 1, "truncated checkpoint"))?;
            let mut parts = l.split_whitespace();
            if parts.next() != Some(tag) || parts.next() != Some(k.to_string().as_str()) {
                return Err(err(i, &format!("expected '{tag} {k}'")));
            }
            let vals = parts
                .map(|s| s.parse::<f64>().map_err(|_| err(i, "bad number")))
                .collect::<CliResult<Vec<_>>>()?;
            if vals.len() != n {
                return Err(err(i, &format!("expected {n} values, got {}", vals.len())));
            }
            Ok(vals)
        };
        let weights = read("w", inputs * outputs)?;
        let bias = read("b", outputs)?;
        layers.push(Dense {
            inputs,
            outputs,
            weights,
            bias,
        });
    }
    MlpModel::from_layers(layers).map_err(|e| err(1, &e.to_string()))
}

/// Network plus the input standardization it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: MlpModel,
    pub scaler: InputScaler,
}

/// [`model_to_text`] followed by `input_mean` and `input_scale` lines.
pub fn checkpoint_to_text(c: &Checkpoint) -> String {
    let join = |xs: &[f64]| xs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
    format!(
        "{}input_mean {}\ninput_scale {}\n",
        model_to_text(&c.model),
        join(&c.scaler.mean),
        join(&c.scaler.scale)
    )
}

/// Missing `input_*` lines mean an identity scaler.
pub fn checkpoint_from_text(text: &str, path: &Path) -> CliResult<Checkpoint> {
    let mut model_text = String::new();
    let (mut mean, mut scale) = (None, None);
    for (i, line) in text.lines().enumerate() {
        let slot = if let Some(rest) = line.strip_prefix("input_mean ") {
            Some((&mut mean, rest))
        } else {
            line.strip_prefix("input_scale ").map(|rest| (&mut scale, rest))
        };
        match slot {
            Some((slot, rest)) => {
                let vals = rest
                    .split_whitespace()
                    .map(|v| v.parse::<f64>().map_err(|_| CliError::parse(path, i + 1, "bad number")))
                    .collect::<CliResult<Vec<_>>>()?;
                *slot = Some(vals);
            }
            None => {
                model_text.push_str(line);
                model_text.push('\n');
            }
        }
    }
    let model = model_from_text(&model_text, path)?;
    let dim = model.input_dim();
    let scaler = match (mean, scale) {
        (None, None) => InputScaler::identity(dim),
        (Some(mean), Some(scale)) if mean.len() == dim && scale.len() == dim => InputScaler { mean, scale },
        _ => {
            return Err(CliError::parse(
                path,
                1,
                format!("input_mean and input_scale need {dim} values each"),
            ))
        }
    };
    Ok(Checkpoint { model, scaler })
}

pub fn write_checkpoint(path: &Path, c: &Checkpoint) -> CliResult<()> {
    write_text(path, &checkpoint_to_text(c))
}

pub fn read_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    checkpoint_from_text(&text, path)
}

/// Image files named on the command line; directories expand to their
/// `.png`/`.pgm` entries in sorted order.
pub fn collect_inputs(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.extension()
                        .and_then(|x| x.to_str())
                        .is_some_and(|x| matches!(x.to_ascii_lowercase().as_str(), "png" | "pgm"))
                })
                .collect();
            entries.sort();
            out.extend(entries);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// File stem used as the image id.
pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}
