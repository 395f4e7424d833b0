//! Dataset ingestion and handling.
//!
//! Input files follow the UCR text convention: one series per row, class
//! label in the first field, then the values, comma- or tab/whitespace-
//! separated. Labels may come from any integer alphabet; they are remapped
//! to contiguous `1..=C` preserving the sort order of the original labels,
//! and the original alphabet is kept so written files reproduce it.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::series::Series;

/// A labeled collection of equal-length series.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub series: Vec<Series>,
    /// Common series length `T`.
    pub series_len: usize,
    /// Number of classes `C`; labels are `1..=C`.
    pub num_classes: usize,
    /// Original label value for each class index (written back on export).
    pub class_values: Vec<i64>,
    /// Global (min, max) of the raw data if this dataset was produced by
    /// [`normalize_minmax`].
    pub norm_bounds: Option<(f64, f64)>,
}

impl Dataset {
    /// Wrap already-built series. Lengths must agree; labels must be within
    /// `1..=C` (with `C` inferred from the maximum label when not given).
    pub fn from_series(series: Vec<Series>, num_classes: Option<usize>) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        let series_len = series[0].len();
        if series_len == 0 {
            return Err(Error::InvalidArgument("series of length 0".into()));
        }
        let mut max_label = 0usize;
        for (i, s) in series.iter().enumerate() {
            if s.len() != series_len {
                return Err(Error::shape(
                    "Dataset::from_series",
                    format!("length {series_len}"),
                    format!("length {} at series {i}", s.len()),
                ));
            }
            if let Some(l) = s.label {
                if l == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "series {i} has label 0; labels are 1-based"
                    )));
                }
                max_label = max_label.max(l);
            }
        }
        let num_classes = num_classes.unwrap_or(max_label.max(1));
        for (i, s) in series.iter().enumerate() {
            if let Some(l) = s.label {
                if l > num_classes {
                    return Err(Error::InvalidArgument(format!(
                        "series {i} has label {l} > num_classes {num_classes}"
                    )));
                }
            }
        }
        Ok(Dataset {
            series,
            series_len,
            num_classes,
            class_values: (1..=num_classes as i64).collect(),
            norm_bounds: None,
        })
    }

    /// Series of one class, cloned.
    pub fn class_members(&self, class: usize) -> Vec<Series> {
        self.series
            .iter()
            .filter(|s| s.label == Some(class))
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

/// Parse a UCR-style file. The result is raw (unnormalized, `norm_bounds`
/// unset).
pub fn load_ucr(path: &Path) -> Result<Dataset> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);

    let mut raw_labels: Vec<i64> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut expected_fields: Option<usize> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = if trimmed.contains(',') {
            trimmed.split(',').map(str::trim).collect()
        } else {
            trimmed.split_whitespace().collect()
        };
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected a label and at least one value, found {} field(s)", fields.len()),
            });
        }
        match expected_fields {
            None => expected_fields = Some(fields.len()),
            Some(n) if n != fields.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("ragged row: {} fields, expected {n}", fields.len()),
                });
            }
            _ => {}
        }

        let label_raw: f64 = fields[0].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("non-numeric label '{}'", fields[0]),
        })?;
        let label_int = label_raw.round();
        if (label_raw - label_int).abs() > 1e-9 || !label_raw.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("label '{}' is not an integer", fields[0]),
            });
        }

        let mut values = Vec::with_capacity(fields.len() - 1);
        for f in &fields[1..] {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("non-numeric value '{f}'"),
            })?;
            values.push(v);
        }
        raw_labels.push(label_int as i64);
        rows.push(values);
    }

    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "file contains no data rows".into(),
        });
    }

    let mut class_values: Vec<i64> = raw_labels.clone();
    class_values.sort_unstable();
    class_values.dedup();
    let num_classes = class_values.len();

    let series = rows
        .into_iter()
        .zip(&raw_labels)
        .map(|(values, raw)| {
            let class = class_values.iter().position(|v| v == raw).unwrap() + 1;
            Series::labeled(values, class)
        })
        .collect();

    Ok(Dataset {
        series,
        series_len: expected_fields.unwrap() - 1,
        num_classes,
        class_values,
        norm_bounds: None,
    })
}

/// Write a dataset in the same UCR text convention it is read from
/// (tab-separated, original label alphabet, full-precision values).
pub fn write_ucr(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut out = String::new();
    for s in &dataset.series {
        let label_value = match s.label {
            Some(l) if l >= 1 && l <= dataset.class_values.len() => dataset.class_values[l - 1],
            Some(l) => l as i64,
            None => {
                return Err(Error::InvalidArgument(
                    "cannot write a series without a class label".into(),
                ))
            }
        };
        out.push_str(&label_value.to_string());
        for v in &s.values {
            out.push('\t');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    write_text_atomic(path, &out)
}

/// Min-max normalize into [0, 1] using one global (min, max) over every
/// point of every series, and record the bounds for the inverse map. A
/// constant dataset maps to 0.5 everywhere (with a warning).
pub fn normalize_minmax(dataset: &Dataset) -> Result<Dataset> {
    if dataset.series.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in &dataset.series {
        for &v in &s.values {
            if !v.is_finite() {
                return Err(Error::NonFinite("dataset value".into()));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let mut out = dataset.clone();
    out.norm_bounds = Some((lo, hi));
    if lo == hi {
        log::warn!("dataset is constant ({lo}); normalizing every value to 0.5");
        for s in &mut out.series {
            s.values.fill(0.5);
        }
    } else {
        let scale = 1.0 / (hi - lo);
        for s in &mut out.series {
            for v in &mut s.values {
                *v = (*v - lo) * scale;
            }
        }
    }
    Ok(out)
}

/// Map a normalized value back to the raw scale.
pub fn denormalize_value(v: f64, bounds: (f64, f64)) -> f64 {
    let (lo, hi) = bounds;
    lo + v * (hi - lo)
}

/// Invert [`normalize_minmax`] using the recorded bounds.
pub fn denormalize(dataset: &Dataset) -> Result<Dataset> {
    let bounds = dataset.norm_bounds.ok_or_else(|| {
        Error::InvalidArgument("dataset has no normalization bounds to invert".into())
    })?;
    let mut out = dataset.clone();
    out.norm_bounds = None;
    for s in &mut out.series {
        for v in &mut s.values {
            *v = denormalize_value(*v, bounds);
        }
    }
    Ok(out)
}

/// How many samples to keep when subsampling a training set.
#[derive(Debug, Clone, PartialEq)]
pub enum SubsampleSpec {
    /// Uniform subset of the whole dataset.
    Total(usize),
    /// Per-class counts, indexed by class (entry `i` is class `i + 1`).
    PerClass(Vec<usize>),
}

/// Uniform random subset without replacement, deterministic given `seed`.
/// The selected series keep their original dataset order.
pub fn subsample_training(dataset: &Dataset, spec: &SubsampleSpec, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected: Vec<usize> = Vec::new();
    match spec {
        SubsampleSpec::Total(n) => {
            if *n == 0 || *n > dataset.series.len() {
                return Err(Error::InvalidArgument(format!(
                    "requested {n} of {} samples",
                    dataset.series.len()
                )));
            }
            let mut indices: Vec<usize> = (0..dataset.series.len()).collect();
            indices.shuffle(&mut rng);
            selected.extend_from_slice(&indices[..*n]);
        }
        SubsampleSpec::PerClass(counts) => {
            if counts.len() != dataset.num_classes {
                return Err(Error::InvalidArgument(format!(
                    "{} per-class counts for {} classes",
                    counts.len(),
                    dataset.num_classes
                )));
            }
            for (class_idx, &count) in counts.iter().enumerate() {
                let class = class_idx + 1;
                let mut members: Vec<usize> = dataset
                    .series
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.label == Some(class))
                    .map(|(i, _)| i)
                    .collect();
                if count == 0 || count > members.len() {
                    return Err(Error::InvalidArgument(format!(
                        "requested {count} of {} samples for class {class}",
                        members.len()
                    )));
                }
                members.shuffle(&mut rng);
                selected.extend_from_slice(&members[..count]);
            }
        }
    }
    selected.sort_unstable();
    let series = selected.iter().map(|&i| dataset.series[i].clone()).collect();
    Ok(Dataset {
        series,
        series_len: dataset.series_len,
        num_classes: dataset.num_classes,
        class_values: dataset.class_values.clone(),
        norm_bounds: dataset.norm_bounds,
    })
}

/// Write `content` to `path` atomically (temp file in the same directory,
/// then rename).
pub fn write_text_atomic(path: &Path, content: &str) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("invalid output path {}", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
