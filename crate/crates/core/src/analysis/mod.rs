//! Input-output analysis of a trained generator: signal features, canonical
//! correlation analysis of the latent space, class-label interpolation
//! sweeps, and loading-driven control inputs.

mod cca;

pub use cca::{cca_fit, loadings_csv, write_loadings_csv, CcaResult, WHITEN_CUTOFF};

use crate::data::write_text_atomic;
use crate::error::{Error, Result};
use crate::model::{GanModel, LabelSequence};
use crate::series::Series;

/// Which feature set to extract from a generated signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureProfile {
    /// Max value, its 1-based position, min value, its position, the
    /// max-to-min interval length, mean amplitude, mean frequency.
    Ecg,
    /// Mean amplitude, standard deviation, median, mean frequency.
    Eeg,
}

impl FeatureProfile {
    pub fn names(self) -> &'static [&'static str] {
        match self {
            FeatureProfile::Ecg => &[
                "max_value",
                "argmax",
                "min_value",
                "argmin",
                "interval_length",
                "mean_amplitude",
                "mean_frequency",
            ],
            FeatureProfile::Eeg => &["mean_amplitude", "std_dev", "median", "mean_frequency"],
        }
    }
}

impl std::str::FromStr for FeatureProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ecg" => Ok(FeatureProfile::Ecg),
            "eeg" => Ok(FeatureProfile::Eeg),
            other => Err(Error::Config(format!(
                "unknown feature profile '{other}' (expected 'ecg' or 'eeg')"
            ))),
        }
    }
}

/// Feature values in the order of [`FeatureProfile::names`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub profile: FeatureProfile,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.profile
            .names()
            .iter()
            .position(|&n| n == name)
            .map(|i| self.values[i])
    }
}

/// Spectral centroid of the mean-removed amplitude spectrum in cycles per
/// step: `sum_k (k/T) |X_k| / sum_k |X_k|` over `k = 1..=T/2` (DC excluded).
/// A spectrum with no mass (constant input) yields 0.
pub fn mean_frequency(values: &[f64]) -> f64 {
    let t_len = values.len();
    if t_len < 2 {
        return 0.0;
    }
    let mean: f64 = values.iter().sum::<f64>() / t_len as f64;
    let mut weighted = 0.0;
    let mut total = 0.0;
    for k in 1..=t_len / 2 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (t, &v) in values.iter().enumerate() {
            // Reduce k*t modulo T to keep the argument small.
            let phase = -2.0 * std::f64::consts::PI * ((k * t) % t_len) as f64 / t_len as f64;
            let x = v - mean;
            re += x * phase.cos();
            im += x * phase.sin();
        }
        let mag = (re * re + im * im).sqrt();
        weighted += (k as f64 / t_len as f64) * mag;
        total += mag;
    }
    if total < 1e-12 {
        0.0
    } else {
        weighted / total
    }
}

/// Deterministic feature extraction. Positions are 1-based; ties go to the
/// earliest step.
pub fn extract_features(values: &[f64], profile: FeatureProfile) -> Result<FeatureVector> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "extract_features needs at least 2 steps (got {})",
            values.len()
        )));
    }
    let t_len = values.len();
    let mean: f64 = values.iter().sum::<f64>() / t_len as f64;
    let out = match profile {
        FeatureProfile::Ecg => {
            let mut argmax = 0usize;
            let mut argmin = 0usize;
            for (i, &v) in values.iter().enumerate() {
                if v > values[argmax] {
                    argmax = i;
                }
                if v < values[argmin] {
                    argmin = i;
                }
            }
            vec![
                values[argmax],
                (argmax + 1) as f64,
                values[argmin],
                (argmin + 1) as f64,
                (argmax as f64 - argmin as f64).abs(),
                mean,
                mean_frequency(values),
            ]
        }
        FeatureProfile::Eeg => {
            let var: f64 =
                values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t_len as f64;
            let mut sorted = values.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = if t_len % 2 == 1 {
                sorted[t_len / 2]
            } else {
                0.5 * (sorted[t_len / 2 - 1] + sorted[t_len / 2])
            };
            vec![mean, var.sqrt(), median, mean_frequency(values)]
        }
    };
    Ok(FeatureVector {
        profile,
        values: out,
    })
}

/// A class-label interpolation sweep: one generated row per coefficient,
/// all from the same fixed latent sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// `steps x T` generated values; row `k` uses label
    /// `(1 - alpha_k, alpha_k)`.
    pub rows: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    /// The fixed latent sequence used for every row.
    pub latent: Vec<f64>,
}

impl SweepResult {
    /// CSV with an `alpha` column followed by the `T` generated values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha");
        for t in 0..self.rows.first().map_or(0, Vec::len) {
            out.push_str(&format!(",v{}", t + 1));
        }
        out.push('\n');
        for (alpha, row) in self.alphas.iter().zip(&self.rows) {
            out.push_str(&format!("{alpha}"));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        write_text_atomic(path, &self.to_csv())
    }
}

/// Generate `steps` rows with labels interpolated from pure class 1
/// (`alpha = 0`) to pure class 2 (`alpha = 1`) under a fixed latent
/// sequence. Only defined for two-class models.
pub fn label_sweep(model: &GanModel, latent: &[f64], steps: usize) -> Result<SweepResult> {
    if model.meta.num_classes != 2 {
        return Err(Error::Unsupported(format!(
            "label_sweep requires a two-class model (this one has {})",
            model.meta.num_classes
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidArgument("label_sweep needs steps >= 2".into()));
    }
    let t_len = model.meta.series_len;
    let mut rows = Vec::with_capacity(steps);
    let mut alphas = Vec::with_capacity(steps);
    for k in 0..steps {
        let alpha = k as f64 / (steps - 1) as f64;
        let labels = LabelSequence::interpolated(alpha, t_len)?;
        let series = model.generator.forward(latent, &labels)?;
        rows.push(series.values);
        alphas.push(alpha);
    }
    Ok(SweepResult {
        rows,
        alphas,
        latent: latent.to_vec(),
    })
}

/// Evenly spaced scales on [0, 2] (11 points).
pub fn default_scale_grid() -> Vec<f64> {
    (0..11).map(|k| 0.2 * k as f64).collect()
}

/// Latent sequences derived from the first canonical component: for each
/// scale `s`, `clamp(s * input_loadings, [-1, 1])`, reshaped to the
/// generator's `T x d_z` latent layout.
pub fn control_inputs(
    cca: &CcaResult,
    scale_grid: &[f64],
    series_len: usize,
    latent_dim: usize,
) -> Result<Vec<Vec<f64>>> {
    let p = series_len * latent_dim;
    if cca.x_loadings.rows() != p {
        return Err(Error::shape(
            "control_inputs",
            format!("{p} input loadings (series_len * latent_dim)"),
            format!("{}", cca.x_loadings.rows()),
        ));
    }
    let loadings = cca.first_input_loadings();
    Ok(scale_grid
        .iter()
        .map(|&s| loadings.iter().map(|&l| (s * l).clamp(-1.0, 1.0)).collect())
        .collect())
}

/// Per-scale feature means from generating with the control inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlRow {
    pub scale: f64,
    pub feature_means: Vec<f64>,
}

/// CSV with a `scale` column followed by one column per feature.
pub fn control_csv(rows: &[ControlRow], profile: FeatureProfile) -> String {
    let mut out = String::from("scale");
    for name in profile.names() {
        out.push_str(&format!(",{name}"));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{}", r.scale));
        for v in &r.feature_means {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn write_control_csv(
    path: &std::path::Path,
    rows: &[ControlRow],
    profile: FeatureProfile,
) -> Result<()> {
    write_text_atomic(path, &control_csv(rows, profile))
}

/// Generate with the scaled-loading control inputs under a fixed class
/// label and report the per-scale feature means.
///
/// Generation is deterministic per scale, so `samples_per_scale` repeats
/// reproduce the same series; the parameter exists for API symmetry with
/// stochastic generators.
pub fn control_experiment(
    model: &GanModel,
    cca: &CcaResult,
    scale_grid: &[f64],
    class_label: usize,
    samples_per_scale: usize,
    profile: FeatureProfile,
) -> Result<Vec<ControlRow>> {
    if samples_per_scale == 0 {
        return Err(Error::InvalidArgument("samples_per_scale must be >= 1".into()));
    }
    let t_len = model.meta.series_len;
    let labels = LabelSequence::one_hot(class_label, model.meta.num_classes, t_len)?;
    let inputs = control_inputs(cca, scale_grid, t_len, model.meta.latent_dim)?;
    let names_len = profile.names().len();
    let mut rows = Vec::with_capacity(scale_grid.len());
    for (scale, z) in scale_grid.iter().zip(&inputs) {
        let mut sums = vec![0.0; names_len];
        for _ in 0..samples_per_scale {
            let series: Series = model.generator.forward(z, &labels)?;
            let features = extract_features(&series.values, profile)?;
            for (acc, v) in sums.iter_mut().zip(&features.values) {
                *acc += v;
            }
        }
        for v in &mut sums {
            *v /= samples_per_scale as f64;
        }
        rows.push(ControlRow {
            scale: *scale,
            feature_means: sums,
        });
    }
    Ok(rows)
}
