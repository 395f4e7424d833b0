//! Shared fixtures and independent oracles for the acceptance suite.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tsgan_core::data::Dataset;
use tsgan_core::model::{GanModel, LabelSequence};
use tsgan_core::series::Series;
use tsgan_core::trainer::{train, LossVariant, TrainConfig, TrainHistory};

pub const TOY_SERIES_LEN: usize = 16;
pub const TOY_PER_CLASS: usize = 128;
pub const TOY_DATA_SEED: u64 = 2024;
pub const TOY_TRAIN_SEED: u64 = 7;

/// Two-class synthetic set: noisy one-cycle sinusoids (class 1) vs noisy
/// rising ramps (class 2), 128 series per class, T = 16, values in [0, 1].
pub fn toy_dataset() -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(TOY_DATA_SEED);
    let t_len = TOY_SERIES_LEN;
    let mut series = Vec::new();
    for _ in 0..TOY_PER_CLASS {
        let phase: f64 = rng.gen_range(-0.25..0.25);
        let values: Vec<f64> = (0..t_len)
            .map(|t| {
                let arg = 2.0 * std::f64::consts::PI * (t as f64 / t_len as f64) + phase;
                (0.5 + 0.3 * arg.sin() + rng.gen_range(-0.02..0.02)).clamp(0.0, 1.0)
            })
            .collect();
        series.push(Series::labeled(values, 1));
    }
    for _ in 0..TOY_PER_CLASS {
        let lo: f64 = rng.gen_range(0.2..0.26);
        let hi: f64 = rng.gen_range(0.74..0.8);
        let values: Vec<f64> = (0..t_len)
            .map(|t| {
                let frac = t as f64 / (t_len - 1) as f64;
                (lo + (hi - lo) * frac + rng.gen_range(-0.02..0.02)).clamp(0.0, 1.0)
            })
            .collect();
        series.push(Series::labeled(values, 2));
    }
    Dataset::from_series(series, Some(2)).unwrap()
}

/// The pinned toy training configuration: U=32, L=2, m=16, K=5, lr=1e-4,
/// 500 epochs.
pub fn toy_config() -> TrainConfig {
    TrainConfig {
        epochs: 500,
        batch_size: 16,
        unroll: 5,
        learning_rate: 1e-4,
        latent_dim: 1,
        units: 32,
        layers: 2,
        seed: TOY_TRAIN_SEED,
        loss: LossVariant::Saturating,
        checkpoint_every: 0,
    }
}

pub struct ToyRun {
    pub dataset: Dataset,
    pub model: GanModel,
    pub history: TrainHistory,
    pub train_seconds: f64,
}

static TOY_RUN: OnceLock<ToyRun> = OnceLock::new();

/// The end-to-end toy training run, executed once and shared by the
/// criteria that need a trained model.
pub fn toy_run() -> &'static ToyRun {
    TOY_RUN.get_or_init(|| {
        let dataset = toy_dataset();
        let config = toy_config();
        let start = std::time::Instant::now();
        let (model, history) = train(&dataset, &config).expect("toy training");
        ToyRun {
            dataset,
            model,
            history,
            train_seconds: start.elapsed().as_secs_f64(),
        }
    })
}

/// The model exactly as `train` initializes it, before any update.
pub fn toy_epoch0_model() -> GanModel {
    let config = toy_config();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = GanModel::new(
        TOY_SERIES_LEN,
        2,
        config.latent_dim,
        config.units,
        config.layers,
        &mut rng,
    )
    .unwrap();
    model.meta.seed = config.seed;
    model
}

/// Draw `count` generated series under a fixed one-hot class.
pub fn generate(model: &GanModel, class: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Series> {
    let t_len = model.meta.series_len;
    let labels = LabelSequence::one_hot(class, model.meta.num_classes, t_len).unwrap();
    (0..count)
        .map(|_| {
            let z: Vec<f64> = (0..t_len * model.meta.latent_dim)
                .map(|_| rng.gen_range(-1.0..=1.0))
                .collect();
            let mut s = model.generator.forward(&z, &labels).unwrap();
            s.label = Some(class);
            s
        })
        .collect()
}

/// Exhaustive enumeration of all monotone warping paths (steps down, right,
/// diagonal), accumulating squared differences front-to-back exactly like
/// the DP. The independent oracle for `dtw_distance`.
pub fn brute_force_dtw(q: &[f64], c: &[f64]) -> f64 {
    fn walk(q: &[f64], c: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
        let diff = q[i] - c[j];
        let acc = acc + diff * diff;
        if i == q.len() - 1 && j == c.len() - 1 {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        if i + 1 < q.len() && j + 1 < c.len() {
            walk(q, c, i + 1, j + 1, acc, best);
        }
        if i + 1 < q.len() {
            walk(q, c, i + 1, j, acc, best);
        }
        if j + 1 < c.len() {
            walk(q, c, i, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(q, c, 0, 0, 0.0, &mut best);
    best.sqrt()
}

/// Relative error with an absolute floor for near-zero pairs.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}
