//! Minibatch adversarial training with discriminator unrolling.
//!
//! One training iteration runs `unroll + 1` discriminator updates on fresh
//! minibatches, snapshots the discriminator (weights and optimizer state)
//! after the first of them, performs one generator update against the
//! fully-unrolled discriminator, and finally restores the discriminator to
//! the snapshot. With `unroll = 0` this degenerates to plain alternating
//! GAN training.
//!
//! Everything is driven by a single seeded RNG, so a run is a pure function
//! of `(dataset, config)`.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{write_text_atomic, Dataset};
use crate::error::{Error, Result};
use crate::model::{GanModel, LabelSequence, NetGrads};
use crate::numerics::{adam_step, AdamState, SeqBatch};
use crate::series::Series;

/// Arguments of the two log terms are clamped at this floor before taking
/// logs, so objectives stay finite for any discriminator output.
pub const LOG_CLAMP: f64 = 1e-12;

#[inline]
fn ln_clamped(x: f64) -> f64 {
    x.max(LOG_CLAMP).ln()
}

/// Derivative of `ln_clamped` (zero on the clamped branch).
#[inline]
fn ln_clamped_grad(x: f64) -> f64 {
    if x > LOG_CLAMP {
        1.0 / x
    } else {
        0.0
    }
}

/// Which generator objective to descend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossVariant {
    /// `(1/m) sum log(1 - D(G(z, c)))`, descended — the default.
    Saturating,
    /// `-(1/m) sum log D(G(z, c))`, descended.
    NonSaturating,
}

impl std::str::FromStr for LossVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "saturating" => Ok(LossVariant::Saturating),
            "non-saturating" | "non_saturating" => Ok(LossVariant::NonSaturating),
            other => Err(Error::Config(format!(
                "unknown loss variant '{other}' (expected 'saturating' or 'non-saturating')"
            ))),
        }
    }
}

/// Every hyperparameter of the training procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Minibatch size `m`; each discriminator step sees `m` real and `m`
    /// generated samples.
    pub batch_size: usize,
    /// Unroll count `K`: extra discriminator updates per iteration.
    pub unroll: usize,
    pub learning_rate: f64,
    /// Latent values per step fed to the generator.
    pub latent_dim: usize,
    pub units: usize,
    pub layers: usize,
    pub seed: u64,
    pub loss: LossVariant,
    /// Emit a checkpoint every this many epochs (0 = only the final model).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10_000,
            batch_size: 32,
            unroll: 5,
            learning_rate: 1e-4,
            latent_dim: 1,
            units: 400,
            layers: 4,
            seed: 42,
            loss: LossVariant::Saturating,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.latent_dim == 0 || self.units == 0 || self.layers == 0 {
            return Err(Error::Config(
                "latent_dim, units and layers must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// One record per generator update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub iteration: usize,
    /// Ascended discriminator objective from the first (persisted)
    /// discriminator update of the iteration.
    pub d_objective: f64,
    /// Descended generator objective.
    pub g_objective: f64,
    /// Wall-clock seconds since training started.
    pub seconds: f64,
}

/// Objective trajectory of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<StepRecord>,
}

impl TrainHistory {
    /// CSV with columns `iteration,d_objective,g_objective,seconds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,d_objective,g_objective,seconds\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.iteration, r.d_objective, r.g_objective, r.seconds
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        write_text_atomic(path, &self.to_csv())
    }
}

/// A minibatch of latent sequences with their sampled class labels.
#[derive(Debug, Clone)]
pub struct LatentBatch {
    /// Flat latent sequences, `series_len * latent_dim` values each.
    pub latents: Vec<Vec<f64>>,
    /// Constant one-hot label sequences.
    pub labels: Vec<LabelSequence>,
    /// The sampled 1-based class per sequence.
    pub classes: Vec<usize>,
}

impl LatentBatch {
    pub fn len(&self) -> usize {
        self.latents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }
}

/// Draw `m` latent sequences (each entry i.i.d. uniform on [-1, 1]) paired
/// with constant one-hot labels whose class is uniform on `1..=num_classes`.
///
/// Per sample the RNG is consumed latent-first, then class; samples are
/// drawn in order. Replaying the RNG reproduces the batch exactly.
pub fn sample_latent_batch(
    rng: &mut impl Rng,
    m: usize,
    series_len: usize,
    latent_dim: usize,
    num_classes: usize,
) -> LatentBatch {
    let mut latents = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    let mut classes = Vec::with_capacity(m);
    for _ in 0..m {
        let z: Vec<f64> = (0..series_len * latent_dim)
            .map(|_| rng.gen_range(-1.0..=1.0))
            .collect();
        let class = rng.gen_range(1..=num_classes);
        latents.push(z);
        labels.push(LabelSequence::one_hot(class, num_classes, series_len).expect("valid label"));
        classes.push(class);
    }
    LatentBatch {
        latents,
        labels,
        classes,
    }
}

/// Cursor over shuffled dataset indices; reshuffles when a pass is
/// exhausted.
#[derive(Debug, Clone)]
pub struct DataSampler {
    order: Vec<usize>,
    cursor: usize,
}

impl DataSampler {
    pub fn new(dataset_len: usize) -> Self {
        DataSampler {
            order: (0..dataset_len).collect(),
            cursor: dataset_len, // force a shuffle on the first draw
        }
    }

    pub fn next_batch(&mut self, m: usize, rng: &mut impl Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(m);
        for _ in 0..m {
            if self.cursor >= self.order.len() {
                self.order.shuffle(rng);
                self.cursor = 0;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

fn one_hot_labels_for(reals: &[&Series], num_classes: usize, series_len: usize) -> Result<Vec<LabelSequence>> {
    reals
        .iter()
        .map(|s| {
            let class = s.label.ok_or_else(|| {
                Error::InvalidArgument("training series without a class label".into())
            })?;
            LabelSequence::one_hot(class, num_classes, series_len)
        })
        .collect()
}

/// Ascended discriminator objective
/// `(1/m) sum [log D(x, c_x) + log(1 - D(G(z, c_z), c_z))]`
/// and its parameter gradients (of the *descended* negation, ready for
/// [`adam_step`]). The generator is treated as a constant.
pub fn discriminator_objective_and_grads(
    model: &GanModel,
    reals: &[&Series],
    fakes: &LatentBatch,
) -> Result<(f64, NetGrads)> {
    let m = reals.len();
    if m == 0 || fakes.len() != m {
        return Err(Error::InvalidArgument(format!(
            "real and fake batches must have the same nonzero size (got {m} and {})",
            fakes.len()
        )));
    }
    let t_len = model.meta.series_len;
    for s in reals {
        if s.len() != t_len {
            return Err(Error::shape(
                "discriminator batch",
                format!("series of length {t_len}"),
                format!("{}", s.len()),
            ));
        }
    }
    let real_labels = one_hot_labels_for(reals, model.meta.num_classes, t_len)?;

    let gen_fwd = model.generator.forward_batch(&fakes.latents, &fakes.labels)?;
    let fake_values: Vec<Vec<f64>> = (0..m)
        .map(|s| (0..t_len).map(|t| gen_fwd.outputs.at(t, s)[0]).collect())
        .collect();

    let mut series_refs: Vec<&[f64]> = Vec::with_capacity(2 * m);
    series_refs.extend(reals.iter().map(|s| s.values.as_slice()));
    series_refs.extend(fake_values.iter().map(|v| v.as_slice()));
    let mut labels: Vec<LabelSequence> = Vec::with_capacity(2 * m);
    labels.extend(real_labels);
    labels.extend(fakes.labels.iter().cloned());

    let disc_fwd = model.discriminator.forward_batch(&series_refs, &labels)?;

    let inv_m = 1.0 / m as f64;
    let mut objective = 0.0;
    let mut prob_grads = vec![0.0; 2 * m];
    for i in 0..m {
        let p = disc_fwd.probabilities[i];
        objective += inv_m * ln_clamped(p);
        // loss = -objective
        prob_grads[i] = -inv_m * ln_clamped_grad(p);
    }
    for i in 0..m {
        let p = disc_fwd.probabilities[m + i];
        objective += inv_m * ln_clamped(1.0 - p);
        prob_grads[m + i] = inv_m * ln_clamped_grad(1.0 - p);
    }
    if !objective.is_finite() {
        return Err(Error::NonFinite(format!(
            "discriminator objective (value {objective})"
        )));
    }

    let (grads, _) = model.discriminator.backward_batch(&disc_fwd, &prob_grads, true)?;
    Ok((objective, grads))
}

/// Descended generator objective (per [`LossVariant`]) and its parameter
/// gradients, chained through the discriminator.
pub fn generator_objective_and_grads(
    model: &GanModel,
    fakes: &LatentBatch,
    loss: LossVariant,
) -> Result<(f64, NetGrads)> {
    let m = fakes.len();
    if m == 0 {
        return Err(Error::InvalidArgument("empty latent batch".into()));
    }
    let t_len = model.meta.series_len;

    let gen_fwd = model.generator.forward_batch(&fakes.latents, &fakes.labels)?;
    let fake_values: Vec<Vec<f64>> = (0..m)
        .map(|s| (0..t_len).map(|t| gen_fwd.outputs.at(t, s)[0]).collect())
        .collect();
    let series_refs: Vec<&[f64]> = fake_values.iter().map(|v| v.as_slice()).collect();
    let disc_fwd = model.discriminator.forward_batch(&series_refs, &fakes.labels)?;

    let inv_m = 1.0 / m as f64;
    let mut objective = 0.0;
    let mut prob_grads = vec![0.0; m];
    for i in 0..m {
        let p = disc_fwd.probabilities[i];
        match loss {
            LossVariant::Saturating => {
                objective += inv_m * ln_clamped(1.0 - p);
                prob_grads[i] = -inv_m * ln_clamped_grad(1.0 - p);
            }
            LossVariant::NonSaturating => {
                objective -= inv_m * ln_clamped(p);
                prob_grads[i] = -inv_m * ln_clamped_grad(p);
            }
        }
    }
    if !objective.is_finite() {
        return Err(Error::NonFinite(format!(
            "generator objective (value {objective})"
        )));
    }

    // Only input gradients of the discriminator are needed; its parameter
    // gradients are discarded here.
    let (_, input_grads) = model.discriminator.backward_batch(&disc_fwd, &prob_grads, false)?;
    let mut dy = SeqBatch::zeros(t_len, m, 1);
    for t in 0..t_len {
        for s in 0..m {
            dy.at_mut(t, s)[0] = input_grads.at(t, s)[0];
        }
    }
    let grads = model.generator.backward_batch(&gen_fwd, &dy, true)?;
    Ok((objective, grads))
}

/// One Adam ascent step of the discriminator on `m` real and `m` generated
/// samples. The generator is untouched. Returns the ascended objective
/// evaluated at the pre-update parameters.
pub fn discriminator_step(
    model: &mut GanModel,
    reals: &[&Series],
    fakes: &LatentBatch,
    adam_d: &mut AdamState,
) -> Result<f64> {
    let (objective, grads) = discriminator_objective_and_grads(model, reals, fakes)?;
    let mut flat = model.discriminator.flatten();
    adam_step(
        &mut flat,
        &grads.flatten(),
        adam_d,
        &model.discriminator.param_layout(),
    )?;
    model.discriminator.load_flat(&flat)?;
    Ok(objective)
}

fn generator_step(
    model: &mut GanModel,
    fakes: &LatentBatch,
    adam_g: &mut AdamState,
    loss: LossVariant,
) -> Result<f64> {
    let (objective, grads) = generator_objective_and_grads(model, fakes, loss)?;
    let mut flat = model.generator.flatten();
    adam_step(
        &mut flat,
        &grads.flatten(),
        adam_g,
        &model.generator.param_layout(),
    )?;
    model.generator.load_flat(&flat)?;
    Ok(objective)
}

/// One full training iteration: `unroll + 1` discriminator updates (on fresh
/// minibatches; RNG consumed latent-batch-first, then real-batch indices),
/// a discriminator snapshot after the first update, one generator update
/// against the unrolled discriminator, and a restore of the discriminator
/// weights and optimizer state to the snapshot.
///
/// Returns `(d_objective, g_objective)` where the discriminator value comes
/// from the first (persisted) update.
#[allow(clippy::too_many_arguments)]
pub fn generator_step_unrolled(
    model: &mut GanModel,
    adam_d: &mut AdamState,
    adam_g: &mut AdamState,
    unroll: usize,
    sampler: &mut DataSampler,
    series: &[Series],
    batch_size: usize,
    rng: &mut ChaCha8Rng,
    loss: LossVariant,
) -> Result<(f64, f64)> {
    let meta = model.meta.clone();
    let mut snapshot: Option<(Vec<f64>, AdamState)> = None;
    let mut d_objective = 0.0;
    for j in 0..=unroll {
        let fakes = sample_latent_batch(
            rng,
            batch_size,
            meta.series_len,
            meta.latent_dim,
            meta.num_classes,
        );
        let indices = sampler.next_batch(batch_size, rng);
        let reals: Vec<&Series> = indices.iter().map(|&i| &series[i]).collect();
        let objective = discriminator_step(model, &reals, &fakes, adam_d)?;
        if j == 0 {
            snapshot = Some((model.discriminator.flatten(), adam_d.clone()));
            d_objective = objective;
        }
    }

    let fakes = sample_latent_batch(
        rng,
        batch_size,
        meta.series_len,
        meta.latent_dim,
        meta.num_classes,
    );
    let g_objective = generator_step(model, &fakes, adam_g, loss)?;

    let (params, adam_snapshot) = snapshot.expect("at least one discriminator update ran");
    model.discriminator.load_flat(&params)?;
    *adam_d = adam_snapshot;
    Ok((d_objective, g_objective))
}

fn validate_dataset_for_training(dataset: &Dataset, config: &TrainConfig) -> Result<()> {
    if dataset.series.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    if dataset.series.len() < config.batch_size {
        return Err(Error::Config(format!(
            "batch_size {} exceeds dataset size {}",
            config.batch_size,
            dataset.series.len()
        )));
    }
    for (i, s) in dataset.series.iter().enumerate() {
        if s.len() != dataset.series_len {
            return Err(Error::Config(format!(
                "series {i} has length {} but the dataset declares {}",
                s.len(),
                dataset.series_len
            )));
        }
        match s.label {
            Some(l) if l >= 1 && l <= dataset.num_classes => {}
            _ => {
                return Err(Error::Config(format!(
                    "series {i} lacks a class label within 1..={}",
                    dataset.num_classes
                )))
            }
        }
        if s.values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Config(format!(
                "series {i} has values outside [0, 1]; normalize the dataset first"
            )));
        }
    }
    Ok(())
}

/// Train a fresh model. Deterministic given `(dataset, config)`.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(GanModel, TrainHistory)> {
    train_with_checkpoints(dataset, config, |_, _| Ok(()))
}

/// [`train`], invoking `sink(epoch, &model)` every `checkpoint_every`
/// epochs (never when `checkpoint_every` is 0).
pub fn train_with_checkpoints(
    dataset: &Dataset,
    config: &TrainConfig,
    mut sink: impl FnMut(usize, &GanModel) -> Result<()>,
) -> Result<(GanModel, TrainHistory)> {
    config.validate()?;
    validate_dataset_for_training(dataset, config)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = GanModel::new(
        dataset.series_len,
        dataset.num_classes,
        config.latent_dim,
        config.units,
        config.layers,
        &mut rng,
    )?;
    model.meta.seed = config.seed;
    model.meta.norm_bounds = dataset.norm_bounds;

    let mut adam_d = AdamState::new(model.discriminator.param_count(), config.learning_rate);
    let mut adam_g = AdamState::new(model.generator.param_count(), config.learning_rate);
    let mut sampler = DataSampler::new(dataset.series.len());
    let iterations_per_epoch = dataset.series.len().div_ceil(config.batch_size);

    let start = Instant::now();
    let mut history = TrainHistory::default();
    let mut iteration = 0usize;
    for epoch in 1..=config.epochs {
        for _ in 0..iterations_per_epoch {
            iteration += 1;
            let (d_objective, g_objective) = generator_step_unrolled(
                &mut model,
                &mut adam_d,
                &mut adam_g,
                config.unroll,
                &mut sampler,
                &dataset.series,
                config.batch_size,
                &mut rng,
                config.loss,
            )?;
            history.records.push(StepRecord {
                iteration,
                d_objective,
                g_objective,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        model.meta.epoch = epoch;
        if config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 {
            sink(epoch, &model)?;
        }
    }
    Ok((model, history))
}
