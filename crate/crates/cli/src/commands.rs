//! Implementations of the CLI subcommands: each resolves its settings
//! (flag > config file > default), runs the corresponding pipeline, and
//! writes its artifacts plus a reproducibility manifest under the output
//! directory.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tsgan_core::analysis::{
    cca_fit, control_experiment, label_sweep, write_control_csv, write_loadings_csv, CcaResult,
    FeatureProfile,
};
use tsgan_core::augment::{
    extrapolate_augment, hmm_fit, hmm_sample, interpolate_augment, lambda_grid, noise_augment,
    pooled_std,
};
use tsgan_core::data::{
    denormalize_value, load_ucr, normalize_minmax, subsample_training, write_text_atomic,
    write_ucr, Dataset, SubsampleSpec,
};
use tsgan_core::metrics::{
    average_similarity, dtw_distance, k_medoids, nearest_generated, DistanceKind, SimilarityRow,
    write_similarity_csv,
};
use tsgan_core::model::{load_checkpoint, save_checkpoint, GanModel, LabelSequence};
use tsgan_core::numerics::Matrix;
use tsgan_core::series::Series;
use tsgan_core::trainer::{train_with_checkpoints, LossVariant, TrainConfig};

use crate::config::{parse_per_class, parse_scale_grid, parse_state_range, RunConfig};
use crate::{CliError, CliResult, CommonArgs};

/// Everything a run needs to be replayed: versions, command, and the fully
/// resolved settings.
struct Manifest {
    command: &'static str,
    entries: BTreeMap<String, String>,
}

impl Manifest {
    fn new(command: &'static str, seed: u64, out: &Path) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert("tsgan-cli-version".into(), env!("CARGO_PKG_VERSION").into());
        entries.insert("tsgan-core-version".into(), tsgan_core::VERSION.into());
        entries.insert("seed".into(), seed.to_string());
        entries.insert("out".into(), out.display().to_string());
        Manifest { command, entries }
    }

    fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    fn write(&self, out_dir: &Path) -> Result<()> {
        let mut text = format!("command={}\n", self.command);
        for (k, v) in &self.entries {
            text.push_str(&format!("{k}={v}\n"));
        }
        let path = out_dir.join(format!("{}-manifest.txt", self.command));
        write_text_atomic(&path, &text).context("writing manifest")?;
        Ok(())
    }
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    seed: u64,
}

fn setup(common: &CommonArgs) -> Result<Ctx, CliError> {
    let cfg = match &common.config {
        Some(path) => {
            if !path.exists() {
                return Err(CliError::Usage(format!(
                    "config file {} does not exist",
                    path.display()
                )));
            }
            RunConfig::load(path).map_err(|e| CliError::Usage(format!("{e:#}")))?
        }
        None => RunConfig::default(),
    };
    let seed = cfg
        .resolve(common.seed, "seed", 42u64)
        .map_err(|e| CliError::Usage(format!("{e:#}")))?;
    let out = cfg
        .resolve_path_opt(common.out.clone(), "out")
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)
        .with_context(|| format!("creating output directory {}", out.display()))
        .map_err(CliError::Runtime)?;
    Ok(Ctx { cfg, out, seed })
}

fn usage(e: anyhow::Error) -> CliError {
    CliError::Usage(format!("{e:#}"))
}

fn require_input(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "input path {} does not exist",
            path.display()
        )))
    }
}

pub struct TrainArgs {
    pub common: CommonArgs,
    pub data: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub units: Option<usize>,
    pub layers: Option<usize>,
    pub unroll: Option<usize>,
    pub batch: Option<usize>,
    pub lr: Option<f64>,
    pub dz: Option<usize>,
    pub loss: Option<String>,
    pub checkpoint_every: Option<usize>,
    pub train_total: Option<usize>,
    pub train_per_class: Option<String>,
    pub no_normalize: bool,
}

pub fn train(args: TrainArgs) -> CliResult {
    let ctx = setup(&args.common)?;
    let defaults = TrainConfig::default();
    let data_path = ctx.cfg.resolve_path(args.data, "data").map_err(usage)?;
    require_input(&data_path)?;

    let config = TrainConfig {
        epochs: ctx.cfg.resolve(args.epochs, "epochs", defaults.epochs).map_err(usage)?,
        batch_size: ctx.cfg.resolve(args.batch, "batch", defaults.batch_size).map_err(usage)?,
        unroll: ctx.cfg.resolve(args.unroll, "unroll", defaults.unroll).map_err(usage)?,
        learning_rate: ctx.cfg.resolve(args.lr, "lr", defaults.learning_rate).map_err(usage)?,
        latent_dim: ctx.cfg.resolve(args.dz, "dz", defaults.latent_dim).map_err(usage)?,
        units: ctx.cfg.resolve(args.units, "units", defaults.units).map_err(usage)?,
        layers: ctx.cfg.resolve(args.layers, "layers", defaults.layers).map_err(usage)?,
        seed: ctx.seed,
        loss: ctx
            .cfg
            .resolve(
                args.loss
                    .map(|s| s.parse::<LossVariant>())
                    .transpose()
                    .map_err(|e| CliError::Usage(e.to_string()))?,
                "loss",
                defaults.loss,
            )
            .map_err(usage)?,
        checkpoint_every: ctx
            .cfg
            .resolve(args.checkpoint_every, "checkpoint-every", 0)
            .map_err(usage)?,
    };

    let normalize = !(args.no_normalize
        || ctx.cfg.get("no-normalize").map(|v| v == "true").unwrap_or(false));
    let train_total: usize = ctx.cfg.resolve(args.train_total, "train-total", 0).map_err(usage)?;
    let per_class_spec = args
        .train_per_class
        .or_else(|| ctx.cfg.get("train-per-class").map(String::from));

    let raw = load_ucr(&data_path).context("loading training data")?;
    let mut dataset = if normalize {
        normalize_minmax(&raw).context("normalizing")?
    } else {
        raw
    };
    if let Some(spec) = &per_class_spec {
        let counts = parse_per_class(spec).map_err(usage)?;
        dataset = subsample_training(&dataset, &SubsampleSpec::PerClass(counts), ctx.seed)
            .context("subsampling per class")?;
    } else if train_total > 0 {
        dataset = subsample_training(&dataset, &SubsampleSpec::Total(train_total), ctx.seed)
            .context("subsampling")?;
    }

    let mut manifest = Manifest::new("train", ctx.seed, &ctx.out);
    manifest.set("data", data_path.display());
    manifest.set("epochs", config.epochs);
    manifest.set("batch", config.batch_size);
    manifest.set("unroll", config.unroll);
    manifest.set("lr", config.learning_rate);
    manifest.set("dz", config.latent_dim);
    manifest.set("units", config.units);
    manifest.set("layers", config.layers);
    manifest.set("loss", format!("{:?}", config.loss));
    manifest.set("checkpoint-every", config.checkpoint_every);
    manifest.set("normalize", normalize);
    manifest.set("training-series", dataset.series.len());
    if let Some(spec) = &per_class_spec {
        manifest.set("train-per-class", spec);
    }
    if train_total > 0 {
        manifest.set("train-total", train_total);
    }

    // The exact training set (normalized, subsampled) feeds `evaluate`.
    write_ucr(&ctx.out.join("training_data.tsv"), &dataset).context("writing training snapshot")?;

    let out_dir = ctx.out.clone();
    let (model, history) = train_with_checkpoints(&dataset, &config, |epoch, model| {
        save_checkpoint(model, &out_dir.join(format!("model_epoch{epoch}.ckpt")))
    })
    .map_err(anyhow::Error::from)?;

    save_checkpoint(&model, &ctx.out.join("model.ckpt")).context("writing final checkpoint")?;
    history
        .write_csv(&ctx.out.join("history.csv"))
        .context("writing history")?;
    manifest.write(&ctx.out).map_err(CliError::Runtime)?;
    println!(
        "trained {} epochs ({} iterations); artifacts in {}",
        config.epochs,
        history.records.len(),
        ctx.out.display()
    );
    Ok(())
}

/// Draw `count` series from the generator under a fixed one-hot class.
fn generate_series(
    model: &GanModel,
    class: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Series>> {
    let t_len = model.meta.series_len;
    let labels = LabelSequence::one_hot(class, model.meta.num_classes, t_len)?;
    (0..count)
        .map(|_| {
            let z: Vec<f64> = (0..t_len * model.meta.latent_dim)
                .map(|_| rng.gen_range(-1.0..=1.0))
                .collect();
            let mut s = model.generator.forward(&z, &labels)?;
            s.label = Some(class);
            Ok(s)
        })
        .collect::<tsgan_core::Result<Vec<_>>>()
        .map_err(anyhow::Error::from)
}

pub fn generate(
    common: CommonArgs,
    checkpoint: Option<PathBuf>,
    class: Option<usize>,
    count: Option<usize>,
    denormalize: bool,
) -> CliResult {
    let ctx = setup(&common)?;
    let ckpt_path = ctx.cfg.resolve_path(checkpoint, "checkpoint").map_err(usage)?;
    require_input(&ckpt_path)?;
    let class = ctx.cfg.resolve_required(class, "class").map_err(usage)?;
    let count: usize = ctx.cfg.resolve(count, "count", 10).map_err(usage)?;

    let model = load_checkpoint(&ckpt_path).map_err(anyhow::Error::from)?;
    if class == 0 || class > model.meta.num_classes {
        return Err(CliError::Usage(format!(
            "class {class} outside 1..={}",
            model.meta.num_classes
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut series = generate_series(&model, class, count, &mut rng).map_err(CliError::Runtime)?;

    let mut manifest = Manifest::new("generate", ctx.seed, &ctx.out);
    manifest.set("checkpoint", ckpt_path.display());
    manifest.set("class", class);
    manifest.set("count", count);
    manifest.set("denormalize", denormalize);

    if denormalize {
        let bounds = model.meta.norm_bounds.ok_or_else(|| {
            CliError::Usage("checkpoint carries no normalization bounds to denormalize with".into())
        })?;
        for s in &mut series {
            for v in &mut s.values {
                *v = denormalize_value(*v, bounds);
            }
        }
    }

    let dataset = Dataset::from_series(series, Some(model.meta.num_classes))
        .map_err(anyhow::Error::from)?;
    write_ucr(&ctx.out.join("generated.tsv"), &dataset).context("writing generated data")?;
    manifest.write(&ctx.out).map_err(CliError::Runtime)?;
    println!("wrote {count} class-{class} series to {}", ctx.out.join("generated.tsv").display());
    Ok(())
}

pub fn evaluate(
    common: CommonArgs,
    original: Option<PathBuf>,
    target: Option<PathBuf>,
    n: Option<usize>,
    k: Option<usize>,
) -> CliResult {
    let ctx = setup(&common)?;
    let original_path = ctx.cfg.resolve_path(original, "original").map_err(usage)?;
    let target_path = ctx.cfg.resolve_path(target, "target").map_err(usage)?;
    require_input(&original_path)?;
    require_input(&target_path)?;
    let n_setting: usize = ctx.cfg.resolve(n, "n", 0).map_err(usage)?;
    let k_setting: usize = ctx.cfg.resolve(k, "k", 0).map_err(usage)?;

    let original = load_ucr(&original_path).context("loading original data")?;
    let target = load_ucr(&target_path).context("loading target data")?;

    // Groups are matched by original label value, not by remapped index, so
    // a target file holding a subset of the classes still lines up.
    let target_class_for = |class: usize| -> Option<usize> {
        let value = original.class_values.get(class - 1)?;
        target
            .class_values
            .iter()
            .position(|v| v == value)
            .map(|i| i + 1)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut rows: Vec<SimilarityRow> = Vec::new();
    for class in 1..=original.num_classes {
        let orig_group = original.class_members(class);
        let target_group = target_class_for(class)
            .map(|tc| target.class_members(tc))
            .unwrap_or_default();
        if orig_group.is_empty() || target_group.is_empty() {
            log::warn!("class {class}: empty group (original {}, target {}); skipped",
                orig_group.len(), target_group.len());
            continue;
        }
        let n_class = if n_setting == 0 {
            orig_group.len().min(target_group.len())
        } else {
            n_setting
        };
        let baseline = average_similarity(&orig_group, None, n_class.min(orig_group.len()), &mut rng)
            .map_err(anyhow::Error::from)?;
        rows.push(SimilarityRow {
            group_a: format!("original_c{class}"),
            group_b: format!("original_c{class}"),
            n: n_class.min(orig_group.len()),
            mean: baseline.mean,
            std_dev: baseline.std_dev,
        });
        let cross = average_similarity(&orig_group, Some(&target_group), n_class, &mut rng)
            .map_err(anyhow::Error::from)?;
        rows.push(SimilarityRow {
            group_a: format!("original_c{class}"),
            group_b: format!("target_c{class}"),
            n: n_class,
            mean: cross.mean,
            std_dev: cross.std_dev,
        });
    }
    write_similarity_csv(&ctx.out.join("similarity.csv"), &rows).context("writing similarity")?;

    let mut manifest = Manifest::new("evaluate", ctx.seed, &ctx.out);
    manifest.set("original", original_path.display());
    manifest.set("target", target_path.display());
    manifest.set("n", n_setting);
    manifest.set("k", k_setting);

    // Exemplar protocol: k medoids per original class, each matched to its
    // DTW-nearest target series.
    if k_setting > 0 {
        let mut text = String::from("class,medoid_rank,original_index,target_index,dtw\n");
        for class in 1..=original.num_classes {
            let orig_group = original.class_members(class);
            let target_group = target_class_for(class)
                .map(|tc| target.class_members(tc))
                .unwrap_or_default();
            if orig_group.len() < k_setting || target_group.is_empty() {
                continue;
            }
            let clustering = k_medoids(&orig_group, k_setting, DistanceKind::Dtw)
                .map_err(anyhow::Error::from)?;
            for (rank, &medoid) in clustering.medoids.iter().enumerate() {
                let nearest = nearest_generated(&orig_group[medoid].values, &target_group)
                    .map_err(anyhow::Error::from)?;
                let d = dtw_distance(&orig_group[medoid].values, &target_group[nearest].values)
                    .map_err(anyhow::Error::from)?;
                text.push_str(&format!(
                    "{class},{},{medoid},{nearest},{}\n",
                    rank + 1,
                    d.distance
                ));
            }
        }
        write_text_atomic(&ctx.out.join("exemplars.csv"), &text).context("writing exemplars")?;
    }

    manifest.write(&ctx.out).map_err(CliError::Runtime)?;
    println!("wrote {} similarity rows to {}", rows.len(), ctx.out.join("similarity.csv").display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn augment(
    common: CommonArgs,
    data: Option<PathBuf>,
    method: Option<String>,
    count: Option<usize>,
    gamma: Option<f64>,
    states: Option<String>,
    mixtures: Option<usize>,
    no_normalize: bool,
) -> CliResult {
    let ctx = setup(&common)?;
    let data_path = ctx.cfg.resolve_path(data, "data").map_err(usage)?;
    require_input(&data_path)?;
    let method: String = ctx.cfg.resolve_required(method, "method").map_err(usage)?;
    let count: usize = ctx.cfg.resolve(count, "count", 10).map_err(usage)?;
    let gamma: f64 = ctx.cfg.resolve(gamma, "gamma", 0.5).map_err(usage)?;
    let states_spec: String = ctx
        .cfg
        .resolve(states, "states", "1..10".to_string())
        .map_err(usage)?;
    let mixtures: usize = ctx.cfg.resolve(mixtures, "mixtures", 1).map_err(usage)?;
    let normalize = !(no_normalize
        || ctx.cfg.get("no-normalize").map(|v| v == "true").unwrap_or(false));

    let raw = load_ucr(&data_path).context("loading data")?;
    let dataset = if normalize {
        normalize_minmax(&raw).context("normalizing")?
    } else {
        raw
    };

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let sigma = pooled_std(&dataset.series);
    let grid = lambda_grid();
    let mut augmented: Vec<Series> = Vec::with_capacity(count * dataset.num_classes);

    match method.as_str() {
        "noise" | "interpolate" | "extrapolate" => {
            for class in 1..=dataset.num_classes {
                let members = dataset.class_members(class);
                if members.is_empty() {
                    return Err(CliError::Usage(format!("class {class} has no samples")));
                }
                for _ in 0..count {
                    let i = rng.gen_range(0..members.len());
                    let sample = match method.as_str() {
                        "noise" => noise_augment(&members[i], gamma, sigma, &mut rng),
                        "interpolate" => {
                            let lambda = grid[rng.gen_range(0..grid.len())];
                            interpolate_augment(&members, i, lambda)
                        }
                        _ => {
                            let lambda = grid[rng.gen_range(0..grid.len())];
                            extrapolate_augment(&members, i, lambda)
                        }
                    }
                    .map_err(anyhow::Error::from)?;
                    augmented.push(sample);
                }
            }
        }
        "hmm" => {
            let range = parse_state_range(&states_spec).map_err(usage)?;
            for class in 1..=dataset.num_classes {
                let members = dataset.class_members(class);
                if members.is_empty() {
                    return Err(CliError::Usage(format!("class {class} has no samples")));
                }
                let fit = hmm_fit(&members, range.clone(), mixtures, &mut rng)
                    .map_err(anyhow::Error::from)?;
                log::info!(
                    "class {class}: AIC selected {} states (lnL {:.3})",
                    fit.model.num_states(),
                    fit.log_likelihood
                );
                for _ in 0..count {
                    let mut s = hmm_sample(&fit.model, dataset.series_len, &mut rng)
                        .map_err(anyhow::Error::from)?;
                    s.label = Some(class);
                    augmented.push(s);
                }
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown augmentation method '{other}' (expected noise, interpolate, extrapolate, or hmm)"
            )))
        }
    }

    let mut out_set = dataset.clone();
    out_set.series = augmented;
    let out_path = ctx.out.join(format!("augmented_{method}.tsv"));
    write_ucr(&out_path, &out_set).context("writing augmented data")?;

    let mut manifest = Manifest::new("augment", ctx.seed, &ctx.out);
    manifest.set("data", data_path.display());
    manifest.set("method", &method);
    manifest.set("count", count);
    manifest.set("gamma", gamma);
    manifest.set("states", &states_spec);
    manifest.set("mixtures", mixtures);
    manifest.set("normalize", normalize);
    manifest.write(&ctx.out).map_err(CliError::Runtime)?;
    println!("wrote {} series to {}", out_set.series.len(), out_path.display());
    Ok(())
}

pub fn sweep(common: CommonArgs, checkpoint: Option<PathBuf>, steps: Option<usize>) -> CliResult {
    let ctx = setup(&common)?;
    let ckpt_path = ctx.cfg.resolve_path(checkpoint, "checkpoint").map_err(usage)?;
    require_input(&ckpt_path)?;
    let steps: usize = ctx.cfg.resolve(steps, "steps", 100).map_err(usage)?;

    let model = load_checkpoint(&ckpt_path).map_err(anyhow::Error::from)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let latent: Vec<f64> = (0..model.meta.series_len * model.meta.latent_dim)
        .map(|_| rng.gen_range(-1.0..=1.0))
        .collect();
    let result = label_sweep(&model, &latent, steps).map_err(anyhow::Error::from)?;
    result
        .write_csv(&ctx.out.join("sweep.csv"))
        .context("writing sweep matrix")?;
    let z_csv = result
        .latent
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    write_text_atomic(&ctx.out.join("sweep_latent.csv"), &format!("{z_csv}\n"))
        .context("writing sweep latent")?;

    let mut manifest = Manifest::new("sweep", ctx.seed, &ctx.out);
    manifest.set("checkpoint", ckpt_path.display());
    manifest.set("steps", steps);
    manifest.write(&ctx.out).map_err(CliError::Runtime)?;
    println!("wrote {steps}-row sweep to {}", ctx.out.join("sweep.csv").display());
    Ok(())
}

/// Latent/feature pair matrices for CCA: `samples` draws of `z` under a
/// fixed one-hot class, each generated and featurized.
fn cca_pairs(
    model: &GanModel,
    class: usize,
    samples: usize,
    profile: FeatureProfile,
    seed: u64,
) -> Result<(Matrix, Matrix)> {
    let t_len = model.meta.series_len;
    let p = t_len * model.meta.latent_dim;
    let labels = LabelSequence::one_hot(class, model.meta.num_classes, t_len)?;
    let q = profile.names().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Matrix::zeros(samples, p);
    let mut y = Matrix::zeros(samples, q);
    for i in 0..samples {
        let z: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let series = model.generator.forward(&z, &labels)?;
        let features = tsgan_core::analysis::extract_features(&series.values, profile)?;
        for (j, v) in z.iter().enumerate() {
            x.set(i, j, *v);
        }
        for (j, v) in features.values.iter().enumerate() {
            y.set(i, j, *v);
        }
    }
    Ok((x, y))
}

fn latent_variable_names(t_len: usize, latent_dim: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(t_len * latent_dim);
    for t in 1..=t_len {
        for d in 1..=latent_dim {
            if latent_dim == 1 {
                names.push(format!("z_{t}"));
            } else {
                names.push(format!("z_{t}_{d}"));
            }
        }
    }
    names
}

fn fit_cca_for(
    model: &GanModel,
    class: usize,
    samples: usize,
    profile: FeatureProfile,
    seed: u64,
) -> Result<CcaResult> {
    let (x, y) = cca_pairs(model, class, samples, profile, seed)?;
    cca_fit(&x, &y).map_err(anyhow::Error::from)
}

pub fn cca(
    common: CommonArgs,
    checkpoint: Option<PathBuf>,
    class: Option<usize>,
    samples: Option<usize>,
    profile: Option<String>,
) -> CliResult {
    let ctx = setup(&common)?;
    let ckpt_path = ctx.cfg.resolve_path(checkpoint, "checkpoint").map_err(usage)?;
    require_input(&ckpt_path)?;
    let class: usize = ctx.cfg.resolve(class, "class", 1).map_err(usage)?;
    let samples: usize = ctx.cfg.resolve(samples, "samples", 1000).map_err(usage)?;
    let profile: FeatureProfile = ctx
        .cfg
        .resolve(
            profile.map(|s| s.parse()).transpose().map_err(|e: tsgan_core::Error| CliError::Usage(e.to_string()))?,
            "profile",
            FeatureProfile::Ecg,
        )
        .map_err(usage)?;

    let model = load_checkpoint(&ckpt_path).map_err(anyhow::Error::from)?;
    let result = fit_cca_for(&model, class, samples, profile, ctx.seed).map_err(CliError::Runtime)?;

    let input_names = latent_variable_names(model.meta.series_len, model.meta.latent_dim);
    write_loadings_csv(&ctx.out.join("loadings.csv"), &result, &input_names, profile.names())
        .context("writing loadings")?;
    let mut corr = String::from("component,correlation\n");
    for (i, rho) in result.correlations.iter().enumerate() {
        corr.push_str(&format!("{},{rho}\n", i + 1));
    }
    write_text_atomic(&ctx.out.join("correlations.csv"), &corr).context("writing correlations")?;

    let mut manifest = Manifest::new("cca", ctx.seed, &ctx.out);
    manifest.set("checkpoint", ckpt_path.display());
    manifest.set("class", class);
    manifest.set("samples", samples);
    manifest.set("profile", format!("{profile:?}").to_lowercase());
    manifest.write(&ctx.out).map_err(CliError::Runtime)?;
    println!(
        "first canonical correlation {:.4}; loadings in {}",
        result.correlations.first().copied().unwrap_or(0.0),
        ctx.out.join("loadings.csv").display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn control(
    common: CommonArgs,
    checkpoint: Option<PathBuf>,
    class: Option<usize>,
    samples: Option<usize>,
    profile: Option<String>,
    scales: Option<String>,
    samples_per_scale: Option<usize>,
) -> CliResult {
    let ctx = setup(&common)?;
    let ckpt_path = ctx.cfg.resolve_path(checkpoint, "checkpoint").map_err(usage)?;
    require_input(&ckpt_path)?;
    let class: usize = ctx.cfg.resolve(class, "class", 1).map_err(usage)?;
    let samples: usize = ctx.cfg.resolve(samples, "samples", 1000).map_err(usage)?;
    let profile: FeatureProfile = ctx
        .cfg
        .resolve(
            profile.map(|s| s.parse()).transpose().map_err(|e: tsgan_core::Error| CliError::Usage(e.to_string()))?,
            "profile",
            FeatureProfile::Ecg,
        )
        .map_err(usage)?;
    let scales_spec: String = ctx
        .cfg
        .resolve(scales, "scales", "0:2:11".to_string())
        .map_err(usage)?;
    let scale_grid = parse_scale_grid(&scales_spec).map_err(usage)?;
    let samples_per_scale: usize = ctx
        .cfg
        .resolve(samples_per_scale, "samples-per-scale", 1)
        .map_err(usage)?;

    let model = load_checkpoint(&ckpt_path).map_err(anyhow::Error::from)?;
    let result = fit_cca_for(&model, class, samples, profile, ctx.seed).map_err(CliError::Runtime)?;

    let rows = control_experiment(&model, &result, &scale_grid, class, samples_per_scale, profile)
        .map_err(anyhow::Error::from)?;
    write_control_csv(&ctx.out.join("control_features.csv"), &rows, profile)
        .context("writing control features")?;

    // The control inputs and the series they generate, for plotting.
    let inputs = tsgan_core::analysis::control_inputs(
        &result,
        &scale_grid,
        model.meta.series_len,
        model.meta.latent_dim,
    )
    .map_err(anyhow::Error::from)?;
    let labels = LabelSequence::one_hot(class, model.meta.num_classes, model.meta.series_len)
        .map_err(anyhow::Error::from)?;
    let mut inputs_csv = String::from("scale,values...\n");
    let mut series_csv = String::from("scale,values...\n");
    for (s, z) in scale_grid.iter().zip(&inputs) {
        let zs = z.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        inputs_csv.push_str(&format!("{s},{zs}\n"));
        let gen = model.generator.forward(z, &labels).map_err(anyhow::Error::from)?;
        let vs = gen.values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        series_csv.push_str(&format!("{s},{vs}\n"));
    }
    write_text_atomic(&ctx.out.join("control_inputs.csv"), &inputs_csv)
        .context("writing control inputs")?;
    write_text_atomic(&ctx.out.join("control_series.csv"), &series_csv)
        .context("writing control series")?;

    let mut manifest = Manifest::new("control", ctx.seed, &ctx.out);
    manifest.set("checkpoint", ckpt_path.display());
    manifest.set("class", class);
    manifest.set("samples", samples);
    manifest.set("profile", format!("{profile:?}").to_lowercase());
    manifest.set("scales", &scales_spec);
    manifest.set("samples-per-scale", samples_per_scale);
    manifest.write(&ctx.out).map_err(CliError::Runtime)?;
    println!(
        "wrote {}-scale control table to {}",
        scale_grid.len(),
        ctx.out.join("control_features.csv").display()
    );
    Ok(())
}
