//! Scratch probe for the toy training run: timing + learning metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsgan_core::data::Dataset;
use tsgan_core::metrics::{average_similarity, dtw_distance, k_medoids, DistanceKind};
use tsgan_core::model::{GanModel, LabelSequence};
use tsgan_core::series::Series;
use tsgan_core::trainer::{LossVariant, TrainConfig};

fn toy_dataset(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_len = 16usize;
    let mut series = Vec::new();
    for _ in 0..128 {
        let phase: f64 = rng.gen_range(-0.25..0.25);
        let values: Vec<f64> = (0..t_len)
            .map(|t| {
                let arg = 2.0 * std::f64::consts::PI * (t as f64 / t_len as f64) + phase;
                (0.5 + 0.3 * arg.sin() + rng.gen_range(-0.02..0.02)).clamp(0.0, 1.0)
            })
            .collect();
        series.push(Series::labeled(values, 1));
    }
    for _ in 0..128 {
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

fn generate(model: &GanModel, class: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Series> {
    let t_len = model.meta.series_len;
    (0..count)
        .map(|_| {
            let z: Vec<f64> = (0..t_len * model.meta.latent_dim)
                .map(|_| rng.gen_range(-1.0..=1.0))
                .collect();
            let labels = LabelSequence::one_hot(class, model.meta.num_classes, t_len).unwrap();
            let mut s = model.generator.forward(&z, &labels).unwrap();
            s.label = Some(class);
            s
        })
        .collect()
}

fn mean_cross_dtw(model: &GanModel, ds: &Dataset, eval_seed: u64) -> [f64; 2] {
    let mut out = [0.0; 2];
    for class in 1..=2usize {
        let mut rng = ChaCha8Rng::seed_from_u64(eval_seed + class as u64);
        let generated = generate(model, class, 64, &mut rng);
        let training = ds.class_members(class);
        let rep = average_similarity(&training, Some(&generated), 64, &mut rng).unwrap();
        out[class - 1] = rep.mean;
    }
    out
}

fn main() {
    let epochs: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(60);
    let seed: u64 = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(7);
    println!("train seed {seed}");
    let ds = toy_dataset(2024);
    let config = TrainConfig {
        epochs,
        batch_size: 16,
        unroll: 5,
        learning_rate: 1e-4,
        latent_dim: 1,
        units: 32,
        layers: 2,
        seed,
        loss: LossVariant::Saturating,
        checkpoint_every: 0,
    };

    // Within-original baselines: the asymptote a perfect generator reaches.
    for class in 1..=2usize {
        let members = ds.class_members(class);
        let mut rng = ChaCha8Rng::seed_from_u64(42 + class as u64);
        let rep = average_similarity(&members, None, 64, &mut rng).unwrap();
        println!("within-original class{class}: {:.4} +/- {:.4}", rep.mean, rep.std_dev);
    }

    // Epoch-0 reference: the same construction train() performs.
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut epoch0 = GanModel::new(16, 2, 1, 32, 2, &mut init_rng).unwrap();
    epoch0.meta.seed = config.seed;
    let base = mean_cross_dtw(&epoch0, &ds, 555);
    println!("epoch-0 mean cross DTW: class1 {:.4} class2 {:.4}", base[0], base[1]);

    let mut config = config;
    config.checkpoint_every = 100;
    let start = std::time::Instant::now();
    let (model, history) = tsgan_core::trainer::train_with_checkpoints(&ds, &config, |epoch, m| {
        let d = mean_cross_dtw(m, &ds, 555);
        println!(
            "  epoch {epoch}: cross DTW class1 {:.4} ({:.2}x) class2 {:.4} ({:.2}x)",
            d[0],
            d[0] / base[0],
            d[1],
            d[1] / base[1]
        );
        Ok(())
    })
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    println!(
        "trained {} epochs ({} iterations) in {:.1}s ({:.3}s/iter)",
        epochs,
        history.records.len(),
        secs,
        secs / history.records.len() as f64
    );
    let last = history.records.last().unwrap();
    println!("final objectives: d {:.4} g {:.4}", last.d_objective, last.g_objective);

    let trained = mean_cross_dtw(&model, &ds, 555);
    println!(
        "trained mean cross DTW: class1 {:.4} ({:.2}x) class2 {:.4} ({:.2}x)",
        trained[0],
        trained[0] / base[0],
        trained[1],
        trained[1] / base[1]
    );

    // Medoid classification of generated samples.
    let medoid1 = {
        let members = ds.class_members(1);
        let r = k_medoids(&members, 1, DistanceKind::Dtw).unwrap();
        members[r.medoids[0]].clone()
    };
    let medoid2 = {
        let members = ds.class_members(2);
        let r = k_medoids(&members, 1, DistanceKind::Dtw).unwrap();
        members[r.medoids[0]].clone()
    };
    let mut correct = 0usize;
    let mut total = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    for class in 1..=2usize {
        for s in generate(&model, class, 64, &mut rng) {
            let d1 = dtw_distance(&s.values, &medoid1.values).unwrap().distance;
            let d2 = dtw_distance(&s.values, &medoid2.values).unwrap().distance;
            let predicted = if d1 < d2 { 1 } else { 2 };
            if predicted == class {
                correct += 1;
            }
            total += 1;
        }
    }
    println!(
        "medoid classification: {}/{} ({:.1}%)",
        correct,
        total,
        100.0 * correct as f64 / total as f64
    );

    // A couple of sample rows for eyeballing.
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for class in 1..=2usize {
        let s = &generate(&model, class, 1, &mut rng)[0];
        let fmt: Vec<String> = s.values.iter().map(|v| format!("{v:.2}")).collect();
        println!("class {class} sample: {}", fmt.join(" "));
    }
}
