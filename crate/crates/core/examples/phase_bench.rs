// Times the forward/backward phases at the toy-training shapes.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use tsgan_core::model::{GanModel, LabelSequence};
use tsgan_core::trainer::{discriminator_objective_and_grads, sample_latent_batch};
use tsgan_core::series::Series;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t_len = 16; let m = 16;
    let model = GanModel::new(t_len, 2, 1, 32, 2, &mut rng).unwrap();

    // Phase 1: generator forward only (batch m)
    let fakes = sample_latent_batch(&mut rng, m, t_len, 1, 2);
    let reps = 200;
    let t = Instant::now();
    for _ in 0..reps {
        let _ = model.generator.forward_batch(&fakes.latents, &fakes.labels).unwrap();
    }
    println!("G fwd batch16: {:.3} ms", t.elapsed().as_secs_f64()*1e3/reps as f64);

    // Phase 2: full discriminator objective+grads (G fwd + D fwd + D bwd on 2m)
    let reals: Vec<Series> = (0..m).map(|i| {
        Series::labeled((0..t_len).map(|_| rng.gen_range(0.0..1.0)).collect(), 1 + i % 2)
    }).collect();
    let real_refs: Vec<&Series> = reals.iter().collect();
    let t = Instant::now();
    for _ in 0..reps {
        let _ = discriminator_objective_and_grads(&model, &real_refs, &fakes).unwrap();
    }
    println!("D objective+grads (2m fwd+bwd + m G fwd): {:.3} ms", t.elapsed().as_secs_f64()*1e3/reps as f64);

    // Phase 3: D forward only on 2m
    let labels: Vec<LabelSequence> = (0..2*m).map(|i| LabelSequence::one_hot(1 + i % 2, 2, t_len).unwrap()).collect();
    let vals: Vec<Vec<f64>> = (0..2*m).map(|_| (0..t_len).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let refs: Vec<&[f64]> = vals.iter().map(|v| v.as_slice()).collect();
    let t = Instant::now();
    for _ in 0..reps {
        let _ = model.discriminator.forward_batch(&refs, &labels).unwrap();
    }
    println!("D fwd batch32: {:.3} ms", t.elapsed().as_secs_f64()*1e3/reps as f64);
}
