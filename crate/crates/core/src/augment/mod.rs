//! The four baseline generators the GAN is compared against: additive
//! Gaussian noise, same-class interpolation, same-class extrapolation, and a
//! Gaussian hidden Markov model.

pub mod hmm;

pub use hmm::{hmm_fit, hmm_sample, GaussComponent, HmmCandidate, HmmFit, HmmModel};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::metrics::euclidean_distance;
use crate::series::Series;

/// Population standard deviation pooled across every point of every series.
pub fn pooled_std(training: &[Series]) -> f64 {
    let count: usize = training.iter().map(Series::len).sum();
    if count == 0 {
        return 0.0;
    }
    let mean: f64 = training.iter().flat_map(|s| &s.values).sum::<f64>() / count as f64;
    let var: f64 = training
        .iter()
        .flat_map(|s| &s.values)
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / count as f64;
    var.sqrt()
}

/// `x' = x + gamma * xi`, `xi_t ~ N(0, sigma^2)` i.i.d. per step. The output
/// is not clipped, so values may leave [0, 1].
pub fn noise_augment(x: &Series, gamma: f64, pooled_sigma: f64, rng: &mut impl Rng) -> Result<Series> {
    if gamma < 0.0 || pooled_sigma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "noise_augment needs gamma >= 0 and sigma >= 0 (got {gamma}, {pooled_sigma})"
        )));
    }
    if gamma == 0.0 || pooled_sigma == 0.0 {
        // Zero noise: exact identity, no RNG consumption needed for values.
        return Ok(x.clone());
    }
    let normal = Normal::new(0.0, pooled_sigma).expect("finite sigma");
    let values = x
        .values
        .iter()
        .map(|v| v + gamma * normal.sample(rng))
        .collect();
    Ok(Series {
        values,
        label: x.label,
    })
}

/// Index of the Euclidean-nearest member of `same_class` other than
/// `exclude` itself; ties break toward lower indices.
pub fn nearest_same_class(same_class: &[Series], exclude: usize) -> Result<usize> {
    if same_class.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 same-class samples, have {}",
            same_class.len()
        )));
    }
    if exclude >= same_class.len() {
        return Err(Error::InvalidArgument(format!(
            "index {exclude} outside the class set of {}",
            same_class.len()
        )));
    }
    let target = &same_class[exclude];
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in same_class.iter().enumerate() {
        if i == exclude {
            continue;
        }
        if s.len() != target.len() {
            return Err(Error::shape(
                "nearest_same_class",
                format!("length {}", target.len()),
                format!("{} at index {i}", s.len()),
            ));
        }
        let d = euclidean_distance(&s.values, &target.values);
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    Ok(best.unwrap().0)
}

/// `x' = (1 - lambda) x_i + lambda x_j` with `x_j` the Euclidean-nearest
/// same-class neighbor of `x_i` (never `x_i` itself).
pub fn interpolate_augment(same_class: &[Series], i: usize, lambda: f64) -> Result<Series> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "interpolation lambda {lambda} outside [0, 1]"
        )));
    }
    let j = nearest_same_class(same_class, i)?;
    let xi = &same_class[i];
    let xj = &same_class[j];
    let values = xi
        .values
        .iter()
        .zip(&xj.values)
        .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
        .collect();
    Ok(Series {
        values,
        label: xi.label,
    })
}

/// `x' = (1 + lambda) x_i - lambda x_j` with the same neighbor rule as
/// [`interpolate_augment`].
pub fn extrapolate_augment(same_class: &[Series], i: usize, lambda: f64) -> Result<Series> {
    if lambda < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "extrapolation lambda {lambda} must be >= 0"
        )));
    }
    let j = nearest_same_class(same_class, i)?;
    let xi = &same_class[i];
    let xj = &same_class[j];
    let values = xi
        .values
        .iter()
        .zip(&xj.values)
        .map(|(a, b)| (1.0 + lambda) * a - lambda * b)
        .collect();
    Ok(Series {
        values,
        label: xi.label,
    })
}

/// The coefficient grid `{0.1, 0.2, ..., 0.9}` sampled per generated sample.
pub fn lambda_grid() -> [f64; 9] {
    [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
}
