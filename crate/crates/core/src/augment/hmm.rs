//! Gaussian(-mixture) hidden Markov model: scaled forward-backward,
//! Baum-Welch estimation over a set of i.i.d. emission sequences, AIC model
//! selection over a range of state counts, and ancestral sampling.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::series::Series;

/// Variances below this are treated as collapsed.
const VAR_FLOOR: f64 = 1e-8;
/// Baum-Welch stops when the log-likelihood improves by less than this.
const CONVERGENCE_TOL: f64 = 1e-6;
const MAX_ITERATIONS: usize = 200;

/// One Gaussian mixture component of a state's emission distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

/// A hidden Markov model with per-state Gaussian mixture emissions.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    /// Initial state distribution, length `S`.
    pub initial: Vec<f64>,
    /// Row-stochastic transition matrix, `S x S`.
    pub transition: Matrix,
    /// `S` states, each with `M` mixture components.
    pub emissions: Vec<Vec<GaussComponent>>,
}

impl HmmModel {
    pub fn num_states(&self) -> usize {
        self.initial.len()
    }

    pub fn mixture_size(&self) -> usize {
        self.emissions.first().map_or(0, Vec::len)
    }

    /// Number of free parameters: `(S-1)` initial probabilities, `S(S-1)`
    /// transitions, and per state `M` means, `M` variances, `M-1` weights.
    pub fn free_parameters(&self) -> usize {
        let s = self.num_states();
        let m = self.mixture_size();
        (s - 1) + s * (s - 1) + s * (3 * m - 1)
    }

    /// Mixture emission density of one state at `x`.
    pub fn emission_density(&self, state: usize, x: f64) -> f64 {
        self.emissions[state]
            .iter()
            .map(|c| c.weight * gauss_pdf(x, c.mean, c.variance))
            .sum()
    }
}

#[inline]
fn gauss_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    (-(d * d) / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}

/// Fit result for one state count.
#[derive(Debug, Clone)]
pub struct HmmCandidate {
    pub states: usize,
    pub log_likelihood: f64,
    pub aic: f64,
    pub iterations: usize,
    /// Log-likelihood after every Baum-Welch iteration (non-decreasing).
    pub trace: Vec<f64>,
}

/// The AIC-selected model plus the scores of every candidate state count.
#[derive(Debug, Clone)]
pub struct HmmFit {
    pub model: HmmModel,
    pub log_likelihood: f64,
    pub aic: f64,
    pub iterations: usize,
    pub candidates: Vec<HmmCandidate>,
}

enum FitError {
    /// Numerical collapse; the caller re-jitters and retries once.
    Degenerate(String),
    Fatal(Error),
}

/// Fit models for every state count in `state_range` (Baum-Welch until the
/// log-likelihood improves by less than 1e-6 or 200 iterations) and return
/// the one minimizing `AIC = 2k - 2 ln L`. The training series are treated
/// as i.i.d. emission sequences.
pub fn hmm_fit(
    training: &[Series],
    state_range: std::ops::RangeInclusive<usize>,
    mixtures: usize,
    rng: &mut impl Rng,
) -> Result<HmmFit> {
    if training.is_empty() || training.iter().any(|s| s.is_empty()) {
        return Err(Error::InvalidArgument(
            "hmm_fit needs at least one non-empty sequence".into(),
        ));
    }
    if state_range.is_empty() || *state_range.start() == 0 {
        return Err(Error::InvalidArgument(format!(
            "invalid state range {:?}",
            state_range
        )));
    }
    if mixtures == 0 {
        return Err(Error::InvalidArgument("mixtures must be >= 1".into()));
    }

    let sequences: Vec<&[f64]> = training.iter().map(|s| s.values.as_slice()).collect();
    let mut best: Option<(HmmModel, HmmCandidate)> = None;
    let mut candidates = Vec::new();

    for states in state_range {
        let fitted = match baum_welch(&sequences, states, mixtures, 0.1, rng) {
            Ok(f) => f,
            Err(FitError::Degenerate(first_reason)) => {
                // Re-jitter and retry once with a wider spread.
                match baum_welch(&sequences, states, mixtures, 0.5, rng) {
                    Ok(f) => f,
                    Err(FitError::Degenerate(reason)) => {
                        return Err(Error::NonFinite(format!(
                            "HMM fit with {states} states is degenerate after retry: {reason} (first attempt: {first_reason})"
                        )));
                    }
                    Err(FitError::Fatal(e)) => return Err(e),
                }
            }
            Err(FitError::Fatal(e)) => return Err(e),
        };
        let (model, trace, iterations) = fitted;
        let log_likelihood = *trace.last().unwrap();
        let aic = 2.0 * model.free_parameters() as f64 - 2.0 * log_likelihood;
        let candidate = HmmCandidate {
            states,
            log_likelihood,
            aic,
            iterations,
            trace,
        };
        if best.as_ref().map_or(true, |(_, c)| aic < c.aic) {
            best = Some((model, candidate.clone()));
        }
        candidates.push(candidate);
    }

    let (model, chosen) = best.expect("non-empty state range");
    Ok(HmmFit {
        model,
        log_likelihood: chosen.log_likelihood,
        aic: chosen.aic,
        iterations: chosen.iterations,
        candidates,
    })
}

fn initial_model(
    sequences: &[&[f64]],
    states: usize,
    mixtures: usize,
    jitter: f64,
    rng: &mut impl Rng,
) -> HmmModel {
    let mut points: Vec<f64> = sequences.iter().flat_map(|s| s.iter().copied()).collect();
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = points.len();
    let mean: f64 = points.iter().sum::<f64>() / n as f64;
    let var: f64 = points.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n as f64;
    let spread = var.sqrt().max(1e-3);

    let mut emissions = Vec::with_capacity(states);
    for s in 0..states {
        let mut comps = Vec::with_capacity(mixtures);
        for m in 0..mixtures {
            // Quantile anchor per (state, component) plus jitter.
            let q = (s * mixtures + m) as f64 + 0.5;
            let idx = ((q / (states * mixtures) as f64) * n as f64) as usize;
            let anchor = points[idx.min(n - 1)];
            comps.push(GaussComponent {
                weight: 1.0 / mixtures as f64,
                mean: anchor + jitter * spread * rng.gen_range(-1.0..1.0),
                variance: var.max(1e-4),
            });
        }
        emissions.push(comps);
    }

    // Mildly sticky transitions; uniform initial distribution.
    let stick = 0.5;
    let off = (1.0 - stick) / states as f64;
    let transition = Matrix::from_fn(states, states, |i, j| {
        if i == j {
            stick + off
        } else {
            off
        }
    });
    HmmModel {
        initial: vec![1.0 / states as f64; states],
        transition,
        emissions,
    }
}

type FitOutcome = (HmmModel, Vec<f64>, usize);

fn baum_welch(
    sequences: &[&[f64]],
    states: usize,
    mixtures: usize,
    jitter: f64,
    rng: &mut impl Rng,
) -> std::result::Result<FitOutcome, FitError> {
    let mut model = initial_model(sequences, states, mixtures, jitter, rng);
    let mut trace: Vec<f64> = Vec::new();

    for iteration in 1..=MAX_ITERATIONS {
        // Accumulators over all sequences.
        let mut init_acc = vec![0.0; states];
        let mut xi_acc = vec![0.0; states * states];
        let mut gamma_trans_acc = vec![0.0; states]; // sum over t < T of gamma
        let mut comp_weight_acc = vec![0.0; states * mixtures];
        let mut comp_mean_acc = vec![0.0; states * mixtures];
        let mut gamma_state_acc = vec![0.0; states];
        // (observation, responsibility) pairs are needed twice (mean, then
        // variance), so store per-component first and second moments of the
        // responsibilities directly.
        let mut comp_sq_acc = vec![0.0; states * mixtures];

        let mut log_likelihood = 0.0;

        for seq in sequences {
            let t_len = seq.len();
            // Per-step emission densities (state-level and per component).
            let mut b = vec![0.0; t_len * states];
            let mut b_comp = vec![0.0; t_len * states * mixtures];
            for t in 0..t_len {
                for s in 0..states {
                    let mut total = 0.0;
                    for m in 0..mixtures {
                        let c = &model.emissions[s][m];
                        let d = c.weight * gauss_pdf(seq[t], c.mean, c.variance);
                        b_comp[(t * states + s) * mixtures + m] = d;
                        total += d;
                    }
                    b[t * states + s] = total;
                }
            }

            // Scaled forward pass.
            let mut alpha = vec![0.0; t_len * states];
            let mut scale = vec![0.0; t_len];
            for s in 0..states {
                alpha[s] = model.initial[s] * b[s];
            }
            scale[0] = alpha[..states].iter().sum();
            if !(scale[0] > 0.0) || !scale[0].is_finite() {
                return Err(FitError::Degenerate(format!(
                    "zero/non-finite forward scale at t=0 (iteration {iteration})"
                )));
            }
            for s in 0..states {
                alpha[s] /= scale[0];
            }
            for t in 1..t_len {
                for s in 0..states {
                    let mut acc = 0.0;
                    for r in 0..states {
                        acc += alpha[(t - 1) * states + r] * model.transition.get(r, s);
                    }
                    alpha[t * states + s] = acc * b[t * states + s];
                }
                scale[t] = alpha[t * states..(t + 1) * states].iter().sum();
                if !(scale[t] > 0.0) || !scale[t].is_finite() {
                    return Err(FitError::Degenerate(format!(
                        "zero/non-finite forward scale at t={t} (iteration {iteration})"
                    )));
                }
                for s in 0..states {
                    alpha[t * states + s] /= scale[t];
                }
            }
            log_likelihood += scale.iter().map(|c| c.ln()).sum::<f64>();

            // Scaled backward pass (same scale factors).
            let mut beta = vec![0.0; t_len * states];
            for s in 0..states {
                beta[(t_len - 1) * states + s] = 1.0;
            }
            for t in (0..t_len - 1).rev() {
                for s in 0..states {
                    let mut acc = 0.0;
                    for r in 0..states {
                        acc += model.transition.get(s, r)
                            * b[(t + 1) * states + r]
                            * beta[(t + 1) * states + r];
                    }
                    beta[t * states + s] = acc / scale[t + 1];
                }
            }

            // Accumulate statistics.
            for t in 0..t_len {
                for s in 0..states {
                    let gamma = alpha[t * states + s] * beta[t * states + s];
                    if t == 0 {
                        init_acc[s] += gamma;
                    }
                    if t + 1 < t_len {
                        gamma_trans_acc[s] += gamma;
                    }
                    gamma_state_acc[s] += gamma;
                    let bts = b[t * states + s];
                    if bts > 0.0 {
                        for m in 0..mixtures {
                            let resp = gamma * b_comp[(t * states + s) * mixtures + m] / bts;
                            let slot = s * mixtures + m;
                            comp_weight_acc[slot] += resp;
                            comp_mean_acc[slot] += resp * seq[t];
                            comp_sq_acc[slot] += resp * seq[t] * seq[t];
                        }
                    }
                }
            }
            for t in 0..t_len.saturating_sub(1) {
                for s in 0..states {
                    for r in 0..states {
                        let xi = alpha[t * states + s]
                            * model.transition.get(s, r)
                            * b[(t + 1) * states + r]
                            * beta[(t + 1) * states + r]
                            / scale[t + 1];
                        xi_acc[s * states + r] += xi;
                    }
                }
            }
        }

        if !log_likelihood.is_finite() {
            return Err(FitError::Degenerate(format!(
                "non-finite log-likelihood at iteration {iteration}"
            )));
        }
        if let Some(&prev) = trace.last() {
            if log_likelihood < prev - 1e-10 {
                return Err(FitError::Degenerate(format!(
                    "log-likelihood decreased from {prev} to {log_likelihood} at iteration {iteration}"
                )));
            }
        }
        let converged = trace
            .last()
            .is_some_and(|&prev| (log_likelihood - prev).abs() < CONVERGENCE_TOL);
        trace.push(log_likelihood);
        if converged {
            return Ok((model, trace, iteration));
        }

        // M-step.
        let init_total: f64 = init_acc.iter().sum();
        for s in 0..states {
            model.initial[s] = init_acc[s] / init_total;
        }
        for s in 0..states {
            let denom = gamma_trans_acc[s];
            if denom > 1e-300 {
                for r in 0..states {
                    model.transition.set(s, r, xi_acc[s * states + r] / denom);
                }
            }
            // Row-normalize against accumulated rounding.
            let row_sum: f64 = (0..states).map(|r| model.transition.get(s, r)).sum();
            if row_sum > 0.0 {
                for r in 0..states {
                    let v = model.transition.get(s, r) / row_sum;
                    model.transition.set(s, r, v);
                }
            }
        }
        for s in 0..states {
            let state_total: f64 =
                (0..mixtures).map(|m| comp_weight_acc[s * mixtures + m]).sum();
            if state_total <= 1e-300 {
                continue; // state got no responsibility; keep previous params
            }
            for m in 0..mixtures {
                let slot = s * mixtures + m;
                let resp = comp_weight_acc[slot];
                if resp <= 1e-300 {
                    continue;
                }
                let mean = comp_mean_acc[slot] / resp;
                let variance = (comp_sq_acc[slot] / resp - mean * mean).max(0.0);
                if variance < VAR_FLOOR {
                    return Err(FitError::Degenerate(format!(
                        "variance of state {s} component {m} collapsed to {variance:.3e}"
                    )));
                }
                let comp = &mut model.emissions[s][m];
                comp.weight = resp / state_total;
                comp.mean = mean;
                comp.variance = variance;
            }
        }
    }

    if trace.is_empty() {
        return Err(FitError::Fatal(Error::InvalidArgument(
            "Baum-Welch ran zero iterations".into(),
        )));
    }
    Ok((model, trace, MAX_ITERATIONS))
}

fn sample_categorical(weights: impl Iterator<Item = f64>, rng: &mut impl Rng) -> usize {
    let w: Vec<f64> = weights.collect();
    let total: f64 = w.iter().sum();
    let draw = rng.gen_range(0.0..total.max(f64::MIN_POSITIVE));
    let mut acc = 0.0;
    for (i, v) in w.iter().enumerate() {
        acc += v;
        if draw < acc {
            return i;
        }
    }
    w.len() - 1
}

/// Ancestral sampling: a state path from the initial distribution and
/// transition matrix, then one Gaussian emission per step.
pub fn hmm_sample(model: &HmmModel, t_len: usize, rng: &mut impl Rng) -> Result<Series> {
    if t_len == 0 {
        return Err(Error::InvalidArgument("hmm_sample needs t_len >= 1".into()));
    }
    let mut state = sample_categorical(model.initial.iter().copied(), rng);
    let mut values = Vec::with_capacity(t_len);
    for step in 0..t_len {
        if step > 0 {
            state = sample_categorical(
                (0..model.num_states()).map(|r| model.transition.get(state, r)),
                rng,
            );
        }
        let comp_idx = sample_categorical(model.emissions[state].iter().map(|c| c.weight), rng);
        let comp = &model.emissions[state][comp_idx];
        let normal = Normal::new(comp.mean, comp.variance.sqrt())
            .map_err(|e| Error::InvalidArgument(format!("bad emission parameters: {e}")))?;
        values.push(normal.sample(rng));
    }
    Ok(Series::new(values))
}
