//! Generator and discriminator networks with class-label conditioning, plus
//! the checkpointable [`GanModel`] bundle.
//!
//! Both networks are an LSTM stack followed by a fully connected layer with
//! sigmoid activation. The generator maps a latent sequence plus a label
//! sequence to a series of the same length; the discriminator consumes a
//! series plus a label sequence, applies the sigmoid head at every step, and
//! mean-pools the per-step outputs into one probability.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::sigmoid;
use crate::numerics::{LstmCache, LstmGrads, LstmStack, ParamLayout, SeqBatch};
use crate::series::Series;

/// Per-step conditioning: one vector of class weights per time step, each a
/// convex combination of one-hot labels. During training the sequence is
/// constant over time with exactly one entry set to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSequence {
    steps: Vec<Vec<f64>>,
}

impl LabelSequence {
    /// Constant one-hot sequence for a 1-based class index.
    pub fn one_hot(class: usize, num_classes: usize, len: usize) -> Result<Self> {
        if class == 0 || class > num_classes {
            return Err(Error::InvalidArgument(format!(
                "class {class} outside 1..={num_classes}"
            )));
        }
        if len == 0 || num_classes == 0 {
            return Err(Error::InvalidArgument(
                "label sequence needs len >= 1 and num_classes >= 1".into(),
            ));
        }
        let mut v = vec![0.0; num_classes];
        v[class - 1] = 1.0;
        Ok(LabelSequence {
            steps: vec![v; len],
        })
    }

    /// Constant two-class sequence `(1-alpha, alpha)`, interpolating from
    /// class 1 (`alpha = 0`) to class 2 (`alpha = 1`).
    pub fn interpolated(alpha: f64, len: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!(
                "interpolation coefficient {alpha} outside [0, 1]"
            )));
        }
        LabelSequence::from_steps(vec![vec![1.0 - alpha, alpha]; len])
    }

    /// Arbitrary per-step convex combinations (entries nonnegative, each
    /// step summing to 1).
    pub fn from_steps(steps: Vec<Vec<f64>>) -> Result<Self> {
        if steps.is_empty() || steps[0].is_empty() {
            return Err(Error::InvalidArgument("empty label sequence".into()));
        }
        let c = steps[0].len();
        for (t, v) in steps.iter().enumerate() {
            if v.len() != c {
                return Err(Error::shape(
                    "LabelSequence::from_steps",
                    format!("{c} classes at every step"),
                    format!("{} at step {t}", v.len()),
                ));
            }
            let sum: f64 = v.iter().sum();
            if v.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "label weights at step {t} are not a convex combination (sum {sum})"
                )));
            }
        }
        Ok(LabelSequence { steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.steps[0].len()
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.steps[t]
    }
}

/// Fully connected sigmoid output layer mapping `U` hidden units to one
/// value.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl OutputHead {
    pub fn zeros(units: usize) -> Self {
        OutputHead {
            weights: vec![0.0; units],
            bias: 0.0,
        }
    }

    fn random(units: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (units as f64).sqrt();
        OutputHead {
            weights: (0..units).map(|_| rng.gen_range(-bound..=bound)).collect(),
            bias: 0.0,
        }
    }

    #[inline]
    fn apply(&self, hidden: &[f64]) -> f64 {
        sigmoid(self.bias + crate::numerics::dot(&self.weights, hidden))
    }
}

/// Forward-pass record for a generator batch.
pub struct GenForward {
    /// Generated values, `steps x batch x 1`.
    pub outputs: SeqBatch,
    cache: LstmCache,
}

/// Forward-pass record for a discriminator batch.
pub struct DiscForward {
    /// Mean-pooled probability per sequence.
    pub probabilities: Vec<f64>,
    /// Per-step sigmoid outputs, `steps x batch x 1`.
    pub per_step: SeqBatch,
    cache: LstmCache,
}

/// Discriminator output with the per-step values exposed (debug path for
/// checking the pooling arithmetic).
#[derive(Debug, Clone)]
pub struct DiscOutput {
    pub probability: f64,
    pub per_step: Vec<f64>,
}

/// Parameter gradients for either network.
pub struct NetGrads {
    pub lstm: LstmGrads,
    pub head_weights: Vec<f64>,
    pub head_bias: f64,
}

impl NetGrads {
    fn zeros(lstm: &LstmStack) -> Self {
        NetGrads {
            lstm: LstmGrads::zeros_like(lstm),
            head_weights: vec![0.0; lstm.units()],
            head_bias: 0.0,
        }
    }

    /// Flat vector in the same order as the owning network's `flatten`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.lstm.layers {
            out.extend_from_slice(layer.input_weights.data());
            out.extend_from_slice(layer.recurrent_weights.data());
            out.extend_from_slice(&layer.biases);
        }
        out.extend_from_slice(&self.head_weights);
        out.push(self.head_bias);
        out
    }
}

fn flatten_net(lstm: &LstmStack, head: &OutputHead) -> Vec<f64> {
    let mut out = Vec::with_capacity(lstm.param_count() + head.weights.len() + 1);
    for layer in lstm.layers() {
        out.extend_from_slice(layer.input_weights.data());
        out.extend_from_slice(layer.recurrent_weights.data());
        out.extend_from_slice(&layer.biases);
    }
    out.extend_from_slice(&head.weights);
    out.push(head.bias);
    out
}

fn load_net(lstm: &mut LstmStack, head: &mut OutputHead, flat: &[f64]) -> Result<()> {
    let expected = lstm.param_count() + head.weights.len() + 1;
    if flat.len() != expected {
        return Err(Error::shape(
            "load_flat",
            format!("{expected} parameters"),
            format!("{}", flat.len()),
        ));
    }
    let mut pos = 0;
    for layer in lstm.layers_mut() {
        let n = layer.input_weights.data().len();
        layer.input_weights.data_mut().copy_from_slice(&flat[pos..pos + n]);
        pos += n;
        let n = layer.recurrent_weights.data().len();
        layer
            .recurrent_weights
            .data_mut()
            .copy_from_slice(&flat[pos..pos + n]);
        pos += n;
        let n = layer.biases.len();
        layer.biases.copy_from_slice(&flat[pos..pos + n]);
        pos += n;
    }
    let n = head.weights.len();
    head.weights.copy_from_slice(&flat[pos..pos + n]);
    pos += n;
    head.bias = flat[pos];
    Ok(())
}

fn net_layout(prefix: &str, lstm: &LstmStack) -> ParamLayout {
    let mut layout = ParamLayout::new();
    for (l, layer) in lstm.layers().iter().enumerate() {
        layout.push(
            format!("{prefix}.layer{}.input_weights", l + 1),
            layer.input_weights.data().len(),
        );
        layout.push(
            format!("{prefix}.layer{}.recurrent_weights", l + 1),
            layer.recurrent_weights.data().len(),
        );
        layout.push(format!("{prefix}.layer{}.biases", l + 1), layer.biases.len());
    }
    layout.push(format!("{prefix}.head.weights"), lstm.units());
    layout.push(format!("{prefix}.head.bias"), 1);
    layout
}

/// The generator: LSTM over `(z_t, c_t)` inputs, sigmoid head per step.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorNet {
    pub lstm: LstmStack,
    pub head: OutputHead,
    latent_dim: usize,
    num_classes: usize,
}

impl GeneratorNet {
    pub fn new_random(
        latent_dim: usize,
        num_classes: usize,
        units: usize,
        layers: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let lstm = LstmStack::random(latent_dim + num_classes, units, layers, rng)?;
        let head = OutputHead::random(units, rng);
        Ok(GeneratorNet {
            lstm,
            head,
            latent_dim,
            num_classes,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Generate one series from a flat latent sequence (`T * d_z` values,
    /// step-major) and a label sequence of length `T`.
    pub fn forward(&self, z: &[f64], labels: &LabelSequence) -> Result<Series> {
        let fwd = self.forward_batch(std::slice::from_ref(&z.to_vec()), std::slice::from_ref(labels))?;
        let t_len = fwd.outputs.steps();
        let values = (0..t_len).map(|t| fwd.outputs.at(t, 0)[0]).collect();
        Ok(Series::new(values))
    }

    /// Batched forward pass keeping the cache for backprop.
    pub fn forward_batch(&self, zs: &[Vec<f64>], labels: &[LabelSequence]) -> Result<GenForward> {
        let inputs = self.build_inputs(zs, labels)?;
        let cache = self.lstm.forward(&inputs)?;
        let steps = inputs.steps();
        let batch = inputs.batch();
        let mut outputs = SeqBatch::zeros(steps, batch, 1);
        for t in 0..steps {
            for s in 0..batch {
                outputs.at_mut(t, s)[0] = self.head.apply(cache.top_hidden(t, s));
            }
        }
        Ok(GenForward { outputs, cache })
    }

    /// Backpropagate loss gradients on the generated values
    /// (`steps x batch x 1`) into parameter gradients.
    pub fn backward_batch(
        &self,
        fwd: &GenForward,
        output_grads: &SeqBatch,
        want_param_grads: bool,
    ) -> Result<NetGrads> {
        let steps = fwd.outputs.steps();
        let batch = fwd.outputs.batch();
        if output_grads.steps() != steps || output_grads.batch() != batch || output_grads.dim() != 1 {
            return Err(Error::shape(
                "GeneratorNet::backward_batch",
                format!("{steps}x{batch}x1 gradients"),
                format!(
                    "{}x{}x{}",
                    output_grads.steps(),
                    output_grads.batch(),
                    output_grads.dim()
                ),
            ));
        }
        let mut grads = NetGrads::zeros(&self.lstm);
        let mut dh_top = SeqBatch::zeros(steps, batch, self.lstm.units());
        for t in 0..steps {
            for s in 0..batch {
                let y = fwd.outputs.at(t, s)[0];
                let dpre = output_grads.at(t, s)[0] * y * (1.0 - y);
                if dpre != 0.0 {
                    let hidden = fwd.cache.top_hidden(t, s);
                    if want_param_grads {
                        crate::numerics::axpy(dpre, hidden, &mut grads.head_weights);
                        grads.head_bias += dpre;
                    }
                    crate::numerics::axpy(dpre, &self.head.weights, dh_top.at_mut(t, s));
                }
            }
        }
        let (lstm_grads, _input_grads) = self.lstm.backward(&fwd.cache, &dh_top, want_param_grads)?;
        grads.lstm = lstm_grads;
        Ok(grads)
    }

    fn build_inputs(&self, zs: &[Vec<f64>], labels: &[LabelSequence]) -> Result<SeqBatch> {
        if zs.is_empty() || zs.len() != labels.len() {
            return Err(Error::shape(
                "GeneratorNet inputs",
                format!("{} latent sequences", labels.len()),
                format!("{}", zs.len()),
            ));
        }
        let t_len = labels[0].len();
        let d_z = self.latent_dim;
        let c = self.num_classes;
        let mut batch = SeqBatch::zeros(t_len, zs.len(), d_z + c);
        for (s, (z, lab)) in zs.iter().zip(labels).enumerate() {
            if lab.len() != t_len || lab.num_classes() != c {
                return Err(Error::shape(
                    "GeneratorNet inputs",
                    format!("label sequence {t_len} x {c}"),
                    format!("{} x {}", lab.len(), lab.num_classes()),
                ));
            }
            if z.len() != t_len * d_z {
                return Err(Error::shape(
                    "GeneratorNet inputs",
                    format!("latent sequence of {} values", t_len * d_z),
                    format!("{}", z.len()),
                ));
            }
            for t in 0..t_len {
                let slot = batch.at_mut(t, s);
                slot[..d_z].copy_from_slice(&z[t * d_z..(t + 1) * d_z]);
                slot[d_z..].copy_from_slice(lab.step(t));
            }
        }
        Ok(batch)
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_net(&self.lstm, &self.head)
    }

    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        load_net(&mut self.lstm, &mut self.head, flat)
    }

    pub fn param_count(&self) -> usize {
        self.lstm.param_count() + self.head.weights.len() + 1
    }

    pub fn param_layout(&self) -> ParamLayout {
        net_layout("generator", &self.lstm)
    }
}

/// The discriminator: LSTM over `(x_t, c_t)` inputs, sigmoid head per step,
/// mean pooling over time.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorNet {
    pub lstm: LstmStack,
    pub head: OutputHead,
    num_classes: usize,
}

impl DiscriminatorNet {
    pub fn new_random(
        num_classes: usize,
        units: usize,
        layers: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let lstm = LstmStack::random(1 + num_classes, units, layers, rng)?;
        let head = OutputHead::random(units, rng);
        Ok(DiscriminatorNet {
            lstm,
            head,
            num_classes,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Probability that `values` came from the training data.
    pub fn forward(&self, values: &[f64], labels: &LabelSequence) -> Result<f64> {
        Ok(self.forward_detailed(values, labels)?.probability)
    }

    /// Forward pass exposing the per-step sigmoid outputs alongside their
    /// mean.
    pub fn forward_detailed(&self, values: &[f64], labels: &LabelSequence) -> Result<DiscOutput> {
        let fwd = self.forward_batch(&[values], std::slice::from_ref(labels))?;
        let per_step = (0..fwd.per_step.steps())
            .map(|t| fwd.per_step.at(t, 0)[0])
            .collect();
        Ok(DiscOutput {
            probability: fwd.probabilities[0],
            per_step,
        })
    }

    /// Batched forward pass keeping the cache for backprop.
    pub fn forward_batch(&self, series: &[&[f64]], labels: &[LabelSequence]) -> Result<DiscForward> {
        let inputs = self.build_inputs(series, labels)?;
        let cache = self.lstm.forward(&inputs)?;
        let steps = inputs.steps();
        let batch = inputs.batch();
        let mut per_step = SeqBatch::zeros(steps, batch, 1);
        let mut probabilities = vec![0.0; batch];
        for s in 0..batch {
            let mut acc = 0.0;
            for t in 0..steps {
                let v = self.head.apply(cache.top_hidden(t, s));
                per_step.at_mut(t, s)[0] = v;
                acc += v;
            }
            probabilities[s] = acc / steps as f64;
        }
        Ok(DiscForward {
            probabilities,
            per_step,
            cache,
        })
    }

    /// Backpropagate loss gradients on the pooled probabilities into
    /// parameter gradients and gradients with respect to the inputs
    /// (`steps x batch x (1 + C)`; channel 0 is the series value).
    pub fn backward_batch(
        &self,
        fwd: &DiscForward,
        prob_grads: &[f64],
        want_param_grads: bool,
    ) -> Result<(NetGrads, SeqBatch)> {
        let steps = fwd.per_step.steps();
        let batch = fwd.per_step.batch();
        if prob_grads.len() != batch {
            return Err(Error::shape(
                "DiscriminatorNet::backward_batch",
                format!("{batch} probability gradients"),
                format!("{}", prob_grads.len()),
            ));
        }
        let mut grads = NetGrads::zeros(&self.lstm);
        let mut dh_top = SeqBatch::zeros(steps, batch, self.lstm.units());
        let inv_t = 1.0 / steps as f64;
        for s in 0..batch {
            let dprob = prob_grads[s];
            if dprob == 0.0 {
                continue;
            }
            for t in 0..steps {
                let p = fwd.per_step.at(t, s)[0];
                let dpre = dprob * inv_t * p * (1.0 - p);
                if dpre != 0.0 {
                    let hidden = fwd.cache.top_hidden(t, s);
                    if want_param_grads {
                        crate::numerics::axpy(dpre, hidden, &mut grads.head_weights);
                        grads.head_bias += dpre;
                    }
                    crate::numerics::axpy(dpre, &self.head.weights, dh_top.at_mut(t, s));
                }
            }
        }
        let (lstm_grads, input_grads) = self.lstm.backward(&fwd.cache, &dh_top, want_param_grads)?;
        grads.lstm = lstm_grads;
        Ok((grads, input_grads))
    }

    fn build_inputs(&self, series: &[&[f64]], labels: &[LabelSequence]) -> Result<SeqBatch> {
        if series.is_empty() || series.len() != labels.len() {
            return Err(Error::shape(
                "DiscriminatorNet inputs",
                format!("{} series", labels.len()),
                format!("{}", series.len()),
            ));
        }
        let t_len = labels[0].len();
        let c = self.num_classes;
        let mut batch = SeqBatch::zeros(t_len, series.len(), 1 + c);
        for (s, (values, lab)) in series.iter().zip(labels).enumerate() {
            if values.len() != t_len || lab.len() != t_len || lab.num_classes() != c {
                return Err(Error::shape(
                    "DiscriminatorNet inputs",
                    format!("series and labels of length {t_len}, {c} classes"),
                    format!(
                        "series {} / labels {} x {}",
                        values.len(),
                        lab.len(),
                        lab.num_classes()
                    ),
                ));
            }
            for t in 0..t_len {
                let slot = batch.at_mut(t, s);
                slot[0] = values[t];
                slot[1..].copy_from_slice(lab.step(t));
            }
        }
        Ok(batch)
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_net(&self.lstm, &self.head)
    }

    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        load_net(&mut self.lstm, &mut self.head, flat)
    }

    pub fn param_count(&self) -> usize {
        self.lstm.param_count() + self.head.weights.len() + 1
    }

    pub fn param_layout(&self) -> ParamLayout {
        net_layout("discriminator", &self.lstm)
    }
}

/// Architecture and provenance metadata stored with every checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    pub series_len: usize,
    pub num_classes: usize,
    pub latent_dim: usize,
    pub units: usize,
    pub layers: usize,
    /// Global (min, max) of the raw training data, for mapping generated
    /// values back to the original scale.
    pub norm_bounds: Option<(f64, f64)>,
    pub seed: u64,
    pub epoch: usize,
}

/// Generator + discriminator parameter sets plus architecture metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct GanModel {
    pub generator: GeneratorNet,
    pub discriminator: DiscriminatorNet,
    pub meta: ModelMeta,
}

impl GanModel {
    pub fn new(
        series_len: usize,
        num_classes: usize,
        latent_dim: usize,
        units: usize,
        layers: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if series_len == 0 {
            return Err(Error::InvalidArgument("series_len must be >= 1".into()));
        }
        if latent_dim == 0 || num_classes == 0 {
            return Err(Error::InvalidArgument(
                "latent_dim and num_classes must be >= 1".into(),
            ));
        }
        let generator = GeneratorNet::new_random(latent_dim, num_classes, units, layers, rng)?;
        let discriminator = DiscriminatorNet::new_random(num_classes, units, layers, rng)?;
        Ok(GanModel {
            generator,
            discriminator,
            meta: ModelMeta {
                series_len,
                num_classes,
                latent_dim,
                units,
                layers,
                norm_bounds: None,
                seed: 0,
                epoch: 0,
            },
        })
    }
}
