//! Stacked LSTM forward and backward passes.
//!
//! The cell is the standard formulation: with gate pre-activations
//! `z = W_x x_t + W_h h_{t-1} + b` split into four blocks of `U`,
//!
//! ```text
//! i = sigmoid(z_i)   f = sigmoid(z_f)   g = tanh(z_g)   o = sigmoid(z_o)
//! c_t = f . c_{t-1} + i . g
//! h_t = o . tanh(c_t)
//! ```
//!
//! No peepholes, no coupled gates. Initial `h_0 = c_0 = 0`. Layer `l > 1`
//! consumes layer `l-1`'s hidden sequence.
//!
//! Sequences are processed in time-major batches (`SeqBatch`) so a training
//! minibatch reuses the weight matrices across samples at each step; a batch
//! of one is the single-sequence case. The per-sample arithmetic is
//! identical either way, so results do not depend on how sequences are
//! grouped into batches.

use rand::Rng;

use super::matrix::{axpy, matvec_add, Matrix};
use super::{fast_tanh, sigmoid};
use crate::error::{Error, Result};

/// Gate-block order within the stacked `4U` dimension.
/// [input, forget, cell-candidate, output].
const GATE_BLOCKS: usize = 4;

/// Parameters of one LSTM layer.
///
/// `input_weights` is `4U x d_in`, `recurrent_weights` `4U x U`, `biases`
/// length `4U`, rows ordered by [`GATE_BLOCKS`].
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub input_weights: Matrix,
    pub recurrent_weights: Matrix,
    pub biases: Vec<f64>,
}

impl LstmLayerParams {
    fn zeros(input_dim: usize, units: usize) -> Self {
        LstmLayerParams {
            input_weights: Matrix::zeros(GATE_BLOCKS * units, input_dim),
            recurrent_weights: Matrix::zeros(GATE_BLOCKS * units, units),
            biases: vec![0.0; GATE_BLOCKS * units],
        }
    }

    /// Uniform init on [-1/sqrt(fan_in), +1/sqrt(fan_in)] per weight matrix;
    /// forget-gate biases 1.0, all other biases 0.
    fn random(input_dim: usize, units: usize, rng: &mut impl Rng) -> Self {
        let mut layer = LstmLayerParams::zeros(input_dim, units);
        let bound_in = 1.0 / (input_dim as f64).sqrt();
        for v in layer.input_weights.data_mut() {
            *v = rng.gen_range(-bound_in..=bound_in);
        }
        let bound_rec = 1.0 / (units as f64).sqrt();
        for v in layer.recurrent_weights.data_mut() {
            *v = rng.gen_range(-bound_rec..=bound_rec);
        }
        for u in 0..units {
            layer.biases[units + u] = 1.0;
        }
        layer
    }

    pub fn param_count(&self) -> usize {
        self.input_weights.data().len() + self.recurrent_weights.data().len() + self.biases.len()
    }
}

/// An `L`-layer stack of LSTM layers with `U` units per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStack {
    layers: Vec<LstmLayerParams>,
    units: usize,
    input_dim: usize,
}

impl LstmStack {
    pub fn zeros(input_dim: usize, units: usize, num_layers: usize) -> Result<Self> {
        if input_dim == 0 || units == 0 || num_layers == 0 {
            return Err(Error::InvalidArgument(format!(
                "LstmStack requires input_dim, units, num_layers >= 1 (got {input_dim}, {units}, {num_layers})"
            )));
        }
        let layers = (0..num_layers)
            .map(|l| LstmLayerParams::zeros(if l == 0 { input_dim } else { units }, units))
            .collect();
        Ok(LstmStack {
            layers,
            units,
            input_dim,
        })
    }

    pub fn random(input_dim: usize, units: usize, num_layers: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut stack = LstmStack::zeros(input_dim, units, num_layers)?;
        for (l, layer) in stack.layers.iter_mut().enumerate() {
            *layer = LstmLayerParams::random(if l == 0 { input_dim } else { units }, units, rng);
        }
        Ok(stack)
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layers(&self) -> &[LstmLayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LstmLayerParams] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LstmLayerParams::param_count).sum()
    }

    fn layer_input_dim(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.units
        }
    }

    /// Forward pass over a batch of sequences. Returns the full cache of
    /// gate activations and hidden/cell states for every layer and step.
    pub fn forward(&self, inputs: &SeqBatch) -> Result<LstmCache> {
        if inputs.dim != self.input_dim {
            return Err(Error::shape(
                "LstmStack::forward",
                format!("input dim {}", self.input_dim),
                format!("{}", inputs.dim),
            ));
        }
        if inputs.steps == 0 || inputs.batch == 0 {
            return Err(Error::InvalidArgument(
                "LstmStack::forward requires at least one step and one sequence".into(),
            ));
        }
        let steps = inputs.steps;
        let batch = inputs.batch;
        let u = self.units;

        let mut layers: Vec<LayerCache> = Vec::with_capacity(self.layers.len());
        let mut pre = vec![0.0; GATE_BLOCKS * u];
        let mut prev_state = vec![0.0; u]; // scratch for h_{t-1}
        let mut prev_cell = vec![0.0; u]; // scratch for c_{t-1}

        for (l, params) in self.layers.iter().enumerate() {
            let mut lc = LayerCache::zeros(steps, batch, u);
            for t in 0..steps {
                for s in 0..batch {
                    let x = if l == 0 {
                        inputs.at(t, s)
                    } else {
                        layers[l - 1].slice(&layers[l - 1].hidden, t, s)
                    };
                    if t == 0 {
                        prev_state.fill(0.0);
                        prev_cell.fill(0.0);
                    } else {
                        prev_state.copy_from_slice(lc.slice(&lc.hidden, t - 1, s));
                        prev_cell.copy_from_slice(lc.slice(&lc.cell, t - 1, s));
                    }
                    pre.copy_from_slice(&params.biases);
                    matvec_add(&params.input_weights, x, &mut pre);
                    matvec_add(&params.recurrent_weights, &prev_state, &mut pre);

                    let base = (t * batch + s) * u;
                    for k in 0..u {
                        let i = sigmoid(pre[k]);
                        let f = sigmoid(pre[u + k]);
                        let g = fast_tanh(pre[2 * u + k]);
                        let o = sigmoid(pre[3 * u + k]);
                        let c = f * prev_cell[k] + i * g;
                        let tc = fast_tanh(c);
                        lc.gate_i[base + k] = i;
                        lc.gate_f[base + k] = f;
                        lc.gate_g[base + k] = g;
                        lc.gate_o[base + k] = o;
                        lc.cell[base + k] = c;
                        lc.cell_tanh[base + k] = tc;
                        lc.hidden[base + k] = o * tc;
                    }
                }
            }
            layers.push(lc);
        }

        Ok(LstmCache {
            steps,
            batch,
            inputs: inputs.clone(),
            layers,
        })
    }

    /// Backward pass (backpropagation through time).
    ///
    /// `output_grads` holds the loss gradient with respect to the top
    /// layer's hidden state at each step (`steps x batch x units`). Returns
    /// parameter gradients summed over the batch and the gradient with
    /// respect to the input sequence. With `want_param_grads = false` the
    /// parameter gradients are skipped (left zero) and only input gradients
    /// are produced.
    pub fn backward(
        &self,
        cache: &LstmCache,
        output_grads: &SeqBatch,
        want_param_grads: bool,
    ) -> Result<(LstmGrads, SeqBatch)> {
        self.check_cache(cache)?;
        if output_grads.steps != cache.steps
            || output_grads.batch != cache.batch
            || output_grads.dim != self.units
        {
            return Err(Error::shape(
                "LstmStack::backward",
                format!("{}x{}x{} output grads", cache.steps, cache.batch, self.units),
                format!(
                    "{}x{}x{}",
                    output_grads.steps, output_grads.batch, output_grads.dim
                ),
            ));
        }

        let steps = cache.steps;
        let batch = cache.batch;
        let u = self.units;

        let mut grads = LstmGrads::zeros_like(self);
        // Gradient flowing into each layer's hidden outputs from above.
        let mut dh_above = output_grads.clone();

        let mut dh = vec![0.0; u];
        let mut dz = vec![0.0; GATE_BLOCKS * u];
        let mut prev_state = vec![0.0; u];

        for l in (0..self.layers.len()).rev() {
            let params = &self.layers[l];
            let lc = &cache.layers[l];
            let d_in = self.layer_input_dim(l);
            let mut dx = SeqBatch::zeros(steps, batch, d_in);
            let mut dh_carry = vec![0.0; batch * u];
            let mut dc_carry = vec![0.0; batch * u];

            for t in (0..steps).rev() {
                for s in 0..batch {
                    let base = (t * batch + s) * u;
                    let carry = s * u;
                    let gi = &lc.gate_i[base..base + u];
                    let gf = &lc.gate_f[base..base + u];
                    let gg = &lc.gate_g[base..base + u];
                    let go = &lc.gate_o[base..base + u];
                    let tc = &lc.cell_tanh[base..base + u];

                    for k in 0..u {
                        dh[k] = dh_above.at(t, s)[k] + dh_carry[carry + k];
                    }

                    for k in 0..u {
                        let c_prev = if t == 0 { 0.0 } else { lc.cell[base - batch * u + k] };
                        let d_out = dh[k] * tc[k];
                        let dc = dc_carry[carry + k] + dh[k] * go[k] * (1.0 - tc[k] * tc[k]);
                        let di = dc * gg[k];
                        let df = dc * c_prev;
                        let dg = dc * gi[k];
                        dz[k] = di * gi[k] * (1.0 - gi[k]);
                        dz[u + k] = df * gf[k] * (1.0 - gf[k]);
                        dz[2 * u + k] = dg * (1.0 - gg[k] * gg[k]);
                        dz[3 * u + k] = d_out * go[k] * (1.0 - go[k]);
                        dc_carry[carry + k] = dc * gf[k];
                    }

                    let x = if l == 0 {
                        cache.inputs.at(t, s)
                    } else {
                        cache.layers[l - 1].slice(&cache.layers[l - 1].hidden, t, s)
                    };
                    if t == 0 {
                        prev_state.fill(0.0);
                    } else {
                        prev_state.copy_from_slice(lc.slice(&lc.hidden, t - 1, s));
                    }

                    if want_param_grads {
                        let g = &mut grads.layers[l];
                        axpy(1.0, &dz, &mut g.biases);
                        for (r, &dzr) in dz.iter().enumerate() {
                            if dzr != 0.0 {
                                axpy(dzr, x, g.input_weights.row_mut(r));
                                axpy(dzr, &prev_state, g.recurrent_weights.row_mut(r));
                            }
                        }
                    }

                    // dx = W_x^T dz, dh_{t-1} = W_h^T dz
                    let dx_slot = dx.at_mut(t, s);
                    let carry_slot = &mut dh_carry[carry..carry + u];
                    carry_slot.fill(0.0);
                    for (r, &dzr) in dz.iter().enumerate() {
                        if dzr != 0.0 {
                            axpy(dzr, params.input_weights.row(r), dx_slot);
                            axpy(dzr, params.recurrent_weights.row(r), carry_slot);
                        }
                    }
                }
            }

            dh_above = dx;
            if l == 0 {
                return Ok((grads, dh_above));
            }
        }
        unreachable!("stack has at least one layer");
    }

    fn check_cache(&self, cache: &LstmCache) -> Result<()> {
        let ok = cache.layers.len() == self.layers.len()
            && cache.inputs.dim == self.input_dim
            && cache
                .layers
                .iter()
                .all(|lc| lc.units == self.units && lc.steps == cache.steps && lc.batch == cache.batch);
        if ok {
            Ok(())
        } else {
            Err(Error::shape(
                "LstmStack::backward",
                format!(
                    "cache for {} layers, {} units, input dim {}",
                    self.layers.len(),
                    self.units,
                    self.input_dim
                ),
                format!(
                    "cache for {} layers, {} units, input dim {}",
                    cache.layers.len(),
                    cache.layers.first().map_or(0, |lc| lc.units),
                    cache.inputs.dim
                ),
            ))
        }
    }
}

/// Time-major batch of equal-length sequences: index order (step, sequence,
/// feature), contiguous in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqBatch {
    steps: usize,
    batch: usize,
    dim: usize,
    data: Vec<f64>,
}

impl SeqBatch {
    pub fn zeros(steps: usize, batch: usize, dim: usize) -> Self {
        SeqBatch {
            steps,
            batch,
            dim,
            data: vec![0.0; steps * batch * dim],
        }
    }

    /// Single sequence of per-step feature vectors (batch of one).
    pub fn single(seq: &[Vec<f64>]) -> Result<Self> {
        let steps = seq.len();
        if steps == 0 {
            return Err(Error::InvalidArgument("empty sequence".into()));
        }
        let dim = seq[0].len();
        let mut out = SeqBatch::zeros(steps, 1, dim);
        for (t, v) in seq.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::shape(
                    "SeqBatch::single",
                    format!("dim {dim} at every step"),
                    format!("dim {} at step {t}", v.len()),
                ));
            }
            out.at_mut(t, 0).copy_from_slice(v);
        }
        Ok(out)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn at(&self, t: usize, s: usize) -> &[f64] {
        let base = (t * self.batch + s) * self.dim;
        &self.data[base..base + self.dim]
    }

    #[inline]
    pub fn at_mut(&mut self, t: usize, s: usize) -> &mut [f64] {
        let base = (t * self.batch + s) * self.dim;
        &mut self.data[base..base + self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Per-layer activations recorded by the forward pass. All arrays are
/// time-major (`steps * batch * units`).
#[derive(Debug, Clone)]
struct LayerCache {
    steps: usize,
    batch: usize,
    units: usize,
    gate_i: Vec<f64>,
    gate_f: Vec<f64>,
    gate_g: Vec<f64>,
    gate_o: Vec<f64>,
    cell: Vec<f64>,
    cell_tanh: Vec<f64>,
    hidden: Vec<f64>,
}

impl LayerCache {
    fn zeros(steps: usize, batch: usize, units: usize) -> Self {
        let n = steps * batch * units;
        LayerCache {
            steps,
            batch,
            units,
            gate_i: vec![0.0; n],
            gate_f: vec![0.0; n],
            gate_g: vec![0.0; n],
            gate_o: vec![0.0; n],
            cell: vec![0.0; n],
            cell_tanh: vec![0.0; n],
            hidden: vec![0.0; n],
        }
    }

    #[inline]
    fn slice<'a>(&self, field: &'a [f64], t: usize, s: usize) -> &'a [f64] {
        let base = (t * self.batch + s) * self.units;
        &field[base..base + self.units]
    }
}

/// Everything the backward pass needs from a forward pass, and the exposed
/// hidden/cell trajectories.
#[derive(Debug, Clone)]
pub struct LstmCache {
    steps: usize,
    batch: usize,
    inputs: SeqBatch,
    layers: Vec<LayerCache>,
}

impl LstmCache {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Hidden state of `layer` at step `t` for sequence `s`.
    pub fn hidden(&self, layer: usize, t: usize, s: usize) -> &[f64] {
        let lc = &self.layers[layer];
        lc.slice(&lc.hidden, t, s)
    }

    /// Cell state of `layer` at step `t` for sequence `s`.
    pub fn cell(&self, layer: usize, t: usize, s: usize) -> &[f64] {
        let lc = &self.layers[layer];
        lc.slice(&lc.cell, t, s)
    }

    /// Hidden state of the top layer at step `t` for sequence `s`.
    pub fn top_hidden(&self, t: usize, s: usize) -> &[f64] {
        self.hidden(self.layers.len() - 1, t, s)
    }
}

/// Gradients for one layer; shapes mirror [`LstmLayerParams`].
#[derive(Debug, Clone)]
pub struct LstmLayerGrads {
    pub input_weights: Matrix,
    pub recurrent_weights: Matrix,
    pub biases: Vec<f64>,
}

/// Gradients for a whole stack; shapes mirror [`LstmStack`].
#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub layers: Vec<LstmLayerGrads>,
}

impl LstmGrads {
    pub fn zeros_like(stack: &LstmStack) -> Self {
        LstmGrads {
            layers: stack
                .layers
                .iter()
                .map(|l| LstmLayerGrads {
                    input_weights: Matrix::zeros(l.input_weights.rows(), l.input_weights.cols()),
                    recurrent_weights: Matrix::zeros(
                        l.recurrent_weights.rows(),
                        l.recurrent_weights.cols(),
                    ),
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_input(seq: &[f64]) -> SeqBatch {
        SeqBatch::single(&seq.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn zero_parameters_give_zero_hidden_states() {
        // o = sigmoid(0) = 0.5 but tanh(c) = tanh(0) = 0, so h = 0 throughout.
        let stack = LstmStack::zeros(1, 3, 2).unwrap();
        let cache = stack.forward(&single_input(&[0.7, -0.3, 1.0])).unwrap();
        for l in 0..2 {
            for t in 0..3 {
                assert!(cache.hidden(l, t, 0).iter().all(|&h| h == 0.0));
                assert!(cache.cell(l, t, 0).iter().all(|&c| c == 0.0));
            }
        }
    }

    /// Hand-rolled scalar LSTM cell, evaluated step by step.
    fn scalar_oracle(
        w_x: [f64; 4],
        w_h: [f64; 4],
        b: [f64; 4],
        inputs: &[f64],
    ) -> Vec<f64> {
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let mut h = 0.0;
        let mut c = 0.0;
        let mut out = Vec::new();
        for &x in inputs {
            let i = sig(w_x[0] * x + w_h[0] * h + b[0]);
            let f = sig(w_x[1] * x + w_h[1] * h + b[1]);
            let g = (w_x[2] * x + w_h[2] * h + b[2]).tanh();
            let o = sig(w_x[3] * x + w_h[3] * h + b[3]);
            c = f * c + i * g;
            h = o * c.tanh();
            out.push(h);
        }
        out
    }

    #[test]
    fn matches_scalar_cell_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let w_x: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let w_h: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let b: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let inputs: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();

            let mut stack = LstmStack::zeros(1, 1, 1).unwrap();
            for k in 0..4 {
                stack.layers_mut()[0].input_weights.set(k, 0, w_x[k]);
                stack.layers_mut()[0].recurrent_weights.set(k, 0, w_h[k]);
                stack.layers_mut()[0].biases[k] = b[k];
            }
            let cache = stack.forward(&single_input(&inputs)).unwrap();
            let expect = scalar_oracle(w_x, w_h, b, &inputs);
            for (t, e) in expect.iter().enumerate() {
                let got = cache.hidden(0, t, 0)[0];
                assert!(
                    (got - e).abs() < 1e-14,
                    "t={t}: oracle {e} vs stack {got}"
                );
            }
        }
    }

    #[test]
    fn forget_bias_case_keeps_hidden_constant_only_without_input_weights() {
        // All weights zero except forget-gate bias 1: i*g = 0 so c stays 0
        // and h stays 0 at both steps. Feeding input weights breaks that.
        let mut stack = LstmStack::zeros(1, 1, 1).unwrap();
        stack.layers_mut()[0].biases[1] = 1.0;
        let cache = stack.forward(&single_input(&[1.0, 1.0])).unwrap();
        assert_eq!(cache.hidden(0, 0, 0)[0], cache.hidden(0, 1, 0)[0]);

        stack.layers_mut()[0].input_weights.set(2, 0, 0.8); // candidate gate sees input
        let cache = stack.forward(&single_input(&[1.0, 1.0])).unwrap();
        assert_ne!(cache.hidden(0, 0, 0)[0], cache.hidden(0, 1, 0)[0]);
    }

    #[test]
    fn accepts_paper_scale_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let stack = LstmStack::random(3, 400, 4, &mut rng).unwrap();
        let inputs = SeqBatch::zeros(96, 1, 3);
        let cache = stack.forward(&inputs).unwrap();
        assert_eq!(cache.steps(), 96);
        assert_eq!(cache.top_hidden(95, 0).len(), 400);
        assert!(cache.top_hidden(95, 0).iter().all(|h| h.is_finite()));
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let stack = LstmStack::zeros(2, 3, 1).unwrap();
        let err = stack.forward(&SeqBatch::zeros(4, 1, 3)).unwrap_err();
        assert!(matches!(err, crate::error::Error::Shape { .. }));
    }

    #[test]
    fn zero_output_gradients_give_zero_parameter_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let stack = LstmStack::random(2, 3, 2, &mut rng).unwrap();
        let inputs = SeqBatch::single(&vec![vec![0.4, -0.2]; 5]).unwrap();
        let cache = stack.forward(&inputs).unwrap();
        let zero = SeqBatch::zeros(5, 1, 3);
        let (grads, dx) = stack.backward(&cache, &zero, true).unwrap();
        for layer in &grads.layers {
            assert!(layer.input_weights.data().iter().all(|&v| v == 0.0));
            assert!(layer.recurrent_weights.data().iter().all(|&v| v == 0.0));
            assert!(layer.biases.iter().all(|&v| v == 0.0));
        }
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unreachable_parameters_get_exactly_zero_gradient() {
        // Loss only on the first step: recurrent weights never act on a
        // nonzero h state before t=1, and the forget gate only multiplies
        // c_0 = 0, so both gradients are exactly zero.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let stack = LstmStack::random(2, 3, 1, &mut rng).unwrap();
        let inputs = SeqBatch::single(&vec![vec![0.9, -0.1]; 4]).unwrap();
        let cache = stack.forward(&inputs).unwrap();
        let mut og = SeqBatch::zeros(4, 1, 3);
        og.at_mut(0, 0).copy_from_slice(&[1.0, -0.5, 0.25]);
        let (grads, _) = stack.backward(&cache, &og, true).unwrap();
        let layer = &grads.layers[0];
        assert!(layer.recurrent_weights.data().iter().all(|&v| v == 0.0));
        let u = 3;
        for r in u..2 * u {
            // forget-gate rows
            assert!(layer.input_weights.row(r).iter().all(|&v| v == 0.0));
            assert_eq!(layer.biases[r], 0.0);
        }
    }

    /// Central finite differences of a scalar loss over every parameter.
    fn finite_diff_check(stack: &mut LstmStack, inputs: &SeqBatch, loss_weights: &SeqBatch) {
        let eval = |stack: &LstmStack| -> f64 {
            let cache = stack.forward(inputs).unwrap();
            let mut loss = 0.0;
            for t in 0..inputs.steps() {
                for s in 0..inputs.batch() {
                    let h = cache.top_hidden(t, s);
                    for (k, &w) in loss_weights.at(t, s).iter().enumerate() {
                        loss += w * h[k];
                    }
                }
            }
            loss
        };

        let cache = stack.forward(inputs).unwrap();
        let (grads, input_grads) = stack.backward(&cache, loss_weights, true).unwrap();

        let h = 1e-5;
        let mut checked = 0usize;
        for l in 0..stack.num_layers() {
            for block in 0..3 {
                let len = match block {
                    0 => stack.layers()[l].input_weights.data().len(),
                    1 => stack.layers()[l].recurrent_weights.data().len(),
                    _ => stack.layers()[l].biases.len(),
                };
                for idx in 0..len {
                    let read = |stack: &mut LstmStack, v: f64| match block {
                        0 => {
                            let old = stack.layers()[l].input_weights.data()[idx];
                            stack.layers_mut()[l].input_weights.data_mut()[idx] = v;
                            old
                        }
                        1 => {
                            let old = stack.layers()[l].recurrent_weights.data()[idx];
                            stack.layers_mut()[l].recurrent_weights.data_mut()[idx] = v;
                            old
                        }
                        _ => {
                            let old = stack.layers()[l].biases[idx];
                            stack.layers_mut()[l].biases[idx] = v;
                            old
                        }
                    };
                    let orig = read(stack, 0.0);
                    read(stack, orig + h);
                    let up = eval(stack);
                    read(stack, orig - h);
                    let down = eval(stack);
                    read(stack, orig);
                    let numeric = (up - down) / (2.0 * h);
                    let analytic = match block {
                        0 => grads.layers[l].input_weights.data()[idx],
                        1 => grads.layers[l].recurrent_weights.data()[idx],
                        _ => grads.layers[l].biases[idx],
                    };
                    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                    assert!(
                        (analytic - numeric).abs() / denom < 1e-4,
                        "layer {l} block {block} idx {idx}: analytic {analytic} vs numeric {numeric}"
                    );
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);

        // Input gradients against finite differences too.
        let mut perturbed = inputs.clone();
        for t in 0..inputs.steps() {
            for s in 0..inputs.batch() {
                for k in 0..inputs.dim() {
                    let orig = perturbed.at(t, s)[k];
                    perturbed.at_mut(t, s)[k] = orig + h;
                    let up = {
                        let cache = stack.forward(&perturbed).unwrap();
                        let mut loss = 0.0;
                        for tt in 0..inputs.steps() {
                            for ss in 0..inputs.batch() {
                                for (kk, &w) in loss_weights.at(tt, ss).iter().enumerate() {
                                    loss += w * cache.top_hidden(tt, ss)[kk];
                                }
                            }
                        }
                        loss
                    };
                    perturbed.at_mut(t, s)[k] = orig - h;
                    let down = {
                        let cache = stack.forward(&perturbed).unwrap();
                        let mut loss = 0.0;
                        for tt in 0..inputs.steps() {
                            for ss in 0..inputs.batch() {
                                for (kk, &w) in loss_weights.at(tt, ss).iter().enumerate() {
                                    loss += w * cache.top_hidden(tt, ss)[kk];
                                }
                            }
                        }
                        loss
                    };
                    perturbed.at_mut(t, s)[k] = orig;
                    let numeric = (up - down) / (2.0 * h);
                    let analytic = input_grads.at(t, s)[k];
                    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                    assert!(
                        (analytic - numeric).abs() / denom < 1e-4,
                        "input grad t={t} s={s} k={k}: {analytic} vs {numeric}"
                    );
                }
            }
        }
    }

    #[test]
    fn bptt_matches_finite_differences_on_tiny_net() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut stack = LstmStack::random(2, 3, 2, &mut rng).unwrap();
        let seq: Vec<Vec<f64>> = (0..5)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let inputs = SeqBatch::single(&seq).unwrap();
        let mut loss_weights = SeqBatch::zeros(5, 1, 3);
        for t in 0..5 {
            for k in 0..3 {
                loss_weights.at_mut(t, 0)[k] = rng.gen_range(-1.0..1.0);
            }
        }
        finite_diff_check(&mut stack, &inputs, &loss_weights);
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let stack = LstmStack::random(2, 4, 2, &mut rng).unwrap();
        let seq: Vec<Vec<f64>> = (0..6)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let inputs = SeqBatch::single(&seq).unwrap();
        let a = stack.forward(&inputs).unwrap();
        let b = stack.forward(&inputs).unwrap();
        for t in 0..6 {
            assert_eq!(a.top_hidden(t, 0), b.top_hidden(t, 0));
        }
    }

    #[test]
    fn gate_activations_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let stack = LstmStack::random(1, 4, 2, &mut rng).unwrap();
        let seq: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let cache = stack.forward(&SeqBatch::single(&seq).unwrap()).unwrap();
        for lc in &cache.layers {
            for v in lc.gate_i.iter().chain(&lc.gate_f).chain(&lc.gate_o) {
                assert!(*v > 0.0 && *v < 1.0);
            }
            for v in lc.gate_g.iter().chain(&lc.cell_tanh) {
                assert!(*v > -1.0 && *v < 1.0);
            }
        }
    }
}
