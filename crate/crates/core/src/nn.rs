//! Fixed-topology multilayer perceptron with hand-written backprop and Adam.
//!
//! Hidden block: dense -> layer norm (optional) -> ReLU. The output layer is
//! a plain dense map. All parameters live in one flat `Vec<f64>` so the
//! optimiser and checkpoints can treat them uniformly.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;
pub const CHECKPOINT_FORMAT: &str = "iab-mlp";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub layer_norm: bool,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::Config("network dimensions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct DenseSlot {
    fan_in: usize,
    fan_out: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct NormSlot {
    dim: usize,
    gain: usize,
    bias: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    hidden: Vec<(DenseSlot, Option<NormSlot>)>,
    output: DenseSlot,
    len: usize,
}

impl Layout {
    fn new(spec: &MlpSpec) -> Self {
        let mut offset = 0;
        let mut dense = |fan_in: usize, fan_out: usize| {
            let slot = DenseSlot {
                fan_in,
                fan_out,
                w: offset,
                b: offset + fan_in * fan_out,
            };
            offset += fan_in * fan_out + fan_out;
            slot
        };
        let mut hidden = Vec::new();
        let mut prev = spec.input_dim;
        let mut norms = Vec::new();
        for &h in &spec.hidden {
            hidden.push(dense(prev, h));
            prev = h;
        }
        let output = dense(prev, spec.output_dim);
        if spec.layer_norm {
            for &h in &spec.hidden {
                norms.push(Some(NormSlot {
                    dim: h,
                    gain: offset,
                    bias: offset + h,
                }));
                offset += 2 * h;
            }
        } else {
            norms.resize(spec.hidden.len(), None);
        }
        Self {
            hidden: hidden.into_iter().zip(norms).collect(),
            output,
            len: offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    layout: Layout,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    /// `acts[0]` is the input, `acts[l]` the ReLU output of hidden layer l.
    acts: Vec<Vec<f64>>,
    /// Normalised activations and inverse std per row, per hidden layer.
    norms: Vec<Option<(Vec<f64>, Vec<f64>)>>,
    output: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

impl Mlp {
    /// He-uniform weights for the ReLU layers, Glorot-uniform for the
    /// linear output, zero biases, unit gain.
    pub fn new(spec: MlpSpec, rng: &mut impl Rng) -> Result<Self> {
        let mut mlp = Self::zeros(spec)?;
        let layout = mlp.layout.clone();
        for (dense, norm) in &layout.hidden {
            let limit = (6.0 / dense.fan_in as f64).sqrt();
            for w in &mut mlp.params[dense.w..dense.b] {
                *w = rng.gen_range(-limit..limit);
            }
            if let Some(n) = norm {
                mlp.params[n.gain..n.gain + n.dim].fill(1.0);
            }
        }
        let out = layout.output;
        let limit = (6.0 / (out.fan_in + out.fan_out) as f64).sqrt();
        for w in &mut mlp.params[out.w..out.b] {
            *w = rng.gen_range(-limit..limit);
        }
        Ok(mlp)
    }

    /// All-zero weights and biases (layer-norm gains at 1).
    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::new(&spec);
        let mut params = vec![0.0; layout.len];
        for (_, norm) in &layout.hidden {
            if let Some(n) = norm {
                params[n.gain..n.gain + n.dim].fill(1.0);
            }
        }
        Ok(Self {
            spec,
            layout,
            params,
        })
    }

    pub fn from_params(spec: MlpSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::new(&spec);
        if params.len() != layout.len {
            return Err(Error::Shape {
                expected: layout.len,
                actual: params.len(),
            });
        }
        Ok(Self {
            spec,
            layout,
            params,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Slices (weights, biases) of hidden layer `l`, or of the output layer
    /// when `l == hidden.len()`.
    pub fn dense_params(&self, l: usize) -> (&[f64], &[f64]) {
        let slot = self.dense_slot(l);
        (
            &self.params[slot.w..slot.b],
            &self.params[slot.b..slot.b + slot.fan_out],
        )
    }

    pub fn dense_params_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let slot = self.dense_slot(l);
        let (w, rest) = self.params[slot.w..].split_at_mut(slot.b - slot.w);
        (w, &mut rest[..slot.fan_out])
    }

    fn dense_slot(&self, l: usize) -> DenseSlot {
        if l == self.layout.hidden.len() {
            self.layout.output
        } else {
            self.layout.hidden[l].0
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(input, 1)
    }

    /// Row-major `batch x input_dim` in, `batch x output_dim` out.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<Vec<f64>> {
        Ok(self.forward_train(inputs, batch)?.output)
    }

    pub fn forward_train(&self, inputs: &[f64], batch: usize) -> Result<ForwardCache> {
        let expected = batch * self.spec.input_dim;
        if inputs.len() != expected {
            return Err(Error::Shape {
                expected,
                actual: inputs.len(),
            });
        }
        let mut acts = Vec::with_capacity(self.layout.hidden.len() + 1);
        let mut norms = Vec::with_capacity(self.layout.hidden.len());
        acts.push(inputs.to_vec());
        for (dense, norm) in &self.layout.hidden {
            let mut z = self.dense_forward(dense, acts.last().unwrap(), batch);
            let cached = norm.map(|n| self.norm_forward(&n, &mut z, batch));
            for v in &mut z {
                *v = v.max(0.0);
            }
            norms.push(cached);
            acts.push(z);
        }
        let output = self.dense_forward(&self.layout.output, acts.last().unwrap(), batch);
        Ok(ForwardCache {
            batch,
            acts,
            norms,
            output,
        })
    }

    fn dense_forward(&self, slot: &DenseSlot, x: &[f64], batch: usize) -> Vec<f64> {
        let (k, n) = (slot.fan_in, slot.fan_out);
        let bias = &self.params[slot.b..slot.b + n];
        let mut out = Vec::with_capacity(batch * n);
        for _ in 0..batch {
            out.extend_from_slice(bias);
        }
        gemm(
            batch,
            k,
            n,
            x,
            (k, 1),
            &self.params[slot.w..slot.b],
            (n, 1),
            &mut out,
            1.0,
        );
        out
    }

    /// Normalises `z` in place row by row and applies gain and bias;
    /// returns (x_hat, inv_std).
    fn norm_forward(&self, slot: &NormSlot, z: &mut [f64], batch: usize) -> (Vec<f64>, Vec<f64>) {
        let d = slot.dim;
        let gain = &self.params[slot.gain..slot.gain + d];
        let bias = &self.params[slot.bias..slot.bias + d];
        let mut xhat = vec![0.0; batch * d];
        let mut inv_std = vec![0.0; batch];
        for b in 0..batch {
            let row = &mut z[b * d..(b + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std[b] = inv;
            let xh = &mut xhat[b * d..(b + 1) * d];
            for i in 0..d {
                xh[i] = (row[i] - mean) * inv;
                row[i] = gain[i] * xh[i] + bias[i];
            }
        }
        (xhat, inv_std)
    }

    /// Parameter gradient for a loss whose gradient w.r.t. the network
    /// output is `output_grad` (row-major, same shape as the output).
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<Vec<f64>> {
        let batch = cache.batch;
        let expected = batch * self.spec.output_dim;
        if output_grad.len() != expected {
            return Err(Error::Shape {
                expected,
                actual: output_grad.len(),
            });
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut upstream = self.dense_backward(
            &self.layout.output,
            cache.acts.last().unwrap(),
            output_grad,
            batch,
            &mut grads,
            !self.layout.hidden.is_empty(),
        );
        for l in (0..self.layout.hidden.len()).rev() {
            let (dense, norm) = &self.layout.hidden[l];
            let act = &cache.acts[l + 1];
            let mut delta = upstream
                .take()
                .expect("hidden layers need an upstream gradient");
            for (g, a) in delta.iter_mut().zip(act) {
                if *a <= 0.0 {
                    *g = 0.0;
                }
            }
            if let (Some(slot), Some((xhat, inv_std))) = (norm, &cache.norms[l]) {
                self.norm_backward(slot, xhat, inv_std, &mut delta, batch, &mut grads);
            }
            upstream = self.dense_backward(dense, &cache.acts[l], &delta, batch, &mut grads, l > 0);
        }
        Ok(grads)
    }

    fn dense_backward(
        &self,
        slot: &DenseSlot,
        x: &[f64],
        delta: &[f64],
        batch: usize,
        grads: &mut [f64],
        need_input_grad: bool,
    ) -> Option<Vec<f64>> {
        let (k, n) = (slot.fan_in, slot.fan_out);
        // dW = x^T delta
        gemm(
            k,
            batch,
            n,
            x,
            (1, k),
            delta,
            (n, 1),
            &mut grads[slot.w..slot.b],
            0.0,
        );
        let db = &mut grads[slot.b..slot.b + n];
        for row in delta.chunks_exact(n) {
            for (g, d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }
        need_input_grad.then(|| {
            // dx = delta W^T
            let mut dx = vec![0.0; batch * k];
            gemm(
                batch,
                n,
                k,
                delta,
                (n, 1),
                &self.params[slot.w..slot.b],
                (1, n),
                &mut dx,
                0.0,
            );
            dx
        })
    }

    fn norm_backward(
        &self,
        slot: &NormSlot,
        xhat: &[f64],
        inv_std: &[f64],
        delta: &mut [f64],
        batch: usize,
        grads: &mut [f64],
    ) {
        let d = slot.dim;
        let gain = &self.params[slot.gain..slot.gain + d];
        let mut dxhat = vec![0.0; d];
        for b in 0..batch {
            let dy = &mut delta[b * d..(b + 1) * d];
            let xh = &xhat[b * d..(b + 1) * d];
            for i in 0..d {
                grads[slot.gain + i] += dy[i] * xh[i];
                grads[slot.bias + i] += dy[i];
                dxhat[i] = dy[i] * gain[i];
            }
            let sum: f64 = dxhat.iter().sum();
            let dot: f64 = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum();
            let scale = inv_std[b] / d as f64;
            for i in 0..d {
                dy[i] = scale * (d as f64 * dxhat[i] - sum - xh[i] * dot);
            }
        }
    }
}

/// `c = a * b + beta * c` for row-major `c` (m x n); `a` is m x k and `b`
/// is k x n, each given with (row, column) strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    c: &mut [f64],
    beta: f64,
) {
    let span = |rows: usize, cols: usize, (rs, cs): (usize, usize)| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * rs + (cols - 1) * cs + 1
        }
    };
    assert!(a.len() >= span(m, k, a_strides));
    assert!(b.len() >= span(k, n, b_strides));
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserts above bound every index matrixmultiply touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub timestep: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            timestep: 0,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::Shape {
                expected: self.first_moment.len(),
                actual: grads.len().min(params.len()),
            });
        }
        self.timestep += 1;
        let t = self.timestep as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            let m = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            let v = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            params[i] -= self.learning_rate * (m / c1) / ((v / c2).sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Frozen copy for bootstrap targets.
pub fn copy_into_target(online: &Mlp) -> Mlp {
    online.clone()
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
}

/// Seed and stream position of a ChaCha8 generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: String,
    pub stream: u64,
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: hex::encode(rng.get_seed()),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let bad = |what: &str| Error::Checkpoint(format!("bad rng {what}"));
        let bytes = hex::decode(&self.seed).map_err(|_| bad("seed"))?;
        let seed: [u8; 32] = bytes.try_into().map_err(|_| bad("seed length"))?;
        let pos: u128 = self.word_pos.parse().map_err(|_| bad("word position"))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

/// Serialised network, optimiser and generator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub spec: MlpSpec,
    pub params: Vec<f64>,
    pub adam: AdamState,
    pub rng: RngState,
}

impl Checkpoint {
    pub fn new(mlp: &Mlp, adam: &AdamState, rng: &ChaCha8Rng) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            spec: mlp.spec.clone(),
            params: mlp.params.clone(),
            adam: adam.clone(),
            rng: RngState::capture(rng),
        }
    }

    pub fn restore(&self) -> Result<(Mlp, AdamState, ChaCha8Rng)> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format {} v{}",
                self.format, self.version
            )));
        }
        let mlp = Mlp::from_params(self.spec.clone(), self.params.clone())?;
        if self.adam.first_moment.len() != mlp.num_params()
            || self.adam.second_moment.len() != mlp.num_params()
        {
            return Err(Error::Checkpoint(
                "optimiser state does not match network".into(),
            ));
        }
        Ok((mlp, self.adam.clone(), self.rng.restore()?))
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    use super::*;

    fn spec(input: usize, hidden: &[usize], output: usize, layer_norm: bool) -> MlpSpec {
        MlpSpec {
            input_dim: input,
            hidden: hidden.to_vec(),
            output_dim: output,
            layer_norm,
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mlp = Mlp::zeros(spec(4, &[8, 5], 3, true)).unwrap();
        assert_eq!(mlp.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn affine_hand_example() {
        let mut mlp = Mlp::zeros(spec(2, &[], 2, false)).unwrap();
        {
            let (w, b) = mlp.dense_params_mut(0);
            w.copy_from_slice(&[1.0, 2.0, 3.0, 4.0]); // rows = inputs
            b.copy_from_slice(&[0.5, -1.0]);
        }
        // [1, 1] * [[1, 2], [3, 4]] + [0.5, -1] = [4.5, 5]
        assert_eq!(mlp.forward(&[1.0, 1.0]).unwrap(), vec![4.5, 5.0]);
        assert_eq!(
            mlp.forward_batch(&[1.0, 0.0, 0.0, 2.0], 2).unwrap(),
            vec![1.5, 1.0, 6.5, 7.0]
        );
    }

    #[test]
    fn shape_errors() {
        let mlp = Mlp::zeros(spec(3, &[4], 2, false)).unwrap();
        assert!(matches!(mlp.forward(&[1.0]), Err(Error::Shape { .. })));
        let cache = mlp.forward_train(&[0.0; 3], 1).unwrap();
        assert!(mlp.backward(&cache, &[0.0; 3]).is_err());
        assert!(Mlp::zeros(spec(0, &[4], 2, false)).is_err());
    }

    #[test]
    fn layer_norm_standardises_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mlp = Mlp::new(spec(6, &[32], 2, true), &mut rng).unwrap();
        let x: Vec<f64> = (0..6 * 4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let cache = mlp.forward_train(&x, 4).unwrap();
        let (xhat, _) = cache.norms[0].as_ref().unwrap();
        for row in xhat.chunks_exact(32) {
            let mean = row.iter().sum::<f64>() / 32.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 32.0;
            assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(var, 1.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn gradient_vanishes_at_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mlp = Mlp::new(spec(3, &[6, 4], 2, true), &mut rng).unwrap();
        let cache = mlp.forward_train(&[0.3, -0.2, 0.9], 1).unwrap();
        let target = cache.output().to_vec();
        let grad: Vec<f64> = cache
            .output()
            .iter()
            .zip(&target)
            .map(|(o, t)| o - t)
            .collect();
        assert!(mlp
            .backward(&cache, &grad)
            .unwrap()
            .iter()
            .all(|g| *g == 0.0));
    }

    #[test]
    fn dead_relu_passes_no_gradient() {
        // one hidden unit with a large negative bias never activates
        let mut mlp = Mlp::zeros(spec(1, &[1], 1, false)).unwrap();
        mlp.dense_params_mut(0).0[0] = 1.0;
        mlp.dense_params_mut(0).1[0] = -10.0;
        mlp.dense_params_mut(1).0[0] = 1.0;
        let cache = mlp.forward_train(&[2.0], 1).unwrap();
        let g = mlp.backward(&cache, &[1.0]).unwrap();
        let (w0, b0) = (g[0], g[1]);
        assert_eq!((w0, b0), (0.0, 0.0));
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut params = vec![0.5, -1.5, 2.0];
        let before = params.clone();
        let mut adam = AdamState::new(3, 1e-3);
        adam.step(&mut params, &[0.0; 3]).unwrap();
        assert_eq!(params, before);
        assert_eq!(adam.timestep, 1);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut params = vec![1.0, 1.0, 1.0];
        let mut adam = AdamState::new(3, 1e-3);
        adam.step(&mut params, &[0.3, -7.0, 1e-2]).unwrap();
        assert_abs_diff_eq!(params[0], 1.0 - 1e-3, epsilon = 1e-9);
        assert_abs_diff_eq!(params[1], 1.0 + 1e-3, epsilon = 1e-9);
        assert_abs_diff_eq!(params[2], 1.0 - 1e-3, epsilon = 1e-8);
    }

    #[test]
    fn identical_nets_stay_identical() {
        let s = spec(4, &[5], 3, true);
        let a0 = Mlp::new(s.clone(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b0 = Mlp::new(s, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a0, b0);
        let (mut a, mut b) = (a0.clone(), b0.clone());
        let (mut oa, mut ob) = (
            AdamState::new(a.num_params(), 1e-3),
            AdamState::new(b.num_params(), 1e-3),
        );
        let grads: Vec<f64> = (0..a.num_params()).map(|i| (i as f64).sin()).collect();
        for _ in 0..3 {
            oa.step(a.params_mut(), &grads).unwrap();
            ob.step(b.params_mut(), &grads).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn target_copy_is_detached() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut online = Mlp::new(spec(3, &[4], 2, false), &mut rng).unwrap();
        let target = copy_into_target(&online);
        let x = [0.1, 0.2, 0.3];
        assert_eq!(online.forward(&x).unwrap(), target.forward(&x).unwrap());
        assert_eq!(copy_into_target(&target), target);
        let mut adam = AdamState::new(online.num_params(), 1e-2);
        adam.step(online.params_mut(), &vec![1.0; target.num_params()])
            .unwrap();
        assert_ne!(online.forward(&x).unwrap(), target.forward(&x).unwrap());
        assert_eq!(target, copy_into_target(&target));
    }

    #[test]
    fn clip_rescales() {
        let mut g = vec![3.0, 4.0];
        clip_global_norm(&mut g, 1.0);
        assert_abs_diff_eq!(g[0], 0.6, epsilon = 1e-12);
        let mut small = vec![0.1];
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small, vec![0.1]);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mlp = Mlp::new(spec(5, &[7, 3], 4, true), &mut rng).unwrap();
        let mut adam = AdamState::new(mlp.num_params(), 1e-3);
        let mut trained = mlp.clone();
        let grads: Vec<f64> = (0..mlp.num_params())
            .map(|i| ((i * 7) as f64).cos() / 3.0)
            .collect();
        adam.step(trained.params_mut(), &grads).unwrap();
        let _ = rng.gen::<u64>();
        let ck = Checkpoint::new(&trained, &adam, &rng);
        let text = serde_json::to_string(&ck).unwrap();
        let back: Checkpoint = serde_json::from_str(&text).unwrap();
        let (mlp2, adam2, mut rng2) = back.restore().unwrap();
        let x = [0.11, -0.7, 1.3, 1e-3, 2.5];
        let y1 = trained.forward(&x).unwrap();
        let y2 = mlp2.forward(&x).unwrap();
        assert_eq!(
            y1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            y2.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(adam2, adam);
        assert_eq!(rng2.gen::<u64>(), rng.gen::<u64>());
    }
}
