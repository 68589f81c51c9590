//! Minimal neural-network substrate: affine layers with an optional ReLU,
//! small MLP stacks built from them, a parameter store holding every MLP of
//! the message-passing network, and an Adam optimizer.
//!
//! Gradients are accumulated (`+=`) by the backward functions and cleared
//! explicitly with `zero_grads`.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HadError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Relu),
            c => Err(HadError::Checkpoint(format!("unknown activation code {c}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineLayer {
    weight: Array2<f64>,
    bias: Array1<f64>,
    grad_weight: Array2<f64>,
    grad_bias: Array1<f64>,
    activation: Activation,
}

impl AffineLayer {
    /// `weight` is `in_dim x out_dim`; rows of the input are multiplied on
    /// the left.
    pub fn new(weight: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.ncols() {
            return Err(HadError::DimensionMismatch {
                context: "affine bias length",
                expected: weight.ncols(),
                found: bias.len(),
            });
        }
        let grad_weight = Array2::zeros(weight.raw_dim());
        let grad_bias = Array1::zeros(bias.raw_dim());
        Ok(Self {
            weight,
            bias,
            grad_weight,
            grad_bias,
            activation,
        })
    }

    /// Uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weight =
            Array2::from_shape_simple_fn((in_dim, out_dim), || rng.random_range(-limit..limit));
        Self::new(weight, Array1::zeros(out_dim), activation).expect("shapes agree")
    }

    pub fn in_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight(&self) -> &Array2<f64> {
        &self.weight
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn grad_weight(&self) -> &Array2<f64> {
        &self.grad_weight
    }

    pub fn grad_bias(&self) -> &Array1<f64> {
        &self.grad_bias
    }

    pub fn forward(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if input.ncols() != self.in_dim() {
            return Err(HadError::DimensionMismatch {
                context: "affine input columns",
                expected: self.in_dim(),
                found: input.ncols(),
            });
        }
        let mut out = input.dot(&self.weight);
        out += &self.bias;
        if self.activation == Activation::Relu {
            // NaN passes through so that bad inputs surface as a non-finite loss.
            out.mapv_inplace(|x| if x < 0.0 { 0.0 } else { x });
        }
        Ok(out)
    }

    /// Accumulates parameter gradients and returns the gradient with respect
    /// to `input`. `output` must be the value `forward(input)` returned; the
    /// ReLU mask is read from it (derivative 0 at the kink).
    pub fn backward(
        &mut self,
        input: ArrayView2<'_, f64>,
        output: ArrayView2<'_, f64>,
        upstream: ArrayView2<'_, f64>,
    ) -> Result<Array2<f64>> {
        if upstream.dim() != (input.nrows(), self.out_dim()) {
            return Err(HadError::DimensionMismatch {
                context: "affine upstream gradient shape",
                expected: input.nrows() * self.out_dim(),
                found: upstream.len(),
            });
        }
        if output.dim() != upstream.dim() || input.ncols() != self.in_dim() {
            return Err(HadError::DimensionMismatch {
                context: "affine backward cached input/output",
                expected: self.in_dim(),
                found: input.ncols(),
            });
        }
        let delta = match self.activation {
            Activation::Identity => upstream.to_owned(),
            Activation::Relu => {
                let mut d = upstream.to_owned();
                Zip::from(&mut d).and(&output).for_each(|g, &y| {
                    if y <= 0.0 {
                        *g = 0.0;
                    }
                });
                d
            }
        };
        self.grad_weight += &input.t().dot(&delta);
        self.grad_bias += &delta.sum_axis(Axis(0));
        Ok(delta.dot(&self.weight.t()))
    }

    pub fn zero_grads(&mut self) {
        self.grad_weight.fill(0.0);
        self.grad_bias.fill(0.0);
    }
}

/// A chain of affine layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<AffineLayer>,
}

/// Values retained by [`Mlp::forward`]: `values[0]` is the input and
/// `values[k + 1]` the output of layer `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpTrace {
    values: Vec<Array2<f64>>,
}

impl MlpTrace {
    pub fn input(&self) -> &Array2<f64> {
        &self.values[0]
    }

    pub fn output(&self) -> &Array2<f64> {
        self.values.last().expect("trace has an input")
    }

    pub fn values(&self) -> &[Array2<f64>] {
        &self.values
    }
}

impl Mlp {
    pub fn new(layers: Vec<AffineLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(HadError::InvalidConfig(
                "an MLP needs at least one layer".into(),
            ));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(HadError::DimensionMismatch {
                    context: "MLP layer chaining",
                    expected: pair[0].out_dim(),
                    found: pair[1].in_dim(),
                });
            }
        }
        Ok(Self { layers })
    }

    /// `depth` ReLU layers of Glorot-initialized weights; the inner widths
    /// equal `out_dim`. The first layer uses `first_activation`.
    pub fn glorot<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        depth: usize,
        first_activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let layers = (0..depth)
            .map(|k| {
                let (i, act) = if k == 0 {
                    (in_dim, first_activation)
                } else {
                    (out_dim, Activation::Relu)
                };
                AffineLayer::glorot(i, out_dim, act, rng)
            })
            .collect();
        Self::new(layers)
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("nonempty").out_dim()
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [AffineLayer] {
        &mut self.layers
    }

    pub fn forward(&self, input: Array2<f64>) -> Result<MlpTrace> {
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(input);
        for layer in &self.layers {
            let next = layer.forward(values.last().expect("nonempty").view())?;
            values.push(next);
        }
        Ok(MlpTrace { values })
    }

    pub fn backward(&mut self, trace: &MlpTrace, upstream: Array2<f64>) -> Result<Array2<f64>> {
        if trace.values.len() != self.layers.len() + 1 {
            return Err(HadError::TraceMismatch(format!(
                "MLP trace has {} values for {} layers",
                trace.values.len(),
                self.layers.len()
            )));
        }
        let mut grad = upstream;
        for (k, layer) in self.layers.iter_mut().enumerate().rev() {
            grad = layer.backward(
                trace.values[k].view(),
                trace.values[k + 1].view(),
                grad.view(),
            )?;
        }
        Ok(grad)
    }

    pub fn zero_grads(&mut self) {
        self.layers.iter_mut().for_each(AffineLayer::zero_grads);
    }
}

/// All trainable MLPs of the network. `vnn[l]` is the node MLP of layer `l`
/// (`l = 0..L`); `enn[l - 1]` is the hyperedge MLP of layer `l`
/// (`l = 1..L`).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore {
    vnn: Vec<Mlp>,
    enn: Vec<Mlp>,
}

impl ParameterStore {
    pub fn new(vnn: Vec<Mlp>, enn: Vec<Mlp>) -> Result<Self> {
        if vnn.is_empty() || enn.len() + 1 != vnn.len() {
            return Err(HadError::InvalidConfig(format!(
                "expected L node MLPs and L-1 hyperedge MLPs, got {} and {}",
                vnn.len(),
                enn.len()
            )));
        }
        for (l, e) in enn.iter().enumerate() {
            if vnn[l].out_dim() != e.in_dim() {
                return Err(HadError::DimensionMismatch {
                    context: "node MLP output vs next hyperedge MLP input",
                    expected: vnn[l].out_dim(),
                    found: e.in_dim(),
                });
            }
            if e.out_dim() != vnn[l + 1].in_dim() {
                return Err(HadError::DimensionMismatch {
                    context: "hyperedge MLP output vs node MLP input",
                    expected: e.out_dim(),
                    found: vnn[l + 1].in_dim(),
                });
            }
        }
        Ok(Self { vnn, enn })
    }

    pub fn num_layers(&self) -> usize {
        self.vnn.len()
    }

    pub fn input_dim(&self) -> usize {
        self.vnn[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.vnn.last().expect("nonempty").out_dim()
    }

    pub fn vnn(&self) -> &[Mlp] {
        &self.vnn
    }

    pub fn enn(&self) -> &[Mlp] {
        &self.enn
    }

    pub fn vnn_mut(&mut self) -> &mut [Mlp] {
        &mut self.vnn
    }

    pub fn enn_mut(&mut self) -> &mut [Mlp] {
        &mut self.enn
    }

    fn layers(&self) -> impl Iterator<Item = &AffineLayer> {
        self.vnn
            .iter()
            .chain(&self.enn)
            .flat_map(|m| m.layers.iter())
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut AffineLayer> {
        self.vnn
            .iter_mut()
            .chain(self.enn.iter_mut())
            .flat_map(|m| m.layers.iter_mut())
    }

    pub fn num_parameters(&self) -> usize {
        self.layers().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        self.layers_mut().for_each(AffineLayer::zero_grads);
    }

    /// Calls `f(params, grads)` for every parameter tensor in a fixed order
    /// (node MLPs, then hyperedge MLPs; weight before bias).
    pub fn for_each_tensor_mut(&mut self, mut f: impl FnMut(&mut [f64], &[f64])) {
        for layer in self.layers_mut() {
            f(
                layer.weight.as_slice_mut().expect("standard layout"),
                layer.grad_weight.as_slice().expect("standard layout"),
            );
            f(
                layer.bias.as_slice_mut().expect("standard layout"),
                layer.grad_bias.as_slice().expect("standard layout"),
            );
        }
    }

    /// Parameters flattened in [`for_each_tensor_mut`](Self::for_each_tensor_mut) order.
    pub fn flat_parameters(&self) -> Vec<f64> {
        self.layers()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn flat_gradients(&self) -> Vec<f64> {
        self.layers()
            .flat_map(|l| l.grad_weight.iter().chain(l.grad_bias.iter()).copied())
            .collect()
    }

    pub fn set_flat_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_parameters() {
            return Err(HadError::DimensionMismatch {
                context: "flat parameter vector",
                expected: self.num_parameters(),
                found: values.len(),
            });
        }
        let mut it = values.iter();
        self.for_each_tensor_mut(|p, _| {
            for x in p {
                *x = *it.next().expect("length checked");
            }
        });
        Ok(())
    }

    /// Binary checkpoint; see `FORMATS.md` for the layout.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(PARAMS_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.vnn.len() as u32).to_le_bytes())?;
        w.write_all(&(self.enn.len() as u32).to_le_bytes())?;
        for mlp in self.vnn.iter().chain(&self.enn) {
            w.write_all(&(mlp.layers.len() as u32).to_le_bytes())?;
            for layer in &mlp.layers {
                w.write_all(&(layer.in_dim() as u64).to_le_bytes())?;
                w.write_all(&(layer.out_dim() as u64).to_le_bytes())?;
                w.write_all(&[layer.activation.code()])?;
                for x in layer.weight.iter().chain(layer.bias.iter()) {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut reader = CheckpointReader::new(&mut r);
        reader.expect_magic(PARAMS_MAGIC)?;
        let num_vnn = reader.u32()? as usize;
        let num_enn = reader.u32()? as usize;
        let mut mlps = Vec::with_capacity(num_vnn + num_enn);
        for _ in 0..num_vnn + num_enn {
            let depth = reader.u32()? as usize;
            let mut layers = Vec::with_capacity(depth);
            for _ in 0..depth {
                let in_dim = reader.u64()? as usize;
                let out_dim = reader.u64()? as usize;
                let activation = Activation::from_code(reader.u8()?)?;
                let weight =
                    Array2::from_shape_vec((in_dim, out_dim), reader.f64s(in_dim * out_dim)?)
                        .expect("length matches");
                let bias = Array1::from(reader.f64s(out_dim)?);
                layers.push(AffineLayer::new(weight, bias, activation)?);
            }
            mlps.push(Mlp::new(layers)?);
        }
        reader.expect_end()?;
        let enn = mlps.split_off(num_vnn);
        Self::new(mlps, enn)
    }
}

const PARAMS_MAGIC: &[u8; 8] = b"HADPARAM";
pub(crate) const CHECKPOINT_VERSION: u32 = 1;

/// Little-endian reader shared by the binary checkpoint formats.
pub(crate) struct CheckpointReader<'a, R: Read> {
    inner: &'a mut R,
}

impl<'a, R: Read> CheckpointReader<'a, R> {
    pub(crate) fn new(inner: &'a mut R) -> Self {
        Self { inner }
    }

    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| HadError::Checkpoint(format!("truncated: {e}")))?;
        Ok(buf)
    }

    pub(crate) fn expect_magic(&mut self, magic: &[u8; 8]) -> Result<()> {
        let found: [u8; 8] = self.bytes()?;
        if &found != magic {
            return Err(HadError::Checkpoint(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&found),
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(HadError::Checkpoint(format!(
                "unsupported version {version}"
            )));
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n)
            .map(|_| Ok(f64::from_le_bytes(self.bytes()?)))
            .collect()
    }

    pub(crate) fn expect_end(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe) {
            Ok(0) => Ok(()),
            Ok(_) => Err(HadError::Checkpoint("trailing bytes".into())),
            Err(e) => Err(HadError::Checkpoint(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for every tensor of a [`ParameterStore`], allocated lazily on
/// the first step.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    config: AdamConfig,
    step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// One bias-corrected Adam update from the accumulated gradients.
    /// Gradients are left in place.
    pub fn step(&mut self, store: &mut ParameterStore) {
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);
        let first = &mut self.first_moment;
        let second = &mut self.second_moment;
        let mut k = 0;
        store.for_each_tensor_mut(|params, grads| {
            if first.len() == k {
                first.push(vec![0.0; params.len()]);
                second.push(vec![0.0; params.len()]);
            }
            let (m, v) = (&mut first[k], &mut second[k]);
            for i in 0..params.len() {
                let g = grads[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                params[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
            k += 1;
        });
    }
}
