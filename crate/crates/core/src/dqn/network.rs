//! Fully connected Q-network with rectified-linear hidden layers and hand
//! written backpropagation.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CHECKPOINT_FORMAT: &str = "bess-qnet";
const CHECKPOINT_VERSION: u32 = 1;

/// Dense layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.biases).map(|(row, b)| {
            row.iter().zip(x).fold(*b, |acc, (w, xi)| acc + w * xi)
        }));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    layers: Vec<Layer>,
}

/// Parameter gradients, shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

/// One supervised sample: regress output `action` of `obs` towards `target`.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub obs: &'a [f64],
    pub action: usize,
    pub target: f64,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    sizes: Vec<usize>,
    layers: Vec<CheckpointLayer>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointLayer {
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl QNetwork {
    /// All-zero parameters.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        Ok(Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    /// He-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for layer in &mut net.layers {
            let limit = (6.0 / layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.gen_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(Error::DimensionMismatch(format!("layer {i} parameter lengths")));
            }
            if i > 0 && layers[i - 1].outputs != l.inputs {
                return Err(Error::DimensionMismatch(format!("layer {i} input width")));
            }
        }
        let net = Self { layers };
        check_sizes(&net.sizes())?;
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_len(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.biases);
        }
        p
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters for a network with {}",
                params.len(),
                self.parameter_count()
            )));
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, r) = r.split_at(l.biases.len());
            l.biases.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    /// FNV-1a over the parameter bit patterns.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.parameters() {
            for byte in v.to_bits().to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    pub fn q_values(&self, obs: &[f64]) -> Vec<f64> {
        let mut x = obs.to_vec();
        let mut y = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&x, &mut y);
            if i < last {
                relu(&mut y);
            }
            std::mem::swap(&mut x, &mut y);
        }
        x
    }

    /// Pre-activations of every layer; the input is kept as entry 0.
    fn forward_cached(&self, obs: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(obs.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            let input = acts.last().expect("non-empty");
            if i == 0 {
                layer.apply(input, &mut z);
            } else {
                let mut a = input.clone();
                relu(&mut a);
                layer.apply(&a, &mut z);
            }
            acts.push(z);
        }
        acts
    }

    /// Mean squared error on the taken actions.
    pub fn loss(&self, batch: &[Sample<'_>]) -> f64 {
        let sum: f64 = batch
            .iter()
            .map(|s| {
                let e = s.target - self.q_values(s.obs)[s.action];
                e * e
            })
            .sum();
        sum / batch.len() as f64
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn gradients(&self, batch: &[Sample<'_>]) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::InvalidConfig("empty training batch".into()));
        }
        let n = batch.len() as f64;
        let mut grads = Gradients {
            layers: self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
        };
        let mut loss = 0.0;
        for s in batch {
            if s.obs.len() != self.input_len() || s.action >= self.output_len() {
                return Err(Error::DimensionMismatch(format!(
                    "sample with {} inputs and action {}",
                    s.obs.len(),
                    s.action
                )));
            }
            let z = self.forward_cached(s.obs);
            let q = z[self.layers.len()][s.action];
            let err = q - s.target;
            loss += err * err;

            let mut delta = vec![0.0; self.output_len()];
            delta[s.action] = 2.0 * err / n;
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let g = &mut grads.layers[li];
                let input = &z[li];
                let activated = |v: f64| if li == 0 { v } else { v.max(0.0) };
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    g.biases[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, &x) in row.iter_mut().zip(input) {
                        *gw += d * activated(x);
                    }
                }
                if li == 0 {
                    break;
                }
                let mut next = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (acc, &w) in next.iter_mut().zip(row) {
                        *acc += d * w;
                    }
                }
                for (acc, &pre) in next.iter_mut().zip(input) {
                    if pre <= 0.0 {
                        *acc = 0.0;
                    }
                }
                delta = next;
            }
        }
        Ok((loss / n, grads))
    }

    /// Plain gradient-descent step.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in l.weights.iter_mut().zip(&g.weights) {
                *w -= lr * gw;
            }
            for (b, gb) in l.biases.iter_mut().zip(&g.biases) {
                *b -= lr * gb;
            }
        }
    }

    /// Copies `other`'s parameters into `self` bit for bit.
    pub fn copy_from(&mut self, other: &QNetwork) -> Result<()> {
        if self.sizes() != other.sizes() {
            return Err(Error::ArchitectureMismatch(self.sizes(), other.sizes()));
        }
        self.layers.clone_from(&other.layers);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            sizes: self.sizes(),
            layers: self
                .layers
                .iter()
                .map(|l| CheckpointLayer {
                    weights: l.weights.clone(),
                    biases: l.biases.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&ck)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        check_sizes(&ck.sizes)?;
        if ck.layers.len() + 1 != ck.sizes.len() {
            return Err(Error::DimensionMismatch("checkpoint layer count".into()));
        }
        let layers = ck
            .sizes
            .windows(2)
            .zip(ck.layers)
            .map(|(w, l)| Layer {
                inputs: w[0],
                outputs: w[1],
                weights: l.weights,
                biases: l.biases,
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn relu(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::InvalidConfig(format!(
            "layer sizes {sizes:?} need at least two positive entries"
        )));
    }
    Ok(())
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
