//! Dense feedforward networks with hand-written reverse-mode gradients.
//!
//! Parameters live in one flat vector in canonical layout: for each layer in
//! order, its weight matrix (shape `out × in`, row-major) followed by its bias
//! vector. The same layout is used for gradients ([`FlatGrad`]), for update
//! directions and for the on-disk format, so "flatten" and "reshape" are
//! views rather than copies in the hot paths.

use crate::error::{Error, Result};
use crate::rng::Rng;
use rand::Rng as _;
use std::fmt;
use std::ops::{Deref, DerefMut};
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            _ => Err(Error::Parse(format!("unknown activation `{s}`"))),
        }
    }
}

/// A parameter-shaped vector (gradient, direction, trace) in canonical layout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlatGrad(pub Vec<f64>);

impl FlatGrad {
    pub fn zeros(k: usize) -> Self {
        FlatGrad(vec![0.0; k])
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        self.dot(&self.0).sqrt()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FlatGrad {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for FlatGrad {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for FlatGrad {
    fn from(v: Vec<f64>) -> Self {
        FlatGrad(v)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One layer's parameters (or gradients) in matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    /// `rows × cols`, row-major.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Number of parameters of a network with the given layer widths.
pub fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Concatenates per-layer matrices into canonical layout.
pub fn flatten(layers: &[Layer]) -> Result<FlatGrad> {
    let mut out = Vec::with_capacity(layers.iter().map(|l| l.weights.len() + l.biases.len()).sum());
    for (i, l) in layers.iter().enumerate() {
        if l.weights.len() != l.rows * l.cols || l.biases.len() != l.rows {
            return Err(Error::Domain(format!("layer {i} has inconsistent sizes")));
        }
        if i > 0 && layers[i - 1].rows != l.cols {
            return Err(Error::Domain(format!("layer {i} input width does not chain")));
        }
        out.extend_from_slice(&l.weights);
        out.extend_from_slice(&l.biases);
    }
    Ok(FlatGrad(out))
}

/// Splits a canonical-layout vector into per-layer matrices for `dims`.
pub fn reshape(flat: &[f64], dims: &[usize]) -> Result<Vec<Layer>> {
    if flat.len() != param_count(dims) {
        return Err(Error::Domain(format!(
            "vector of length {} does not fit layer dims {:?} ({} parameters)",
            flat.len(),
            dims,
            param_count(dims)
        )));
    }
    let mut layers = Vec::with_capacity(dims.len().saturating_sub(1));
    let mut at = 0;
    for w in dims.windows(2) {
        let (cols, rows) = (w[0], w[1]);
        let weights = flat[at..at + rows * cols].to_vec();
        at += rows * cols;
        let biases = flat[at..at + rows].to_vec();
        at += rows;
        layers.push(Layer { rows, cols, weights, biases });
    }
    Ok(layers)
}

/// Intermediate activations of one forward pass, reusable for backward.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has at least the input")
    }
}

/// Dense network: hidden layers use `activation`, the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

impl Mlp {
    /// Uniform initialization on `±1/sqrt(fan_in)` for weights and biases.
    pub fn new(dims: &[usize], activation: Activation, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(dims, activation)?;
        let mut at = 0;
        for w in dims.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let n = w[0] * w[1] + w[1];
            for p in &mut net.params[at..at + n] {
                *p = rng.gen_range(-bound..=bound);
            }
            at += n;
        }
        Ok(net)
    }

    pub fn zeros(dims: &[usize], activation: Activation) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::Domain(format!("invalid layer dims {dims:?}")));
        }
        Ok(Self { dims: dims.to_vec(), activation, params: vec![0.0; param_count(dims)] })
    }

    pub fn from_params(dims: &[usize], activation: Activation, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(dims, activation)?;
        if params.len() != net.params.len() {
            return Err(Error::Domain(format!(
                "{} parameters given, {:?} needs {}",
                params.len(),
                dims,
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    /// Zeroes the output layer so the network starts out emitting exactly 0.
    pub fn zero_output_layer(&mut self) {
        let last = self.dims.len() - 2;
        let n = self.dims[last] * self.dims[last + 1] + self.dims[last + 1];
        let k = self.params.len();
        self.params[k - n..].iter_mut().for_each(|p| *p = 0.0);
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn activation(&self) -> Activation {
        self.activation
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

    pub fn layers(&self) -> Vec<Layer> {
        reshape(&self.params, &self.dims).expect("params always match dims")
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(input)?.acts.pop().unwrap())
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<ForwardTrace> {
        if input.len() != self.dims[0] {
            return Err(Error::Domain(format!(
                "input has dimension {}, network expects {}",
                input.len(),
                self.dims[0]
            )));
        }
        let n_layers = self.dims.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(input.to_vec());
        let mut at = 0;
        for l in 0..n_layers {
            let (cols, rows) = (self.dims[l], self.dims[l + 1]);
            let weights = &self.params[at..at + rows * cols];
            let biases = &self.params[at + rows * cols..at + rows * cols + rows];
            at += rows * cols + rows;
            let x = &acts[l];
            let hidden = l + 1 < n_layers;
            let out: Vec<f64> = (0..rows)
                .map(|i| {
                    let z = dot(&weights[i * cols..(i + 1) * cols], x) + biases[i];
                    if hidden {
                        self.activation.apply(z)
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(out);
        }
        Ok(ForwardTrace { acts })
    }

    /// Gradient of `output_cograd · forward(input)` with respect to the
    /// parameters.
    pub fn backward(&self, input: &[f64], output_cograd: &[f64]) -> Result<FlatGrad> {
        let trace = self.forward_trace(input)?;
        self.backward_trace(&trace, output_cograd)
    }

    pub fn backward_trace(&self, trace: &ForwardTrace, output_cograd: &[f64]) -> Result<FlatGrad> {
        let mut grad = vec![0.0; self.params.len()];
        self.accumulate_backward(trace, output_cograd, 1.0, &mut grad)?;
        Ok(FlatGrad(grad))
    }

    /// Adds `scale ·` the gradient into `grad` (canonical layout).
    pub fn accumulate_backward(
        &self,
        trace: &ForwardTrace,
        output_cograd: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        if output_cograd.len() != self.output_dim() {
            return Err(Error::Domain(format!(
                "cograd has dimension {}, network output is {}",
                output_cograd.len(),
                self.output_dim()
            )));
        }
        if grad.len() != self.params.len() {
            return Err(Error::Domain("gradient buffer has the wrong length".into()));
        }
        let n_layers = self.dims.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut at = 0;
        for l in 0..n_layers {
            offsets.push(at);
            at += self.dims[l] * self.dims[l + 1] + self.dims[l + 1];
        }
        let mut delta: Vec<f64> = output_cograd.iter().map(|c| c * scale).collect();
        for l in (0..n_layers).rev() {
            let (cols, rows) = (self.dims[l], self.dims[l + 1]);
            let base = offsets[l];
            let x = &trace.acts[l];
            for i in 0..rows {
                let d = delta[i];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[base + i * cols..base + (i + 1) * cols];
                for (g, xj) in row.iter_mut().zip(x) {
                    *g += d * xj;
                }
            }
            for i in 0..rows {
                grad[base + rows * cols + i] += delta[i];
            }
            if l > 0 {
                let weights = &self.params[base..base + rows * cols];
                let mut prev = vec![0.0; cols];
                for i in 0..rows {
                    let d = delta[i];
                    if d == 0.0 {
                        continue;
                    }
                    for (p, w) in prev.iter_mut().zip(&weights[i * cols..(i + 1) * cols]) {
                        *p += w * d;
                    }
                }
                for (p, a) in prev.iter_mut().zip(x) {
                    *p *= self.activation.derivative_from_output(*a);
                }
                delta = prev;
            }
        }
        Ok(())
    }

    /// `params ← params + step · direction`.
    pub fn apply_update(&mut self, direction: &[f64], step: f64) -> Result<()> {
        if direction.len() != self.params.len() {
            return Err(Error::Domain(format!(
                "direction has length {}, network has {} parameters",
                direction.len(),
                self.params.len()
            )));
        }
        if step == 0.0 {
            return Ok(());
        }
        for (p, d) in self.params.iter_mut().zip(direction) {
            *p += step * d;
        }
        Ok(())
    }

    pub fn param_norm(&self) -> f64 {
        dot(&self.params, &self.params).sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Text form: a header with the layer widths and activation, then one
    /// parameter per line in canonical layout. Values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_text(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let mut s = String::with_capacity(self.params.len() * 24 + 64);
        s.push_str("# natgrad-mlp v1\n");
        s.push_str(&format!("layer_dims = {}\n", dims.join(" ")));
        s.push_str(&format!("activation = {}\n", self.activation));
        s.push_str(&format!("params = {}\n", self.params.len()));
        for p in &self.params {
            s.push_str(&format!("{p:?}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty parameter file".into()))?;
        if header.trim() != "# natgrad-mlp v1" {
            return Err(Error::Parse(format!("unrecognized header `{header}`")));
        }
        let mut field = |name: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing `{name}` line")))?;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("malformed line `{line}`")))?;
            if key.trim() != name {
                return Err(Error::Parse(format!("expected `{name}`, found `{}`", key.trim())));
            }
            Ok(value.trim().to_string())
        };
        let dims = field("layer_dims")?
            .split_whitespace()
            .map(|d| d.parse::<usize>().map_err(|_| Error::Parse(format!("bad layer width `{d}`"))))
            .collect::<Result<Vec<_>>>()?;
        let activation: Activation = field("activation")?.parse()?;
        let count: usize = field("params")?
            .parse()
            .map_err(|_| Error::Parse("bad parameter count".into()))?;
        let params = lines
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad parameter value `{l}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if params.len() != count {
            return Err(Error::Parse(format!("header says {count} parameters, found {}", params.len())));
        }
        Self::from_params(&dims, activation, params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
