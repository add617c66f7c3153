//! Dense generator `g(z) = mat(ζ_L(W_L … ζ₁(W₁ z + b₁) … + b_L))`.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Power iteration stops once the norm estimate changes by less than this
/// (relative).
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative at pre-activation `x` given the output `y = ζ(x)`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    /// Lipschitz constant of the scalar activation.
    pub fn lipschitz(self) -> f64 {
        match self {
            Activation::Sigmoid => 0.25,
            _ => 1.0,
        }
    }
}

/// One affine map followed by an elementwise activation. `weight` is
/// `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Array2<f64>,
    pub bias: Option<Array1<f64>>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weight: Array2<f64>, bias: Option<Array1<f64>>, activation: Activation) -> Result<Self> {
        if let Some(b) = &bias {
            if b.len() != weight.nrows() {
                return Err(Error::dims(format!(
                    "bias of length {} for a {}-row weight",
                    b.len(),
                    weight.nrows()
                )));
            }
        }
        let values = weight.iter().chain(bias.iter().flatten());
        if values.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("layer parameters must be finite"));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn rows(&self) -> usize {
        self.weight.nrows()
    }

    pub fn cols(&self) -> usize {
        self.weight.ncols()
    }
}

/// Frozen generator mapping `z ∈ R^D` to an `I × J` SLF in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorNet {
    layers: Vec<DenseLayer>,
    ni: usize,
    nj: usize,
}

impl GeneratorNet {
    /// Validates the layer chain and requires a sigmoid output layer with
    /// `I·J` rows.
    pub fn new(layers: Vec<DenseLayer>, ni: usize, nj: usize) -> Result<Self> {
        let net = Self::new_any_output(layers, ni, nj)?;
        if net.layers.last().map(|l| l.activation) != Some(Activation::Sigmoid) {
            return Err(Error::invalid("the output layer must use a sigmoid activation"));
        }
        Ok(net)
    }

    /// Like [`GeneratorNet::new`] but without the output-activation check.
    pub(crate) fn new_any_output(layers: Vec<DenseLayer>, ni: usize, nj: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("generator needs at least one layer"));
        }
        if ni == 0 || nj == 0 {
            return Err(Error::invalid("output grid must be non-empty"));
        }
        if layers[0].cols() == 0 {
            return Err(Error::invalid("latent dimension must be at least 1"));
        }
        for (n, w) in layers.windows(2).enumerate() {
            if w[1].cols() != w[0].rows() {
                return Err(Error::dims(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    n,
                    w[0].rows(),
                    n + 1,
                    w[1].cols()
                )));
            }
        }
        let out = layers.last().expect("non-empty").rows();
        if out != ni * nj {
            return Err(Error::dims(format!("output layer has {out} rows, grid needs {}", ni * nj)));
        }
        Ok(Self { layers, ni, nj })
    }

    /// Random dense net: hidden layers of the given widths with `hidden`
    /// activation, then a sigmoid output layer. Weights are uniform on
    /// `±gain/√fan_in`, biases uniform on `±0.1`.
    pub fn random(d: usize, hidden: &[usize], hidden_act: Activation, ni: usize, nj: usize, gain: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![d];
        widths.extend_from_slice(hidden);
        widths.push(ni * nj);
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|l| {
                let (fan_in, fan_out) = (widths[l], widths[l + 1]);
                let s = gain / (fan_in.max(1) as f64).sqrt();
                let w = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-s..=s));
                let b = Array1::from_shape_simple_fn(fan_out, || rng.random_range(-0.1..=0.1));
                let act = if l + 1 == n { Activation::Sigmoid } else { hidden_act };
                DenseLayer::new(w, Some(b), act)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers, ni, nj)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[0].cols()
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.ni, self.nj)
    }

    /// Activations of every layer (`acts[0] = z`) plus pre-activations.
    fn sweep(&self, z: &[f64]) -> (Vec<Array1<f64>>, Vec<Array1<f64>>) {
        let mut acts = vec![Array1::from(z.to_vec())];
        let mut pres = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut pre = layer.weight.dot(acts.last().expect("input"));
            if let Some(b) = &layer.bias {
                pre += b;
            }
            let act = pre.mapv(|x| layer.activation.apply(x));
            pres.push(pre);
            acts.push(act);
        }
        (acts, pres)
    }

    fn check_latent(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.latent_dim() {
            return Err(Error::dims(format!("latent of length {}, expected {}", z.len(), self.latent_dim())));
        }
        Ok(())
    }
}

/// `g(z)` reshaped row-major to `I × J`.
pub fn gen_forward(net: &GeneratorNet, z: &[f64]) -> Result<Array2<f64>> {
    net.check_latent(z)?;
    let (mut acts, _) = net.sweep(z);
    let out = acts.pop().expect("output");
    Ok(out.into_shape_with_order((net.ni, net.nj)).expect("output size checked"))
}

/// `∂⟨U, g(z)⟩/∂z` by a reverse sweep over cached activations.
pub fn gen_vjp(net: &GeneratorNet, z: &[f64], upstream: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    net.check_latent(z)?;
    if upstream.dim() != (net.ni, net.nj) {
        return Err(Error::dims(format!("upstream is {:?}, grid is {:?}", upstream.dim(), net.grid())));
    }
    let (acts, pres) = net.sweep(z);
    let mut delta: Array1<f64> = upstream.iter().copied().collect();
    for (n, layer) in net.layers.iter().enumerate().rev() {
        let act = layer.activation;
        for ((d, &x), &y) in delta.iter_mut().zip(&pres[n]).zip(&acts[n + 1]) {
            *d *= act.derivative(x, y);
        }
        delta = layer.weight.t().dot(&delta);
    }
    Ok(delta.to_vec())
}

/// Largest singular value by power iteration on `WᵀW`.
pub fn spectral_norm(w: ArrayView2<'_, f64>) -> f64 {
    let n = w.ncols();
    if n == 0 || w.nrows() == 0 {
        return 0.0;
    }
    // deterministic, generically non-orthogonal start
    let mut v = Array1::from_shape_fn(n, |i| 1.0 + 0.01 * ((i * 7919) % 101) as f64);
    v /= v.dot(&v).sqrt();
    let mut est = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let wv = w.dot(&v);
        let next = w.t().dot(&wv);
        let norm = next.dot(&next).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v = next / norm;
        // ‖W v‖ with the updated unit vector
        let sigma = w.dot(&v).dot(&w.dot(&v)).sqrt();
        if (sigma - est).abs() <= POWER_TOL * sigma {
            return sigma;
        }
        est = sigma;
    }
    est
}

/// `P = Π_ℓ φ_ℓ ‖W_ℓ‖₂`, a Lipschitz constant of `z ↦ vec(g(z))`.
pub fn lipschitz_product(net: &GeneratorNet) -> f64 {
    net.layers
        .iter()
        .map(|l| l.activation.lipschitz() * spectral_norm(l.weight.view()))
        .product()
}
