//! From-scratch fully connected network: ReLU hidden layers, sigmoid output,
//! MSE loss, Adam. 64-bit floats throughout so finite-difference checks and
//! bitwise determinism tests are practical.

use rand::Rng;

use crate::linalg::Matrix;
use crate::rng::seeded_rng;
use crate::{Error, Result};

/// Fully connected network. `weights[l]` has shape `dims[l] x dims[l+1]`
/// (row-major, inputs are batch-rows), `biases[l]` has length `dims[l+1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layer_dims: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    seed: u64,
}

impl Mlp {
    /// He-uniform init for the ReLU hidden layers, Xavier-uniform for the
    /// sigmoid output layer, zero biases. Deterministic in `seed`.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "network needs at least 2 layer dims, got {}",
                layer_dims.len()
            )));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument("zero-width layer".into()));
        }
        let mut rng = seeded_rng(seed);
        let n_layers = layer_dims.len() - 1;
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (fan_in, fan_out) = (layer_dims[l], layer_dims[l + 1]);
            let limit = if l + 1 == n_layers {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            let data = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-limit..limit))
                .collect();
            weights.push(Matrix::from_vec(fan_in, fan_out, data));
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            seed,
        })
    }

    /// Rebuild from raw parameters (checkpoint loading).
    pub fn from_parts(
        layer_dims: Vec<usize>,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
        seed: u64,
    ) -> Result<Self> {
        if layer_dims.len() < 2
            || weights.len() != layer_dims.len() - 1
            || biases.len() != layer_dims.len() - 1
        {
            return Err(Error::InvalidArgument("inconsistent layer structure".into()));
        }
        for l in 0..weights.len() {
            if weights[l].rows() != layer_dims[l]
                || weights[l].cols() != layer_dims[l + 1]
                || biases[l].len() != layer_dims[l + 1]
            {
                return Err(Error::InvalidArgument(format!(
                    "layer {l} parameter shapes do not match dims"
                )));
            }
        }
        Ok(Self {
            layer_dims,
            weights,
            biases,
            seed,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Number of weight layers.
    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self, layer: usize) -> &Matrix {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut Matrix {
        &mut self.weights[layer]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    /// Batch forward pass: affine + ReLU through hidden layers, affine +
    /// sigmoid at the output. Row i of the output depends only on row i of
    /// the input, so any row batching is bit-identical.
    ///
    /// Panics if `x.cols() != input_dim`.
    pub fn forward(&self, x: &Matrix) -> Matrix {
        self.forward_cached(x).pop().unwrap()
    }

    /// Forward pass keeping every layer's activation (index 0 is the input),
    /// for reuse by the backward pass.
    pub fn forward_cached(&self, x: &Matrix) -> Vec<Matrix> {
        assert_eq!(x.cols(), self.input_dim(), "input width must match net");
        let mut acts = Vec::with_capacity(self.n_layers() + 1);
        acts.push(x.clone());
        for l in 0..self.n_layers() {
            let mut z = acts[l].matmul(&self.weights[l]);
            let bias = &self.biases[l];
            let cols = z.cols();
            let last = l + 1 == self.n_layers();
            for row in z.data_mut().chunks_exact_mut(cols) {
                for (v, b) in row.iter_mut().zip(bias) {
                    let pre = *v + b;
                    *v = if last { sigmoid(pre) } else { pre.max(0.0) };
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Reverse-mode gradients of an arbitrary scalar loss, given dL/dY at
    /// the output. Does not mutate the network.
    pub fn backward(&self, x: &Matrix, dl_dy: &Matrix) -> Gradients {
        let acts = self.forward_cached(x);
        self.backward_from_cache(&acts, dl_dy)
    }

    /// Backward pass reusing activations from [`Mlp::forward_cached`].
    pub fn backward_from_cache(&self, acts: &[Matrix], dl_dy: &Matrix) -> Gradients {
        let out = acts.last().unwrap();
        assert_eq!(
            (dl_dy.rows(), dl_dy.cols()),
            (out.rows(), out.cols()),
            "upstream gradient shape must match output"
        );
        let n_layers = self.n_layers();
        let mut d_weights = Vec::with_capacity(n_layers);
        let mut d_biases = Vec::with_capacity(n_layers);

        // delta at the output: dL/dY * sigmoid'(y), with sigmoid' = y(1-y)
        let mut delta = dl_dy.clone();
        for (d, &a) in delta.data_mut().iter_mut().zip(out.data()) {
            *d *= a * (1.0 - a);
        }

        for l in (0..n_layers).rev() {
            let a_prev = &acts[l];
            d_weights.push(a_prev.transpose().matmul(&delta));
            d_biases.push(column_sums(&delta));
            if l > 0 {
                let mut d_prev = delta.matmul(&self.weights[l].transpose());
                // ReLU gate: activation > 0 iff pre-activation > 0
                for (d, &a) in d_prev.data_mut().iter_mut().zip(a_prev.data()) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
                delta = d_prev;
            }
        }
        d_weights.reverse();
        d_biases.reverse();
        Gradients {
            d_weights,
            d_biases,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut sums = vec![0.0; m.cols()];
    for row in m.row_iter() {
        for (s, &v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    sums
}

/// Parameter gradients shaped like the network.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub d_weights: Vec<Matrix>,
    pub d_biases: Vec<Vec<f64>>,
}

/// Mean squared error over all elements, and its gradient w.r.t. the
/// prediction: `2 (pred - target) / n_elements`.
pub fn mse_loss_and_grad(pred: &Matrix, target: &Matrix) -> (f64, Matrix) {
    assert_eq!(
        (pred.rows(), pred.cols()),
        (target.rows(), target.cols()),
        "mse shape mismatch"
    );
    let n = pred.data().len() as f64;
    let mut grad = pred.clone();
    let mut loss = 0.0;
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        let d = *g - t;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    (loss / n, grad)
}

/// Adam optimizer state: first/second moments shaped like the parameters,
/// plus the step counter used for bias correction.
#[derive(Clone, Debug)]
pub struct AdamState {
    m_weights: Vec<Matrix>,
    v_weights: Vec<Matrix>,
    m_biases: Vec<Vec<f64>>,
    v_biases: Vec<Vec<f64>>,
    t: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(mlp: &Mlp, learning_rate: f64) -> Self {
        let m_weights: Vec<Matrix> = (0..mlp.n_layers())
            .map(|l| Matrix::zeros(mlp.weights(l).rows(), mlp.weights(l).cols()))
            .collect();
        let m_biases: Vec<Vec<f64>> = (0..mlp.n_layers())
            .map(|l| vec![0.0; mlp.biases(l).len()])
            .collect();
        Self {
            v_weights: m_weights.clone(),
            m_weights,
            v_biases: m_biases.clone(),
            m_biases,
            t: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

#[derive(Clone, Copy)]
struct AdamHyper {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    bc1: f64,
    bc2: f64,
}

/// One Adam update with bias correction. Advances the step counter even
/// for all-zero gradients.
pub fn adam_step(mlp: &mut Mlp, state: &mut AdamState, grads: &Gradients) {
    assert_eq!(grads.d_weights.len(), mlp.n_layers(), "gradient layer count");
    state.t += 1;
    let hp = AdamHyper {
        lr: state.learning_rate,
        beta1: state.beta1,
        beta2: state.beta2,
        epsilon: state.epsilon,
        bc1: 1.0 - state.beta1.powi(state.t as i32),
        bc2: 1.0 - state.beta2.powi(state.t as i32),
    };
    for l in 0..mlp.n_layers() {
        adam_update(
            mlp.weights[l].data_mut(),
            state.m_weights[l].data_mut(),
            state.v_weights[l].data_mut(),
            grads.d_weights[l].data(),
            hp,
        );
        adam_update(
            &mut mlp.biases[l],
            &mut state.m_biases[l],
            &mut state.v_biases[l],
            &grads.d_biases[l],
            hp,
        );
    }
}

fn adam_update(params: &mut [f64], m: &mut [f64], v: &mut [f64], grads: &[f64], hp: AdamHyper) {
    assert_eq!(params.len(), grads.len(), "gradient shape");
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g;
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g;
        let m_hat = m[i] / hp.bc1;
        let v_hat = v[i] / hp.bc2;
        params[i] -= hp.lr * m_hat / (v_hat.sqrt() + hp.epsilon);
    }
}
