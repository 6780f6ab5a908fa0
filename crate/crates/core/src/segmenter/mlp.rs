//! Small tanh multilayer perceptron with softmax cross-entropy and Adam.

use nalgebra::DMatrix;
use rand::Rng;

/// Weights `in x out` and a `1 x out` bias per layer; tanh between layers,
/// raw logits at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DMatrix<f64>>,
}

/// Gradients in the same layout as [`Mlp`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DMatrix<f64>>,
}

impl Mlp {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            weights.push(DMatrix::from_fn(w[0], w[1], |_, _| rng.random_range(-bound..bound)));
            biases.push(DMatrix::zeros(1, w[1]));
        }
        Self { weights, biases }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.weights.iter().map(|w| w.nrows()).collect();
        if let Some(last) = self.weights.last() {
            s.push(last.ncols());
        }
        s
    }

    pub fn n_inputs(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.weights.last().map_or(0, |w| w.ncols())
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.biases)
            .all(|m| m.iter().all(|x| x.is_finite()))
    }

    /// Activations of every layer; the last entry holds the logits.
    fn forward_all(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(x.clone());
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = &acts[l] * w;
            for mut row in z.row_iter_mut() {
                row += b;
            }
            if l < last {
                z.apply(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    pub fn logits(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward_all(x).pop().expect("at least one layer")
    }

    /// Weighted mean cross-entropy and its gradient.
    ///
    /// `targets` are output indices; `class_weights[c]` scales the loss of
    /// every row whose target is `c`. The loss is normalized by the summed
    /// weight of the rows.
    pub fn loss_and_grad(&self, x: &DMatrix<f64>, targets: &[usize], class_weights: &[f64]) -> (f64, Gradients) {
        let acts = self.forward_all(x);
        let logits = acts.last().expect("logits");
        let probs = softmax_rows(logits);
        let total_w: f64 = targets.iter().map(|&t| class_weights[t]).sum();

        let mut loss = 0.0;
        let mut delta = probs;
        for (i, &t) in targets.iter().enumerate() {
            let w = class_weights[t] / total_w;
            loss -= w * delta[(i, t)].max(f64::MIN_POSITIVE).ln();
            delta[(i, t)] -= 1.0;
            for v in delta.row_mut(i).iter_mut() {
                *v *= w;
            }
        }

        let n_layers = self.weights.len();
        let mut gw = vec![DMatrix::zeros(0, 0); n_layers];
        let mut gb = vec![DMatrix::zeros(0, 0); n_layers];
        for l in (0..n_layers).rev() {
            gw[l] = acts[l].transpose() * &delta;
            gb[l] = DMatrix::from_fn(1, delta.ncols(), |_, j| delta.column(j).sum());
            if l > 0 {
                let mut back = &delta * self.weights[l].transpose();
                back.zip_apply(&acts[l], |d, a| *d *= 1.0 - a * a);
                delta = back;
            }
        }
        (
            loss,
            Gradients {
                weights: gw,
                biases: gb,
            },
        )
    }

    pub fn loss(&self, x: &DMatrix<f64>, targets: &[usize], class_weights: &[f64]) -> f64 {
        let probs = softmax_rows(&self.logits(x));
        let total_w: f64 = targets.iter().map(|&t| class_weights[t]).sum();
        targets
            .iter()
            .enumerate()
            .map(|(i, &t)| -class_weights[t] / total_w * probs[(i, t)].max(f64::MIN_POSITIVE).ln())
            .sum()
    }

    /// All parameters in a fixed order: W0, b0, W1, b1, ...
    pub fn params_mut(&mut self) -> Vec<&mut DMatrix<f64>> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }
}

impl Gradients {
    pub fn tensors(&self) -> Vec<&DMatrix<f64>> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = logits.clone();
    for mut row in p.row_iter_mut() {
        let m = row.max();
        row.apply(|v| *v = (*v - m).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for every parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<DMatrix<f64>>,
    v: Vec<DMatrix<f64>>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, model: &mut Mlp) -> Self {
        let shapes: Vec<(usize, usize)> = model.params_mut().iter().map(|p| p.shape()).collect();
        Self {
            cfg,
            m: shapes.iter().map(|&(r, c)| DMatrix::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| DMatrix::zeros(r, c)).collect(),
            t: 0,
        }
    }

    pub fn step(&mut self, model: &mut Mlp, grads: &Gradients) {
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for (((p, g), m), v) in model
            .params_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
