use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Activation;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `fan_in x fan_out`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Fully connected layers with a shared hidden activation and a single
/// sigmoid output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Dense>,
    pub activation: Activation,
}

/// Per-layer gradients, same shapes as [`Network::layers`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

/// Cached activations of one forward pass.
pub(crate) struct Trace {
    /// input to each layer (post-activation/dropout of the previous one)
    inputs: Vec<Array2<f64>>,
    /// hidden pre-activations
    pre: Vec<Array2<f64>>,
    /// inverted-dropout masks, already scaled by 1/(1-rate)
    masks: Vec<Option<Array2<f64>>>,
    pub output: Array1<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Network {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(input: usize, hidden: &[usize], activation: Activation, rng: &mut R) -> Self {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let layers = widths
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                let weights = Array2::from_shape_fn((w[0], w[1]), |_| rng.random_range(-limit..limit));
                Dense {
                    weights,
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Self { layers, activation }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Squared L2 norm of all weight matrices (biases excluded).
    pub fn weight_sq_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weights.iter().map(|w| w * w).sum::<f64>())
            .sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let mut k = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = flat[k];
                k += 1;
            }
            for b in l.bias.iter_mut() {
                *b = flat[k];
                k += 1;
            }
        }
    }

    /// Deterministic forward pass (no dropout).
    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let mut a = x.to_owned();
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.weights);
            z += &l.bias;
            if k < last {
                self.activation.apply_inplace(&mut z);
                a = z;
            } else {
                return z.column(0).mapv(sigmoid);
            }
        }
        unreachable!("network has an output layer")
    }

    /// `dropout` carries the drop rate and the mask generator.
    pub(crate) fn forward_train(&self, x: Array2<f64>, mut dropout: Option<(f64, &mut ChaCha8Rng)>) -> Trace {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut masks = Vec::with_capacity(last);
        let mut a = x;
        for (k, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.weights);
            z += &l.bias;
            inputs.push(a);
            if k == last {
                return Trace {
                    inputs,
                    pre,
                    masks,
                    output: z.column(0).mapv(sigmoid),
                };
            }
            let mut h = z.clone();
            self.activation.apply_inplace(&mut h);
            pre.push(z);
            let mask = dropout.as_mut().map(|(rate, rng)| {
                let rate = *rate;
                let keep = 1.0 - rate;
                Array2::from_shape_fn(
                    h.raw_dim(),
                    |_| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    },
                )
            });
            if let Some(m) = &mask {
                h *= m;
            }
            masks.push(mask);
            a = h;
        }
        unreachable!("network has an output layer")
    }

    /// Gradients of `mean((y_hat - y)^2) + ridge * sum ||W||^2`.
    pub(crate) fn backward(&self, trace: &Trace, y: &Array1<f64>, ridge: f64) -> Gradients {
        let b = y.len() as f64;
        let last = self.layers.len() - 1;
        let yhat = &trace.output;
        // d loss / d output pre-activation
        let mut delta = Array2::zeros((y.len(), 1));
        Zip::from(delta.column_mut(0))
            .and(yhat)
            .and(y)
            .for_each(|d, &p, &t| *d = 2.0 * (p - t) / b * p * (1.0 - p));

        let mut gw = vec![Array2::zeros((0, 0)); self.layers.len()];
        let mut gb = vec![Array1::zeros(0); self.layers.len()];
        for k in (0..=last).rev() {
            let l = &self.layers[k];
            let mut w_grad = trace.inputs[k].t().dot(&delta);
            if ridge > 0.0 {
                w_grad.scaled_add(2.0 * ridge, &l.weights);
            }
            gw[k] = w_grad;
            gb[k] = delta.sum_axis(Axis(0));
            if k == 0 {
                break;
            }
            let mut upstream = delta.dot(&l.weights.t());
            if let Some(m) = &trace.masks[k - 1] {
                upstream *= m;
            }
            let deriv = self.activation.derivative(&trace.pre[k - 1]);
            upstream *= &deriv;
            delta = upstream;
        }
        Gradients { weights: gw, bias: gb }
    }

    /// Objective and flat gradient on a full batch without dropout.
    pub fn loss_and_gradient(&self, x: ArrayView2<f64>, y: &Array1<f64>, ridge: f64) -> (f64, Vec<f64>) {
        let trace = self.forward_train(x.to_owned(), None);
        let loss = self.objective(&trace.output, y, ridge);
        let g = self.backward(&trace, y, ridge);
        let mut flat = Vec::with_capacity(self.n_params());
        for (w, b) in g.weights.iter().zip(&g.bias) {
            flat.extend(w.iter());
            flat.extend(b.iter());
        }
        (loss, flat)
    }

    pub fn loss(&self, x: ArrayView2<f64>, y: &Array1<f64>, ridge: f64) -> f64 {
        self.objective(&self.predict(x), y, ridge)
    }

    fn objective(&self, yhat: &Array1<f64>, y: &Array1<f64>, ridge: f64) -> f64 {
        let mse = Zip::from(yhat).and(y).fold(0.0, |acc, &p, &t| acc + (p - t) * (p - t)) / y.len() as f64;
        mse + ridge * self.weight_sq_norm()
    }
}
