//! Fully-connected layers with hand-written backpropagation.
//!
//! Hidden layers use tanh. The final layer's activation is chosen per
//! network (identity for encoders, logistic sigmoid for decoders and the
//! discriminator).

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Self::Identity => z,
            Self::Tanh => z.tanh(),
            Self::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Tanh => 1.0 - a * a,
            Self::Sigmoid => a * (1.0 - a),
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `y = W x + b`, `W` stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub output: Activation,
}

/// Per-layer activations from one forward pass; `[0]` is the input.
pub struct Trace {
    pub activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has an input")
    }
}

/// Gradient buffers shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub layers: Vec<Dense>,
}

impl Grads {
    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|g| *g *= factor);
            l.bias.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|g| g.is_finite()))
    }
}

impl Mlp {
    /// `dims = [input, hidden..., output]`.
    pub fn glorot<R: Rng + ?Sized>(dims: &[usize], output: Activation, rng: &mut R) -> Self {
        let layers = dims
            .windows(2)
            .map(|w| Dense::glorot(w[0], w[1], rng))
            .collect();
        Self { layers, output }
    }

    pub fn zeros(dims: &[usize], output: Activation) -> Self {
        let layers = dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Self { layers, output }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    /// `[input, hidden..., output]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            Activation::Tanh
        }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut a = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let act = self.activation(i);
            a = layer.affine(&a).into_iter().map(|z| act.apply(z)).collect();
        }
        a
    }

    pub fn forward_trace(&self, input: &[f64]) -> Trace {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let act = self.activation(i);
            let prev = activations.last().expect("non-empty");
            let next = layer
                .affine(prev)
                .into_iter()
                .map(|z| act.apply(z))
                .collect();
            activations.push(next);
        }
        Trace { activations }
    }

    pub fn zero_grads(&self) -> Grads {
        Grads {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    /// Accumulate parameter gradients into `grads` given `dL/d(output)`.
    /// Returns `dL/d(input)` when `want_input_grad` is set.
    pub fn backward(
        &self,
        trace: &Trace,
        grad_output: &[f64],
        grads: &mut Grads,
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        let mut upstream = grad_output.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let out = &trace.activations[i + 1];
            let input = &trace.activations[i];
            let act = self.activation(i);
            let delta: Vec<f64> = upstream
                .iter()
                .zip(out)
                .map(|(g, &a)| g * act.derivative_from_output(a))
                .collect();

            let g = &mut grads.layers[i];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
                if d != 0.0 {
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, &x) in row.iter_mut().zip(input) {
                        *gw += d * x;
                    }
                }
            }

            if i == 0 && !want_input_grad {
                return None;
            }
            let mut down = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (acc, &w) in down.iter_mut().zip(row) {
                    *acc += w * d;
                }
            }
            upstream = down;
        }
        Some(upstream)
    }

    /// `params -= rate * grads`.
    pub fn descend(&mut self, grads: &Grads, rate: f64) {
        self.apply(grads, -rate);
    }

    /// `params += rate * grads`.
    pub fn ascend(&mut self, grads: &Grads, rate: f64) {
        self.apply(grads, rate);
    }

    fn apply(&mut self, grads: &Grads, step: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (p, d) in l.weights.iter_mut().zip(&g.weights) {
                *p += step * d;
            }
            for (p, d) in l.bias.iter_mut().zip(&g.bias) {
                *p += step * d;
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Mutable view of every parameter, in the same order as [`Grads::flatten`].
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Central difference of `f` with respect to every parameter of `net`.
    fn numeric_grad(net: &Mlp, f: impl Fn(&Mlp) -> f64) -> Vec<f64> {
        let h = 1e-5;
        let mut probe = net.clone();
        let n = net.param_count();
        (0..n)
            .map(|k| {
                let orig = *probe.params_mut().nth(k).unwrap();
                *probe.params_mut().nth(k).unwrap() = orig + h;
                let up = f(&probe);
                *probe.params_mut().nth(k).unwrap() = orig - h;
                let down = f(&probe);
                *probe.params_mut().nth(k).unwrap() = orig;
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn zero_network_outputs() {
        let id = Mlp::zeros(&[4, 3, 2], Activation::Identity);
        assert_eq!(id.forward(&[1.0, 2.0, 3.0, 4.0]), vec![0.0, 0.0]);
        let sig = Mlp::zeros(&[2, 5], Activation::Sigmoid);
        assert_eq!(sig.forward(&[9.0, -9.0]), vec![0.5; 5]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for output in [Activation::Identity, Activation::Sigmoid, Activation::Tanh] {
            let net = Mlp::glorot(&[5, 4, 3, 2], output, &mut rng);
            let x: Vec<f64> = (0..5).map(|i| (i as f64 * 0.37).sin()).collect();
            let target = [0.2, -0.4];
            let loss = |n: &Mlp| {
                n.forward(&x)
                    .iter()
                    .zip(&target)
                    .map(|(y, t)| (y - t) * (y - t))
                    .sum::<f64>()
            };
            let trace = net.forward_trace(&x);
            let g_out: Vec<f64> = trace
                .output()
                .iter()
                .zip(&target)
                .map(|(y, t)| 2.0 * (y - t))
                .collect();
            let mut grads = net.zero_grads();
            let g_in = net.backward(&trace, &g_out, &mut grads, true).unwrap();

            for (a, n) in grads.flatten().iter().zip(numeric_grad(&net, loss)) {
                assert!((a - n).abs() <= 1e-7 * (1.0 + n.abs()), "{a} vs {n}");
            }
            // input gradient
            for k in 0..5 {
                let mut xp = x.clone();
                xp[k] += 1e-5;
                let mut xm = x.clone();
                xm[k] -= 1e-5;
                let f = |v: &[f64]| {
                    net.forward(v)
                        .iter()
                        .zip(&target)
                        .map(|(y, t)| (y - t) * (y - t))
                        .sum::<f64>()
                };
                let n = (f(&xp) - f(&xm)) / 2e-5;
                assert!((g_in[k] - n).abs() <= 1e-7 * (1.0 + n.abs()));
            }
        }
    }
}
