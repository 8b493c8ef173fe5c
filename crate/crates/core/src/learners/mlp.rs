//! Feedforward ReLU value network with hand-written backprop, Adam, and the
//! double-DQN update.

use rand::Rng;

use super::{argmax, LearnerError};

#[derive(Debug, Clone, Copy)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Offset of the row-major `outputs x inputs` weight block.
    w: usize,
    /// Offset of the bias vector.
    b: usize,
}

/// Parameter layout plus a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Layer>,
    params: Vec<f64>,
}

/// Per-layer activations kept for the backward pass.
struct Trace {
    /// `acts[0]` is the input; `acts[l + 1]` the output of layer `l` (post-ReLU for hidden layers).
    acts: Vec<Vec<f64>>,
}

impl Mlp {
    /// Uniform init in `±sqrt(6 / fan_in)` scaled down for the output layer; zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let mut layers = Vec::new();
        let mut offset = 0;
        for pair in sizes.windows(2) {
            let (inputs, outputs) = (pair[0], pair[1]);
            layers.push(Layer {
                inputs,
                outputs,
                w: offset,
                b: offset + inputs * outputs,
            });
            offset += inputs * outputs + outputs;
        }
        let mut params = vec![0.0; offset];
        let last = layers.len() - 1;
        for (l, layer) in layers.iter().enumerate() {
            let mut bound = (6.0 / layer.inputs as f64).sqrt();
            if l == last {
                bound *= 0.1;
            }
            for p in &mut params[layer.w..layer.b] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        Self { layers, params }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        Self::forward_with(&self.layers, &self.params, x)
    }

    /// Hidden-layer pre-activations for `x`, layer by layer.
    pub fn pre_activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let mut cur = x.to_vec();
        for layer in &self.layers[..self.layers.len() - 1] {
            let z = Self::dense(layer, &self.params, &cur, false);
            cur = z.iter().map(|v| v.max(0.0)).collect();
            out.push(z);
        }
        out
    }

    fn forward_with(layers: &[Layer], params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let last = layers.len() - 1;
        for (l, layer) in layers.iter().enumerate() {
            cur = Self::dense(layer, params, &cur, l != last);
        }
        cur
    }

    fn dense(layer: &Layer, params: &[f64], x: &[f64], relu: bool) -> Vec<f64> {
        let w = &params[layer.w..layer.b];
        let b = &params[layer.b..layer.b + layer.outputs];
        let nz = nonzeros(x);
        (0..layer.outputs)
            .map(|o| {
                let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
                let z = b[o] + nz.iter().map(|&(i, v)| row[i] * v).sum::<f64>();
                if relu {
                    z.max(0.0)
                } else {
                    z
                }
            })
            .collect()
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let next = Self::dense(layer, &self.params, &acts[l], l != last);
            acts.push(next);
        }
        Trace { acts }
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d output`.
    fn backward(&self, trace: &Trace, d_out: &[f64], grad: &mut [f64]) {
        let mut delta = d_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = self.layers[l];
            let input = nonzeros(&trace.acts[l]);
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                grad[layer.b + o] += d;
                let row = &mut grad[layer.w + o * layer.inputs..layer.w + (o + 1) * layer.inputs];
                for &(i, x) in &input {
                    row[i] += d * x;
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[layer.w..layer.b];
            let mut prev = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, wv) in prev.iter_mut().zip(row) {
                    *p += d * wv;
                }
            }
            // ReLU derivative on the previous layer's output.
            for (p, a) in prev.iter_mut().zip(&trace.acts[l]) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }
}

/// `(index, value)` of the non-zero entries.
fn nonzeros(x: &[f64]) -> Vec<(usize, f64)> {
    x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, &v)| (i, v)).collect()
}

/// Adam moments with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// One replayed transition with an encoded state.
#[derive(Debug, Clone, Copy)]
pub struct DdqnSample<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub reward: f64,
    pub next_state: &'a [f64],
    pub done: bool,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub loss: f64,
    /// Absolute TD error per item, for priority updates.
    pub td_abs: Vec<f64>,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
}

/// Online network, target copy and optimizer state.
#[derive(Debug, Clone)]
pub struct MlpValueNet {
    pub online: Mlp,
    target: Vec<f64>,
    adam: Adam,
    /// Global gradient-norm clip; non-positive disables clipping.
    pub clip_norm: f64,
}

impl MlpValueNet {
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let online = Mlp::new(sizes, rng);
        let target = online.params.clone();
        let adam = Adam::new(target.len());
        Self {
            online,
            target,
            adam,
            clip_norm: 10.0,
        }
    }

    pub fn q_values(&self, x: &[f64]) -> Vec<f64> {
        self.online.forward(x)
    }

    pub fn target_values(&self, x: &[f64]) -> Vec<f64> {
        Mlp::forward_with(&self.online.layers, &self.target, x)
    }

    pub fn target_params(&self) -> &[f64] {
        &self.target
    }

    pub fn greedy(&self, x: &[f64]) -> usize {
        argmax(&self.q_values(x))
    }

    /// `target <- (1 - rate) target + rate online`.
    pub fn refresh_target(&mut self, rate: f64) {
        for (t, o) in self.target.iter_mut().zip(&self.online.params) {
            *t += rate * (o - *t);
        }
    }

    /// Double-Q targets: the online net picks the next action, the target net scores it.
    pub fn td_targets(&self, batch: &[DdqnSample<'_>], gamma: f64) -> Vec<f64> {
        batch
            .iter()
            .map(|s| {
                if s.done {
                    s.reward
                } else {
                    let a = argmax(&self.q_values(s.next_state));
                    s.reward + gamma * self.target_values(s.next_state)[a]
                }
            })
            .collect()
    }

    /// Importance-weighted mean squared error against fixed targets, with its
    /// gradient in `grad` (overwritten). Returns `(loss, td errors)`.
    pub fn loss_and_gradient(
        &self,
        batch: &[DdqnSample<'_>],
        targets: &[f64],
        grad: &mut [f64],
    ) -> (f64, Vec<f64>) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let n = batch.len() as f64;
        let mut loss = 0.0;
        let mut tds = Vec::with_capacity(batch.len());
        let mut d_out = vec![0.0; self.online.output_size()];
        for (s, &y) in batch.iter().zip(targets) {
            let trace = self.online.trace(s.state);
            let q = trace.acts.last().expect("output layer")[s.action];
            let td = y - q;
            loss += s.weight * td * td / n;
            tds.push(td);
            d_out.iter_mut().for_each(|d| *d = 0.0);
            d_out[s.action] = -2.0 * s.weight * td / n;
            self.online.backward(&trace, &d_out, grad);
        }
        (loss, tds)
    }

    /// Loss against fixed targets only; used for finite differences.
    pub fn loss_with_targets(&self, batch: &[DdqnSample<'_>], targets: &[f64]) -> f64 {
        let n = batch.len() as f64;
        batch
            .iter()
            .zip(targets)
            .map(|(s, &y)| {
                let td = y - self.online.forward(s.state)[s.action];
                s.weight * td * td / n
            })
            .sum()
    }
}

/// One double-DQN Adam step on `batch`.
pub fn ddqn_step(
    net: &mut MlpValueNet,
    batch: &[DdqnSample<'_>],
    gamma: f64,
    learning_rate: f64,
) -> Result<StepOutcome, LearnerError> {
    if batch.is_empty() {
        return Err(LearnerError::EmptyBatch);
    }
    let targets = net.td_targets(batch, gamma);
    let mut grad = vec![0.0; net.online.params.len()];
    let (loss, tds) = net.loss_and_gradient(batch, &targets, &mut grad);
    let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if !loss.is_finite() || !grad_norm.is_finite() {
        let max_target = targets.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        return Err(LearnerError::NonFiniteLoss(format!(
            "loss={loss} grad_norm={grad_norm} max|target|={max_target} batch={}",
            batch.len()
        )));
    }
    if net.clip_norm > 0.0 && grad_norm > net.clip_norm {
        let scale = net.clip_norm / grad_norm;
        grad.iter_mut().for_each(|g| *g *= scale);
    }
    let params = &mut net.online.params;
    net.adam.step(params, &grad, learning_rate);
    Ok(StepOutcome {
        loss,
        td_abs: tds.iter().map(|t| t.abs()).collect(),
        grad_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_net(sizes: &[usize]) -> MlpValueNet {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = MlpValueNet::new(sizes, &mut rng);
        net.online.params_mut().iter_mut().for_each(|p| *p = 0.0);
        net.refresh_target(1.0);
        net
    }

    #[test]
    fn zero_net_terminal_loss_is_one() {
        let mut net = zero_net(&[2, 4, 3]);
        let x = [0.5, -0.5];
        let batch: Vec<DdqnSample> = (0..3)
            .map(|a| DdqnSample {
                state: &x,
                action: a,
                reward: 1.0,
                next_state: &x,
                done: true,
                weight: 1.0,
            })
            .collect();
        let out = ddqn_step(&mut net, &batch, 0.99, 1e-3).unwrap();
        assert!((out.loss - 1.0).abs() < 1e-15);
        assert!(out.td_abs.iter().all(|t| (t - 1.0).abs() < 1e-15));
    }

    #[test]
    fn halved_weights_halve_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = MlpValueNet::new(&[3, 5, 2], &mut rng);
        let xs: Vec<[f64; 3]> = (0..4).map(|i| [i as f64 * 0.1, 0.3, -0.2]).collect();
        let make = |w: f64| -> Vec<DdqnSample> {
            xs.iter()
                .enumerate()
                .map(|(i, x)| DdqnSample {
                    state: x,
                    action: i % 2,
                    reward: 0.5,
                    next_state: x,
                    done: i == 3,
                    weight: w,
                })
                .collect()
        };
        let full = make(1.0);
        let half = make(0.5);
        let targets = net.td_targets(&full, 0.9);
        let a = net.loss_with_targets(&full, &targets);
        let b = net.loss_with_targets(&half, &targets);
        assert!((b - 0.5 * a).abs() < 1e-15);
    }

    #[test]
    fn refresh_rules() {
        let mut net = zero_net(&[1, 1]);
        net.online.params_mut().iter_mut().for_each(|p| *p = 1.0);
        net.refresh_target(0.01);
        assert!(net.target_params().iter().all(|t| (t - 0.01).abs() < 1e-15));
        let mut net = zero_net(&[1, 1]);
        net.online.params_mut().iter_mut().for_each(|p| *p = 1.0);
        net.refresh_target(0.5);
        net.refresh_target(0.5);
        assert!(net.target_params().iter().all(|t| *t == 0.75));
        net.refresh_target(1.0);
        assert_eq!(net.target_params(), net.online.params());
    }

    #[test]
    fn terminal_target_ignores_next_state_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = MlpValueNet::new(&[2, 4, 2], &mut rng);
        let s = [0.1, 0.2];
        let s2 = [0.9, -0.4];
        let batch = [DdqnSample {
            state: &s,
            action: 1,
            reward: 0.7,
            next_state: &s2,
            done: true,
            weight: 1.0,
        }];
        let before = net.td_targets(&batch, 0.99);
        net.online.params_mut().iter_mut().for_each(|p| *p += 0.3);
        net.refresh_target(1.0);
        assert_eq!(net.td_targets(&batch, 0.99), before);
        assert_eq!(before, vec![0.7]);
    }

    #[test]
    fn rejects_empty_and_nan() {
        let mut net = zero_net(&[1, 2]);
        assert!(matches!(ddqn_step(&mut net, &[], 0.9, 1e-3), Err(LearnerError::EmptyBatch)));
        let x = [1.0];
        let batch = [DdqnSample {
            state: &x,
            action: 0,
            reward: f64::NAN,
            next_state: &x,
            done: true,
            weight: 1.0,
        }];
        assert!(matches!(ddqn_step(&mut net, &batch, 0.9, 1e-3), Err(LearnerError::NonFiniteLoss(_))));
    }

    #[test]
    fn learns_constant_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = MlpValueNet::new(&[2, 16, 2], &mut rng);
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let batch = [
            DdqnSample { state: &a, action: 0, reward: 1.0, next_state: &a, done: true, weight: 1.0 },
            DdqnSample { state: &b, action: 1, reward: -0.5, next_state: &b, done: true, weight: 1.0 },
        ];
        for _ in 0..2000 {
            ddqn_step(&mut net, &batch, 0.9, 1e-2).unwrap();
        }
        assert!((net.q_values(&a)[0] - 1.0).abs() < 1e-3);
        assert!((net.q_values(&b)[1] + 0.5).abs() < 1e-3);
    }
}
