//! Backpropagation through time with per-sample gradient descent, plus a
//! central-difference gradient used to check it.

use std::ops::{Deref, DerefMut};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elman::{ElmanNetwork, Parameters};
use crate::error::{Error, Result};
use crate::extraction::LabeledWindow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub shuffle_seed: u64,
    pub target_pos: f64,
    pub target_neg: f64,
    /// Minimum epoch-SSE decrease that counts as progress.
    pub stop_tolerance: f64,
    /// Consecutive epochs without progress before stopping.
    pub patience: usize,
    /// Loss multiplier for positive windows.
    pub positive_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            max_epochs: 2000,
            shuffle_seed: 0,
            target_pos: 1.0,
            target_neg: 0.0,
            stop_tolerance: 1e-6,
            patience: 10,
            positive_weight: 1.0,
        }
    }
}

impl TrainConfig {
    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be at least 1");
        }
        if !(self.target_pos > self.target_neg) {
            return fail("target_pos must exceed target_neg");
        }
        if !(self.positive_weight > 0.0 && self.positive_weight.is_finite()) {
            return fail("positive_weight must be positive");
        }
        if !(self.stop_tolerance >= 0.0) {
            return fail("stop_tolerance must be non-negative");
        }
        Ok(())
    }

    pub fn target(&self, label: bool) -> f64 {
        if label {
            self.target_pos
        } else {
            self.target_neg
        }
    }

    fn weight(&self, label: bool) -> f64 {
        if label {
            self.positive_weight
        } else {
            1.0
        }
    }
}

/// ∂E/∂θ with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient(pub Parameters);

impl Deref for Gradient {
    type Target = Parameters;

    fn deref(&self) -> &Parameters {
        &self.0
    }
}

impl DerefMut for Gradient {
    fn deref_mut(&mut self) -> &mut Parameters {
        &mut self.0
    }
}

/// `½·c·(output − target)²`, with `c` the class weight.
pub fn sample_loss(
    net: &ElmanNetwork,
    window: &[f64],
    label: bool,
    config: &TrainConfig,
) -> Result<f64> {
    let out = net.forward(window)?;
    let diff = out - config.target(label);
    Ok(0.5 * config.weight(label) * diff * diff)
}

/// Exact gradient of [`sample_loss`] by full backpropagation through all unfolded steps.
///
/// Also returns the forward output so the caller need not recompute it.
pub fn bptt_gradients(
    net: &ElmanNetwork,
    window: &[f64],
    label: bool,
    config: &TrainConfig,
) -> Result<(Gradient, f64)> {
    let trace = net.forward_trace(window)?;
    let k = net.topology.hidden;
    let j = net.topology.inputs;
    let p = &net.params;
    let mut g = Gradient(Parameters::zeros(&net.topology));

    let out = trace.output;
    let delta_out = config.weight(label) * (out - config.target(label)) * out * (1.0 - out);
    let last = &trace.states[trace.states.len() - 1].0;
    for (gu, y) in g.u.iter_mut().zip(last) {
        *gu = delta_out * y;
    }
    g.b_o = delta_out;

    // dE/dy at the current step, walked backwards through time
    let mut dy: Vec<f64> = p.u.iter().map(|u| delta_out * u).collect();
    let mut delta = vec![0.0; k];
    for step in (1..trace.states.len()).rev() {
        let y = &trace.states[step].0;
        let prev = &trace.states[step - 1].0;
        let x = &window[(step - 1) * j..step * j];
        for i in 0..k {
            delta[i] = dy[i] * y[i] * (1.0 - y[i]);
        }
        for i in 0..k {
            g.b_h[i] += delta[i];
            for (jj, xj) in x.iter().enumerate() {
                g.w[jj * k + i] += delta[i] * xj;
            }
            for (kk, yk) in prev.iter().enumerate() {
                g.v[i * k + kk] += delta[i] * yk;
            }
        }
        for (kk, d) in dy.iter_mut().enumerate() {
            *d = (0..k).map(|i| p.v[i * k + kk] * delta[i]).sum();
        }
    }

    if !net.options.use_biases {
        g.b_h.fill(0.0);
        g.b_o = 0.0;
    }
    Ok((g, out))
}

/// Central differences of `f` around `theta`, one coordinate at a time.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, theta: &[f64], eps: f64) -> Vec<f64> {
    assert!(eps > 0.0, "eps must be positive");
    let mut probe = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            probe[i] = theta[i] + eps;
            let plus = f(&probe);
            probe[i] = theta[i] - eps;
            let minus = f(&probe);
            probe[i] = theta[i];
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

/// Finite-difference estimate of the [`sample_loss`] gradient.
pub fn finite_difference_gradient(
    net: &ElmanNetwork,
    window: &[f64],
    label: bool,
    config: &TrainConfig,
    eps: f64,
) -> Result<Gradient> {
    net.forward(window)?;
    let theta = net.params.to_flat();
    let mut probe = net.clone();
    let flat = central_difference(
        |t| {
            probe.params.set_flat(t);
            sample_loss(&probe, window, label, config).expect("window checked")
        },
        &theta,
        eps,
    );
    let mut g = Gradient(Parameters::zeros(&net.topology));
    g.set_flat(&flat);
    if !net.options.use_biases {
        g.b_h.fill(0.0);
        g.b_o = 0.0;
    }
    Ok(g)
}

/// `θ ← θ − learning_rate · grad`.
pub fn sgd_update(net: &mut ElmanNetwork, grad: &Gradient, learning_rate: f64) {
    assert_eq!(net.params.len(), grad.len(), "gradient shape");
    for (p, g) in net.params.iter_mut().zip(grad.iter()) {
        *p -= learning_rate * g;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxEpochs,
    /// SSE stopped improving for `patience` epochs.
    Converged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Σ (output − target)² over the epoch, measured before each sample's update.
    pub sse: Vec<f64>,
    /// Fraction of training windows classified correctly at 0.5 during the epoch.
    pub train_accuracy: Vec<f64>,
    pub stop_reason: StopReason,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.sse.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,sse,train_accuracy\n");
        for (i, (sse, acc)) in self.sse.iter().zip(&self.train_accuracy).enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, sse, acc));
        }
        out
    }
}

/// Stochastic BPTT: every epoch visits the windows in a fresh seeded
/// permutation and updates the network after each one.
pub fn train(
    mut net: ElmanNetwork,
    windows: &[LabeledWindow],
    config: &TrainConfig,
) -> Result<(ElmanNetwork, TrainHistory)> {
    config.validate()?;
    net.validate()?;
    if windows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let expected = net.topology.window_len();
    if let Some(w) = windows.iter().find(|w| w.inputs.len() != expected) {
        return Err(Error::WindowLength {
            expected,
            actual: w.inputs.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut history = TrainHistory {
        sse: Vec::new(),
        train_accuracy: Vec::new(),
        stop_reason: StopReason::MaxEpochs,
    };
    let mut stalled = 0;

    for _ in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut sse = 0.0;
        let mut correct = 0usize;
        for &idx in &order {
            let w = &windows[idx];
            let (grad, out) = bptt_gradients(&net, &w.inputs, w.label, config)?;
            let diff = out - config.target(w.label);
            sse += diff * diff;
            if (out >= 0.5) == w.label {
                correct += 1;
            }
            sgd_update(&mut net, &grad, config.learning_rate);
        }
        if let Some(&prev) = history.sse.last() {
            if prev - sse < config.stop_tolerance {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        history.sse.push(sse);
        history
            .train_accuracy
            .push(correct as f64 / windows.len() as f64);
        if stalled >= config.patience.max(1) {
            history.stop_reason = StopReason::Converged;
            break;
        }
    }
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elman::{NetworkOptions, Topology};

    #[test]
    fn loss_arithmetic() {
        let zero = ElmanNetwork::zeros(Topology::detector(5), NetworkOptions::default()).unwrap();
        let cfg = TrainConfig::default();
        assert_eq!(sample_loss(&zero, &[0.3; 5], true, &cfg).unwrap(), 0.125);
        let half = TrainConfig {
            target_pos: 0.5,
            ..cfg.clone()
        };
        assert_eq!(sample_loss(&zero, &[0.3; 5], true, &half).unwrap(), 0.0);
    }

    #[test]
    fn zero_network_output_gradient() {
        let zero = ElmanNetwork::zeros(Topology::detector(5), NetworkOptions::default()).unwrap();
        let cfg = TrainConfig::default();
        let (g, out) = bptt_gradients(&zero, &[0.2, 0.4, 0.6, 0.8, 1.0], true, &cfg).unwrap();
        assert_eq!(out, 0.5);
        let expected = (0.5 - 1.0) * 0.5 * 0.5 * 0.5;
        assert!(g.u.iter().all(|&gu| gu == expected));
        assert_eq!(g.b_o, (0.5 - 1.0) * 0.25);
        // u = 0 blocks everything upstream of the output
        assert!(g.w.iter().chain(&g.v).chain(&g.b_h).all(|&x| x == 0.0));
    }

    #[test]
    fn central_difference_exact_on_quadratic() {
        let f = |t: &[f64]| 3.0 * t[0] * t[0] - 2.0 * t[0] * t[1] + 0.5 * t[1] * t[1] + t[1];
        let theta = [1.25, -0.75];
        let g = central_difference(f, &theta, 1e-3);
        let exact = [
            6.0 * 1.25 - 2.0 * -0.75,
            -2.0 * 1.25 + 0.5 * 2.0 * -0.75 + 1.0,
        ];
        for (a, b) in g.iter().zip(exact) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn sgd_noops() {
        let mut net =
            ElmanNetwork::init(Topology::detector(5), NetworkOptions::default(), 3).unwrap();
        let before = net.clone();
        let zero = Gradient(Parameters::zeros(&net.topology));
        sgd_update(&mut net, &zero, 0.5);
        assert_eq!(net, before);
        let cfg = TrainConfig::default();
        let (g, _) = bptt_gradients(&net, &[0.1; 5], true, &cfg).unwrap();
        sgd_update(&mut net, &g, 0.0);
        assert_eq!(net, before);
    }

    #[test]
    fn sgd_on_zero_network_by_hand() {
        let mut zero =
            ElmanNetwork::zeros(Topology::detector(2), NetworkOptions::default()).unwrap();
        let cfg = TrainConfig::default();
        let (g, _) = bptt_gradients(&zero, &[0.5; 5], false, &cfg).unwrap();
        sgd_update(&mut zero, &g, 0.1);
        // delta_out = (0.5 - 0)·0.25 = 0.125; du = 0.125·0.5; db_o = 0.125
        assert!(zero
            .params
            .u
            .iter()
            .all(|&u| (u + 0.1 * 0.0625).abs() < 1e-15));
        assert!((zero.params.b_o + 0.0125).abs() < 1e-15);
        assert!(zero.params.w.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn bias_free_gradients_are_zero() {
        let opts = NetworkOptions {
            use_biases: false,
            ..Default::default()
        };
        let net = ElmanNetwork::init(Topology::detector(3), opts, 5).unwrap();
        let (g, _) = bptt_gradients(
            &net,
            &[0.1, 0.5, 0.2, 0.9, 0.4],
            true,
            &TrainConfig::default(),
        )
        .unwrap();
        assert!(g.b_h.iter().all(|&b| b == 0.0) && g.b_o == 0.0);
    }

    fn toy_windows() -> Vec<LabeledWindow> {
        (0..8)
            .map(|i| LabeledWindow {
                cyclone_id: format!("t{i}"),
                anchor_index: 4,
                inputs: vec![i as f64 / 8.0; 5],
                label: i >= 4,
            })
            .collect()
    }

    #[test]
    fn one_epoch_history() {
        let net = ElmanNetwork::init(Topology::detector(3), NetworkOptions::default(), 1).unwrap();
        let cfg = TrainConfig {
            max_epochs: 1,
            ..Default::default()
        };
        let (_, h) = train(net, &toy_windows(), &cfg).unwrap();
        assert_eq!(h.epochs(), 1);
        assert_eq!(h.stop_reason, StopReason::MaxEpochs);
        assert!(h.to_csv().starts_with("epoch,sse,train_accuracy\n1,"));
    }

    #[test]
    fn training_errors() {
        let net = ElmanNetwork::init(Topology::detector(3), NetworkOptions::default(), 1).unwrap();
        assert!(matches!(
            train(net.clone(), &[], &TrainConfig::default()),
            Err(Error::EmptyTrainingSet)
        ));
        let cfg = TrainConfig {
            max_epochs: 0,
            ..Default::default()
        };
        assert!(matches!(
            train(net.clone(), &toy_windows(), &cfg),
            Err(Error::Config(_))
        ));
        let mut short = toy_windows();
        short[3].inputs.pop();
        assert!(matches!(
            train(net, &short, &TrainConfig::default()),
            Err(Error::WindowLength { .. })
        ));
    }

    #[test]
    fn converges_and_stops_early() {
        let net = ElmanNetwork::init(Topology::detector(3), NetworkOptions::default(), 1).unwrap();
        let cfg = TrainConfig {
            stop_tolerance: 1e-3,
            patience: 3,
            ..Default::default()
        };
        let (_, h) = train(net, &toy_windows(), &cfg).unwrap();
        assert_eq!(h.stop_reason, StopReason::Converged);
        assert!(h.epochs() < cfg.max_epochs);
    }
}
