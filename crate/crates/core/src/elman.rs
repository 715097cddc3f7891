//! Elman recurrent network: a 1–K–1 net whose context layer feeds the previous
//! hidden activations back into the hidden layer.
//!
//! Hidden update at unfold step τ (all units sigmoid):
//!
//! ```text
//! y_i(τ) = σ( b_h[i] + Σ_k v[i][k]·y_k(τ−1) + Σ_j w[j][i]·x_j(τ) )
//! out    = σ( b_o + Σ_i u[i]·y_i(T) )
//! ```
//!
//! The context starts at a fixed value (0.5 by default) for every window.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Initial weights are drawn from `[-INIT_RANGE, INIT_RANGE]`.
pub const INIT_RANGE: f64 = 0.5;

/// Overflow-safe logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub unfold_steps: usize,
}

impl Topology {
    /// One input, one output, `hidden` context units, five unfolding steps.
    pub fn detector(hidden: usize) -> Self {
        Topology {
            inputs: 1,
            hidden,
            outputs: 1,
            unfold_steps: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.hidden == 0 || self.outputs == 0 || self.unfold_steps == 0 {
            return Err(Error::Topology(format!(
                "all counts must be >= 1: {self:?}"
            )));
        }
        if self.outputs != 1 {
            return Err(Error::Topology(format!(
                "only a single output unit is supported, got {}",
                self.outputs
            )));
        }
        Ok(())
    }

    /// J·K + K·K + K + K + 1.
    pub fn parameter_count(&self) -> usize {
        let (j, k) = (self.inputs, self.hidden);
        j * k + k * k + k + k + 1
    }

    /// Values in one window: one input vector per unfold step.
    pub fn window_len(&self) -> usize {
        self.inputs * self.unfold_steps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkOptions {
    /// When false, biases stay at zero and receive no updates.
    pub use_biases: bool,
    /// Context activation at the start of every window.
    pub initial_context: f64,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        NetworkOptions {
            use_biases: true,
            initial_context: 0.5,
        }
    }
}

/// Weights and biases of a network, or a gradient with the same shape.
///
/// Matrices are flat and row-major: `w` is J×K (`w[j * K + i]`), `v` is K×K
/// (`v[i * K + k]` weighs context unit `k` into hidden unit `i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub b_h: Vec<f64>,
    pub b_o: f64,
}

impl Parameters {
    pub fn zeros(topology: &Topology) -> Self {
        let (j, k) = (topology.inputs, topology.hidden);
        Parameters {
            w: vec![0.0; j * k],
            v: vec![0.0; k * k],
            u: vec![0.0; k],
            b_h: vec![0.0; k],
            b_o: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.w.len() + self.v.len() + self.u.len() + self.b_h.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flattened in the order w, v, u, b_h, b_o.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.w);
        out.extend_from_slice(&self.v);
        out.extend_from_slice(&self.u);
        out.extend_from_slice(&self.b_h);
        out.push(self.b_o);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.len(), "parameter vector length");
        let mut rest = flat;
        for part in [&mut self.w, &mut self.v, &mut self.u, &mut self.b_h] {
            let (head, tail) = rest.split_at(part.len());
            part.copy_from_slice(head);
            rest = tail;
        }
        self.b_o = rest[0];
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w
            .iter()
            .chain(&self.v)
            .chain(&self.u)
            .chain(&self.b_h)
            .chain(std::iter::once(&self.b_o))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w
            .iter_mut()
            .chain(&mut self.v)
            .chain(&mut self.u)
            .chain(&mut self.b_h)
            .chain(std::iter::once(&mut self.b_o))
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }

    fn shape_matches(&self, topology: &Topology) -> bool {
        let (j, k) = (topology.inputs, topology.hidden);
        self.w.len() == j * k && self.v.len() == k * k && self.u.len() == k && self.b_h.len() == k
    }
}

/// Context-layer activations.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState(pub Vec<f64>);

impl HiddenState {
    pub fn uniform(hidden: usize, value: f64) -> Self {
        HiddenState(vec![value; hidden])
    }
}

/// All hidden states of one forward pass (initial context first) and the output.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub states: Vec<HiddenState>,
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmanNetwork {
    pub topology: Topology,
    pub options: NetworkOptions,
    /// Seed used for initialization, kept for provenance.
    pub seed: u64,
    #[serde(flatten)]
    pub params: Parameters,
}

impl ElmanNetwork {
    /// All parameters drawn uniformly from `[-0.5, 0.5]` by a ChaCha8 stream seeded with `seed`.
    pub fn init(topology: Topology, options: NetworkOptions, seed: u64) -> Result<Self> {
        topology.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(-INIT_RANGE, INIT_RANGE).expect("valid range");
        let mut params = Parameters::zeros(&topology);
        for p in params.iter_mut() {
            *p = dist.sample(&mut rng);
        }
        if !options.use_biases {
            params.b_h.fill(0.0);
            params.b_o = 0.0;
        }
        Ok(ElmanNetwork {
            topology,
            options,
            seed,
            params,
        })
    }

    /// A network with every weight and bias zero.
    pub fn zeros(topology: Topology, options: NetworkOptions) -> Result<Self> {
        topology.validate()?;
        Ok(ElmanNetwork {
            topology,
            options,
            seed: 0,
            params: Parameters::zeros(&topology),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        if !self.params.shape_matches(&self.topology) {
            return Err(Error::Topology(
                "parameter shapes do not match topology".into(),
            ));
        }
        if !self.params.all_finite() {
            return Err(Error::Topology("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> HiddenState {
        HiddenState::uniform(self.topology.hidden, self.options.initial_context)
    }

    /// One recurrence step with input vector `x` (length J).
    pub fn step(&self, state: &HiddenState, x: &[f64]) -> HiddenState {
        let k = self.topology.hidden;
        let j = self.topology.inputs;
        debug_assert_eq!(state.0.len(), k);
        debug_assert_eq!(x.len(), j);
        let p = &self.params;
        let next = (0..k)
            .map(|i| {
                let recurrent: f64 = p.v[i * k..(i + 1) * k]
                    .iter()
                    .zip(&state.0)
                    .map(|(v, y)| v * y)
                    .sum();
                let input: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(jj, xj)| p.w[jj * k + i] * xj)
                    .sum();
                sigmoid(p.b_h[i] + recurrent + input)
            })
            .collect();
        HiddenState(next)
    }

    pub fn output(&self, state: &HiddenState) -> f64 {
        let z: f64 = self.params.u.iter().zip(&state.0).map(|(u, y)| u * y).sum();
        sigmoid(self.params.b_o + z)
    }

    fn check_window(&self, window: &[f64]) -> Result<()> {
        let expected = self.topology.window_len();
        if window.len() != expected {
            return Err(Error::WindowLength {
                expected,
                actual: window.len(),
            });
        }
        Ok(())
    }

    pub fn forward_trace(&self, window: &[f64]) -> Result<ForwardTrace> {
        self.check_window(window)?;
        let mut states = Vec::with_capacity(self.topology.unfold_steps + 1);
        states.push(self.initial_state());
        for x in window.chunks(self.topology.inputs) {
            let next = self.step(states.last().expect("non-empty"), x);
            states.push(next);
        }
        let output = self.output(states.last().expect("non-empty"));
        Ok(ForwardTrace { states, output })
    }

    /// Network output in (0, 1) for one window.
    pub fn forward(&self, window: &[f64]) -> Result<f64> {
        self.check_window(window)?;
        let mut state = self.initial_state();
        for x in window.chunks(self.topology.inputs) {
            state = self.step(&state, x);
        }
        Ok(self.output(&state))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: ElmanNetwork = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }
}
