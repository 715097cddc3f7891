//! Independent oracles and fixture generators shared by the integration tests.
//!
//! Nothing here calls the library's forward/backward code: the unrolled network
//! treats each time step as its own dense layer over the concatenated
//! `[input, previous hidden]` vector, and the labeler scans raw intensities.
#![allow(dead_code, clippy::needless_range_loop)]

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tcri::besttrack::{Basin, CycloneTrack, TrackPoint};
use tcri::elman::ElmanNetwork;
use tcri::extraction::LabeledWindow;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Relative difference, `None` when both magnitudes are below `floor`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> Option<f64> {
    let scale = a.abs().max(b.abs());
    if scale < floor {
        None
    } else {
        Some((a - b).abs() / scale)
    }
}

/// One untied copy of the recurrent layer: rows are hidden units, columns are
/// `[x_1..x_J, y_1..y_K]`.
#[derive(Clone)]
struct DenseLayer {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

/// The Elman net unfolded into `T` dense layers plus an output layer.
pub struct Unrolled {
    layers: Vec<DenseLayer>,
    out_weights: Vec<f64>,
    out_bias: f64,
    inputs: usize,
    hidden: usize,
    initial: f64,
}

/// Gradient of the unrolled net, summed over layers into the tied layout.
pub struct UnrolledGradient {
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub b_h: Vec<f64>,
    pub b_o: f64,
    pub output: f64,
}

impl UnrolledGradient {
    /// Same order as `Parameters::to_flat`: w, v, u, b_h, b_o.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = self.w.clone();
        out.extend(&self.v);
        out.extend(&self.u);
        out.extend(&self.b_h);
        out.push(self.b_o);
        out
    }
}

impl Unrolled {
    pub fn from_network(net: &ElmanNetwork) -> Self {
        let j = net.topology.inputs;
        let k = net.topology.hidden;
        let p = &net.params;
        let layer = DenseLayer {
            weights: (0..k)
                .map(|i| {
                    let mut row: Vec<f64> = (0..j).map(|jj| p.w[jj * k + i]).collect();
                    row.extend((0..k).map(|kk| p.v[i * k + kk]));
                    row
                })
                .collect(),
            bias: p.b_h.clone(),
        };
        Unrolled {
            layers: vec![layer; net.topology.unfold_steps],
            out_weights: p.u.clone(),
            out_bias: p.b_o,
            inputs: j,
            hidden: k,
            initial: net.options.initial_context,
        }
    }

    /// Activations entering and leaving every layer; `acts[0]` is the initial context.
    fn activations(&self, window: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![vec![self.initial; self.hidden]];
        for (t, layer) in self.layers.iter().enumerate() {
            let mut z_in: Vec<f64> = window[t * self.inputs..(t + 1) * self.inputs].to_vec();
            z_in.extend(&acts[t]);
            let next = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .map(|(row, b)| {
                    logistic(b + row.iter().zip(&z_in).map(|(w, x)| w * x).sum::<f64>())
                })
                .collect();
            acts.push(next);
        }
        acts
    }

    pub fn forward(&self, window: &[f64]) -> f64 {
        let acts = self.activations(window);
        let last = acts.last().unwrap();
        logistic(
            self.out_bias
                + self
                    .out_weights
                    .iter()
                    .zip(last)
                    .map(|(u, y)| u * y)
                    .sum::<f64>(),
        )
    }

    /// Layer-by-layer backprop of `½·weight·(out − target)²`, then per-layer
    /// gradients are summed onto the tied parameters.
    pub fn gradient(&self, window: &[f64], target: f64, weight: f64) -> UnrolledGradient {
        let (j, k) = (self.inputs, self.hidden);
        let acts = self.activations(window);
        let last = acts.last().unwrap();
        let out = logistic(
            self.out_bias
                + self
                    .out_weights
                    .iter()
                    .zip(last)
                    .map(|(u, y)| u * y)
                    .sum::<f64>(),
        );
        let d_out = weight * (out - target) * out * (1.0 - out);

        let mut g = UnrolledGradient {
            w: vec![0.0; j * k],
            v: vec![0.0; k * k],
            u: last.iter().map(|y| d_out * y).collect(),
            b_h: vec![0.0; k],
            b_o: d_out,
            output: out,
        };

        // error arriving at the outputs of the current layer
        let mut upstream: Vec<f64> = self.out_weights.iter().map(|u| d_out * u).collect();
        for t in (0..self.layers.len()).rev() {
            let layer = &self.layers[t];
            let y = &acts[t + 1];
            let mut z_in: Vec<f64> = window[t * j..(t + 1) * j].to_vec();
            z_in.extend(&acts[t]);
            let delta: Vec<f64> = (0..k).map(|i| upstream[i] * y[i] * (1.0 - y[i])).collect();
            // this layer's own weight gradient, folded onto the tied layout
            for i in 0..k {
                g.b_h[i] += delta[i];
                for (col, x) in z_in.iter().enumerate() {
                    let dw = delta[i] * x;
                    if col < j {
                        g.w[col * k + i] += dw;
                    } else {
                        g.v[i * k + (col - j)] += dw;
                    }
                }
            }
            // error on this layer's inputs; only the context part propagates further
            upstream = (0..k)
                .map(|kk| (0..k).map(|i| layer.weights[i][j + kk] * delta[i]).sum())
                .collect();
        }
        g
    }
}

/// Brute-force RI labels: every `(t, t + 4)` pair of a contiguous intensity series.
pub fn brute_force_labels(intensities: &[u16], threshold: u16) -> Vec<bool> {
    let mut out = Vec::new();
    for t in 0..intensities.len() {
        if t + 4 < intensities.len() {
            out.push(intensities[t + 4] as i64 - intensities[t] as i64 >= threshold as i64);
        }
    }
    out
}

/// Brute-force windows: `(anchor, inputs, label)` for every anchor with 4
/// points of history and 4 of lookahead.
pub fn brute_force_windows(intensities: &[u16], threshold: u16) -> Vec<(usize, Vec<f64>, bool)> {
    let n = intensities.len();
    let mut out = Vec::new();
    for t in 0..n {
        if t >= 4 && t + 4 < n {
            let inputs = (t - 4..=t).map(|i| intensities[i] as f64).collect();
            let label = intensities[t + 4] as i64 - intensities[t] as i64 >= threshold as i64;
            out.push((t, inputs, label));
        }
    }
    out
}

/// Random-walk intensity series with occasional bursts large enough to cross 30 kt.
pub fn random_intensities(rng: &mut impl Rng, len: usize) -> Vec<u16> {
    let mut v = Vec::with_capacity(len);
    let mut x: i32 = rng.random_range(15..60);
    for _ in 0..len {
        v.push(x as u16);
        let step = if rng.random_bool(0.15) {
            rng.random_range(5..20)
        } else {
            rng.random_range(-10..=10)
        };
        x = (x + step).clamp(0, 185);
    }
    v
}

pub fn track_from_intensities(id: &str, intensities: &[u16]) -> CycloneTrack {
    let t0 = NaiveDate::from_ymd_opt(2001, 1, 10)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    CycloneTrack {
        cyclone_id: id.to_string(),
        basin: Basin::SouthPacific,
        points: intensities
            .iter()
            .enumerate()
            .map(|(i, &vmax_kt)| TrackPoint {
                timestamp: t0 + Duration::hours(6 * i as i64),
                lat_deg: -15.0,
                lon_deg: 170.0,
                vmax_kt,
            })
            .collect(),
    }
}

pub fn random_window(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(0.0..1.0)).collect()
}

/// Normalized threshold on `x5 − x1` separating the synthetic classes.
pub const RISE_THRESHOLD: f64 = 0.2;
const RISE_MARGIN: f64 = 0.05;

/// Separable synthetic windows: near-linear ramps whose cumulative rise
/// `x5 − x1` is at least [`RISE_THRESHOLD`] for positives and below it for
/// negatives, with a margin around the threshold. Exactly `positives` of
/// `n` windows are positive, in shuffled order.
pub fn rise_dataset(seed: u64, n: usize, positives: usize) -> Vec<LabeledWindow> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(n);
    let mut labels: Vec<bool> = (0..n).map(|i| i < positives).collect();
    for i in (1..labels.len()).rev() {
        let j = r.random_range(0..=i);
        labels.swap(i, j);
    }
    for (idx, &label) in labels.iter().enumerate() {
        loop {
            let rise = if label {
                r.random_range(RISE_THRESHOLD + RISE_MARGIN..0.5)
            } else {
                r.random_range(-0.3..RISE_THRESHOLD - RISE_MARGIN)
            };
            let start = r.random_range(0.05..0.95 - rise.max(0.0));
            let start = start.max(-rise + 0.05);
            let mut inputs: Vec<f64> = (0..5)
                .map(|t| start + rise * t as f64 / 4.0 + r.random_range(-0.01..0.01))
                .collect();
            for x in &mut inputs {
                *x = x.clamp(0.0, 1.0);
            }
            let actual = inputs[4] - inputs[0];
            if (actual >= RISE_THRESHOLD) == label
                && (actual - RISE_THRESHOLD).abs() >= RISE_MARGIN / 2.0
            {
                out.push(LabeledWindow {
                    cyclone_id: format!("syn{idx}"),
                    anchor_index: 4,
                    inputs,
                    label,
                });
                break;
            }
        }
    }
    out
}
