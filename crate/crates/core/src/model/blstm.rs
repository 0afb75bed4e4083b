//! Stacked bidirectional LSTM with a softmax projection, forward and
//! backward passes written out by hand over a flat parameter vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::NUM_LABELS;
use crate::error::{Error, Result};
use crate::ink::{FeatureSequence, FEATURE_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyper {
    pub layers: usize,
    pub hidden: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper { layers: 3, hidden: 64, input_dim: FEATURE_DIM, output_dim: NUM_LABELS, seed: 0 }
    }
}

impl Hyper {
    fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            2 * self.hidden
        }
    }

    fn dir_size(&self, l: usize) -> usize {
        let h = self.hidden;
        4 * h * (self.layer_input(l) + h) + 4 * h
    }

    /// Offset of (layer, direction) weights; direction 0 = forward.
    fn dir_offset(&self, l: usize, dir: usize) -> usize {
        let before: usize = (0..l).map(|k| 2 * self.dir_size(k)).sum();
        before + dir * self.dir_size(l)
    }

    fn proj_offset(&self) -> usize {
        self.dir_offset(self.layers, 0)
    }

    pub fn param_count(&self) -> usize {
        self.proj_offset() + self.output_dim * 2 * self.hidden + self.output_dim
    }
}

/// All weights of the network in one flat array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub hyper: Hyper,
    pub weights: Vec<f64>,
}

impl ModelParams {
    /// Uniform(-0.1, 0.1) weights, forget-gate biases at 1, projection bias 0.
    pub fn init(hyper: Hyper) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let mut weights: Vec<f64> = (0..hyper.param_count())
            .map(|_| rng.random_range(-0.1..0.1))
            .collect();
        let h = hyper.hidden;
        for l in 0..hyper.layers {
            for dir in 0..2 {
                let off = hyper.dir_offset(l, dir);
                let b0 = off + 4 * h * (hyper.layer_input(l) + h);
                for (k, w) in weights[b0..b0 + 4 * h].iter_mut().enumerate() {
                    *w = if (h..2 * h).contains(&k) { 1.0 } else { 0.0 };
                }
            }
        }
        let pb = hyper.proj_offset() + hyper.output_dim * 2 * h;
        weights[pb..].iter_mut().for_each(|w| *w = 0.0);
        ModelParams { hyper, weights }
    }

    pub fn zeros(hyper: Hyper) -> Self {
        ModelParams { hyper, weights: vec![0.0; hyper.param_count()] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.hyper.param_count() {
            return Err(Error::Dimension(format!(
                "expected {} weights, found {}",
                self.hyper.param_count(),
                self.weights.len()
            )));
        }
        if self.hyper.output_dim != NUM_LABELS {
            return Err(Error::Dimension(format!(
                "projection width {} does not match the {NUM_LABELS}-label alphabet",
                self.hyper.output_dim
            )));
        }
        if let Some(i) = self.weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite(format!("weight {i} is not finite")));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one direction of one layer, kept for backprop.
struct DirCache {
    /// per processing step: [i, f, o, g] each of width H
    gates: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    tanh_c: Vec<Vec<f64>>,
    /// h in time order
    h: Vec<Vec<f64>>,
}

/// Everything the backward pass needs.
pub struct ForwardCache {
    /// input of each layer, time-major
    inputs: Vec<Vec<Vec<f64>>>,
    dirs: Vec<[DirCache; 2]>,
    /// final layer output (2H per frame)
    top: Vec<Vec<f64>>,
    pub logits: Vec<Vec<f64>>,
}

fn run_direction(
    w: &[f64],
    hidden: usize,
    in_dim: usize,
    xs: &[Vec<f64>],
    reverse: bool,
) -> DirCache {
    let t_len = xs.len();
    let cols = in_dim + hidden;
    let bias = &w[4 * hidden * cols..4 * hidden * cols + 4 * hidden];
    let mut cache = DirCache {
        gates: Vec::with_capacity(t_len),
        c: Vec::with_capacity(t_len),
        tanh_c: Vec::with_capacity(t_len),
        h: vec![vec![0.0; hidden]; t_len],
    };
    let mut h_prev = vec![0.0; hidden];
    let mut c_prev = vec![0.0; hidden];
    let mut z = vec![0.0; 4 * hidden];
    for step in 0..t_len {
        let t = if reverse { t_len - 1 - step } else { step };
        let x = &xs[t];
        for (r, zr) in z.iter_mut().enumerate() {
            let row = &w[r * cols..(r + 1) * cols];
            let mut acc = bias[r];
            for (a, b) in row[..in_dim].iter().zip(x) {
                acc += a * b;
            }
            for (a, b) in row[in_dim..].iter().zip(&h_prev) {
                acc += a * b;
            }
            *zr = acc;
        }
        let mut gates = vec![0.0; 4 * hidden];
        let mut c = vec![0.0; hidden];
        let mut tc = vec![0.0; hidden];
        let mut h = vec![0.0; hidden];
        for k in 0..hidden {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[hidden + k]);
            let o = sigmoid(z[2 * hidden + k]);
            let g = z[3 * hidden + k].tanh();
            gates[k] = i;
            gates[hidden + k] = f;
            gates[2 * hidden + k] = o;
            gates[3 * hidden + k] = g;
            c[k] = f * c_prev[k] + i * g;
            tc[k] = c[k].tanh();
            h[k] = o * tc[k];
        }
        cache.h[t] = h.clone();
        cache.gates.push(gates);
        cache.c.push(c.clone());
        cache.tanh_c.push(tc);
        h_prev = h;
        c_prev = c;
    }
    cache
}

/// Row-wise softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= s);
    out
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

impl ModelParams {
    pub fn forward_cached(&self, feats: &FeatureSequence) -> Result<ForwardCache> {
        if feats.is_empty() {
            return Err(Error::Empty("feature sequence has no frames".into()));
        }
        let hy = &self.hyper;
        if let Some(f) = feats.frames.iter().find(|f| f.len() != hy.input_dim) {
            return Err(Error::Dimension(format!("frame has {} features, model expects {}", f.len(), hy.input_dim)));
        }
        if self.weights.len() != hy.param_count() {
            return Err(Error::Dimension("weight vector does not match hyperparameters".into()));
        }
        let h = hy.hidden;
        let mut x: Vec<Vec<f64>> = feats.frames.iter().map(|f| f.to_vec()).collect();
        let mut inputs = Vec::with_capacity(hy.layers);
        let mut dirs = Vec::with_capacity(hy.layers);
        for l in 0..hy.layers {
            let in_dim = hy.layer_input(l);
            let size = hy.dir_size(l);
            let off_f = hy.dir_offset(l, 0);
            let off_b = hy.dir_offset(l, 1);
            let fwd = run_direction(&self.weights[off_f..off_f + size], h, in_dim, &x, false);
            let bwd = run_direction(&self.weights[off_b..off_b + size], h, in_dim, &x, true);
            let out: Vec<Vec<f64>> = (0..x.len())
                .map(|t| fwd.h[t].iter().chain(&bwd.h[t]).copied().collect())
                .collect();
            inputs.push(std::mem::replace(&mut x, out));
            dirs.push([fwd, bwd]);
        }
        let k_out = hy.output_dim;
        let pw = &self.weights[hy.proj_offset()..hy.proj_offset() + k_out * 2 * h];
        let pb = &self.weights[hy.proj_offset() + k_out * 2 * h..];
        let logits = x
            .iter()
            .map(|v| {
                (0..k_out)
                    .map(|k| pb[k] + pw[k * 2 * h..(k + 1) * 2 * h].iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
                    .collect()
            })
            .collect();
        Ok(ForwardCache { inputs, dirs, top: x, logits })
    }

    /// Per-frame label distributions.
    pub fn forward(&self, feats: &FeatureSequence) -> Result<Vec<Vec<f64>>> {
        Ok(self.forward_cached(feats)?.logits.iter().map(|z| softmax(z)).collect())
    }

    /// Gradient of a loss with respect to all weights, given its gradient
    /// with respect to the logits.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &[Vec<f64>]) -> Vec<f64> {
        let hy = &self.hyper;
        let h = hy.hidden;
        let k_out = hy.output_dim;
        let t_len = dlogits.len();
        let mut grad = vec![0.0; self.weights.len()];

        let po = hy.proj_offset();
        let pw = &self.weights[po..po + k_out * 2 * h];
        let mut dtop = vec![vec![0.0; 2 * h]; t_len];
        {
            let (gw, gb) = grad[po..].split_at_mut(k_out * 2 * h);
            for t in 0..t_len {
                let v = &cache.top[t];
                for k in 0..k_out {
                    let d = dlogits[t][k];
                    if d == 0.0 {
                        continue;
                    }
                    gb[k] += d;
                    let row = &mut gw[k * 2 * h..(k + 1) * 2 * h];
                    for (g, x) in row.iter_mut().zip(v) {
                        *g += d * x;
                    }
                    for (dx, w) in dtop[t].iter_mut().zip(&pw[k * 2 * h..(k + 1) * 2 * h]) {
                        *dx += d * w;
                    }
                }
            }
        }

        let mut dout = dtop;
        for l in (0..hy.layers).rev() {
            let in_dim = hy.layer_input(l);
            let xs = &cache.inputs[l];
            let mut dx = vec![vec![0.0; in_dim]; t_len];
            for dir in 0..2 {
                let off = hy.dir_offset(l, dir);
                let size = hy.dir_size(l);
                let dh_out: Vec<&[f64]> = dout.iter().map(|d| &d[dir * h..(dir + 1) * h]).collect();
                backprop_direction(
                    &self.weights[off..off + size],
                    &mut grad[off..off + size],
                    h,
                    in_dim,
                    xs,
                    &cache.dirs[l][dir],
                    &dh_out,
                    dir == 1,
                    &mut dx,
                );
            }
            dout = dx;
        }
        grad
    }
}

#[allow(clippy::too_many_arguments)]
fn backprop_direction(
    w: &[f64],
    gw: &mut [f64],
    hidden: usize,
    in_dim: usize,
    xs: &[Vec<f64>],
    cache: &DirCache,
    dh_out: &[&[f64]],
    reverse: bool,
    dx: &mut [Vec<f64>],
) {
    let t_len = xs.len();
    let cols = in_dim + hidden;
    let bias_off = 4 * hidden * cols;
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    let mut dz = vec![0.0; 4 * hidden];
    let zeros = vec![0.0; hidden];
    for step in (0..t_len).rev() {
        let t = if reverse { t_len - 1 - step } else { step };
        let gates = &cache.gates[step];
        let c_prev = if step > 0 { &cache.c[step - 1] } else { &zeros };
        let h_prev: &[f64] = if step > 0 {
            let tp = if reverse { t + 1 } else { t - 1 };
            &cache.h[tp]
        } else {
            &zeros
        };
        for k in 0..hidden {
            let (i, f, o, g) = (gates[k], gates[hidden + k], gates[2 * hidden + k], gates[3 * hidden + k]);
            let tc = cache.tanh_c[step][k];
            let dh = dh_out[t][k] + dh_next[k];
            let d_o = dh * tc;
            let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
            dz[k] = dc * g * i * (1.0 - i);
            dz[hidden + k] = dc * c_prev[k] * f * (1.0 - f);
            dz[2 * hidden + k] = d_o * o * (1.0 - o);
            dz[3 * hidden + k] = dc * i * (1.0 - g * g);
            dc_next[k] = dc * f;
        }
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        let x = &xs[t];
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gw[bias_off + r] += d;
            let row = &w[r * cols..(r + 1) * cols];
            let grow = &mut gw[r * cols..(r + 1) * cols];
            for j in 0..in_dim {
                grow[j] += d * x[j];
                dx[t][j] += d * row[j];
            }
            for j in 0..hidden {
                grow[in_dim + j] += d * h_prev[j];
                dh_next[j] += d * row[in_dim + j];
            }
        }
    }
}
