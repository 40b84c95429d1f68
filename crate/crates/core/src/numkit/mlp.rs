//! Dense rectifier MLP with named output heads and exact reverse-mode gradients.
//!
//! Weights are stored row-major with shape `(out_dim, in_dim)` per layer. The
//! output vector is partitioned into contiguous named heads (for example `"q"`
//! followed by `"density"`). Heads are laid out in declaration order, so the
//! rows of a head declared first are drawn first at initialization: two nets
//! built from the same seed agree on every shared leading row even if one of
//! them carries an extra trailing head.
//!
//! Inverted dropout, when enabled, sits between consecutive hidden layers.

use std::ops::Range;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Head {
    pub name: String,
    pub len: usize,
}

/// Named, contiguous partition of the output vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    heads: Vec<Head>,
}

impl HeadSpec {
    pub fn new<S: Into<String>>(heads: impl IntoIterator<Item = (S, usize)>) -> Self {
        HeadSpec {
            heads: heads
                .into_iter()
                .map(|(name, len)| Head { name: name.into(), len })
                .collect(),
        }
    }

    pub fn single(name: &str, len: usize) -> Self {
        Self::new([(name, len)])
    }

    pub fn total(&self) -> usize {
        self.heads.iter().map(|h| h.len).sum()
    }

    pub fn heads(&self) -> &[Head] {
        &self.heads
    }

    pub fn range(&self, name: &str) -> Option<Range<usize>> {
        let mut start = 0;
        for h in &self.heads {
            if h.name == name {
                return Some(start..start + h.len);
            }
            start += h.len;
        }
        None
    }

    fn validate(&self, output_dim: usize) -> Result<()> {
        if self.heads.is_empty() {
            return Err(Error::Config("head spec is empty".into()));
        }
        for (i, h) in self.heads.iter().enumerate() {
            if h.len == 0 {
                return Err(Error::Config(format!("head '{}' has zero length", h.name)));
            }
            if self.heads[..i].iter().any(|o| o.name == h.name) {
                return Err(Error::Config(format!("duplicate head '{}'", h.name)));
            }
        }
        if self.total() != output_dim {
            return Err(Error::Config(format!(
                "head spec covers {} outputs but the network emits {}",
                self.total(),
                output_dim
            )));
        }
        Ok(())
    }
}

/// Forward-pass mode. Dropout is only active in `Train`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    dropout: f64,
    heads: HeadSpec,
}

/// Per-layer gradient buffers, shape-congruent with an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Cached activations of one forward pass, consumed by [`Mlp::accumulate`].
#[derive(Debug, Clone)]
pub struct Trace {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    masks: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    /// Hidden pre-activations, one vector per hidden layer.
    pub fn hidden_preactivations(&self) -> &[Vec<f64>] {
        &self.pre
    }

    /// Post-dropout hidden activations.
    pub fn hidden_activations(&self) -> &[Vec<f64>] {
        &self.post
    }
}

impl Mlp {
    pub fn init(sizes: &[usize], heads: HeadSpec, dropout: f64, seed: u64) -> Result<Mlp> {
        if sizes.len() < 2 {
            return Err(Error::Config("an MLP needs at least input and output sizes".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::Config(format!("layer sizes must be positive: {sizes:?}")));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config(format!("dropout rate {dropout} outside [0, 1)")));
        }
        heads.validate(*sizes.last().unwrap())?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let layer: Vec<f64> = (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
            weights.push(layer);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
            dropout,
            heads,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn heads(&self) -> &HeadSpec {
        &self.heads
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn head_range(&self, name: &str) -> Result<Range<usize>> {
        self.heads
            .range(name)
            .ok_or_else(|| Error::Contract(format!("network has no '{name}' head")))
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Row-major weight matrix of layer `l`.
    pub fn weights(&self, l: usize) -> &[f64] {
        &self.weights[l]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        &self.biases[l]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.weights[l]
    }

    pub fn biases_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.biases[l]
    }

    /// Parameter slices in the canonical order `W0, b0, W1, b1, ...`.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Overwrite every parameter with those of `other` (same topology).
    pub fn copy_params_from(&mut self, other: &Mlp) -> Result<()> {
        if self.sizes != other.sizes {
            return Err(Error::Contract(
                "cannot copy parameters between different topologies".into(),
            ));
        }
        for (dst, src) in self.weights.iter_mut().zip(&other.weights) {
            dst.copy_from_slice(src);
        }
        for (dst, src) in self.biases.iter_mut().zip(&other.biases) {
            dst.copy_from_slice(src);
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64], mode: Mode) -> Result<Vec<f64>> {
        Ok(self.trace(x, mode, None)?.output)
    }

    /// Forward pass computing only the requested output rows (all rows when
    /// `rows` is `None`). Rows not requested are left at zero.
    pub fn trace(&self, x: &[f64], mode: Mode, rows: Option<&[Range<usize>]>) -> Result<Trace> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                what: "mlp input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let hidden_layers = self.num_layers() - 1;
        let mut rng = match mode {
            Mode::Train { seed } if self.dropout > 0.0 => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        let keep_scale = 1.0 / (1.0 - self.dropout);

        let mut pre = Vec::with_capacity(hidden_layers);
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(hidden_layers);
        let mut masks = Vec::new();
        for l in 0..hidden_layers {
            let a_prev: &[f64] = if l == 0 { x } else { &post[l - 1] };
            let z = affine(&self.weights[l], &self.biases[l], a_prev, self.sizes[l + 1]);
            let mut a: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
            if let Some(rng) = rng.as_mut().filter(|_| l + 1 < hidden_layers) {
                let mask: Vec<f64> = (0..a.len())
                    .map(|_| {
                        if rng.gen::<f64>() < self.dropout {
                            0.0
                        } else {
                            keep_scale
                        }
                    })
                    .collect();
                for (v, m) in a.iter_mut().zip(&mask) {
                    *v *= m;
                }
                masks.push(mask);
            }
            pre.push(z);
            post.push(a);
        }

        let last = self.num_layers() - 1;
        let a_prev: &[f64] = if hidden_layers == 0 {
            x
        } else {
            &post[hidden_layers - 1]
        };
        let in_dim = self.sizes[last];
        let out_dim = self.sizes[last + 1];
        let output = match rows {
            None => affine(&self.weights[last], &self.biases[last], a_prev, out_dim),
            Some(ranges) => {
                let mut out = vec![0.0; out_dim];
                for r in ranges {
                    if r.end > out_dim {
                        return Err(Error::Dimension {
                            what: "requested output rows",
                            expected: out_dim,
                            got: r.end,
                        });
                    }
                    for i in r.clone() {
                        let row = &self.weights[last][i * in_dim..(i + 1) * in_dim];
                        out[i] = self.biases[last][i] + dot(row, a_prev);
                    }
                }
                out
            }
        };

        Ok(Trace {
            input: x.to_vec(),
            pre,
            post,
            masks,
            output,
        })
    }

    /// Gradient of `upstream · output` with respect to every parameter.
    pub fn backward(&self, x: &[f64], upstream: &[f64], mode: Mode) -> Result<Gradients> {
        let trace = self.trace(x, mode, None)?;
        let mut grads = Gradients::zeros_like(self);
        self.accumulate(&trace, upstream, &mut grads)?;
        Ok(grads)
    }

    /// Add the gradient of `upstream · output` at `trace` into `grads`.
    /// Output rows with zero upstream are skipped.
    pub fn accumulate(&self, trace: &Trace, upstream: &[f64], grads: &mut Gradients) -> Result<()> {
        if upstream.len() != self.output_dim() {
            return Err(Error::Dimension {
                what: "upstream gradient",
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        if !grads.congruent_with(self) {
            return Err(Error::Contract("gradient buffers do not match the network".into()));
        }
        let mut delta = upstream.to_vec();
        for l in (0..self.num_layers()).rev() {
            let in_dim = self.sizes[l];
            let a_prev: &[f64] = if l == 0 { &trace.input } else { &trace.post[l - 1] };
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            let w = &self.weights[l];
            let mut d_prev = if l > 0 { vec![0.0; in_dim] } else { Vec::new() };
            for (i, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[i] += d;
                let grow = &mut gw[i * in_dim..(i + 1) * in_dim];
                for (g, &a) in grow.iter_mut().zip(a_prev) {
                    *g += d * a;
                }
                if l > 0 {
                    let wrow = &w[i * in_dim..(i + 1) * in_dim];
                    for (dp, &wv) in d_prev.iter_mut().zip(wrow) {
                        *dp += wv * d;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let h = l - 1;
            let z = &trace.pre[h];
            for (j, dp) in d_prev.iter_mut().enumerate() {
                if z[j] <= 0.0 {
                    *dp = 0.0;
                } else if let Some(mask) = trace.masks.get(h) {
                    *dp *= mask[j];
                }
            }
            delta = d_prev;
        }
        Ok(())
    }
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Gradients {
        Gradients {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn congruent_with(&self, net: &Mlp) -> bool {
        self.weights.len() == net.weights.len()
            && self.biases.len() == net.biases.len()
            && self.weights.iter().zip(&net.weights).all(|(a, b)| a.len() == b.len())
            && self.biases.iter().zip(&net.biases).all(|(a, b)| a.len() == b.len())
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for x in v.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|&v| v == 0.0))
    }
}

/// Dot product with four independent partial sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out_dim: usize) -> Vec<f64> {
    let in_dim = x.len();
    (0..out_dim)
        .map(|i| b[i] + dot(&w[i * in_dim..(i + 1) * in_dim], x))
        .collect()
}
