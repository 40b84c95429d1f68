//! Training objectives over [`Mlp`] outputs, each returning its value and
//! optionally accumulating its exact gradient.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::numkit::{entropy, softmax, Gradients, Mlp, Mode};

pub const Q_HEAD: &str = "q";
pub const V_HEAD: &str = "v";
pub const PI_HEAD: &str = "pi";
pub const DENSITY_HEAD: &str = "density";

/// Output rows of the density block for `action` (blocks of `num_zones`).
pub fn density_block(net: &Mlp, action: usize, num_zones: usize) -> Result<Range<usize>> {
    let head = net.head_range(DENSITY_HEAD)?;
    let start = head.start + action * num_zones;
    if start + num_zones > head.end {
        return Err(Error::Contract(format!("action {action} has no density block")));
    }
    Ok(start..start + num_zones)
}

/// Softmax over the density block selected by `action`.
pub fn predicted_density(net: &Mlp, input: &[f64], action: usize, num_zones: usize) -> Result<Vec<f64>> {
    let block = density_block(net, action, num_zones)?;
    let trace = net.trace(input, Mode::Eval, Some(std::slice::from_ref(&block)))?;
    Ok(softmax(&trace.output()[block]))
}

pub fn predicted_entropy(net: &Mlp, input: &[f64], action: usize, num_zones: usize) -> Result<f64> {
    entropy(&predicted_density(net, input, action, num_zones)?)
}

/// Observed normalized density at the zone where the next decision happened.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityTarget {
    pub zone: usize,
    pub observed: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub main: f64,
    pub density: f64,
    pub total: f64,
}

pub struct QItem<'a> {
    pub input: &'a [f64],
    pub action: usize,
    pub target: f64,
    pub density: Option<DensityTarget>,
    pub mode: Mode,
}

/// Squared error at one density coordinate, plus its gradient with respect
/// to the block logits scaled by `weight`.
fn density_term(logits: &[f64], target: DensityTarget, weight: f64, upstream: Option<&mut [f64]>) -> f64 {
    let p = softmax(logits);
    let err = p[target.zone] - target.observed;
    if let Some(up) = upstream {
        let g = weight * 2.0 * err * p[target.zone];
        for (j, u) in up.iter_mut().enumerate() {
            let kron = if j == target.zone { 1.0 } else { 0.0 };
            *u += g * (kron - p[j]);
        }
    }
    err * err
}

/// `mean (target - Q(s, a))^2 + lambda * mean (d'[z'] - observed)^2`; the
/// density term is averaged over items that carry a density target.
pub fn q_loss(net: &Mlp, items: &[QItem], lambda: f64, mut grads: Option<&mut Gradients>) -> Result<LossParts> {
    if items.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    let q = net.head_range(Q_HEAD)?;
    let num_zones = q.len();
    let n = items.len() as f64;
    let n_density = items.iter().filter(|i| i.density.is_some()).count().max(1) as f64;
    let mut parts = LossParts::default();
    for item in items {
        let row = q.start + item.action;
        let block = match item.density {
            Some(_) => Some(density_block(net, item.action, num_zones)?),
            None => None,
        };
        let mut rows = vec![row..row + 1];
        rows.extend(block.clone());
        let trace = net.trace(item.input, item.mode, Some(&rows))?;
        let out = trace.output();
        let td = item.target - out[row];
        parts.main += td * td / n;
        let mut upstream = grads.as_ref().map(|_| vec![0.0; out.len()]);
        if let Some(up) = upstream.as_mut() {
            up[row] = -2.0 * td / n;
        }
        if let (Some(target), Some(block)) = (item.density, block) {
            let slot = upstream.as_mut().map(|u| &mut u[block.clone()]);
            parts.density += density_term(&out[block], target, lambda / n_density, slot) / n_density;
        }
        if let (Some(g), Some(up)) = (grads.as_deref_mut(), upstream) {
            net.accumulate(&trace, &up, g)?;
        }
    }
    parts.total = parts.main + lambda * parts.density;
    Ok(parts)
}

pub struct ValueItem<'a> {
    pub input: &'a [f64],
    pub target: f64,
    pub mode: Mode,
}

pub struct DensityItem<'a> {
    pub input: &'a [f64],
    pub action: usize,
    pub target: DensityTarget,
    pub mode: Mode,
}

/// `mean (target - V(s))^2 + lambda * mean (d'[z'] - observed)^2` with the
/// density term taken over a separate batch. Either batch may be empty.
pub fn value_loss(
    net: &Mlp,
    items: &[ValueItem],
    density: &[DensityItem],
    lambda: f64,
    mut grads: Option<&mut Gradients>,
) -> Result<LossParts> {
    if items.is_empty() && density.is_empty() {
        return Err(Error::Contract("empty value batch".into()));
    }
    let v = net.head_range(V_HEAD)?.start;
    let n = items.len().max(1) as f64;
    let mut parts = LossParts::default();
    for item in items {
        let trace = net.trace(item.input, item.mode, Some(&[v..v + 1]))?;
        let err = item.target - trace.output()[v];
        parts.main += err * err / n;
        if let Some(g) = grads.as_deref_mut() {
            let mut up = vec![0.0; net.output_dim()];
            up[v] = -2.0 * err / n;
            net.accumulate(&trace, &up, g)?;
        }
    }
    if !density.is_empty() {
        let num_zones = density_zones(net)?;
        let m = density.len() as f64;
        for item in density {
            let block = density_block(net, item.action, num_zones)?;
            let trace = net.trace(item.input, item.mode, Some(std::slice::from_ref(&block)))?;
            let out = trace.output();
            let mut up = grads.as_ref().map(|_| vec![0.0; out.len()]);
            let slot = up.as_mut().map(|u| &mut u[block.clone()]);
            parts.density += density_term(&out[block], item.target, lambda / m, slot) / m;
            if let (Some(g), Some(up)) = (grads.as_deref_mut(), up) {
                net.accumulate(&trace, &up, g)?;
            }
        }
    }
    parts.total = parts.main + lambda * parts.density;
    Ok(parts)
}

/// Number of density blocks, which equals the number of zones.
fn density_zones(net: &Mlp) -> Result<usize> {
    let len = net.head_range(DENSITY_HEAD)?.len();
    let zones = (len as f64).sqrt().round() as usize;
    if zones * zones != len {
        return Err(Error::Contract(format!("density head of length {len} is not square")));
    }
    Ok(zones)
}

pub struct PolicyItem<'a> {
    pub input: &'a [f64],
    pub action: usize,
    pub advantage: f64,
    pub mode: Mode,
}

/// `mean -log pi(a | s) * advantage`, with the advantage held constant.
pub fn policy_loss(net: &Mlp, items: &[PolicyItem], mut grads: Option<&mut Gradients>) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::Contract("empty rollout".into()));
    }
    let pi = net.head_range(PI_HEAD)?;
    let n = items.len() as f64;
    let mut loss = 0.0;
    for item in items {
        let trace = net.trace(item.input, item.mode, Some(std::slice::from_ref(&pi)))?;
        let logits = &trace.output()[pi.clone()];
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        let log_p = logits[item.action] - log_z;
        loss -= log_p * item.advantage / n;
        if let Some(g) = grads.as_deref_mut() {
            let p = softmax(logits);
            let mut up = vec![0.0; net.output_dim()];
            for (j, pj) in p.iter().enumerate() {
                let kron = if j == item.action { 1.0 } else { 0.0 };
                up[pi.start + j] = -item.advantage * (kron - pj) / n;
            }
            net.accumulate(&trace, &up, g)?;
        }
    }
    Ok(loss)
}
