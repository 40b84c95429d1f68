//! First-order optimizers over [`Mlp`] parameters.

use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64 },
    Rmsprop { decay: f64 },
    Sgd,
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
        }
    }

    pub fn rmsprop() -> Self {
        OptimizerKind::Rmsprop { decay: 0.99 }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    learning_rate: f64,
    eps: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, net: &Mlp) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        let zeros = || -> Vec<Vec<f64>> { net.param_slices().iter().map(|s| vec![0.0; s.len()]).collect() };
        let (first, second) = match kind {
            OptimizerKind::Adam { .. } => (zeros(), zeros()),
            OptimizerKind::Rmsprop { .. } => (Vec::new(), zeros()),
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
        };
        Ok(OptimizerState {
            kind,
            learning_rate,
            eps: 1e-8,
            step: 0,
            first,
            second,
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Apply one update to `net`. Non-finite gradients are rejected before
    /// anything is modified.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if !grads.congruent_with(net) {
            return Err(Error::Contract("gradients do not match the network".into()));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.step += 1;
        let lr = self.learning_rate;
        let eps = self.eps;
        let grad_slices = grads.slices();
        let mut params = net.param_slices_mut();
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(&grad_slices) {
                    for (pv, gv) in p.iter_mut().zip(g.iter()) {
                        *pv -= lr * gv;
                    }
                }
            }
            OptimizerKind::Rmsprop { decay } => {
                for ((p, g), s) in params.iter_mut().zip(&grad_slices).zip(&mut self.second) {
                    for ((pv, gv), sv) in p.iter_mut().zip(g.iter()).zip(s.iter_mut()) {
                        *sv = decay * *sv + (1.0 - decay) * gv * gv;
                        *pv -= lr * gv / (sv.sqrt() + eps);
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2 } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(&grad_slices)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    for (((pv, gv), mv), vv) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mv = beta1 * *mv + (1.0 - beta1) * gv;
                        *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                        let m_hat = *mv / c1;
                        let v_hat = *vv / c2;
                        *pv -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        drop(params);
        if !net.is_finite() {
            return Err(Error::NonFinite("parameters after optimizer step".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{HeadSpec, Mode};

    fn scalar_net(value: f64) -> Mlp {
        let mut net = Mlp::init(&[1, 1], HeadSpec::single("o", 1), 0.0, 0).unwrap();
        net.weights_mut(0)[0] = value;
        net
    }

    fn scalar_grad(net: &Mlp, g: f64) -> Gradients {
        let mut grads = Gradients::zeros_like(net);
        grads.weights[0][0] = g;
        grads
    }

    #[test]
    fn sgd_step() {
        let mut net = scalar_net(1.0);
        let grads = scalar_grad(&net, 0.5);
        let mut opt = OptimizerState::new(OptimizerKind::Sgd, 0.1, &net).unwrap();
        opt.step(&mut net, &grads).unwrap();
        assert!((net.weights(0)[0] - 0.95).abs() < 1e-15);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn adam_first_step_is_lr_times_sign() {
        for g in [3.0, -0.02] {
            let mut net = scalar_net(0.0);
            let grads = scalar_grad(&net, g);
            let mut opt = OptimizerState::new(OptimizerKind::adam(), 1e-3, &net).unwrap();
            opt.step(&mut net, &grads).unwrap();
            let expected = -1e-3 * g / (g.abs() + 1e-8);
            assert!((net.weights(0)[0] - expected).abs() < 1e-15);
            assert!((net.weights(0)[0] + 1e-3 * g.signum()).abs() < 1e-9);
        }
    }

    #[test]
    fn rmsprop_zero_gradient_leaves_params() {
        let mut net = Mlp::init(&[3, 4, 2], HeadSpec::single("o", 2), 0.0, 8).unwrap();
        let before = net.clone();
        let grads = Gradients::zeros_like(&net);
        let mut opt = OptimizerState::new(OptimizerKind::rmsprop(), 1e-4, &net).unwrap();
        opt.step(&mut net, &grads).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut net = scalar_net(1.0);
        let grads = scalar_grad(&net, f64::NAN);
        let mut opt = OptimizerState::new(OptimizerKind::adam(), 1e-3, &net).unwrap();
        assert!(matches!(opt.step(&mut net, &grads), Err(Error::NonFinite(_))));
        assert_eq!(net.weights(0)[0], 1.0);
    }

    #[test]
    fn bad_learning_rate_is_rejected() {
        let net = scalar_net(1.0);
        assert!(OptimizerState::new(OptimizerKind::Sgd, 0.0, &net).is_err());
    }

    #[test]
    fn identical_inputs_give_identical_trajectories() {
        let run = || {
            let mut net = Mlp::init(&[2, 8, 1], HeadSpec::single("o", 1), 0.5, 11).unwrap();
            let mut opt = OptimizerState::new(OptimizerKind::adam(), 1e-2, &net).unwrap();
            for k in 0..50u64 {
                let x = [k as f64 * 0.01, 1.0 - k as f64 * 0.02];
                let mode = Mode::Train { seed: k };
                let y = net.forward(&x, mode).unwrap()[0];
                let grads = net.backward(&x, &[2.0 * (y - 1.0)], mode).unwrap();
                opt.step(&mut net, &grads).unwrap();
            }
            net
        };
        assert_eq!(run(), run());
    }
}
