//! Central finite-difference gradient verification.

use super::mlp::{Gradients, Mlp, Mode};

pub const DEFAULT_STEP: f64 = 1e-5;

/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compare `analytic` against central differences of `objective` over every
/// parameter of `net`, returning the maximum relative error.
pub fn check_gradients<F>(net: &Mlp, analytic: &Gradients, objective: F, step: f64) -> f64
where
    F: Fn(&Mlp) -> f64,
{
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    let analytic_slices = analytic.slices();
    let n_slices = analytic_slices.len();
    for s in 0..n_slices {
        for k in 0..analytic_slices[s].len() {
            let original = probe.param_slices()[s][k];
            probe.param_slices_mut()[s][k] = original + step;
            let plus = objective(&probe);
            probe.param_slices_mut()[s][k] = original - step;
            let minus = objective(&probe);
            probe.param_slices_mut()[s][k] = original;
            let numeric = (plus - minus) / (2.0 * step);
            worst = worst.max(relative_error(analytic_slices[s][k], numeric));
        }
    }
    worst
}

/// Gradient check of a loss defined on the network output at a single input.
/// `loss` returns the loss value and its gradient with respect to the output.
/// Dropout is disabled.
pub fn grad_check<F>(net: &Mlp, x: &[f64], loss: F) -> crate::Result<f64>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let out = net.forward(x, Mode::Eval)?;
    let (_, upstream) = loss(&out);
    let analytic = net.backward(x, &upstream, Mode::Eval)?;
    Ok(check_gradients(
        net,
        &analytic,
        |m| loss(&m.forward(x, Mode::Eval).expect("input checked above")).0,
        DEFAULT_STEP,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::HeadSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn squared(target: Vec<f64>) -> impl Fn(&[f64]) -> (f64, Vec<f64>) {
        move |y: &[f64]| {
            let loss = y.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum();
            let grad = y.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            (loss, grad)
        }
    }

    #[test]
    fn linear_least_squares_matches_closed_form() {
        let net = Mlp::init(&[3, 2], HeadSpec::single("o", 2), 0.0, 4).unwrap();
        let x = [0.5, -1.0, 2.0];
        let target = vec![1.0, -1.0];
        // closed form: dL/dW = 2 (Wx + b - t) x^T
        let y = net.forward(&x, Mode::Eval).unwrap();
        let g = net
            .backward(&x, &[2.0 * (y[0] - 1.0), 2.0 * (y[1] + 1.0)], Mode::Eval)
            .unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let expected = 2.0 * (y[i] - target[i]) * x[j];
                assert!((g.weights[0][i * 3 + j] - expected).abs() < 1e-12);
            }
        }
        assert!(grad_check(&net, &x, squared(target)).unwrap() < 1e-7);
    }

    #[test]
    fn constant_loss_has_zero_error() {
        let net = Mlp::init(&[3, 4, 2], HeadSpec::single("o", 2), 0.0, 4).unwrap();
        let err = grad_check(&net, &[0.1, 0.2, 0.3], |y| (1.5, vec![0.0; y.len()])).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn random_three_layer_nets_away_from_kinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0;
        while checked < 100 {
            let net = Mlp::init(&[4, 6, 5, 3], HeadSpec::single("o", 3), 0.0, rng.gen()).unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let trace = net.trace(&x, Mode::Eval, None).unwrap();
            let near_kink = trace.hidden_preactivations().iter().flatten().any(|z| z.abs() < 1e-2);
            if near_kink {
                continue;
            }
            let target: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let err = grad_check(&net, &x, squared(target)).unwrap();
            assert!(err < 1e-4, "relative error {err}");
            checked += 1;
        }
    }
}
