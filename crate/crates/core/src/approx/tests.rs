use super::*;
use rand::Rng;
use crate::rng::rng_from_seed;
use proptest::prelude::*;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

/// Central differences over every parameter.
fn finite_difference(net: &Mlp, input: &[f64], loss: Loss, h: f64) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.n_params())
        .map(|i| {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + h;
            let up = probe.grad(input, loss).unwrap().0;
            probe.params_mut()[i] = orig - h;
            let down = probe.grad(input, loss).unwrap().0;
            probe.params_mut()[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[test]
fn zero_network_outputs_zero() {
    let net = Mlp::zeros(&[3, 4, 2], Activation::Tanh, OutputActivation::Linear).unwrap();
    assert_eq!(net.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn identity_layer_passes_input_through() {
    let mut params = vec![0.0; 3 * 3 + 3];
    for i in 0..3 {
        params[i * 3 + i] = 1.0;
    }
    let net = Mlp::from_params(&[3, 3], Activation::Tanh, OutputActivation::Linear, params).unwrap();
    assert_eq!(net.forward(&[0.3, -7.0, 2.5]).unwrap(), vec![0.3, -7.0, 2.5]);
}

#[test]
fn layer_shapes_chain() {
    let net = Mlp::new(&[5, 7, 3], Activation::Relu, OutputActivation::Linear, 1).unwrap();
    assert_eq!(net.n_params(), 5 * 7 + 7 + 7 * 3 + 3);
    let (w0, b0) = net.layer_ranges(0);
    let (w1, b1) = net.layer_ranges(1);
    assert_eq!((w0.len(), b0.len(), w1.len(), b1.len()), (35, 7, 21, 3));
    assert_eq!(b0.end, w1.start);
    assert_eq!(b1.end, net.n_params());
}

#[test]
fn wrong_input_length_is_rejected() {
    let net = Mlp::new(&[2, 3], Activation::Tanh, OutputActivation::Linear, 0).unwrap();
    assert_eq!(
        net.forward(&[1.0]),
        Err(ApproxError::DimensionMismatch { expected: 2, got: 1 })
    );
    assert!(Mlp::from_params(&[2, 3], Activation::Tanh, OutputActivation::Linear, vec![0.0; 3]).is_err());
}

#[test]
fn softmax_sums_to_one() {
    let mut rng = rng_from_seed(3);
    let net = Mlp::new(&[4, 16, 6], Activation::Tanh, OutputActivation::Softmax, 9).unwrap();
    for _ in 0..200 {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-20.0..20.0)).collect();
        let y = net.forward(&x).unwrap();
        assert!((y.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = rng_from_seed(11);
    for case in 0..12 {
        let hidden = if case % 2 == 0 { Activation::Tanh } else { Activation::Relu };
        let output = if case % 3 == 0 { OutputActivation::Softmax } else { OutputActivation::Linear };
        let mut net = Mlp::new(&[3, 5, 4, 3], hidden, output, case).unwrap();
        // Random biases keep relu units away from their kink at exactly zero.
        for p in net.params_mut() {
            *p += rng.random_range(-0.5..0.5);
        }
        let x = random_input(3, &mut rng);
        let losses = [
            Loss::SelectedSquaredError { index: 1, target: 0.7, weight: 1.3 },
            Loss::ValueRegression { target: -0.4 },
            Loss::PolicyGradient { action: 2, advantage: 0.8, entropy_coef: 0.05 },
        ];
        for loss in losses {
            if matches!(loss, Loss::PolicyGradient { .. }) && output != OutputActivation::Softmax {
                continue;
            }
            let (_, g) = net.grad(&x, loss).unwrap();
            let fd = finite_difference(&net, &x, loss, 1e-5);
            for (a, b) in g.iter().zip(&fd) {
                assert!(rel_err(*a, *b) <= 1e-4, "case {case} {loss:?}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn zero_weight_gives_zero_gradient() {
    let net = Mlp::new(&[3, 4, 2], Activation::Tanh, OutputActivation::Linear, 5).unwrap();
    let (loss, g) = net
        .grad(&[0.1, 0.2, 0.3], Loss::SelectedSquaredError { index: 0, target: 3.0, weight: 0.0 })
        .unwrap();
    assert_eq!(loss, 0.0);
    assert!(g.iter().all(|v| *v == 0.0));
}

#[test]
fn dead_relu_region_has_zero_gradient() {
    // All hidden pre-activations are negative, so the output is the constant
    // output bias and nothing upstream receives gradient.
    let mut net = Mlp::zeros(&[2, 3, 1], Activation::Relu, OutputActivation::Linear).unwrap();
    let (w0, b0) = net.layer_ranges(0);
    let (w1, b1) = net.layer_ranges(1);
    net.params_mut()[w0].iter_mut().for_each(|p| *p = 0.5);
    net.params_mut()[b0].iter_mut().for_each(|p| *p = -10.0);
    net.params_mut()[w1.clone()].iter_mut().for_each(|p| *p = 1.0);
    net.params_mut()[b1.clone()].iter_mut().for_each(|p| *p = 2.0);
    let (_, g) = net.grad(&[1.0, 1.0], Loss::ValueRegression { target: 0.0 }).unwrap();
    for (i, v) in g.iter().enumerate() {
        if b1.contains(&i) {
            assert_eq!(*v, 2.0);
        } else {
            assert_eq!(*v, 0.0, "param {i}");
        }
    }
}

#[test]
fn policy_gradient_requires_softmax() {
    let net = Mlp::new(&[2, 2], Activation::Tanh, OutputActivation::Linear, 0).unwrap();
    assert!(net
        .grad(&[0.0, 0.0], Loss::PolicyGradient { action: 0, advantage: 1.0, entropy_coef: 0.0 })
        .is_err());
}

#[test]
fn adam_zero_gradient_leaves_parameters() {
    let mut params = vec![0.5, -1.0, 2.0];
    let before = params.clone();
    let mut adam = AdamState::new(3, 1e-3);
    for _ in 0..10 {
        adam.step(&mut params, &[0.0; 3]).unwrap();
    }
    assert_eq!(params, before);
    assert_eq!(adam.step, 10);
}

#[test]
fn adam_fixed_gradient_step_is_bounded_by_learning_rate() {
    // With a constant gradient the bias-corrected moments equal g and g^2, so
    // every update has magnitude lr * |g| / (|g| + eps).
    for g in [1e-3, 0.5, 40.0, -3.0] {
        let mut p = vec![0.0];
        let mut adam = AdamState::new(1, 1e-3);
        let mut prev = 0.0;
        for _ in 0..1000 {
            adam.step(&mut p, &[g]).unwrap();
            let update = p[0] - prev;
            prev = p[0];
            let expected = -1e-3 * g / (g.abs() + 1e-8);
            assert!(update.abs() <= 1e-3 + 1e-15);
            assert!((update - expected).abs() <= 1e-12 * 1e-3 + 1e-15, "{update} vs {expected}");
        }
    }
}

#[test]
fn adam_minimises_a_quadratic_like_a_scalar_reference() {
    // f(x) = 0.5 * a * (x - x*)^2 with a plain scalar Adam as the reference.
    let (a, x_star) = (3.0, 1.7);
    let lr = 0.01;
    let mut p = vec![-2.0];
    let mut adam = AdamState::new(1, lr);
    let (mut x, mut m, mut v) = (-2.0f64, 0.0f64, 0.0f64);
    let mut reached = None;
    for t in 1..=5000 {
        let g = a * (p[0] - x_star);
        adam.step(&mut p, &[g]).unwrap();
        let gr = a * (x - x_star);
        m = 0.9 * m + 0.1 * gr;
        v = 0.999 * v + 0.001 * gr * gr;
        let mh = m / (1.0 - 0.9f64.powi(t));
        let vh = v / (1.0 - 0.999f64.powi(t));
        x -= lr * mh / (vh.sqrt() + 1e-8);
        assert!((p[0] - x).abs() <= 1e-12);
        if reached.is_none() && (p[0] - x_star).abs() < 1e-3 {
            reached = Some(t);
        }
    }
    assert!(reached.is_some());
    assert!((p[0] - x_star).abs() < 1e-3);
}

#[test]
fn adam_rejects_shape_mismatch() {
    let mut adam = AdamState::new(2, 1e-3);
    assert!(adam.step(&mut [0.0; 3], &[0.0; 3]).is_err());
    assert!(adam.step(&mut [0.0; 2], &[f64::NAN, 0.0]).is_err());
}

#[test]
fn initialisation_is_seeded() {
    let a = Mlp::new(&[4, 8, 2], Activation::Tanh, OutputActivation::Linear, 42).unwrap();
    let b = Mlp::new(&[4, 8, 2], Activation::Tanh, OutputActivation::Linear, 42).unwrap();
    let c = Mlp::new(&[4, 8, 2], Activation::Tanh, OutputActivation::Linear, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn forward_is_deterministic(seed in 0u64..1000, x in prop::collection::vec(-3.0f64..3.0, 4)) {
        let net = Mlp::new(&[4, 6, 3], Activation::Tanh, OutputActivation::Softmax, seed).unwrap();
        prop_assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
    }
}

