mod common;

use pinn_osc::autodiff::{Jet2, Scalar, Tape};
use pinn_osc::network::{forward_value, MlpConfig, ParameterVector};
use pinn_osc::training::{loss_and_gradient, LossBreakdown};
use proptest::prelude::*;

use common::{jet_derivative_error, loss_gradient_error, random_loss_case};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn terms(b: &LossBreakdown) -> [f64; 6] {
    [b.total, b.data, b.governing, b.initial, b.boundary, b.regularization]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn loss_gradient_matches_finite_differences(kind in 0usize..3, seed in any::<u64>()) {
        let (cfg, params) = random_loss_case(kind, seed);
        let err = loss_gradient_error(&cfg, &params);
        prop_assert!(err < 1e-4, "{} seed {seed}: relative error {err:.3e}", cfg.problem.oscillator.name());
    }

    #[test]
    fn loss_terms_are_non_negative(kind in 0usize..3, seed in any::<u64>()) {
        let (cfg, params) = random_loss_case(kind, seed);
        let (parts, grad) = loss_and_gradient(&params, &cfg).unwrap();
        for v in terms(&parts) {
            prop_assert!(v >= 0.0 && v.is_finite());
        }
        prop_assert!(grad.iter().all(|g| g.is_finite()));
        let w = cfg.weights;
        let sum = w.lambda_d * parts.data + w.lambda_g * parts.governing + w.lambda_i * parts.initial
            + w.lambda_reg * parts.regularization;
        prop_assert!(close(parts.total, sum, 1e-12));
    }

    #[test]
    fn scaling_all_weights_scales_loss_and_gradient(kind in 0usize..3, seed in any::<u64>(), c in 0.01f64..100.0) {
        let (mut cfg, params) = random_loss_case(kind, seed);
        let (base, g0) = loss_and_gradient(&params, &cfg).unwrap();
        cfg.weights = cfg.weights.scaled(c);
        let (scaled, g1) = loss_and_gradient(&params, &cfg).unwrap();
        prop_assert!(close(scaled.total, c * base.total, 1e-12));
        // Individual terms are unweighted and must not move.
        prop_assert_eq!(&terms(&scaled)[1..], &terms(&base)[1..]);
        for (a, b) in g0.iter().zip(&g1) {
            prop_assert!((b - c * a).abs() <= 1e-10 * (c * a).abs().max(1e-8));
        }
    }

    #[test]
    fn jet_derivatives_match_finite_differences(
        layers in 1usize..=3, width in 1usize..=8, seed in any::<u64>(), t in -2.0f64..2.0, scaled in any::<bool>(),
    ) {
        let mut cfg = MlpConfig::new(layers, width).unwrap();
        if scaled {
            cfg = cfg.with_input_range([-3.0, 1.0]);
        }
        let params = ParameterVector::init(&cfg, seed).unwrap();
        let err = jet_derivative_error(params.as_slice(), &cfg, t);
        prop_assert!(err < 1e-4, "relative error {err:.3e}");
        let j = pinn_osc::network::jet_value(params.as_slice(), &cfg, t).unwrap();
        prop_assert_eq!(j.v0, forward_value(params.as_slice(), &cfg, t).unwrap());
    }

    #[test]
    fn tape_gradient_of_random_expression(x in -2.0f64..2.0, y in -2.0f64..2.0, z in -3.0f64..3.0) {
        // f = tanh(x y) + sin(x) cos(z) + x^2 z - 3 y
        let tape = Tape::new(&[x, y, z]);
        let v = tape.params();
        let out = (v[0] * v[1]).tanh() + v[0].sin() * v[2].cos() + v[0].square() * v[2] - v[1] * 3.0;
        let f = (x * y).tanh() + x.sin() * z.cos() + x * x * z - 3.0 * y;
        prop_assert!((out.value() - f).abs() <= 1e-14 * f.abs().max(1.0));
        let g = tape.gradient(out).unwrap();
        let sech2 = 1.0 - (x * y).tanh().powi(2);
        let want = [sech2 * y + x.cos() * z.cos() + 2.0 * x * z, sech2 * x - 3.0, -x.sin() * z.sin() + x * x];
        for (a, b) in g.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn jet_chain_rule_through_sin_of_square(a in -3.0f64..3.0, b in -3.0f64..3.0, t in -1.0f64..1.0) {
        // g(t) = sin((a + b t)^2)
        let lin = Jet2::new(a + b * t, b, 0.0);
        let g = (lin * lin).sin();
        let s = (a + b * t).powi(2);
        let ds = 2.0 * (a + b * t) * b;
        let d2s = 2.0 * b * b;
        prop_assert!((g.v0 - s.sin()).abs() < 1e-12);
        prop_assert!((g.v1 - s.cos() * ds).abs() < 1e-10);
        prop_assert!((g.v2 - (-s.sin() * ds * ds + s.cos() * d2s)).abs() < 1e-9);
    }
}
