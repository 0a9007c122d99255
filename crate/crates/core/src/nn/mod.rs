//! Dense-network kernel: layers, exact gradients and the Adam optimizer.

mod adam;
mod mlp;

pub use adam::AdamState;
pub use mlp::{Activation, LayerShape, Mlp, Trace};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("shape mismatch: expected {expected} parameters, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite gradient; update skipped")]
    NonFiniteGradient,
    #[error("checkpoint i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid checkpoint: {0}")]
    BadCheckpoint(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_linear_layer_passes_input_through() {
        let mut net = Mlp::zeros(&[3, 3], Activation::Linear);
        for i in 0..3 {
            net.params_mut()[i * 3 + i] = 1.0;
        }
        let y = net.forward(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn zero_net_linear_output_is_bias() {
        let mut net = Mlp::zeros(&[4, 2], Activation::Linear);
        let n = net.param_count();
        net.params_mut()[n - 2] = 0.7;
        net.params_mut()[n - 1] = -0.3;
        let y = net.forward(&[5.0, -1.0, 2.0, 9.0]).unwrap();
        assert_eq!(y, vec![0.7, -0.3]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let net = Mlp::zeros(&[2, 3], Activation::Softmax);
        let y = net.forward(&[0.4, -1.2]).unwrap();
        for p in &y {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_computed_two_layer_forward() {
        // Layer 1 (relu): w = [[1, -1], [0.5, 2]], b = [0.1, -3].
        // Layer 2 (linear): w = [[2, 1]], b = [0.25].
        // x = (1, 0): z1 = (1.1, -2.5) -> relu (1.1, 0); y = 2*1.1 + 0 + 0.25.
        let mut net = Mlp::zeros(&[2, 2, 1], Activation::Linear);
        let p = net.params_mut();
        p[..6].copy_from_slice(&[1.0, -1.0, 0.5, 2.0, 0.1, -3.0]);
        p[6..].copy_from_slice(&[2.0, 1.0, 0.25]);
        let y = net.forward(&[1.0, 0.0]).unwrap();
        assert!((y[0] - 2.45).abs() < 1e-12);
    }

    #[test]
    fn linear_weight_gradient_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[3, 2], Activation::Linear, &mut rng);
        let x = [0.5, -1.0, 2.0];
        let upstream = [1.5, -0.25];
        let trace = net.forward_trace(&x).unwrap();
        let mut grads = vec![0.0; net.param_count()];
        net.backward_into(&trace, &upstream, &mut grads).unwrap();
        for (i, u) in upstream.iter().enumerate() {
            for (j, xj) in x.iter().enumerate() {
                assert!((grads[i * 3 + j] - u * xj).abs() < 1e-12);
            }
            assert!((grads[6 + i] - u).abs() < 1e-12);
        }
    }

    #[test]
    fn relu_blocks_gradient_at_negative_preactivation() {
        let mut net = Mlp::zeros(&[1, 1, 1], Activation::Linear);
        let p = net.params_mut();
        p[0] = 1.0; // w1
        p[1] = -2.0; // b1 -> z = x - 2 < 0 for x = 1
        p[2] = 3.0; // w2
        let trace = net.forward_trace(&[1.0]).unwrap();
        let mut grads = vec![0.0; net.param_count()];
        let g_in = net.backward_into(&trace, &[1.0], &mut grads).unwrap();
        assert_eq!(grads[0], 0.0);
        assert_eq!(g_in[0], 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let out_act = if trial % 2 == 0 {
                Activation::Linear
            } else {
                Activation::Softmax
            };
            let net = Mlp::new(&[4, 6, 3], out_act, &mut rng);
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let upstream: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            // Scalar loss L = upstream . y, so dL/dy = upstream.
            let trace = net.forward_trace(&x).unwrap();
            let mut grads = vec![0.0; net.param_count()];
            net.backward_into(&trace, &upstream, &mut grads).unwrap();
            let h = 1e-6;
            for k in (0..net.param_count()).step_by(5) {
                let mut plus = net.clone();
                plus.params_mut()[k] += h;
                let mut minus = net.clone();
                minus.params_mut()[k] -= h;
                let lp: f64 = plus
                    .forward(&x)
                    .unwrap()
                    .iter()
                    .zip(&upstream)
                    .map(|(y, u)| y * u)
                    .sum();
                let lm: f64 = minus
                    .forward(&x)
                    .unwrap()
                    .iter()
                    .zip(&upstream)
                    .map(|(y, u)| y * u)
                    .sum();
                let fd = (lp - lm) / (2.0 * h);
                let scale = fd.abs().max(grads[k].abs()).max(1e-3);
                assert!(
                    (fd - grads[k]).abs() / scale < 1e-5,
                    "param {k}: analytic {} vs fd {fd}",
                    grads[k]
                );
            }
        }
    }

    #[test]
    fn adam_zero_gradient_leaves_params_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Mlp::new(&[2, 2], Activation::Linear, &mut rng);
        let before = net.params().to_vec();
        let grads = vec![0.0; net.param_count()];
        let mut adam = AdamState::new(net.param_count(), 1e-3);
        adam.step(net.params_mut(), &grads).unwrap();
        assert_eq!(net.params(), &before[..]);
    }

    #[test]
    fn adam_first_step_moves_against_gradient_by_lr() {
        let mut params = vec![1.0, -2.0];
        let grads = vec![0.5, -3.0];
        let mut adam = AdamState::new(2, 1e-3);
        adam.step(&mut params, &grads).unwrap();
        // Bias-corrected first step is lr * g / (|g| + eps') ~= lr * sign(g).
        assert!((params[0] - (1.0 - 1e-3)).abs() < 1e-6);
        assert!((params[1] - (-2.0 + 1e-3)).abs() < 1e-6);
    }

    #[test]
    fn adam_descends_a_convex_quadratic() {
        let mut params = vec![1.0, 1.0];
        let mut adam = AdamState::new(2, 1e-3);
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let grads: Vec<f64> = params.iter().map(|p| 2.0 * p).collect();
            adam.step(&mut params, &grads).unwrap();
            let norm2: f64 = params.iter().map(|p| p * p).sum();
            assert!(norm2 < last, "norm must strictly decrease");
            last = norm2;
        }
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut params = vec![1.0];
        let mut adam = AdamState::new(1, 1e-3);
        let err = adam.step(&mut params, &[f64::NAN]).unwrap_err();
        assert!(matches!(err, NnError::NonFiniteGradient));
        assert_eq!(params, vec![1.0]);
    }

    #[test]
    fn seeded_initialization_is_reproducible() {
        let a = Mlp::new(&[5, 8, 2], Activation::Linear, &mut ChaCha8Rng::seed_from_u64(42));
        let b = Mlp::new(&[5, 8, 2], Activation::Linear, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a.params(), b.params());
        assert_eq!(a.checksum(), b.checksum());
    }

    #[test]
    fn checkpoint_roundtrip_preserves_bits() {
        let net = Mlp::new(&[7, 5, 4], Activation::Softmax, &mut ChaCha8Rng::seed_from_u64(9));
        let mut buf = Vec::new();
        net.write_to(&mut buf).unwrap();
        let back = Mlp::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(net.params(), back.params());
        assert_eq!(back.output_dim(), 4);
    }

    #[test]
    fn forward_rejects_wrong_input_dim() {
        let net = Mlp::zeros(&[3, 2], Activation::Linear);
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(NnError::DimMismatch { expected: 3, got: 2 })
        ));
    }
}
