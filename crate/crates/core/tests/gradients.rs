//! Reverse-mode gradients against central differences.

mod common;

use common::grad::{attention_case, denoiser_case, gated_adaln_case, random, H, TOL};
use pepforge::amino::NUM_AA;
use pepforge::diffusion::{
    cosine_schedule, seq_loss_grad, transitions_from_alphas, wrapped_smooth_l1_grad, SquareMatrix, DEFAULT_LOSS_BETA,
};
use pepforge::geom::NUM_ANGLES;
use pepforge::nn::DenoiserKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gated_adaln_gradients() {
    let r = gated_adaln_case();
    assert_eq!(r.checked, 2);
    assert!(r.max_rel < TOL, "{:e}", r.max_rel);
}

#[test]
fn attention_gradients() {
    for r in attention_case() {
        assert_eq!(r.checked, 4);
        assert!(r.max_rel < TOL, "{:e}", r.max_rel);
    }
}

#[test]
fn structure_denoiser_gradients() {
    let r = denoiser_case(DenoiserKind::Structure);
    assert_eq!(r.checked, r.tensors, "every parameter tensor receives gradient");
    assert!(r.max_rel < TOL, "{:e}", r.max_rel);
}

#[test]
fn sequence_denoiser_gradients() {
    let r = denoiser_case(DenoiserKind::Sequence);
    assert_eq!(r.checked, r.tensors, "every parameter tensor receives gradient");
    assert!(r.max_rel < TOL, "{:e}", r.max_rel);
}

#[test]
fn wrapped_loss_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let truth = random(&mut rng, 4, NUM_ANGLES, 3.1);
    let pred = random(&mut rng, 4, NUM_ANGLES, 6.0);
    let (_, g) = wrapped_smooth_l1_grad(&truth, &pred, DEFAULT_LOSS_BETA, None).unwrap();
    for i in 0..pred.len() {
        let f = |d: f64| {
            let mut p = pred.clone();
            p.data[i] += d;
            wrapped_smooth_l1_grad(&truth, &p, DEFAULT_LOSS_BETA, None).unwrap().0
        };
        let num = (f(H) - f(-H)) / (2.0 * H);
        assert!((g.data[i] - num).abs() < 1e-8, "{i}: {} vs {num}", g.data[i]);
    }
}

#[test]
fn sequence_loss_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let raw: Vec<Vec<f64>> = (0..NUM_AA)
        .map(|_| {
            let r: Vec<f64> = (0..NUM_AA).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = r.iter().sum();
            r.iter().map(|v| v / s).collect()
        })
        .collect();
    let base = SquareMatrix::from_rows(&raw).unwrap();
    let sched = cosine_schedule(10).unwrap();
    let alphas: Vec<f64> = (1..=10).map(|t| sched.alpha(t)).collect();
    let m = transitions_from_alphas(&base, &alphas).unwrap();
    let logits = random(&mut rng, 3, NUM_AA, 2.0);
    let a0 = [2, 11, 19];
    let at = [5, 11, 0];
    for t in [1, 2, 6, 10] {
        let (_, g) = seq_loss_grad(&logits, &a0, &at, t, &m, None).unwrap();
        let mut diff = 0.0f64;
        let mut norm = 0.0f64;
        for i in 0..logits.len() {
            let f = |d: f64| {
                let mut l = logits.clone();
                l.data[i] += d;
                seq_loss_grad(&l, &a0, &at, t, &m, None).unwrap().0.total
            };
            let num = (f(H) - f(-H)) / (2.0 * H);
            diff += (g.data[i] - num).powi(2);
            norm += num * num;
        }
        assert!(diff.sqrt() / norm.sqrt() < TOL, "t={t}: {}", diff.sqrt() / norm.sqrt());
    }
}
