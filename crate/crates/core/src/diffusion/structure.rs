//! Wrapped-Gaussian diffusion over angle matrices.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::geom::{wrap, AngleRow, InternalCoords, NUM_ANGLES};
use crate::nn::Tensor;

pub const DEFAULT_LOSS_BETA: f64 = 0.1 * PI;
pub const DEFAULT_NOISE_SCALE: f64 = PI;

/// Difference `a - b` wrapped to [-pi, pi).
pub fn wrapped_diff(a: f64, b: f64) -> f64 {
    (a - b + PI).rem_euclid(2.0 * PI) - PI
}

pub fn smooth_l1(d: f64, beta: f64) -> f64 {
    if d.abs() < beta {
        0.5 * d * d / beta
    } else {
        d.abs() - 0.5 * beta
    }
}

/// Derivative of `smooth_l1` with respect to `d`.
pub fn smooth_l1_grad(d: f64, beta: f64) -> f64 {
    if d.abs() < beta {
        d / beta
    } else {
        d.signum()
    }
}

fn loss_and_grad(
    eps_true: &Tensor,
    eps_pred: &Tensor,
    beta: f64,
    mask: Option<&[bool]>,
) -> Result<(f64, Tensor)> {
    if !eps_true.same_shape(eps_pred) {
        return Err(Error::Shape(format!(
            "loss inputs {:?} vs {:?}",
            eps_true.shape, eps_pred.shape
        )));
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidValue(format!("smooth-L1 beta {beta}")));
    }
    let (n, c) = (eps_true.rows(), eps_true.cols());
    if let Some(m) = mask {
        if m.len() != n {
            return Err(Error::Shape(format!("mask of {} for {n} rows", m.len())));
        }
    }
    let keep = |i: usize| mask.is_none_or(|m| m[i]);
    let count = (0..n).filter(|&i| keep(i)).count() * c;
    let mut grad = Tensor::zeros(&eps_pred.shape);
    if count == 0 {
        return Ok((0.0, grad));
    }
    let mut total = 0.0;
    for i in (0..n).filter(|&i| keep(i)) {
        for j in 0..c {
            let d = wrapped_diff(eps_true.get(i, j), eps_pred.get(i, j));
            total += smooth_l1(d, beta);
            grad.data[i * c + j] = -smooth_l1_grad(d, beta) / count as f64;
        }
    }
    Ok((total / count as f64, grad))
}

/// Mean smooth-L1 of wrapped differences over unmasked rows.
pub fn wrapped_smooth_l1(eps_true: &Tensor, eps_pred: &Tensor, beta: f64, mask: Option<&[bool]>) -> Result<f64> {
    Ok(loss_and_grad(eps_true, eps_pred, beta, mask)?.0)
}

/// Loss and its gradient with respect to `eps_pred`.
pub fn wrapped_smooth_l1_grad(
    eps_true: &Tensor,
    eps_pred: &Tensor,
    beta: f64,
    mask: Option<&[bool]>,
) -> Result<(f64, Tensor)> {
    loss_and_grad(eps_true, eps_pred, beta, mask)
}

fn check_wrapped(x: &Tensor) -> Result<()> {
    if x.data.iter().all(|v| (-PI..PI).contains(v)) {
        Ok(())
    } else {
        Err(Error::InvalidValue("angles must be wrapped to [-pi, pi)".into()))
    }
}

/// Noises `x0` to step `t` with draw `noise` (standard normal) at scale
/// `sigma`. Returns `x_t` and the regression target, the wrapped angular
/// displacement `wrap(x_t - sqrt(alphabar_t) x0)`.
pub fn q_sample(
    x0: &Tensor,
    t: usize,
    noise: &Tensor,
    sched: &NoiseSchedule,
    sigma: f64,
) -> Result<(Tensor, Tensor)> {
    sched.check_step(t)?;
    check_wrapped(x0)?;
    if !x0.same_shape(noise) {
        return Err(Error::Shape(format!("x0 {:?} vs noise {:?}", x0.shape, noise.shape)));
    }
    let a = sched.alphabar(t).sqrt();
    let c = (1.0 - sched.alphabar(t)).sqrt() * sigma;
    let xt = x0.zip_map(noise, |x, z| wrap(a * x + c * z))?;
    let target = xt.zip_map(x0, |y, x| wrap(y - a * x))?;
    Ok((xt, target))
}

pub fn standard_normal(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    Tensor {
        shape: vec![rows, cols],
        data: (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect(),
    }
}

/// One ancestral step from `x_t` to `x_{t-1}` given the predicted
/// displacement. `z` is a standard normal draw (ignored at t = 1).
pub fn reverse_step(
    xt: &Tensor,
    disp: &Tensor,
    t: usize,
    sched: &NoiseSchedule,
    sigma: f64,
    z: &Tensor,
) -> Result<Tensor> {
    sched.check_step(t)?;
    let ab = sched.alphabar(t);
    let ab_prev = sched.alphabar(t - 1);
    let beta = sched.beta(t);
    let alpha = sched.alpha(t);
    let sa = ab.sqrt();
    let c0 = ab_prev.sqrt() * beta / (1.0 - ab);
    let ct = alpha.sqrt() * (1.0 - ab_prev) / (1.0 - ab);
    let noise_sd = if t > 1 { beta.sqrt() * sigma } else { 0.0 };
    let mut out = Tensor::zeros(&xt.shape);
    for i in 0..xt.len() {
        let d = wrap(disp.data[i]);
        // sqrt(alphabar) x0 lies in [-pi, pi), so the wrapped remainder
        // identifies it exactly.
        let x0 = wrap(wrap(xt.data[i] - d) / sa);
        let xt_unwrapped = sa * x0 + d;
        let mean = c0 * x0 + ct * xt_unwrapped;
        let v = wrap(mean + noise_sd * z.data[i]);
        if !v.is_finite() {
            return Err(Error::Divergence(format!("non-finite sample at step {t}")));
        }
        out.data[i] = v;
    }
    Ok(out)
}

/// Per-column maps into the model's working space: dihedrals have their
/// circular mean removed; bond angles are mapped affinely from a padded
/// training range onto the whole circle, so samples always map back into it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleNormalizer {
    pub dihedral_mean: [f64; 4],
    pub bond_lo: [f64; 4],
    pub bond_hi: [f64; 4],
}

const BOND_PAD_FRACTION: f64 = 0.1;
const BOND_MIN_SPAN: f64 = 0.1;
const BOND_EDGE: f64 = 1e-3;

impl AngleNormalizer {
    pub fn identity_like() -> Self {
        AngleNormalizer {
            dihedral_mean: [0.0; 4],
            bond_lo: [BOND_EDGE; 4],
            bond_hi: [PI - BOND_EDGE; 4],
        }
    }

    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a AngleRow>) -> Result<Self> {
        let mut s = [0.0; 4];
        let mut c = [0.0; 4];
        let mut lo = [f64::INFINITY; 4];
        let mut hi = [f64::NEG_INFINITY; 4];
        let mut count = 0;
        for r in rows {
            let a = r.to_array();
            for k in 0..4 {
                s[k] += a[k].sin();
                c[k] += a[k].cos();
                lo[k] = lo[k].min(a[4 + k]);
                hi[k] = hi[k].max(a[4 + k]);
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::EmptyData("no angle rows to fit".into()));
        }
        let mut n = AngleNormalizer::identity_like();
        for k in 0..4 {
            n.dihedral_mean[k] = wrap(s[k].atan2(c[k]));
            let span = (hi[k] - lo[k]).max(0.0);
            let pad = (BOND_PAD_FRACTION * span).max(0.5 * (BOND_MIN_SPAN - span).max(0.0));
            n.bond_lo[k] = (lo[k] - pad).max(BOND_EDGE);
            n.bond_hi[k] = (hi[k] + pad).min(PI - BOND_EDGE);
        }
        Ok(n)
    }

    pub fn forward(&self, r: &AngleRow) -> [f64; NUM_ANGLES] {
        let a = r.to_array();
        let mut out = [0.0; NUM_ANGLES];
        for k in 0..4 {
            out[k] = wrap(a[k] - self.dihedral_mean[k]);
            let u = (a[4 + k] - self.bond_lo[k]) / (self.bond_hi[k] - self.bond_lo[k]);
            out[4 + k] = wrap(-PI + 2.0 * PI * u);
        }
        out
    }

    pub fn inverse(&self, y: &[f64]) -> AngleRow {
        let mut a = [0.0; NUM_ANGLES];
        for k in 0..4 {
            a[k] = wrap(y[k] + self.dihedral_mean[k]);
            let u = (wrap(y[4 + k]) + PI) / (2.0 * PI);
            a[4 + k] = self.bond_lo[k] + u * (self.bond_hi[k] - self.bond_lo[k]);
        }
        AngleRow::from_array(a)
    }

    pub fn encode(&self, rows: &[AngleRow]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| self.forward(r)).collect::<Vec<_>>())
    }

    pub fn decode(&self, x: &Tensor) -> InternalCoords {
        InternalCoords::new((0..x.rows()).map(|i| self.inverse(x.row(i))).collect())
    }
}

/// Wrapped-uniform starting point for sampling.
pub fn uniform_angles(rng: &mut impl Rng, rows: usize) -> Tensor {
    Tensor {
        shape: vec![rows, NUM_ANGLES],
        data: (0..rows * NUM_ANGLES).map(|_| wrap(rng.random_range(-PI..PI))).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::schedule::cosine_schedule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent scalar evaluation: explicit branch on the reduced
    /// difference.
    fn reference_loss(a: f64, b: f64, beta: f64) -> f64 {
        let mut d = a - b;
        while d >= PI {
            d -= 2.0 * PI;
        }
        while d < -PI {
            d += 2.0 * PI;
        }
        if d.abs() < beta {
            0.5 * d.powi(2) / beta
        } else {
            d.abs() - 0.5 * beta
        }
    }

    fn t1(v: f64) -> Tensor {
        Tensor::full(&[1, 1], v)
    }

    #[test]
    fn loss_examples() {
        let b = DEFAULT_LOSS_BETA;
        assert_eq!(wrapped_smooth_l1(&t1(0.3), &t1(0.3), b, None).unwrap(), 0.0);
        let l = wrapped_smooth_l1(&t1(PI - 0.05), &t1(-PI + 0.05), b, None).unwrap();
        assert!((l - 0.5 * 0.01 / b).abs() < 1e-12, "{l}");
        assert!((smooth_l1(b, b) - 0.5 * b).abs() < 1e-15);
        assert!((0.5 * b * b / b - (b - 0.5 * b)).abs() < 1e-15);
    }

    #[test]
    fn masked_rows_are_excluded() {
        let a = Tensor::matrix(2, 1, vec![0.0, 0.0]).unwrap();
        let p = Tensor::matrix(2, 1, vec![1.0, 3.0]).unwrap();
        let full = wrapped_smooth_l1(&a, &p, 0.1, None).unwrap();
        let one = wrapped_smooth_l1(&a, &p, 0.1, Some(&[true, false])).unwrap();
        assert!((one - (1.0 - 0.05)).abs() < 1e-12);
        assert!(full > one);
    }

    #[test]
    fn q_sample_limits() {
        let s = cosine_schedule(100).unwrap();
        let x0 = Tensor::matrix(1, 8, vec![0.1, -0.5, 3.0, -3.1, 1.0, 2.0, -2.0, 0.0]).unwrap();
        let (xt, e) = q_sample(&x0, 1, &Tensor::zeros(&[1, 8]), &s, PI).unwrap();
        for (a, b) in xt.data.iter().zip(&x0.data) {
            assert!((a - b).abs() < 1e-2);
        }
        assert!(e.max_abs() < 1e-12);
        let bad = Tensor::full(&[1, 8], 4.0);
        assert!(q_sample(&bad, 1, &Tensor::zeros(&[1, 8]), &s, PI).is_err());
        assert!(q_sample(&x0, 0, &Tensor::zeros(&[1, 8]), &s, PI).is_err());
    }

    #[test]
    fn exact_displacement_recovers_x0() {
        let s = cosine_schedule(50).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x0 = uniform_angles(&mut rng, 6);
        // With the true displacement and no noise, one reverse step from
        // t = 1 lands on x0; at later steps x0 is recovered internally.
        for t in [1, 10, 49] {
            let z = standard_normal(&mut rng, 6, 8);
            let (xt, e) = q_sample(&x0, t, &z, &s, PI).unwrap();
            let prev = reverse_step(&xt, &e, t, &s, PI, &Tensor::zeros(&[6, 8])).unwrap();
            if t == 1 {
                for (a, b) in prev.data.iter().zip(&x0.data) {
                    assert!(wrapped_diff(*a, *b).abs() < 1e-9);
                }
            }
            assert!(prev.data.iter().all(|v| (-PI..PI).contains(v)));
        }
    }

    #[test]
    fn normalizer_roundtrip_and_range() {
        let rows = vec![
            AngleRow::from_array([0.1, 3.1, -1.0, 2.0, 1.9, 2.1, 1.95, 2.05]),
            AngleRow::from_array([0.3, -3.1, -1.2, 2.2, 2.0, 2.2, 1.9, 2.1]),
        ];
        let n = AngleNormalizer::fit(&rows).unwrap();
        for r in &rows {
            let back = n.inverse(&n.forward(r));
            for (a, b) in back.to_array().iter().zip(r.to_array()) {
                assert!(wrapped_diff(*a, b).abs() < 1e-12);
            }
        }
        // Anything on the circle maps back inside the padded bond range.
        for y in [-PI, -1.0, 0.0, 3.0] {
            let r = n.inverse(&[y; 8]);
            assert!(r.is_valid());
            assert!(r.theta1 >= n.bond_lo[0] && r.theta1 <= n.bond_hi[0]);
        }
        // Omega straddles +-pi: its circular mean is near pi, not 0.
        assert!(n.dihedral_mean[1].abs() > 3.0);
    }

    proptest::proptest! {
        #[test]
        fn loss_matches_scalar_reference(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let got = wrapped_smooth_l1(&t1(a), &t1(b), DEFAULT_LOSS_BETA, None).unwrap();
            proptest::prop_assert!((got - reference_loss(a, b, DEFAULT_LOSS_BETA)).abs() < 1e-12);
        }

        #[test]
        fn loss_symmetric_and_periodic(a in -PI..PI, b in -PI..PI, k in -3i32..3) {
            let l = |x: f64, y: f64| wrapped_smooth_l1(&t1(x), &t1(y), DEFAULT_LOSS_BETA, None).unwrap();
            proptest::prop_assert!((l(a, b) - l(b, a)).abs() < 1e-12);
            proptest::prop_assert!((l(a, b) - l(a + 2.0 * PI * k as f64, b)).abs() < 1e-9);
        }

        #[test]
        fn q_sample_stays_on_circle(seed in 0u64..1000, t in 1usize..=100) {
            let s = cosine_schedule(100).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x0 = uniform_angles(&mut rng, 3);
            let z = standard_normal(&mut rng, 3, 8);
            let (xt, e) = q_sample(&x0, t, &z, &s, PI).unwrap();
            let a = s.alphabar(t).sqrt();
            let c = (1.0 - s.alphabar(t)).sqrt() * PI;
            for i in 0..xt.len() {
                proptest::prop_assert!((-PI..PI).contains(&xt.data[i]));
                let raw = a * x0.data[i] + c * z.data[i];
                // Same point on the circle as the unwrapped value.
                proptest::prop_assert!((xt.data[i].sin() - raw.sin()).abs() < 1e-12);
                proptest::prop_assert!((xt.data[i].cos() - raw.cos()).abs() < 1e-12);
                proptest::prop_assert!(wrapped_diff(e.data[i], c * z.data[i]).abs() < 1e-9);
            }
        }
    }
}
