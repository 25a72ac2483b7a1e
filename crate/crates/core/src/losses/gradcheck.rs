//! Central finite differences, used to check the analytic gradients.

use crate::error::Result;
use crate::vector::Vector;

use super::LossResult;

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn numeric_gradient<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let plus = f(&probe);
            probe[i] = orig - h;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Max over coordinates of `|analytic - numeric| / max(1, |numeric|)`.
pub fn finite_diff_check<F>(f: F, x: &[f64], analytic: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(h > 0.0, "step must be positive");
    assert_eq!(x.len(), analytic.len(), "gradient length");
    numeric_gradient(f, x, h)
        .iter()
        .zip(analytic)
        .map(|(n, a)| (a - n).abs() / n.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Runs [`finite_diff_check`] for a loss over two vector groups (samples or
/// queries first, then labels or prototypes), perturbing every coordinate.
pub fn check_loss_inputs<F>(first: &[Vector], second: &[Vector], eval: F, h: f64) -> Result<f64>
where
    F: Fn(&[Vector], &[Vector]) -> Result<LossResult>,
{
    let analytic = eval(first, second)?.flat_grad();
    let dims: Vec<usize> = first.iter().chain(second).map(Vector::dim).collect();
    let x: Vec<f64> = first.iter().chain(second).flat_map(|v| v.iter().copied()).collect();
    let n_first = first.len();

    let unpack = |flat: &[f64]| -> (Vec<Vector>, Vec<Vector>) {
        let mut offset = 0;
        let mut vs = Vec::with_capacity(dims.len());
        for &d in &dims {
            vs.push(Vector::from_vec_unchecked(flat[offset..offset + d].to_vec()));
            offset += d;
        }
        let second = vs.split_off(n_first);
        (vs, second)
    };

    let mut failure = None;
    let err = finite_diff_check(
        |flat| {
            let (a, b) = unpack(flat);
            match eval(&a, &b) {
                Ok(r) => r.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        &x,
        &analytic,
        h,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(err),
    }
}
