//! Central finite differences for verifying analytic gradients.
//!
//! These utilities are the independent numerical oracle used by the test
//! suites; they only ever call forward evaluations.

/// Central-difference gradient of `f` at `theta` with step `h`, in f64.
pub fn central_diff(theta: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut work = theta.to_vec();
    let mut grad = vec![0.0; theta.len()];
    for i in 0..theta.len() {
        let orig = work[i];
        work[i] = orig + h;
        let fp = f(&work);
        work[i] = orig - h;
        let fm = f(&work);
        work[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Largest relative error between analytic and numeric gradients.
///
/// Entries where both magnitudes are below `atol` are treated as matching
/// zeros and skipped.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], atol: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let mut worst = 0.0f64;
    for (&a, &n) in analytic.iter().zip(numeric) {
        let denom = a.abs().max(n.abs());
        if denom < atol {
            continue;
        }
        worst = worst.max((a - n).abs() / denom);
    }
    worst
}

/// Panics unless every gradient entry matches within `rtol` (or both sides
/// are below `atol`).
pub fn assert_grads_close(analytic: &[f64], numeric: &[f64], rtol: f64, atol: f64) {
    let err = max_rel_err(analytic, numeric, atol);
    assert!(
        err < rtol,
        "gradient mismatch: max relative error {err:.3e} >= {rtol:.1e}"
    );
}
