//! Affine maps and their exact gradients.
//!
//! `linear_forward` is the reference op: it accumulates in f64 regardless of
//! storage precision so it stays within 1e-6 of a naive oracle. Hot paths in
//! the network use [`Tensor2::matmul`] (blocked kernel) with the same math.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor2;
use crate::scalar::Scalar;

/// out[n,j] = Σ_a x[n,a]·w[a,j] + b[j]; bias is a 1×B row vector.
pub fn linear_forward<T: Scalar>(
    x: &Tensor2<T>,
    w: &Tensor2<T>,
    b: &Tensor2<T>,
) -> Result<Tensor2<T>> {
    if x.cols() != w.rows() {
        return Err(Error::ShapeMismatch {
            context: "linear_forward",
            left: x.shape(),
            right: w.shape(),
        });
    }
    if b.rows() != 1 || b.cols() != w.cols() {
        return Err(Error::ShapeMismatch {
            context: "linear_forward bias",
            left: w.shape(),
            right: b.shape(),
        });
    }
    let (n, a, m) = (x.rows(), x.cols(), w.cols());
    let mut out = Tensor2::zeros(n, m);
    let mut acc = vec![0f64; m];
    for r in 0..n {
        for (j, av) in acc.iter_mut().enumerate() {
            *av = b.at(0, j).to_f64();
        }
        let xrow = x.row(r);
        for (k, &xv) in xrow.iter().enumerate().take(a) {
            let xv = xv.to_f64();
            for (j, av) in acc.iter_mut().enumerate() {
                *av += xv * w.at(k, j).to_f64();
            }
        }
        for (j, &av) in acc.iter().enumerate() {
            out.set(r, j, T::from_f64(av));
        }
    }
    Ok(out)
}

/// Exact analytic gradients of the affine map:
/// dW = xᵀ·dOut, dX = dOut·Wᵀ, db = column sum of dOut.
pub fn linear_backward<T: Scalar>(
    x: &Tensor2<T>,
    w: &Tensor2<T>,
    d_out: &Tensor2<T>,
) -> Result<(Tensor2<T>, Tensor2<T>, Tensor2<T>)> {
    if d_out.rows() != x.rows() || d_out.cols() != w.cols() || x.cols() != w.rows() {
        return Err(Error::ShapeMismatch {
            context: "linear_backward",
            left: x.shape(),
            right: d_out.shape(),
        });
    }
    let dx = d_out.matmul_transpose_other(w)?;
    let dw = x.matmul_transpose_self(d_out)?;
    let db = d_out.column_sum();
    Ok((dx, dw, db))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{assert_grads_close, central_diff};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_input_passes_bias() {
        let x = Tensor2::<f32>::zeros(2, 3);
        let w = Tensor2::from_fn(3, 2, |r, c| (r * 2 + c) as f32);
        let b = Tensor2::row_vector(vec![1.0f32, 2.0]);
        let out = linear_forward(&x, &w, &b).unwrap();
        for r in 0..2 {
            assert_eq!(out.row(r), &[1.0, 2.0]);
        }
    }

    #[test]
    fn identity_input_returns_weights() {
        let x = Tensor2::from_fn(2, 2, |r, c| if r == c { 1.0f64 } else { 0.0 });
        let w = Tensor2::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor2::zeros(1, 2);
        let out = linear_forward(&x, &w, &b).unwrap();
        assert_eq!(out.as_slice(), w.as_slice());
    }

    #[test]
    fn matches_triple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, a, m) in &[(3usize, 4usize, 2usize), (64, 64, 64), (17, 33, 5)] {
            let x = Tensor2::<f32>::from_fn(n, a, |_, _| rng.gen_range(-1.0..1.0));
            let w = Tensor2::<f32>::from_fn(a, m, |_, _| rng.gen_range(-1.0..1.0));
            let b = Tensor2::<f32>::from_fn(1, m, |_, _| rng.gen_range(-1.0..1.0));
            let out = linear_forward(&x, &w, &b).unwrap();
            // independent naive O(n³) oracle, f64 throughout
            for i in 0..n {
                for j in 0..m {
                    let mut acc = b.at(0, j) as f64;
                    for k in 0..a {
                        acc += x.at(i, k) as f64 * w.at(k, j) as f64;
                    }
                    assert!(
                        (out.at(i, j) as f64 - acc).abs() < 1e-6,
                        "({n}x{a}x{m}) at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_grads() {
        let x = Tensor2::<f32>::filled(3, 2, 0.7);
        let w = Tensor2::filled(2, 4, -0.3);
        let d_out = Tensor2::zeros(3, 4);
        let (dx, dw, db) = linear_backward(&x, &w, &d_out).unwrap();
        assert!(dx.as_slice().iter().all(|&v| v == 0.0));
        assert!(dw.as_slice().iter().all(|&v| v == 0.0));
        assert!(db.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_chain_rule_case() {
        let x = Tensor2::from_vec(1, 1, vec![2.0f64]).unwrap();
        let w = Tensor2::from_vec(1, 1, vec![3.0]).unwrap();
        let d_out = Tensor2::from_vec(1, 1, vec![1.0]).unwrap();
        let (dx, dw, db) = linear_backward(&x, &w, &d_out).unwrap();
        assert_eq!(dw.at(0, 0), 2.0);
        assert_eq!(dx.at(0, 0), 3.0);
        assert_eq!(db.at(0, 0), 1.0);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, a, m) = (4usize, 5usize, 3usize);
        let x = Tensor2::<f64>::from_fn(n, a, |_, _| rng.gen_range(-1.0..1.0));
        let w = Tensor2::<f64>::from_fn(a, m, |_, _| rng.gen_range(-1.0..1.0));
        let b = Tensor2::<f64>::from_fn(1, m, |_, _| rng.gen_range(-1.0..1.0));
        // scalarize with a fixed projection so the loss is a single number
        let proj = Tensor2::<f64>::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
        let loss = |x: &Tensor2<f64>, w: &Tensor2<f64>, b: &Tensor2<f64>| -> f64 {
            let out = linear_forward(x, w, b).unwrap();
            out.as_slice()
                .iter()
                .zip(proj.as_slice())
                .map(|(&o, &p)| o * p)
                .sum()
        };
        let (dx, dw, db) = linear_backward(&x, &w, &proj).unwrap();

        let num_dx = central_diff(x.as_slice(), 1e-3, |vals| {
            let xp = Tensor2::from_vec(n, a, vals.to_vec()).unwrap();
            loss(&xp, &w, &b)
        });
        assert_grads_close(dx.as_slice(), &num_dx, 1e-4, 1e-8);

        let num_dw = central_diff(w.as_slice(), 1e-3, |vals| {
            let wp = Tensor2::from_vec(a, m, vals.to_vec()).unwrap();
            loss(&x, &wp, &b)
        });
        assert_grads_close(dw.as_slice(), &num_dw, 1e-4, 1e-8);

        let num_db = central_diff(b.as_slice(), 1e-3, |vals| {
            let bp = Tensor2::from_vec(1, m, vals.to_vec()).unwrap();
            loss(&x, &w, &bp)
        });
        assert_grads_close(db.as_slice(), &num_db, 1e-4, 1e-8);
    }
}
