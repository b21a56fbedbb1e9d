//! 6d rotation representation, conversions, composition, and geodesic
//! distance.
//!
//! A rotation is encoded by the first two columns of its matrix (column
//! major, so the first three values are column a1). Decoding runs
//! Gram–Schmidt; canonical encodings produced by [`matrix_to_rot6d`] have
//! |a1| = 1 and a1 ⊥ a2.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerance below which Gram–Schmidt input counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// First two rotation-matrix columns, column major: [a1; a2].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot6d<T>(pub [T; 6]);

/// 3×3 rotation matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotMat<T>(pub [[T; 3]; 3]);

pub type Vec3<T> = [T; 3];

pub fn dot3<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> f64 {
    a[0].to_f64() * b[0].to_f64() + a[1].to_f64() * b[1].to_f64() + a[2].to_f64() * b[2].to_f64()
}

pub fn cross3<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm3<T: Scalar>(a: &Vec3<T>) -> f64 {
    dot3(a, a).sqrt()
}

pub fn add3<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale3<T: Scalar>(a: &Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

impl<T: Scalar> RotMat<T> {
    pub fn identity() -> Self {
        let o = T::one();
        let z = T::zero();
        RotMat([[o, z, z], [z, o, z], [z, z, o]])
    }

    pub fn column(&self, c: usize) -> Vec3<T> {
        [self.0[0][c], self.0[1][c], self.0[2][c]]
    }

    /// R · v
    pub fn apply(&self, v: &Vec3<T>) -> Vec3<T> {
        let mut out = [T::zero(); 3];
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.0[r][0] * v[0] + self.0[r][1] * v[1] + self.0[r][2] * v[2];
        }
        out
    }

    /// Rᵀ · v
    pub fn apply_transpose(&self, v: &Vec3<T>) -> Vec3<T> {
        let mut out = [T::zero(); 3];
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.0[0][c] * v[0] + self.0[1][c] * v[1] + self.0[2][c] * v[2];
        }
        out
    }

    /// self · other
    pub fn compose(&self, other: &Self) -> Self {
        let mut out = [[T::zero(); 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                let mut acc = 0f64;
                for k in 0..3 {
                    acc += self.0[r][k].to_f64() * other.0[k][c].to_f64();
                }
                out[r][c] = T::from_f64(acc);
            }
        }
        RotMat(out)
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        RotMat([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0].to_f64() + self.0[1][1].to_f64() + self.0[2][2].to_f64()
    }

    /// RᵀR = I and det = +1 within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let rt_r = self.transpose().compose(self);
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == c { 1.0 } else { 0.0 };
                if (rt_r.0[r][c].to_f64() - want).abs() > tol {
                    return false;
                }
            }
        }
        let m = &self.0;
        let det = m[0][0].to_f64()
            * (m[1][1].to_f64() * m[2][2].to_f64() - m[1][2].to_f64() * m[2][1].to_f64())
            - m[0][1].to_f64()
                * (m[1][0].to_f64() * m[2][2].to_f64() - m[1][2].to_f64() * m[2][0].to_f64())
            + m[0][2].to_f64()
                * (m[1][0].to_f64() * m[2][1].to_f64() - m[1][1].to_f64() * m[2][0].to_f64());
        (det - 1.0).abs() <= tol
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0f64;
        for r in 0..3 {
            for c in 0..3 {
                worst = worst.max((self.0[r][c].to_f64() - other.0[r][c].to_f64()).abs());
            }
        }
        worst
    }
}

impl<T: Scalar> Rot6d<T> {
    pub fn identity() -> Self {
        let o = T::one();
        let z = T::zero();
        Rot6d([o, z, z, z, o, z])
    }

    pub fn a1(&self) -> Vec3<T> {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn a2(&self) -> Vec3<T> {
        [self.0[3], self.0[4], self.0[5]]
    }
}

/// Gram–Schmidt decode: b1 = a1/|a1|, b2 = normalize(a2 − (b1·a2)b1),
/// b3 = b1 × b2; columns [b1 b2 b3].
pub fn rot6d_to_matrix<T: Scalar>(r: &Rot6d<T>) -> Result<RotMat<T>> {
    let a1 = r.a1();
    let a2 = r.a2();
    let n1 = norm3(&a1);
    if n1 < DEGENERACY_TOL {
        return Err(Error::DegenerateRotation { index: 0 });
    }
    let b1 = scale3(&a1, T::from_f64(1.0 / n1));
    let proj = dot3(&b1, &a2);
    let v = sub3(&a2, &scale3(&b1, T::from_f64(proj)));
    let n2 = norm3(&v);
    if n2 < DEGENERACY_TOL {
        return Err(Error::DegenerateRotation { index: 0 });
    }
    let b2 = scale3(&v, T::from_f64(1.0 / n2));
    let b3 = cross3(&b1, &b2);
    Ok(RotMat([
        [b1[0], b2[0], b3[0]],
        [b1[1], b2[1], b3[1]],
        [b1[2], b2[2], b3[2]],
    ]))
}

/// Returns the first two columns; inverse of [`rot6d_to_matrix`] on valid
/// rotation matrices.
pub fn matrix_to_rot6d<T: Scalar>(m: &RotMat<T>) -> Rot6d<T> {
    let c0 = m.column(0);
    let c1 = m.column(1);
    Rot6d([c0[0], c0[1], c0[2], c1[0], c1[1], c1[2]])
}

/// Gradient of a scalar loss through the Gram–Schmidt decode.
///
/// `d_mat` holds dL/dR; the return value is dL/d(a1,a2). Used by the
/// training path when geometric losses backpropagate through forward
/// kinematics into the 6d outputs.
pub fn rot6d_to_matrix_backward<T: Scalar>(r: &Rot6d<T>, d_mat: &RotMat<T>) -> Result<Rot6d<T>> {
    let a1: [f64; 3] = [r.0[0].to_f64(), r.0[1].to_f64(), r.0[2].to_f64()];
    let a2: [f64; 3] = [r.0[3].to_f64(), r.0[4].to_f64(), r.0[5].to_f64()];
    let n1 = norm3(&a1);
    if n1 < DEGENERACY_TOL {
        return Err(Error::DegenerateRotation { index: 0 });
    }
    let b1 = scale3(&a1, 1.0 / n1);
    let proj = dot3(&b1, &a2);
    let v = sub3(&a2, &scale3(&b1, proj));
    let n2 = norm3(&v);
    if n2 < DEGENERACY_TOL {
        return Err(Error::DegenerateRotation { index: 0 });
    }
    let b2 = scale3(&v, 1.0 / n2);

    // upstream gradients per column
    let g1: [f64; 3] = [
        d_mat.0[0][0].to_f64(),
        d_mat.0[1][0].to_f64(),
        d_mat.0[2][0].to_f64(),
    ];
    let g2: [f64; 3] = [
        d_mat.0[0][1].to_f64(),
        d_mat.0[1][1].to_f64(),
        d_mat.0[2][1].to_f64(),
    ];
    let g3: [f64; 3] = [
        d_mat.0[0][2].to_f64(),
        d_mat.0[1][2].to_f64(),
        d_mat.0[2][2].to_f64(),
    ];

    // b3 = b1 × b2: dL/db1 += b2 × g3, dL/db2 += g3 × b1
    let mut gb1 = add3(&g1, &cross3(&b2, &g3));
    let gb2 = add3(&g2, &cross3(&g3, &b1));

    // b2 = v/|v|: dL/dv = (gb2 − (gb2·b2) b2)/|v|
    let gb2_dot_b2 = dot3(&gb2, &b2);
    let gv = scale3(&sub3(&gb2, &scale3(&b2, gb2_dot_b2)), 1.0 / n2);

    // v = a2 − (b1·a2) b1:
    //   dL/da2 += gv − b1 (b1·gv)
    //   dL/db1 += −(gv·b1) a2 − (b1·a2) gv
    let gv_dot_b1 = dot3(&gv, &b1);
    let ga2 = sub3(&gv, &scale3(&b1, gv_dot_b1));
    gb1 = add3(
        &gb1,
        &add3(&scale3(&a2, -gv_dot_b1), &scale3(&gv, -proj)),
    );

    // b1 = a1/|a1|: dL/da1 = (gb1 − (gb1·b1) b1)/|a1|
    let gb1_dot_b1 = dot3(&gb1, &b1);
    let ga1 = scale3(&sub3(&gb1, &scale3(&b1, gb1_dot_b1)), 1.0 / n1);

    Ok(Rot6d([
        T::from_f64(ga1[0]),
        T::from_f64(ga1[1]),
        T::from_f64(ga1[2]),
        T::from_f64(ga2[0]),
        T::from_f64(ga2[1]),
        T::from_f64(ga2[2]),
    ]))
}

/// Rodrigues formula. The axis must be unit length within 1e-6.
pub fn axisangle_to_matrix<T: Scalar>(axis: &Vec3<T>, angle: f64) -> Result<RotMat<T>> {
    let n = norm3(axis);
    if (n - 1.0).abs() > 1e-6 {
        return Err(Error::NonUnitAxis { norm: n });
    }
    let (x, y, z) = (axis[0].to_f64(), axis[1].to_f64(), axis[2].to_f64());
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    let m = [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ];
    Ok(RotMat(m.map(|row| row.map(T::from_f64))))
}

/// Geodesic distance arccos((trace(RaᵀRb) − 1)/2) in degrees, with the
/// argument clamped to [−1, 1].
pub fn geodesic_deg<T: Scalar>(ra: &RotMat<T>, rb: &RotMat<T>) -> f64 {
    let t = ra.transpose().compose(rb).trace();
    let arg = ((t - 1.0) / 2.0).clamp(-1.0, 1.0);
    arg.acos().to_degrees()
}

/// Frame-to-frame rotation delta R_prevᵀ · R_cur.
pub fn frame_delta<T: Scalar>(r_prev: &RotMat<T>, r_cur: &RotMat<T>) -> RotMat<T> {
    r_prev.transpose().compose(r_cur)
}
