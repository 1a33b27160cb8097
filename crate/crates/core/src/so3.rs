//! Finite-rotation kernels on SO(3).
//!
//! Rotations are stored as full 3×3 matrices. Incremental rotations are
//! material (body-attached) vectors composed on the right, `R ← R·exp(θ̃)`,
//! which is the composition rule the consistent linearization relies on.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Angles below this use Taylor expansions for the Rodrigues coefficients.
pub const SMALL_ANGLE: f64 = 1e-6;

/// Threshold for the series branch of the `(φ - sin φ)/φ³` family, whose
/// closed form cancels catastrophically well above `SMALL_ANGLE`.
const SERIES_ANGLE: f64 = 1e-2;

/// Skew-symmetric matrix such that `hat(v) * h == v.cross(&h)`.
#[inline]
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Axial vector of a skew-symmetric matrix.
///
/// Fails when the symmetric part exceeds `1e-10·‖A‖`.
pub fn axial(a: &Mat3) -> Result<Vec3> {
    let sym = a + a.transpose();
    let scale = a.norm();
    if sym.norm() > 1e-10 * scale {
        return Err(Error::InvalidArgument(format!(
            "axial() needs a skew-symmetric matrix; symmetric part has norm {:e}",
            sym.norm()
        )));
    }
    Ok(axial_unchecked(a))
}

/// Axial vector of the skew part of `a`, without the symmetry check.
#[inline]
pub fn axial_unchecked(a: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (a[(2, 1)] - a[(1, 2)]),
        0.5 * (a[(0, 2)] - a[(2, 0)]),
        0.5 * (a[(1, 0)] - a[(0, 1)]),
    )
}

/// `(1 - cos φ)/φ²`, evaluated without cancellation.
#[inline]
fn coeff_a(phi: f64) -> f64 {
    if phi < SMALL_ANGLE {
        let p2 = phi * phi;
        0.5 - p2 / 24.0 + p2 * p2 / 720.0
    } else {
        let s = (0.5 * phi).sin();
        2.0 * s * s / (phi * phi)
    }
}

/// `sin φ / φ`.
#[inline]
fn coeff_sinc(phi: f64) -> f64 {
    if phi < SMALL_ANGLE {
        let p2 = phi * phi;
        1.0 - p2 / 6.0 + p2 * p2 / 120.0
    } else {
        phi.sin() / phi
    }
}

/// `(φ - sin φ)/φ³`.
#[inline]
fn coeff_b(phi: f64) -> f64 {
    if phi < SERIES_ANGLE {
        let p2 = phi * phi;
        1.0 / 6.0 - p2 / 120.0 + p2 * p2 / 5040.0 - p2 * p2 * p2 / 362_880.0
    } else {
        (phi - phi.sin()) / (phi * phi * phi)
    }
}

/// `(da/dφ)/φ` for `a = (1 - cos φ)/φ²`.
#[inline]
fn coeff_da(phi: f64) -> f64 {
    if phi < SERIES_ANGLE {
        let p2 = phi * phi;
        -1.0 / 12.0 + p2 / 180.0 - p2 * p2 / 6720.0
    } else {
        (phi * phi.sin() - 2.0 * (1.0 - phi.cos())) / phi.powi(4)
    }
}

/// `(db/dφ)/φ` for `b = (φ - sin φ)/φ³`.
#[inline]
fn coeff_db(phi: f64) -> f64 {
    if phi < SERIES_ANGLE {
        let p2 = phi * phi;
        -1.0 / 60.0 + p2 / 1260.0 - p2 * p2 / 60_480.0
    } else {
        ((1.0 - phi.cos()) * phi - 3.0 * (phi - phi.sin())) / phi.powi(5)
    }
}

/// A proper orthogonal 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Wraps `m` after checking orthonormality and orientation to `tol`.
    pub fn from_matrix(m: Mat3, tol: f64) -> Result<Self> {
        let r = Self(m);
        let defect = r.orthonormality_defect();
        if defect > tol || (m.determinant() - 1.0).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "matrix is not a rotation (defect {defect:e}, det {})",
                m.determinant()
            )));
        }
        Ok(r)
    }

    /// Columns are the directors `d1, d2, d3`.
    pub fn from_columns(d1: &Vec3, d2: &Vec3, d3: &Vec3) -> Self {
        Self(Mat3::from_columns(&[*d1, *d2, *d3]))
    }

    /// Rotation by `angle` about the unit vector `axis`.
    pub fn about_axis(axis: &Vec3, angle: f64) -> Self {
        exp_so3(&(axis.normalize() * angle))
    }

    #[inline]
    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    #[inline]
    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    #[inline]
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }

    #[inline]
    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    #[inline]
    pub fn apply_transpose(&self, v: &Vec3) -> Vec3 {
        self.0.tr_mul(v)
    }

    #[inline]
    pub fn column(&self, i: usize) -> Vec3 {
        self.0.column(i).into_owned()
    }

    /// `‖RᵀR − I‖_F`.
    pub fn orthonormality_defect(&self) -> f64 {
        (self.0.tr_mul(&self.0) - Mat3::identity()).norm()
    }

    /// Closest rotation in the Frobenius sense (polar projection).
    pub fn reorthonormalized(&self) -> Rotation {
        let svd = self.0.svd(true, true);
        let u = svd.u.expect("svd u");
        let vt = svd.v_t.expect("svd v_t");
        let mut m = u * vt;
        if m.determinant() < 0.0 {
            let mut u2 = u;
            u2.column_mut(2).neg_mut();
            m = u2 * vt;
        }
        Rotation(m)
    }

    /// Projects back onto SO(3) only when drift exceeds `1e-10`.
    pub fn with_drift_correction(self) -> Rotation {
        if self.orthonormality_defect() > 1e-10 {
            log::debug!(
                "re-orthonormalizing rotation with defect {:e}",
                self.orthonormality_defect()
            );
            self.reorthonormalized()
        } else {
            self
        }
    }

    /// Rotation vector `φ` with `exp(φ̃) = R`, `‖φ‖ ≤ π`.
    pub fn log(&self) -> Vec3 {
        let m = &self.0;
        let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        // w = sin φ · axis
        let w = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5;
        let s = w.norm();
        let phi = s.atan2(c);
        if c > -0.9 {
            return w / coeff_sinc(phi);
        }
        // near π the axis comes from the symmetric part (1 − cos φ) a aᵀ
        let b = (m + m.transpose()) * 0.5 - Mat3::identity() * c;
        let k = (0..3).max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)])).unwrap_or(0);
        let mut a: Vec3 = b.column(k).into();
        a /= a.norm();
        if a.dot(&w) < 0.0 {
            a = -a;
        }
        a * phi
    }
}

/// Exponential map `so(3) → SO(3)` (Rodrigues formula).
pub fn exp_so3(theta: &Vec3) -> Rotation {
    let phi = theta.norm();
    let t = hat(theta);
    Rotation(Mat3::identity() + t * coeff_sinc(phi) + t * t * coeff_a(phi))
}

/// Right tangent operator `T(θ)` of the exponential map:
/// `axial(exp(−θ̃)·d/ds exp(θ̃)) = T(θ)·θ,s`.
pub fn dexp_right(theta: &Vec3) -> Mat3 {
    let phi = theta.norm();
    let t = hat(theta);
    Mat3::identity() - t * coeff_a(phi) + t * t * coeff_b(phi)
}

/// Directional derivative of `dexp_right` at `theta` along `v`.
pub fn dexp_right_derivative(theta: &Vec3, v: &Vec3) -> Mat3 {
    let phi = theta.norm();
    let t = hat(theta);
    let tv = hat(v);
    let dot = theta.dot(v);
    -t * (coeff_da(phi) * dot) - tv * coeff_a(phi)
        + t * t * (coeff_db(phi) * dot)
        + (tv * t + t * tv) * coeff_b(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn arb_vec(scale: f64) -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-scale..scale).prop_map(|a| Vec3::new(a[0], a[1], a[2]))
    }

    #[test]
    fn hat_examples() {
        assert_eq!(hat(&Vec3::zeros()), Mat3::zeros());
        let v = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(axial(&hat(&v)).unwrap(), v);
        assert_eq!(hat(&Vec3::z()) * Vec3::x(), Vec3::y());
        assert_eq!(hat(&v).transpose(), -hat(&v));
    }

    #[test]
    fn axial_examples() {
        assert_eq!(axial(&Mat3::zeros()).unwrap(), Vec3::zeros());
        let v = Vec3::new(-1.0, 0.0, 5.0);
        assert_eq!(axial(&hat(&v)).unwrap(), v);
        let sym = Mat3::new(1.0, 2.0, 0.0, 2.0, 3.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(axial(&sym), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn exp_examples() {
        assert_eq!(*exp_so3(&Vec3::zeros()).matrix(), Mat3::identity());
        let r = exp_so3(&Vec3::new(0.0, 0.0, 0.5 * PI));
        assert_relative_eq!(r.apply(&Vec3::x()), Vec3::y(), epsilon = 1e-15);
    }

    #[test]
    fn exp_small_angle_matches_series() {
        let dir = Vec3::new(0.3, -0.8, 0.52).normalize();
        let theta = dir * 1e-8;
        let t = hat(&theta);
        let series = Mat3::identity() + t + t * t * 0.5;
        let diff = (exp_so3(&theta).matrix() - series).amax();
        assert!(diff <= 1e-16, "diff {diff:e}");
    }

    #[test]
    fn dexp_examples() {
        assert_eq!(dexp_right(&Vec3::zeros()), Mat3::identity());
        let th = Vec3::new(0.4, -1.1, 2.0);
        assert_relative_eq!(dexp_right(&th) * th, th, epsilon = 1e-14);
    }

    /// Central-difference oracle: `axial(exp(−θ̃)(exp(θ̃(s+ε)) − exp(θ̃(s−ε)))/2ε)`.
    fn fd_tangent(theta: impl Fn(f64) -> Vec3, s: f64, eps: f64) -> Vec3 {
        let r = exp_so3(&theta(s));
        let dr = (exp_so3(&theta(s + eps)).matrix() - exp_so3(&theta(s - eps)).matrix())
            / (2.0 * eps);
        axial_unchecked(&(r.matrix().transpose() * dr))
    }

    #[test]
    fn dexp_matches_central_differences_with_slope_two() {
        let theta = |s: f64| Vec3::new(0.7 * s.sin(), 1.3 * s * s - 0.2, 0.5 * (2.0 * s).cos());
        let dtheta = |s: f64| Vec3::new(0.7 * s.cos(), 2.6 * s, -(2.0 * s).sin());
        let s = 0.37;
        let exact = dexp_right(&theta(s)) * dtheta(s);
        let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&e| (fd_tangent(theta, s, e) - exact).norm())
            .collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.1, "slope {slope}, errs {errs:?}");
        }
    }

    #[test]
    fn dexp_derivative_matches_finite_difference() {
        for theta in [Vec3::new(0.3, -0.2, 0.9), Vec3::new(1e-4, 2e-4, -1e-4), Vec3::zeros()] {
            let v = Vec3::new(-0.4, 0.25, 0.6);
            let eps = 1e-6;
            let fd = (dexp_right(&(theta + v * eps)) - dexp_right(&(theta - v * eps))) / (2.0 * eps);
            let an = dexp_right_derivative(&theta, &v);
            assert!((fd - an).amax() < 1e-9, "theta {theta:?}: {:e}", (fd - an).amax());
        }
    }

    #[test]
    fn log_near_identity_and_pi() {
        let tiny = exp_so3(&Vec3::new(1e-9, -2e-9, 3e-10));
        assert_relative_eq!(tiny.log(), Vec3::new(1e-9, -2e-9, 3e-10), epsilon = 1e-20);
        // rounding above the identity must not produce NaN
        let mut m = Mat3::identity();
        m[(0, 0)] += 1e-15;
        m[(1, 1)] += 1e-15;
        assert!(Rotation(m).log().iter().all(|v| v.is_finite()));
        let th = Vec3::new(0.3, -0.4, 0.5).normalize() * (PI - 1e-7);
        assert_relative_eq!(exp_so3(&th).log(), th, epsilon = 1e-8);
        let half = Vec3::new(0.0, 0.0, PI);
        assert_relative_eq!(exp_so3(&half).log().norm(), PI, epsilon = 1e-12);
    }

    #[test]
    fn log_inverts_exp() {
        let th = Vec3::new(0.2, -1.0, 0.7);
        assert_relative_eq!(exp_so3(&th).log(), th, epsilon = 1e-12);
    }

    #[test]
    fn reorthonormalization_fixes_drift() {
        let mut m = *exp_so3(&Vec3::new(0.1, 0.2, 0.3)).matrix();
        m[(0, 1)] += 1e-6;
        let r = Rotation(m).with_drift_correction();
        assert!(r.orthonormality_defect() < 1e-14);
        assert_relative_eq!(r.matrix().determinant(), 1.0, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn hat_axial_roundtrip(v in arb_vec(10.0)) {
            prop_assert_eq!(axial(&hat(&v)).unwrap(), v);
            let a = hat(&v);
            prop_assert_eq!(hat(&axial(&a).unwrap()), a);
        }

        #[test]
        fn exp_is_orthonormal(v in arb_vec(4.0 * PI / 3f64.sqrt())) {
            let r = exp_so3(&v);
            prop_assert!(r.orthonormality_defect() < 1e-12);
            prop_assert!((r.matrix().determinant() - 1.0).abs() < 1e-12);
            let inv = exp_so3(&(-v));
            prop_assert!((inv.matrix() - r.matrix().transpose()).amax() < 1e-14);
        }

        #[test]
        fn exp_is_two_pi_periodic(v in arb_vec(3.0)) {
            prop_assume!(v.norm() > 1e-3);
            let shifted = v + v.normalize() * (2.0 * PI);
            let diff = (exp_so3(&shifted).matrix() - exp_so3(&v).matrix()).amax();
            prop_assert!(diff < 1e-10);
        }
    }
}
