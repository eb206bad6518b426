//! SO(2) and its Lie algebra so(2).
//!
//! Group elements are stored as 2×2 matrices so that trace-based costs and
//! left translations read as plain matrix algebra. Algebra elements are real
//! scalars `x` identified with the skew matrix `σ(x) = [[0, -x], [x, 0]]`.
//! Covectors in `so(2)*` share the same representation: under the pairing
//! `⟨η, v⟩ = ½ tr(ηᵀ v)` the dual of `σ` is `vex`.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::Matrix2;

use crate::error::{Error, Result};

/// Tolerance on `gᵀg = I` and `det g = 1` accepted by [`Rotation2::from_matrix`].
pub const ROTATION_TOL: f64 = 1e-12;

/// Orthogonality defect above which products are projected back onto SO(2).
pub const RENORMALIZE_THRESHOLD: f64 = 1e-10;

/// A scalar coordinate on so(2) (or its dual).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct AlgebraScalar(pub f64);

impl AlgebraScalar {
    pub fn value(self) -> f64 {
        self.0
    }

    /// `σ(x)`, the skew matrix representing this element.
    pub fn sigma(self) -> Matrix2<f64> {
        Matrix2::new(0.0, -self.0, self.0, 0.0)
    }

    /// `vex` of the skew part of `m`. Exact inverse of [`sigma`](Self::sigma)
    /// on skew matrices.
    pub fn vex(m: &Matrix2<f64>) -> Self {
        AlgebraScalar(0.5 * (m[(1, 0)] - m[(0, 1)]))
    }
}

impl From<f64> for AlgebraScalar {
    fn from(x: f64) -> Self {
        AlgebraScalar(x)
    }
}

/// An element of SO(2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation2 {
    m: Matrix2<f64>,
}

impl Rotation2 {
    pub fn identity() -> Self {
        Rotation2 {
            m: Matrix2::identity(),
        }
    }

    /// Wraps `m` after checking orthogonality and unit determinant.
    pub fn from_matrix(m: Matrix2<f64>) -> Result<Self> {
        let defect = orthogonality_defect(&m);
        let det = m.determinant();
        if defect > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::NotARotation { defect, det });
        }
        Ok(Rotation2 { m })
    }

    /// Wraps `m` without validation. Callers guarantee `m ∈ SO(2)`.
    pub(crate) fn from_matrix_unchecked(m: Matrix2<f64>) -> Self {
        Rotation2 { m }
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m[(0, 0)] + self.m[(1, 1)]
    }

    pub fn transpose(&self) -> Self {
        Rotation2 {
            m: self.m.transpose(),
        }
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    /// Principal angle in `(-π, π]`.
    pub fn angle(&self) -> f64 {
        log_so2(self)
    }

    /// Largest entry of `|gᵀg - I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        orthogonality_defect(&self.m)
    }

    /// Polar projection onto SO(2): normalise the first column and rebuild the
    /// second as its quarter-turn.
    pub fn renormalized(&self) -> Self {
        let (c, s) = (self.m[(0, 0)], self.m[(1, 0)]);
        let n = c.hypot(s);
        let (c, s) = (c / n, s / n);
        Rotation2 {
            m: Matrix2::new(c, -s, s, c),
        }
    }

    /// Renormalise only when drift exceeds [`RENORMALIZE_THRESHOLD`].
    pub fn renormalized_if_drifted(&self) -> Self {
        if self.orthogonality_defect() > RENORMALIZE_THRESHOLD {
            self.renormalized()
        } else {
            *self
        }
    }

    /// Left translation along the one-parameter subgroup `g exp(σ(x))`.
    pub fn perturbed(&self, x: f64) -> Self {
        *self * exp_so2(x)
    }
}

impl Mul for Rotation2 {
    type Output = Rotation2;

    fn mul(self, rhs: Rotation2) -> Rotation2 {
        Rotation2 { m: self.m * rhs.m }
    }
}

fn orthogonality_defect(m: &Matrix2<f64>) -> f64 {
    (m.transpose() * m - Matrix2::identity()).amax()
}

/// Matrix exponential of `σ(x)`.
pub fn exp_so2(x: f64) -> Rotation2 {
    let (s, c) = x.sin_cos();
    Rotation2 {
        m: Matrix2::new(c, -s, s, c),
    }
}

/// Inverse of [`exp_so2`] on the principal branch `(-π, π]`.
pub fn log_so2(g: &Rotation2) -> f64 {
    let theta = g.m[(1, 0)].atan2(g.m[(0, 0)]);
    if theta == -PI {
        PI
    } else {
        theta
    }
}

/// `⟨η, v⟩ = ½ tr(σ(η)ᵀ σ(v))`.
pub fn pairing(eta: AlgebraScalar, v: AlgebraScalar) -> f64 {
    0.5 * (eta.sigma().transpose() * v.sigma()).trace()
}

/// `Ad_g v = vex(g σ(v) g⁻¹)`. SO(2) is abelian, so this is `v`; the matrix
/// product is still formed and checked against that in debug builds.
pub fn adjoint_action(g: &Rotation2, v: AlgebraScalar) -> AlgebraScalar {
    let conj = g.m * v.sigma() * g.inverse().m;
    debug_assert!(
        (AlgebraScalar::vex(&conj).0 - v.0).abs() <= 1e-12 * (1.0 + v.0.abs()),
        "Ad on SO(2) must be the identity"
    );
    v
}

/// `2 - tr(g)`, equal to `4 sin²(θ/2)` for `g = exp(θ)`.
pub fn group_deviation_cost(g: &Rotation2) -> f64 {
    2.0 - g.trace()
}

/// `vex((gᵀ - g)/2)`, which equals `-sin θ` for `g = exp(θ)`.
pub fn skew_gradient(g: &Rotation2) -> AlgebraScalar {
    AlgebraScalar::vex(&((g.m.transpose() - g.m) * 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn exp_special_angles() {
        assert_eq!(*exp_so2(0.0).matrix(), Matrix2::identity());
        let half_turn = exp_so2(PI);
        assert_abs_diff_eq!(*half_turn.matrix(), -Matrix2::identity(), epsilon = 1e-15);
        let quarter = exp_so2(FRAC_PI_2);
        assert_abs_diff_eq!(
            *quarter.matrix(),
            Matrix2::new(0.0, -1.0, 1.0, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn log_examples() {
        assert_eq!(log_so2(&Rotation2::identity()), 0.0);
        let quarter = Rotation2::from_matrix(Matrix2::new(0.0, -1.0, 1.0, 0.0)).unwrap();
        assert_eq!(log_so2(&quarter), FRAC_PI_2);
        assert_abs_diff_eq!(log_so2(&exp_so2(0.3)), 0.3, epsilon = 1e-14);
    }

    #[test]
    fn log_cut_maps_to_plus_pi() {
        let m = Matrix2::new(-1.0, 0.0, -0.0, -1.0);
        let g = Rotation2::from_matrix(m).unwrap();
        assert_eq!(log_so2(&g), PI);
    }

    #[test]
    fn pairing_examples() {
        assert_eq!(pairing(1.0.into(), 1.0.into()), 1.0);
        assert_eq!(pairing(0.0.into(), 7.0.into()), 0.0);
        // ½ tr(σ(2)ᵀσ(3)) = ½ (6 + 6)
        assert_eq!(pairing(2.0.into(), 3.0.into()), 6.0);
    }

    #[test]
    fn adjoint_is_identity() {
        assert_eq!(adjoint_action(&Rotation2::identity(), 0.5.into()).0, 0.5);
        assert_eq!(adjoint_action(&exp_so2(PI / 3.0), 1.0.into()).0, 1.0);
        assert_eq!(adjoint_action(&exp_so2(-2.0), (-0.25).into()).0, -0.25);
    }

    #[test]
    fn deviation_cost_examples() {
        assert_eq!(group_deviation_cost(&Rotation2::identity()), 0.0);
        assert_abs_diff_eq!(group_deviation_cost(&exp_so2(PI)), 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(group_deviation_cost(&exp_so2(FRAC_PI_2)), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn from_matrix_rejects_reflections_and_scalings() {
        assert!(Rotation2::from_matrix(Matrix2::new(1.0, 0.0, 0.0, -1.0)).is_err());
        assert!(Rotation2::from_matrix(Matrix2::new(2.0, 0.0, 0.0, 0.5)).is_err());
    }

    #[test]
    fn renormalization_repairs_long_products() {
        let step = exp_so2(0.0123);
        let mut g = Rotation2::identity();
        let mut raw = Rotation2::identity();
        for _ in 0..100_000 {
            g = (g * step).renormalized_if_drifted();
            raw = raw * step;
        }
        assert!(g.orthogonality_defect() <= RENORMALIZE_THRESHOLD);
        assert!(raw.orthogonality_defect() >= g.orthogonality_defect());
    }

    proptest! {
        #[test]
        fn log_inverts_exp(x in -PI..PI) {
            prop_assert!((log_so2(&exp_so2(x)) - x).abs() <= 1e-12);
        }

        #[test]
        fn deviation_cost_bounds(theta in -10.0f64..10.0) {
            let c = group_deviation_cost(&exp_so2(theta));
            prop_assert!((0.0..=4.0).contains(&c));
            prop_assert!((c - 4.0 * (theta / 2.0).sin().powi(2)).abs() <= 1e-12);
        }

        #[test]
        fn pairing_is_scalar_product(a in -1e3f64..1e3, b in -1e3f64..1e3) {
            let p = pairing(a.into(), b.into());
            prop_assert!((p - a * b).abs() <= f64::EPSILON * (a * b).abs());
        }

        #[test]
        fn skew_gradient_is_minus_sine(theta in -PI..PI) {
            let g = exp_so2(theta);
            prop_assert!((skew_gradient(&g).0 + log_so2(&g).sin()).abs() <= 1e-12);
        }

        #[test]
        fn sigma_is_skew(x in -1e6f64..1e6) {
            let m = AlgebraScalar(x).sigma();
            prop_assert_eq!(m + m.transpose(), Matrix2::zeros());
            prop_assert_eq!(AlgebraScalar::vex(&m).0, x);
        }
    }
}
