//! Pointwise 3x3 tensor calculus shared by all modules: cofactor, adjugate,
//! inverse identities and the Piola residual.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Mat3 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("non-positive determinant: det = {det}, gate = {gate}")]
    NonPositiveDeterminant { det: f64, gate: f64 },
}

/// Relative gate below which a determinant counts as non-positive.
pub const DET_GATE_REL: f64 = 1e-12;

/// Cofactor matrix by explicit minor expansion, defined for singular F too.
///
/// Convention: `(cof F)_ij = (-1)^{i+j} * minor_ij(F)`, so that
/// `F * adj F = det F * I` with `adj F = (cof F)^T`.
pub fn cofactor(f: &Mat3) -> Mat3 {
    let m = f;
    Mat3::new(
        m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)],
        m[(1, 2)] * m[(2, 0)] - m[(1, 0)] * m[(2, 2)],
        m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)],
        m[(0, 2)] * m[(2, 1)] - m[(0, 1)] * m[(2, 2)],
        m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)],
        m[(0, 1)] * m[(2, 0)] - m[(0, 0)] * m[(2, 1)],
        m[(0, 1)] * m[(1, 2)] - m[(0, 2)] * m[(1, 1)],
        m[(0, 2)] * m[(1, 0)] - m[(0, 0)] * m[(1, 2)],
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
    )
}

/// Adjugate: transpose of the cofactor matrix.
pub fn adjugate(f: &Mat3) -> Mat3 {
    cofactor(f).transpose()
}

pub fn determinant(f: &Mat3) -> f64 {
    f.determinant()
}

/// Checks the determinant gate `det F > 1e-12 * |F|^3`.
pub fn det_positive(f: &Mat3) -> Result<f64, KinematicsError> {
    let det = f.determinant();
    let gate = DET_GATE_REL * f.norm().powi(3);
    if det > gate {
        Ok(det)
    } else {
        Err(KinematicsError::NonPositiveDeterminant { det, gate })
    }
}

/// Inverse via `adj F / det F`; errors below the determinant gate.
pub fn inverse_gradient(f: &Mat3) -> Result<Mat3, KinematicsError> {
    let det = det_positive(f)?;
    Ok(adjugate(f) / det)
}

/// Identities for the inverse used by the inverse-regularity audit:
/// `adj(F^-1) = F / det F` and `det(F^-1) = 1 / det F`.
pub fn inverse_identities(f: &Mat3) -> Result<(Mat3, f64), KinematicsError> {
    let det = det_positive(f)?;
    Ok((f / det, 1.0 / det))
}

/// `curl` assembled from an Eulerian gradient G = grad m:
/// `curl_i = eps_{ijk} G_{kj}`.
pub fn curl_from_gradient(g: &Mat3) -> Vec3 {
    Vec3::new(
        g[(2, 1)] - g[(1, 2)],
        g[(0, 2)] - g[(2, 0)],
        g[(1, 0)] - g[(0, 1)],
    )
}

/// Quadrature approximation of the Piola identity residual
/// `int_Omega cof(grad y) : grad zeta dx` for a test field `zeta` vanishing
/// on the boundary, supplied through its gradient. Vanishes to quadrature
/// order for admissible deformations.
pub fn piola_residual(
    grid: &crate::fields::Grid,
    y: &crate::fields::DeformationField,
    grad_zeta: impl Fn(Vec3) -> Mat3,
) -> f64 {
    let quad = crate::fields::QuadratureRule::gauss2(grid);
    let mut total = 0.0;
    for cell in 0..grid.num_cells() {
        for &p in &quad.points {
            let f = y.gradient(grid, cell, p);
            let x = grid.point(cell, p);
            total += quad.weight * cofactor(&f).dot(&grad_zeta(x));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut impl Rng) -> Mat3 {
        Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0))
    }

    /// Random matrix biased toward det > 0 (identity plus perturbation).
    fn random_invertible(rng: &mut impl Rng) -> Mat3 {
        loop {
            let f = Mat3::identity() + 0.5 * random_matrix(rng);
            if f.determinant() > 0.1 {
                return f;
            }
        }
    }

    fn random_rotation(rng: &mut impl Rng) -> Mat3 {
        let axis = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize();
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
            .into_inner()
    }

    #[test]
    fn cofactor_identity() {
        assert_relative_eq!(cofactor(&Mat3::identity()), Mat3::identity());
    }

    #[test]
    fn cofactor_ball_map_sample() {
        // Gradient of y(x) = (x1, x2, |x1| x3) at x = (0.5, ., 0.2).
        let f = Mat3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.2, 0.0, 0.5);
        let expected = Mat3::new(0.5, 0.0, -0.2, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(cofactor(&f), expected, epsilon = 1e-15);
    }

    #[test]
    fn adjugate_satisfies_laplace_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let f = random_matrix(&mut rng);
            let lhs = f * adjugate(&f);
            let rhs = f.determinant() * Mat3::identity();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn inverse_gradient_identity_and_scaling() {
        assert_relative_eq!(inverse_gradient(&Mat3::identity()).unwrap(), Mat3::identity());
        let f = 2.0 * Mat3::identity();
        let finv = inverse_gradient(&f).unwrap();
        assert_relative_eq!(finv, 0.5 * Mat3::identity());
        assert_relative_eq!(finv.determinant(), 1.0 / 8.0, epsilon = 1e-14);
    }

    #[test]
    fn inverse_gradient_multiplication_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let f = random_invertible(&mut rng);
            let finv = inverse_gradient(&f).unwrap();
            assert_relative_eq!(f * finv, Mat3::identity(), epsilon = 1e-12);
        }
    }

    #[test]
    fn inverse_gradient_rejects_nonpositive_det() {
        let f = Mat3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(inverse_gradient(&f).is_err());
        assert!(inverse_gradient(&Mat3::zeros()).is_err());
    }

    #[test]
    fn inverse_identities_match_direct_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let f = random_invertible(&mut rng);
            let finv = inverse_gradient(&f).unwrap();
            let (adj_inv, det_inv) = inverse_identities(&f).unwrap();
            assert_relative_eq!(adjugate(&finv), adj_inv, epsilon = 1e-10);
            assert_relative_eq!(finv.determinant(), det_inv, epsilon = 1e-10);
        }
    }

    #[test]
    fn det_of_cofactor_is_det_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let f = random_matrix(&mut rng);
            assert_relative_eq!(
                cofactor(&f).determinant(),
                f.determinant().powi(2),
                epsilon = 1e-12,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn cofactor_rotation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let f = random_matrix(&mut rng);
            let r = random_rotation(&mut rng);
            assert_relative_eq!(cofactor(&(r * f)), r * cofactor(&f), epsilon = 1e-12);
        }
    }

    #[test]
    fn inverse_is_involutive() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let f = random_invertible(&mut rng);
            let ff = inverse_gradient(&inverse_gradient(&f).unwrap()).unwrap();
            assert_relative_eq!(ff, f, epsilon = 1e-10);
        }
    }

    #[test]
    fn piola_residual_affine() {
        use crate::fields::{DeformationField, Grid};
        let grid = Grid::unit_cube(3);
        let a = Mat3::new(1.1, 0.2, 0.0, -0.1, 0.9, 0.3, 0.0, 0.1, 1.2);
        let y = DeformationField::from_map(&grid, |x| a * x);
        // zeta_i = x(1-x) y(1-y) z(1-z), vanishing on the boundary
        let grad_zeta = |x: Vec3| {
            let b = |t: f64| t * (1.0 - t);
            let db = |t: f64| 1.0 - 2.0 * t;
            let g = Vec3::new(
                db(x.x) * b(x.y) * b(x.z),
                b(x.x) * db(x.y) * b(x.z),
                b(x.x) * b(x.y) * db(x.z),
            );
            Mat3::from_rows(&[g.transpose(), (2.0 * g).transpose(), (-g).transpose()])
        };
        assert!(piola_residual(&grid, &y, grad_zeta).abs() < 1e-12);
    }

    #[test]
    fn piola_residual_refines_at_second_order() {
        use crate::fields::{DeformationField, Grid};
        let smooth = |x: Vec3| {
            x + 0.15
                * Vec3::new(
                    (2.0 * x.y).sin() * x.z,
                    (1.5 * x.z).cos() * x.x,
                    (x.x + x.y).sin(),
                )
        };
        let grad_zeta = |x: Vec3| {
            let b = |t: f64| t * t * (1.0 - t) * (1.0 - t);
            let db = |t: f64| 2.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
            let g = Vec3::new(
                db(x.x) * b(x.y) * b(x.z),
                b(x.x) * db(x.y) * b(x.z),
                b(x.x) * b(x.y) * db(x.z),
            );
            Mat3::from_rows(&[
                (3.0 * g).transpose(),
                (g - 0.5 * g).transpose(),
                (2.0 * g).transpose(),
            ])
        };
        let res = |n: usize| {
            let grid = Grid::unit_cube(n);
            let y = DeformationField::from_map(&grid, smooth);
            piola_residual(&grid, &y, grad_zeta).abs()
        };
        let coarse = res(4);
        let fine = res(8);
        // observed order >= 2 means the residual drops by at least ~4x
        assert!(
            fine <= coarse / 3.5,
            "coarse = {coarse:.3e}, fine = {fine:.3e}"
        );
    }

    #[test]
    fn piola_residual_ball_map_off_the_crease() {
        use crate::fields::{BoxFace, DeformationField, Grid};
        // grid aligned so the plane x1 = 0 is a cell-face plane
        let grid = Grid::new(
            [-1.0; 3],
            [1.0; 3],
            [8; 3],
            vec![BoxFace::XMin, BoxFace::XMax],
            vec![],
        );
        let y = DeformationField::from_map(&grid, |x| Vec3::new(x.x, x.y, x.x.abs() * x.z));
        // test field supported in { x1 > 0.25 }, away from the crease
        let grad_zeta = |x: Vec3| {
            let phi = |t: f64| {
                if t > 0.25 && t < 1.0 {
                    ((t - 0.25) * (1.0 - t)).powi(2)
                } else {
                    0.0
                }
            };
            let dphi = |t: f64| {
                if t > 0.25 && t < 1.0 {
                    2.0 * ((t - 0.25) * (1.0 - t)) * (1.25 - 2.0 * t)
                } else {
                    0.0
                }
            };
            let psi = |t: f64| (1.0 - t * t).powi(2);
            let dpsi = |t: f64| -4.0 * t * (1.0 - t * t);
            let g = Vec3::new(
                dphi(x.x) * psi(x.y) * psi(x.z),
                phi(x.x) * dpsi(x.y) * psi(x.z),
                phi(x.x) * psi(x.y) * dpsi(x.z),
            );
            Mat3::from_rows(&[g.transpose(), g.transpose(), g.transpose()])
        };
        assert!(piola_residual(&grid, &y, grad_zeta).abs() < 1e-3);
    }

    #[test]
    fn curl_of_antisymmetric_gradient() {
        let g = Mat3::new(0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0);
        assert_relative_eq!(curl_from_gradient(&g), Vec3::new(2.0, 4.0, 6.0));
    }
}
