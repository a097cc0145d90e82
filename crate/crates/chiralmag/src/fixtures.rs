//! Canonical named states used throughout the tests, examples and check
//! suites: the identity state, the optimal helix, the piecewise-smooth
//! "ball map" folding the cube onto two wedges, a self-overlapping wrap
//! that violates the Ciarlet-Necas condition, and a uniformly magnetized
//! ball rasterized on an Eulerian grid.

use crate::energy::MaterialModel;
use crate::fields::{BoxFace, DeformationField, Grid, MagnetizationField, State};
use crate::geometry::EulerianGrid;
use crate::kinematics::{Mat3, Vec3};
use crate::strayfield::ball_source;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
}

pub const FIXTURE_NAMES: [&str; 4] = ["identity", "helix", "ball_map", "wrap_3pi"];

/// Builds the named fixture state at resolution `n` per axis.
pub fn build(name: &str, n: usize) -> Result<State, FixtureError> {
    match name {
        "identity" => Ok(identity_state(n)),
        "helix" => {
            let m = MaterialModel::default();
            Ok(helix_state(n, m.kappa / (2.0 * m.alpha)))
        }
        "ball_map" => Ok(ball_map_state(n)),
        "wrap_3pi" => Ok(wrap_state(n)),
        other => Err(FixtureError::UnknownFixture(other.to_string())),
    }
}

/// Identity deformation with constant magnetization on the unit cube,
/// pinned on the bottom face.
pub fn identity_state(n: usize) -> State {
    let grid = Grid::new(
        [0.0; 3],
        [1.0; 3],
        [n; 3],
        vec![BoxFace::ZMin],
        vec![BoxFace::ZMax],
    );
    State::identity_with_constant_mu(grid, Vec3::z())
}

/// Identity deformation with the helical magnetization of frequency
/// `omega` winding about the z axis.
pub fn helix_state(n: usize, omega: f64) -> State {
    let grid = Grid::new(
        [0.0; 3],
        [1.0; 3],
        [n; 3],
        vec![BoxFace::ZMin],
        vec![BoxFace::ZMax],
    );
    State {
        y: DeformationField::identity(&grid),
        mu: MagnetizationField::from_map(&grid, |x| {
            Vec3::new((omega * x.z).cos(), (omega * x.z).sin(), 0.0)
        })
        .expect("helix directions are unit"),
        grid,
    }
}

/// The ball map `y(x) = (x1, x2, |x1| x3)` on `(-1,1)^3`.
pub fn ball_map(x: Vec3) -> Vec3 {
    Vec3::new(x.x, x.y, x.x.abs() * x.z)
}

/// Closed-form gradient of the ball map away from `x1 = 0`.
pub fn ball_map_gradient(x: Vec3) -> Mat3 {
    let s = x.x.signum();
    Mat3::new(
        1.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, //
        s * x.z, 0.0, x.x.abs(),
    )
}

/// Closed-form cofactor of the ball-map gradient.
pub fn ball_map_cofactor(x: Vec3) -> Mat3 {
    crate::kinematics::cofactor(&ball_map_gradient(x))
}

/// Ball-map state on `(-1,1)^3`. The resolution must be even so the plane
/// `x1 = 0`, across which the map is only piecewise smooth, is a cell-face
/// plane and the per-cell trilinear interpolation is exact on each side.
pub fn ball_map_state(n: usize) -> State {
    assert!(n % 2 == 0, "ball_map needs an even resolution");
    let grid = Grid::new(
        [-1.0; 3],
        [1.0; 3],
        [n; 3],
        vec![BoxFace::XMin, BoxFace::XMax],
        vec![],
    );
    State {
        y: DeformationField::from_map(&grid, ball_map),
        mu: MagnetizationField::constant(&grid, Vec3::z()),
        grid,
    }
}

/// Self-overlapping wrap on the unit cube: winding `x2` through an angle
/// of `3 pi` makes the image overlap itself, so `int det grad y = 4.5 pi`
/// exceeds the covered volume `3 pi`.
pub fn wrap_map(x: Vec3) -> Vec3 {
    let theta = 3.0 * PI * x.y;
    Vec3::new((1.0 + x.x) * theta.cos(), (1.0 + x.x) * theta.sin(), x.z)
}

pub fn wrap_state(n: usize) -> State {
    let grid = Grid::unit_cube(n);
    State {
        y: DeformationField::from_map(&grid, wrap_map),
        mu: MagnetizationField::constant(&grid, Vec3::z()),
        grid,
    }
}

/// Uniformly magnetized unit ball rasterized on a centered cubic Eulerian
/// grid of half-width 2 (the analytic stray-field oracle's geometry).
pub fn magnetized_ball(n: usize) -> (EulerianGrid, Vec<Vec3>) {
    let grid = EulerianGrid {
        box_min: [-2.0; 3],
        box_max: [2.0; 3],
        dims: [n; 3],
    };
    let source = ball_source(&grid, Vec3::zeros(), 1.0, Vec3::z());
    (grid, source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{dmi_energy, elastic_energy, exchange_energy, load_work, LoadSchedule};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unknown_name_is_rejected() {
        assert!(matches!(
            build("squircle", 4),
            Err(FixtureError::UnknownFixture(_))
        ));
        for name in FIXTURE_NAMES {
            build(name, 4).unwrap();
        }
    }

    #[test]
    fn identity_energies_vanish() {
        let q = build("identity", 4).unwrap();
        let m = MaterialModel::default();
        assert!(q.min_quadrature_det() > 0.0);
        // only the magnetoelastic offset b |cof F . lambda|^2 = b vol survives
        assert_relative_eq!(
            elastic_energy(&q, &m).unwrap(),
            m.b * q.grid.volume(),
            epsilon = 1e-12
        );
        assert_relative_eq!(exchange_energy(&q, &m).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(dmi_energy(&q, &m).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(
            load_work(0.3, &q, &LoadSchedule::zero(1.0)),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn helix_fixture_hits_the_optimal_energy() {
        let m = MaterialModel::default();
        let q = build("helix", 12).unwrap();
        let magnetic = exchange_energy(&q, &m).unwrap() + dmi_energy(&q, &m).unwrap();
        let oracle = -m.kappa * m.kappa / (4.0 * m.alpha) * q.grid.volume();
        assert_relative_eq!(magnetic, oracle, max_relative = 0.05);
    }

    #[test]
    fn ball_map_cofactor_matches_interpolant() {
        let q = ball_map_state(16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let quad = crate::fields::QuadratureRule::gauss2(&q.grid);
        for _ in 0..50 {
            let cell = rng.gen_range(0..q.grid.num_cells());
            let p = quad.points[rng.gen_range(0..8)];
            let e = q.eval(cell, p);
            let x = q.grid.point(cell, p);
            let diff = (crate::kinematics::cofactor(&e.f) - ball_map_cofactor(x)).norm();
            assert!(diff < 1e-10, "cell {cell}: |cof - oracle| = {diff}");
        }
    }

    #[test]
    #[should_panic]
    fn ball_map_rejects_odd_resolution() {
        ball_map_state(15);
    }

    #[test]
    fn magnetized_ball_volume_fraction() {
        let (grid, source) = magnetized_ball(48);
        let covered: f64 = source.iter().map(|s| s.norm()).sum::<f64>() * grid.voxel_volume();
        assert_relative_eq!(covered, 4.0 * PI / 3.0, max_relative = 0.02);
    }
}
