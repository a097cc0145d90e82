//! The dissipation distance `D(q, qhat) = || Z(q) - Z(qhat) ||_{L^1}` built
//! on the Lagrangean magnetization `Z = adj(grad y) . m o y`: rigid motions
//! of the deformed configuration cost nothing, while flipping the
//! magnetization costs twice the volume.

use chiralmag::dissipation::dissipation_distance;
use chiralmag::fields::{DeformationField, Grid, MagnetizationField};
use chiralmag::{State, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let grid = Grid::unit_cube(4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let q = State {
        y: DeformationField::from_map(&grid, |x| {
            x + 0.05
                * Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
        }),
        mu: MagnetizationField::constant(&grid, Vec3::z()),
        grid: grid.clone(),
    };

    let axis = nalgebra::Unit::new_normalize(Vec3::new(0.3, -0.8, 0.5));
    let rot = nalgebra::Rotation3::from_axis_angle(&axis, 1.2).into_inner();
    let shift = Vec3::new(0.4, -0.1, 2.0);
    let rotated = State {
        grid: grid.clone(),
        y: DeformationField {
            nodes: q.y.nodes.iter().map(|v| rot * v + shift).collect(),
        },
        mu: MagnetizationField {
            nodes: q.mu.nodes.iter().map(|v| rot * v).collect(),
        },
    };
    println!(
        "D(q, rigidly moved q) = {:.3e}  (rigid motions are dissipation-free)",
        dissipation_distance(&q, &rotated).unwrap()
    );

    let flipped = State {
        grid: grid.clone(),
        y: q.y.clone(),
        mu: MagnetizationField {
            nodes: q.mu.nodes.iter().map(|v| -v).collect(),
        },
    };
    println!(
        "D(q, flipped q)       = {:.6}  (about twice the deformed volume)",
        dissipation_distance(&q, &flipped).unwrap()
    );
}
