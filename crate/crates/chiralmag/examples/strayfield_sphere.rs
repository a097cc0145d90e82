//! Stray field of the uniformly magnetized unit ball, the classical
//! magnetostatic oracle: energy `mu0 (4 pi / 3) / 6` and interior field
//! `grad zeta = m / 3`.

use chiralmag::fixtures::magnetized_ball;
use chiralmag::strayfield::{magnetostatic_energy, solve_potential, weak_form_residual};
use chiralmag::MaterialModel;

fn main() {
    let m = MaterialModel::default();
    let oracle = m.mu0 * (4.0 * std::f64::consts::PI / 3.0) / 6.0;
    println!("analytic energy {oracle:.6}");
    for n in [32usize, 48, 64] {
        let (grid, source) = magnetized_ball(n);
        let pot = solve_potential(&grid, &source).unwrap();
        let energy = magnetostatic_energy(&pot, &m);
        println!(
            "n = {n:>3}: energy {energy:.6} (error {:+.2}%)",
            100.0 * (energy - oracle) / oracle
        );
    }

    let (grid, source) = magnetized_ball(64);
    let pot = solve_potential(&grid, &source).unwrap();
    let center = grid.index(grid.dims[0] / 2, grid.dims[1] / 2, grid.dims[2] / 2);
    let field = pot.grad_central[center];
    println!(
        "central field {:?} (analytic {:?})",
        (field.x, field.y, field.z),
        (0.0, 0.0, 1.0 / 3.0)
    );

    let phi: Vec<f64> = (0..grid.num_voxels())
        .map(|i| (i % 97) as f64 / 97.0 - 0.5)
        .collect();
    println!(
        "weak-form residual {:.3e}",
        weak_form_residual(&pot, &source, &phi)
    );
}
