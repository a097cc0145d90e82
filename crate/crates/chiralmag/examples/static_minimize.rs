//! Minimizes the static energy from a tilted uniform magnetization under a
//! constant applied field, then prints the per-term energy breakdown and
//! the convergence trace tail.

use chiralmag::energy::TimeProfile;
use chiralmag::optimizer::{minimize_static, OptimizerConfig};
use chiralmag::{LoadSchedule, MaterialModel, State, Vec3};
use chiralmag::fields::{BoxFace, Grid};

fn main() {
    let grid = Grid::new(
        [0.0; 3],
        [1.0; 3],
        [4; 3],
        vec![BoxFace::ZMin],
        vec![BoxFace::ZMax],
    );
    let material = MaterialModel::default();
    let loads = LoadSchedule {
        field: Some(TimeProfile::constant(Vec3::new(0.0, 0.0, 0.8))),
        body: None,
        surface: None,
        t_end: 1.0,
    };
    let q0 = State::identity_with_constant_mu(grid, Vec3::new(1.0, 0.0, 1.0).normalize());
    let cfg = OptimizerConfig {
        max_outer_iters: 200,
        ..OptimizerConfig::default()
    };

    let res = minimize_static(0.0, &q0, &material, &loads, &cfg).unwrap();
    println!("converged after {} outer iterations", res.iterations);
    for r in res.log.iter().rev().take(3).rev() {
        println!(
            "  iter {:>4}  objective {:>12.8}  |g_mu| {:.3e}  |g_y| {:.3e}",
            r.iteration, r.objective, r.grad_norm_mu, r.grad_norm_y
        );
    }
    println!();
    let b = &res.breakdown;
    println!("elastic        {:>12.8}", b.elastic);
    println!("exchange       {:>12.8}", b.exchange);
    println!("dmi            {:>12.8}", b.dmi);
    println!("regularizer    {:>12.8}", b.regularizer);
    println!("load work      {:>12.8}", b.load_work);
    println!("total          {:>12.8}", b.total);
    println!();
    println!(
        "min quadrature determinant {:.6}",
        res.state.min_quadrature_det()
    );
}
