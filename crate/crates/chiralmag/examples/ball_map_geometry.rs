//! Geometric audit of the piecewise-smooth ball map
//! `y(x) = (x1, x2, |x1| x3)`, which folds the cube onto two wedges meeting
//! along a segment: topological degree inside and outside the image, the
//! two connected components of the deformed configuration, and the
//! Ciarlet-Necas checks for the ball map (injective) and for a wrap map
//! that overlaps itself.

use chiralmag::fixtures::{ball_map_state, wrap_state};
use chiralmag::geometry::{
    ciarlet_necas_check, deformed_configuration, topological_degree, EulerianGrid,
};
use chiralmag::Vec3;

fn main() {
    let q = ball_map_state(16);
    for xi in [
        Vec3::new(0.5, 0.0, 0.2),
        Vec3::new(-0.5, 0.3, -0.1),
        Vec3::new(0.5, 0.0, 0.9), // above the wedge: outside the image
    ] {
        let deg = topological_degree(&q.grid, &q.y, xi).unwrap();
        println!("degree at {:>18} = {deg}", format!("{:.2?}", (xi.x, xi.y, xi.z)));
    }

    let egrid = EulerianGrid::enclose(&q, 32);
    let dc = deformed_configuration(&q, &egrid);
    println!("connected components of the deformed configuration: {}", dc.component_count());

    let cn = ciarlet_necas_check(&q, &dc);
    println!(
        "ball map Ciarlet-Necas: lhs {:.4} <= rhs {:.4} -> {}",
        cn.lhs,
        cn.rhs,
        if cn.satisfied { "satisfied" } else { "violated" }
    );

    let wrap = wrap_state(16);
    let wdc = deformed_configuration(&wrap, &EulerianGrid::enclose(&wrap, 48));
    let wcn = ciarlet_necas_check(&wrap, &wdc);
    println!(
        "wrap map Ciarlet-Necas: lhs {:.4} vs rhs {:.4} (ratio {:.2}) -> {}",
        wcn.lhs,
        wcn.rhs,
        wcn.lhs / wcn.rhs,
        if wcn.satisfied { "satisfied" } else { "violated" }
    );
}
