//! Rate-independent dissipation: the Lagrangean magnetization
//! `Z(q) = adj(grad y) . (mu/|mu|)`, the dissipation distance
//! `D(q, qhat) = ||Z(q) - Z(qhat)||_{L^1(Omega)}`, and the trajectory
//! variation `Var_D`. The Lagrangean form makes rigid motions of the
//! deformed configuration dissipation-free.

use crate::fields::{FieldError, QuadratureRule, State};
use crate::kinematics::{adjugate, Vec3};

/// Per-quadrature-point pullback magnetization, cell-major ordering.
#[derive(Debug, Clone)]
pub struct LagrangeanMagnetization {
    pub values: Vec<Vec3>,
}

pub fn lagrangean_magnetization(q: &State) -> LagrangeanMagnetization {
    let quad = QuadratureRule::gauss2(&q.grid);
    let mut values = Vec::with_capacity(q.grid.num_cells() * quad.points.len());
    for cell in 0..q.grid.num_cells() {
        for &p in &quad.points {
            let e = q.eval(cell, p);
            values.push(adjugate(&e.f) * e.n);
        }
    }
    LagrangeanMagnetization { values }
}

/// `D(q, qhat)`: quadrature-weighted L^1 norm of the Z difference.
pub fn dissipation_distance(q: &State, qhat: &State) -> Result<f64, FieldError> {
    q.check_same_grid(qhat)?;
    let quad = QuadratureRule::gauss2(&q.grid);
    let z = lagrangean_magnetization(q);
    let zh = lagrangean_magnetization(qhat);
    Ok(quad.weight
        * z.values
            .iter()
            .zip(&zh.values)
            .map(|(a, b)| (a - b).norm())
            .sum::<f64>())
}

/// Huber-smoothed variant used inside the optimizer:
/// `sqrt(|dZ|^2 + eps^2) - eps` replaces `|dZ|`.
pub fn dissipation_distance_huber(
    q: &State,
    qhat: &State,
    eps: f64,
) -> Result<f64, FieldError> {
    q.check_same_grid(qhat)?;
    let quad = QuadratureRule::gauss2(&q.grid);
    let z = lagrangean_magnetization(q);
    let zh = lagrangean_magnetization(qhat);
    Ok(quad.weight
        * z.values
            .iter()
            .zip(&zh.values)
            .map(|(a, b)| ((a - b).norm_squared() + eps * eps).sqrt() - eps)
            .sum::<f64>())
}

/// `Var_D` over the inclusive index range: consecutive-sum of D, which
/// realizes the sup over partitions for a discrete trajectory.
pub fn trajectory_variation(
    states: &[State],
    range: (usize, usize),
) -> Result<f64, FieldError> {
    let (s, t) = range;
    assert!(!states.is_empty() && s <= t && t < states.len());
    let mut total = 0.0;
    for i in s..t {
        total += dissipation_distance(&states[i + 1], &states[i])?;
    }
    Ok(total)
}
