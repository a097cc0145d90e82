//! Analytic gradients of the (optionally Huber-smoothed) objective
//! `elastic + exchange + DMI + TV_huber + D_huber - load work` with respect
//! to the nodal deformation and magnetization. The nonsmooth terms (the L^1
//! dissipation distance and the cofactor TV) enter through their Huber
//! regularizations; everything else is exact matrix calculus:
//!
//! * `d det F = cof F : dF`
//! * `d cof F = det F (tr(F^{-1} dF) F^{-T} - F^{-T} dF^T F^{-T})`
//! * `d F^{-1} = -F^{-1} dF F^{-1}`
//! * `d n = (I - n n^T) dv / |v|` with all second-order couplings of
//!   `grad n = (I - n n^T) grad v / |v|` carried through the adjoint.

use crate::dissipation::lagrangean_magnetization;
use crate::energy::{EnergyError, LoadSchedule, MaterialModel};
use crate::fields::{boundary_quadrature, PointEval, QuadratureRule, State};
use crate::kinematics::{cofactor, curl_from_gradient, det_positive, inverse_gradient, Mat3, Vec3};
use rayon::prelude::*;

/// Euclidean nodal gradients; `mu` is unprojected (the optimizer applies
/// the tangent-space projection), `y` has Dirichlet nodes zeroed.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub y: Vec<Vec3>,
    pub mu: Vec<Vec3>,
}

impl Gradient {
    pub fn zeros(n_nodes: usize) -> Self {
        Gradient {
            y: vec![Vec3::zeros(); n_nodes],
            mu: vec![Vec3::zeros(); n_nodes],
        }
    }

    pub fn norm(&self) -> f64 {
        self.y
            .iter()
            .chain(self.mu.iter())
            .map(|v| v.norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

/// What the optimizer minimizes at a fixed time.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    pub material: &'a MaterialModel,
    pub loads: &'a LoadSchedule,
    pub t: f64,
    /// Include the cofactor TV regularizer (Huber-smoothed with `eps_tv`).
    pub include_tv: bool,
    pub eps_tv: f64,
    /// Penalize distance to a previous state (Huber-smoothed with `eps_d`).
    pub dissipation_from: Option<&'a State>,
    pub eps_d: f64,
}

impl<'a> Objective<'a> {
    pub fn static_energy(material: &'a MaterialModel, loads: &'a LoadSchedule, t: f64) -> Self {
        Objective {
            material,
            loads,
            t,
            include_tv: true,
            eps_tv: 1e-3,
            dissipation_from: None,
            eps_d: 1e-4,
        }
    }
}

/// Huber-smoothed isotropic TV of the cell-centered cofactor field.
pub fn tv_regularizer_huber(q: &State, eps: f64) -> f64 {
    let grid = &q.grid;
    let cof = crate::energy::cell_cofactors(grid, &q.y);
    let h = grid.spacing();
    let cellvol = grid.cell_volume();
    let [nx, ny, nz] = grid.dims;
    let mut total = 0.0;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let c = grid.cell_index(i, j, k);
                let mut sq = 0.0;
                if i + 1 < nx {
                    sq += ((cof[grid.cell_index(i + 1, j, k)] - cof[c]) / h[0]).norm_squared();
                }
                if j + 1 < ny {
                    sq += ((cof[grid.cell_index(i, j + 1, k)] - cof[c]) / h[1]).norm_squared();
                }
                if k + 1 < nz {
                    sq += ((cof[grid.cell_index(i, j, k + 1)] - cof[c]) / h[2]).norm_squared();
                }
                total += cellvol * ((sq + eps * eps).sqrt() - eps);
            }
        }
    }
    total
}

/// Adjoint of the cofactor differential: returns `X` with
/// `X : dF = M : d(cof F)`.
fn cof_chain(f: &Mat3, finv: &Mat3, det: f64, m: &Mat3) -> Mat3 {
    let _ = f;
    let fit = finv.transpose();
    det * (m.dot(&fit) * fit - fit * m.transpose() * fit)
}

struct PointGradient {
    value: f64,
    /// dW/dF at the point (chain with shape gradients for nodal y).
    wrt_f: Mat3,
    /// dW/dv (raw magnetization interpolant).
    wrt_v: Vec3,
    /// dW/d(grad v).
    wrt_grad_v: Mat3,
}

/// Smooth volumetric densities (elastic + exchange + DMI + field load +
/// Huber-D) and their point adjoints.
fn point_density(
    e: &PointEval,
    m: &MaterialModel,
    h_field: Vec3,
    z_prev: Option<(Vec3, f64)>,
) -> Result<PointGradient, EnergyError> {
    let det = det_positive(&e.f).map_err(|_| EnergyError::NonPositiveDeterminant {
        cell: usize::MAX,
    })?;
    let finv = inverse_gradient(&e.f).unwrap();
    let fit = finv.transpose();
    let cof = cofactor(&e.f);
    let r = e.v.norm();
    let n = e.n;
    let proj = Mat3::identity() - n * n.transpose();
    let g = e.grad_n * finv;

    let mut value = 0.0;
    let mut wrt_f = Mat3::zeros();
    let mut wrt_v = Vec3::zeros();
    let mut wrt_grad_v = Mat3::zeros();
    // adjoint accumulator for the grad_n dependence
    let mut wrt_grad_n = Mat3::zeros();
    // adjoint accumulator for the direct n dependence
    let mut wrt_n = Vec3::zeros();

    // elastic: a(|F|^p - 3^{p/2}) + gamma(det) + b |cof F . n|^2
    let fnorm = e.f.norm();
    value += m.a * (fnorm.powf(m.p) - 3.0f64.powf(m.p / 2.0)) + m.gamma(det);
    wrt_f += m.a * m.p * fnorm.powf(m.p - 2.0) * e.f + m.gamma_prime(det) * cof;
    let u = cof * n;
    value += m.b * u.norm_squared();
    wrt_f += cof_chain(&e.f, &finv, det, &(2.0 * m.b * u * n.transpose()));
    wrt_n += 2.0 * m.b * cof.transpose() * u;

    // exchange: alpha |G|^2 det
    value += m.alpha * g.norm_squared() * det;
    wrt_f += m.alpha
        * det
        * ((g.norm_squared() * Mat3::identity() - 2.0 * g.transpose() * g) * fit);
    wrt_grad_n += 2.0 * m.alpha * det * g * fit;

    // dmi: kappa (curl G . n) det
    let curl = curl_from_gradient(&g);
    let cross_n = Mat3::new(0.0, -n.z, n.y, n.z, 0.0, -n.x, -n.y, n.x, 0.0);
    value += m.kappa * curl.dot(&n) * det;
    wrt_f += m.kappa * det * ((curl.dot(&n) * Mat3::identity() - g.transpose() * cross_n) * fit);
    wrt_grad_n += m.kappa * det * cross_n * fit;
    wrt_n += m.kappa * det * curl;

    // applied Eulerian field enters the objective as -h . n det
    if h_field != Vec3::zeros() {
        value -= h_field.dot(&n) * det;
        wrt_f -= h_field.dot(&n) * det * fit;
        wrt_n -= det * h_field;
    }

    // Huber dissipation density: sqrt(|Z - Z_prev|^2 + eps^2) - eps,
    // Z = adj F . n = cof F^T . n
    if let Some((zp, eps)) = z_prev {
        let z = cof.transpose() * n;
        let dz = z - zp;
        let root = (dz.norm_squared() + eps * eps).sqrt();
        value += root - eps;
        let ud = dz / root;
        wrt_f += cof_chain(&e.f, &finv, det, &(n * ud.transpose()));
        wrt_n += cof * ud;
    }

    // pull the grad_n and n adjoints back to (v, grad_v):
    // d grad_n = [-(P dv)(grad_v^T n)^T - n (dv^T grad_n) - grad_n (n^T dv)]/r
    //            + P d(grad_v)/r
    let w = e.grad_v.transpose() * n;
    wrt_v += -(proj * wrt_grad_n * w) / (r * r);
    wrt_v += -(e.grad_n * wrt_grad_n.transpose() * n) / r;
    wrt_v += -(wrt_grad_n.dot(&e.grad_n)) * n / r;
    wrt_grad_v += proj * wrt_grad_n / r;
    // d n = P dv / r
    wrt_v += proj * wrt_n / r;

    Ok(PointGradient {
        value,
        wrt_f,
        wrt_v,
        wrt_grad_v,
    })
}

/// Objective value with the Huber-smoothed nonsmooth terms.
pub fn objective_value(q: &State, obj: &Objective) -> Result<f64, EnergyError> {
    Ok(objective_gradient_impl(q, obj, false)?.0)
}

/// Objective value and its Euclidean nodal gradient.
pub fn objective_gradient(q: &State, obj: &Objective) -> Result<(f64, Gradient), EnergyError> {
    let (v, g) = objective_gradient_impl(q, obj, true)?;
    Ok((v, g.expect("gradient requested")))
}

fn objective_gradient_impl(
    q: &State,
    obj: &Objective,
    with_gradient: bool,
) -> Result<(f64, Option<Gradient>), EnergyError> {
    let grid = &q.grid;
    let quad = QuadratureRule::gauss2(grid);
    let m = obj.material;
    let h_field = obj
        .loads
        .field
        .as_ref()
        .map(|p| p.value(obj.t))
        .unwrap_or_else(Vec3::zeros);
    let z_prev = obj.dissipation_from.map(lagrangean_magnetization);

    // volumetric terms, parallel over cells with a deterministic scatter
    let per_cell: Vec<Result<(f64, [Vec3; 8], [Vec3; 8]), EnergyError>> = (0..grid.num_cells())
        .into_par_iter()
        .map(|cell| {
            let mut val = 0.0;
            let mut gy = [Vec3::zeros(); 8];
            let mut gmu = [Vec3::zeros(); 8];
            for (pi, &p) in quad.points.iter().enumerate() {
                let e = q.eval(cell, p);
                let zp = z_prev
                    .as_ref()
                    .map(|z| (z.values[cell * quad.points.len() + pi], obj.eps_d));
                let pg = point_density(&e, m, h_field, zp).map_err(|err| match err {
                    EnergyError::NonPositiveDeterminant { .. } => {
                        EnergyError::NonPositiveDeterminant { cell }
                    }
                    other => other,
                })?;
                val += quad.weight * pg.value;
                if with_gradient {
                    for i in 0..8 {
                        gy[i] += quad.weight * pg.wrt_f * e.shape_grad[i];
                        gmu[i] += quad.weight
                            * (pg.wrt_v * e.shape[i] + pg.wrt_grad_v * e.shape_grad[i]);
                    }
                }
            }
            Ok((val, gy, gmu))
        })
        .collect();

    let mut value = 0.0;
    let mut grad = with_gradient.then(|| Gradient::zeros(grid.num_nodes()));
    for (cell, res) in per_cell.into_iter().enumerate() {
        let (val, gy, gmu) = res?;
        value += val;
        if let Some(grad) = grad.as_mut() {
            let nodes = grid.cell_nodes(cell);
            for i in 0..8 {
                grad.y[nodes[i]] += gy[i];
                grad.mu[nodes[i]] += gmu[i];
            }
        }
    }

    // body and surface loads are linear in y
    if let Some(body) = &obj.loads.body {
        let f = body.value(obj.t);
        if f != Vec3::zeros() {
            for cell in 0..grid.num_cells() {
                let nodes = grid.cell_nodes(cell);
                for &p in &quad.points {
                    let e = q.eval(cell, p);
                    value -= quad.weight * f.dot(&e.y);
                    if let Some(grad) = grad.as_mut() {
                        for i in 0..8 {
                            grad.y[nodes[i]] -= quad.weight * e.shape[i] * f;
                        }
                    }
                }
            }
        }
    }
    if let Some(surface) = &obj.loads.surface {
        let gld = surface.value(obj.t);
        if gld != Vec3::zeros() {
            for &face in &grid.neumann_faces {
                for (cell, local, w) in boundary_quadrature(grid, face) {
                    let e = q.eval(cell, local);
                    value -= w * gld.dot(&e.y);
                    if let Some(grad) = grad.as_mut() {
                        let nodes = grid.cell_nodes(cell);
                        for i in 0..8 {
                            grad.y[nodes[i]] -= w * e.shape[i] * gld;
                        }
                    }
                }
            }
        }
    }

    // Huber TV of the cell-centered cofactor
    if obj.include_tv {
        let (tv, tv_grad) = tv_huber_with_gradient(q, obj.eps_tv, with_gradient);
        value += tv;
        if let (Some(grad), Some(tv_grad)) = (grad.as_mut(), tv_grad) {
            for (gn, tn) in grad.y.iter_mut().zip(tv_grad) {
                *gn += tn;
            }
        }
    }

    if let Some(grad) = grad.as_mut() {
        for idx in 0..grid.num_nodes() {
            if grid.is_dirichlet_node(idx) {
                grad.y[idx] = Vec3::zeros();
            }
        }
    }
    Ok((value, grad))
}

fn tv_huber_with_gradient(q: &State, eps: f64, with_gradient: bool) -> (f64, Option<Vec<Vec3>>) {
    let grid = &q.grid;
    let center = Vec3::repeat(0.5);
    let h = grid.spacing();
    let cellvol = grid.cell_volume();
    let [nx, ny, nz] = grid.dims;
    let ncells = grid.num_cells();
    let cof: Vec<Mat3> = (0..ncells)
        .map(|c| cofactor(&q.y.gradient(grid, c, center)))
        .collect();

    let neighbor = |i: usize, j: usize, k: usize, d: usize| -> Option<usize> {
        match d {
            0 if i + 1 < nx => Some(grid.cell_index(i + 1, j, k)),
            1 if j + 1 < ny => Some(grid.cell_index(i, j + 1, k)),
            2 if k + 1 < nz => Some(grid.cell_index(i, j, k + 1)),
            _ => None,
        }
    };

    let mut value = 0.0;
    let mut m_c = vec![Mat3::zeros(); ncells];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let c = grid.cell_index(i, j, k);
                let mut sq = 0.0;
                let mut diffs: [Option<(usize, Mat3)>; 3] = [None, None, None];
                for d in 0..3 {
                    if let Some(nb) = neighbor(i, j, k, d) {
                        let diff = (cof[nb] - cof[c]) / h[d];
                        sq += diff.norm_squared();
                        diffs[d] = Some((nb, diff / h[d]));
                    }
                }
                let root = (sq + eps * eps).sqrt();
                value += cellvol * (root - eps);
                if with_gradient {
                    for item in diffs.iter().flatten() {
                        let (nb, scaled) = item;
                        let w = cellvol / root;
                        m_c[*nb] += w * scaled;
                        m_c[c] -= w * scaled;
                    }
                }
            }
        }
    }
    if !with_gradient {
        return (value, None);
    }

    let mut grad = vec![Vec3::zeros(); grid.num_nodes()];
    let grads_center = crate::fields::shape_gradients(center, h);
    for cell in 0..ncells {
        if m_c[cell] == Mat3::zeros() {
            continue;
        }
        let f = q.y.gradient(grid, cell, center);
        let det = f.determinant();
        if det <= 0.0 {
            continue;
        }
        let finv = inverse_gradient(&f).unwrap();
        let x = cof_chain(&f, &finv, det, &m_c[cell]);
        let nodes = grid.cell_nodes(cell);
        for i in 0..8 {
            grad[nodes[i]] += x * grads_center[i];
        }
    }
    (value, Some(grad))
}

/// Tangent-space projection of the magnetization gradient at unit nodes.
pub fn project_mu_gradient(q: &State, grad: &mut Gradient) {
    for (g, mu) in grad.mu.iter_mut().zip(&q.mu.nodes) {
        *g -= mu * mu.dot(g);
    }
}
