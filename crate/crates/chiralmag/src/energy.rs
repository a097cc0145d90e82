//! Energy assembly: the concrete polyconvex magnetoelastic density, exchange,
//! DMI and magnetostatic terms, applied-load functional, total-variation
//! regularizer of the cofactor field, and the computable coercivity floor.
//!
//! The stored density is
//! `W(F, l) = a (|F|^p - 3^{p/2}) + gamma(det F) + b |cof F . l|^2` with
//! `gamma(h) = h^{-s} + h^2 - 2`, which is frame indifferent, polyconvex via
//! `What(F, H, d, l) = a(|F|^p - 3^{p/2}) + gamma(d) + b |H l|^2`, and blows
//! up under extreme compression.

use crate::fields::{boundary_quadrature, DeformationField, FieldError, Grid, QuadratureRule, State};
use crate::kinematics::{cofactor, det_positive, inverse_gradient, curl_from_gradient, Mat3, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("non-positive determinant at a quadrature point of cell {cell}")]
    NonPositiveDeterminant { cell: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Parameters of the concrete stored density and the micromagnetic terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialModel {
    /// Elastic stiffness (the coercivity constant K).
    pub a: f64,
    /// Growth exponent, must exceed 3.
    pub p: f64,
    /// Compression blow-up exponent of the determinant barrier.
    pub s: f64,
    /// Magnetoelastic coupling through `|cof F . lambda|^2`.
    pub b: f64,
    /// Exchange constant.
    pub alpha: f64,
    /// Vacuum permeability.
    pub mu0: f64,
    /// DMI constant; any sign.
    pub kappa: f64,
}

impl Default for MaterialModel {
    fn default() -> Self {
        MaterialModel {
            a: 1.0,
            p: 4.0,
            s: 2.0,
            b: 0.5,
            alpha: 1.0,
            mu0: 1.0,
            kappa: 2.0,
        }
    }
}

impl MaterialModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.p > 3.0) {
            return Err(format!("growth exponent p must exceed 3, got {}", self.p));
        }
        if !(self.a > 0.0) {
            return Err("elastic stiffness a must be positive".into());
        }
        if self.s < 0.0 || self.b < 0.0 {
            return Err("s and b must be nonnegative".into());
        }
        if !(self.alpha > 0.0) {
            return Err("exchange constant alpha must be positive".into());
        }
        if !(self.mu0 > 0.0) {
            return Err("vacuum permeability mu0 must be positive".into());
        }
        Ok(())
    }

    /// Determinant barrier `gamma(h) = h^{-s} + h^2 - 2` with `gamma(1) = 0`.
    pub fn gamma(&self, h: f64) -> f64 {
        h.powf(-self.s) + h * h - 2.0
    }

    pub fn gamma_prime(&self, h: f64) -> f64 {
        -self.s * h.powf(-self.s - 1.0) + 2.0 * h
    }

    /// Minimum of the barrier over h > 0 (zero for s = 2, slightly negative
    /// for other exponents); enters the coercivity floor constant.
    pub fn gamma_min(&self) -> f64 {
        if self.s == 0.0 {
            return -1.0; // gamma = 1 + h^2 - 2 minimized at h -> 0
        }
        let h_star = (self.s / 2.0).powf(1.0 / (self.s + 2.0));
        self.gamma(h_star)
    }
}

/// Per-term energy record; `total` respects
/// `elastic + exchange + magnetostatic + dmi + regularizer - load_work`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub elastic: f64,
    pub exchange: f64,
    pub magnetostatic: f64,
    pub dmi: f64,
    pub regularizer: f64,
    pub load_work: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn internal(&self) -> f64 {
        self.elastic + self.exchange + self.magnetostatic + self.dmi + self.regularizer
    }
}

/// Scalar time profile of one load component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeProfile {
    /// Linear interpolation between (time, vector) knots; constant outside.
    PiecewiseLinear(Vec<(f64, [f64; 3])>),
    /// `sum_k c_k t^k` with vector coefficients.
    Polynomial(Vec<[f64; 3]>),
}

impl TimeProfile {
    pub fn constant(v: Vec3) -> Self {
        TimeProfile::Polynomial(vec![[v.x, v.y, v.z]])
    }

    pub fn value(&self, t: f64) -> Vec3 {
        match self {
            TimeProfile::PiecewiseLinear(knots) => {
                assert!(!knots.is_empty());
                if t <= knots[0].0 {
                    return Vec3::from(knots[0].1);
                }
                for w in knots.windows(2) {
                    let (t0, v0) = (w[0].0, Vec3::from(w[0].1));
                    let (t1, v1) = (w[1].0, Vec3::from(w[1].1));
                    if t <= t1 {
                        let s = (t - t0) / (t1 - t0);
                        return v0 + s * (v1 - v0);
                    }
                }
                Vec3::from(knots.last().unwrap().1)
            }
            TimeProfile::Polynomial(coeffs) => {
                let mut acc = Vec3::zeros();
                let mut tk = 1.0;
                for c in coeffs {
                    acc += tk * Vec3::from(*c);
                    tk *= t;
                }
                acc
            }
        }
    }

    /// Exact time derivative (right derivative at piecewise-linear knots).
    pub fn derivative(&self, t: f64) -> Vec3 {
        match self {
            TimeProfile::PiecewiseLinear(knots) => {
                if knots.len() < 2 || t < knots[0].0 || t >= knots.last().unwrap().0 {
                    return Vec3::zeros();
                }
                for w in knots.windows(2) {
                    if t < w[1].0 {
                        return (Vec3::from(w[1].1) - Vec3::from(w[0].1)) / (w[1].0 - w[0].0);
                    }
                }
                Vec3::zeros()
            }
            TimeProfile::Polynomial(coeffs) => {
                let mut acc = Vec3::zeros();
                let mut tk = 1.0;
                for (k, c) in coeffs.iter().enumerate().skip(1) {
                    acc += k as f64 * tk * Vec3::from(*c);
                    tk *= t;
                }
                acc
            }
        }
    }

    /// Sup of |value| over [0, t_end], sampled.
    pub fn sup_norm(&self, t_end: f64) -> f64 {
        (0..=200)
            .map(|i| self.value(t_end * i as f64 / 200.0).norm())
            .fold(0.0, f64::max)
    }

    pub fn sup_derivative_norm(&self, t_end: f64) -> f64 {
        (0..=200)
            .map(|i| self.derivative(t_end * i as f64 / 200.0).norm())
            .fold(0.0, f64::max)
    }
}

/// Spatially constant, time-dependent applied loads: body force `f` on the
/// reference domain, surface force `g` on the Neumann boundary, Eulerian
/// magnetic field `h` on all of space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSchedule {
    pub body: Option<TimeProfile>,
    pub surface: Option<TimeProfile>,
    pub field: Option<TimeProfile>,
    pub t_end: f64,
}

impl LoadSchedule {
    pub fn zero(t_end: f64) -> Self {
        LoadSchedule {
            body: None,
            surface: None,
            field: None,
            t_end,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.body.is_none() && self.surface.is_none() && self.field.is_none()
    }
}

/// `W(F, lambda)` for unit `lambda`; errors below the determinant gate.
pub fn elastic_density(f: &Mat3, lambda: &Vec3, m: &MaterialModel) -> Result<f64, EnergyError> {
    let det =
        det_positive(f).map_err(|_| EnergyError::NonPositiveDeterminant { cell: usize::MAX })?;
    let elastic = m.a * (f.norm().powf(m.p) - 3.0f64.powf(m.p / 2.0));
    let coupling = m.b * (cofactor(f) * lambda).norm_squared();
    Ok(elastic + m.gamma(det) + coupling)
}

fn per_cell_sum(
    q: &State,
    mut density: impl FnMut(usize, &crate::fields::PointEval, f64) -> Result<f64, EnergyError>,
) -> Result<f64, EnergyError> {
    let quad = QuadratureRule::gauss2(&q.grid);
    let mut total = 0.0;
    for cell in 0..q.grid.num_cells() {
        for &p in &quad.points {
            let e = q.eval(cell, p);
            let det = det_positive(&e.f)
                .map_err(|_| EnergyError::NonPositiveDeterminant { cell })?;
            total += quad.weight * density(cell, &e, det)?;
        }
    }
    Ok(total)
}

/// Quadrature sum of `W(grad y, mu/|mu|)` over the reference domain.
pub fn elastic_energy(q: &State, m: &MaterialModel) -> Result<f64, EnergyError> {
    per_cell_sum(q, |cell, e, det| {
        let elastic = m.a * (e.f.norm().powf(m.p) - 3.0f64.powf(m.p / 2.0));
        let coupling = m.b * (cofactor(&e.f) * e.n).norm_squared();
        let _ = cell;
        Ok(elastic + m.gamma(det) + coupling)
    })
}

/// Pullback of `alpha int_{Omega^y} |grad m|^2`:
/// `alpha sum |grad(n) (grad y)^{-1}|^2 det(grad y)`.
pub fn exchange_energy(q: &State, m: &MaterialModel) -> Result<f64, EnergyError> {
    per_cell_sum(q, |cell, e, det| {
        let finv =
            inverse_gradient(&e.f).map_err(|_| EnergyError::NonPositiveDeterminant { cell })?;
        let g = e.grad_n * finv;
        Ok(m.alpha * g.norm_squared() * det)
    })
}

/// Pullback of `kappa int_{Omega^y} curl m . m`.
pub fn dmi_energy(q: &State, m: &MaterialModel) -> Result<f64, EnergyError> {
    per_cell_sum(q, |cell, e, det| {
        let finv =
            inverse_gradient(&e.f).map_err(|_| EnergyError::NonPositiveDeterminant { cell })?;
        let g = e.grad_n * finv;
        Ok(m.kappa * curl_from_gradient(&g).dot(&e.n) * det)
    })
}

/// Squared exchange norm `int_{Omega^y} |grad m|^2` in pullback form
/// (exchange energy with unit constant).
pub fn exchange_seminorm_sq(q: &State) -> Result<f64, EnergyError> {
    let unit = MaterialModel {
        alpha: 1.0,
        ..MaterialModel::default()
    };
    exchange_energy(q, &unit)
}

/// `L^p` norm of the deformation gradient raised to p, by quadrature.
pub fn gradient_lp_norm_p(q: &State, p: f64) -> f64 {
    let quad = QuadratureRule::gauss2(&q.grid);
    let mut total = 0.0;
    for cell in 0..q.grid.num_cells() {
        for &pt in &quad.points {
            total += quad.weight * q.y.gradient(&q.grid, cell, pt).norm().powf(p);
        }
    }
    total
}

/// Applied-load functional
/// `L(t,q) = int f.y dx + int_Sigma g.y dH^2 + int h.m det(grad y) dx`.
pub fn load_work(t: f64, q: &State, loads: &LoadSchedule) -> f64 {
    let mut total = 0.0;
    if let Some(body) = &loads.body {
        let f = body.value(t);
        total += volume_dot_y(q, f);
    }
    if let Some(surface) = &loads.surface {
        let g = surface.value(t);
        total += surface_dot_y(q, g);
    }
    if let Some(field) = &loads.field {
        let h = field.value(t);
        total += pullback_field_dot_m(q, h);
    }
    total
}

/// `dE/dt (t, q) = -dL/dt (t, q)` with exact schedule derivatives.
pub fn load_power(t: f64, q: &State, loads: &LoadSchedule) -> f64 {
    let mut total = 0.0;
    if let Some(body) = &loads.body {
        total += volume_dot_y(q, body.derivative(t));
    }
    if let Some(surface) = &loads.surface {
        total += surface_dot_y(q, surface.derivative(t));
    }
    if let Some(field) = &loads.field {
        total += pullback_field_dot_m(q, field.derivative(t));
    }
    -total
}

fn volume_dot_y(q: &State, f: Vec3) -> f64 {
    if f == Vec3::zeros() {
        return 0.0;
    }
    let quad = QuadratureRule::gauss2(&q.grid);
    let mut total = 0.0;
    for cell in 0..q.grid.num_cells() {
        for &p in &quad.points {
            total += quad.weight * f.dot(&q.y.value(&q.grid, cell, p));
        }
    }
    total
}

fn surface_dot_y(q: &State, g: Vec3) -> f64 {
    if g == Vec3::zeros() {
        return 0.0;
    }
    let mut total = 0.0;
    for &face in &q.grid.neumann_faces {
        for (cell, local, w) in boundary_quadrature(&q.grid, face) {
            total += w * g.dot(&q.y.value(&q.grid, cell, local));
        }
    }
    total
}

fn pullback_field_dot_m(q: &State, h: Vec3) -> f64 {
    if h == Vec3::zeros() {
        return 0.0;
    }
    let quad = QuadratureRule::gauss2(&q.grid);
    let mut total = 0.0;
    for cell in 0..q.grid.num_cells() {
        for &p in &quad.points {
            let e = q.eval(cell, p);
            total += quad.weight * h.dot(&e.n) * e.f.determinant();
        }
    }
    total
}

/// Cell-centered cofactor values of the deformation gradient.
pub fn cell_cofactors(grid: &Grid, y: &DeformationField) -> Vec<Mat3> {
    let c = Vec3::new(0.5, 0.5, 0.5);
    (0..grid.num_cells())
        .map(|cell| cofactor(&y.gradient(grid, cell, c)))
        .collect()
}

/// Isotropic discrete total variation of the cofactor field: forward
/// differences of the cell-centered cofactor, combined per cell as
/// `cellvol * sqrt(sum_d |D_d cof|_F^2)`. Converges to
/// `int |grad(cof grad y)|_F` for smooth fields and recovers the jump
/// integral across face-aligned jump sheets of piecewise-smooth ones.
pub fn tv_regularizer(grid: &Grid, y: &DeformationField) -> f64 {
    let cof = cell_cofactors(grid, y);
    let h = grid.spacing();
    let cellvol = grid.cell_volume();
    let mut total = 0.0;
    let [nx, ny, nz] = grid.dims;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let c = grid.cell_index(i, j, k);
                let mut sq = 0.0;
                if i + 1 < nx {
                    let d = (cof[grid.cell_index(i + 1, j, k)] - cof[c]).norm() / h[0];
                    sq += d * d;
                }
                if j + 1 < ny {
                    let d = (cof[grid.cell_index(i, j + 1, k)] - cof[c]).norm() / h[1];
                    sq += d * d;
                }
                if k + 1 < nz {
                    let d = (cof[grid.cell_index(i, j, k + 1)] - cof[c]).norm() / h[2];
                    sq += d * d;
                }
                total += cellvol * sq.sqrt();
            }
        }
    }
    total
}

/// Handle through which the total energy obtains the magnetostatic term.
pub type StrayFieldHandle<'a> = &'a dyn Fn(&State) -> f64;

/// Fills every field of the breakdown. The magnetostatic term is delegated
/// to the supplied handle (zero when absent).
pub fn total_energy(
    t: f64,
    q: &State,
    m: &MaterialModel,
    loads: &LoadSchedule,
    strayfield: Option<StrayFieldHandle>,
) -> Result<EnergyBreakdown, EnergyError> {
    let elastic = elastic_energy(q, m)?;
    let exchange = exchange_energy(q, m)?;
    let dmi = dmi_energy(q, m)?;
    let magnetostatic = strayfield.map(|h| h(q)).unwrap_or(0.0);
    let regularizer = tv_regularizer(&q.grid, &q.y);
    let load = load_work(t, q, loads);
    Ok(EnergyBreakdown {
        elastic,
        exchange,
        magnetostatic,
        dmi,
        regularizer,
        load_work: load,
        total: elastic + exchange + magnetostatic + dmi + regularizer - load,
    })
}

/// Computable coercivity-floor constants and the audit of
/// `E(q) >= C1 ||grad y||_p^p + C2 ||grad m||^2 - C3`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub energy: f64,
    pub rhs: f64,
    pub slack: f64,
    pub floor_holds: bool,
}

/// Sharp embedding constant in `det F <= C |F|^3` (AM-GM on singular values).
pub const DET_EMBEDDING_CONSTANT: f64 = 0.19245008972987526; // 3^{-3/2}

/// Assembles (C1, C2, C3) from the material constants following the
/// Hoelder/Young chain of the lower bound, with `delta = alpha/2` and
/// `epsilon` at half its admissible bound, and checks the floor on `q`.
///
/// C3 carries, besides the DMI part `C kappa^2 vol / (r' eps^{r'} delta)`,
/// the offset `K 3^{p/2} vol` from the elastic normalization (the stored
/// density is `a(|F|^p - 3^{p/2})`, so its coercivity has that constant
/// deficit) and a correction when the determinant barrier dips negative.
pub fn coercivity_floor(q: &State, m: &MaterialModel) -> Result<CoercivityReport, EnergyError> {
    let vol = q.grid.volume();
    let k = m.a;
    let p = m.p;
    let r = p / 3.0;
    let r_conj = r / (r - 1.0);
    let delta = m.alpha / 2.0;
    let c_embed = DET_EMBEDDING_CONSTANT;

    let (c1, c3_dmi) = if m.kappa == 0.0 {
        (k, 0.0)
    } else {
        let eps_bound = (r * k * delta / (c_embed * m.kappa * m.kappa)).powf(1.0 / r);
        let eps = 0.5 * eps_bound;
        let c1 = k - c_embed * m.kappa * m.kappa * eps.powf(r) / (r * delta);
        let c3 = c_embed * m.kappa * m.kappa / (r_conj * eps.powf(r_conj) * delta) * vol;
        (c1, c3)
    };
    let c2 = m.alpha - delta;
    let c3 = c3_dmi + k * 3.0f64.powf(p / 2.0) * vol + (-m.gamma_min()).max(0.0) * vol;

    // Magnetostatic energy is nonnegative, so auditing the floor without it
    // certifies the full energy as well.
    let energy = elastic_energy(q, m)? + exchange_energy(q, m)? + dmi_energy(q, m)?;
    let grad_y_p = gradient_lp_norm_p(q, p);
    let grad_m_sq = exchange_seminorm_sq(q)?;
    let rhs = c1 * grad_y_p + c2 * grad_m_sq - c3;
    let slack = energy - rhs;
    Ok(CoercivityReport {
        c1,
        c2,
        c3,
        energy,
        rhs,
        slack,
        floor_holds: slack >= -1e-10 * (1.0 + energy.abs()),
    })
}
