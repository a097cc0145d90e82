//! Block-coordinate descent over admissible states: a Riemannian projected
//! gradient block for the magnetization (step in the tangent spaces of the
//! unit spheres, then renormalize) and a guarded gradient block for the
//! deformation (steps that push any quadrature determinant below the floor
//! are rejected in the line search). Nonsmooth terms are Huber-smoothed
//! inside the solver only; all reported energies and audit inequalities use
//! the exact evaluations.

use crate::dissipation::dissipation_distance;
use crate::energy::{total_energy, EnergyBreakdown, EnergyError, LoadSchedule, MaterialModel};
use crate::fields::State;
use crate::gradients::{objective_gradient, objective_value, project_mu_gradient, Objective};
use crate::kinematics::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("line search stalled in the {block} block")]
    LineSearchStalled { block: &'static str },
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_outer_iters: usize,
    pub grad_tol: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_step_y: f64,
    pub max_step_mu: f64,
    pub huber_eps_d: f64,
    pub huber_eps_tv: f64,
    pub det_floor: f64,
    pub max_backtracks: usize,
    /// Freeze the deformation block (magnetization-only relaxation).
    #[serde(default)]
    pub fix_y: bool,
    /// Freeze the magnetization block.
    #[serde(default)]
    pub fix_mu: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_outer_iters: 500,
            grad_tol: 1e-5,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_step_y: 0.25,
            max_step_mu: 1.0,
            huber_eps_d: 1e-4,
            huber_eps_tv: 1e-3,
            det_floor: 1e-6,
            max_backtracks: 60,
            fix_y: false,
            fix_mu: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), String> {
        let all_positive = self.grad_tol > 0.0
            && self.armijo_c1 > 0.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.max_step_y > 0.0
            && self.max_step_mu > 0.0
            && self.huber_eps_d > 0.0
            && self.huber_eps_tv > 0.0
            && self.det_floor > 0.0;
        if all_positive {
            Ok(())
        } else {
            Err("all optimizer tolerances must be positive".into())
        }
    }
}

/// One outer iteration of the convergence log.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm_mu: f64,
    pub grad_norm_y: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub state: State,
    pub breakdown: EnergyBreakdown,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
}

fn block_norm(v: &[Vec3]) -> f64 {
    v.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt()
}

fn mu_candidate(q: &State, dir: &[Vec3], step: f64) -> State {
    let mut out = q.clone();
    for (node, d) in out.mu.nodes.iter_mut().zip(dir) {
        *node = (*node - step * d).normalize();
    }
    out
}

fn y_candidate(q: &State, dir: &[Vec3], step: f64) -> State {
    let mut out = q.clone();
    for (node, d) in out.y.nodes.iter_mut().zip(dir) {
        *node -= step * d;
    }
    out
}

/// Armijo backtracking for one block. `admissible` pre-screens candidates
/// (determinant guard for the y block).
fn line_search(
    q: &State,
    obj: &Objective,
    value: f64,
    dir: &[Vec3],
    grad_sq: f64,
    step0: f64,
    cfg: &OptimizerConfig,
    block: &'static str,
    candidate: fn(&State, &[Vec3], f64) -> State,
    admissible: impl Fn(&State) -> bool,
) -> Result<(State, f64), OptimizerError> {
    let mut step = step0;
    for _ in 0..cfg.max_backtracks {
        let trial = candidate(q, dir, step);
        if admissible(&trial) {
            if let Ok(val) = objective_value(&trial, obj) {
                if val <= value - cfg.armijo_c1 * step * grad_sq {
                    return Ok((trial, val));
                }
            }
        }
        step *= cfg.backtrack;
    }
    Err(OptimizerError::LineSearchStalled { block })
}

fn minimize(
    q0: &State,
    obj: &Objective,
    cfg: &OptimizerConfig,
) -> Result<(State, usize, Vec<IterationRecord>), OptimizerError> {
    let mut q = q0.clone();
    let mut value = objective_value(&q, obj)?;
    let mut log = Vec::new();
    let det_ok = |s: &State| s.min_quadrature_det() > cfg.det_floor;
    let mut iterations = 0;

    for iter in 0..cfg.max_outer_iters {
        iterations = iter + 1;
        let (_, mut grad) = objective_gradient(&q, obj)?;
        project_mu_gradient(&q, &mut grad);
        let gmu = if cfg.fix_mu { 0.0 } else { block_norm(&grad.mu) };
        let gy = if cfg.fix_y { 0.0 } else { block_norm(&grad.y) };
        log.push(IterationRecord {
            iteration: iter,
            objective: value,
            grad_norm_mu: gmu,
            grad_norm_y: gy,
        });
        if gmu < cfg.grad_tol && gy < cfg.grad_tol {
            iterations = iter;
            break;
        }

        if gmu >= cfg.grad_tol {
            let (next, val) = line_search(
                &q,
                obj,
                value,
                &grad.mu,
                gmu * gmu,
                cfg.max_step_mu,
                cfg,
                "mu",
                mu_candidate,
                |_| true,
            )?;
            q = next;
            value = val;
            if !cfg.fix_y {
                // the y gradient moved with the state; refresh it
                let (_, g2) = objective_gradient(&q, obj)?;
                grad.y = g2.y;
            }
        }

        let gy = if cfg.fix_y { 0.0 } else { block_norm(&grad.y) };
        if gy >= cfg.grad_tol {
            let (next, val) = line_search(
                &q,
                obj,
                value,
                &grad.y,
                gy * gy,
                cfg.max_step_y,
                cfg,
                "y",
                y_candidate,
                det_ok,
            )?;
            q = next;
            value = val;
        }
    }
    Ok((q, iterations, log))
}

/// Minimizes the (Huber-smoothed) total energy at fixed time `t`.
pub fn minimize_static(
    t: f64,
    q0: &State,
    material: &MaterialModel,
    loads: &LoadSchedule,
    cfg: &OptimizerConfig,
) -> Result<OptimizeResult, OptimizerError> {
    let obj = Objective {
        material,
        loads,
        t,
        include_tv: true,
        eps_tv: cfg.huber_eps_tv,
        dissipation_from: None,
        eps_d: cfg.huber_eps_d,
    };
    let (state, iterations, log) = minimize(q0, &obj, cfg)?;
    let breakdown = total_energy(t, &state, material, loads, None)?;
    Ok(OptimizeResult {
        state,
        breakdown,
        iterations,
        log,
    })
}

/// Minimizes `E(t_i, .) + D(q_prev, .)` warm-started at `q_prev`, then
/// verifies with the exact dissipation that staying put was no better
/// (up to the Huber gap); falls back to `q_prev` otherwise.
pub fn minimize_incremental(
    t_i: f64,
    q_prev: &State,
    material: &MaterialModel,
    loads: &LoadSchedule,
    cfg: &OptimizerConfig,
) -> Result<OptimizeResult, OptimizerError> {
    let obj = Objective {
        material,
        loads,
        t: t_i,
        include_tv: true,
        eps_tv: cfg.huber_eps_tv,
        dissipation_from: Some(q_prev),
        eps_d: cfg.huber_eps_d,
    };
    let (state, iterations, log) = minimize(q_prev, &obj, cfg)?;

    let bd = total_energy(t_i, &state, material, loads, None)?;
    let bd_prev = total_energy(t_i, q_prev, material, loads, None)?;
    let d = dissipation_distance(q_prev, &state).expect("same grid");
    let scale = 1.0 + bd_prev.total.abs();
    if bd.total + d > bd_prev.total + 1e-8 * scale + huber_gap(q_prev, cfg) {
        // exact bookkeeping prefers the stay-put competitor
        return Ok(OptimizeResult {
            state: q_prev.clone(),
            breakdown: bd_prev,
            iterations,
            log,
        });
    }
    Ok(OptimizeResult {
        state,
        breakdown: bd,
        iterations,
        log,
    })
}

/// Worst-case gap between exact and Huber-smoothed nonsmooth terms.
pub fn huber_gap(q: &State, cfg: &OptimizerConfig) -> f64 {
    (cfg.huber_eps_d + cfg.huber_eps_tv) * q.grid.volume()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub competitors: usize,
    pub worst_margin: f64,
    /// Worst margin normalized by `1 + |E(t,q)|`.
    pub worst_margin_rel: f64,
}

/// Samples competitors and checks the stability inequality
/// `E(t,q) <= E(t,qhat) + D(q,qhat)` with exact evaluations; reports the
/// worst margin `E(t,qhat) + D(q,qhat) - E(t,q)`.
pub fn stability_audit(
    t: f64,
    q: &State,
    material: &MaterialModel,
    loads: &LoadSchedule,
    extra_competitors: &[State],
    n_random: usize,
    seed: u64,
) -> Result<StabilityReport, EnergyError> {
    let base = total_energy(t, q, material, loads, None)?.total;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut count = 0usize;
    let mut consider = |qhat: &State| -> Result<(), EnergyError> {
        let bd = match total_energy(t, qhat, material, loads, None) {
            Ok(bd) => bd,
            Err(EnergyError::NonPositiveDeterminant { .. }) => return Ok(()), // inadmissible sample
            Err(e) => return Err(e),
        };
        let d = dissipation_distance(q, qhat).expect("same grid");
        let margin = bd.total + d - base;
        if margin < worst {
            worst = margin;
        }
        count += 1;
        Ok(())
    };

    consider(q)?; // the trivial competitor: margin exactly zero

    let h_min = q
        .grid
        .spacing()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let amplitudes = [0.01, 0.05, 0.2];
    let per_kind = n_random.div_ceil(2 * amplitudes.len());
    for &amp in &amplitudes {
        for _ in 0..per_kind {
            // tangent perturbation of mu
            let mut qhat = q.clone();
            for node in qhat.mu.nodes.iter_mut() {
                let r = Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                let tangent = r - *node * node.dot(&r);
                *node = (*node + amp * tangent).normalize();
            }
            consider(&qhat)?;

            // interior y perturbation, Dirichlet nodes pinned
            let mut qhat = q.clone();
            for (idx, node) in qhat.y.nodes.iter_mut().enumerate() {
                if !q.grid.is_dirichlet_node(idx) {
                    *node += amp
                        * h_min
                        * Vec3::new(
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                        );
                }
            }
            consider(&qhat)?;
        }
    }

    // rigid rotations of the whole state about the body centroid; these
    // violate a Dirichlet constraint, so they only qualify on free grids
    let rotations = if q.grid.dirichlet_faces.is_empty() { 3 } else { 0 };
    for _ in 0..rotations {
        let axis = nalgebra::Unit::new_normalize(Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ));
        let rot = nalgebra::Rotation3::from_axis_angle(&axis, rng.gen_range(0.0..6.28)).into_inner();
        let centroid = q.y.nodes.iter().sum::<Vec3>() / q.y.nodes.len() as f64;
        let qhat = State {
            grid: q.grid.clone(),
            y: crate::fields::DeformationField {
                nodes: q.y.nodes.iter().map(|v| rot * (v - centroid) + centroid).collect(),
            },
            mu: crate::fields::MagnetizationField {
                nodes: q.mu.nodes.iter().map(|v| rot * v).collect(),
            },
        };
        consider(&qhat)?;
    }

    for qhat in extra_competitors {
        consider(qhat)?;
    }

    Ok(StabilityReport {
        competitors: count,
        worst_margin: worst,
        worst_margin_rel: worst / (1.0 + base.abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{BoxFace, DeformationField, Grid, MagnetizationField};
    use rand::Rng;

    fn pinned_grid(n: usize) -> Grid {
        Grid::new(
            [0.0; 3],
            [1.0; 3],
            [n; 3],
            vec![BoxFace::ZMin],
            vec![BoxFace::ZMax],
        )
    }

    fn helix(grid: &Grid, omega: f64) -> State {
        State {
            y: DeformationField::identity(grid),
            mu: MagnetizationField::from_map(grid, |x| {
                Vec3::new((omega * x.z).cos(), (omega * x.z).sin(), 0.0)
            })
            .unwrap(),
            grid: grid.clone(),
        }
    }

    #[test]
    fn helix_ground_state_is_already_optimal() {
        let grid = pinned_grid(8);
        let m = MaterialModel {
            alpha: 1.0,
            kappa: 2.0,
            b: 0.0,
            ..MaterialModel::default()
        };
        let loads = LoadSchedule::zero(1.0);
        let q0 = helix(&grid, m.kappa / (2.0 * m.alpha));
        let e0 = total_energy(0.0, &q0, &m, &loads, None).unwrap().total;
        // magnetization-only relaxation: the Eulerian exchange/DMI densities
        // exert a configurational force on y, so the identity-deformation
        // helix is stationary only with the deformation block frozen; the
        // residual mu gradient is the lateral-face DMI boundary term, which
        // decays like 1/n, so converge at a tolerance above it
        let cfg = OptimizerConfig {
            max_outer_iters: 5,
            grad_tol: 0.4,
            fix_y: true,
            ..OptimizerConfig::default()
        };
        let res = minimize_static(0.0, &q0, &m, &loads, &cfg).unwrap();
        assert!(res.iterations <= 5);
        assert!(
            (res.breakdown.total - e0).abs() < 1e-8 * (1.0 + e0.abs()),
            "energy moved by {}",
            (res.breakdown.total - e0).abs()
        );
    }

    #[test]
    fn unfrustrated_case_relaxes_to_constant_mu() {
        let grid = pinned_grid(3);
        let m = MaterialModel {
            kappa: 0.0,
            b: 0.0,
            alpha: 1.0,
            ..MaterialModel::default()
        };
        let loads = LoadSchedule::zero(1.0);
        let q0 = State {
            y: DeformationField::identity(&grid),
            mu: MagnetizationField::from_map(&grid, |x| {
                (Vec3::z() + 0.4 * Vec3::new((3.0 * x.x).sin(), (2.0 * x.y).cos(), 0.0))
                    .normalize()
            })
            .unwrap(),
            grid: grid.clone(),
        };
        let cfg = OptimizerConfig {
            max_outer_iters: 3000,
            grad_tol: 1e-6,
            ..OptimizerConfig::default()
        };
        let res = minimize_static(0.0, &q0, &m, &loads, &cfg).unwrap();
        let residual = res.breakdown.exchange + res.breakdown.dmi;
        assert!(residual < 1e-6, "exchange + dmi = {residual}");
        assert!(res.state.min_quadrature_det() > cfg.det_floor);
    }

    #[test]
    fn descent_is_monotone_for_random_starts() {
        let grid = pinned_grid(3);
        let m = MaterialModel::default();
        let loads = LoadSchedule::zero(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for trial in 0..10 {
            let q0 = State {
                y: DeformationField::from_map(&grid, |x| {
                    x + 0.03
                        * Vec3::new(
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                        )
                }),
                mu: MagnetizationField::from_map(&grid, |_| {
                    Vec3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ) + Vec3::new(0.0, 0.0, 1.5)
                })
                .unwrap(),
                grid: grid.clone(),
            };
            let cfg = OptimizerConfig {
                max_outer_iters: 40,
                ..OptimizerConfig::default()
            };
            let res = minimize_static(0.0, &q0, &m, &loads, &cfg).unwrap();
            for w in res.log.windows(2) {
                assert!(
                    w[1].objective <= w[0].objective + 1e-12,
                    "trial {trial}: objective rose from {} to {}",
                    w[0].objective,
                    w[1].objective
                );
            }
        }
    }

    #[test]
    fn iterates_stay_admissible() {
        let grid = pinned_grid(3);
        let m = MaterialModel::default();
        let loads = LoadSchedule {
            body: Some(crate::energy::TimeProfile::constant(Vec3::new(0.0, 0.0, -0.5))),
            surface: None,
            field: None,
            t_end: 1.0,
        };
        let q0 = State::identity_with_constant_mu(grid.clone(), Vec3::z());
        let cfg = OptimizerConfig {
            max_outer_iters: 30,
            ..OptimizerConfig::default()
        };
        let res = minimize_static(0.0, &q0, &m, &loads, &cfg).unwrap();
        assert!(res.state.min_quadrature_det() > cfg.det_floor);
        for node in &res.state.mu.nodes {
            assert!((node.norm() - 1.0).abs() < 1e-12);
        }
        for (idx, (a, b)) in res.state.y.nodes.iter().zip(&q0.y.nodes).enumerate() {
            if grid.is_dirichlet_node(idx) {
                assert_eq!(a, b, "Dirichlet node {idx} moved");
            }
        }
        assert!(res.breakdown.total <= total_energy(0.0, &q0, &m, &loads, None).unwrap().total);
    }

    #[test]
    fn incremental_stays_put_under_frozen_loads() {
        let grid = pinned_grid(3);
        // s = 14 makes gamma'(1) = -12 cancel the |F|^p stress at F = I,
        // so the identity with constant mu is an exact critical point
        let m = MaterialModel {
            kappa: 0.0,
            b: 0.0,
            s: 14.0,
            ..MaterialModel::default()
        };
        let loads = LoadSchedule::zero(1.0);
        let q0 = State::identity_with_constant_mu(grid, Vec3::z());
        let cfg = OptimizerConfig {
            max_outer_iters: 200,
            ..OptimizerConfig::default()
        };
        let pre = minimize_static(0.0, &q0, &m, &loads, &cfg).unwrap();
        let last = pre.log.last().unwrap();
        assert!(
            last.grad_norm_mu < cfg.grad_tol && last.grad_norm_y < cfg.grad_tol,
            "pre-relaxation did not converge"
        );
        let res = minimize_incremental(0.5, &pre.state, &m, &loads, &cfg).unwrap();
        let d = dissipation_distance(&res.state, &pre.state).unwrap();
        assert!(d < 1e-12, "moved by D = {d}");
    }

    #[test]
    fn incremental_beats_staying_put() {
        let grid = pinned_grid(3);
        let m = MaterialModel::default();
        let ramp = LoadSchedule {
            field: Some(crate::energy::TimeProfile::Polynomial(vec![
                [0.0; 3],
                [0.0, 0.0, 2.0],
            ])),
            body: None,
            surface: None,
            t_end: 1.0,
        };
        let q0 = State::identity_with_constant_mu(grid, Vec3::x());
        let cfg = OptimizerConfig {
            max_outer_iters: 150,
            ..OptimizerConfig::default()
        };
        let q_prev = minimize_static(0.0, &q0, &m, &ramp, &cfg).unwrap().state;
        let t1 = 1.0;
        let res = minimize_incremental(t1, &q_prev, &m, &ramp, &cfg).unwrap();
        let lhs = res.breakdown.total + dissipation_distance(&q_prev, &res.state).unwrap();
        let rhs = total_energy(t1, &q_prev, &m, &ramp, None).unwrap().total;
        assert!(
            lhs <= rhs + 1e-8 * (1.0 + rhs.abs()) + huber_gap(&q_prev, &cfg),
            "lhs {lhs}, stay-put {rhs}"
        );
    }

    #[test]
    fn stability_audit_of_minimizer() {
        let grid = pinned_grid(3);
        let m = MaterialModel::default();
        let loads = LoadSchedule::zero(1.0);
        let q0 = State::identity_with_constant_mu(grid, Vec3::z());
        let cfg = OptimizerConfig {
            max_outer_iters: 300,
            ..OptimizerConfig::default()
        };
        let res = minimize_static(0.0, &q0, &m, &loads, &cfg).unwrap();
        let report = stability_audit(0.0, &res.state, &m, &loads, &[], 50, 7).unwrap();
        assert!(report.competitors >= 50);
        assert!(
            report.worst_margin_rel >= -1e-6,
            "worst margin {}",
            report.worst_margin_rel
        );
    }

    #[test]
    fn stability_rotation_margin_vanishes_without_chirality() {
        let grid = Grid::unit_cube(3);
        let m = MaterialModel {
            kappa: 0.0,
            b: 0.0,
            ..MaterialModel::default()
        };
        let loads = LoadSchedule::zero(1.0);
        let q = State::identity_with_constant_mu(grid, Vec3::z());
        // only rotations and the trivial competitor: margins ~ 0 by invariance
        let report = stability_audit(0.0, &q, &m, &loads, &[], 0, 11).unwrap();
        assert!(report.worst_margin.abs() < 1e-9, "margin {}", report.worst_margin);
    }
}
