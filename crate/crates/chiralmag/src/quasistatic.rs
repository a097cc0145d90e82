//! Regularized rate-independent quasistatic evolution by incremental
//! minimization: a time partition, a warm-started incremental solve per
//! step, and three per-step audits (discrete stability against sampled
//! competitors, the two-sided energy inequality with the external work
//! integrated by 5-point Gauss quadrature, and an a-priori Gronwall bound
//! from computable coercivity constants).

use crate::dissipation::dissipation_distance;
use crate::energy::{
    coercivity_floor, load_power, total_energy, EnergyError, LoadSchedule, MaterialModel,
};
use crate::fields::{BoxFace, Grid, State};
use crate::kinematics::Vec3;
use crate::optimizer::{
    huber_gap, minimize_incremental, minimize_static, stability_audit, OptimizeResult,
    OptimizerConfig, OptimizerError, StabilityReport,
};
use serde::{Deserialize, Serialize};

/// Time partition `0 = t_0 < t_1 < ... < t_N = t_end`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Partition {
    pub times: Vec<f64>,
}

impl Partition {
    pub fn uniform(t_end: f64, n: usize) -> Self {
        assert!(n >= 1 && t_end > 0.0);
        Partition {
            times: (0..=n).map(|i| t_end * i as f64 / n as f64).collect(),
        }
    }

    pub fn from_times(times: Vec<f64>) -> Self {
        assert!(times.len() >= 2);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        Partition { times }
    }

    pub fn fineness(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

/// Constants `(L, M)` with `|d/dt E(t,q)| <= L (E(t,q) + M)` over the
/// admissible class, assembled from Poincare/trace/embedding inequalities
/// and the coercivity floor; certifiable at runtime on computed states.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GronwallConstants {
    pub l: f64,
    pub m: f64,
    /// Load-work bound `|L(t,q)| <= b_load ||grad y||_p^p + a_load`.
    pub b_load: f64,
    pub a_load: f64,
    /// Whether the chain closed with `C1 - b_load > 0`.
    pub certified: bool,
}

impl GronwallConstants {
    /// Checks `|load_power| <= L (E + M)` on a computed state.
    pub fn certify(
        &self,
        t: f64,
        q: &State,
        material: &MaterialModel,
        loads: &LoadSchedule,
    ) -> Result<bool, EnergyError> {
        let e = total_energy(t, q, material, loads, None)?.total;
        let p = load_power(t, q, loads).abs();
        Ok(p <= self.l * (e + self.m) * (1.0 + 1e-9) + 1e-12)
    }
}

/// Young's inequality `a <= theta a^p + c(theta)` (maximize `a - theta a^p`).
fn young_linear(theta: f64, p: f64) -> f64 {
    let a_star = (1.0 / (p * theta)).powf(1.0 / (p - 1.0));
    a_star - theta * a_star.powf(p)
}

/// Young's inequality `a^3 <= theta a^p + c(theta)` for `p > 3`.
fn young_cubic(theta: f64, p: f64) -> f64 {
    let a_star = (3.0 / (p * theta)).powf(1.0 / (p - 3.0));
    a_star.powi(3) - theta * a_star.powf(p)
}

fn face_axis(face: BoxFace) -> usize {
    match face {
        BoxFace::XMin | BoxFace::XMax => 0,
        BoxFace::YMin | BoxFace::YMax => 1,
        BoxFace::ZMin | BoxFace::ZMax => 2,
    }
}

/// Assembles `(L, M)` for the given grid, material and schedule.
///
/// The chain: `|y|` is controlled through the Dirichlet face by a 1D
/// Poincare inequality, surface integrals by the discrete trace constant
/// `4 / h_min`, the deformed volume by `det F <= 3^{-3/2} |F|^3` and
/// Hoelder, and the resulting `||grad y||_p` powers by Young's inequality
/// against the elastic coercivity `C1 ||grad y||_p^p - C3`.
pub fn estimate_gronwall_constants(
    grid: &Grid,
    material: &MaterialModel,
    loads: &LoadSchedule,
) -> Result<GronwallConstants, EnergyError> {
    let probe = State::identity_with_constant_mu(grid.clone(), Vec3::z());
    let floor = coercivity_floor(&probe, material)?;
    let (c1, c3) = (floor.c1, floor.c3);
    let p = material.p;
    let vol = grid.volume();
    let t_end = loads.t_end;
    let h_min = grid.spacing().iter().copied().fold(f64::INFINITY, f64::min);
    let trace = 4.0 / h_min;

    // Poincare through the Dirichlet face: |y(x)| <= r0 + w |grad y| along
    // the transversal line, hence int |y| <= r0 vol + w vol^{1-1/p} ||grad y||_p.
    let r0 = {
        let mut r: f64 = 0.0;
        for i in 0..8 {
            let c = Vec3::new(
                if i & 1 == 0 { grid.box_min[0] } else { grid.box_max[0] },
                if i & 2 == 0 { grid.box_min[1] } else { grid.box_max[1] },
                if i & 4 == 0 { grid.box_min[2] } else { grid.box_max[2] },
            );
            r = r.max(c.norm());
        }
        r
    };
    let axis = grid
        .dirichlet_faces
        .first()
        .map(|&f| face_axis(f))
        .unwrap_or(0);
    let w = grid.box_max[axis] - grid.box_min[axis];
    let p0 = r0 * vol;
    let p1 = w * vol.powf(1.0 - 1.0 / p);

    let sup = |prof: &Option<crate::energy::TimeProfile>| {
        prof.as_ref().map(|p| p.sup_norm(t_end)).unwrap_or(0.0)
    };
    let sup_dot = |prof: &Option<crate::energy::TimeProfile>| {
        prof.as_ref()
            .map(|p| p.sup_derivative_norm(t_end))
            .unwrap_or(0.0)
    };

    // coefficients of the linear (body + traced surface) and cubic (Eulerian
    // field) terms in ||grad y||_p, for the work and for the power
    let embed = crate::energy::DET_EMBEDDING_CONSTANT * vol.powf(1.0 - 3.0 / p);
    let s1_work = (sup(&loads.body) + trace * sup(&loads.surface)) * p1;
    let s3_work = sup(&loads.field) * embed;
    let s0_work = (sup(&loads.body) + trace * sup(&loads.surface)) * p0;
    let s1_pow = (sup_dot(&loads.body) + trace * sup_dot(&loads.surface)) * p1;
    let s3_pow = sup_dot(&loads.field) * embed;
    let s0_pow = (sup_dot(&loads.body) + trace * sup_dot(&loads.surface)) * p0;

    // absorb the work bound into C1/2 so the coercivity chain closes
    let mut b_load = 0.0;
    let mut a_load = s0_work;
    if s1_work > 0.0 {
        let theta = c1 / (4.0 * s1_work);
        b_load += theta * s1_work;
        a_load += s1_work * young_linear(theta, p);
    }
    if s3_work > 0.0 {
        let theta = c1 / (4.0 * s3_work);
        b_load += theta * s3_work;
        a_load += s3_work * young_cubic(theta, p);
    }
    let certified = c1 > b_load;
    let denom = (c1 - b_load).max(0.5 * c1);

    // power bound with unit Young weights
    let mut b_pow = 0.0;
    let mut a_pow = s0_pow;
    if s1_pow > 0.0 {
        b_pow += s1_pow;
        a_pow += s1_pow * young_linear(1.0, p);
    }
    if s3_pow > 0.0 {
        b_pow += s3_pow;
        a_pow += s3_pow * young_cubic(1.0, p);
    }

    let l = b_pow / denom;
    let m = if l > 0.0 {
        a_load + c3 + a_pow / l
    } else {
        a_load + c3 + 1.0
    };
    Ok(GronwallConstants {
        l,
        m,
        b_load,
        a_load,
        certified,
    })
}

const GAUSS5_NODES: [f64; 5] = [
    -0.906179845938664,
    -0.5384693101056831,
    0.0,
    0.5384693101056831,
    0.906179845938664,
];
const GAUSS5_WEIGHTS: [f64; 5] = [
    0.23692688505618908,
    0.47862867049936647,
    0.5688888888888889,
    0.47862867049936647,
    0.23692688505618908,
];

/// `int_a^b (d/dt E)(tau, q) dtau` by 5-point Gauss-Legendre.
pub fn external_work(a: f64, b: f64, q: &State, loads: &LoadSchedule) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GAUSS5_NODES
        .iter()
        .zip(&GAUSS5_WEIGHTS)
        .map(|(&x, &w)| w * load_power(mid + half * x, q, loads))
        .sum::<f64>()
        * half
}

/// Per-step audit record of the evolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepAudit {
    pub step: usize,
    pub t: f64,
    pub dissipation: f64,
    pub stability: StabilityReport,
    pub stability_ok: bool,
    /// `E(t_i,q_i) - E(t_{i-1},q_{i-1}) + D - int dE/dt(tau, q_{i-1}) dtau`.
    pub energy_residual: f64,
    pub energy_ok: bool,
    pub gronwall_lhs: f64,
    pub gronwall_rhs: f64,
    pub gronwall_ok: bool,
    pub power_certified: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub energies: Vec<f64>,
    pub dissipations: Vec<f64>,
    pub audits: Vec<StepAudit>,
    pub gronwall: GronwallConstants,
}

impl Trajectory {
    pub fn all_audits_passed(&self) -> bool {
        self.audits
            .iter()
            .all(|a| a.stability_ok && a.energy_ok && a.gronwall_ok && a.power_certified)
    }

    pub fn total_dissipation(&self) -> f64 {
        self.dissipations.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub n_competitors: usize,
    pub seed: u64,
    /// Relative stability margin floor (scaled by `1 + |E|`).
    pub stability_tol_rel: f64,
    /// How many recent trajectory states join the competitor set.
    pub history_competitors: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            n_competitors: 24,
            seed: 2024,
            stability_tol_rel: 1e-6,
            history_competitors: 4,
        }
    }
}

/// Relaxes the initial guess at `t = 0` into a stable starting state.
pub fn prepare_initial(
    q_guess: &State,
    material: &MaterialModel,
    loads: &LoadSchedule,
    cfg: &OptimizerConfig,
) -> Result<OptimizeResult, OptimizerError> {
    minimize_static(0.0, q_guess, material, loads, cfg)
}

/// Runs the incremental-minimization evolution over the partition and
/// audits every step (stability, energy inequality, Gronwall bound).
pub fn evolve(
    q0: &State,
    material: &MaterialModel,
    loads: &LoadSchedule,
    partition: &Partition,
    cfg: &OptimizerConfig,
    opts: &EvolveOptions,
) -> Result<Trajectory, OptimizerError> {
    assert!((partition.times[0] - 0.0).abs() < 1e-14, "partition must start at 0");
    let gronwall = estimate_gronwall_constants(&q0.grid, material, loads)?;
    let e0 = total_energy(partition.times[0], q0, material, loads, None)?.total;

    let mut states = vec![q0.clone()];
    let mut energies = vec![e0];
    let mut dissipations = Vec::new();
    let mut audits = Vec::new();
    let mut dissipation_sum = 0.0;

    for i in 1..partition.times.len() {
        let (t_prev, t_i) = (partition.times[i - 1], partition.times[i]);
        let q_prev = states.last().unwrap().clone();
        let res = minimize_incremental(t_i, &q_prev, material, loads, cfg)?;
        let q_i = res.state;
        let e_i = total_energy(t_i, &q_i, material, loads, None)?.total;
        let d_i = dissipation_distance(&q_prev, &q_i).expect("same grid");
        dissipation_sum += d_i;

        let scale = 1.0 + e_i.abs();
        let tol = 1e-6 * scale + huber_gap(&q_i, cfg);

        let history: Vec<State> = states
            .iter()
            .rev()
            .take(opts.history_competitors)
            .cloned()
            .collect();
        let stability = stability_audit(
            t_i,
            &q_i,
            material,
            loads,
            &history,
            opts.n_competitors,
            opts.seed.wrapping_add(i as u64),
        )?;
        // stability competitors reached through D also absorb the Huber gap
        let stability_ok =
            stability.worst_margin >= -(opts.stability_tol_rel * scale + huber_gap(&q_i, cfg));

        let work = external_work(t_prev, t_i, &q_prev, loads);
        let energy_residual = e_i - energies[i - 1] + d_i - work;
        let energy_ok = energy_residual <= tol;

        let gronwall_lhs = e_i + gronwall.m + dissipation_sum;
        let gronwall_rhs = (e0 + gronwall.m) * (gronwall.l * t_i).exp();
        let gronwall_ok = gronwall_lhs <= gronwall_rhs + (i as f64) * tol;
        let power_certified = gronwall.certify(t_i, &q_i, material, loads)?;

        audits.push(StepAudit {
            step: i,
            t: t_i,
            dissipation: d_i,
            stability,
            stability_ok,
            energy_residual,
            energy_ok,
            gronwall_lhs,
            gronwall_rhs,
            gronwall_ok,
            power_certified,
            iterations: res.iterations,
        });
        states.push(q_i);
        energies.push(e_i);
        dissipations.push(d_i);
    }

    Ok(Trajectory {
        times: partition.times.clone(),
        states,
        energies,
        dissipations,
        audits,
        gronwall,
    })
}

/// Two-sided energy balance over the whole trajectory: the upper bound
/// integrates the power along the outgoing state of each step, the lower
/// bound along the incoming one.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyBalanceReport {
    pub initial_energy: f64,
    pub final_energy: f64,
    pub total_dissipation: f64,
    pub work_upper: f64,
    pub work_lower: f64,
    /// `E_N - E_0 + Var_D - work_upper`, expected `<= tol`.
    pub residual_upper: f64,
    /// Same against `work_lower`, expected `>= -tol` for stable steps.
    pub residual_lower: f64,
    pub steps: usize,
}

pub fn energy_balance_report(traj: &Trajectory, loads: &LoadSchedule) -> EnergyBalanceReport {
    let n = traj.times.len() - 1;
    let mut work_upper = 0.0;
    let mut work_lower = 0.0;
    for i in 1..=n {
        let (a, b) = (traj.times[i - 1], traj.times[i]);
        work_upper += external_work(a, b, &traj.states[i - 1], loads);
        work_lower += external_work(a, b, &traj.states[i], loads);
    }
    let initial = traj.energies[0];
    let fin = *traj.energies.last().unwrap();
    let var = traj.total_dissipation();
    EnergyBalanceReport {
        initial_energy: initial,
        final_energy: fin,
        total_dissipation: var,
        work_upper,
        work_lower,
        residual_upper: fin - initial + var - work_upper,
        residual_lower: fin - initial + var - work_lower,
        steps: n,
    }
}
