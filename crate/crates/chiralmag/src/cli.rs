//! Subcommand dispatch for the thin binary: `minimize` (static problem),
//! `evolve` (quasistatic evolution), `check` (named invariant suites with a
//! pass/fail table) and `degree` (point query of the topological degree).
//! Every run is reproducible from (config, seed) and copies its config into
//! the output directory.

use crate::config::{ConfigError, RunConfig};
use crate::dissipation::dissipation_distance;
use crate::energy::{coercivity_floor, LoadSchedule, MaterialModel};
use crate::fields::{DeformationField, Grid, MagnetizationField, State};
use crate::fixtures;
use crate::geometry::{
    ciarlet_necas_check, deformed_configuration, inverse_jacobian_audit, topological_degree,
    EulerianGrid,
};
use crate::gradients::{objective_gradient, objective_value, project_mu_gradient, Objective};
use crate::io;
use crate::kinematics::Vec3;
use crate::optimizer::{minimize_static, OptimizerError};
use crate::quasistatic::{evolve, prepare_initial, EvolveOptions, Partition};
use crate::strayfield::{magnetostatic_energy, rasterize, solve_potential, weak_form_residual};
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_STALLED: i32 = 2;
pub const EXIT_INADMISSIBLE: i32 = 3;
pub const EXIT_STEP_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "chiralmag", version, about = "Large-strain magnetoelasticity with DMI")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the config's RNG seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Caps the evaluator thread pool.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize the static energy and persist state, energies and traces.
    Minimize,
    /// Run the quasistatic evolution over the configured partition.
    Evolve,
    /// Run a named invariant suite and print a pass/fail table.
    Check {
        #[arg(long)]
        suite: String,
    },
    /// Print the topological degree of the configured deformation at a point.
    Degree {
        #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"], allow_negative_numbers = true)]
        point: Vec<f64>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn prepare_out_dir(cli: &Cli, cfg: &RunConfig) -> std::io::Result<PathBuf> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    match &cli.config {
        Some(path) => io::copy_config_into(path, &out)?,
        None => io::write_json(&out.join("config.json"), cfg)?,
    }
    Ok(out)
}

pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        // ignore the error if a pool already exists (tests, repeat calls)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    match &cli.command {
        Command::Minimize => cmd_minimize(&cli, &cfg),
        Command::Evolve => cmd_evolve(&cli, &cfg),
        Command::Check { suite } => cmd_check(&cfg, suite),
        Command::Degree { point } => cmd_degree(&cfg, point),
    }
}

fn persist_failure(e: &OptimizerError) -> i32 {
    eprintln!("minimization failed: {e}");
    match e {
        OptimizerError::LineSearchStalled { .. } => EXIT_STALLED,
        OptimizerError::Energy(_) => EXIT_INADMISSIBLE,
    }
}

pub fn cmd_minimize(cli: &Cli, cfg: &RunConfig) -> i32 {
    let q0 = match cfg.initial_state() {
        Ok(q) => q,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let out = match prepare_out_dir(cli, cfg) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("cannot prepare output directory: {e}");
            return EXIT_CONFIG;
        }
    };
    let loads = cfg.load_schedule();
    let res = match minimize_static(0.0, &q0, &cfg.material, &loads, &cfg.optimizer) {
        Ok(res) => res,
        Err(e) => return persist_failure(&e),
    };

    let write = (|| -> std::io::Result<()> {
        io::write_json(&out.join("energy.json"), &res.breakdown)?;
        io::write_convergence_csv(&out.join("convergence.csv"), &res.log)?;
        io::write_vtk_state(&out, "final", &res.state)
    })();
    if let Err(e) = write {
        eprintln!("cannot write results: {e}");
        return EXIT_CONFIG;
    }
    log::info!(
        "minimize: {} iterations, total energy {}",
        res.iterations,
        res.breakdown.total
    );

    // admissibility audit of the output: positive determinants and the
    // Ciarlet-Necas injectivity check
    if res.state.min_quadrature_det() <= cfg.optimizer.det_floor {
        eprintln!("output state violates the determinant floor");
        return EXIT_INADMISSIBLE;
    }
    let egrid = EulerianGrid::enclose(&res.state, cfg.eulerian_resolution);
    let dc = deformed_configuration(&res.state, &egrid);
    let cn = ciarlet_necas_check(&res.state, &dc);
    if let Err(e) = io::write_json(&out.join("ciarlet_necas.json"), &cn) {
        eprintln!("cannot write results: {e}");
        return EXIT_CONFIG;
    }
    if !cn.satisfied {
        eprintln!(
            "output state violates the Ciarlet-Necas condition: lhs {} > rhs {}",
            cn.lhs, cn.rhs
        );
        return EXIT_INADMISSIBLE;
    }
    EXIT_OK
}

pub fn cmd_evolve(cli: &Cli, cfg: &RunConfig) -> i32 {
    let partition = match &cfg.partition {
        Some(p) => Partition::uniform(p.t_end, p.steps),
        None => {
            eprintln!("config error: `partition` is required for evolve");
            return EXIT_CONFIG;
        }
    };
    let q_guess = match cfg.initial_state() {
        Ok(q) => q,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let out = match prepare_out_dir(cli, cfg) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("cannot prepare output directory: {e}");
            return EXIT_CONFIG;
        }
    };
    let loads = cfg.load_schedule();
    let opts = EvolveOptions {
        seed: cfg.seed,
        ..EvolveOptions::default()
    };
    let q0 = match prepare_initial(&q_guess, &cfg.material, &loads, &cfg.optimizer) {
        Ok(res) => res.state,
        Err(e) => return persist_failure(&e),
    };
    let traj = match evolve(&q0, &cfg.material, &loads, &partition, &cfg.optimizer, &opts) {
        Ok(traj) => traj,
        Err(e) => return persist_failure(&e),
    };

    let write = (|| -> std::io::Result<()> {
        io::write_trajectory_csv(&out.join("trajectory.csv"), &traj)?;
        io::write_json(&out.join("audits.json"), &traj.audits)?;
        io::write_json(&out.join("gronwall.json"), &traj.gronwall)?;
        io::write_json(
            &out.join("balance.json"),
            &crate::quasistatic::energy_balance_report(&traj, &loads),
        )?;
        for (i, q) in traj.states.iter().enumerate() {
            io::write_vtk_state(&out, &format!("step_{i:03}"), q)?;
        }
        Ok(())
    })();
    if let Err(e) = write {
        eprintln!("cannot write results: {e}");
        return EXIT_CONFIG;
    }
    log::info!(
        "evolve: {} steps, cumulative dissipation {}",
        traj.audits.len(),
        traj.total_dissipation()
    );

    if !traj.all_audits_passed() {
        for a in &traj.audits {
            if !(a.stability_ok && a.energy_ok && a.gronwall_ok && a.power_certified) {
                eprintln!(
                    "step {} failed audits (stability {}, energy {}, gronwall {}, power {})",
                    a.step, a.stability_ok, a.energy_ok, a.gronwall_ok, a.power_certified
                );
            }
        }
        return EXIT_STEP_FAILED;
    }
    EXIT_OK
}

pub fn cmd_degree(cfg: &RunConfig, point: &[f64]) -> i32 {
    if point.len() != 3 {
        eprintln!("--point needs exactly three coordinates");
        return EXIT_CONFIG;
    }
    let q = match cfg.initial_state() {
        Ok(q) => q,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let xi = Vec3::new(point[0], point[1], point[2]);
    match topological_degree(&q.grid, &q.y, xi) {
        Ok(deg) => {
            println!("{deg}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("degree query failed: {e}");
            return EXIT_CONFIG;
        }
    }
}

pub const SUITE_NAMES: [&str; 6] = [
    "kinematics",
    "energy",
    "dissipation",
    "geometry",
    "strayfield",
    "gradients",
];

pub fn cmd_check(cfg: &RunConfig, suite: &str) -> i32 {
    let checks = match run_suite(cfg, suite) {
        Some(checks) => checks,
        None => {
            eprintln!(
                "unknown suite `{suite}` (available: {} or `all`)",
                SUITE_NAMES.join(", ")
            );
            return EXIT_CONFIG;
        }
    };
    let mut all_ok = true;
    for (name, ok) in &checks {
        println!("{:<44} {}", name, if *ok { "PASS" } else { "FAIL" });
        all_ok &= ok;
    }
    if all_ok {
        EXIT_OK
    } else {
        EXIT_CONFIG
    }
}

/// Runs the named invariant suite; `None` for an unknown name.
pub fn run_suite(cfg: &RunConfig, suite: &str) -> Option<Vec<(String, bool)>> {
    let mut checks = Vec::new();
    match suite {
        "kinematics" => suite_kinematics(cfg, &mut checks),
        "energy" => suite_energy(cfg, &mut checks),
        "dissipation" => suite_dissipation(cfg, &mut checks),
        "geometry" => suite_geometry(cfg, &mut checks),
        "strayfield" => suite_strayfield(cfg, &mut checks),
        "gradients" => suite_gradients(cfg, &mut checks),
        "all" => {
            for s in SUITE_NAMES {
                run_suite(cfg, s).map(|c| checks.extend(c));
            }
        }
        _ => return None,
    }
    Some(checks)
}

fn random_state(grid: &Grid, rng: &mut impl Rng, amp: f64) -> State {
    let y = DeformationField::from_map(grid, |x| {
        x + amp
            * Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
    });
    let mu = MagnetizationField::from_map(grid, |_| {
        Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ) + Vec3::new(0.0, 0.0, 1.5)
    })
    .expect("offset keeps directions nonzero");
    State {
        grid: grid.clone(),
        y,
        mu,
    }
}

fn suite_kinematics(cfg: &RunConfig, checks: &mut Vec<(String, bool)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = Grid::unit_cube(4);
    // Piola identity for an affine deformation against a bump test field
    // zeta_i = c_i x(1-x) y(1-y) z(1-z) vanishing on the boundary
    let a = crate::kinematics::Mat3::new(
        1.1, 0.2, 0.0, //
        -0.1, 0.9, 0.3, //
        0.0, 0.1, 1.2,
    );
    let y = DeformationField::from_map(&grid, |x| a * x);
    let grad_zeta = |x: Vec3| {
        let b = |t: f64| t * (1.0 - t);
        let db = |t: f64| 1.0 - 2.0 * t;
        let g = Vec3::new(
            db(x.x) * b(x.y) * b(x.z),
            b(x.x) * db(x.y) * b(x.z),
            b(x.x) * b(x.y) * db(x.z),
        );
        crate::kinematics::Mat3::from_rows(&[
            g.transpose(),
            (2.0 * g).transpose(),
            (-g).transpose(),
        ])
    };
    let res = crate::kinematics::piola_residual(&grid, &y, grad_zeta);
    checks.push(("kinematics/piola-identity".into(), res.abs() < 1e-12));
    let ok_inverse = (0..20).all(|_| {
        let f = crate::kinematics::Mat3::identity()
            + 0.2 * crate::kinematics::Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        match crate::kinematics::inverse_gradient(&f) {
            Ok(finv) => ((f * finv) - crate::kinematics::Mat3::identity()).norm() < 1e-12,
            Err(_) => true, // rejected non-orientation-preserving sample
        }
    });
    checks.push(("kinematics/inverse-gradient".into(), ok_inverse));
}

fn suite_energy(cfg: &RunConfig, checks: &mut Vec<(String, bool)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = Grid::unit_cube(3);
    let ok = (0..100).all(|_| {
        let q = random_state(&grid, &mut rng, 0.06);
        coercivity_floor(&q, &cfg.material)
            .map(|r| r.floor_holds)
            .unwrap_or(false)
    });
    checks.push(("energy/coercivity-floor".into(), ok));
    let helix = fixtures::build("helix", 8).expect("known fixture");
    let m = MaterialModel::default();
    let magnetic = crate::energy::exchange_energy(&helix, &m).unwrap()
        + crate::energy::dmi_energy(&helix, &m).unwrap();
    let oracle = -m.kappa * m.kappa / (4.0 * m.alpha);
    checks.push((
        "energy/helix-oracle".into(),
        (magnetic - oracle).abs() / oracle.abs() < 0.05,
    ));
}

fn suite_dissipation(cfg: &RunConfig, checks: &mut Vec<(String, bool)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = Grid::unit_cube(3);
    let ok = (0..5).all(|_| {
        let q = random_state(&grid, &mut rng, 0.05);
        (0..20).all(|_| {
            let axis = nalgebra::Unit::new_normalize(Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ));
            let rot = nalgebra::Rotation3::from_axis_angle(&axis, rng.gen_range(0.0..6.28))
                .into_inner();
            let c = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let q_tilde = State {
                grid: grid.clone(),
                y: DeformationField {
                    nodes: q.y.nodes.iter().map(|v| rot * v + c).collect(),
                },
                mu: MagnetizationField {
                    nodes: q.mu.nodes.iter().map(|v| rot * v).collect(),
                },
            };
            dissipation_distance(&q_tilde, &q).unwrap() < 1e-10 * grid.volume()
        })
    });
    checks.push(("dissipation/rigid-motion-free".into(), ok));
}

fn suite_geometry(cfg: &RunConfig, checks: &mut Vec<(String, bool)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let q = fixtures::ball_map_state(16);
    // degree 1 inside the wedges, 0 outside the image
    let deg_ok = (0..100).all(|_| {
        let x1: f64 = rng.gen_range(0.1..0.9) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let x2 = rng.gen_range(-0.9..0.9);
        let x3 = rng.gen_range(-0.9..0.9);
        let xi = Vec3::new(x1, x2, x1.abs() * x3);
        topological_degree(&q.grid, &q.y, xi).map(|d| d == 1).unwrap_or(false)
    }) && topological_degree(&q.grid, &q.y, Vec3::new(0.5, 0.0, 0.9))
        .map(|d| d == 0)
        .unwrap_or(false);
    checks.push(("geometry/ball-map-degree".into(), deg_ok));

    let egrid = EulerianGrid::enclose(&q, 32);
    let dc = deformed_configuration(&q, &egrid);
    checks.push((
        "geometry/ball-map-two-components".into(),
        dc.component_count() == 2,
    ));
    checks.push((
        "geometry/ball-map-ciarlet-necas".into(),
        ciarlet_necas_check(&q, &dc).satisfied,
    ));

    let wrap = fixtures::wrap_state(16);
    let wgrid = EulerianGrid::enclose(&wrap, 48);
    let wdc = deformed_configuration(&wrap, &wgrid);
    let cn = ciarlet_necas_check(&wrap, &wdc);
    checks.push((
        "geometry/wrap-violates-ciarlet-necas".into(),
        !cn.satisfied && cn.lhs / cn.rhs >= 1.4,
    ));

    let smooth = State {
        y: DeformationField::from_map(&Grid::unit_cube(8), |x| {
            x + 0.1
                * Vec3::new(
                    (2.0 * x.y).sin(),
                    (2.0 * x.z).sin(),
                    (2.0 * x.x).sin(),
                )
        }),
        mu: MagnetizationField::constant(&Grid::unit_cube(8), Vec3::z()),
        grid: Grid::unit_cube(8),
    };
    let sgrid = EulerianGrid::enclose(&smooth, cfg.eulerian_resolution.max(32));
    let sdc = deformed_configuration(&smooth, &sgrid);
    let inv = inverse_jacobian_audit(&smooth, &sdc);
    checks.push((
        "geometry/inverse-identities".into(),
        inv.map(|r| r.volume_rel_error < 0.02 && r.adjugate_rel_error < 0.02)
            .unwrap_or(false),
    ));
}

fn suite_strayfield(cfg: &RunConfig, checks: &mut Vec<(String, bool)>) {
    let (egrid, source) = fixtures::magnetized_ball(cfg.eulerian_resolution.max(32));
    let pot = solve_potential(&egrid, &source).expect("grid is large enough");
    let m = MaterialModel::default();
    let energy = magnetostatic_energy(&pot, &m);
    let oracle = m.mu0 * (4.0 * std::f64::consts::PI / 3.0) / 6.0;
    checks.push((
        "strayfield/ball-energy-oracle".into(),
        (energy - oracle).abs() / oracle < 0.05,
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let phi: Vec<f64> = (0..egrid.num_voxels())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    checks.push((
        "strayfield/weak-form-residual".into(),
        weak_form_residual(&pot, &source, &phi) < 1e-6,
    ));
    // pipeline smoke test: identity state has unit-ball-free geometry, the
    // cube's demag energy must be positive and below mu0/2 vol
    let q = fixtures::identity_state(4);
    let dc = deformed_configuration(&q, &EulerianGrid::enclose(&q, 32));
    let src = rasterize(&q, &dc);
    let covered: f64 = src.iter().filter(|s| s.norm() > 0.0).count() as f64;
    checks.push(("strayfield/rasterize-covers-body".into(), covered > 0.0));
}

fn suite_gradients(cfg: &RunConfig, checks: &mut Vec<(String, bool)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = Grid::new(
        [0.0; 3],
        [1.0; 3],
        [3; 3],
        vec![crate::fields::BoxFace::ZMin],
        vec![crate::fields::BoxFace::ZMax],
    );
    let q = random_state(&grid, &mut rng, 0.04);
    let q_prev = random_state(&grid, &mut rng, 0.04);
    let loads = LoadSchedule {
        body: Some(crate::energy::TimeProfile::constant(Vec3::new(0.1, 0.0, -0.2))),
        surface: None,
        field: Some(crate::energy::TimeProfile::constant(Vec3::new(0.0, 0.3, 0.4))),
        t_end: 1.0,
    };
    let obj = Objective {
        material: &cfg.material,
        loads: &loads,
        t: 0.5,
        include_tv: true,
        eps_tv: 1e-3,
        dissipation_from: Some(&q_prev),
        eps_d: 1e-4,
    };
    let (_, mut grad) = objective_gradient(&q, &obj).expect("admissible state");
    project_mu_gradient(&q, &mut grad);
    let h = 1e-6;
    let mut ok = true;
    for _ in 0..20 {
        let node = rng.gen_range(0..grid.num_nodes());
        let comp = rng.gen_range(0..3);
        if !grid.is_dirichlet_node(node) {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp.y.nodes[node][comp] += h;
            qm.y.nodes[node][comp] -= h;
            let fd = (objective_value(&qp, &obj).unwrap()
                - objective_value(&qm, &obj).unwrap())
                / (2.0 * h);
            ok &= (fd - grad.y[node][comp]).abs() <= 1e-5 * (1.0 + fd.abs());
        }
        // tangential mu perturbation against the projected gradient
        let n = q.mu.nodes[node].normalize();
        let mut tangent = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        tangent -= n * n.dot(&tangent);
        if tangent.norm() > 1e-6 {
            let tangent = tangent.normalize();
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp.mu.nodes[node] += h * tangent;
            qm.mu.nodes[node] -= h * tangent;
            let fd = (objective_value(&qp, &obj).unwrap()
                - objective_value(&qm, &obj).unwrap())
                / (2.0 * h);
            ok &= (fd - grad.mu[node].dot(&tangent)).abs() <= 1e-5 * (1.0 + fd.abs());
        }
    }
    checks.push(("gradients/finite-difference".into(), ok));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_cli(cmd: Command) -> Cli {
        Cli {
            config: None,
            out: None,
            seed: None,
            threads: None,
            command: cmd,
        }
    }

    #[test]
    fn unknown_suite_is_rejected() {
        let cfg = RunConfig::default();
        assert!(run_suite(&cfg, "nonsense").is_none());
        assert_eq!(cmd_check(&cfg, "nonsense"), EXIT_CONFIG);
    }

    #[test]
    fn fast_suites_pass() {
        let cfg = RunConfig::default();
        for suite in ["kinematics", "energy", "dissipation", "gradients"] {
            let checks = run_suite(&cfg, suite).unwrap();
            assert!(!checks.is_empty());
            for (name, ok) in checks {
                assert!(ok, "check {name} failed");
            }
        }
    }

    #[test]
    fn degree_query_on_ball_map() {
        let cfg = RunConfig {
            fixture: Some("ball_map".into()),
            grid: crate::config::GridSpec {
                box_min: [-1.0; 3],
                box_max: [1.0; 3],
                dims: [16; 3],
                ..crate::config::GridSpec::default()
            },
            ..RunConfig::default()
        };
        assert_eq!(cmd_degree(&cfg, &[0.5, 0.0, 0.2]), EXIT_OK);
        assert_eq!(cmd_degree(&cfg, &[0.5, 0.0]), EXIT_CONFIG);
    }

    #[test]
    fn minimize_writes_artifacts_and_is_bitwise_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("run.json");
        let cfg = RunConfig {
            grid: crate::config::GridSpec {
                dims: [3; 3],
                ..crate::config::GridSpec::default()
            },
            optimizer: crate::optimizer::OptimizerConfig {
                max_outer_iters: 20,
                ..crate::optimizer::OptimizerConfig::default()
            },
            eulerian_resolution: 16,
            ..RunConfig::default()
        };
        io::write_json(&cfg_path, &cfg).unwrap();

        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("out{run}"));
            let cli = Cli {
                config: Some(cfg_path.clone()),
                out: Some(out.clone()),
                seed: Some(7),
                threads: None,
                command: Command::Minimize,
            };
            assert_eq!(super::run(cli), EXIT_OK);
            assert!(out.join("energy.json").exists());
            assert!(out.join("convergence.csv").exists());
            assert!(out.join("final_deformation.vtk").exists());
            assert!(out.join("run.json").exists());
            outputs.push(std::fs::read(out.join("energy.json")).unwrap());
        }
        assert_eq!(outputs[0], outputs[1], "energy.json differs between runs");
    }

    #[test]
    fn evolve_requires_partition() {
        let cfg = RunConfig::default();
        let cli = base_cli(Command::Evolve);
        assert_eq!(cmd_evolve(&cli, &cfg), EXIT_CONFIG);
    }
}
