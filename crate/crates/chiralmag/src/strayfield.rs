//! Magnetostatics: solves the stray-field equation
//! `Delta zeta = div(chi_{Omega^y} m)` on a padded Eulerian voxel grid and
//! returns `(mu0/2) int |grad zeta|^2`.
//!
//! The whole-space problem is truncated to a box with padding factor >= 2
//! per axis and solved spectrally with discrete-compatible operators: the
//! gradient is the forward difference `D`, the divergence its negative
//! adjoint, and the solve inverts `D^T D` exactly in Fourier space. The
//! discrete weak form `sum Dzeta . Dphi = sum source . Dphi` then holds to
//! machine precision for every grid function `phi`, mirroring the paper's
//! variational characterization; the truncation error is measured by a
//! padding-doubling test rather than assumed.

use crate::energy::MaterialModel;
use crate::fields::{shape_values, State};
use crate::geometry::{DeformedConfiguration, EulerianGrid};
use crate::kinematics::Vec3;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StrayFieldError {
    #[error("grid dimension {0} below the minimum of 8 voxels")]
    DegenerateGrid(usize),
}

/// Mean-zero stray-field potential with both gradient discretizations:
/// the forward difference that the solve is exact for, and central
/// differences for pointwise field evaluation.
#[derive(Debug, Clone)]
pub struct StrayFieldPotential {
    pub grid: EulerianGrid,
    pub zeta: Vec<f64>,
    pub grad_forward: Vec<Vec3>,
    pub grad_central: Vec<Vec3>,
    /// Box average of the source; drives the periodic-image compensation.
    pub mean_source: Vec3,
    /// `sum |D zeta|^2` of the raw periodic solution, before the Lorentz shift.
    pub periodic_grad_norm_sq: f64,
}

/// Voxel field of `chi_{Omega^y} . m`: covered voxels carry the normalized
/// magnetization evaluated at their Newton preimage, others zero.
pub fn rasterize(q: &State, dc: &DeformedConfiguration) -> Vec<Vec3> {
    (0..dc.grid.num_voxels())
        .map(|vox| {
            if dc.covering[vox] == 0 {
                return Vec3::zeros();
            }
            match dc.preimage[vox] {
                Some((cell, local)) => {
                    let nodes = q.grid.cell_nodes(cell as usize);
                    let n = shape_values(local);
                    let mut v = Vec3::zeros();
                    for i in 0..8 {
                        v += n[i] * q.mu.nodes[nodes[i]];
                    }
                    if v.norm() > 0.0 {
                        v.normalize()
                    } else {
                        Vec3::zeros()
                    }
                }
                None => Vec3::zeros(),
            }
        })
        .collect()
}

fn fft3d(data: &mut [Complex<f64>], dims: [usize; 3], inverse: bool) {
    let mut planner = FftPlanner::new();
    let [nx, ny, nz] = dims;
    // x lines are contiguous
    {
        let fft = if inverse {
            planner.plan_fft_inverse(nx)
        } else {
            planner.plan_fft_forward(nx)
        };
        for line in data.chunks_exact_mut(nx) {
            fft.process(line);
        }
    }
    // y and z lines via gather/scatter
    for (axis, n) in [(1usize, ny), (2usize, nz)] {
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let mut line = vec![Complex::default(); n];
        let stride = if axis == 1 { nx } else { nx * ny };
        let outer = if axis == 1 { nz } else { ny };
        let inner = nx;
        for o in 0..outer {
            for i in 0..inner {
                let base = if axis == 1 { i + nx * ny * o } else { i + nx * o };
                for t in 0..n {
                    line[t] = data[base + stride * t];
                }
                fft.process(&mut line);
                for t in 0..n {
                    data[base + stride * t] = line[t];
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / (nx * ny * nz) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Spectral solve of `D^T D zeta = D^T source` (the discrete weak form of
/// the magnetostatic Maxwell equation), normalized to zero mean.
pub fn solve_potential(
    grid: &EulerianGrid,
    source: &[Vec3],
) -> Result<StrayFieldPotential, StrayFieldError> {
    for &n in &grid.dims {
        if n < 8 {
            return Err(StrayFieldError::DegenerateGrid(n));
        }
    }
    let dims = grid.dims;
    let [nx, ny, nz] = dims;
    let nvox = grid.num_voxels();
    assert_eq!(source.len(), nvox);
    let h = grid.voxel_size();

    // forward-difference symbols lambda_d(k) = (e^{i theta} - 1)/h_d
    let symbol = |n: usize, h: f64| -> Vec<Complex<f64>> {
        (0..n)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                (Complex::new(theta.cos(), theta.sin()) - Complex::new(1.0, 0.0)) / h
            })
            .collect()
    };
    let lam = [symbol(nx, h[0]), symbol(ny, h[1]), symbol(nz, h[2])];

    let mut zeta_hat = vec![Complex::default(); nvox];
    for d in 0..3 {
        let mut s: Vec<Complex<f64>> =
            source.iter().map(|v| Complex::new(v[d], 0.0)).collect();
        fft3d(&mut s, dims, false);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let idx = i + nx * (j + ny * k);
                    let l = [lam[0][i], lam[1][j], lam[2][k]][d];
                    zeta_hat[idx] += l.conj() * s[idx];
                }
            }
        }
    }
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let idx = i + nx * (j + ny * k);
                let denom =
                    lam[0][i].norm_sqr() + lam[1][j].norm_sqr() + lam[2][k].norm_sqr();
                if denom == 0.0 {
                    zeta_hat[idx] = Complex::default(); // zero-mean representative
                } else {
                    zeta_hat[idx] /= denom;
                }
            }
        }
    }
    fft3d(&mut zeta_hat, dims, true);
    let zeta: Vec<f64> = zeta_hat.iter().map(|c| c.re).collect();

    // Lorentz compensation for the truncation to a periodic cubic cell:
    // the free-space field differs from the periodic one by the uniform
    // shift <s>/3 inside the box, and the energy by (V/3)|<s>|^2 / 2.
    let mean_source = source.iter().sum::<Vec3>() / nvox as f64;
    let shift = mean_source / 3.0;

    let at = |i: usize, j: usize, k: usize| zeta[i % nx + nx * (j % ny + ny * (k % nz))];
    let mut grad_forward = Vec::with_capacity(nvox);
    let mut grad_central = Vec::with_capacity(nvox);
    let mut periodic_grad_norm_sq = 0.0;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let c = at(i, j, k);
                let g = Vec3::new(
                    (at(i + 1, j, k) - c) / h[0],
                    (at(i, j + 1, k) - c) / h[1],
                    (at(i, j, k + 1) - c) / h[2],
                );
                periodic_grad_norm_sq += g.norm_squared();
                grad_forward.push(g + shift);
                grad_central.push(
                    Vec3::new(
                        (at(i + 1, j, k) - at(i + nx - 1, j, k)) / (2.0 * h[0]),
                        (at(i, j + 1, k) - at(i, j + ny - 1, k)) / (2.0 * h[1]),
                        (at(i, j, k + 1) - at(i, j, k + nz - 1)) / (2.0 * h[2]),
                    ) + shift,
                );
            }
        }
    }
    Ok(StrayFieldPotential {
        grid: grid.clone(),
        zeta,
        grad_forward,
        grad_central,
        mean_source,
        periodic_grad_norm_sq,
    })
}

/// `(mu0/2) int |grad zeta|^2` over the box: the periodic solve's gradient
/// energy plus the free-space compensation `(V/3)|<s>|^2`.
pub fn magnetostatic_energy(pot: &StrayFieldPotential, m: &MaterialModel) -> f64 {
    let voxvol = pot.grid.voxel_volume();
    let vbox = voxvol * pot.grid.num_voxels() as f64;
    0.5 * m.mu0
        * (voxvol * pot.periodic_grad_norm_sq + vbox * pot.mean_source.norm_squared() / 3.0)
}

/// Relative residual of the weak form
/// `sum Dzeta . Dphi - sum source . Dphi` for a test grid function `phi`.
pub fn weak_form_residual(
    pot: &StrayFieldPotential,
    source: &[Vec3],
    phi: &[f64],
) -> f64 {
    let [nx, ny, nz] = pot.grid.dims;
    let h = pot.grid.voxel_size();
    let at = |i: usize, j: usize, k: usize| phi[i % nx + nx * (j % ny + ny * (k % nz))];
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let idx = i + nx * (j + ny * k);
                let c = at(i, j, k);
                let dphi = Vec3::new(
                    (at(i + 1, j, k) - c) / h[0],
                    (at(i, j + 1, k) - c) / h[1],
                    (at(i, j, k + 1) - c) / h[2],
                );
                lhs += pot.grad_forward[idx].dot(&dphi);
                rhs += source[idx].dot(&dphi);
            }
        }
    }
    (lhs - rhs).abs() / (rhs.abs().max(lhs.abs()) + 1e-300)
}

/// Full pipeline: mask, rasterize, solve, integrate. The convenience handle
/// behind `energy::total_energy`'s magnetostatic term.
pub fn state_magnetostatic_energy(
    q: &State,
    m: &MaterialModel,
    voxels: usize,
) -> Result<f64, StrayFieldError> {
    let egrid = EulerianGrid::enclose(q, voxels);
    let dc = crate::geometry::deformed_configuration(q, &egrid);
    let source = rasterize(q, &dc);
    let pot = solve_potential(&egrid, &source)?;
    Ok(magnetostatic_energy(&pot, m))
}

/// Uniformly magnetized ball raster on a padded grid; shared by tests and
/// the magnetized-ball fixture.
pub fn ball_source(grid: &EulerianGrid, center: Vec3, radius: f64, m: Vec3) -> Vec<Vec3> {
    (0..grid.num_voxels())
        .map(|vox| {
            if (grid.center(vox) - center).norm() < radius {
                m
            } else {
                Vec3::zeros()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{DeformationField, Grid, MagnetizationField};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ball_grid(n: usize) -> EulerianGrid {
        EulerianGrid {
            box_min: [-2.0; 3],
            box_max: [2.0; 3],
            dims: [n; 3],
        }
    }

    #[test]
    fn zero_source_zero_potential() {
        let grid = ball_grid(16);
        let source = vec![Vec3::zeros(); grid.num_voxels()];
        let pot = solve_potential(&grid, &source).unwrap();
        assert!(pot.zeta.iter().all(|&z| z.abs() < 1e-12));
        assert_eq!(magnetostatic_energy(&pot, &MaterialModel::default()), 0.0);
    }

    #[test]
    fn degenerate_grid_rejected() {
        let grid = EulerianGrid {
            box_min: [0.0; 3],
            box_max: [1.0; 3],
            dims: [4, 16, 16],
        };
        let source = vec![Vec3::zeros(); grid.num_voxels()];
        assert!(matches!(
            solve_potential(&grid, &source),
            Err(StrayFieldError::DegenerateGrid(4))
        ));
    }

    #[test]
    fn uniformly_magnetized_ball_energy_and_field() {
        let grid = ball_grid(64);
        let source = ball_source(&grid, Vec3::zeros(), 1.0, Vec3::z());
        let pot = solve_potential(&grid, &source).unwrap();
        let m = MaterialModel::default();
        let energy = magnetostatic_energy(&pot, &m);
        let exact = m.mu0 * (4.0 * std::f64::consts::PI / 3.0) / 6.0;
        assert!(
            (energy - exact).abs() / exact < 0.05,
            "energy {energy}, exact {exact}"
        );

        // demagnetizing field m/3 away from the surface; the staircase
        // surface leaves pointwise ripple, so the 2-voxel-depth check is in
        // the RMS sense, with a pointwise check deeper inside
        let h = grid.voxel_size()[0];
        let target = Vec3::z() / 3.0;
        let deviation = |depth: f64| {
            let mut worst = 0.0f64;
            let mut sum_sq = 0.0;
            let mut n = 0usize;
            for vox in 0..grid.num_voxels() {
                if grid.center(vox).norm() < depth {
                    let d = (pot.grad_central[vox] - target).norm();
                    worst = worst.max(d);
                    sum_sq += d * d;
                    n += 1;
                }
            }
            (worst / target.norm(), (sum_sq / n as f64).sqrt() / target.norm())
        };
        let (_, rms_shallow) = deviation(1.0 - 2.0 * h);
        assert!(rms_shallow < 0.03, "rms deviation {rms_shallow}");
        let (worst_deep, _) = deviation(1.0 - 5.0 * h);
        assert!(worst_deep < 0.035, "worst deep deviation {worst_deep}");
    }

    #[test]
    fn weak_form_residual_machine_zero() {
        let grid = ball_grid(32);
        let source = ball_source(&grid, Vec3::new(0.2, -0.1, 0.0), 0.9, Vec3::new(0.3, 0.8, -0.5));
        let pot = solve_potential(&grid, &source).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            // random polynomial times a compactly supported bump
            let c: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let phi: Vec<f64> = (0..grid.num_voxels())
                .map(|vox| {
                    let p = grid.center(vox);
                    let r2 = p.norm_squared() / 4.0;
                    let bump = if r2 < 1.0 { (-1.0 / (1.0 - r2)).exp() } else { 0.0 };
                    bump * (c[0]
                        + c[1] * p.x
                        + c[2] * p.y
                        + c[3] * p.z
                        + c[4] * p.x * p.y
                        + c[5] * p.y * p.z
                        + c[6] * p.x * p.z
                        + c[7] * p.x * p.x
                        + c[8] * p.y * p.y
                        + c[9] * p.z * p.z)
                })
                .collect();
            let res = weak_form_residual(&pot, &source, &phi);
            assert!(res <= 1e-6, "residual {res}");
        }
    }

    #[test]
    fn linearity_of_the_solve() {
        let grid = ball_grid(16);
        let s1 = ball_source(&grid, Vec3::new(0.3, 0.0, 0.0), 0.7, Vec3::x());
        let s2 = ball_source(&grid, Vec3::new(-0.4, 0.2, 0.0), 0.5, Vec3::new(0.0, 1.0, 1.0));
        let sum: Vec<Vec3> = s1.iter().zip(&s2).map(|(a, b)| a + b).collect();
        let p1 = solve_potential(&grid, &s1).unwrap();
        let p2 = solve_potential(&grid, &s2).unwrap();
        let ps = solve_potential(&grid, &sum).unwrap();
        for i in 0..grid.num_voxels() {
            assert_relative_eq!(ps.zeta[i], p1.zeta[i] + p2.zeta[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn energy_invariant_under_voxel_translation() {
        let grid = ball_grid(32);
        let m = MaterialModel::default();
        let h = grid.voxel_size()[0];
        let s1 = ball_source(&grid, Vec3::zeros(), 0.8, Vec3::z());
        let s2 = ball_source(&grid, Vec3::new(3.0 * h, -2.0 * h, 5.0 * h), 0.8, Vec3::z());
        let e1 = magnetostatic_energy(&solve_potential(&grid, &s1).unwrap(), &m);
        let e2 = magnetostatic_energy(&solve_potential(&grid, &s2).unwrap(), &m);
        assert_relative_eq!(e1, e2, epsilon = 1e-10, max_relative = 1e-10);
    }

    #[test]
    fn doubling_padding_changes_energy_little() {
        let m = MaterialModel::default();
        let tight = ball_grid(48); // box half-width 2, radius 1
        let wide = EulerianGrid {
            box_min: [-4.0; 3],
            box_max: [4.0; 3],
            dims: [96; 3],
        };
        let e1 = magnetostatic_energy(
            &solve_potential(&tight, &ball_source(&tight, Vec3::zeros(), 1.0, Vec3::z())).unwrap(),
            &m,
        );
        let e2 = magnetostatic_energy(
            &solve_potential(&wide, &ball_source(&wide, Vec3::zeros(), 1.0, Vec3::z())).unwrap(),
            &m,
        );
        assert!((e1 - e2).abs() / e2 < 0.01, "tight {e1}, wide {e2}");
    }

    #[test]
    fn rasterize_identity_constant_mu() {
        let grid = Grid::unit_cube(4);
        let q = State::identity_with_constant_mu(grid, Vec3::x());
        let egrid = EulerianGrid::enclose(&q, 24);
        let dc = crate::geometry::deformed_configuration(&q, &egrid);
        let source = rasterize(&q, &dc);
        for vox in 0..egrid.num_voxels() {
            let c = egrid.center(vox);
            let inside = (0..3).all(|d| c[d] > 0.0 && c[d] < 1.0);
            if inside {
                assert_relative_eq!((source[vox] - Vec3::x()).norm(), 0.0, epsilon = 1e-9);
            } else {
                assert_eq!(source[vox], Vec3::zeros());
            }
        }
    }

    #[test]
    fn rasterized_volume_matches_jacobian() {
        let grid = Grid::unit_cube(5);
        let y = DeformationField::from_map(&grid, |x| {
            x + 0.07 * Vec3::new((x.y * 2.0).sin(), x.z * x.x, (x.x * 3.0).cos() - 1.0)
        });
        let q = State {
            mu: MagnetizationField::constant(&grid, Vec3::z()),
            y,
            grid,
        };
        let egrid = EulerianGrid::enclose(&q, 48);
        let dc = crate::geometry::deformed_configuration(&q, &egrid);
        let source = rasterize(&q, &dc);
        let raster_vol =
            source.iter().filter(|v| v.norm() > 0.0).count() as f64 * egrid.voxel_volume();
        let quad = crate::fields::QuadratureRule::gauss2(&q.grid);
        let mut det_int = 0.0;
        for cell in 0..q.grid.num_cells() {
            for &p in &quad.points {
                det_int += quad.weight * q.y.gradient(&q.grid, cell, p).determinant();
            }
        }
        assert!(
            (raster_vol - det_int).abs() / det_int < 0.02,
            "raster {raster_vol}, integral {det_int}"
        );
    }

    #[test]
    fn rasterize_ball_map_two_wedges() {
        let grid = Grid::new(
            [-1.0; 3],
            [1.0; 3],
            [8; 3],
            vec![crate::fields::BoxFace::XMin, crate::fields::BoxFace::XMax],
            vec![],
        );
        let y = DeformationField::from_map(&grid, |x| Vec3::new(x.x, x.y, x.x.abs() * x.z));
        let q = State {
            mu: MagnetizationField::constant(&grid, Vec3::z()),
            y,
            grid,
        };
        let egrid = EulerianGrid::enclose(&q, 32);
        let dc = crate::geometry::deformed_configuration(&q, &egrid);
        let source = rasterize(&q, &dc);
        // the segment S = {0} x (-1,1) x {0} is boundary image: nearby voxels
        // masked out
        for vox in 0..egrid.num_voxels() {
            let c = egrid.center(vox);
            if c.x.abs() < 0.5 * egrid.voxel_size()[0] && c.z.abs() < 0.5 * egrid.voxel_size()[2]
            {
                assert!(!dc.mask[vox]);
            }
            // wedge condition |xi_3| < |xi_1| holds on the rasterized set
            if source[vox].norm() > 0.0 {
                assert!(
                    c.z.abs() <= c.x.abs() + egrid.voxel_diagonal(),
                    "voxel outside wedges at {c:?}"
                );
            }
        }
    }
}
