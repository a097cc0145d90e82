//! Result persistence: pretty JSON documents, legacy-VTK structured-points
//! volumetric fields (nodal Lagrangean fields and voxel Eulerian fields),
//! and CSV iteration/trajectory traces. All writers format floats with the
//! shortest round-trip representation, so identical values yield
//! byte-identical files.

use crate::fields::{Grid, State};
use crate::geometry::EulerianGrid;
use crate::kinematics::Vec3;
use crate::optimizer::IterationRecord;
use crate::quasistatic::Trajectory;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Result, Write};
use std::path::Path;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()
}

fn vtk_header(w: &mut impl Write, title: &str) -> Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")
}

fn write_vectors(w: &mut impl Write, name: &str, data: &[Vec3]) -> Result<()> {
    writeln!(w, "VECTORS {name} double")?;
    for v in data {
        writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
    }
    Ok(())
}

/// Nodal vector field on the reference grid (node order is x-fastest,
/// which is exactly VTK's point order).
pub fn write_vtk_nodal_field(
    path: &Path,
    grid: &Grid,
    name: &str,
    data: &[Vec3],
) -> Result<()> {
    assert_eq!(data.len(), grid.num_nodes());
    let mut w = BufWriter::new(File::create(path)?);
    vtk_header(&mut w, name)?;
    let h = grid.spacing();
    writeln!(
        w,
        "DIMENSIONS {} {} {}",
        grid.dims[0] + 1,
        grid.dims[1] + 1,
        grid.dims[2] + 1
    )?;
    writeln!(
        w,
        "ORIGIN {} {} {}",
        grid.box_min[0], grid.box_min[1], grid.box_min[2]
    )?;
    writeln!(w, "SPACING {} {} {}", h[0], h[1], h[2])?;
    writeln!(w, "POINT_DATA {}", grid.num_nodes())?;
    write_vectors(&mut w, name, data)?;
    w.flush()
}

/// Writes the state as two VTK files: the deformation and the (normalized
/// on output, raw nodal) magnetization.
pub fn write_vtk_state(dir: &Path, stem: &str, q: &State) -> Result<()> {
    write_vtk_nodal_field(
        &dir.join(format!("{stem}_deformation.vtk")),
        &q.grid,
        "deformation",
        &q.y.nodes,
    )?;
    write_vtk_nodal_field(
        &dir.join(format!("{stem}_magnetization.vtk")),
        &q.grid,
        "magnetization",
        &q.mu.nodes,
    )
}

/// Voxel vector field on an Eulerian grid, stored at voxel centers.
pub fn write_vtk_voxel_field(
    path: &Path,
    grid: &EulerianGrid,
    name: &str,
    data: &[Vec3],
) -> Result<()> {
    assert_eq!(data.len(), grid.num_voxels());
    let mut w = BufWriter::new(File::create(path)?);
    vtk_header(&mut w, name)?;
    let h = grid.voxel_size();
    writeln!(w, "DIMENSIONS {} {} {}", grid.dims[0], grid.dims[1], grid.dims[2])?;
    writeln!(
        w,
        "ORIGIN {} {} {}",
        grid.box_min[0] + 0.5 * h[0],
        grid.box_min[1] + 0.5 * h[1],
        grid.box_min[2] + 0.5 * h[2]
    )?;
    writeln!(w, "SPACING {} {} {}", h[0], h[1], h[2])?;
    writeln!(w, "POINT_DATA {}", grid.num_voxels())?;
    write_vectors(&mut w, name, data)?;
    w.flush()
}

/// Voxel scalar field on an Eulerian grid.
pub fn write_vtk_voxel_scalars(
    path: &Path,
    grid: &EulerianGrid,
    name: &str,
    data: &[f64],
) -> Result<()> {
    assert_eq!(data.len(), grid.num_voxels());
    let mut w = BufWriter::new(File::create(path)?);
    vtk_header(&mut w, name)?;
    let h = grid.voxel_size();
    writeln!(w, "DIMENSIONS {} {} {}", grid.dims[0], grid.dims[1], grid.dims[2])?;
    writeln!(
        w,
        "ORIGIN {} {} {}",
        grid.box_min[0] + 0.5 * h[0],
        grid.box_min[1] + 0.5 * h[1],
        grid.box_min[2] + 0.5 * h[2]
    )?;
    writeln!(w, "SPACING {} {} {}", h[0], h[1], h[2])?;
    writeln!(w, "POINT_DATA {}", grid.num_voxels())?;
    writeln!(w, "SCALARS {name} double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in data {
        writeln!(w, "{v}")?;
    }
    w.flush()
}

/// Per-iteration convergence trace of one minimization.
pub fn write_convergence_csv(path: &Path, log: &[IterationRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "iteration,objective,grad_norm_mu,grad_norm_y")?;
    for r in log {
        writeln!(
            w,
            "{},{},{},{}",
            r.iteration, r.objective, r.grad_norm_mu, r.grad_norm_y
        )?;
    }
    w.flush()
}

/// Per-step trajectory trace of a quasistatic evolution.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "step,t,energy,dissipation,cumulative_dissipation,worst_stability_margin,energy_residual,iterations"
    )?;
    let mut cum = 0.0;
    for a in &traj.audits {
        cum += a.dissipation;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            a.step,
            a.t,
            traj.energies[a.step],
            a.dissipation,
            cum,
            a.stability.worst_margin,
            a.energy_residual,
            a.iterations
        )?;
    }
    w.flush()
}

/// Copies the config verbatim into the output directory.
pub fn copy_config_into(config_path: &Path, out_dir: &Path) -> Result<()> {
    let name = config_path
        .file_name()
        .unwrap_or_else(|| std::ffi::OsStr::new("config.json"));
    std::fs::copy(config_path, out_dir.join(name)).map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use tempfile::tempdir;

    #[test]
    fn vtk_nodal_file_shape() {
        let dir = tempdir().unwrap();
        let grid = Grid::unit_cube(2);
        let q = State::identity_with_constant_mu(grid, Vec3::z());
        write_vtk_state(dir.path(), "out", &q).unwrap();
        let text =
            std::fs::read_to_string(dir.path().join("out_deformation.vtk")).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0"));
        assert!(text.contains("DIMENSIONS 3 3 3"));
        assert!(text.contains("POINT_DATA 27"));
        assert_eq!(
            text.lines().filter(|l| !l.is_empty()).count(),
            9 + 27, // header + one line per node
        );
    }

    #[test]
    fn json_is_bitwise_stable() {
        let dir = tempdir().unwrap();
        let value = crate::energy::EnergyBreakdown {
            elastic: 1.0 / 3.0,
            ..Default::default()
        };
        let p1 = dir.path().join("a.json");
        let p2 = dir.path().join("b.json");
        write_json(&p1, &value).unwrap();
        write_json(&p2, &value).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn csv_trace_roundtrip() {
        let dir = tempdir().unwrap();
        let log = vec![
            IterationRecord {
                iteration: 0,
                objective: 1.5,
                grad_norm_mu: 0.1,
                grad_norm_y: 0.2,
            },
            IterationRecord {
                iteration: 1,
                objective: 1.25,
                grad_norm_mu: 0.05,
                grad_norm_y: 0.1,
            },
        ];
        let p = dir.path().join("log.csv");
        write_convergence_csv(&p, &log).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(2).unwrap().starts_with("1,1.25,"));
    }
}
