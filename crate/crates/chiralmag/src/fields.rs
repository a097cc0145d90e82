//! Reference-domain discretization: axis-aligned box grid, trilinear
//! deformation and pullback-magnetization fields, Gauss quadrature and
//! boundary bookkeeping.
//!
//! Magnetization is stored in pullback form `mu = m o y` on the same grid as
//! the deformation; Eulerian integrals are transformed to the reference
//! domain by the change of variables `det(grad y) dx`. Interpolated
//! magnetization is renormalized at evaluation points so the unit-sphere
//! constraint holds at quadrature points, not only at nodes.

use crate::kinematics::{inverse_gradient, KinematicsError, Mat3, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("zero magnetization vector at node {node}")]
    ZeroVectorNode { node: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("non-positive determinant in cell {cell}: {source}")]
    NonPositiveDeterminantInCell {
        cell: usize,
        source: KinematicsError,
    },
}

/// One of the six faces of the reference box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxFace {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl BoxFace {
    pub const ALL: [BoxFace; 6] = [
        BoxFace::XMin,
        BoxFace::XMax,
        BoxFace::YMin,
        BoxFace::YMax,
        BoxFace::ZMin,
        BoxFace::ZMax,
    ];

    /// Axis normal to the face and whether the face sits at the max end.
    pub fn axis_side(self) -> (usize, bool) {
        match self {
            BoxFace::XMin => (0, false),
            BoxFace::XMax => (0, true),
            BoxFace::YMin => (1, false),
            BoxFace::YMax => (1, true),
            BoxFace::ZMin => (2, false),
            BoxFace::ZMax => (2, true),
        }
    }
}

/// Axis-aligned reference domain with cell counts and boundary partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub box_min: [f64; 3],
    pub box_max: [f64; 3],
    pub dims: [usize; 3],
    pub dirichlet_faces: Vec<BoxFace>,
    pub neumann_faces: Vec<BoxFace>,
}

impl Grid {
    pub fn new(
        box_min: [f64; 3],
        box_max: [f64; 3],
        dims: [usize; 3],
        dirichlet_faces: Vec<BoxFace>,
        neumann_faces: Vec<BoxFace>,
    ) -> Self {
        assert!(dims.iter().all(|&n| n >= 1), "cell counts must be >= 1");
        assert!(
            (0..3).all(|a| box_max[a] > box_min[a]),
            "degenerate reference box"
        );
        assert!(
            !dirichlet_faces.is_empty(),
            "Dirichlet part of the boundary must be nonempty"
        );
        assert!(
            dirichlet_faces.iter().all(|f| !neumann_faces.contains(f)),
            "Dirichlet and Neumann face sets must be disjoint"
        );
        Grid {
            box_min,
            box_max,
            dims,
            dirichlet_faces,
            neumann_faces,
        }
    }

    /// Unit cube with Dirichlet data on all six faces.
    pub fn unit_cube(n: usize) -> Self {
        Grid::new(
            [0.0; 3],
            [1.0; 3],
            [n; 3],
            BoxFace::ALL.to_vec(),
            Vec::new(),
        )
    }

    pub fn spacing(&self) -> [f64; 3] {
        [
            (self.box_max[0] - self.box_min[0]) / self.dims[0] as f64,
            (self.box_max[1] - self.box_min[1]) / self.dims[1] as f64,
            (self.box_max[2] - self.box_min[2]) / self.dims[2] as f64,
        ]
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h[0] * h[1] * h[2]
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|a| self.box_max[a] - self.box_min[a]).product()
    }

    pub fn num_cells(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn num_nodes(&self) -> usize {
        (self.dims[0] + 1) * (self.dims[1] + 1) * (self.dims[2] + 1)
    }

    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.dims[0] + 1) * (j + (self.dims[1] + 1) * k)
    }

    pub fn node_coords(&self, idx: usize) -> (usize, usize, usize) {
        let nx = self.dims[0] + 1;
        let ny = self.dims[1] + 1;
        (idx % nx, (idx / nx) % ny, idx / (nx * ny))
    }

    pub fn node_position(&self, idx: usize) -> Vec3 {
        let (i, j, k) = self.node_coords(idx);
        let h = self.spacing();
        Vec3::new(
            self.box_min[0] + i as f64 * h[0],
            self.box_min[1] + j as f64 * h[1],
            self.box_min[2] + k as f64 * h[2],
        )
    }

    pub fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn cell_coords(&self, idx: usize) -> (usize, usize, usize) {
        let nx = self.dims[0];
        let ny = self.dims[1];
        (idx % nx, (idx / nx) % ny, idx / (nx * ny))
    }

    /// Low corner of a cell in reference coordinates.
    pub fn cell_origin(&self, cell: usize) -> Vec3 {
        let (i, j, k) = self.cell_coords(cell);
        let h = self.spacing();
        Vec3::new(
            self.box_min[0] + i as f64 * h[0],
            self.box_min[1] + j as f64 * h[1],
            self.box_min[2] + k as f64 * h[2],
        )
    }

    /// Node indices of a cell's 8 corners, ordered by local corner id
    /// `c = cx + 2*cy + 4*cz`.
    pub fn cell_nodes(&self, cell: usize) -> [usize; 8] {
        let (i, j, k) = self.cell_coords(cell);
        let mut out = [0usize; 8];
        for c in 0..8 {
            let (cx, cy, cz) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
            out[c] = self.node_index(i + cx, j + cy, k + cz);
        }
        out
    }

    /// True if the node with the given indices lies on any Dirichlet face.
    pub fn is_dirichlet_node(&self, idx: usize) -> bool {
        let (i, j, k) = self.node_coords(idx);
        self.dirichlet_faces.iter().any(|f| match f {
            BoxFace::XMin => i == 0,
            BoxFace::XMax => i == self.dims[0],
            BoxFace::YMin => j == 0,
            BoxFace::YMax => j == self.dims[1],
            BoxFace::ZMin => k == 0,
            BoxFace::ZMax => k == self.dims[2],
        })
    }

    /// Reference position of a point given by (cell, local coords in [0,1]^3).
    pub fn point(&self, cell: usize, local: Vec3) -> Vec3 {
        let h = self.spacing();
        self.cell_origin(cell) + Vec3::new(local.x * h[0], local.y * h[1], local.z * h[2])
    }
}

/// Trilinear shape functions at local coordinates `s` in [0,1]^3.
pub fn shape_values(s: Vec3) -> [f64; 8] {
    let mut n = [0.0; 8];
    for (c, v) in n.iter_mut().enumerate() {
        let fx = if c & 1 == 1 { s.x } else { 1.0 - s.x };
        let fy = if (c >> 1) & 1 == 1 { s.y } else { 1.0 - s.y };
        let fz = if (c >> 2) & 1 == 1 { s.z } else { 1.0 - s.z };
        *v = fx * fy * fz;
    }
    n
}

/// Physical-space gradients of the trilinear shape functions.
pub fn shape_gradients(s: Vec3, h: [f64; 3]) -> [Vec3; 8] {
    let mut g = [Vec3::zeros(); 8];
    for (c, gv) in g.iter_mut().enumerate() {
        let (bx, by, bz) = (c & 1 == 1, (c >> 1) & 1 == 1, (c >> 2) & 1 == 1);
        let fx = if bx { s.x } else { 1.0 - s.x };
        let fy = if by { s.y } else { 1.0 - s.y };
        let fz = if bz { s.z } else { 1.0 - s.z };
        let dx = if bx { 1.0 } else { -1.0 };
        let dy = if by { 1.0 } else { -1.0 };
        let dz = if bz { 1.0 } else { -1.0 };
        *gv = Vec3::new(
            dx * fy * fz / h[0],
            fx * dy * fz / h[1],
            fx * fy * dz / h[2],
        );
    }
    g
}

/// Per-cell 2x2x2 Gauss rule with points in local coordinates and weights in
/// volume units.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: [Vec3; 8],
    pub weight: f64,
}

impl QuadratureRule {
    pub fn gauss2(grid: &Grid) -> Self {
        let a = 0.5 - 0.5 / 3.0f64.sqrt();
        let b = 0.5 + 0.5 / 3.0f64.sqrt();
        let mut points = [Vec3::zeros(); 8];
        for (c, p) in points.iter_mut().enumerate() {
            *p = Vec3::new(
                if c & 1 == 1 { b } else { a },
                if (c >> 1) & 1 == 1 { b } else { a },
                if (c >> 2) & 1 == 1 { b } else { a },
            );
        }
        QuadratureRule {
            points,
            weight: grid.cell_volume() / 8.0,
        }
    }
}

/// Nodal deformation field with trilinear interpolation per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationField {
    pub nodes: Vec<Vec3>,
}

impl DeformationField {
    pub fn identity(grid: &Grid) -> Self {
        DeformationField {
            nodes: (0..grid.num_nodes()).map(|i| grid.node_position(i)).collect(),
        }
    }

    pub fn from_map(grid: &Grid, mut f: impl FnMut(Vec3) -> Vec3) -> Self {
        DeformationField {
            nodes: (0..grid.num_nodes())
                .map(|i| f(grid.node_position(i)))
                .collect(),
        }
    }

    pub fn value(&self, grid: &Grid, cell: usize, local: Vec3) -> Vec3 {
        let n = shape_values(local);
        let idx = grid.cell_nodes(cell);
        (0..8).map(|c| self.nodes[idx[c]] * n[c]).sum()
    }

    /// Exact gradient of the trilinear interpolant at the given point.
    pub fn gradient(&self, grid: &Grid, cell: usize, local: Vec3) -> Mat3 {
        let g = shape_gradients(local, grid.spacing());
        let idx = grid.cell_nodes(cell);
        let mut f = Mat3::zeros();
        for c in 0..8 {
            f += self.nodes[idx[c]] * g[c].transpose();
        }
        f
    }
}

/// Nodal pullback magnetization; unit length enforced nodally and again at
/// evaluation points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationField {
    pub nodes: Vec<Vec3>,
}

impl MagnetizationField {
    pub fn constant(grid: &Grid, dir: Vec3) -> Self {
        let d = dir.normalize();
        MagnetizationField {
            nodes: vec![d; grid.num_nodes()],
        }
    }

    pub fn from_map(grid: &Grid, mut f: impl FnMut(Vec3) -> Vec3) -> Result<Self, FieldError> {
        project_to_sphere(
            (0..grid.num_nodes())
                .map(|i| f(grid.node_position(i)))
                .collect(),
        )
    }
}

/// Scales every node to unit length; idempotent, errors on zero vectors.
pub fn project_to_sphere(raw: Vec<Vec3>) -> Result<MagnetizationField, FieldError> {
    let mut nodes = raw;
    for (i, v) in nodes.iter_mut().enumerate() {
        let n = v.norm();
        if n == 0.0 {
            return Err(FieldError::ZeroVectorNode { node: i });
        }
        *v /= n;
    }
    Ok(MagnetizationField { nodes })
}

/// Admissible state `q = (y, mu)` on a shared reference grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub grid: Grid,
    pub y: DeformationField,
    pub mu: MagnetizationField,
}

/// Everything energy densities need at one quadrature point.
#[derive(Debug, Clone)]
pub struct PointEval {
    /// Shape values of the 8 cell nodes.
    pub shape: [f64; 8],
    /// Physical shape gradients.
    pub shape_grad: [Vec3; 8],
    /// Interpolated deformation value.
    pub y: Vec3,
    /// Deformation gradient.
    pub f: Mat3,
    /// Raw interpolated magnetization (before normalization).
    pub v: Vec3,
    /// Gradient of the raw interpolant.
    pub grad_v: Mat3,
    /// Normalized magnetization direction.
    pub n: Vec3,
    /// Gradient of the normalized field.
    pub grad_n: Mat3,
}

impl State {
    pub fn identity_with_constant_mu(grid: Grid, dir: Vec3) -> Self {
        let y = DeformationField::identity(&grid);
        let mu = MagnetizationField::constant(&grid, dir);
        State { grid, y, mu }
    }

    pub fn check_same_grid(&self, other: &State) -> Result<(), FieldError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(FieldError::GridMismatch)
        }
    }

    pub fn eval(&self, cell: usize, local: Vec3) -> PointEval {
        let shape = shape_values(local);
        let shape_grad = shape_gradients(local, self.grid.spacing());
        let idx = self.grid.cell_nodes(cell);
        let mut y = Vec3::zeros();
        let mut f = Mat3::zeros();
        let mut v = Vec3::zeros();
        let mut grad_v = Mat3::zeros();
        for c in 0..8 {
            y += self.y.nodes[idx[c]] * shape[c];
            f += self.y.nodes[idx[c]] * shape_grad[c].transpose();
            v += self.mu.nodes[idx[c]] * shape[c];
            grad_v += self.mu.nodes[idx[c]] * shape_grad[c].transpose();
        }
        let rho = v.norm();
        let n = v / rho;
        // grad(v/|v|) = (I - n n^T) grad_v / |v|
        let grad_n = (Mat3::identity() - n * n.transpose()) * grad_v / rho;
        PointEval {
            shape,
            shape_grad,
            y,
            f,
            v,
            grad_v,
            n,
            grad_n,
        }
    }

    /// Eulerian gradient of the magnetization at the image point:
    /// `G = grad(mu_normalized) (grad y)^{-1}`, so `G grad y = grad mu`.
    pub fn eulerian_magnetization_gradient(
        &self,
        cell: usize,
        local: Vec3,
    ) -> Result<Mat3, FieldError> {
        let e = self.eval(cell, local);
        let finv = inverse_gradient(&e.f)
            .map_err(|source| FieldError::NonPositiveDeterminantInCell { cell, source })?;
        Ok(e.grad_n * finv)
    }

    /// Minimum quadrature-point determinant over all cells.
    pub fn min_quadrature_det(&self) -> f64 {
        let quad = QuadratureRule::gauss2(&self.grid);
        let mut min = f64::INFINITY;
        for cell in 0..self.grid.num_cells() {
            for &p in &quad.points {
                let det = self.y.gradient(&self.grid, cell, p).determinant();
                if det < min {
                    min = det;
                }
            }
        }
        min
    }
}

/// 2x2 Gauss points on a boundary face of a cell, for surface integrals of
/// the reference boundary. Returns (cell, local coords, area weight) tuples
/// for every face cell on the given box face.
pub fn boundary_quadrature(grid: &Grid, face: BoxFace) -> Vec<(usize, Vec3, f64)> {
    let (axis, max_side) = face.axis_side();
    let h = grid.spacing();
    let (a1, a2) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let area_w = h[a1] * h[a2] / 4.0;
    let ga = 0.5 - 0.5 / 3.0f64.sqrt();
    let gb = 0.5 + 0.5 / 3.0f64.sqrt();
    let fixed = if max_side { 1.0 } else { 0.0 };
    let fixed_cell = if max_side { grid.dims[axis] - 1 } else { 0 };
    let mut out = Vec::new();
    for i2 in 0..grid.dims[a2] {
        for i1 in 0..grid.dims[a1] {
            let mut ijk = [0usize; 3];
            ijk[axis] = fixed_cell;
            ijk[a1] = i1;
            ijk[a2] = i2;
            let cell = grid.cell_index(ijk[0], ijk[1], ijk[2]);
            for &s2 in &[ga, gb] {
                for &s1 in &[ga, gb] {
                    let mut local = Vec3::zeros();
                    local[axis] = fixed;
                    local[a1] = s1;
                    local[a2] = s2;
                    out.push((cell, local, area_w));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_gradient_is_identity() {
        let grid = Grid::unit_cube(3);
        let y = DeformationField::identity(&grid);
        let quad = QuadratureRule::gauss2(&grid);
        for cell in 0..grid.num_cells() {
            for &p in &quad.points {
                assert_relative_eq!(y.gradient(&grid, cell, p), Mat3::identity(), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn affine_gradient_is_constant() {
        let grid = Grid::unit_cube(2);
        let a = Mat3::new(1.2, 0.1, 0.0, -0.3, 0.9, 0.2, 0.0, 0.05, 1.1);
        let y = DeformationField::from_map(&grid, |x| a * x);
        for cell in 0..grid.num_cells() {
            let p = Vec3::new(0.3, 0.7, 0.2);
            assert_relative_eq!(y.gradient(&grid, cell, p), a, epsilon = 1e-13);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let grid = Grid::unit_cube(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y = DeformationField::from_map(&grid, |x| {
            x + Vec3::new(
                0.1 * rng.gen_range(-1.0..1.0),
                0.1 * rng.gen_range(-1.0..1.0),
                0.1 * rng.gen_range(-1.0..1.0),
            )
        });
        let h = grid.spacing();
        let cell = 13 % grid.num_cells();
        let local = Vec3::new(0.4, 0.5, 0.6);
        let f = y.gradient(&grid, cell, local);
        let eps = 1e-6;
        for a in 0..3 {
            let mut lp = local;
            let mut lm = local;
            lp[a] += eps / h[a];
            lm[a] -= eps / h[a];
            let d = (y.value(&grid, cell, lp) - y.value(&grid, cell, lm)) / (2.0 * eps);
            for r in 0..3 {
                assert_relative_eq!(f[(r, a)], d[r], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn interpolation_reproduces_trilinear_functions() {
        let grid = Grid::unit_cube(4);
        // f(x) = c0 + c1 x + c2 y + ... + c7 xyz  per component
        let tri = |x: Vec3| {
            Vec3::new(
                1.0 + 2.0 * x.x - x.y + 0.5 * x.x * x.y * x.z,
                x.x * x.y + 3.0 * x.z,
                -x.y * x.z + x.x,
            )
        };
        let y = DeformationField::from_map(&grid, tri);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let cell = rng.gen_range(0..grid.num_cells());
            let local = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            let x = grid.point(cell, local);
            assert_relative_eq!(y.value(&grid, cell, local), tri(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn eulerian_gradient_trivial_cases() {
        let grid = Grid::unit_cube(2);
        let omega = 1.3;
        let helix = |x: Vec3| Vec3::new((omega * x.z).cos(), (omega * x.z).sin(), 0.0);
        let q = State {
            grid: grid.clone(),
            y: DeformationField::identity(&grid),
            mu: MagnetizationField::from_map(&grid, helix).unwrap(),
        };
        let local = Vec3::new(0.5, 0.5, 0.5);
        let g = q.eulerian_magnetization_gradient(0, local).unwrap();
        let e = q.eval(0, local);
        assert_relative_eq!(g, e.grad_n, epsilon = 1e-13);

        // y = 2x halves the Eulerian gradient
        let q2 = State {
            grid: grid.clone(),
            y: DeformationField::from_map(&grid, |x| 2.0 * x),
            mu: q.mu.clone(),
        };
        let g2 = q2.eulerian_magnetization_gradient(0, local).unwrap();
        assert_relative_eq!(g2, e.grad_n / 2.0, epsilon = 1e-13);
    }

    #[test]
    fn eulerian_gradient_algebraic_oracle() {
        let grid = Grid::unit_cube(3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y = DeformationField::from_map(&grid, |x| {
            x + 0.08
                * Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
        });
        let mu = MagnetizationField::from_map(&grid, |x| {
            Vec3::new(x.z.sin() + 0.2, x.x.cos(), 1.0 + 0.3 * x.y)
        })
        .unwrap();
        let q = State {
            grid: grid.clone(),
            y,
            mu,
        };
        for cell in [0, 5, 13, 26] {
            let local = Vec3::new(0.3, 0.6, 0.8);
            let e = q.eval(cell, local);
            let g = q.eulerian_magnetization_gradient(cell, local).unwrap();
            assert_relative_eq!(g * e.f, e.grad_n, epsilon = 1e-12);
        }
    }

    #[test]
    fn project_to_sphere_cases() {
        let f = project_to_sphere(vec![Vec3::new(0.0, 0.0, 2.0)]).unwrap();
        assert_relative_eq!(f.nodes[0], Vec3::new(0.0, 0.0, 1.0));
        // idempotence
        let again = project_to_sphere(f.nodes.clone()).unwrap();
        assert_eq!(f.nodes, again.nodes);
        // zero vector rejected
        assert!(project_to_sphere(vec![Vec3::zeros()]).is_err());
        // random field normalized to machine precision
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let raw: Vec<Vec3> = (0..100)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(0.1..2.0),
                )
            })
            .collect();
        let f = project_to_sphere(raw).unwrap();
        for v in &f.nodes {
            assert!((v.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_quadrature_integrates_area() {
        let grid = Grid::unit_cube(3);
        for face in BoxFace::ALL {
            let total: f64 = boundary_quadrature(&grid, face)
                .iter()
                .map(|(_, _, w)| w)
                .sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn dirichlet_nodes_on_faces() {
        let grid = Grid::new(
            [0.0; 3],
            [1.0; 3],
            [2; 3],
            vec![BoxFace::XMin, BoxFace::XMax],
            vec![BoxFace::ZMax],
        );
        assert!(grid.is_dirichlet_node(grid.node_index(0, 1, 1)));
        assert!(grid.is_dirichlet_node(grid.node_index(2, 0, 2)));
        assert!(!grid.is_dirichlet_node(grid.node_index(1, 1, 1)));
        assert!(!grid.is_dirichlet_node(grid.node_index(1, 0, 2)));
    }
}
