//! Invertibility machinery: topological degree by summed signed solid
//! angles of the mapped boundary triangulation, the deformed configuration
//! as a degree-masked Eulerian raster with Newton preimages and covering
//! numbers, the Ciarlet-Necas condition, and the inverse-Jacobian audit.
//!
//! The deformed configuration `Omega^y` is characterized as the set of
//! points off the mapped boundary where the degree is positive; voxels
//! closer to the mapped boundary than 1.5 voxel diagonals are flagged and
//! excluded, the discrete stand-in for removing `y(boundary)`.

use crate::fields::{DeformationField, Grid, QuadratureRule, State};
use crate::kinematics::{adjugate, inverse_gradient, Mat3, Vec3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("evaluation point is within {distance:e} of the mapped boundary")]
    OnBoundaryImage { distance: f64 },
    #[error("winding number residual {residual} exceeds 0.2; boundary under-resolved")]
    NonIntegerWinding { residual: f64 },
    #[error("masked voxel {voxel} lacks a preimage record")]
    MissingPreimage { voxel: usize },
}

/// Axis-aligned voxel raster enclosing the deformed body with padding
/// factor >= 2 per axis (margin of half the content extent on each side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerianGrid {
    pub box_min: [f64; 3],
    pub box_max: [f64; 3],
    pub dims: [usize; 3],
}

impl EulerianGrid {
    /// Padded box around the deformed nodal positions, `n` voxels per axis.
    pub fn enclose(q: &State, n: usize) -> Self {
        Self::enclose_points(q.y.nodes.iter().copied(), n)
    }

    pub fn enclose_points(points: impl Iterator<Item = Vec3>, n: usize) -> Self {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in points {
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
        // cubic box (the magnetostatic periodic-image compensation assumes
        // an isotropic cell), width twice the largest content extent
        let extent = (0..3).map(|d| hi[d] - lo[d]).fold(1e-12, f64::max);
        let mut box_min = [0.0; 3];
        let mut box_max = [0.0; 3];
        for d in 0..3 {
            let c = 0.5 * (lo[d] + hi[d]);
            box_min[d] = c - extent;
            box_max[d] = c + extent;
        }
        EulerianGrid {
            box_min,
            box_max,
            dims: [n; 3],
        }
    }

    pub fn voxel_size(&self) -> [f64; 3] {
        [0, 1, 2].map(|d| (self.box_max[d] - self.box_min[d]) / self.dims[d] as f64)
    }

    pub fn voxel_volume(&self) -> f64 {
        let h = self.voxel_size();
        h[0] * h[1] * h[2]
    }

    pub fn voxel_diagonal(&self) -> f64 {
        let h = self.voxel_size();
        (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt()
    }

    pub fn num_voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        (i, j, k)
    }

    pub fn center(&self, idx: usize) -> Vec3 {
        let (i, j, k) = self.coords(idx);
        let h = self.voxel_size();
        Vec3::new(
            self.box_min[0] + (i as f64 + 0.5) * h[0],
            self.box_min[1] + (j as f64 + 0.5) * h[1],
            self.box_min[2] + (k as f64 + 0.5) * h[2],
        )
    }

    /// Voxel index ranges whose centers may fall in [lo, hi] per axis.
    fn range(&self, lo: Vec3, hi: Vec3) -> [(usize, usize); 3] {
        let h = self.voxel_size();
        [0, 1, 2].map(|d| {
            let a = ((lo[d] - self.box_min[d]) / h[d] - 0.5).floor().max(0.0) as usize;
            let b = ((hi[d] - self.box_min[d]) / h[d] - 0.5).ceil().max(0.0) as usize;
            (a.min(self.dims[d] - 1), b.min(self.dims[d] - 1))
        })
    }
}

/// Outward-oriented triangulation of the image of the reference boundary:
/// each boundary quad of the hexahedral grid is split into two triangles.
pub struct MappedBoundary {
    pub tris: Vec<[Vec3; 3]>,
}

impl MappedBoundary {
    pub fn new(grid: &Grid, y: &DeformationField) -> Self {
        let [nx, ny, nz] = grid.dims;
        let mut tris = Vec::new();
        let mut push_quad = |q: [usize; 4]| {
            let p = q.map(|i| y.nodes[i]);
            tris.push([p[0], p[1], p[2]]);
            tris.push([p[0], p[2], p[3]]);
        };
        // For outward axis `a` with cyclic companions (u, v), counterclockwise
        // order in (u, v) orients the normal along +a; reversed order along -a.
        for (a, side) in [(0usize, false), (0, true), (1, false), (1, true), (2, false), (2, true)]
        {
            let (u, v) = ((a + 1) % 3, (a + 2) % 3);
            let dims = [nx, ny, nz];
            let fixed = if side { dims[a] } else { 0 };
            let node = |iu: usize, iv: usize| {
                let mut c = [0usize; 3];
                c[a] = fixed;
                c[u] = iu;
                c[v] = iv;
                grid.node_index(c[0], c[1], c[2])
            };
            for iv in 0..dims[v] {
                for iu in 0..dims[u] {
                    if side {
                        push_quad([node(iu, iv), node(iu + 1, iv), node(iu + 1, iv + 1), node(iu, iv + 1)]);
                    } else {
                        push_quad([node(iu, iv), node(iu, iv + 1), node(iu + 1, iv + 1), node(iu + 1, iv)]);
                    }
                }
            }
        }
        MappedBoundary { tris }
    }

    /// Winding number at `xi`: sum of signed solid angles over 4 pi.
    pub fn winding(&self, xi: Vec3) -> f64 {
        let total: f64 = self
            .tris
            .iter()
            .map(|t| solid_angle(t[0] - xi, t[1] - xi, t[2] - xi))
            .sum();
        total / (4.0 * std::f64::consts::PI)
    }

    pub fn distance(&self, xi: Vec3) -> f64 {
        self.tris
            .iter()
            .map(|t| dist_point_triangle(xi, t[0], t[1], t[2]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Early-exit distance test against a threshold.
    pub fn distance_below(&self, xi: Vec3, thresh: f64) -> bool {
        self.tris
            .iter()
            .any(|t| dist_point_triangle(xi, t[0], t[1], t[2]) < thresh)
    }

    pub fn area(&self) -> f64 {
        self.tris
            .iter()
            .map(|t| 0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm())
            .sum()
    }

    pub fn diameter(&self) -> f64 {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for t in &self.tris {
            for p in t {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
        }
        (hi - lo).norm()
    }
}

/// Signed solid angle of the triangle (a, b, c) seen from the origin
/// (Van Oosterom-Strackee).
pub fn solid_angle(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let num = a.dot(&b.cross(&c));
    let den = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
    2.0 * num.atan2(den)
}

/// Euclidean distance from `p` to the closed triangle (a, b, c).
pub fn dist_point_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return (ap - (d1 / (d1 - d3)) * ab).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return (ap - (d2 / (d2 - d6)) * ac).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + w * (c - b))).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + v * ab + w * ac)).norm()
}

/// Degree of `y` at `xi` via the winding number of the mapped boundary.
pub fn topological_degree(
    grid: &Grid,
    y: &DeformationField,
    xi: Vec3,
) -> Result<i32, GeometryError> {
    let boundary = MappedBoundary::new(grid, y);
    degree_at(&boundary, xi, 1e-8 * boundary.diameter())
}

fn degree_at(boundary: &MappedBoundary, xi: Vec3, tol: f64) -> Result<i32, GeometryError> {
    let d = boundary.distance(xi);
    if d <= tol {
        return Err(GeometryError::OnBoundaryImage { distance: d });
    }
    let w = boundary.winding(xi);
    let rounded = w.round();
    let residual = (w - rounded).abs();
    if residual >= 0.2 {
        return Err(GeometryError::NonIntegerWinding { residual });
    }
    Ok(rounded as i32)
}

/// Degree-masked voxelization of the deformed configuration with covering
/// numbers and preimage records.
#[derive(Debug, Clone)]
pub struct DeformedConfiguration {
    pub grid: EulerianGrid,
    /// Positive-degree voxels off the boundary shell: the discrete Omega^y.
    pub mask: Vec<bool>,
    pub degree: Vec<i32>,
    pub covering: Vec<u32>,
    /// One (cell, local coords) preimage per covered voxel.
    pub preimage: Vec<Option<(u32, Vec3)>>,
    pub near_boundary: Vec<bool>,
    /// Covered volume fraction per voxel; subsampled in the boundary shell.
    pub coverage_fraction: Vec<f64>,
}

impl DeformedConfiguration {
    pub fn covered_count(&self) -> usize {
        self.covering.iter().filter(|&&c| c >= 1).count()
    }

    /// Volume of y(cl Omega) by (fractionally) covered voxel counting.
    pub fn covered_volume(&self) -> f64 {
        self.coverage_fraction.iter().sum::<f64>() * self.grid.voxel_volume()
    }

    pub fn mask_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn mask_volume(&self) -> f64 {
        self.mask_count() as f64 * self.grid.voxel_volume()
    }

    /// Connected components of the mask under 6-connectivity.
    pub fn component_count(&self) -> usize {
        let mut label = vec![false; self.mask.len()];
        let mut count = 0;
        let [nx, ny, nz] = self.grid.dims;
        let mut stack = Vec::new();
        for start in 0..self.mask.len() {
            if !self.mask[start] || label[start] {
                continue;
            }
            count += 1;
            stack.push(start);
            label[start] = true;
            while let Some(v) = stack.pop() {
                let (i, j, k) = self.grid.coords(v);
                let mut push = |ii: usize, jj: usize, kk: usize| {
                    let n = self.grid.index(ii, jj, kk);
                    if self.mask[n] && !label[n] {
                        label[n] = true;
                        stack.push(n);
                    }
                };
                if i > 0 {
                    push(i - 1, j, k);
                }
                if i + 1 < nx {
                    push(i + 1, j, k);
                }
                if j > 0 {
                    push(i, j - 1, k);
                }
                if j + 1 < ny {
                    push(i, j + 1, k);
                }
                if k > 0 {
                    push(i, j, k - 1);
                }
                if k + 1 < nz {
                    push(i, j, k + 1);
                }
            }
        }
        count
    }
}

/// Damped Newton solve of the trilinear cell map for a preimage of `xi`.
/// Returns local coordinates in [0,1]^3 (with 1e-9 slack) when converged.
fn newton_preimage(
    corners: &[Vec3; 8],
    xi: Vec3,
    seed: Vec3,
    tol: f64,
) -> Option<Vec3> {
    let mut s = seed;
    let eval = |s: Vec3| {
        let n = crate::fields::shape_values(s);
        let mut p = Vec3::zeros();
        for i in 0..8 {
            p += n[i] * corners[i];
        }
        p
    };
    let mut res = eval(s) - xi;
    for _ in 0..30 {
        if res.norm() < tol {
            let slack = 1e-9;
            let inside = (0..3).all(|d| s[d] >= -slack && s[d] <= 1.0 + slack);
            return inside.then(|| Vec3::new(s.x.clamp(0.0, 1.0), s.y.clamp(0.0, 1.0), s.z.clamp(0.0, 1.0)));
        }
        let grads = crate::fields::shape_gradients(s, [1.0, 1.0, 1.0]);
        let mut j = Mat3::zeros();
        for i in 0..8 {
            j += corners[i] * grads[i].transpose();
        }
        let step = j.lu().solve(&res)?;
        // halve the step while the residual grows
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let s_new = s - lambda * step;
            let r_new = eval(s_new) - xi;
            if r_new.norm() < res.norm() {
                s = s_new;
                res = r_new;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return None;
        }
        if s.amax() > 4.0 {
            return None;
        }
    }
    None
}

const NEWTON_SEEDS: [[f64; 3]; 9] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [1.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
    [1.0, 1.0, 1.0],
    [0.5, 0.5, 0.5],
];

/// Builds degree, boundary flags, covering numbers and preimages per voxel.
pub fn deformed_configuration(q: &State, egrid: &EulerianGrid) -> DeformedConfiguration {
    let boundary = MappedBoundary::new(&q.grid, &q.y);
    let shell = 1.5 * egrid.voxel_diagonal();
    let diam = boundary.diameter().max(1e-12);
    let newton_tol = 1e-10 * diam;

    // candidate cells per voxel from mapped-cell bounding boxes
    let mut candidates: Vec<Vec<u32>> = vec![Vec::new(); egrid.num_voxels()];
    let mut cell_corners: Vec<[Vec3; 8]> = Vec::with_capacity(q.grid.num_cells());
    for cell in 0..q.grid.num_cells() {
        let corners = q.grid.cell_nodes(cell).map(|n| q.y.nodes[n]);
        let mut lo = corners[0];
        let mut hi = corners[0];
        for p in &corners[1..] {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        // pad by half a voxel so any point of a listed voxel is inside the box
        let h = egrid.voxel_size();
        let pad = Vec3::new(h[0], h[1], h[2]) * 0.5 + Vec3::repeat(1e-9 * diam);
        let r = egrid.range(lo - pad, hi + pad);
        for k in r[2].0..=r[2].1 {
            for j in r[1].0..=r[1].1 {
                for i in r[0].0..=r[0].1 {
                    candidates[egrid.index(i, j, k)].push(cell as u32);
                }
            }
        }
        cell_corners.push(corners);
    }

    struct VoxelInfo {
        degree: i32,
        near: bool,
        covering: u32,
        preimage: Option<(u32, Vec3)>,
        fraction: f64,
    }

    // first converged preimage of `xi` among the candidate cells
    let find = |cands: &[u32], xi: Vec3| -> Option<(u32, Vec3)> {
        for &cell in cands {
            let corners = &cell_corners[cell as usize];
            for seed in NEWTON_SEEDS {
                if let Some(s) = newton_preimage(corners, xi, Vec3::from(seed), newton_tol) {
                    return Some((cell, s));
                }
            }
        }
        None
    };

    let h = egrid.voxel_size();
    const SUB: usize = 3;
    let infos: Vec<VoxelInfo> = (0..egrid.num_voxels())
        .into_par_iter()
        .map(|vox| {
            let xi = egrid.center(vox);
            let near = boundary.distance_below(xi, shell);
            let degree = if near {
                0
            } else {
                match degree_at(&boundary, xi, 0.0) {
                    Ok(d) => d,
                    Err(_) => 0,
                }
            };
            let mut covering = 0u32;
            let mut preimage = None;
            for &cell in &candidates[vox] {
                let corners = &cell_corners[cell as usize];
                for seed in NEWTON_SEEDS {
                    if let Some(s) = newton_preimage(corners, xi, Vec3::from(seed), newton_tol) {
                        covering += 1;
                        if preimage.is_none() {
                            preimage = Some((cell, s));
                        }
                        break;
                    }
                }
            }
            // fractional coverage: subsample inside the boundary shell,
            // all-or-nothing elsewhere
            let fraction = if !near {
                if covering >= 1 {
                    1.0
                } else {
                    0.0
                }
            } else {
                let mut hits = 0usize;
                for ck in 0..SUB {
                    for cj in 0..SUB {
                        for ci in 0..SUB {
                            let p = xi
                                + Vec3::new(
                                    ((ci as f64 + 0.5) / SUB as f64 - 0.5) * h[0],
                                    ((cj as f64 + 0.5) / SUB as f64 - 0.5) * h[1],
                                    ((ck as f64 + 0.5) / SUB as f64 - 0.5) * h[2],
                                );
                            if let Some(rec) = find(&candidates[vox], p) {
                                hits += 1;
                                if preimage.is_none() {
                                    preimage = Some(rec);
                                }
                            }
                        }
                    }
                }
                hits as f64 / (SUB * SUB * SUB) as f64
            };
            VoxelInfo {
                degree,
                near,
                covering,
                preimage,
                fraction,
            }
        })
        .collect();

    DeformedConfiguration {
        grid: egrid.clone(),
        mask: infos.iter().map(|v| v.degree > 0 && !v.near).collect(),
        degree: infos.iter().map(|v| v.degree).collect(),
        covering: infos.iter().map(|v| v.covering).collect(),
        preimage: infos.iter().map(|v| v.preimage).collect(),
        near_boundary: infos.iter().map(|v| v.near).collect(),
        coverage_fraction: infos.iter().map(|v| v.fraction).collect(),
    }
}

/// Ciarlet-Necas report: `lhs = int det grad y`, `rhs = L^3(y(Omega))` by
/// covered-voxel counting, with a half-voxel boundary-layer allowance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CiarletNecasReport {
    pub lhs: f64,
    pub rhs: f64,
    pub tol_abs: f64,
    pub satisfied: bool,
}

pub const CIARLET_NECAS_TOL_REL: f64 = 0.02;

pub fn ciarlet_necas_check(q: &State, dc: &DeformedConfiguration) -> CiarletNecasReport {
    let quad = QuadratureRule::gauss2(&q.grid);
    let mut lhs = 0.0;
    for cell in 0..q.grid.num_cells() {
        for &p in &quad.points {
            lhs += quad.weight * q.y.gradient(&q.grid, cell, p).determinant();
        }
    }
    let rhs = dc.covered_volume();
    let boundary = MappedBoundary::new(&q.grid, &q.y);
    let h_max = dc.grid.voxel_size().iter().copied().fold(0.0, f64::max);
    // boundary-layer allowance of the subsampled voxel counting
    let tol_abs = h_max * boundary.area() / 6.0;
    CiarletNecasReport {
        lhs,
        rhs,
        tol_abs,
        satisfied: lhs <= rhs * (1.0 + CIARLET_NECAS_TOL_REL) + tol_abs,
    }
}

/// Inverse-map identities audited over the covered voxels.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InverseJacobianReport {
    /// max over voxels of |grad y . (grad y)^{-1} - I| at the preimage
    pub max_identity_residual: f64,
    /// sum of 1/det grad y(preimage) times voxel volume, approximates L^3(Omega)
    pub inverse_volume: f64,
    pub reference_volume: f64,
    pub volume_rel_error: f64,
    /// sum of |adj grad(y^{-1})|_F times voxel volume, approximates int |grad y|
    pub inverse_adjugate_integral: f64,
    pub gradient_l1_norm: f64,
    pub adjugate_rel_error: f64,
}

pub fn inverse_jacobian_audit(
    q: &State,
    dc: &DeformedConfiguration,
) -> Result<InverseJacobianReport, GeometryError> {
    let voxvol = dc.grid.voxel_volume();
    let mut max_res = 0.0f64;
    let mut inv_vol = 0.0;
    let mut adj_int = 0.0;
    for vox in 0..dc.grid.num_voxels() {
        let w = dc.coverage_fraction[vox] * voxvol;
        if w == 0.0 {
            if dc.mask[vox] {
                return Err(GeometryError::MissingPreimage { voxel: vox });
            }
            continue;
        }
        let (cell, local) = match dc.preimage[vox] {
            Some(p) => p,
            None => return Err(GeometryError::MissingPreimage { voxel: vox }),
        };
        let f = q.y.gradient(&q.grid, cell as usize, local);
        let finv = match inverse_gradient(&f) {
            Ok(m) => m,
            Err(_) => continue,
        };
        max_res = max_res.max((f * finv - Mat3::identity()).norm());
        inv_vol += w / f.determinant();
        adj_int += w * adjugate(&finv).norm();
    }
    let quad = QuadratureRule::gauss2(&q.grid);
    let mut grad_l1 = 0.0;
    for cell in 0..q.grid.num_cells() {
        for &p in &quad.points {
            grad_l1 += quad.weight * q.y.gradient(&q.grid, cell, p).norm();
        }
    }
    let ref_vol = q.grid.volume();
    Ok(InverseJacobianReport {
        max_identity_residual: max_res,
        inverse_volume: inv_vol,
        reference_volume: ref_vol,
        volume_rel_error: (inv_vol - ref_vol).abs() / ref_vol,
        inverse_adjugate_integral: adj_int,
        gradient_l1_norm: grad_l1,
        adjugate_rel_error: (adj_int - grad_l1).abs() / grad_l1,
    })
}
