//! Error norms, convergence tables, cross-mesh comparison, the discrete
//! Helmholtz-split diagnostic and field export.
//!
//! The reported L² metric is ‖u − Π_h u_h‖₀ with Π_h the piecewise-constant
//! projection — the virtual function itself is never evaluated pointwise.
//! Exact-solution branches are always selected by cell tag, never by a
//! point-side test, so the mismatch strip cannot flip the branch inside a
//! cell.

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{triangulate, Point2};
use crate::mesh::{DofMap, PolyMesh};
use crate::quad::{
    integrate_triangle, integrate_triangle_graded, triangle_rule, Grading, SingularLine,
};
use crate::system::{
    assemble_b_matrix, solve_complex_sparse, RegionScalarField, RegionVectorField, SolveError,
};
use crate::vem::{
    element_geometry, element_projection, element_rot, nodal_gradient, CoefficientField,
    DofVector, StabScale,
};
use crate::Cplx;

#[derive(Debug, Error)]
pub enum PostprocError {
    #[error("levels are not dyadic: h ratio {ratio} between rows {row} and {next}")]
    NonDyadicLevels { row: usize, next: usize, ratio: f64 },
    #[error("need at least 2 levels for a convergence table")]
    TooFewLevels,
    #[error("quadrature point ({x}, {y}) not contained in any coarse cell")]
    PointNotLocated { x: f64, y: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Quadrature controls for the error norms.
#[derive(Clone, Debug)]
pub struct ErrorQuad {
    pub degree: usize,
    pub singular_lines: Vec<SingularLine>,
    pub grading: Grading,
}

impl Default for ErrorQuad {
    fn default() -> Self {
        Self {
            degree: 7,
            singular_lines: Vec::new(),
            grading: Grading::default(),
        }
    }
}

/// Piecewise-constant representation of a DoF solution: Π_K u_h and rot u_h
/// per cell.
#[derive(Clone, Debug)]
pub struct CellFields {
    pub proj: Vec<[Cplx; 2]>,
    pub rot: Vec<Cplx>,
}

pub fn cell_fields(mesh: &PolyMesh, u_h: &DofVector) -> CellFields {
    let per_cell: Vec<([Cplx; 2], Cplx)> = (0..mesh.cells.len())
        .into_par_iter()
        .map(|k| {
            let geom = element_geometry(mesh, k);
            let proj = element_projection(&geom).expect("positive cell area");
            let v = crate::vem::project_value(&geom, &proj, u_h);
            let r = element_rot(&geom, u_h);
            (v, r)
        })
        .collect();
    CellFields {
        proj: per_cell.iter().map(|&(v, _)| v).collect(),
        rot: per_cell.iter().map(|&(_, r)| r).collect(),
    }
}

fn integrate_cell_scalar(
    mesh: &PolyMesh,
    cell: usize,
    quad: &ErrorQuad,
    f: impl Fn(Point2) -> f64 + Copy,
) -> f64 {
    let poly = mesh.cell_polygon(cell);
    let rule = triangle_rule(quad.degree);
    let mut sum = 0.0;
    for tri in triangulate(&poly) {
        sum += if let Some(line) = quad
            .singular_lines
            .iter()
            .find(|l| tri.iter().any(|&v| l.level(v).abs() <= 1e-12 * mesh.h_max))
        {
            integrate_triangle_graded(&tri, rule, line, quad.grading, f)
        } else {
            integrate_triangle(&tri, rule, f)
        };
    }
    sum
}

/// ‖u − Π_h u_h‖₀ with the region-correct exact branch per cell.
pub fn l2_projected_error(
    mesh: &PolyMesh,
    u_h: &DofVector,
    exact: &dyn RegionVectorField,
    quad: &ErrorQuad,
) -> f64 {
    let fields = cell_fields(mesh, u_h);
    let contributions: Vec<f64> = (0..mesh.cells.len())
        .into_par_iter()
        .map(|k| {
            let tag = mesh.cells[k].tag;
            let pk = fields.proj[k];
            integrate_cell_scalar(mesh, k, quad, move |p| {
                let u = exact.eval(p, tag);
                (u[0] - pk[0]).norm_sqr() + (u[1] - pk[1]).norm_sqr()
            })
        })
        .collect();
    contributions.iter().sum::<f64>().sqrt()
}

/// ‖rot u − rot u_h‖₀ with the per-cell constant discrete rot.
pub fn rot_error(
    mesh: &PolyMesh,
    u_h: &DofVector,
    rot_exact: &dyn RegionScalarField,
    quad: &ErrorQuad,
) -> f64 {
    let fields = cell_fields(mesh, u_h);
    let contributions: Vec<f64> = (0..mesh.cells.len())
        .into_par_iter()
        .map(|k| {
            let tag = mesh.cells[k].tag;
            let rk = fields.rot[k];
            integrate_cell_scalar(mesh, k, quad, move |p| {
                (rot_exact.eval(p, tag) - rk).norm_sqr()
            })
        })
        .collect();
    contributions.iter().sum::<f64>().sqrt()
}

/// One row of a convergence table.
#[derive(Clone, Copy, Debug)]
pub struct ConvergenceRow {
    pub level: u32,
    pub h: f64,
    pub l2_err: f64,
    pub l2_order: Option<f64>,
    pub rot_err: f64,
    pub rot_order: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn mean_l2_order(&self) -> Option<f64> {
        let orders: Vec<f64> = self.rows.iter().filter_map(|r| r.l2_order).collect();
        if orders.is_empty() {
            None
        } else {
            Some(orders.iter().sum::<f64>() / orders.len() as f64)
        }
    }

    pub fn mean_rot_order(&self) -> Option<f64> {
        let orders: Vec<f64> = self.rows.iter().filter_map(|r| r.rot_order).collect();
        if orders.is_empty() {
            None
        } else {
            Some(orders.iter().sum::<f64>() / orders.len() as f64)
        }
    }
}

/// Builds the table with orders log2(e_k / e_{k+1}); levels must halve h.
/// Zero errors leave the order undefined rather than infinite.
pub fn order_table(entries: &[(u32, f64, f64, f64)]) -> Result<ConvergenceTable, PostprocError> {
    if entries.len() < 2 {
        return Err(PostprocError::TooFewLevels);
    }
    for (i, pair) in entries.windows(2).enumerate() {
        let ratio = pair[0].1 / pair[1].1;
        if (ratio - 2.0).abs() > 1e-9 {
            return Err(PostprocError::NonDyadicLevels {
                row: i,
                next: i + 1,
                ratio,
            });
        }
    }
    let order_of = |prev: f64, cur: f64| -> Option<f64> {
        if prev > 0.0 && cur > 0.0 {
            Some((prev / cur).log2())
        } else {
            None
        }
    };
    let mut rows = Vec::with_capacity(entries.len());
    for (i, &(level, h, l2, rot)) in entries.iter().enumerate() {
        let (l2_order, rot_order) = if i == 0 {
            (None, None)
        } else {
            (
                order_of(entries[i - 1].2, l2),
                order_of(entries[i - 1].3, rot),
            )
        };
        rows.push(ConvergenceRow {
            level,
            h,
            l2_err: l2,
            l2_order,
            rot_err: rot,
            rot_order,
        });
    }
    Ok(ConvergenceTable { rows })
}

/// L² distances between two discrete solutions on nested domains:
/// ‖Π_h u_fine − Π_h u_coarse‖₀ and the rot analogue, integrated over the
/// fine mesh with the coarse value found by point location.
pub fn cross_compare(
    fine: (&PolyMesh, &DofVector),
    coarse: (&PolyMesh, &DofVector),
    quad_degree: usize,
) -> Result<(f64, f64), PostprocError> {
    let (fine_mesh, fine_dofs) = fine;
    let (coarse_mesh, coarse_dofs) = coarse;
    let fine_fields = cell_fields(fine_mesh, fine_dofs);
    let coarse_fields = cell_fields(coarse_mesh, coarse_dofs);
    let rule = triangle_rule(quad_degree);
    let results: Vec<Result<(f64, f64), PostprocError>> = (0..fine_mesh.cells.len())
        .into_par_iter()
        .map(|k| {
            let pf = fine_fields.proj[k];
            let rf = fine_fields.rot[k];
            let poly = fine_mesh.cell_polygon(k);
            let mut l2 = 0.0;
            let mut rot = 0.0;
            for tri in triangulate(&poly) {
                let area = crate::geometry::triangle_area(&tri);
                for (&uv, &w) in rule.points.iter().zip(&rule.weights) {
                    let p = crate::quad::map_to_triangle(&tri, uv);
                    let kc = coarse_mesh
                        .locate(p)
                        .ok_or(PostprocError::PointNotLocated { x: p.x, y: p.y })?;
                    let pc = coarse_fields.proj[kc];
                    let rc = coarse_fields.rot[kc];
                    let dv = (pf[0] - pc[0]).norm_sqr() + (pf[1] - pc[1]).norm_sqr();
                    l2 += w * area * dv;
                    rot += w * area * (rf - rc).norm_sqr();
                }
            }
            Ok((l2, rot))
        })
        .collect();
    let mut l2 = 0.0;
    let mut rot = 0.0;
    for r in results {
        let (a, b) = r?;
        l2 += a;
        rot += b;
    }
    Ok((l2.sqrt(), rot.sqrt()))
}

/// Discrete Helmholtz split v = w + ∇q with b_h(w, ∇s) = 0 for all nodal s.
#[derive(Clone, Debug)]
pub struct HelmholtzSplit {
    pub w: DofVector,
    /// Nodal potential, zero on boundary vertices.
    pub q: Vec<Cplx>,
    /// max_s |b_h(w, ∇s)| over interior nodes, relative to ‖v‖_b.
    pub residual: f64,
}

/// Solves the nodal system b_h(∇q, ∇s) = b_h(v, ∇s) and returns w = v − ∇q.
pub fn helmholtz_split(
    mesh: &PolyMesh,
    dofs: &DofMap,
    v: &DofVector,
    coeffs: &CoefficientField,
    stab: StabScale,
) -> Result<HelmholtzSplit, PostprocError> {
    let b = assemble_b_matrix(mesh, coeffs, stab)?;
    let nv = mesh.vertices.len();
    let interior: Vec<usize> = (0..nv).filter(|&i| !dofs.boundary_vertex[i]).collect();
    let mut vidx = vec![usize::MAX; nv];
    for (i, &vtx) in interior.iter().enumerate() {
        vidx[vtx] = i;
    }
    let m = interior.len();

    // K = Gᵀ B G and rhs = Gᵀ B v on interior nodes
    let mut bv = vec![Cplx::new(0.0, 0.0); mesh.edges.len()];
    for &(ei, ej, val) in &b {
        bv[ei] += val * v.0[ej];
    }
    let mut ktrips: Vec<(usize, usize, Cplx)> = Vec::with_capacity(4 * b.len());
    for &(ei, ej, val) in &b {
        let (a1, b1) = (mesh.edges[ei].a, mesh.edges[ei].b);
        let (a2, b2) = (mesh.edges[ej].a, mesh.edges[ej].b);
        for (r, sr) in [(b1, 1.0), (a1, -1.0)] {
            if vidx[r] == usize::MAX {
                continue;
            }
            for (c, sc) in [(b2, 1.0), (a2, -1.0)] {
                if vidx[c] == usize::MAX {
                    continue;
                }
                ktrips.push((vidx[r], vidx[c], val * sr * sc));
            }
        }
    }
    let mut rhs = vec![Cplx::new(0.0, 0.0); m];
    for (e, edge) in mesh.edges.iter().enumerate() {
        if vidx[edge.b] != usize::MAX {
            rhs[vidx[edge.b]] += bv[e];
        }
        if vidx[edge.a] != usize::MAX {
            rhs[vidx[edge.a]] -= bv[e];
        }
    }
    let (qi, _, _, _, _) = solve_complex_sparse(m, &ktrips, &rhs)?;
    let mut q = vec![Cplx::new(0.0, 0.0); nv];
    for (i, &vtx) in interior.iter().enumerate() {
        q[vtx] = qi[i];
    }
    let grad_q = nodal_gradient(mesh, &q);
    let w = DofVector(
        v.0.iter()
            .zip(&grad_q.0)
            .map(|(a, g)| a - g)
            .collect(),
    );

    // orthogonality residual: max interior |(Gᵀ B w)_s| / ‖v‖_b
    let mut bw = vec![Cplx::new(0.0, 0.0); mesh.edges.len()];
    for &(ei, ej, val) in &b {
        bw[ei] += val * w.0[ej];
    }
    let mut worst = 0.0f64;
    let mut per_node = vec![Cplx::new(0.0, 0.0); nv];
    for (e, edge) in mesh.edges.iter().enumerate() {
        per_node[edge.b] += bw[e];
        per_node[edge.a] -= bw[e];
    }
    for &vtx in &interior {
        worst = worst.max(per_node[vtx].norm());
    }
    // ‖v‖_b via the conjugated quadratic form magnitude
    let mut vb = Cplx::new(0.0, 0.0);
    for &(ei, ej, val) in &b {
        vb += v.0[ei].conj() * val * v.0[ej];
    }
    let norm_v = vb.norm().sqrt().max(1e-300);
    Ok(HelmholtzSplit {
        w,
        q,
        residual: worst / norm_v,
    })
}
