//! Independent first-kind Nédélec (lowest order) edge-element solver on a
//! triangulation of the same cut geometry, used as a cross-validation oracle.
//!
//! The triangulation reuses the cut-cell mesh so both solvers see the same
//! discrete interface: quadrilaterals split along a diagonal, other cells fan
//! from an inserted centroid vertex (ear clipping as fallback), so conformity
//! follows from the shared polygon boundary chains. DoFs are the same edge
//! functionals ∫_e u·t ds with the same canonical orientation as the virtual
//! element solver, which makes DoF vectors directly comparable on shared
//! triangulations.

use rayon::prelude::*;

use crate::geometry::{cross, Point2, RegionTag};
use crate::mesh::PolyMesh;
use crate::quad::{integrate_triangle, integrate_triangle_adaptive, triangle_rule};
use crate::system::{solve_complex_sparse, RegionVectorField, SolveError, SourceQuad};
use crate::vem::{CoefficientField, DofVector, InterpSpec, TangentialField};
use crate::Cplx;

/// One triangle: CCW vertex triple, canonical edge ids, region tag and the
/// polygonal cell it came from.
#[derive(Clone, Copy, Debug)]
pub struct TriCell {
    pub v: [usize; 3],
    pub edges: [usize; 3],
    pub tag: RegionTag,
    pub parent: usize,
}

/// Conforming triangle mesh with edge DoF numbering.
#[derive(Clone, Debug)]
pub struct TriMesh {
    pub vertices: Vec<Point2>,
    pub triangles: Vec<TriCell>,
    /// Canonical edges (a < b).
    pub edges: Vec<(usize, usize)>,
    pub boundary_edge: Vec<bool>,
}

impl TriMesh {
    pub fn edge_length(&self, e: usize) -> f64 {
        let (a, b) = self.edges[e];
        self.vertices[a].dist(self.vertices[b])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let v = &self.triangles[t].v;
        0.5 * cross(
            self.vertices[v[1]] - self.vertices[v[0]],
            self.vertices[v[2]] - self.vertices[v[0]],
        )
    }
}

/// Triangulates every cell of the polygonal mesh: quadrilaterals along the
/// shorter diagonal, general cells by centroid fan (ear clipping when the
/// centroid fan degenerates). Tags and parenthood are inherited.
pub fn triangulate_mesh(mesh: &PolyMesh) -> TriMesh {
    let mut vertices = mesh.vertices.clone();
    let mut tri_verts: Vec<([usize; 3], RegionTag, usize)> = Vec::new();
    for (k, cell) in mesh.cells.iter().enumerate() {
        let ids = &cell.vertices;
        let n = ids.len();
        if n == 3 {
            tri_verts.push(([ids[0], ids[1], ids[2]], cell.tag, k));
            continue;
        }
        if n == 4 {
            // split along the shorter diagonal, provided both halves stay CCW
            let p: Vec<Point2> = ids.iter().map(|&v| mesh.vertices[v]).collect();
            let d02 = p[0].dist(p[2]);
            let d13 = p[1].dist(p[3]);
            let split_ok = |a: usize, b: usize, c: usize| {
                cross(p[b] - p[a], p[c] - p[a]) > 1e-14 * cell.area
            };
            if d02 <= d13 && split_ok(0, 1, 2) && split_ok(0, 2, 3) {
                tri_verts.push(([ids[0], ids[1], ids[2]], cell.tag, k));
                tri_verts.push(([ids[0], ids[2], ids[3]], cell.tag, k));
                continue;
            }
            if split_ok(1, 2, 3) && split_ok(1, 3, 0) {
                tri_verts.push(([ids[1], ids[2], ids[3]], cell.tag, k));
                tri_verts.push(([ids[1], ids[3], ids[0]], cell.tag, k));
                continue;
            }
        }
        // centroid fan with an inserted vertex
        let c = cell.centroid;
        let fan_ok = (0..n).all(|s| {
            let a = mesh.vertices[ids[s]];
            let b = mesh.vertices[ids[(s + 1) % n]];
            cross(a - c, b - c) > -1e-14 * cell.area
        });
        if fan_ok {
            let cid = vertices.len();
            vertices.push(c);
            for s in 0..n {
                let a = ids[s];
                let b = ids[(s + 1) % n];
                let t = [cid, a, b];
                let ta = 0.5
                    * cross(
                        vertices[a] - vertices[cid],
                        vertices[b] - vertices[cid],
                    );
                if ta > 1e-14 * cell.area {
                    tri_verts.push((t, cell.tag, k));
                }
            }
        } else {
            // index-based ear clipping
            let mut loop_ids: Vec<usize> = ids.clone();
            while loop_ids.len() > 3 {
                let m = loop_ids.len();
                let mut clipped = false;
                for s in 0..m {
                    let ia = loop_ids[(s + m - 1) % m];
                    let ib = loop_ids[s];
                    let ic = loop_ids[(s + 1) % m];
                    let (a, b, c) = (vertices[ia], vertices[ib], vertices[ic]);
                    let t = 0.5 * cross(b - a, c - a);
                    if t <= 1e-14 * cell.area {
                        continue;
                    }
                    let empty = loop_ids.iter().all(|&w| {
                        w == ia || w == ib || w == ic || {
                            let p = vertices[w];
                            let d1 = cross(b - a, p - a);
                            let d2 = cross(c - b, p - b);
                            let d3 = cross(a - c, p - c);
                            !(d1 > 0.0 && d2 > 0.0 && d3 > 0.0)
                        }
                    });
                    if empty {
                        tri_verts.push(([ia, ib, ic], cell.tag, k));
                        loop_ids.remove(s);
                        clipped = true;
                        break;
                    }
                }
                if !clipped {
                    // drop a collinear vertex and retry
                    let mut removed = false;
                    for s in 0..loop_ids.len() {
                        let m = loop_ids.len();
                        let ia = loop_ids[(s + m - 1) % m];
                        let ib = loop_ids[s];
                        let ic = loop_ids[(s + 1) % m];
                        let t = 0.5
                            * cross(
                                vertices[ib] - vertices[ia],
                                vertices[ic] - vertices[ia],
                            );
                        if t.abs() <= 1e-14 * cell.area {
                            loop_ids.remove(s);
                            removed = true;
                            break;
                        }
                    }
                    if !removed {
                        break;
                    }
                }
            }
            if loop_ids.len() == 3 {
                tri_verts.push(([loop_ids[0], loop_ids[1], loop_ids[2]], cell.tag, k));
            }
        }
    }

    // canonical edge table
    let mut edge_ids: std::collections::HashMap<(usize, usize), usize> =
        std::collections::HashMap::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut use_count: Vec<usize> = Vec::new();
    let mut triangles = Vec::with_capacity(tri_verts.len());
    for &(v, tag, parent) in &tri_verts {
        let mut es = [0usize; 3];
        for s in 0..3 {
            let (va, vb) = (v[s], v[(s + 1) % 3]);
            let key = (va.min(vb), va.max(vb));
            let id = *edge_ids.entry(key).or_insert_with(|| {
                edges.push(key);
                use_count.push(0);
                edges.len() - 1
            });
            use_count[id] += 1;
            es[s] = id;
        }
        triangles.push(TriCell {
            v,
            edges: es,
            tag,
            parent,
        });
    }
    let boundary_edge: Vec<bool> = use_count.iter().map(|&c| c == 1).collect();
    TriMesh {
        vertices,
        triangles,
        edges,
        boundary_edge,
    }
}

/// Whitney edge basis data of one triangle: per local edge the canonical pair
/// (a, b), the constant rot and the values at the three edge midpoints.
struct WhitneyBasis {
    rot: [f64; 3],
    /// values[m][i]: basis i at edge midpoint m
    values: [[Point2; 3]; 3],
}

fn whitney_basis(tri: &TriMesh, t: &TriCell) -> WhitneyBasis {
    let p = [
        tri.vertices[t.v[0]],
        tri.vertices[t.v[1]],
        tri.vertices[t.v[2]],
    ];
    let area2 = cross(p[1] - p[0], p[2] - p[0]);
    // ∇λ_i = perp(p_{i+2} − p_{i+1}) / (2A)
    let grad = |i: usize| -> Point2 {
        let d = p[(i + 2) % 3] - p[(i + 1) % 3];
        Point2::new(-d.y / area2, d.x / area2)
    };
    let grads = [grad(0), grad(1), grad(2)];
    // barycentric at a point
    let lambda = |x: Point2| -> [f64; 3] {
        let l1 = cross(p[2] - p[1], x - p[1]) / area2;
        let l2 = cross(p[0] - p[2], x - p[2]) / area2;
        [1.0 - l1 - l2, l1, l2]
    };
    let midpoints = [
        (p[0] + p[1]) * 0.5,
        (p[1] + p[2]) * 0.5,
        (p[2] + p[0]) * 0.5,
    ];
    let mut rot = [0.0; 3];
    let mut values = [[Point2::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        // local edge i runs v[i] → v[i+1]; the basis follows the canonical
        // (min, max) orientation so the DoFs match the global convention
        let (la, lb) = (i, (i + 1) % 3);
        let (ca, cb) = if t.v[la] < t.v[lb] { (la, lb) } else { (lb, la) };
        rot[i] = 2.0 * cross(grads[ca], grads[cb]);
        for (m, &mid) in midpoints.iter().enumerate() {
            let l = lambda(mid);
            values[m][i] = Point2::new(
                l[ca] * grads[cb].x - l[cb] * grads[ca].x,
                l[ca] * grads[cb].y - l[cb] * grads[ca].y,
            );
        }
    }
    WhitneyBasis { rot, values }
}

/// Discrete solution of the edge-element scheme.
#[derive(Clone, Debug)]
pub struct Nd0Solution {
    pub dofs: DofVector,
    pub residual: f64,
}

/// Assembles and solves (α rot u, rot v) − (β u, v) = (f, v) with essential
/// tangential boundary data.
pub fn nd0_solve(
    tri: &TriMesh,
    coeffs: &CoefficientField,
    source: &dyn RegionVectorField,
    g: Option<&dyn TangentialField>,
    quad: &SourceQuad,
) -> Result<Nd0Solution, SolveError> {
    let n = tri.edges.len();
    struct Local {
        edges: [usize; 3],
        curl: [[f64; 3]; 3],
        mass: [[Cplx; 3]; 3],
        rhs: [Cplx; 3],
    }
    let locals: Vec<Local> = tri
        .triangles
        .par_iter()
        .enumerate()
        .map(|(t, cell)| {
            let area = tri.triangle_area(t);
            let basis = whitney_basis(tri, cell);
            let alpha = coeffs.alpha(cell.tag);
            let beta = coeffs.beta(cell.tag);
            let mut curl = [[0.0; 3]; 3];
            let mut mass = [[Cplx::new(0.0, 0.0); 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    curl[i][j] = alpha * area * basis.rot[i] * basis.rot[j];
                    // 3-midpoint rule, exact for the quadratic products
                    let mut m = 0.0;
                    for mp in 0..3 {
                        m += basis.values[mp][i].x * basis.values[mp][j].x
                            + basis.values[mp][i].y * basis.values[mp][j].y;
                    }
                    mass[i][j] = beta * area / 3.0 * m;
                }
            }
            // source: (f, w_i) with degree-7 (optionally adaptive) quadrature
            let pts = [
                tri.vertices[cell.v[0]],
                tri.vertices[cell.v[1]],
                tri.vertices[cell.v[2]],
            ];
            let mut rhs = [Cplx::new(0.0, 0.0); 3];
            let area2 = cross(pts[1] - pts[0], pts[2] - pts[0]);
            let grad = |i: usize| -> Point2 {
                let d = pts[(i + 2) % 3] - pts[(i + 1) % 3];
                Point2::new(-d.y / area2, d.x / area2)
            };
            let grads = [grad(0), grad(1), grad(2)];
            let lambda = |x: Point2| -> [f64; 3] {
                let l1 = cross(pts[2] - pts[1], x - pts[1]) / area2;
                let l2 = cross(pts[0] - pts[2], x - pts[2]) / area2;
                [1.0 - l1 - l2, l1, l2]
            };
            for i in 0..3 {
                let (la, lb) = (i, (i + 1) % 3);
                let (ca, cb) = if cell.v[la] < cell.v[lb] {
                    (la, lb)
                } else {
                    (lb, la)
                };
                let integrand = |p: Point2| -> Cplx {
                    let l = lambda(p);
                    let w = Point2::new(
                        l[ca] * grads[cb].x - l[cb] * grads[ca].x,
                        l[ca] * grads[cb].y - l[cb] * grads[ca].y,
                    );
                    let f = source.eval(p, cell.tag);
                    f[0] * w.x + f[1] * w.y
                };
                let rule = triangle_rule(quad.degree);
                rhs[i] = if quad.adaptive {
                    integrate_triangle_adaptive(&pts, rule, 8, 1e-9, 1e-14, &integrand)
                } else {
                    integrate_triangle(&pts, rule, integrand)
                };
            }
            Local {
                edges: cell.edges,
                curl,
                mass,
                rhs,
            }
        })
        .collect();

    let mut triplets: Vec<(usize, usize, Cplx)> = Vec::with_capacity(18 * locals.len());
    let mut rhs = vec![Cplx::new(0.0, 0.0); n];
    for l in &locals {
        for i in 0..3 {
            rhs[l.edges[i]] += l.rhs[i];
            for j in 0..3 {
                triplets.push((l.edges[i], l.edges[j], Cplx::new(l.curl[i][j], 0.0)));
                triplets.push((l.edges[i], l.edges[j], -l.mass[i][j]));
            }
        }
    }

    // essential boundary data
    let mut constrained: Vec<Option<Cplx>> = vec![None; n];
    let interp = InterpSpec::default();
    for e in 0..n {
        if !tri.boundary_edge[e] {
            continue;
        }
        let value = match g {
            None => Cplx::new(0.0, 0.0),
            Some(field) => {
                let (a, b) = tri.edges[e];
                let (pa, pb) = (tri.vertices[a], tri.vertices[b]);
                let t = (pb - pa) * (1.0 / pa.dist(pb));
                crate::quad::integrate_segment(
                    pa,
                    pb,
                    interp.gauss_points,
                    false,
                    false,
                    interp.grading,
                    |p| field.tangential(p, t),
                )
            }
        };
        constrained[e] = Some(value);
    }

    let mut free_index = vec![usize::MAX; n];
    let mut n_free = 0;
    for i in 0..n {
        if constrained[i].is_none() {
            free_index[i] = n_free;
            n_free += 1;
        }
    }
    let mut red_rhs: Vec<Cplx> = Vec::with_capacity(n_free);
    for i in 0..n {
        if constrained[i].is_none() {
            red_rhs.push(rhs[i]);
        }
    }
    let mut reduced: Vec<(usize, usize, Cplx)> = Vec::with_capacity(triplets.len());
    for &(i, j, v) in &triplets {
        match (constrained[i], constrained[j]) {
            (None, None) => reduced.push((free_index[i], free_index[j], v)),
            (None, Some(gj)) => red_rhs[free_index[i]] -= v * gj,
            _ => {}
        }
    }
    let (x, residual, _, _, _) = solve_complex_sparse(n_free, &reduced, &red_rhs)?;
    if residual > 1e-8 {
        return Err(SolveError::ResidualTooLarge { residual });
    }
    let mut full = vec![Cplx::new(0.0, 0.0); n];
    for i in 0..n {
        full[i] = match constrained[i] {
            Some(gv) => gv,
            None => x[free_index[i]],
        };
    }
    Ok(Nd0Solution {
        dofs: DofVector(full),
        residual,
    })
}

/// Per-triangle mean of the edge-element solution (its Π onto constants).
pub fn tri_projection(tri: &TriMesh, sol: &DofVector) -> Vec<[Cplx; 2]> {
    tri.triangles
        .iter()
        .map(|cell| {
            let basis = whitney_basis(tri, cell);
            let mut v = [Cplx::new(0.0, 0.0); 2];
            for i in 0..3 {
                let d = sol.0[cell.edges[i]];
                // mean of a linear function: average of midpoint values
                let mut mx = 0.0;
                let mut my = 0.0;
                for m in 0..3 {
                    mx += basis.values[m][i].x;
                    my += basis.values[m][i].y;
                }
                v[0] += d * (mx / 3.0);
                v[1] += d * (my / 3.0);
            }
            v
        })
        .collect()
}

/// Per-triangle constant rot of the edge-element solution.
pub fn tri_rot(tri: &TriMesh, sol: &DofVector) -> Vec<Cplx> {
    tri.triangles
        .iter()
        .map(|cell| {
            let basis = whitney_basis(tri, cell);
            let mut r = Cplx::new(0.0, 0.0);
            for i in 0..3 {
                r += sol.0[cell.edges[i]] * basis.rot[i];
            }
            r
        })
        .collect()
}

/// Error norms of the edge-element solution against a manufactured solution:
/// (‖u − Π_T u_h‖₀, ‖rot u − rot u_h‖₀), with optional grading toward
/// singular lines.
pub fn nd0_errors(
    tri: &TriMesh,
    sol: &DofVector,
    exact: &dyn RegionVectorField,
    exact_rot: &dyn crate::system::RegionScalarField,
    quad: &crate::postproc::ErrorQuad,
) -> (f64, f64) {
    let proj = tri_projection(tri, sol);
    let rots = tri_rot(tri, sol);
    let rule = triangle_rule(quad.degree);
    let scale = tri
        .triangles
        .iter()
        .map(|t| tri.vertices[t.v[0]].dist(tri.vertices[t.v[1]]))
        .fold(0.0f64, f64::max);
    let sums: Vec<(f64, f64)> = tri
        .triangles
        .par_iter()
        .enumerate()
        .map(|(t, cell)| {
            let pts = [
                tri.vertices[cell.v[0]],
                tri.vertices[cell.v[1]],
                tri.vertices[cell.v[2]],
            ];
            let pk = proj[t];
            let rk = rots[t];
            let f_l2 = |p: Point2| {
                let u = exact.eval(p, cell.tag);
                (u[0] - pk[0]).norm_sqr() + (u[1] - pk[1]).norm_sqr()
            };
            let f_rot = |p: Point2| (exact_rot.eval(p, cell.tag) - rk).norm_sqr();
            let graded = quad
                .singular_lines
                .iter()
                .find(|l| pts.iter().any(|&v| l.level(v).abs() <= 1e-12 * scale));
            let (l2, rot) = if let Some(line) = graded {
                (
                    crate::quad::integrate_triangle_graded(&pts, rule, line, quad.grading, f_l2),
                    crate::quad::integrate_triangle_graded(&pts, rule, line, quad.grading, f_rot),
                )
            } else {
                (
                    integrate_triangle(&pts, rule, f_l2),
                    integrate_triangle(&pts, rule, f_rot),
                )
            };
            (l2, rot)
        })
        .collect();
    let l2: f64 = sums.iter().map(|s| s.0).sum();
    let rot: f64 = sums.iter().map(|s| s.1).sum();
    (l2.sqrt(), rot.sqrt())
}

/// Relative L² distance between the projected VEM field (constant per
/// polygonal cell) and the projected edge-element field (constant per
/// triangle), integrated over the shared triangulation.
pub fn relative_field_difference(
    tri: &TriMesh,
    vem_proj: &[[Cplx; 2]],
    nd0_proj: &[[Cplx; 2]],
) -> f64 {
    let mut diff2 = 0.0;
    let mut ref2 = 0.0;
    for (t, cell) in tri.triangles.iter().enumerate() {
        let area = tri.triangle_area(t);
        let v = vem_proj[cell.parent];
        let w = nd0_proj[t];
        diff2 += area * ((v[0] - w[0]).norm_sqr() + (v[1] - w[1]).norm_sqr());
        ref2 += area * (w[0].norm_sqr() + w[1].norm_sqr());
    }
    (diff2 / ref2).sqrt()
}
