//! Element-local kernels of the lowest-order H(rot)-conforming virtual
//! element method.
//!
//! The local space on a polygon K carries one DoF per edge, ∫_e v·t ds. Two
//! quantities are computable from the DoFs alone:
//!
//! * the constant rot, by Stokes: rot v = (1/|K|) ∮_{∂K} v·t ds;
//! * the L² projection Π_K v onto constant vectors, through integration by
//!   parts against the linear polynomials p with vector-rot equal to the
//!   target constant (p = x₂ for (1,0), p = −x₁ for (0,1)):
//!   ∫_K v·c dx = (rot v) ∫_K p dx − ∮_{∂K} (v·t) p ds.
//!
//! Edge integrals of linear integrands reduce to midpoint values, so the
//! projector columns have the closed form Π_K φ_i = (σ_i/|K|)·perp(m_i − c)
//! with m_i the edge midpoint, c the centroid and σ_i the loop sign.
//!
//! Element blocks (local DoFs are the global ones; orientation signs are
//! baked into the entries):
//!
//! * curl block   `A_K[i,j] = α_K |K| r_i r_j`, rank 1;
//! * mass block   `M_K[i,j] = β_K |K| (P_i · P_j)`, unconjugated;
//! * stabilization S_K = s̄ Σ_e |e| T_e,i T_e,j with T the tangential trace of
//!   (I − Π_K)φ_i on e and s̄ the diameter h_K (or a global h).
//!
//! The discrete bilinear form contribution of K is A_K − M_K − S_K.

use thiserror::Error;

use crate::geometry::{Point2, RegionTag};
use crate::mesh::PolyMesh;
use crate::quad::{integrate_segment, Grading, SingularLine};
use crate::Cplx;

#[derive(Debug, Error)]
pub enum VemError {
    #[error("non-finite field sample on edge {edge}")]
    NonFiniteSample { edge: usize },
    #[error("cell {cell} has zero area")]
    ZeroArea { cell: usize },
}

/// Piecewise-constant media coefficients, indexed by region tag.
#[derive(Clone, Copy, Debug)]
pub struct CoefficientField {
    alpha_minus: f64,
    alpha_plus: f64,
    beta_minus: Cplx,
    beta_plus: Cplx,
}

impl CoefficientField {
    pub fn new(alpha_minus: f64, alpha_plus: f64, beta_minus: Cplx, beta_plus: Cplx) -> Self {
        assert!(alpha_minus > 0.0 && alpha_plus > 0.0, "alpha must be positive");
        assert!(
            beta_minus.is_finite() && beta_plus.is_finite(),
            "beta must be finite"
        );
        Self {
            alpha_minus,
            alpha_plus,
            beta_minus,
            beta_plus,
        }
    }

    /// Real coefficients (σ = 0), as in the manufactured-solution benchmarks.
    pub fn real(alpha_minus: f64, alpha_plus: f64, beta_minus: f64, beta_plus: f64) -> Self {
        Self::new(
            alpha_minus,
            alpha_plus,
            Cplx::new(beta_minus, 0.0),
            Cplx::new(beta_plus, 0.0),
        )
    }

    /// β = ω²(ε + iσ/ω) per region, α as given.
    pub fn from_physics(omega: f64, eps: [f64; 2], sigma: [f64; 2], alpha: [f64; 2]) -> Self {
        let beta = |e: f64, s: f64| Cplx::new(omega * omega * e, omega * s);
        Self::new(
            alpha[0],
            alpha[1],
            beta(eps[0], sigma[0]),
            beta(eps[1], sigma[1]),
        )
    }

    pub fn alpha(&self, tag: RegionTag) -> f64 {
        match tag {
            RegionTag::Minus => self.alpha_minus,
            RegionTag::Plus => self.alpha_plus,
        }
    }

    pub fn beta(&self, tag: RegionTag) -> Cplx {
        match tag {
            RegionTag::Minus => self.beta_minus,
            RegionTag::Plus => self.beta_plus,
        }
    }
}

/// Complex edge-DoF vector over the whole mesh, canonical edge orientation.
#[derive(Clone, Debug)]
pub struct DofVector(pub Vec<Cplx>);

impl DofVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![Cplx::new(0.0, 0.0); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Stabilization weight: the element diameter (default) or one global h.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StabScale {
    LocalDiameter,
    GlobalH(f64),
}

/// Per-cell geometric data used by every element kernel.
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub cell: usize,
    pub tag: RegionTag,
    pub area: f64,
    pub diameter: f64,
    pub centroid: Point2,
    pub edge_ids: Vec<usize>,
    /// +1 when the CCW loop traverses the edge in canonical direction.
    pub signs: Vec<f64>,
    pub lengths: Vec<f64>,
    pub midpoints: Vec<Point2>,
    /// Unit tangents in loop direction.
    pub tangents: Vec<Point2>,
}

pub fn element_geometry(mesh: &PolyMesh, cell: usize) -> ElementGeometry {
    let c = &mesh.cells[cell];
    let n = c.edges.len();
    let mut edge_ids = Vec::with_capacity(n);
    let mut signs = Vec::with_capacity(n);
    let mut lengths = Vec::with_capacity(n);
    let mut midpoints = Vec::with_capacity(n);
    let mut tangents = Vec::with_capacity(n);
    for &(e, sign) in &c.edges {
        let edge = &mesh.edges[e];
        let a = mesh.vertices[edge.a];
        let b = mesh.vertices[edge.b];
        edge_ids.push(e);
        signs.push(sign as f64);
        lengths.push(edge.length);
        midpoints.push(Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)));
        let t = (b - a) * (sign as f64 / edge.length);
        tangents.push(t);
    }
    ElementGeometry {
        cell,
        tag: c.tag,
        area: c.area,
        diameter: c.diameter,
        centroid: c.centroid,
        edge_ids,
        signs,
        lengths,
        midpoints,
        tangents,
    }
}

/// Row of the constant-rot functional: rot v_h = Σ_i r_i d_i on this cell.
pub fn element_rot_row(geom: &ElementGeometry) -> Vec<f64> {
    geom.signs.iter().map(|&s| s / geom.area).collect()
}

/// The constant rot of a DoF vector on this cell (Stokes on the edge loop).
pub fn element_rot(geom: &ElementGeometry, dofs: &DofVector) -> Cplx {
    let mut sum = Cplx::new(0.0, 0.0);
    for (i, &e) in geom.edge_ids.iter().enumerate() {
        sum += dofs.0[e] * geom.signs[i];
    }
    sum / geom.area
}

/// Columns of the projector onto constant vectors: column i is Π_K φ_i.
pub fn element_projection(geom: &ElementGeometry) -> Result<[Vec<f64>; 2], VemError> {
    if geom.area <= 0.0 {
        return Err(VemError::ZeroArea { cell: geom.cell });
    }
    let n = geom.edge_ids.len();
    let mut px = Vec::with_capacity(n);
    let mut py = Vec::with_capacity(n);
    for i in 0..n {
        let w = geom.signs[i] / geom.area;
        px.push(w * (geom.centroid.y - geom.midpoints[i].y));
        py.push(w * (geom.midpoints[i].x - geom.centroid.x));
    }
    Ok([px, py])
}

/// Π_K applied to a DoF vector.
pub fn project_value(geom: &ElementGeometry, proj: &[Vec<f64>; 2], dofs: &DofVector) -> [Cplx; 2] {
    let mut vx = Cplx::new(0.0, 0.0);
    let mut vy = Cplx::new(0.0, 0.0);
    for (i, &e) in geom.edge_ids.iter().enumerate() {
        vx += dofs.0[e] * proj[0][i];
        vy += dofs.0[e] * proj[1][i];
    }
    [vx, vy]
}

/// All element blocks of one cell.
#[derive(Clone, Debug)]
pub struct ElementOperators {
    pub geom: ElementGeometry,
    /// 2×n projector onto constants.
    pub projector: [Vec<f64>; 2],
    /// 1×n constant-rot row.
    pub rot_row: Vec<f64>,
    /// α_K |K| rᵀr (real, rank one).
    pub curl_block: Vec<f64>,
    /// β_K |K| PᵀP (complex symmetric).
    pub mass_block: Vec<Cplx>,
    /// s̄ Σ_e |e| T_eᵀ T_e (real, PSD, annihilates constants).
    pub stab_block: Vec<f64>,
}

impl ElementOperators {
    pub fn n(&self) -> usize {
        self.rot_row.len()
    }

    /// Local contribution to the system form: A_K − M_K − S_K.
    pub fn system_entry(&self, i: usize, j: usize) -> Cplx {
        let n = self.n();
        Cplx::new(self.curl_block[i * n + j] - self.stab_block[i * n + j], 0.0)
            - self.mass_block[i * n + j]
    }

    /// Local contribution to the b_h form: M_K + S_K.
    pub fn b_entry(&self, i: usize, j: usize) -> Cplx {
        let n = self.n();
        self.mass_block[i * n + j] + Cplx::new(self.stab_block[i * n + j], 0.0)
    }
}

pub fn element_matrices(
    geom: ElementGeometry,
    coeffs: &CoefficientField,
    stab: StabScale,
) -> Result<ElementOperators, VemError> {
    let projector = element_projection(&geom)?;
    let rot_row = element_rot_row(&geom);
    let n = geom.edge_ids.len();
    let alpha = coeffs.alpha(geom.tag);
    let beta = coeffs.beta(geom.tag);
    let s_weight = match stab {
        StabScale::LocalDiameter => geom.diameter,
        StabScale::GlobalH(h) => h,
    };

    let mut curl_block = vec![0.0; n * n];
    let mut mass_block = vec![Cplx::new(0.0, 0.0); n * n];
    let mut stab_block = vec![0.0; n * n];

    // tangential trace defect T[e][i] = (I − Π_K)φ_i · t_e on edge e
    let mut trace_defect = vec![0.0; n * n];
    for e in 0..n {
        let t = geom.tangents[e];
        for i in 0..n {
            let proj_t = t.x * projector[0][i] + t.y * projector[1][i];
            let own = if e == i { geom.signs[i] / geom.lengths[i] } else { 0.0 };
            trace_defect[e * n + i] = own - proj_t;
        }
    }

    for i in 0..n {
        for j in 0..n {
            curl_block[i * n + j] = alpha * geom.area * rot_row[i] * rot_row[j];
            let pp = projector[0][i] * projector[0][j] + projector[1][i] * projector[1][j];
            mass_block[i * n + j] = beta * geom.area * pp;
            let mut s = 0.0;
            for e in 0..n {
                s += geom.lengths[e] * trace_defect[e * n + i] * trace_defect[e * n + j];
            }
            stab_block[i * n + j] = s_weight * s;
        }
    }

    Ok(ElementOperators {
        geom,
        projector,
        rot_row,
        curl_block,
        mass_block,
        stab_block,
    })
}

/// A field whose tangential component can be sampled along edges. The
/// tangential form lets problems with singular components cancel them against
/// zero tangent entries analytically instead of producing ∞·0.
pub trait TangentialField {
    fn tangential(&self, p: Point2, t: Point2) -> Cplx;
}

impl<F: Fn(Point2, Point2) -> Cplx> TangentialField for F {
    fn tangential(&self, p: Point2, t: Point2) -> Cplx {
        self(p, t)
    }
}

/// Quadrature controls for edge-DoF interpolation.
#[derive(Clone, Debug)]
pub struct InterpSpec {
    pub gauss_points: usize,
    /// Edges with an endpoint on one of these lines are integrated with
    /// geometric grading toward that endpoint.
    pub singular_lines: Vec<SingularLine>,
    pub grading: Grading,
}

impl Default for InterpSpec {
    fn default() -> Self {
        Self {
            gauss_points: 8,
            singular_lines: Vec::new(),
            grading: Grading::default(),
        }
    }
}

/// Edge-DoF interpolation: DoF_e = ∫_e field·t ds over every mesh edge in
/// canonical orientation.
pub fn interpolate_edge(
    field: &dyn TangentialField,
    mesh: &PolyMesh,
    spec: &InterpSpec,
) -> Result<DofVector, VemError> {
    let mut dofs = Vec::with_capacity(mesh.edges.len());
    let scale = mesh.h_max.max(1e-300);
    for (e, edge) in mesh.edges.iter().enumerate() {
        let a = mesh.vertices[edge.a];
        let b = mesh.vertices[edge.b];
        let t = (b - a) * (1.0 / edge.length);
        let on_line = |p: Point2| {
            spec.singular_lines
                .iter()
                .any(|l| l.level(p).abs() <= 1e-12 * scale)
        };
        // an edge lying inside a singular line is handled by the field's
        // tangential cancellation; only transversal endpoints need grading
        let (sing_a, sing_b) = if on_line(a) && on_line(b) {
            (false, false)
        } else {
            (on_line(a), on_line(b))
        };
        let value = integrate_segment(a, b, spec.gauss_points, sing_a, sing_b, spec.grading, |p| {
            field.tangential(p, t)
        });
        if !value.is_finite() {
            return Err(VemError::NonFiniteSample { edge: e });
        }
        dofs.push(value);
    }
    Ok(DofVector(dofs))
}

/// Interpolates a plain vector field (no singular structure).
pub fn interpolate_vector_field(
    field: impl Fn(Point2) -> [Cplx; 2],
    mesh: &PolyMesh,
    spec: &InterpSpec,
) -> Result<DofVector, VemError> {
    let wrapped = move |p: Point2, t: Point2| {
        let v = field(p);
        v[0] * t.x + v[1] * t.y
    };
    interpolate_edge(&wrapped, mesh, spec)
}

/// Discrete gradient: edge DoFs of ∇q for a nodal vector q, i.e.
/// (Gq)_e = q(b) − q(a) for the canonical edge a→b.
pub fn nodal_gradient(mesh: &PolyMesh, q: &[Cplx]) -> DofVector {
    let mut d = Vec::with_capacity(mesh.edges.len());
    for edge in &mesh.edges {
        d.push(q[edge.b] - q[edge.a]);
    }
    DofVector(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{InterfaceSpec, Polygon};
    use crate::mesh::{build_cut_mesh, dof_map, GridSpec, PolyMesh};

    fn unit_square_mesh() -> PolyMesh {
        build_cut_mesh(&GridSpec::square(0.0, 1.0, 1), &InterfaceSpec::none(), 1e-9).unwrap()
    }

    fn triangle_mesh() -> PolyMesh {
        PolyMesh::from_single_polygon(
            Polygon::new(vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
            ])
            .unwrap(),
            RegionTag::Plus,
        )
    }

    fn real_dofs(mesh: &PolyMesh, f: impl Fn(Point2) -> [f64; 2] + Copy) -> DofVector {
        interpolate_vector_field(
            |p| {
                let v = f(p);
                [Cplx::new(v[0], 0.0), Cplx::new(v[1], 0.0)]
            },
            mesh,
            &InterpSpec::default(),
        )
        .unwrap()
    }

    #[test]
    fn interpolation_simple_edges() {
        let mesh = unit_square_mesh();
        // field (y, x): zero along the bottom edge, x = 1 along the right edge
        let dofs = real_dofs(&mesh, |p| [p.y, p.x]);
        for (e, edge) in mesh.edges.iter().enumerate() {
            let a = mesh.vertices[edge.a];
            let b = mesh.vertices[edge.b];
            if a.y == 0.0 && b.y == 0.0 {
                assert!(dofs.0[e].norm() < 1e-14);
            }
            if a.x == 1.0 && b.x == 1.0 {
                assert!((dofs.0[e] - Cplx::new(1.0, 0.0)).norm() < 1e-14);
            }
        }
        // field (−y, x) on the right edge: t = (0, 1), integrand x = 1
        let dofs = real_dofs(&mesh, |p| [-p.y, p.x]);
        for (e, edge) in mesh.edges.iter().enumerate() {
            let a = mesh.vertices[edge.a];
            let b = mesh.vertices[edge.b];
            if a.x == 1.0 && b.x == 1.0 {
                assert!((dofs.0[e] - Cplx::new(1.0, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn interpolation_graded_singular_edge() {
        // |x − ε|^s with s = −0.4 against the exact antiderivative
        let eps = 0.3;
        let s = -0.4;
        let grid = GridSpec::new(eps, eps + 0.1, 0.0, 0.1, 1, 1);
        let mesh = build_cut_mesh(&grid, &InterfaceSpec::none(), 1e-9).unwrap();
        let line = SingularLine {
            point: Point2::new(eps, 0.0),
            normal: Point2::new(1.0, 0.0),
        };
        let field = move |p: Point2, t: Point2| -> Cplx {
            // guard the vertical edges on the singular line: the x-component
            // multiplies a zero tangent entry and must not produce ∞·0
            let ux = if t.x == 0.0 {
                0.0
            } else {
                (p.x - eps).abs().powf(s)
            };
            Cplx::new(ux * t.x, 0.0)
        };
        let spec = InterpSpec {
            singular_lines: vec![line],
            ..Default::default()
        };
        let dofs = interpolate_edge(&field, &mesh, &spec).unwrap();
        let exact = 0.1f64.powf(s + 1.0) / (s + 1.0);
        // bottom edge (ε,0)→(ε+0.1,0)
        let mut checked = false;
        for (e, edge) in mesh.edges.iter().enumerate() {
            let a = mesh.vertices[edge.a];
            let b = mesh.vertices[edge.b];
            if a.y == 0.0 && b.y == 0.0 {
                assert!(
                    (dofs.0[e].re - exact).abs() < 1e-6 * exact,
                    "dof {} vs {exact}",
                    dofs.0[e].re
                );
                checked = true;
            }
        }
        assert!(checked);
    }

    #[test]
    fn rot_of_constant_vanishes() {
        let mesh = build_cut_mesh(&GridSpec::square(-1.0, 1.0, 3), &InterfaceSpec::none(), 1e-9)
            .unwrap();
        let dofs = real_dofs(&mesh, |_| [2.0, -3.0]);
        for k in 0..mesh.cells.len() {
            let geom = element_geometry(&mesh, k);
            assert!(element_rot(&geom, &dofs).norm() < 1e-13);
        }
    }

    #[test]
    fn rot_of_rotational_field() {
        // rot(−y, x) = 2 exactly, on the square and on a triangle
        let mesh = unit_square_mesh();
        let dofs = real_dofs(&mesh, |p| [-p.y, p.x]);
        let geom = element_geometry(&mesh, 0);
        assert!((element_rot(&geom, &dofs) - Cplx::new(2.0, 0.0)).norm() < 1e-13);

        let tri = triangle_mesh();
        let dofs = real_dofs(&tri, |p| [-p.y, p.x]);
        let geom = element_geometry(&tri, 0);
        assert!((element_rot(&geom, &dofs) - Cplx::new(2.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn projection_reproduces_constants() {
        let r = std::f64::consts::PI / 5.0;
        let spec = InterfaceSpec::new(
            vec![crate::geometry::Primitive::Circle {
                center: Point2::new(0.0, 0.0),
                radius: r,
            }],
            crate::geometry::RegionRule::minus_inside(),
        )
        .unwrap();
        let mesh = build_cut_mesh(&GridSpec::square(-1.0, 1.0, 8), &spec, 1e-9).unwrap();
        let c = [1.3, -0.7];
        let dofs = real_dofs(&mesh, move |_| c);
        for k in 0..mesh.cells.len() {
            let geom = element_geometry(&mesh, k);
            let proj = element_projection(&geom).unwrap();
            let v = project_value(&geom, &proj, &dofs);
            assert!(
                (v[0].re - c[0]).abs() < 1e-12 && (v[1].re - c[1]).abs() < 1e-12,
                "cell {k}: {v:?}"
            );
        }
    }

    #[test]
    fn projection_of_rotational_field() {
        // Π(−y, x) = (−c_y, c_x): (−0.5, 0.5) on the unit square,
        // (−1/3, 1/3) on the reference triangle
        let mesh = unit_square_mesh();
        let dofs = real_dofs(&mesh, |p| [-p.y, p.x]);
        let geom = element_geometry(&mesh, 0);
        let proj = element_projection(&geom).unwrap();
        let v = project_value(&geom, &proj, &dofs);
        assert!((v[0].re + 0.5).abs() < 1e-13 && (v[1].re - 0.5).abs() < 1e-13);

        let tri = triangle_mesh();
        let dofs = real_dofs(&tri, |p| [-p.y, p.x]);
        let geom = element_geometry(&tri, 0);
        let proj = element_projection(&geom).unwrap();
        let v = project_value(&geom, &proj, &dofs);
        assert!((v[0].re + 1.0 / 3.0).abs() < 1e-13 && (v[1].re - 1.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn stabilization_annihilates_constants() {
        let mesh = build_cut_mesh(&GridSpec::square(-1.0, 1.0, 4), &InterfaceSpec::none(), 1e-9)
            .unwrap();
        let coeffs = CoefficientField::real(1.0, 1.0, 1.0, 1.0);
        let dofs = real_dofs(&mesh, |_| [0.8, 1.7]);
        for k in 0..mesh.cells.len() {
            let ops =
                element_matrices(element_geometry(&mesh, k), &coeffs, StabScale::LocalDiameter)
                    .unwrap();
            let n = ops.n();
            for i in 0..n {
                let mut row = Cplx::new(0.0, 0.0);
                for j in 0..n {
                    row += dofs.0[ops.geom.edge_ids[j]] * ops.stab_block[i * n + j];
                }
                assert!(row.norm() < 1e-13, "S d_c != 0 at cell {k}");
            }
        }
    }

    #[test]
    fn curl_block_rank_one_and_kills_gradients() {
        let mesh = build_cut_mesh(&GridSpec::square(0.0, 1.0, 2), &InterfaceSpec::none(), 1e-9)
            .unwrap();
        let coeffs = CoefficientField::real(1.0, 1.0, 1.0, 1.0);
        // gradient-type DoF vector from a random nodal function
        let q: Vec<Cplx> = (0..mesh.vertices.len())
            .map(|v| Cplx::new((v as f64 * 0.37).sin(), 0.0))
            .collect();
        let g = nodal_gradient(&mesh, &q);
        for k in 0..mesh.cells.len() {
            let ops =
                element_matrices(element_geometry(&mesh, k), &coeffs, StabScale::LocalDiameter)
                    .unwrap();
            let n = ops.n();
            // rank 1: every 2×2 minor vanishes
            for i in 0..n {
                for j in 0..n {
                    let m = ops.curl_block[i * n + i] * ops.curl_block[j * n + j]
                        - ops.curl_block[i * n + j] * ops.curl_block[j * n + i];
                    assert!(m.abs() < 1e-12);
                }
            }
            for i in 0..n {
                let mut row = Cplx::new(0.0, 0.0);
                for j in 0..n {
                    row += g.0[ops.geom.edge_ids[j]] * ops.curl_block[i * n + j];
                }
                assert!(row.norm() < 1e-12, "A G q != 0");
            }
        }
    }

    #[test]
    fn block_scaling_under_mesh_dilation() {
        // with DoFs carrying a length factor the blocks scale as
        // A ~ s⁻², M ~ 1, S ~ 1 (the forms on fixed fields then go like s⁰,
        // s², s² as expected)
        let coeffs = CoefficientField::real(1.0, 1.0, 1.0, 1.0);
        let base = Polygon::new(vec![
            Point2::new(0.1, 0.0),
            Point2::new(1.1, 0.3),
            Point2::new(0.9, 1.2),
            Point2::new(-0.2, 0.8),
        ])
        .unwrap();
        let ops0 = element_matrices(
            element_geometry(&PolyMesh::from_single_polygon(base.clone(), RegionTag::Plus), 0),
            &coeffs,
            StabScale::LocalDiameter,
        )
        .unwrap();
        for s in [0.5f64, 2.0] {
            let scaled = Polygon::new(
                base.vertices
                    .iter()
                    .map(|p| Point2::new(p.x * s, p.y * s))
                    .collect(),
            )
            .unwrap();
            let ops1 = element_matrices(
                element_geometry(&PolyMesh::from_single_polygon(scaled, RegionTag::Plus), 0),
                &coeffs,
                StabScale::LocalDiameter,
            )
            .unwrap();
            let n = ops0.n();
            for i in 0..n * n {
                assert!((ops1.curl_block[i] - ops0.curl_block[i] / (s * s)).abs() < 1e-12);
                assert!((ops1.mass_block[i] - ops0.mass_block[i]).norm() < 1e-12);
                assert!((ops1.stab_block[i] - ops0.stab_block[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_sequence_rot_of_gradient_zero() {
        let r = std::f64::consts::PI / 5.0;
        let spec = InterfaceSpec::new(
            vec![crate::geometry::Primitive::Circle {
                center: Point2::new(0.0, 0.0),
                radius: r,
            }],
            crate::geometry::RegionRule::minus_inside(),
        )
        .unwrap();
        let mesh = build_cut_mesh(&GridSpec::square(-1.0, 1.0, 8), &spec, 1e-9).unwrap();
        let dofs = dof_map(&mesh);
        let q: Vec<Cplx> = (0..dofs.n_vertex_dofs)
            .map(|v| Cplx::new((v as f64 * 0.61).cos(), (v as f64 * 0.23).sin()))
            .collect();
        let g = nodal_gradient(&mesh, &q);
        for k in 0..mesh.cells.len() {
            let geom = element_geometry(&mesh, k);
            assert!(element_rot(&geom, &g).norm() < 1e-12, "cell {k}");
        }
    }

    #[test]
    fn commuting_interpolation_vs_cell_mean_rot() {
        // rot(I_h u) equals the cell mean of rot u for a smooth field
        let mesh = build_cut_mesh(&GridSpec::square(-1.0, 1.0, 4), &InterfaceSpec::none(), 1e-9)
            .unwrap();
        let u = |p: Point2| [(p.y * 1.3).sin(), (p.x * 0.7).cos()];
        let rot_u = |p: Point2| -> f64 {
            // ∂x u2 − ∂y u1
            -0.7 * (p.x * 0.7).sin() - 1.3 * (p.y * 1.3).cos()
        };
        let dofs = real_dofs(&mesh, u);
        for k in 0..mesh.cells.len() {
            let geom = element_geometry(&mesh, k);
            let discrete = element_rot(&geom, &dofs);
            let poly = mesh.cell_polygon(k);
            let mut mean = 0.0;
            for tri in crate::geometry::triangulate(&poly) {
                mean += crate::quad::integrate_triangle(&tri, crate::quad::triangle_rule(9), rot_u);
            }
            mean /= geom.area;
            assert!(
                (discrete.re - mean).abs() < 1e-8,
                "cell {k}: {} vs {mean}",
                discrete.re
            );
        }
    }
}
