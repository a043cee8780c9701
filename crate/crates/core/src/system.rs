//! Global assembly, essential tangential boundary conditions and the sparse
//! complex-symmetric direct solve.
//!
//! The assembled operator is Σ_K (A_K − M_K − S_K) over edge DoFs; the right
//! hand side tests the source against the piecewise-constant projection, so
//! per cell rhs_i = (∫_K f dx) · Π_K φ_i. Constrained boundary DoFs are
//! eliminated symmetrically. The matrix is indefinite for real β and complex
//! symmetric (not Hermitian) for σ > 0; both go to an unpivoting-agnostic
//! sparse LU.

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{Point2, RegionTag};
use crate::mesh::{DofMap, PolyMesh};
use crate::quad::{
    integrate_segment, integrate_triangle, integrate_triangle_adaptive, integrate_triangle_graded,
    triangle_rule, Grading, SingularLine,
};
use crate::vem::{
    element_geometry, element_matrices, CoefficientField, DofVector, ElementOperators, InterpSpec,
    StabScale, TangentialField, VemError,
};
use crate::Cplx;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("matrix is numerically singular near index {index}; β may hit a discrete eigenvalue — try a different ω or mesh")]
    Singular { index: usize },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("relative residual {residual:.3e} exceeds 1e-8")]
    ResidualTooLarge { residual: f64 },
    #[error(transparent)]
    Vem(#[from] VemError),
    #[error("non-finite source sample at ({x}, {y})")]
    NonFiniteSource { x: f64, y: f64 },
}

/// A vector field with a region-dependent branch, evaluated by cell tag so
/// that the mismatch strip never flips the branch inside one cell.
pub trait RegionVectorField: Sync {
    fn eval(&self, p: Point2, tag: RegionTag) -> [Cplx; 2];
}

impl<F: Fn(Point2, RegionTag) -> [Cplx; 2] + Sync> RegionVectorField for F {
    fn eval(&self, p: Point2, tag: RegionTag) -> [Cplx; 2] {
        self(p, tag)
    }
}

/// A scalar field with a region-dependent branch (e.g. rot of the exact
/// solution).
pub trait RegionScalarField: Sync {
    fn eval(&self, p: Point2, tag: RegionTag) -> Cplx;
}

impl<F: Fn(Point2, RegionTag) -> Cplx + Sync> RegionScalarField for F {
    fn eval(&self, p: Point2, tag: RegionTag) -> Cplx {
        self(p, tag)
    }
}

/// Quadrature controls for the right-hand side.
#[derive(Clone, Debug)]
pub struct SourceQuad {
    pub degree: usize,
    /// Graded integration toward these lines (singular manufactured data).
    pub singular_lines: Vec<SingularLine>,
    pub grading: Grading,
    /// Adaptive subdivision for sharply peaked sources, max depth 8.
    pub adaptive: bool,
}

impl Default for SourceQuad {
    fn default() -> Self {
        Self {
            degree: 7,
            singular_lines: Vec::new(),
            grading: Grading::default(),
            adaptive: false,
        }
    }
}

/// Complex sparse system over edge DoFs with essential constraints attached.
pub struct LinearSystem {
    pub n_dofs: usize,
    /// Scattered element contributions of the full (unconstrained) operator.
    pub triplets: Vec<(usize, usize, Cplx)>,
    pub rhs: Vec<Cplx>,
    /// Prescribed values of constrained DoFs (boundary edges).
    pub constrained: Vec<Option<Cplx>>,
}

/// Assembles the global system (no boundary conditions yet). Cells are
/// processed in parallel chunks and scattered serially in cell order, so the
/// result is deterministic and the transient element storage stays small.
pub fn assemble(
    mesh: &PolyMesh,
    coeffs: &CoefficientField,
    source: &dyn RegionVectorField,
    quad: &SourceQuad,
    stab: StabScale,
) -> Result<LinearSystem, SolveError> {
    let n_dofs = mesh.edges.len();
    let n_cells = mesh.cells.len();
    let mut triplets: Vec<(usize, usize, Cplx)> = Vec::new();
    let mut rhs = vec![Cplx::new(0.0, 0.0); n_dofs];
    const CHUNK: usize = 4096;
    for chunk_start in (0..n_cells).step_by(CHUNK) {
        let chunk_end = (chunk_start + CHUNK).min(n_cells);
        let elements: Vec<(ElementOperators, [Cplx; 2])> = (chunk_start..chunk_end)
            .into_par_iter()
            .map(|k| {
                let ops = element_matrices(element_geometry(mesh, k), coeffs, stab)?;
                let f_int = cell_source_integral(mesh, k, source, quad)?;
                Ok((ops, f_int))
            })
            .collect::<Result<_, SolveError>>()?;
        // The curl block goes in as its own triplet: on slivers its entries
        // dwarf mass and stabilization, and merging them per entry would
        // round the small parts away before the rank-one cancellation can act
        // (the factorization sums duplicates, the compensated refinement
        // keeps the parts separate).
        for (ops, f_int) in &elements {
            let n = ops.n();
            for i in 0..n {
                let gi = ops.geom.edge_ids[i];
                rhs[gi] += f_int[0] * ops.projector[0][i] + f_int[1] * ops.projector[1][i];
                for j in 0..n {
                    let gj = ops.geom.edge_ids[j];
                    triplets.push((gi, gj, Cplx::new(ops.curl_block[i * n + j], 0.0)));
                    triplets.push((
                        gi,
                        gj,
                        -ops.mass_block[i * n + j] - Cplx::new(ops.stab_block[i * n + j], 0.0),
                    ));
                }
            }
        }
    }

    Ok(LinearSystem {
        n_dofs,
        triplets,
        rhs,
        constrained: vec![None; n_dofs],
    })
}

/// ∫_K f dx with the tag-selected branch, graded near singular lines and
/// adaptively refined when requested.
fn cell_source_integral(
    mesh: &PolyMesh,
    cell: usize,
    source: &dyn RegionVectorField,
    quad: &SourceQuad,
) -> Result<[Cplx; 2], SolveError> {
    let tag = mesh.cells[cell].tag;
    let poly = mesh.cell_polygon(cell);
    let rule = triangle_rule(quad.degree);
    let f = |p: Point2| source.eval(p, tag);
    let mut total = [Cplx::new(0.0, 0.0); 2];
    for tri in crate::geometry::triangulate(&poly) {
        let part: [Cplx; 2] = if let Some(line) = quad
            .singular_lines
            .iter()
            .find(|l| tri.iter().any(|&v| l.level(v).abs() <= 1e-12 * mesh.h_max))
        {
            integrate_triangle_graded(&tri, rule, line, quad.grading, f)
        } else if quad.adaptive {
            integrate_triangle_adaptive(&tri, rule, 8, 1e-9, 1e-14, &f)
        } else {
            integrate_triangle(&tri, rule, f)
        };
        if !part[0].is_finite() || !part[1].is_finite() {
            let c = mesh.cells[cell].centroid;
            return Err(SolveError::NonFiniteSource { x: c.x, y: c.y });
        }
        total[0] += part[0];
        total[1] += part[1];
    }
    Ok(total)
}

/// DoF value of a tangential boundary field on one edge (canonical a→b).
pub fn edge_dof_value(
    mesh: &PolyMesh,
    edge: usize,
    field: &dyn TangentialField,
    spec: &InterpSpec,
) -> Cplx {
    let e = &mesh.edges[edge];
    let a = mesh.vertices[e.a];
    let b = mesh.vertices[e.b];
    let t = (b - a) * (1.0 / e.length);
    let scale = mesh.h_max;
    let on_line = |p: Point2| {
        spec.singular_lines
            .iter()
            .any(|l| l.level(p).abs() <= 1e-12 * scale)
    };
    let (sing_a, sing_b) = if on_line(a) && on_line(b) {
        (false, false)
    } else {
        (on_line(a), on_line(b))
    };
    integrate_segment(a, b, spec.gauss_points, sing_a, sing_b, spec.grading, |p| {
        field.tangential(p, t)
    })
}

/// Imposes essential tangential data on all boundary edges: `None` means the
/// homogeneous condition. Constrained rows/columns are eliminated
/// symmetrically at solve time.
pub fn set_tangential_bc(
    sys: &mut LinearSystem,
    mesh: &PolyMesh,
    dofs: &DofMap,
    g: Option<&dyn TangentialField>,
    spec: &InterpSpec,
) {
    for e in 0..mesh.edges.len() {
        if !dofs.boundary_edge[e] {
            continue;
        }
        let value = match g {
            None => Cplx::new(0.0, 0.0),
            Some(field) => edge_dof_value(mesh, e, field, spec),
        };
        sys.constrained[e] = Some(value);
    }
}

/// Direct-solve report, solution expanded back to the full DoF set.
pub struct SolveReport {
    pub solution: DofVector,
    pub residual: f64,
    pub n_free: usize,
    pub nnz: usize,
    pub factor_seconds: f64,
    pub solve_seconds: f64,
}

/// Factorizes and solves the constrained system, consuming it so the raw
/// triplets are freed before the factorization peaks.
pub fn solve(mut sys: LinearSystem) -> Result<SolveReport, SolveError> {
    let n = sys.n_dofs;
    let mut free_index = vec![usize::MAX; n];
    let mut n_free = 0usize;
    for i in 0..n {
        if sys.constrained[i].is_none() {
            free_index[i] = n_free;
            n_free += 1;
        }
    }

    // reduce: eliminate constrained columns into the rhs
    let mut rhs: Vec<Cplx> = Vec::with_capacity(n_free);
    for i in 0..n {
        if sys.constrained[i].is_none() {
            rhs.push(sys.rhs[i]);
        }
    }
    let triplets = std::mem::take(&mut sys.triplets);
    let mut reduced: Vec<(usize, usize, Cplx)> = Vec::with_capacity(triplets.len());
    for (i, j, v) in triplets {
        match (sys.constrained[i], sys.constrained[j]) {
            (None, None) => reduced.push((free_index[i], free_index[j], v)),
            (None, Some(gj)) => rhs[free_index[i]] -= v * gj,
            _ => {}
        }
    }

    let (x, residual, nnz, factor_seconds, solve_seconds) =
        solve_complex_sparse_owned(n_free, reduced, &rhs)?;
    if residual > 1e-8 {
        return Err(SolveError::ResidualTooLarge { residual });
    }

    let mut full = vec![Cplx::new(0.0, 0.0); n];
    for i in 0..n {
        full[i] = match sys.constrained[i] {
            Some(g) => g,
            None => x[free_index[i]],
        };
    }
    Ok(SolveReport {
        solution: DofVector(full),
        residual,
        n_free,
        nnz,
        factor_seconds,
        solve_seconds,
    })
}

/// Sparse complex LU solve of a triplet system; returns the solution, the
/// relative residual, the matrix nnz and wall times.
pub fn solve_complex_sparse(
    n: usize,
    triplets: &[(usize, usize, Cplx)],
    rhs: &[Cplx],
) -> Result<(Vec<Cplx>, f64, usize, f64, f64), SolveError> {
    solve_complex_sparse_owned(n, triplets.to_vec(), rhs)
}

/// As [`solve_complex_sparse`] but consuming the triplets: they are scaled in
/// place and reused for the refinement residuals, keeping peak memory at one
/// triplet copy plus the factorization.
pub fn solve_complex_sparse_owned(
    n: usize,
    mut triplets: Vec<(usize, usize, Cplx)>,
    rhs: &[Cplx],
) -> Result<(Vec<Cplx>, f64, usize, f64, f64), SolveError> {
    use faer::prelude::*;
    use faer::sparse::{SparseColMat, Triplet};

    if n == 0 {
        return Ok((Vec::new(), 0.0, 0, 0.0, 0.0));
    }
    // Symmetric diagonal equilibration: slivers make entries span many orders
    // of magnitude, which otherwise costs accuracy in the factorization.
    let mut row_max = vec![0.0f64; n];
    for &(i, _, v) in &triplets {
        row_max[i] = row_max[i].max(v.norm());
    }
    let d: Vec<f64> = row_max
        .iter()
        .map(|&r| if r > 0.0 { 1.0 / r.sqrt() } else { 1.0 })
        .collect();
    for (i, j, v) in triplets.iter_mut() {
        *v *= d[*i] * d[*j];
    }
    let scaled = triplets;
    let rhs: Vec<Cplx> = rhs.iter().zip(&d).map(|(&b, &di)| b * di).collect();
    let rhs = &rhs[..];
    let a = {
        let faer_triplets: Vec<Triplet<usize, usize, faer::c64>> = scaled
            .iter()
            .map(|&(i, j, v)| Triplet::new(i, j, v))
            .collect();
        SparseColMat::try_new_from_triplets(n, n, &faer_triplets)
            .map_err(|e| SolveError::Factorization(format!("{e:?}")))?
    };
    let nnz = a.compute_nnz();

    let t0 = Instant::now();
    let lu = a.sp_lu().map_err(|e| match e {
        faer::sparse::linalg::LuError::SymbolicSingular { index } => {
            SolveError::Singular { index }
        }
        other => SolveError::Factorization(format!("{other:?}")),
    })?;
    let factor_seconds = t0.elapsed().as_secs_f64();

    let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
    let t0 = Instant::now();
    let mut x = lu.solve(&b);
    // Iterative refinement with compensated residuals: thin slivers push the
    // condition number to ~1e8, and a plain f64 residual would stall the
    // forward error at κ·u. The residual is accumulated in double-double.
    let b2: f64 = rhs.iter().map(|z| z.norm_sqr()).sum();
    let mut residual = f64::INFINITY;
    for _ in 0..4 {
        let xs: Vec<Cplx> = (0..n).map(|i| x[(i, 0)]).collect();
        let r = compensated_residual(n, &scaled, rhs, &xs);
        let err2: f64 = r.iter().map(|z| z.norm_sqr()).sum();
        residual = if b2 > 0.0 { (err2 / b2).sqrt() } else { 0.0 };
        if residual <= 1e-15 {
            break;
        }
        let rm = Mat::from_fn(n, 1, |i, _| r[i]);
        let dx = lu.solve(&rm);
        for i in 0..n {
            x[(i, 0)] += dx[(i, 0)];
        }
    }
    let solve_seconds = t0.elapsed().as_secs_f64();
    // undo the equilibration: x = D z
    let solution: Vec<Cplx> = (0..n).map(|i| x[(i, 0)] * d[i]).collect();
    if solution.iter().any(|z| !z.is_finite()) {
        return Err(SolveError::Singular { index: 0 });
    }
    Ok((solution, residual, nnz, factor_seconds, solve_seconds))
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Double-double accumulator for the compensated residual.
#[derive(Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn new(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    fn add(&mut self, v: f64) {
        let (s, e) = two_sum(self.hi, v);
        self.hi = s;
        self.lo += e;
    }

    /// Adds a·b with its exact rounding error (needs FMA).
    fn add_prod(&mut self, a: f64, b: f64) {
        let p = a * b;
        let e = a.mul_add(b, -p);
        self.add(p);
        self.lo += e;
    }

    fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// r = b − A x accumulated in double-double precision.
fn compensated_residual(
    n: usize,
    triplets: &[(usize, usize, Cplx)],
    rhs: &[Cplx],
    x: &[Cplx],
) -> Vec<Cplx> {
    let mut re: Vec<Dd> = rhs.iter().map(|z| Dd::new(z.re)).collect();
    let mut im: Vec<Dd> = rhs.iter().map(|z| Dd::new(z.im)).collect();
    debug_assert_eq!(re.len(), n);
    for &(i, j, v) in triplets {
        let xj = x[j];
        // subtract (v.re + i v.im)(xj.re + i xj.im)
        re[i].add_prod(-v.re, xj.re);
        re[i].add_prod(v.im, xj.im);
        im[i].add_prod(-v.re, xj.im);
        im[i].add_prod(-v.im, xj.re);
    }
    (0..n)
        .map(|i| Cplx::new(re[i].value(), im[i].value()))
        .collect()
}

/// Assembles the global b_h matrix Σ_K (M_K + S_K) over all edge DoFs.
pub fn assemble_b_matrix(
    mesh: &PolyMesh,
    coeffs: &CoefficientField,
    stab: StabScale,
) -> Result<Vec<(usize, usize, Cplx)>, SolveError> {
    let elements: Vec<ElementOperators> = (0..mesh.cells.len())
        .into_par_iter()
        .map(|k| element_matrices(element_geometry(mesh, k), coeffs, stab))
        .collect::<Result<_, _>>()?;
    let mut triplets = Vec::new();
    for ops in &elements {
        let n = ops.n();
        for i in 0..n {
            for j in 0..n {
                triplets.push((
                    ops.geom.edge_ids[i],
                    ops.geom.edge_ids[j],
                    ops.b_entry(i, j),
                ));
            }
        }
    }
    Ok(triplets)
}

/// Writes the unconstrained operator in Matrix Market coordinate format.
pub fn write_matrix_market(
    path: &std::path::Path,
    n: usize,
    triplets: &[(usize, usize, Cplx)],
) -> std::io::Result<()> {
    use std::collections::HashMap;
    use std::io::Write;
    let mut merged: HashMap<(usize, usize), Cplx> = HashMap::new();
    for &(i, j, v) in triplets {
        *merged.entry((i, j)).or_insert(Cplx::new(0.0, 0.0)) += v;
    }
    let mut entries: Vec<((usize, usize), Cplx)> = merged.into_iter().collect();
    entries.sort_by_key(|&((i, j), _)| (j, i));
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "%%MatrixMarket matrix coordinate complex general")?;
    writeln!(out, "{n} {n} {}", entries.len())?;
    for ((i, j), v) in entries {
        writeln!(out, "{} {} {:.16e} {:.16e}", i + 1, j + 1, v.re, v.im)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{InterfaceSpec, Primitive, RegionRule, SignReq};
    use crate::mesh::{build_cut_mesh, dof_map, GridSpec};
    use crate::vem::interpolate_vector_field;

    fn zero_source() -> impl RegionVectorField {
        |_p: Point2, _t: RegionTag| [Cplx::new(0.0, 0.0); 2]
    }

    fn circle_spec() -> InterfaceSpec {
        InterfaceSpec::new(
            vec![Primitive::Circle {
                center: Point2::new(0.0, 0.0),
                radius: std::f64::consts::PI / 5.0,
            }],
            RegionRule::minus_inside(),
        )
        .unwrap()
    }

    fn line_spec() -> InterfaceSpec {
        InterfaceSpec::new(
            vec![Primitive::Line {
                point: Point2::new(1e-7, 0.0),
                normal: Point2::new(1.0, 0.0),
            }],
            RegionRule {
                minus_patterns: vec![vec![SignReq::Pos]],
            },
        )
        .unwrap()
    }

    #[test]
    fn zero_source_gives_zero_rhs() {
        let mesh = build_cut_mesh(&GridSpec::square(-1.0, 1.0, 4), &circle_spec(), 1e-9).unwrap();
        let coeffs = CoefficientField::real(1.0, 10.0, 1.0, 10.0);
        let sys = assemble(
            &mesh,
            &coeffs,
            &zero_source(),
            &SourceQuad::default(),
            StabScale::LocalDiameter,
        )
        .unwrap();
        assert!(sys.rhs.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn matrix_symmetry_real_and_complex() {
        let mesh = build_cut_mesh(&GridSpec::square(-1.0, 1.0, 4), &circle_spec(), 1e-9).unwrap();
        let dense = |coeffs: &CoefficientField| -> Vec<Cplx> {
            let sys = assemble(
                &mesh,
                coeffs,
                &zero_source(),
                &SourceQuad::default(),
                StabScale::LocalDiameter,
            )
            .unwrap();
            let n = sys.n_dofs;
            let mut a = vec![Cplx::new(0.0, 0.0); n * n];
            for &(i, j, v) in &sys.triplets {
                a[i * n + j] += v;
            }
            a
        };
        // σ = 0: real symmetric
        let a = dense(&CoefficientField::real(1.0, 10.0, 1.0, 10.0));
        let n = (a.len() as f64).sqrt() as usize;
        for i in 0..n {
            for j in 0..n {
                assert!(a[i * n + j].im == 0.0);
                assert!((a[i * n + j] - a[j * n + i]).norm() < 1e-12);
            }
        }
        // σ > 0 in one region: complex symmetric, not Hermitian
        let coeffs = CoefficientField::from_physics(5.0, [0.5, 0.5], [1.0, 0.0], [1.0, 1.0]);
        let a = dense(&coeffs);
        let mut hermitian = true;
        for i in 0..n {
            for j in 0..n {
                assert!((a[i * n + j] - a[j * n + i]).norm() < 1e-12, "A != A^T");
                if (a[i * n + j] - a[j * n + i].conj()).norm() > 1e-12 {
                    hermitian = false;
                }
            }
        }
        assert!(!hermitian);
    }

    #[test]
    fn rhs_matches_bruteforce_on_single_cell() {
        let mesh =
            build_cut_mesh(&GridSpec::square(0.0, 1.0, 1), &InterfaceSpec::none(), 1e-9).unwrap();
        let coeffs = CoefficientField::real(1.0, 1.0, 1.0, 1.0);
        let f = |_p: Point2, _t: RegionTag| [Cplx::new(0.0, 0.0), Cplx::new(1.0, 0.0)];
        let sys = assemble(
            &mesh,
            &coeffs,
            &f,
            &SourceQuad::default(),
            StabScale::LocalDiameter,
        )
        .unwrap();
        // brute force: (f, Π_K φ_i) = |K| (0,1)·P_i since f is constant
        let ops = element_matrices(
            element_geometry(&mesh, 0),
            &coeffs,
            StabScale::LocalDiameter,
        )
        .unwrap();
        for i in 0..ops.n() {
            let expect = ops.projector[1][i]; // |K| = 1
            let got = sys.rhs[ops.geom.edge_ids[i]];
            assert!((got.re - expect).abs() < 1e-13 && got.im.abs() < 1e-15);
        }
    }

    #[test]
    fn trivial_solve() {
        let (x, res, _, _, _) = solve_complex_sparse(
            1,
            &[(0usize, 0usize, Cplx::new(2.0, 0.0))],
            &[Cplx::new(4.0, 0.0)],
        )
        .unwrap();
        assert!((x[0] - Cplx::new(2.0, 0.0)).norm() < 1e-15);
        assert!(res < 1e-15);
    }

    fn patch_test(spec: &InterfaceSpec, coeffs: CoefficientField, c: [Cplx; 2]) {
        let mesh = build_cut_mesh(&GridSpec::square(-1.0, 1.0, 32), spec, 1e-9).unwrap();
        let dofs = dof_map(&mesh);
        // f = −β c per region
        let source = move |_p: Point2, tag: RegionTag| {
            let b = coeffs.beta(tag);
            [-b * c[0], -b * c[1]]
        };
        let mut sys = assemble(
            &mesh,
            &coeffs,
            &source,
            &SourceQuad::default(),
            StabScale::LocalDiameter,
        )
        .unwrap();
        let g = move |_p: Point2, t: Point2| c[0] * t.x + c[1] * t.y;
        set_tangential_bc(&mut sys, &mesh, &dofs, Some(&g), &InterpSpec::default());
        let report = solve(sys).unwrap();
        // the exact interpolant of the constant field
        let exact =
            interpolate_vector_field(move |_p| c, &mesh, &InterpSpec::default()).unwrap();
        let num: f64 = report
            .solution
            .0
            .iter()
            .zip(&exact.0)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den: f64 = exact.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(num / den < 1e-10, "patch test error {}", num / den);
    }

    #[test]
    fn patch_test_circle_real_beta() {
        patch_test(
            &circle_spec(),
            CoefficientField::real(1.0, 10.0, 1.0, 10.0),
            [Cplx::new(1.0, 0.0), Cplx::new(-2.0, 0.0)],
        );
    }

    #[test]
    fn patch_test_line_complex_beta() {
        patch_test(
            &line_spec(),
            CoefficientField::from_physics(5.0, [0.5, 0.5], [1.0, 0.1], [1.0, 1.0]),
            [Cplx::new(0.7, 0.3), Cplx::new(-1.1, 0.9)],
        );
    }

    #[test]
    fn elimination_preserves_symmetry() {
        let mesh = build_cut_mesh(&GridSpec::square(-1.0, 1.0, 4), &circle_spec(), 1e-9).unwrap();
        let dofs = dof_map(&mesh);
        let coeffs = CoefficientField::real(1.0, 10.0, 1.0, 10.0);
        let mut sys = assemble(
            &mesh,
            &coeffs,
            &zero_source(),
            &SourceQuad::default(),
            StabScale::LocalDiameter,
        )
        .unwrap();
        set_tangential_bc(&mut sys, &mesh, &dofs, None, &InterpSpec::default());
        // reduced matrix is symmetric
        let mut free_index = vec![usize::MAX; sys.n_dofs];
        let mut n_free = 0;
        for i in 0..sys.n_dofs {
            if sys.constrained[i].is_none() {
                free_index[i] = n_free;
                n_free += 1;
            }
        }
        let mut dense = vec![Cplx::new(0.0, 0.0); n_free * n_free];
        for &(i, j, v) in &sys.triplets {
            if sys.constrained[i].is_none() && sys.constrained[j].is_none() {
                dense[free_index[i] * n_free + free_index[j]] += v;
            }
        }
        for i in 0..n_free {
            for j in 0..n_free {
                assert!((dense[i * n_free + j] - dense[j * n_free + i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn solution_invariant_under_permutation() {
        let mesh = build_cut_mesh(&GridSpec::square(-1.0, 1.0, 4), &circle_spec(), 1e-9).unwrap();
        let dofs = dof_map(&mesh);
        let coeffs = CoefficientField::real(1.0, 10.0, 1.0, 10.0);
        let source = |p: Point2, _t: RegionTag| {
            [
                Cplx::new((p.x * 2.0).sin(), 0.0),
                Cplx::new((p.y * 3.0).cos(), 0.0),
            ]
        };
        let mut sys = assemble(
            &mesh,
            &coeffs,
            &source,
            &SourceQuad::default(),
            StabScale::LocalDiameter,
        )
        .unwrap();
        set_tangential_bc(&mut sys, &mesh, &dofs, None, &InterpSpec::default());

        // reduce by hand, then solve the original and a permuted copy
        let mut free_index = vec![usize::MAX; sys.n_dofs];
        let mut n_free = 0;
        for i in 0..sys.n_dofs {
            if sys.constrained[i].is_none() {
                free_index[i] = n_free;
                n_free += 1;
            }
        }
        let mut trips = Vec::new();
        let mut rhs = vec![Cplx::new(0.0, 0.0); n_free];
        for i in 0..sys.n_dofs {
            if sys.constrained[i].is_none() {
                rhs[free_index[i]] = sys.rhs[i];
            }
        }
        for &(i, j, v) in &sys.triplets {
            if sys.constrained[i].is_none() && sys.constrained[j].is_none() {
                trips.push((free_index[i], free_index[j], v));
            }
        }
        let (x, _, _, _, _) = solve_complex_sparse(n_free, &trips, &rhs).unwrap();

        // permutation: reverse order
        let perm = |i: usize| n_free - 1 - i;
        let ptrips: Vec<(usize, usize, Cplx)> =
            trips.iter().map(|&(i, j, v)| (perm(i), perm(j), v)).collect();
        let prhs: Vec<Cplx> = (0..n_free).map(|i| rhs[perm(i)]).collect();
        let (px, _, _, _, _) = solve_complex_sparse(n_free, &ptrips, &prhs).unwrap();
        for i in 0..n_free {
            assert!((x[i] - px[perm(i)]).norm() < 1e-9 * (1.0 + x[i].norm()));
        }
    }

    #[test]
    fn matrix_market_dump() {
        let mesh =
            build_cut_mesh(&GridSpec::square(0.0, 1.0, 1), &InterfaceSpec::none(), 1e-9).unwrap();
        let coeffs = CoefficientField::real(1.0, 1.0, 1.0, 1.0);
        let sys = assemble(
            &mesh,
            &coeffs,
            &zero_source(),
            &SourceQuad::default(),
            StabScale::LocalDiameter,
        )
        .unwrap();
        let path = std::env::temp_dir().join("rotvem_mm_test.mtx");
        write_matrix_market(&path, sys.n_dofs, &sys.triplets).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("%%MatrixMarket"));
        let header: Vec<usize> = lines
            .next()
            .unwrap()
            .split_whitespace()
            .map(|t| t.parse().unwrap())
            .collect();
        assert_eq!(header[0], 4);
        assert_eq!(header[1], 4);
        assert_eq!(text.lines().count(), 2 + header[2]);
    }

    #[test]
    fn nodal_b_form_is_positive_definite() {
        // b_h(∇q, ∇s) nodal matrix is SPD for real β on a 16×16 cut mesh
        let mesh = build_cut_mesh(&GridSpec::square(-1.0, 1.0, 16), &circle_spec(), 1e-9).unwrap();
        let dofs = dof_map(&mesh);
        let coeffs = CoefficientField::real(1.0, 10.0, 1.0, 10.0);
        let b = assemble_b_matrix(&mesh, &coeffs, StabScale::LocalDiameter).unwrap();
        // dense K = Gᵀ B G on interior vertices
        let nv = mesh.vertices.len();
        let interior: Vec<usize> = (0..nv).filter(|&v| !dofs.boundary_vertex[v]).collect();
        let vidx: std::collections::HashMap<usize, usize> =
            interior.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let m = interior.len();
        let mut k = vec![0.0f64; m * m];
        for &(ei, ej, v) in &b {
            let (a1, b1) = (mesh.edges[ei].a, mesh.edges[ei].b);
            let (a2, b2) = (mesh.edges[ej].a, mesh.edges[ej].b);
            // (G q)_e = q_b − q_a
            for (r, sr) in [(b1, 1.0), (a1, -1.0)] {
                for (c, sc) in [(b2, 1.0), (a2, -1.0)] {
                    if let (Some(&ri), Some(&ci)) = (vidx.get(&r), vidx.get(&c)) {
                        k[ri * m + ci] += sr * sc * v.re;
                    }
                }
            }
        }
        let mat = faer::Mat::from_fn(m, m, |i, j| k[i * m + j]);
        let eigs: Vec<f64> = mat.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.0, "smallest eigenvalue {min}");
    }
}
