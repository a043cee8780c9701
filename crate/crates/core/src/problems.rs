//! Built-in benchmark problems.
//!
//! * `Circle` — circular interface of radius π/5 in (−1,1)², piecewise
//!   polynomial exact solution vanishing on the interface, α and β jumping
//!   by a factor 10.
//! * `LineSingular` — straight interface x = ε with ε = 1e-7, exact solution
//!   carrying an |x−ε|^s factor with s ∈ (−1/2, 1); produces deliberately
//!   thin sliver cells and limited regularity.
//! * `DoubleCircle` — two overlapping circles (a geometric singularity at
//!   their crossing), conducting media, near-line Gaussian source; no closed
//!   form, studied by self-convergence.
//! * `Layers` — two or five thin horizontal conducting layers, same source.
//!
//! Sources for the manufactured problems are supplied in closed form as
//! rot(α rot u) − β u. For fields of the shape u = φ(x²+y²)·(y, x) one has
//! rot u = 2 φ'·(x²−y²) and
//!
//! ```text
//! rot(α rot u) = ( 4αy [φ''(x²−y²) − φ'], −4αx [φ''(x²−y²) + φ'] ),
//! ```
//!
//! and for u = (|x−ε|^s + cos(x+y), sin(x+y)) the singular part is rot-free,
//! leaving rot u = cos(x+y) + sin(x+y) and
//! rot(α rot u) = (cos − sin, sin − cos)(x+y).

use crate::geometry::{InterfaceSpec, Point2, Primitive, RegionRule, RegionTag, SignReq};
use crate::mesh::{GridSpec, MeshError};
use crate::quad::SingularLine;
use crate::system::{RegionScalarField, RegionVectorField};
use crate::vem::{CoefficientField, TangentialField};
use crate::Cplx;

/// The four built-in experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExampleId {
    Circle,
    LineSingular,
    DoubleCircle,
    Layers,
}

impl ExampleId {
    pub fn name(&self) -> &'static str {
        match self {
            ExampleId::Circle => "circle",
            ExampleId::LineSingular => "line_singular",
            ExampleId::DoubleCircle => "double_circle",
            ExampleId::Layers => "layers",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "circle" => Some(ExampleId::Circle),
            "line_singular" => Some(ExampleId::LineSingular),
            "double_circle" => Some(ExampleId::DoubleCircle),
            "layers" => Some(ExampleId::Layers),
            _ => None,
        }
    }
}

/// Physical and geometric parameters of a problem instance; entries are
/// [minus, plus] by region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemParams {
    pub alpha: [f64; 2],
    pub eps_perm: [f64; 2],
    pub sigma: [f64; 2],
    pub omega: f64,
    /// Regularity exponent of the singular-line solution.
    pub s_exponent: f64,
    /// Offset of the straight interface from the gridline at 0.
    pub eps_geom: f64,
    /// Thin-layer count: 2 or 5.
    pub n_layers: usize,
}

impl ProblemParams {
    pub fn defaults(example: ExampleId) -> Self {
        match example {
            // β = ω² ε = (1, 10) with ω = 1, σ = 0
            ExampleId::Circle => Self {
                alpha: [1.0, 10.0],
                eps_perm: [1.0, 10.0],
                sigma: [0.0, 0.0],
                omega: 1.0,
                s_exponent: 0.2,
                eps_geom: 1e-7,
                n_layers: 2,
            },
            // β = (1, 2) with ω = 1, σ = 0
            ExampleId::LineSingular => Self {
                alpha: [1.0, 1.0],
                eps_perm: [1.0, 2.0],
                sigma: [0.0, 0.0],
                omega: 1.0,
                s_exponent: 0.2,
                eps_geom: 1e-7,
                n_layers: 2,
            },
            ExampleId::DoubleCircle => Self {
                alpha: [1.0, 1.0],
                eps_perm: [0.5, 0.5],
                sigma: [1.0, 0.1],
                omega: 5.0,
                s_exponent: 0.2,
                eps_geom: 1e-7,
                n_layers: 2,
            },
            ExampleId::Layers => Self {
                alpha: [1.0, 1.0],
                eps_perm: [0.01, 0.01],
                sigma: [1.0, 0.1],
                omega: 100.0,
                s_exponent: 0.2,
                eps_geom: 1e-7,
                n_layers: 2,
            },
        }
    }
}

/// Closed-form data of a manufactured solution.
pub struct ProblemExact {
    pub field: Box<dyn RegionVectorField + Send>,
    pub rot: Box<dyn RegionScalarField + Send>,
    /// Tangential trace with analytic cancellation of singular components
    /// against zero tangent entries.
    pub trace: Box<dyn TangentialField + Send + Sync>,
}

/// A fully specified problem instance.
pub struct Problem {
    pub id: ExampleId,
    pub params: ProblemParams,
    pub domain: (f64, f64, f64, f64),
    pub interface: InterfaceSpec,
    pub coeffs: CoefficientField,
    pub source: Box<dyn RegionVectorField + Send>,
    pub exact: Option<ProblemExact>,
    /// Lines toward which edge and volume quadrature must be graded.
    pub singular_lines: Vec<SingularLine>,
    /// The near-line Gaussian source needs adaptive volume quadrature.
    pub adaptive_source: bool,
    /// Boundary data: the exact trace when available, else homogeneous.
    pub inhomogeneous_bc: bool,
}

impl Problem {
    pub fn grid(&self, level: u32) -> Result<GridSpec, MeshError> {
        let (x0, x1, y0, y1) = self.domain;
        GridSpec::dyadic(x0, x1, y0, y1, level)
    }
}

pub fn build_problem(id: ExampleId, params: ProblemParams) -> Problem {
    match id {
        ExampleId::Circle => circle_problem(params),
        ExampleId::LineSingular => line_singular_problem(params),
        ExampleId::DoubleCircle => double_circle_problem(params),
        ExampleId::Layers => layers_problem(params),
    }
}

const CIRCLE_R0: f64 = std::f64::consts::PI / 5.0;
const CIRCLE_R1: f64 = 1.0;
const CIRCLE_K1: f64 = 20.0;

/// φ(s) and its first two derivatives for the circle solution
/// u = φ(x²+y²)·(y, x).
fn circle_phi(s: f64, tag: RegionTag) -> (f64, f64, f64) {
    let r0sq = CIRCLE_R0 * CIRCLE_R0;
    let r1sq = CIRCLE_R1 * CIRCLE_R1;
    let k0 = CIRCLE_K1 * (r1sq - r0sq);
    match tag {
        RegionTag::Minus => (-k0 * (r0sq - s), k0, 0.0),
        RegionTag::Plus => {
            let c = CIRCLE_K1 / 10.0;
            (
                -c * (r0sq - s) * (r1sq - s),
                c * (r0sq + r1sq - 2.0 * s),
                -2.0 * c,
            )
        }
    }
}

fn circle_problem(params: ProblemParams) -> Problem {
    let interface = InterfaceSpec::new(
        vec![Primitive::Circle {
            center: Point2::new(0.0, 0.0),
            radius: CIRCLE_R0,
        }],
        RegionRule::minus_inside(),
    )
    .expect("valid circle interface");
    let coeffs = CoefficientField::from_physics(
        params.omega,
        params.eps_perm,
        params.sigma,
        params.alpha,
    );
    let alpha = params.alpha;
    let field = move |p: Point2, tag: RegionTag| -> [Cplx; 2] {
        let s = p.x * p.x + p.y * p.y;
        let (phi, _, _) = circle_phi(s, tag);
        [Cplx::new(phi * p.y, 0.0), Cplx::new(phi * p.x, 0.0)]
    };
    let rot = move |p: Point2, tag: RegionTag| -> Cplx {
        let s = p.x * p.x + p.y * p.y;
        let (_, dphi, _) = circle_phi(s, tag);
        Cplx::new(2.0 * dphi * (p.x * p.x - p.y * p.y), 0.0)
    };
    let source = move |p: Point2, tag: RegionTag| -> [Cplx; 2] {
        let s = p.x * p.x + p.y * p.y;
        let (phi, dphi, ddphi) = circle_phi(s, tag);
        let a = match tag {
            RegionTag::Minus => alpha[0],
            RegionTag::Plus => alpha[1],
        };
        let beta = coeffs.beta(tag);
        let q = p.x * p.x - p.y * p.y;
        let fx = Cplx::new(4.0 * a * p.y * (ddphi * q - dphi), 0.0) - beta * (phi * p.y);
        let fy = Cplx::new(-4.0 * a * p.x * (ddphi * q + dphi), 0.0) - beta * (phi * p.x);
        [fx, fy]
    };
    // ∂Ω lies entirely in the plus region
    let trace = move |p: Point2, t: Point2| -> Cplx {
        let v = field(p, RegionTag::Plus);
        v[0] * t.x + v[1] * t.y
    };
    Problem {
        id: ExampleId::Circle,
        params,
        domain: (-1.0, 1.0, -1.0, 1.0),
        interface,
        coeffs,
        source: Box::new(source),
        exact: Some(ProblemExact {
            field: Box::new(field),
            rot: Box::new(rot),
            trace: Box::new(trace),
        }),
        singular_lines: Vec::new(),
        adaptive_source: false,
        inhomogeneous_bc: true,
    }
}

fn line_singular_problem(params: ProblemParams) -> Problem {
    let eps = params.eps_geom;
    let s = params.s_exponent;
    let interface = InterfaceSpec::new(
        vec![Primitive::Line {
            point: Point2::new(eps, 0.0),
            normal: Point2::new(1.0, 0.0),
        }],
        // the minus region is x > ε
        RegionRule {
            minus_patterns: vec![vec![SignReq::Pos]],
        },
    )
    .expect("valid line interface");
    let coeffs = CoefficientField::from_physics(
        params.omega,
        params.eps_perm,
        params.sigma,
        params.alpha,
    );
    let singular = move |x: f64| (x - eps).abs().powf(s);
    let field = move |p: Point2, _tag: RegionTag| -> [Cplx; 2] {
        [
            Cplx::new(singular(p.x) + (p.x + p.y).cos(), 0.0),
            Cplx::new((p.x + p.y).sin(), 0.0),
        ]
    };
    let rot = move |p: Point2, _tag: RegionTag| -> Cplx {
        Cplx::new((p.x + p.y).cos() + (p.x + p.y).sin(), 0.0)
    };
    let alpha = params.alpha[0];
    let source = move |p: Point2, tag: RegionTag| -> [Cplx; 2] {
        let beta = coeffs.beta(tag);
        let (sn, cs) = (p.x + p.y).sin_cos();
        let fx = Cplx::new(alpha * (cs - sn), 0.0) - beta * (singular(p.x) + cs);
        let fy = Cplx::new(alpha * (sn - cs), 0.0) - beta * sn;
        [fx, fy]
    };
    // tangential trace: cancel the singular x-component against zero tangent
    // entries so edges on the interface line never sample |0|^s
    let trace = move |p: Point2, t: Point2| -> Cplx {
        let u1 = if t.x == 0.0 {
            0.0
        } else {
            singular(p.x) + (p.x + p.y).cos()
        };
        Cplx::new(u1 * t.x + (p.x + p.y).sin() * t.y, 0.0)
    };
    let line = SingularLine {
        point: Point2::new(eps, 0.0),
        normal: Point2::new(1.0, 0.0),
    };
    Problem {
        id: ExampleId::LineSingular,
        params,
        domain: (-1.0, 1.0, -1.0, 1.0),
        interface,
        coeffs,
        source: Box::new(source),
        exact: Some(ProblemExact {
            field: Box::new(field),
            rot: Box::new(rot),
            trace: Box::new(trace),
        }),
        singular_lines: vec![line],
        adaptive_source: false,
        inhomogeneous_bc: true,
    }
}

/// The near-line source −iω (0,1) exp(−(x−3)²/ε²) shared by the self-reference
/// problems; ε is the permittivity parameter.
fn gaussian_source(omega: f64, eps: f64) -> impl Fn(Point2, RegionTag) -> [Cplx; 2] + Sync {
    move |p: Point2, _tag: RegionTag| {
        let g = (-(p.x - 3.0) * (p.x - 3.0) / (eps * eps)).exp();
        [Cplx::new(0.0, 0.0), Cplx::new(0.0, -omega * g)]
    }
}

fn double_circle_problem(params: ProblemParams) -> Problem {
    let interface = InterfaceSpec::new(
        vec![
            Primitive::Circle {
                center: Point2::new(1.25, 0.0),
                radius: 0.35,
            },
            Primitive::Circle {
                center: Point2::new(1.75, 0.0),
                radius: 0.35,
            },
        ],
        RegionRule::minus_inside_any(2),
    )
    .expect("valid double-circle interface");
    let coeffs = CoefficientField::from_physics(
        params.omega,
        params.eps_perm,
        params.sigma,
        params.alpha,
    );
    Problem {
        id: ExampleId::DoubleCircle,
        params,
        domain: (0.0, 4.0, 0.0, 1.0),
        interface,
        coeffs,
        source: Box::new(gaussian_source(params.omega, params.eps_perm[0])),
        exact: None,
        singular_lines: Vec::new(),
        adaptive_source: true,
        inhomogeneous_bc: false,
    }
}

/// Band boundaries of the thin-layer geometry.
pub fn layer_bands(n_layers: usize) -> Vec<(f64, f64)> {
    match n_layers {
        5 => vec![
            (0.09, 0.11),
            (0.24, 0.26),
            (0.49, 0.51),
            (0.74, 0.76),
            (0.89, 0.91),
        ],
        _ => vec![(0.24, 0.26), (0.74, 0.76)],
    }
}

fn layers_problem(params: ProblemParams) -> Problem {
    let bands = layer_bands(params.n_layers);
    let mut primitives = Vec::with_capacity(2 * bands.len());
    let mut patterns = Vec::with_capacity(bands.len());
    for (b, &(lo, hi)) in bands.iter().enumerate() {
        primitives.push(Primitive::Line {
            point: Point2::new(0.0, lo),
            normal: Point2::new(0.0, 1.0),
        });
        primitives.push(Primitive::Line {
            point: Point2::new(0.0, hi),
            normal: Point2::new(0.0, 1.0),
        });
        // inside band b: above its lower line, below its upper line
        let mut pattern = vec![SignReq::Any; 2 * bands.len()];
        pattern[2 * b] = SignReq::Pos;
        pattern[2 * b + 1] = SignReq::Neg;
        patterns.push(pattern);
    }
    let interface = InterfaceSpec::new(
        primitives,
        RegionRule {
            minus_patterns: patterns,
        },
    )
    .expect("valid layer interface");
    let coeffs = CoefficientField::from_physics(
        params.omega,
        params.eps_perm,
        params.sigma,
        params.alpha,
    );
    Problem {
        id: ExampleId::Layers,
        params,
        domain: (0.0, 4.0, 0.0, 1.0),
        interface,
        coeffs,
        source: Box::new(gaussian_source(params.omega, params.eps_perm[0])),
        exact: None,
        singular_lines: Vec::new(),
        adaptive_source: true,
        inhomogeneous_bc: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central-difference rot(α rot u) − β u, the independent oracle for the
    /// hand-derived sources.
    fn fd_residual(problem: &Problem, p: Point2, tag: RegionTag, h: f64) -> [Cplx; 2] {
        let exact = problem.exact.as_ref().unwrap();
        let alpha = |t: RegionTag| match t {
            RegionTag::Minus => problem.params.alpha[0],
            RegionTag::Plus => problem.params.alpha[1],
        };
        // w = α rot u by finite differences of the field
        let w = |q: Point2| -> Cplx {
            let ue = |r: Point2| exact.field.eval(r, tag);
            let du2_dx =
                (ue(Point2::new(q.x + h, q.y))[1] - ue(Point2::new(q.x - h, q.y))[1]) / (2.0 * h);
            let du1_dy =
                (ue(Point2::new(q.x, q.y + h))[0] - ue(Point2::new(q.x, q.y - h))[0]) / (2.0 * h);
            (du2_dx - du1_dy) * alpha(tag)
        };
        let dw_dy = (w(Point2::new(p.x, p.y + h)) - w(Point2::new(p.x, p.y - h))) / (2.0 * h);
        let dw_dx = (w(Point2::new(p.x + h, p.y)) - w(Point2::new(p.x - h, p.y))) / (2.0 * h);
        let u = exact.field.eval(p, tag);
        let beta = problem.coeffs.beta(tag);
        [dw_dy - beta * u[0], -dw_dx - beta * u[1]]
    }

    #[test]
    fn circle_source_matches_finite_differences() {
        let problem = build_problem(ExampleId::Circle, ProblemParams::defaults(ExampleId::Circle));
        let pts_minus = [
            Point2::new(0.1, 0.2),
            Point2::new(-0.3, 0.1),
            Point2::new(0.25, -0.35),
        ];
        let pts_plus = [
            Point2::new(0.8, 0.3),
            Point2::new(-0.7, -0.5),
            Point2::new(0.6, -0.6),
        ];
        let h = 1e-5;
        for (&p, tag) in pts_minus
            .iter()
            .map(|p| (p, RegionTag::Minus))
            .chain(pts_plus.iter().map(|p| (p, RegionTag::Plus)))
        {
            let fd = fd_residual(&problem, p, tag, h);
            let f = problem.source.eval(p, tag);
            for c in 0..2 {
                let err = (fd[c] - f[c]).norm();
                assert!(err < 1e-5 * (1.0 + f[c].norm()), "{tag:?} {p:?} comp {c}: {err}");
            }
        }
    }

    #[test]
    fn circle_rot_matches_finite_differences() {
        let problem = build_problem(ExampleId::Circle, ProblemParams::defaults(ExampleId::Circle));
        let exact = problem.exact.as_ref().unwrap();
        let h = 1e-6;
        for (p, tag) in [
            (Point2::new(0.2, -0.1), RegionTag::Minus),
            (Point2::new(0.7, 0.55), RegionTag::Plus),
        ] {
            let ue = |r: Point2| exact.field.eval(r, tag);
            let fd = (ue(Point2::new(p.x + h, p.y))[1] - ue(Point2::new(p.x - h, p.y))[1])
                / (2.0 * h)
                - (ue(Point2::new(p.x, p.y + h))[0] - ue(Point2::new(p.x, p.y - h))[0]) / (2.0 * h);
            let r = exact.rot.eval(p, tag);
            assert!((fd - r).norm() < 1e-6 * (1.0 + r.norm()));
        }
    }

    #[test]
    fn circle_jump_conditions_hold() {
        let problem = build_problem(ExampleId::Circle, ProblemParams::defaults(ExampleId::Circle));
        let exact = problem.exact.as_ref().unwrap();
        for k in 0..12 {
            let a = 2.0 * std::f64::consts::PI * k as f64 / 12.0;
            let p = Point2::new(CIRCLE_R0 * a.cos(), CIRCLE_R0 * a.sin());
            // both branches vanish on the interface, so [u·t] = 0
            let um = exact.field.eval(p, RegionTag::Minus);
            let up = exact.field.eval(p, RegionTag::Plus);
            assert!(um[0].norm() + um[1].norm() < 1e-13);
            assert!(up[0].norm() + up[1].norm() < 1e-13);
            // [α rot u] = 0
            let am = problem.params.alpha[0] * exact.rot.eval(p, RegionTag::Minus).re;
            let ap = problem.params.alpha[1] * exact.rot.eval(p, RegionTag::Plus).re;
            assert!((am - ap).abs() < 1e-12 * (1.0 + am.abs()), "{am} vs {ap}");
        }
    }

    #[test]
    fn line_singular_source_matches_finite_differences() {
        for s in [0.2, -0.1, -0.4] {
            let mut params = ProblemParams::defaults(ExampleId::LineSingular);
            params.s_exponent = s;
            let problem = build_problem(ExampleId::LineSingular, params);
            let h = 1e-6;
            // points away from the singular line (FD needs smoothness)
            for (p, tag) in [
                (Point2::new(0.5, 0.2), RegionTag::Minus),
                (Point2::new(0.31, -0.44), RegionTag::Minus),
                (Point2::new(-0.6, 0.3), RegionTag::Plus),
                (Point2::new(-0.27, -0.8), RegionTag::Plus),
            ] {
                let fd = fd_residual(&problem, p, tag, h);
                let f = problem.source.eval(p, tag);
                for c in 0..2 {
                    let err = (fd[c] - f[c]).norm();
                    assert!(err < 1e-4 * (1.0 + f[c].norm()), "s={s} {p:?} comp {c}: {err}");
                }
            }
        }
    }

    #[test]
    fn line_singular_trace_guards_interface_edges() {
        let params = {
            let mut p = ProblemParams::defaults(ExampleId::LineSingular);
            p.s_exponent = -0.4;
            p
        };
        let problem = build_problem(ExampleId::LineSingular, params);
        let exact = problem.exact.as_ref().unwrap();
        // vertical tangent exactly on the line: finite (u₂ only)
        let p = Point2::new(params.eps_geom, 0.3);
        let v = exact.trace.tangential(p, Point2::new(0.0, 1.0));
        assert!(v.is_finite());
        assert!((v.re - (p.x + p.y).sin()).abs() < 1e-14);
    }

    #[test]
    fn gaussian_source_wiring() {
        let params = ProblemParams::defaults(ExampleId::DoubleCircle);
        let problem = build_problem(ExampleId::DoubleCircle, params);
        // β = ω²(ε + iσ/ω)
        let beta_minus = problem.coeffs.beta(RegionTag::Minus);
        assert!((beta_minus.re - 25.0 * 0.5).abs() < 1e-12);
        assert!((beta_minus.im - 5.0 * 1.0).abs() < 1e-12);
        let beta_plus = problem.coeffs.beta(RegionTag::Plus);
        assert!((beta_plus.im - 5.0 * 0.1).abs() < 1e-12);
        // f = −iω(0,1) at the source line x = 3
        let f = problem.source.eval(Point2::new(3.0, 0.5), RegionTag::Plus);
        assert!(f[0].norm() < 1e-15);
        assert!((f[1] - Cplx::new(0.0, -5.0)).norm() < 1e-12);
        // decays off the line for the narrow-source parameters
        let narrow = build_problem(ExampleId::Layers, ProblemParams::defaults(ExampleId::Layers));
        let f = narrow.source.eval(Point2::new(3.2, 0.5), RegionTag::Plus);
        assert!(f[1].norm() < 1e-15);
    }

    #[test]
    fn layer_regions() {
        let params = ProblemParams::defaults(ExampleId::Layers);
        let problem = build_problem(ExampleId::Layers, params);
        let tag_at = |y: f64| crate::geometry::level_eval(&problem.interface, Point2::new(1.0, y)).1;
        assert_eq!(tag_at(0.25), RegionTag::Minus);
        assert_eq!(tag_at(0.75), RegionTag::Minus);
        assert_eq!(tag_at(0.5), RegionTag::Plus);
        assert_eq!(tag_at(0.1), RegionTag::Plus);
        // five layers
        let mut p5 = params;
        p5.n_layers = 5;
        let problem5 = build_problem(ExampleId::Layers, p5);
        let tag5 = |y: f64| crate::geometry::level_eval(&problem5.interface, Point2::new(1.0, y)).1;
        assert_eq!(tag5(0.1), RegionTag::Minus);
        assert_eq!(tag5(0.5), RegionTag::Minus);
        assert_eq!(tag5(0.9), RegionTag::Minus);
        assert_eq!(tag5(0.3), RegionTag::Plus);
    }
}
