//! Lowest-order H(rot)-conforming virtual element solver for the 2D indefinite
//! time-harmonic Maxwell equation `rot(α rot u) − β u = f` in piecewise-constant
//! media, on polygonal meshes obtained by cutting a Cartesian background grid
//! with the media interface.
//!
//! The crate is organised around the solver pipeline:
//!
//! * [`geometry`] — points, polygons, signed level sets, polygon clipping;
//! * [`quad`] — Gauss rules on segments and triangles, graded rules near
//!   singular lines, adaptive triangle quadrature;
//! * [`mesh`] — cut-cell mesh construction, topology and DoF numbering;
//! * [`regularity`] — shape-regularity functions τ(θ), ϱ(κ₀,κ₁) and mesh audits;
//! * [`vem`] — element-local kernels: edge-DoF interpolation, constant-rot
//!   evaluation, L² projection onto constants, element matrices;
//! * [`system`] — global assembly, essential tangential boundary conditions and
//!   the sparse complex-symmetric direct solve;
//! * [`postproc`] — error norms, convergence tables, cross-mesh comparison,
//!   the discrete Helmholtz-split diagnostic and field export;
//! * [`fem`] — an independent lowest-order Nédélec edge-element solver on a
//!   triangulation of the same cut geometry, used for cross-validation;
//! * [`problems`] — the built-in benchmark problems (circle, singular line,
//!   double circle, thin layers) with closed-form data;
//! * [`experiment`] — declarative experiment configs and the end-to-end runner.

pub mod experiment;
pub mod fem;
pub mod geometry;
pub mod io;
pub mod mesh;
pub mod postproc;
pub mod problems;
pub mod quad;
pub mod regularity;
pub mod system;
pub mod vem;

/// Complex scalar used throughout: the system is complex symmetric, all
/// bilinear forms are unconjugated.
pub type Cplx = num_complex::Complex64;
