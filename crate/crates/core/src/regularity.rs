//! Shape-regularity functions and mesh audits.
//!
//! The admissible anisotropy of a cell depends on the solution regularity
//! order θ ∈ (1/2, 1] through the threshold
//!
//! ```text
//! τ(θ) = exp(1 + κ₀ − r(θ) / (2(1−θ))),    r(θ) = 1 − κ₁(θ−0.5)(θ−1),
//! ```
//!
//! with κ₀ < 0 and κ₁ > 0. A cell passes the star-convexity condition when
//! ρ_K ≥ τ(θ) h_K. The associated error-constant bound is the maximum of
//! τ(θ)^(θ−1) over θ, available in closed form as ϱ(κ₀, κ₁) with three
//! branches depending on (κ₀+1)/κ₁.
//!
//! Audits are advisory: the solver runs regardless of the outcome, since the
//! benchmark meshes deliberately contain cells violating comfortable
//! regularity.

use thiserror::Error;

use crate::mesh::PolyMesh;

#[derive(Debug, Error)]
pub enum RegularityError {
    #[error("theta must lie in (0.5, 1], got {0}")]
    ThetaOutOfRange(f64),
    #[error("kappa0 must be negative, got {0}")]
    Kappa0NotNegative(f64),
    #[error("kappa1 must be positive, got {0}")]
    Kappa1NotPositive(f64),
    #[error("G2 constants must be positive")]
    NonPositiveConstant,
}

/// Parameters of the regularity audit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularityParams {
    /// Solution regularity order θ ∈ (0.5, 1].
    pub theta: f64,
    pub kappa0: f64,
    pub kappa1: f64,
    /// Admissible constants of the two edge conditions.
    pub c1: f64,
    pub c2: f64,
}

impl Default for RegularityParams {
    fn default() -> Self {
        Self {
            theta: 0.9,
            kappa0: -1.0,
            kappa1: 60.0,
            c1: 10.0,
            c2: 10.0,
        }
    }
}

impl RegularityParams {
    pub fn validate(&self) -> Result<(), RegularityError> {
        if !(self.theta > 0.5 && self.theta <= 1.0) {
            return Err(RegularityError::ThetaOutOfRange(self.theta));
        }
        if self.kappa0 >= 0.0 {
            return Err(RegularityError::Kappa0NotNegative(self.kappa0));
        }
        if self.kappa1 <= 0.0 {
            return Err(RegularityError::Kappa1NotPositive(self.kappa1));
        }
        if self.c1 <= 0.0 || self.c2 <= 0.0 {
            return Err(RegularityError::NonPositiveConstant);
        }
        Ok(())
    }
}

/// r(θ) = 1 − κ₁ (θ − 0.5)(θ − 1).
pub fn r_of_theta(theta: f64, kappa1: f64) -> f64 {
    1.0 - kappa1 * (theta - 0.5) * (theta - 1.0)
}

/// τ(θ) = exp(1 + κ₀ − r(θ)/(2(1−θ))), with the limit values τ(1) = 0 and
/// τ(0.5) = exp(κ₀).
pub fn tau_theta(theta: f64, kappa0: f64, kappa1: f64) -> f64 {
    if theta >= 1.0 {
        return 0.0;
    }
    if theta <= 0.5 {
        return kappa0.exp();
    }
    let r = r_of_theta(theta, kappa1);
    (1.0 + kappa0 - r / (2.0 * (1.0 - theta))).exp()
}

/// ϱ(κ₀, κ₁) = max over θ ∈ (1/2, 1] of τ(θ)^(θ−1), in closed form.
pub fn varrho(kappa0: f64, kappa1: f64) -> f64 {
    let ratio = (kappa0 + 1.0) / kappa1;
    if ratio > 0.25 {
        (0.5f64).exp()
    } else if ratio < -0.25 {
        (-kappa0 / 2.0).exp()
    } else {
        let num = 16.0 * kappa0 * kappa0 - 8.0 * kappa0 * (kappa1 - 4.0)
            + (4.0 + kappa1) * (4.0 + kappa1);
        (num / (32.0 * kappa1)).exp()
    }
}

/// Numerical maximum of τ(θ)^(θ−1) over a θ grid with golden-section
/// refinement; the independent cross-check for [`varrho`].
pub fn varrho_numeric(kappa0: f64, kappa1: f64, grid: usize) -> f64 {
    let g = |theta: f64| -> f64 {
        // log of tau^(theta−1): (θ−1)(1+κ₀) + r(θ)/2, continuous up to θ = 1
        let r = r_of_theta(theta, kappa1);
        (theta - 1.0) * (1.0 + kappa0) + r / 2.0
    };
    let mut best_t = 0.5 + 1e-12;
    let mut best = g(best_t);
    for i in 0..=grid {
        let t = (0.5 + 0.5 * i as f64 / grid as f64).min(1.0);
        let v = g(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    // golden-section around the best grid point
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (
        (best_t - 1.0 / grid as f64).max(0.5),
        (best_t + 1.0 / grid as f64).min(1.0),
    );
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    for _ in 0..200 {
        if g(c) > g(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
        if (b - a).abs() < 1e-14 {
            break;
        }
    }
    g(0.5 * (a + b)).max(best).exp()
}

/// Outcome of the per-cell star-convexity check.
#[derive(Clone, Copy, Debug)]
pub struct CellCheck {
    pub cell: usize,
    pub h_k: f64,
    pub rho_k: f64,
    /// τ(θ)·h_K, the threshold ρ_K is compared against.
    pub threshold: f64,
    pub pass: bool,
    /// Number of cells intersecting the ball of diameter 3 h_K centred at the
    /// centroid (includes the cell itself).
    pub overlap_count: usize,
}

/// Outcome of the per-edge check: smallest admissible constants for each of
/// the two edge conditions.
#[derive(Clone, Copy, Debug)]
pub struct EdgeCheck {
    pub cell: usize,
    pub local_edge: usize,
    /// Smallest c₁ with h_e h_K ≤ c₁ |K|.
    pub c1_min: f64,
    /// Smallest c₂ with c₂⁻¹ h_K ≤ h_e ≤ c₂ l_e⁻¹ |K|.
    pub c2_min: f64,
    pub pass: bool,
}

/// Full audit of a mesh against the geometric assumptions.
#[derive(Clone, Debug)]
pub struct RegularityReport {
    pub params: RegularityParams,
    pub tau: f64,
    pub varrho: f64,
    pub cells: Vec<CellCheck>,
    pub edges: Vec<EdgeCheck>,
    pub worst_rho_ratio: f64,
    pub worst_c1: f64,
    pub worst_c2: f64,
    pub max_overlap: usize,
    pub star_pass: bool,
    pub edge_pass: bool,
}

/// Audits every cell and edge of the mesh. Never fails the run; the report
/// records which conditions hold with which constants.
pub fn audit_mesh(mesh: &PolyMesh, params: &RegularityParams) -> RegularityReport {
    let tau = tau_theta(params.theta, params.kappa0, params.kappa1);
    let rho_bound = varrho(params.kappa0, params.kappa1);
    let mut cells = Vec::with_capacity(mesh.cells.len());
    let mut edges = Vec::new();
    let mut worst_rho_ratio = f64::INFINITY;
    let mut worst_c1 = 0.0f64;
    let mut worst_c2 = 0.0f64;
    let mut max_overlap = 0usize;

    for (k, cell) in mesh.cells.iter().enumerate() {
        let poly = mesh.cell_polygon(k);
        let rho = crate::geometry::star_radius(&poly);
        let h_k = cell.diameter;
        let threshold = tau * h_k;
        let overlap = mesh.cells_near(cell.centroid, 1.5 * h_k).len();
        max_overlap = max_overlap.max(overlap);
        worst_rho_ratio = worst_rho_ratio.min(rho / h_k);
        cells.push(CellCheck {
            cell: k,
            h_k,
            rho_k: rho,
            threshold,
            pass: rho >= threshold,
            overlap_count: overlap,
        });

        let area = cell.area;
        let n = poly.len();
        for i in 0..n {
            let (a, b) = poly.edge(i);
            let h_e = a.dist(b);
            let l_e = poly
                .vertices
                .iter()
                .map(|&v| crate::geometry::dist_point_line(v, a, b))
                .fold(0.0f64, f64::max);
            let c1_min = h_e * h_k / area;
            let c2_min = (h_k / h_e).max(h_e * l_e / area);
            let pass = c1_min <= params.c1 || c2_min <= params.c2;
            if c1_min <= params.c1 {
                worst_c1 = worst_c1.max(c1_min);
            } else {
                worst_c2 = worst_c2.max(c2_min);
            }
            edges.push(EdgeCheck {
                cell: k,
                local_edge: i,
                c1_min,
                c2_min,
                pass,
            });
        }
    }

    let star_pass = cells.iter().all(|c| c.pass);
    let edge_pass = edges.iter().all(|e| e.pass);
    RegularityReport {
        params: *params,
        tau,
        varrho: rho_bound,
        cells,
        edges,
        worst_rho_ratio,
        worst_c1,
        worst_c2,
        max_overlap,
        star_pass,
        edge_pass,
    }
}
