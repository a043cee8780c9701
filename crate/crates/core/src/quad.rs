//! Numerical quadrature on segments and triangles.
//!
//! Segment rules are Gauss–Legendre. Triangle rules come from the collapsed
//! tensor-product construction mapping the unit square onto the reference
//! triangle, which is exact for total degree `d` with `ceil((d+2)/2)` points
//! per direction. Two refinements support the benchmark problems: geometric
//! grading toward an endpoint or a line where the integrand has an `|x|^s`
//! singularity, and adaptive subdivision for sharply peaked sources.

use std::sync::LazyLock;

use crate::geometry::{cross, Point2};
use crate::Cplx;

/// Values the quadrature routines can accumulate.
pub trait QuadValue: Copy {
    fn zero() -> Self;
    fn add(self, other: Self) -> Self;
    fn scale(self, s: f64) -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Cplx {
    fn zero() -> Self {
        Cplx::new(0.0, 0.0)
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

impl QuadValue for [Cplx; 2] {
    fn zero() -> Self {
        [Cplx::new(0.0, 0.0); 2]
    }
    fn add(self, other: Self) -> Self {
        [self[0] + other[0], self[1] + other[1]]
    }
    fn scale(self, s: f64) -> Self {
        [self[0] * s, self[1] * s]
    }
    fn magnitude(self) -> f64 {
        self[0].norm() + self[1].norm()
    }
}

/// Gauss–Legendre rule mapped to [0, 1]; weights sum to 1.
#[derive(Clone, Debug)]
pub struct SegmentRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

const MAX_SEG_POINTS: usize = 24;

static SEGMENT_RULES: LazyLock<Vec<SegmentRule>> = LazyLock::new(|| {
    (0..=MAX_SEG_POINTS)
        .map(|n| gauss_legendre_01(n.max(1)))
        .collect()
});

/// The `n`-point Gauss–Legendre rule on [0, 1] (exact for degree 2n − 1).
pub fn segment_rule(n: usize) -> &'static SegmentRule {
    let n = n.clamp(1, MAX_SEG_POINTS);
    &SEGMENT_RULES[n]
}

fn gauss_legendre_01(n: usize) -> SegmentRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton iteration on P_n from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    SegmentRule { nodes, weights }
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature points on the reference triangle (0,0), (1,0), (0,1); weights
/// sum to 1, so a physical integral is `|T| Σ w_i f(x_i)`.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

const MAX_TRI_DEGREE: usize = 16;

static TRIANGLE_RULES: LazyLock<Vec<TriangleRule>> = LazyLock::new(|| {
    (0..=MAX_TRI_DEGREE)
        .map(|d| collapsed_triangle_rule(d.max(1)))
        .collect()
});

/// A rule exact for bivariate polynomials of total degree `degree`.
pub fn triangle_rule(degree: usize) -> &'static TriangleRule {
    let d = degree.clamp(1, MAX_TRI_DEGREE);
    &TRIANGLE_RULES[d]
}

fn collapsed_triangle_rule(degree: usize) -> TriangleRule {
    let n = (degree + 2).div_ceil(2);
    let g = gauss_legendre_01(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&u, &wu) in g.nodes.iter().zip(&g.weights) {
        for (&t, &wt) in g.nodes.iter().zip(&g.weights) {
            points.push((u, t * (1.0 - u)));
            weights.push(2.0 * wu * wt * (1.0 - u));
        }
    }
    TriangleRule { points, weights }
}

pub fn map_to_triangle(tri: &[Point2; 3], uv: (f64, f64)) -> Point2 {
    let (u, v) = uv;
    Point2::new(
        tri[0].x + (tri[1].x - tri[0].x) * u + (tri[2].x - tri[0].x) * v,
        tri[0].y + (tri[1].y - tri[0].y) * u + (tri[2].y - tri[0].y) * v,
    )
}

/// Integrates `f` over the physical triangle.
pub fn integrate_triangle<V: QuadValue, F: FnMut(Point2) -> V>(
    tri: &[Point2; 3],
    rule: &TriangleRule,
    mut f: F,
) -> V {
    let area = 0.5 * cross(tri[1] - tri[0], tri[2] - tri[0]).abs();
    let mut sum = V::zero();
    for (&uv, &w) in rule.points.iter().zip(&rule.weights) {
        sum = sum.add(f(map_to_triangle(tri, uv)).scale(w));
    }
    sum.scale(area)
}

/// Geometric grading parameters for integrands with an endpoint or line
/// singularity like `|x − ε|^s`, s > −1/2.
#[derive(Clone, Copy, Debug)]
pub struct Grading {
    pub ratio: f64,
    pub levels: usize,
}

impl Default for Grading {
    fn default() -> Self {
        Self {
            ratio: 0.25,
            levels: 20,
        }
    }
}

/// Integrates `f` along the segment a→b with `n`-point Gauss; if a singular
/// endpoint is flagged, the parameter interval is subdivided geometrically
/// toward it.
pub fn integrate_segment<V: QuadValue, F: FnMut(Point2) -> V>(
    a: Point2,
    b: Point2,
    n: usize,
    sing_at_a: bool,
    sing_at_b: bool,
    grading: Grading,
    mut f: F,
) -> V {
    let len = a.dist(b);
    let rule = segment_rule(n);
    let mut eval_piece = |t0: f64, t1: f64| -> V {
        let mut s = V::zero();
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            let tt = t0 + (t1 - t0) * t;
            s = s.add(f(a + (b - a) * tt).scale(w));
        }
        s.scale(t1 - t0)
    };
    let mut total = V::zero();
    match (sing_at_a, sing_at_b) {
        (false, false) => total = eval_piece(0.0, 1.0),
        (true, false) => {
            for (t0, t1) in graded_intervals(0.0, 1.0, true, grading) {
                total = total.add(eval_piece(t0, t1));
            }
        }
        (false, true) => {
            for (t0, t1) in graded_intervals(0.0, 1.0, false, grading) {
                total = total.add(eval_piece(t0, t1));
            }
        }
        (true, true) => {
            for (t0, t1) in graded_intervals(0.0, 0.5, true, grading) {
                total = total.add(eval_piece(t0, t1));
            }
            for (t0, t1) in graded_intervals(0.5, 1.0, false, grading) {
                total = total.add(eval_piece(t0, t1));
            }
        }
    }
    total.scale(len)
}

/// Subintervals of [t0, t1] shrinking geometrically toward t0 (`toward_start`)
/// or t1.
fn graded_intervals(t0: f64, t1: f64, toward_start: bool, grading: Grading) -> Vec<(f64, f64)> {
    let mut cuts = Vec::with_capacity(grading.levels + 2);
    let mut w = 1.0;
    cuts.push(1.0);
    for _ in 0..grading.levels {
        w *= grading.ratio;
        cuts.push(w);
    }
    cuts.push(0.0);
    let span = t1 - t0;
    let mut out = Vec::with_capacity(cuts.len() - 1);
    for pair in cuts.windows(2) {
        let (hi, lo) = (pair[0], pair[1]);
        let (u0, u1) = if toward_start {
            (t0 + lo * span, t0 + hi * span)
        } else {
            (t1 - hi * span, t1 - lo * span)
        };
        out.push((u0, u1));
    }
    out
}

/// A straight line used for graded quadrature: `level(p) = normal · (p − point)`.
#[derive(Clone, Copy, Debug)]
pub struct SingularLine {
    pub point: Point2,
    pub normal: Point2,
}

impl SingularLine {
    pub fn level(&self, p: Point2) -> f64 {
        self.normal.x * (p.x - self.point.x) + self.normal.y * (p.y - self.point.y)
    }
}

/// Integrates `f` over a triangle with geometric grading toward a singular
/// line touching the triangle. Triangles away from the line fall back to the
/// plain rule. The triangle must not straddle the line (cells of
/// interface-fitted meshes never do).
pub fn integrate_triangle_graded<V: QuadValue, F: FnMut(Point2) -> V>(
    tri: &[Point2; 3],
    rule: &TriangleRule,
    line: &SingularLine,
    grading: Grading,
    mut f: F,
) -> V {
    let d: [f64; 3] = [
        line.level(tri[0]),
        line.level(tri[1]),
        line.level(tri[2]),
    ];
    let dmin = d.iter().fold(f64::INFINITY, |m, &x| m.min(x.abs()));
    let size = tri[0].dist(tri[1]).max(tri[1].dist(tri[2]));
    let extreme = d
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap();
    if dmin > 1e-12 * size || extreme == 0.0 {
        return integrate_triangle(tri, rule, f);
    }
    // The triangle touches the line on one side; peel strips of geometrically
    // shrinking width off that side.
    let side = extreme.signum();
    let mut total = V::zero();
    let mut active: Vec<[Point2; 3]> = vec![*tri];
    let mut cut_level = extreme.abs();
    for level in 0..grading.levels {
        cut_level *= grading.ratio;
        let mut near: Vec<[Point2; 3]> = Vec::new();
        for t in active.drain(..) {
            let (far_part, near_part) = split_triangle_at_level(&t, line, side * cut_level);
            for ft in far_part {
                total = total.add(integrate_triangle(&ft, rule, &mut f));
            }
            near.extend(near_part);
        }
        active = near;
        if active.is_empty() || level + 1 == grading.levels {
            break;
        }
    }
    for t in active {
        total = total.add(integrate_triangle(&t, rule, &mut f));
    }
    total
}

/// Splits a triangle by the level line `line.level(p) = c` into (far, near)
/// triangle lists, "near" meaning |level| < |c|.
fn split_triangle_at_level(
    tri: &[Point2; 3],
    line: &SingularLine,
    c: f64,
) -> (Vec<[Point2; 3]>, Vec<[Point2; 3]>) {
    let sign = c.signum();
    let lv: [f64; 3] = [
        (line.level(tri[0]) - c) * sign,
        (line.level(tri[1]) - c) * sign,
        (line.level(tri[2]) - c) * sign,
    ];
    // positive = far side of the shifted line
    let mut near_chain: Vec<Point2> = Vec::new();
    let mut far_chain: Vec<Point2> = Vec::new();
    for i in 0..3 {
        let j = (i + 1) % 3;
        if lv[i] >= 0.0 {
            far_chain.push(tri[i]);
        }
        if lv[i] <= 0.0 {
            near_chain.push(tri[i]);
        }
        if (lv[i] > 0.0 && lv[j] < 0.0) || (lv[i] < 0.0 && lv[j] > 0.0) {
            let t = lv[i] / (lv[i] - lv[j]);
            let x = tri[i] + (tri[j] - tri[i]) * t;
            far_chain.push(x);
            near_chain.push(x);
        }
    }
    (fan_triangles(&far_chain), fan_triangles(&near_chain))
}

fn fan_triangles(chain: &[Point2]) -> Vec<[Point2; 3]> {
    let mut out = Vec::new();
    if chain.len() < 3 {
        return out;
    }
    for k in 1..chain.len() - 1 {
        let t = [chain[0], chain[k], chain[k + 1]];
        if cross(t[1] - t[0], t[2] - t[0]).abs() > 0.0 {
            out.push(t);
        }
    }
    out
}

/// Adaptive triangle quadrature: compares the rule on the triangle with the
/// sum over its four midpoint children and recurses where they disagree.
pub fn integrate_triangle_adaptive<V: QuadValue, F: Fn(Point2) -> V>(
    tri: &[Point2; 3],
    rule: &TriangleRule,
    max_depth: usize,
    rel_tol: f64,
    abs_tol: f64,
    f: &F,
) -> V {
    let coarse = integrate_triangle(tri, rule, f);
    adaptive_rec(tri, rule, max_depth, rel_tol, abs_tol, f, coarse)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_rec<V: QuadValue, F: Fn(Point2) -> V>(
    tri: &[Point2; 3],
    rule: &TriangleRule,
    depth_left: usize,
    rel_tol: f64,
    abs_tol: f64,
    f: &F,
    coarse: V,
) -> V {
    let m01 = (tri[0] + tri[1]) * 0.5;
    let m12 = (tri[1] + tri[2]) * 0.5;
    let m20 = (tri[2] + tri[0]) * 0.5;
    let children = [
        [tri[0], m01, m20],
        [m01, tri[1], m12],
        [m20, m12, tri[2]],
        [m01, m12, m20],
    ];
    let fine: Vec<V> = children
        .iter()
        .map(|c| integrate_triangle(c, rule, f))
        .collect();
    let mut fine_sum = V::zero();
    for &v in &fine {
        fine_sum = fine_sum.add(v);
    }
    let deviation = coarse.add(fine_sum.scale(-1.0)).magnitude();
    if depth_left == 0 || deviation <= rel_tol * fine_sum.magnitude() + abs_tol {
        return fine_sum;
    }
    let mut total = V::zero();
    for (c, est) in children.iter().zip(fine) {
        total = total.add(adaptive_rec(c, rule, depth_left - 1, rel_tol, abs_tol, f, est));
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_rule_exactness() {
        for n in 1..=10usize {
            let rule = segment_rule(n);
            for k in 0..=(2 * n - 1) {
                let num: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&t, &w)| w * t.powi(k as i32))
                    .sum();
                let exact = 1.0 / (k as f64 + 1.0);
                assert!((num - exact).abs() < 1e-14, "n={n} k={k}: {num} vs {exact}");
            }
        }
    }

    #[test]
    fn triangle_rule_exactness() {
        // exact reference integral of x^a y^b is a! b! / (a+b+2)!
        let fact = |m: usize| -> f64 { (1..=m).map(|i| i as f64).product::<f64>().max(1.0) };
        for degree in 1..=9usize {
            let rule = triangle_rule(degree);
            for a in 0..=degree {
                for b in 0..=(degree - a) {
                    let num: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(&(x, y), &w)| w * x.powi(a as i32) * y.powi(b as i32))
                        .sum::<f64>()
                        * 0.5;
                    let exact = fact(a) * fact(b) / fact(a + b + 2);
                    assert!(
                        (num - exact).abs() < 1e-14,
                        "deg={degree} a={a} b={b}: {num} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn graded_segment_matches_antiderivative() {
        // ∫_0^0.1 t^s dt = 0.1^{s+1} / (s+1) for s = -0.4
        let s = -0.4;
        let eps = 0.3;
        let a = Point2::new(eps, 0.0);
        let b = Point2::new(eps + 0.1, 0.0);
        let val: f64 = integrate_segment(a, b, 6, true, false, Grading::default(), |p| {
            (p.x - eps).abs().powf(s)
        });
        let exact = 0.1f64.powf(s + 1.0) / (s + 1.0);
        assert!(
            (val - exact).abs() < 1e-6 * exact,
            "graded {val} vs exact {exact}"
        );
        // ungraded Gauss is far off
        let plain: f64 = integrate_segment(a, b, 6, false, false, Grading::default(), |p| {
            (p.x - eps).abs().powf(s)
        });
        assert!((plain - exact).abs() > 1e-3 * exact);
    }

    #[test]
    fn graded_triangle_matches_closed_form() {
        // ∫ over triangle (0,0),(1,0),(0,1) of x^s = 1/(s+1) − 1/(s+2)
        let s = -0.4;
        let tri = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let line = SingularLine {
            point: Point2::new(0.0, 0.0),
            normal: Point2::new(1.0, 0.0),
        };
        let val: f64 =
            integrate_triangle_graded(&tri, triangle_rule(7), &line, Grading::default(), |p| {
                p.x.powf(s)
            });
        let exact = 1.0 / (s + 1.0) - 1.0 / (s + 2.0);
        assert!(
            (val - exact).abs() < 1e-5 * exact,
            "graded {val} vs exact {exact}"
        );
    }

    #[test]
    fn adaptive_handles_narrow_gaussian() {
        let eps = 0.01;
        let tri = [
            Point2::new(2.5, 0.0),
            Point2::new(3.5, 0.0),
            Point2::new(3.0, 1.0),
        ];
        let f = |p: Point2| (-(p.x - 3.0) * (p.x - 3.0) / (eps * eps)).exp();
        let val: f64 = integrate_triangle_adaptive(&tri, triangle_rule(7), 10, 1e-10, 1e-14, &f);
        // reference by brute-force strip integration: cross-section height at x
        let mut reference = 0.0;
        let n = 20000;
        for i in 0..n {
            let x = 2.5 + (i as f64 + 0.5) / n as f64;
            let height = if x <= 3.0 {
                2.0 * (x - 2.5)
            } else {
                2.0 * (3.5 - x)
            };
            reference += f(Point2::new(x, 0.0)) * height / n as f64;
        }
        assert!(
            (val - reference).abs() < 1e-6 * reference,
            "adaptive {val} vs ref {reference}"
        );
    }
}
