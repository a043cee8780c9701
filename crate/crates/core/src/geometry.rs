//! Planar geometry: points, simple polygons, signed level sets describing
//! media interfaces, and the polygon clipping used to cut Cartesian cells.
//!
//! Interfaces are composites of line and circle primitives. Circle cuts are
//! chordal: the two points where the circle crosses the polygon boundary are
//! joined by a straight segment, so the cut partitions the polygon exactly and
//! only the region assignment carries the O(h²) geometric mismatch.

use thiserror::Error;

/// A point in the plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(&self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Lexicographic (x, then y) comparison, used for canonical orderings.
    pub fn lex_cmp(&self, other: &Point2) -> std::cmp::Ordering {
        self.x
            .total_cmp(&other.x)
            .then_with(|| self.y.total_cmp(&other.y))
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// z-component of the cross product (a × b).
pub fn cross(a: Point2, b: Point2) -> f64 {
    a.x * b.y - a.y * b.x
}

pub fn dot(a: Point2, b: Point2) -> f64 {
    a.x * b.x + a.y * b.y
}

/// Distance from `p` to the segment `[a, b]`.
pub fn dist_point_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = b - a;
    let len2 = dot(d, d);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (dot(p - a, d) / len2).clamp(0.0, 1.0);
    p.dist(a + d * t)
}

/// Distance from `p` to the supporting line through `a`, `b`.
pub fn dist_point_line(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = b - a;
    let len = d.x.hypot(d.y);
    if len == 0.0 {
        return p.dist(a);
    }
    (cross(d, p - a) / len).abs()
}

/// Which side of an interface primitive a point falls on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Minus,
    Plus,
}

/// Region tag of a mesh cell: `Minus` is the inside of circles / the side a
/// region rule selects, `Plus` the complement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionTag {
    Minus,
    Plus,
}

/// One signed-level-set primitive of an interface.
#[derive(Clone, Copy, Debug)]
pub enum Primitive {
    /// Straight line through `point` with unit `normal`; the level is the
    /// signed distance `normal · (p − point)`.
    Line { point: Point2, normal: Point2 },
    /// Circle; the level is `|p − center| − radius` (negative inside).
    Circle { center: Point2, radius: f64 },
}

impl Primitive {
    pub fn level(&self, p: Point2) -> f64 {
        match *self {
            Primitive::Line { point, normal } => dot(normal, p - point),
            Primitive::Circle { center, radius } => p.dist(center) - radius,
        }
    }

    fn validate(&self) -> Result<(), GeometryError> {
        match *self {
            Primitive::Line { point, normal } => {
                if !point.is_finite() || !normal.is_finite() {
                    return Err(GeometryError::NonFinite);
                }
                let n = normal.x.hypot(normal.y);
                if (n - 1.0).abs() > 1e-12 {
                    return Err(GeometryError::NonUnitNormal { norm: n });
                }
            }
            Primitive::Circle { center, radius } => {
                if !center.is_finite() || !radius.is_finite() {
                    return Err(GeometryError::NonFinite);
                }
                if radius <= 0.0 {
                    return Err(GeometryError::NonPositiveRadius { radius });
                }
            }
        }
        Ok(())
    }
}

/// Requirement on the sign of one primitive level inside a [`RegionRule`]
/// pattern. Levels `>= 0` count as positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignReq {
    Neg,
    Pos,
    Any,
}

impl SignReq {
    fn matches(&self, level: f64) -> bool {
        match self {
            SignReq::Neg => level < 0.0,
            SignReq::Pos => level >= 0.0,
            SignReq::Any => true,
        }
    }
}

/// Maps the vector of primitive level signs to a region tag: `Minus` when any
/// pattern matches, `Plus` otherwise.
#[derive(Clone, Debug)]
pub struct RegionRule {
    pub minus_patterns: Vec<Vec<SignReq>>,
}

impl RegionRule {
    /// Minus wherever the single primitive is negative (inside a circle).
    pub fn minus_inside() -> Self {
        Self {
            minus_patterns: vec![vec![SignReq::Neg]],
        }
    }

    /// Minus wherever any of `n` primitives is negative (union of insides).
    pub fn minus_inside_any(n: usize) -> Self {
        let minus_patterns = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { SignReq::Neg } else { SignReq::Any })
                    .collect()
            })
            .collect();
        Self { minus_patterns }
    }

    pub fn tag(&self, levels: &[f64]) -> RegionTag {
        for pattern in &self.minus_patterns {
            debug_assert_eq!(pattern.len(), levels.len());
            if pattern.iter().zip(levels).all(|(req, &l)| req.matches(l)) {
                return RegionTag::Minus;
            }
        }
        RegionTag::Plus
    }
}

/// Composite signed-level-set description of the media interface.
#[derive(Clone, Debug)]
pub struct InterfaceSpec {
    pub primitives: Vec<Primitive>,
    pub region_rule: RegionRule,
}

impl InterfaceSpec {
    pub fn new(primitives: Vec<Primitive>, region_rule: RegionRule) -> Result<Self, GeometryError> {
        if primitives.is_empty() {
            return Err(GeometryError::EmptyInterface);
        }
        for p in &primitives {
            p.validate()?;
        }
        Ok(Self {
            primitives,
            region_rule,
        })
    }

    /// An interface with no primitives: the whole domain is tagged `Plus`.
    pub fn none() -> Self {
        Self {
            primitives: Vec::new(),
            region_rule: RegionRule {
                minus_patterns: Vec::new(),
            },
        }
    }
}

/// Per-primitive signed values at a point, plus the resulting region tag.
pub fn level_eval(spec: &InterfaceSpec, p: Point2) -> (Vec<f64>, RegionTag) {
    let levels: Vec<f64> = spec.primitives.iter().map(|prim| prim.level(p)).collect();
    let tag = spec.region_rule.tag(&levels);
    (levels, tag)
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("interface needs at least one primitive")]
    EmptyInterface,
    #[error("line normal must be unit length (got |n| = {norm})")]
    NonUnitNormal { norm: f64 },
    #[error("circle radius must be positive (got {radius})")]
    NonPositiveRadius { radius: f64 },
    #[error("polygon needs at least 3 vertices")]
    TooFewVertices,
    #[error("polygon must be counter-clockwise with positive area (signed area {signed_area})")]
    NotCounterClockwise { signed_area: f64 },
    #[error("polygon is self-intersecting")]
    SelfIntersecting,
    #[error("primitive is tangent to the polygon boundary ({detail}); perturb the grid resolution")]
    TangentialCut { detail: String },
    #[error("primitive crosses the polygon boundary in {count} points; only 0 or 2 are supported ({detail})")]
    UnsupportedCrossings { count: usize, detail: String },
    #[error("cut produced a polygon with non-positive area")]
    DegenerateCut,
}

/// A simple polygon with counter-clockwise vertex loop.
#[derive(Clone, Debug)]
pub struct Polygon {
    pub vertices: Vec<Point2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        let poly = Self { vertices };
        poly.validate()?;
        Ok(poly)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices);
        }
        if self.vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let a = self.signed_area();
        if a <= 0.0 {
            return Err(GeometryError::NotCounterClockwise { signed_area: a });
        }
        if !self.is_simple() {
            return Err(GeometryError::SelfIntersecting);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut s = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            s += cross(a, b);
        }
        0.5 * s
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Point2 {
        let n = self.vertices.len();
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let w = cross(p, q);
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
            a += w;
        }
        Point2::new(cx / (3.0 * a), cy / (3.0 * a))
    }

    /// Diameter h_K: the maximum pairwise vertex distance.
    pub fn diameter(&self) -> f64 {
        let mut h = 0.0f64;
        for (i, &a) in self.vertices.iter().enumerate() {
            for &b in &self.vertices[i + 1..] {
                h = h.max(a.dist(b));
            }
        }
        h
    }

    /// First moments (∫ x dx, ∫ y dx), exact for the polygon.
    pub fn first_moments(&self) -> (f64, f64) {
        let c = self.centroid();
        let a = self.signed_area();
        (c.x * a, c.y * a)
    }

    pub fn edge(&self, i: usize) -> (Point2, Point2) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        let scale = self.diameter();
        let tol = -1e-12 * scale * scale;
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            cross(b - a, c - b) >= tol
        })
    }

    fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let (a, b) = self.edge(i);
            for j in i + 1..n {
                // skip adjacent edges (shared endpoint)
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                let (c, d) = self.edge(j);
                if segments_properly_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    /// Point-in-polygon with tolerance: points within `tol` of the boundary
    /// count as inside.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        let n = self.vertices.len();
        if tol > 0.0 {
            for i in 0..n {
                let (a, b) = self.edge(i);
                if dist_point_segment(p, a, b) <= tol {
                    return true;
                }
            }
        }
        // crossing-number ray cast along +x
        let mut inside = false;
        for i in 0..n {
            let (a, b) = self.edge(i);
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn segments_properly_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Geometric quality data of a polygonal cell.
#[derive(Clone, Debug)]
pub struct PolygonMetrics {
    pub area: f64,
    /// h_K, the diameter.
    pub diameter: f64,
    pub centroid: Point2,
    /// ρ_K, the radius of the largest ball to which the cell is star-convex.
    pub star_radius: f64,
    /// h_e per edge, edge i running from vertex i to vertex i+1.
    pub edge_lengths: Vec<f64>,
    /// l_e per edge: max over vertices of the distance to the edge's line.
    pub supporting_heights: Vec<f64>,
}

/// Computes area, diameter, centroid, star-convexity radius and per-edge data.
///
/// ρ_K uses a two-stage candidate-grid search (65×65 over the bounding box,
/// refined once around the best candidate). A candidate is scored by its
/// minimal signed distance to the directed edge lines, i.e. the radius of the
/// largest ball around it contained in the visibility kernel; for convex
/// polygons this is the inradius. Axis-aligned rectangles short-circuit to
/// the exact value.
pub fn polygon_metrics(poly: &Polygon) -> Result<PolygonMetrics, GeometryError> {
    poly.validate()?;
    let n = poly.len();
    let edge_lengths: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = poly.edge(i);
            a.dist(b)
        })
        .collect();
    let supporting_heights: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = poly.edge(i);
            poly.vertices
                .iter()
                .map(|&v| dist_point_line(v, a, b))
                .fold(0.0f64, f64::max)
        })
        .collect();
    Ok(PolygonMetrics {
        area: poly.area(),
        diameter: poly.diameter(),
        centroid: poly.centroid(),
        star_radius: star_radius(poly),
        edge_lengths,
        supporting_heights,
    })
}

fn axis_aligned_rect(poly: &Polygon) -> Option<(f64, f64)> {
    if poly.len() != 4 {
        return None;
    }
    let v = &poly.vertices;
    let tol = 1e-14 * poly.diameter();
    for i in 0..4 {
        let (a, b) = poly.edge(i);
        if (a.x - b.x).abs() > tol && (a.y - b.y).abs() > tol {
            return None;
        }
    }
    let xs: Vec<f64> = v.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = v.iter().map(|p| p.y).collect();
    let w = xs.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x))
        - xs.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    let h = ys.iter().fold(f64::NEG_INFINITY, |m, &y| m.max(y))
        - ys.iter().fold(f64::INFINITY, |m, &y| m.min(y));
    Some((w, h))
}

/// Star-convexity radius ρ_K by candidate-grid search.
pub fn star_radius(poly: &Polygon) -> f64 {
    if let Some((w, h)) = axis_aligned_rect(poly) {
        return 0.5 * w.min(h);
    }
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in &poly.vertices {
        xmin = xmin.min(v.x);
        xmax = xmax.max(v.x);
        ymin = ymin.min(v.y);
        ymax = ymax.max(v.y);
    }
    // Largest ball around p inside the visibility kernel (the intersection of
    // the left half-planes of the directed edges); negative outside.
    let score = |p: Point2| -> f64 {
        (0..poly.len())
            .map(|i| {
                let (a, b) = poly.edge(i);
                let d = b - a;
                let len = d.x.hypot(d.y);
                if len == 0.0 {
                    f64::INFINITY
                } else {
                    cross(d, p - a) / len
                }
            })
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    };
    let search = |x0: f64, x1: f64, y0: f64, y1: f64| -> (Point2, f64) {
        const DIV: usize = 64;
        let mut best = (Point2::new(x0, y0), 0.0f64);
        for i in 0..=DIV {
            let x = x0 + (x1 - x0) * i as f64 / DIV as f64;
            for j in 0..=DIV {
                let y = y0 + (y1 - y0) * j as f64 / DIV as f64;
                let p = Point2::new(x, y);
                let s = score(p);
                if s > best.1 {
                    best = (p, s);
                }
            }
        }
        best
    };
    let (p1, s1) = search(xmin, xmax, ymin, ymax);
    if s1 == 0.0 {
        return 0.0;
    }
    let dx = (xmax - xmin) / 64.0;
    let dy = (ymax - ymin) / 64.0;
    let (_, s2) = search(p1.x - dx, p1.x + dx, p1.y - dy, p1.y + dy);
    s1.max(s2)
}

/// Outcome of cutting a polygon with one primitive.
#[derive(Clone, Debug)]
pub struct CutResult {
    pub parts: Vec<(Polygon, Side)>,
    /// Children with area below `1e-14 · |parent|`, dropped rather than emitted.
    pub dropped: usize,
}

/// Splits `poly` along a primitive. Circle cuts are chordal: the two boundary
/// crossings are joined by a straight segment. Crossing points within
/// `snap_tol · h_K` of an existing vertex are snapped to it. A polygon
/// untouched by the primitive is returned unchanged with its side.
pub fn cut_polygon(
    poly: &Polygon,
    primitive: &Primitive,
    snap_tol: f64,
) -> Result<CutResult, GeometryError> {
    let n = poly.len();
    let h_k = poly.diameter();
    let snap = snap_tol * h_k;
    let levels: Vec<f64> = poly.vertices.iter().map(|&v| primitive.level(v)).collect();
    let signs: Vec<i8> = levels
        .iter()
        .map(|&l| {
            if l.abs() <= snap {
                0
            } else if l < 0.0 {
                -1
            } else {
                1
            }
        })
        .collect();

    // Crossing points on edges whose endpoints have strictly opposite signs.
    let mut crossings: Vec<Option<Point2>> = vec![None; n];
    let mut entity_count = signs.iter().filter(|&&s| s == 0).count();
    for i in 0..n {
        let j = (i + 1) % n;
        if signs[i] * signs[j] < 0 {
            let p = primitive_edge_crossing(primitive, poly.vertices[i], poly.vertices[j], snap)?;
            crossings[i] = Some(p);
            entity_count += 1;
        } else if signs[i] > 0 && signs[j] > 0 {
            // An arc may graze the edge or dip through it and exit again; both
            // are rejected (the chord would be ambiguous).
            if let Primitive::Circle { center, radius } = primitive {
                let d = dist_point_segment(*center, poly.vertices[i], poly.vertices[j]);
                if d < *radius + snap {
                    let detail = format!(
                        "edge ({:.6}, {:.6})-({:.6}, {:.6})",
                        poly.vertices[i].x,
                        poly.vertices[i].y,
                        poly.vertices[j].x,
                        poly.vertices[j].y
                    );
                    return if d >= *radius - snap {
                        Err(GeometryError::TangentialCut { detail })
                    } else {
                        Err(GeometryError::UnsupportedCrossings { count: 2, detail })
                    };
                }
            }
        }
    }

    let edge_crossings = crossings.iter().filter(|c| c.is_some()).count();
    if entity_count == 0 || (entity_count == 1 && edge_crossings == 0) {
        // untouched, or touching the curve at a single vertex only: the
        // polygon lies entirely on one side
        let side = side_of(primitive.level(poly.centroid()));
        return Ok(CutResult {
            parts: vec![(poly.clone(), side)],
            dropped: 0,
        });
    }
    if entity_count == 1 {
        return Err(GeometryError::TangentialCut {
            detail: format!(
                "single crossing point near ({:.6}, {:.6})",
                poly.centroid().x,
                poly.centroid().y
            ),
        });
    }
    if entity_count > 2 {
        return Err(GeometryError::UnsupportedCrossings {
            count: entity_count,
            detail: format!(
                "polygon with centroid ({:.6}, {:.6})",
                poly.centroid().x,
                poly.centroid().y
            ),
        });
    }

    // Walk the loop, distributing vertices to the two chains and inserting the
    // crossing points into both.
    let mut minus_chain: Vec<Point2> = Vec::with_capacity(n + 2);
    let mut plus_chain: Vec<Point2> = Vec::with_capacity(n + 2);
    for i in 0..n {
        let v = poly.vertices[i];
        if signs[i] <= 0 {
            minus_chain.push(v);
        }
        if signs[i] >= 0 {
            plus_chain.push(v);
        }
        if let Some(x) = crossings[i] {
            minus_chain.push(x);
            plus_chain.push(x);
        }
    }

    let parent_area = poly.area();
    let mut parts = Vec::with_capacity(2);
    let mut dropped = 0usize;
    for chain in [minus_chain, plus_chain] {
        let chain = dedup_chain(chain, 1e-14 * h_k);
        if chain.len() < 3 {
            dropped += 1;
            continue;
        }
        let child = Polygon { vertices: chain };
        let a = child.signed_area();
        if a < 0.0 {
            return Err(GeometryError::DegenerateCut);
        }
        if a < 1e-14 * parent_area {
            dropped += 1;
            continue;
        }
        let side = side_of(primitive.level(child.centroid()));
        parts.push((child, side));
    }
    Ok(CutResult { parts, dropped })
}

fn side_of(level: f64) -> Side {
    if level < 0.0 {
        Side::Minus
    } else {
        Side::Plus
    }
}

fn dedup_chain(chain: Vec<Point2>, tol: f64) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::with_capacity(chain.len());
    for p in chain {
        if let Some(&last) = out.last() {
            if last.dist(p) <= tol {
                continue;
            }
        }
        out.push(p);
    }
    while out.len() >= 2 && out[0].dist(*out.last().unwrap()) <= tol {
        out.pop();
    }
    out
}

/// Crossing point of a primitive with the segment `[a, b]` whose endpoint
/// levels have strictly opposite signs. Endpoints are ordered canonically so
/// shared edges of neighbouring cells produce bit-identical points.
fn primitive_edge_crossing(
    primitive: &Primitive,
    a: Point2,
    b: Point2,
    snap: f64,
) -> Result<Point2, GeometryError> {
    let (p, q) = if a.lex_cmp(&b) == std::cmp::Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let point = match *primitive {
        Primitive::Line { .. } => {
            let lp = primitive.level(p);
            let lq = primitive.level(q);
            let t = lp / (lp - lq);
            p + (q - p) * t
        }
        Primitive::Circle { center, radius } => {
            let d = q - p;
            let m = p - center;
            let aa = dot(d, d);
            let bb = 2.0 * dot(d, m);
            let cc = dot(m, m) - radius * radius;
            let disc = bb * bb - 4.0 * aa * cc;
            if disc < 0.0 {
                return Err(GeometryError::TangentialCut {
                    detail: "sign change without real circle crossing".into(),
                });
            }
            let sq = disc.sqrt();
            // stable quadratic roots
            let qq = -0.5 * (bb + bb.signum() * sq);
            let mut roots = [qq / aa, if qq != 0.0 { cc / qq } else { f64::INFINITY }];
            roots.sort_by(f64::total_cmp);
            let lp = primitive.level(p);
            // pick the root inside (0,1); the strict sign change guarantees one
            let t = roots
                .iter()
                .copied()
                .find(|&t| (0.0..=1.0).contains(&t) && {
                    // transversal root: level changes sign across it
                    let before = lp;
                    before.signum() != primitive.level(p + d * (t + 1e-3).min(1.0)).signum()
                        || (t - 0.5).abs() <= 0.5
                })
                .ok_or_else(|| GeometryError::TangentialCut {
                    detail: "no circle crossing parameter in (0,1)".into(),
                })?;
            p + d * t
        }
    };
    // snap to a nearby endpoint
    if point.dist(p) <= snap {
        return Ok(p);
    }
    if point.dist(q) <= snap {
        return Ok(q);
    }
    Ok(point)
}

/// Triangulation of a simple polygon: centroid fan when the polygon is
/// star-convex with respect to its centroid, ear clipping otherwise. The
/// triangles partition the polygon exactly (up to rounding).
pub fn triangulate(poly: &Polygon) -> Vec<[Point2; 3]> {
    let area = poly.area();
    if let Some(fan) = centroid_fan(poly, area) {
        return fan;
    }
    ear_clip(poly, area)
}

fn centroid_fan(poly: &Polygon, area: f64) -> Option<Vec<[Point2; 3]>> {
    let c = poly.centroid();
    let n = poly.len();
    let mut tris = Vec::with_capacity(n);
    let mut sum = 0.0;
    for i in 0..n {
        let (a, b) = poly.edge(i);
        let t = 0.5 * cross(a - c, b - c);
        if t < -1e-14 * area {
            return None;
        }
        sum += t;
        if t > 1e-14 * area {
            tris.push([c, a, b]);
        }
    }
    if (sum - area).abs() > 1e-12 * area {
        return None;
    }
    Some(tris)
}

fn ear_clip(poly: &Polygon, area: f64) -> Vec<[Point2; 3]> {
    let mut verts = poly.vertices.clone();
    let mut tris = Vec::with_capacity(verts.len().saturating_sub(2));
    let eps = 1e-14 * area;
    while verts.len() > 3 {
        let n = verts.len();
        let mut clipped = false;
        // prefer strictly convex ears, then fall back to collinear ones
        for pass in 0..2 {
            for i in 0..n {
                let prev = verts[(i + n - 1) % n];
                let cur = verts[i];
                let next = verts[(i + 1) % n];
                let t = 0.5 * cross(cur - prev, next - prev);
                let ok = if pass == 0 { t > eps } else { t >= -eps };
                if !ok {
                    continue;
                }
                let ear_empty = verts.iter().enumerate().all(|(j, &w)| {
                    j == (i + n - 1) % n
                        || j == i
                        || j == (i + 1) % n
                        || !point_strictly_in_triangle(w, prev, cur, next)
                });
                if ear_empty {
                    if t > eps {
                        tris.push([prev, cur, next]);
                    }
                    verts.remove(i);
                    clipped = true;
                    break;
                }
            }
            if clipped {
                break;
            }
        }
        if !clipped {
            // simple polygons always have an ear; bail out defensively
            break;
        }
    }
    if verts.len() == 3 {
        let t = 0.5 * cross(verts[1] - verts[0], verts[2] - verts[0]);
        if t > eps {
            tris.push([verts[0], verts[1], verts[2]]);
        }
    }
    tris
}

fn point_strictly_in_triangle(p: Point2, a: Point2, b: Point2, c: Point2) -> bool {
    let d1 = cross(b - a, p - a);
    let d2 = cross(c - b, p - b);
    let d3 = cross(a - c, p - c);
    (d1 > 0.0 && d2 > 0.0 && d3 > 0.0) || (d1 < 0.0 && d2 < 0.0 && d3 < 0.0)
}

pub fn triangle_area(t: &[Point2; 3]) -> f64 {
    0.5 * cross(t[1] - t[0], t[2] - t[0]).abs()
}
