//! Interface-fitted polygonal meshes built by cutting a Cartesian background
//! grid, plus topology and DoF numbering.
//!
//! Every primitive cuts every cell it crosses; children inherit hanging
//! vertices from their neighbours so the global edge space stays conforming
//! (a Cartesian neighbour of a cut cell becomes a 5-gon). Cells are never
//! merged or smoothed — arbitrarily thin slivers are kept. Entity numbering
//! is deterministic: vertices lexicographic by coordinate, edges by vertex
//! pair, cells by centroid with construction order as tie-break, so repeated
//! runs are bit-reproducible.

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{
    cut_polygon, level_eval, GeometryError, InterfaceSpec, Point2, Polygon, Primitive, RegionTag,
};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("cutting background cell ({i}, {j}) failed: {source}; perturbing the resolution usually helps")]
    CutFailed {
        i: usize,
        j: usize,
        #[source]
        source: GeometryError,
    },
    #[error("mesh topology is inconsistent: {0}")]
    InvalidTopology(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Axis-aligned rectangular domain with a Cartesian background resolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Self {
        Self {
            x0,
            x1,
            y0,
            y1,
            nx,
            ny,
        }
    }

    /// Square domain [lo, hi]² with n cells per side.
    pub fn square(lo: f64, hi: f64, n: usize) -> Self {
        Self::new(lo, hi, lo, hi, n, n)
    }

    /// Grid with cell size `h = 2^-level` on the given rectangle; the extents
    /// must be integer multiples of h.
    pub fn dyadic(x0: f64, x1: f64, y0: f64, y1: f64, level: u32) -> Result<Self, MeshError> {
        let h = 0.5f64.powi(level as i32);
        let nx = (x1 - x0) / h;
        let ny = (y1 - y0) / h;
        if (nx - nx.round()).abs() > 1e-9 || (ny - ny.round()).abs() > 1e-9 {
            return Err(MeshError::InvalidGrid(format!(
                "domain ({x0}, {x1}) × ({y0}, {y1}) is not a multiple of h = 2^-{level}"
            )));
        }
        Ok(Self::new(
            x0,
            x1,
            y0,
            y1,
            nx.round() as usize,
            ny.round() as usize,
        ))
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (
            (self.x1 - self.x0) / self.nx as f64,
            (self.y1 - self.y0) / self.ny as f64,
        )
    }

    fn validate(&self) -> Result<(), MeshError> {
        if !(self.x1 > self.x0 && self.y1 > self.y0) {
            return Err(MeshError::InvalidGrid("degenerate domain".into()));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(MeshError::InvalidGrid("zero cells".into()));
        }
        Ok(())
    }
}

/// Mesh edge with canonical orientation from vertex `a` to `b`, `a < b`.
#[derive(Clone, Copy, Debug)]
pub struct MeshEdge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// One polygonal cell: a CCW vertex loop, the matching edge loop with
/// orientation signs (+1 when the loop runs a→b), and cached metrics.
#[derive(Clone, Debug)]
pub struct MeshCell {
    pub vertices: Vec<usize>,
    pub edges: Vec<(usize, i8)>,
    pub tag: RegionTag,
    pub area: f64,
    pub diameter: f64,
    pub centroid: Point2,
    pub background: (usize, usize),
}

/// Interface-fitted polygonal cell complex.
#[derive(Clone, Debug)]
pub struct PolyMesh {
    pub grid: GridSpec,
    pub vertices: Vec<Point2>,
    pub edges: Vec<MeshEdge>,
    pub cells: Vec<MeshCell>,
    /// Per edge: true when the edge lies on ∂Ω.
    pub boundary_edge: Vec<bool>,
    /// Per edge: true when the edge separates cells with different tags (Γ_h).
    pub interface_edge: Vec<bool>,
    /// Incident cells per edge (boundary edges have one).
    pub edge_cells: Vec<[Option<usize>; 2]>,
    pub h_max: f64,
    /// Records of dropped degenerate slivers and similar non-fatal events.
    pub warnings: Vec<String>,
    cells_by_background: Vec<Vec<usize>>,
}

impl PolyMesh {
    /// A mesh consisting of one polygonal cell; handy for element-level tests
    /// and oracles.
    pub fn from_single_polygon(poly: Polygon, tag: RegionTag) -> Self {
        let n = poly.len();
        let vertices = poly.vertices.clone();
        let mut edges = Vec::with_capacity(n);
        let mut cell_edges = Vec::with_capacity(n);
        for s in 0..n {
            let (va, vb) = (s, (s + 1) % n);
            let key = (va.min(vb), va.max(vb));
            edges.push(MeshEdge {
                a: key.0,
                b: key.1,
                length: vertices[key.0].dist(vertices[key.1]),
            });
            cell_edges.push((s, if va < vb { 1i8 } else { -1i8 }));
        }
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in &vertices {
            xmin = xmin.min(v.x);
            xmax = xmax.max(v.x);
            ymin = ymin.min(v.y);
            ymax = ymax.max(v.y);
        }
        let cell = MeshCell {
            vertices: (0..n).collect(),
            edges: cell_edges,
            tag,
            area: poly.area(),
            diameter: poly.diameter(),
            centroid: poly.centroid(),
            background: (0, 0),
        };
        let h_max = cell.diameter;
        PolyMesh {
            grid: GridSpec::new(xmin, xmax, ymin, ymax, 1, 1),
            vertices,
            edges,
            boundary_edge: vec![true; n],
            interface_edge: vec![false; n],
            edge_cells: vec![[Some(0), None]; n],
            cells: vec![cell],
            h_max,
            warnings: Vec::new(),
            cells_by_background: vec![vec![0]],
        }
    }

    pub fn cell_polygon(&self, k: usize) -> Polygon {
        Polygon {
            vertices: self.cells[k]
                .vertices
                .iter()
                .map(|&v| self.vertices[v])
                .collect(),
        }
    }

    /// Number of background cells that were split by the interface.
    pub fn n_cut_cells(&self) -> usize {
        let mut per_background: HashMap<(usize, usize), usize> = HashMap::new();
        for c in &self.cells {
            *per_background.entry(c.background).or_insert(0) += 1;
        }
        per_background.values().filter(|&&n| n > 1).count()
    }

    fn background_index(&self, p: Point2) -> (usize, usize) {
        let (hx, hy) = self.grid.cell_size();
        let i = (((p.x - self.grid.x0) / hx).floor() as isize).clamp(0, self.grid.nx as isize - 1);
        let j = (((p.y - self.grid.y0) / hy).floor() as isize).clamp(0, self.grid.ny as isize - 1);
        (i as usize, j as usize)
    }

    /// Cell ids whose polygon intersects the closed ball B(center, radius).
    pub fn cells_near(&self, center: Point2, radius: f64) -> Vec<usize> {
        let (i0, j0) = self.background_index(Point2::new(center.x - radius, center.y - radius));
        let (i1, j1) = self.background_index(Point2::new(center.x + radius, center.y + radius));
        let mut out = Vec::new();
        for i in i0..=i1 {
            for j in j0..=j1 {
                for &k in &self.cells_by_background[j * self.grid.nx + i] {
                    let poly = self.cell_polygon(k);
                    let dist = if poly.contains(center, 0.0) {
                        0.0
                    } else {
                        (0..poly.len())
                            .map(|e| {
                                let (a, b) = poly.edge(e);
                                crate::geometry::dist_point_segment(center, a, b)
                            })
                            .fold(f64::INFINITY, f64::min)
                    };
                    if dist <= radius {
                        out.push(k);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Locates the cell containing `p` via the background bin grid.
    pub fn locate(&self, p: Point2) -> Option<usize> {
        let (i, j) = self.background_index(p);
        let scale = self.h_max;
        for &k in &self.cells_by_background[j * self.grid.nx + i] {
            if self.cell_polygon(k).contains(p, 1e-12 * scale) {
                return Some(k);
            }
        }
        // tolerant second pass over the 3×3 neighbourhood
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                let ii = i as isize + di;
                let jj = j as isize + dj;
                if ii < 0 || jj < 0 || ii >= self.grid.nx as isize || jj >= self.grid.ny as isize {
                    continue;
                }
                for &k in &self.cells_by_background[jj as usize * self.grid.nx + ii as usize] {
                    if self.cell_polygon(k).contains(p, 1e-9 * scale) {
                        return Some(k);
                    }
                }
            }
        }
        None
    }

    /// Maximum over interface edges of the distance from the edge to the true
    /// interface, divided by h²: the fitted constant of the mismatch strip.
    pub fn mismatch_strip_ratio(&self, spec: &InterfaceSpec) -> f64 {
        let (hx, hy) = self.grid.cell_size();
        let h = hx.max(hy);
        let mut worst = 0.0f64;
        for (e, edge) in self.edges.iter().enumerate() {
            if !self.interface_edge[e] {
                continue;
            }
            let a = self.vertices[edge.a];
            let b = self.vertices[edge.b];
            // distance from the chord to the nearest primitive, sampled
            let mut dist = 0.0f64;
            for s in 0..=8 {
                let t = s as f64 / 8.0;
                let p = a + (b - a) * t;
                let d = spec
                    .primitives
                    .iter()
                    .map(|pr| pr.level(p).abs())
                    .fold(f64::INFINITY, f64::min);
                dist = dist.max(d);
            }
            worst = worst.max(dist);
        }
        worst / (h * h)
    }
}

/// One scalar unknown per edge (∫_e v·t ds) and one per vertex for the
/// auxiliary nodal space, with boundary masks for the essential conditions.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub n_edge_dofs: usize,
    pub n_vertex_dofs: usize,
    pub boundary_edge: Vec<bool>,
    pub boundary_vertex: Vec<bool>,
}

pub fn dof_map(mesh: &PolyMesh) -> DofMap {
    let mut boundary_vertex = vec![false; mesh.vertices.len()];
    for (e, edge) in mesh.edges.iter().enumerate() {
        if mesh.boundary_edge[e] {
            boundary_vertex[edge.a] = true;
            boundary_vertex[edge.b] = true;
        }
    }
    DofMap {
        n_edge_dofs: mesh.edges.len(),
        n_vertex_dofs: mesh.vertices.len(),
        boundary_edge: mesh.boundary_edge.clone(),
        boundary_vertex,
    }
}

/// Deduplicating vertex pool with 1e-12 absolute tolerance.
struct VertexPool {
    map: HashMap<(i64, i64), Vec<usize>>,
    points: Vec<Point2>,
}

const VERTEX_TOL: f64 = 1e-12;

impl VertexPool {
    fn new() -> Self {
        Self {
            map: HashMap::new(),
            points: Vec::new(),
        }
    }

    fn key(p: Point2) -> (i64, i64) {
        (
            (p.x / VERTEX_TOL).round() as i64,
            (p.y / VERTEX_TOL).round() as i64,
        )
    }

    fn insert(&mut self, p: Point2) -> usize {
        let (kx, ky) = Self::key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.map.get(&(kx + dx, ky + dy)) {
                    for &id in ids {
                        if self.points[id].dist(p) <= VERTEX_TOL {
                            return id;
                        }
                    }
                }
            }
        }
        let id = self.points.len();
        self.points.push(p);
        self.map.entry((kx, ky)).or_default().push(id);
        id
    }
}

/// Builds the interface-fitted mesh: cuts every background cell with every
/// primitive in turn, deduplicates shared cut vertices, stitches hanging
/// vertices into neighbouring cell loops, and assigns region tags from the
/// region rule at child centroids.
pub fn build_cut_mesh(
    grid: &GridSpec,
    spec: &InterfaceSpec,
    snap_tol: f64,
) -> Result<PolyMesh, MeshError> {
    grid.validate()?;
    let xs: Vec<f64> = (0..=grid.nx)
        .map(|i| grid.x0 + (grid.x1 - grid.x0) * i as f64 / grid.nx as f64)
        .collect();
    let ys: Vec<f64> = (0..=grid.ny)
        .map(|j| grid.y0 + (grid.y1 - grid.y0) * j as f64 / grid.ny as f64)
        .collect();

    let mut warnings = Vec::new();
    // (background (i, j), polygon)
    let mut raw_cells: Vec<((usize, usize), Polygon)> = Vec::with_capacity(grid.nx * grid.ny);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let square = Polygon {
                vertices: vec![
                    Point2::new(xs[i], ys[j]),
                    Point2::new(xs[i + 1], ys[j]),
                    Point2::new(xs[i + 1], ys[j + 1]),
                    Point2::new(xs[i], ys[j + 1]),
                ],
            };
            let mut parts = vec![square];
            for prim in &spec.primitives {
                let mut next = Vec::with_capacity(parts.len() + 1);
                for poly in parts {
                    if !bbox_may_cross(prim, &poly) {
                        next.push(poly);
                        continue;
                    }
                    let cut = cut_polygon(&poly, prim, snap_tol)
                        .map_err(|source| MeshError::CutFailed { i, j, source })?;
                    if cut.dropped > 0 {
                        warnings.push(format!(
                            "cell ({i}, {j}): dropped {} degenerate sliver(s)",
                            cut.dropped
                        ));
                    }
                    for (child, _) in cut.parts {
                        next.push(child);
                    }
                }
                parts = next;
            }
            for poly in parts {
                raw_cells.push(((i, j), poly));
            }
        }
    }

    // Global vertex pool (cut points on shared edges are computed canonically,
    // so they dedup exactly).
    let mut pool = VertexPool::new();
    let mut loops: Vec<Vec<usize>> = raw_cells
        .iter()
        .map(|(_, poly)| poly.vertices.iter().map(|&p| pool.insert(p)).collect())
        .collect();

    // Bin vertices by background cell for the hanging-vertex pass.
    let (hx, hy) = grid.cell_size();
    let bin_of = |p: Point2| -> (usize, usize) {
        let i = (((p.x - grid.x0) / hx).floor() as isize).clamp(0, grid.nx as isize - 1) as usize;
        let j = (((p.y - grid.y0) / hy).floor() as isize).clamp(0, grid.ny as isize - 1) as usize;
        (i, j)
    };
    let mut vertex_bins: Vec<Vec<usize>> = vec![Vec::new(); grid.nx * grid.ny];
    for (id, &p) in pool.points.iter().enumerate() {
        let (i, j) = bin_of(p);
        vertex_bins[j * grid.nx + i].push(id);
    }

    // Stitch hanging vertices (e.g. chord endpoints of a cut neighbour) into
    // every cell loop that runs through them.
    let on_segment_tol = 1e-11 * hx.min(hy);
    for (ci, loop_ids) in loops.iter_mut().enumerate() {
        let (bi, bj) = raw_cells[ci].0;
        let mut candidates: Vec<usize> = Vec::new();
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                let ii = bi as isize + di;
                let jj = bj as isize + dj;
                if ii < 0 || jj < 0 || ii >= grid.nx as isize || jj >= grid.ny as isize {
                    continue;
                }
                candidates.extend(&vertex_bins[jj as usize * grid.nx + ii as usize]);
            }
        }
        let mut new_loop: Vec<usize> = Vec::with_capacity(loop_ids.len() + 2);
        let m = loop_ids.len();
        for s in 0..m {
            let va = loop_ids[s];
            let vb = loop_ids[(s + 1) % m];
            new_loop.push(va);
            let a = pool.points[va];
            let b = pool.points[vb];
            let d = b - a;
            let len2 = crate::geometry::dot(d, d);
            let mut on_edge: Vec<(f64, usize)> = Vec::new();
            for &w in &candidates {
                if w == va || w == vb {
                    continue;
                }
                let p = pool.points[w];
                let t = crate::geometry::dot(p - a, d) / len2;
                if t <= 0.0 || t >= 1.0 {
                    continue;
                }
                let foot = a + d * t;
                if foot.dist(p) <= on_segment_tol {
                    on_edge.push((t, w));
                }
            }
            on_edge.sort_by(|x, y| x.0.total_cmp(&y.0));
            on_edge.dedup_by_key(|e| e.1);
            new_loop.extend(on_edge.into_iter().map(|(_, w)| w));
        }
        *loop_ids = new_loop;
    }

    // Deterministic vertex numbering: lexicographic by coordinate.
    let mut order: Vec<usize> = (0..pool.points.len()).collect();
    order.sort_by(|&i, &j| pool.points[i].lex_cmp(&pool.points[j]));
    let mut perm = vec![0usize; pool.points.len()];
    for (new_id, &old_id) in order.iter().enumerate() {
        perm[old_id] = new_id;
    }
    let vertices: Vec<Point2> = order.iter().map(|&i| pool.points[i]).collect();
    for loop_ids in &mut loops {
        for v in loop_ids.iter_mut() {
            *v = perm[*v];
        }
    }

    // Cell order: centroid-lexicographic with construction order as tie-break.
    let centroids: Vec<Point2> = raw_cells.iter().map(|(_, p)| p.centroid()).collect();
    let mut cell_order: Vec<usize> = (0..raw_cells.len()).collect();
    cell_order.sort_by(|&i, &j| centroids[i].lex_cmp(&centroids[j]).then(i.cmp(&j)));

    // Edge table keyed by canonical (min, max) vertex pair.
    let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<MeshEdge> = Vec::new();
    let mut cells: Vec<MeshCell> = Vec::with_capacity(raw_cells.len());
    for &ci in &cell_order {
        let loop_ids = &loops[ci];
        let m = loop_ids.len();
        if m < 3 {
            return Err(MeshError::InvalidTopology(format!(
                "cell in background ({}, {}) degenerated to {m} vertices",
                raw_cells[ci].0 .0, raw_cells[ci].0 .1
            )));
        }
        let mut cell_edges = Vec::with_capacity(m);
        for s in 0..m {
            let va = loop_ids[s];
            let vb = loop_ids[(s + 1) % m];
            if va == vb {
                return Err(MeshError::InvalidTopology("zero-length edge".into()));
            }
            let key = (va.min(vb), va.max(vb));
            let id = *edge_ids.entry(key).or_insert_with(|| {
                edges.push(MeshEdge {
                    a: key.0,
                    b: key.1,
                    length: vertices[key.0].dist(vertices[key.1]),
                });
                edges.len() - 1
            });
            cell_edges.push((id, if va < vb { 1i8 } else { -1i8 }));
        }
        let poly = Polygon {
            vertices: loop_ids.iter().map(|&v| vertices[v]).collect(),
        };
        let tag = if spec.primitives.is_empty() {
            RegionTag::Plus
        } else {
            level_eval(spec, poly.centroid()).1
        };
        cells.push(MeshCell {
            vertices: loop_ids.clone(),
            edges: cell_edges,
            tag,
            area: poly.area(),
            diameter: poly.diameter(),
            centroid: poly.centroid(),
            background: raw_cells[ci].0,
        });
    }

    // Renumber edges deterministically by vertex pair.
    let mut edge_order: Vec<usize> = (0..edges.len()).collect();
    edge_order.sort_by_key(|&e| (edges[e].a, edges[e].b));
    let mut edge_perm = vec![0usize; edges.len()];
    for (new_id, &old_id) in edge_order.iter().enumerate() {
        edge_perm[old_id] = new_id;
    }
    let edges: Vec<MeshEdge> = edge_order.iter().map(|&e| edges[e]).collect();
    for cell in &mut cells {
        for (e, _) in cell.edges.iter_mut() {
            *e = edge_perm[*e];
        }
    }

    // Incidence, boundary and interface flags. Interior edges must be
    // traversed with opposite signs by their two cells.
    let mut edge_cells: Vec<[Option<usize>; 2]> = vec![[None, None]; edges.len()];
    let mut first_sign: Vec<i8> = vec![0; edges.len()];
    for (k, cell) in cells.iter().enumerate() {
        for &(e, sign) in &cell.edges {
            if edge_cells[e][0].is_none() {
                edge_cells[e][0] = Some(k);
                first_sign[e] = sign;
            } else if edge_cells[e][1].is_none() {
                if first_sign[e] * sign != -1 {
                    return Err(MeshError::InvalidTopology(format!(
                        "edge {e} is traversed with the same orientation by two cells"
                    )));
                }
                edge_cells[e][1] = Some(k);
            } else {
                return Err(MeshError::InvalidTopology(format!(
                    "edge {e} referenced by more than two cells"
                )));
            }
        }
    }
    let boundary_edge: Vec<bool> = edge_cells.iter().map(|c| c[1].is_none()).collect();
    let interface_edge: Vec<bool> = edge_cells
        .iter()
        .map(|c| match (c[0], c[1]) {
            (Some(k1), Some(k2)) => cells[k1].tag != cells[k2].tag,
            _ => false,
        })
        .collect();

    // Boundary edges must lie on ∂Ω.
    let tol = 1e-9 * hx.min(hy);
    for (e, edge) in edges.iter().enumerate() {
        if !boundary_edge[e] {
            continue;
        }
        let on_side = |p: Point2| {
            (p.x - grid.x0).abs() <= tol
                || (p.x - grid.x1).abs() <= tol
                || (p.y - grid.y0).abs() <= tol
                || (p.y - grid.y1).abs() <= tol
        };
        let a = vertices[edge.a];
        let b = vertices[edge.b];
        if !(on_side(a) && on_side(b)) {
            return Err(MeshError::InvalidTopology(format!(
                "single-cell edge ({:.8}, {:.8})-({:.8}, {:.8}) is not on the domain boundary",
                a.x, a.y, b.x, b.y
            )));
        }
    }

    // Euler relation for a simply connected cell partition.
    let euler = vertices.len() as i64 - edges.len() as i64 + cells.len() as i64;
    if euler != 1 {
        return Err(MeshError::InvalidTopology(format!(
            "Euler relation violated: V - E + C = {euler}, expected 1"
        )));
    }

    let mut cells_by_background = vec![Vec::new(); grid.nx * grid.ny];
    for (k, cell) in cells.iter().enumerate() {
        let (i, j) = cell.background;
        cells_by_background[j * grid.nx + i].push(k);
    }
    let h_max = cells.iter().map(|c| c.diameter).fold(0.0f64, f64::max);

    Ok(PolyMesh {
        grid: *grid,
        vertices,
        edges,
        cells,
        boundary_edge,
        interface_edge,
        edge_cells,
        h_max,
        warnings,
        cells_by_background,
    })
}

/// Cheap test: can the primitive possibly cross this polygon?
fn bbox_may_cross(prim: &Primitive, poly: &Polygon) -> bool {
    match prim {
        Primitive::Line { .. } => {
            let mut has_neg = false;
            let mut has_pos = false;
            for &v in &poly.vertices {
                let l = prim.level(v);
                has_neg |= l < 0.0;
                has_pos |= l >= 0.0;
            }
            has_neg && has_pos
        }
        Primitive::Circle { center, radius } => {
            let mut dmin = f64::INFINITY;
            let mut dmax = 0.0f64;
            for i in 0..poly.len() {
                let (a, b) = poly.edge(i);
                dmin = dmin.min(crate::geometry::dist_point_segment(*center, a, b));
                dmax = dmax.max(center.dist(a));
            }
            if poly.contains(*center, 0.0) {
                dmin = 0.0;
            }
            let guard = 1e-6 * radius;
            dmin <= radius + guard && dmax >= radius - guard
        }
    }
}
