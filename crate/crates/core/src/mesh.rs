//! Structured triangulations of the supported planar domains.
//!
//! Every generator produces meshes that are invariant under the symmetry
//! group of the domain (reflections of rectangles about their midlines, the
//! diagonal reflections of the square, the reflection of isosceles triangles
//! about their height, the reflections of the disk about the x1 axis). Half
//! domains are obtained by restricting the full mesh to one side of a line
//! that is made of mesh edges, so the half mesh is exactly one half of the
//! full one.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Boundary classification of a mesh vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Interior,
    Dirichlet,
    Natural,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Interior => "interior",
            BoundaryTag::Dirichlet => "dirichlet",
            BoundaryTag::Natural => "natural",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "interior" | "I" | "0" => Some(BoundaryTag::Interior),
            "dirichlet" | "D" | "1" => Some(BoundaryTag::Dirichlet),
            "natural" | "N" | "2" => Some(BoundaryTag::Natural),
            _ => None,
        }
    }
}

/// Line along which a domain is cut in half.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutAxis {
    /// Vertical line through the center of a rectangle; the left half is kept.
    Vertical,
    /// Horizontal symmetry line. Rectangles keep the lower half; disks and
    /// triangles are cut along x2 = 0 and keep the upper half.
    Horizontal,
    /// Diagonal x1 = x2 of a square; the part below the diagonal is kept.
    Diagonal,
}

/// Boundary condition imposed on the cut segment of a half domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutCondition {
    Dirichlet,
    Natural,
}

/// The planar domains supported by the mesh generators.
///
/// Conventions: the disk is centered at the origin, rectangles are
/// `(0,a) x (0,b)`, isosceles triangles have their base on the x2 axis with
/// vertices `(0,-base/2)`, `(0,base/2)`, `(height,0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainSpec {
    Disk {
        radius: f64,
    },
    Rectangle {
        a: f64,
        b: f64,
    },
    IsoTriangle {
        base: f64,
        height: f64,
    },
    EquiTriangle {
        side: f64,
    },
    HalfDomain {
        parent: Box<DomainSpec>,
        axis: CutAxis,
        cut: CutCondition,
    },
}

impl DomainSpec {
    pub fn disk(radius: f64) -> Self {
        DomainSpec::Disk { radius }
    }

    pub fn rectangle(a: f64, b: f64) -> Self {
        DomainSpec::Rectangle { a, b }
    }

    pub fn square(side: f64) -> Self {
        DomainSpec::Rectangle { a: side, b: side }
    }

    pub fn iso_triangle(base: f64, height: f64) -> Self {
        DomainSpec::IsoTriangle { base, height }
    }

    pub fn equi_triangle(side: f64) -> Self {
        DomainSpec::EquiTriangle { side }
    }

    pub fn half(self, axis: CutAxis, cut: CutCondition) -> Self {
        DomainSpec::HalfDomain {
            parent: Box::new(self),
            axis,
            cut,
        }
    }

    /// Checks positivity of all lengths and the admissibility of half-domain cuts.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidDomain(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            DomainSpec::Disk { radius } => positive("radius", *radius),
            DomainSpec::Rectangle { a, b } => {
                positive("a", *a)?;
                positive("b", *b)
            }
            DomainSpec::IsoTriangle { base, height } => {
                positive("base", *base)?;
                positive("height", *height)
            }
            DomainSpec::EquiTriangle { side } => positive("side", *side),
            DomainSpec::HalfDomain { parent, axis, .. } => {
                parent.validate()?;
                let ok = match (parent.as_ref(), axis) {
                    (DomainSpec::HalfDomain { .. }, _) => false,
                    (DomainSpec::Rectangle { .. }, CutAxis::Vertical | CutAxis::Horizontal) => {
                        true
                    }
                    (DomainSpec::Rectangle { a, b }, CutAxis::Diagonal) => {
                        (a - b).abs() <= 1e-12 * a.max(*b)
                    }
                    (DomainSpec::Disk { .. }, CutAxis::Horizontal) => true,
                    (
                        DomainSpec::IsoTriangle { .. } | DomainSpec::EquiTriangle { .. },
                        CutAxis::Horizontal,
                    ) => true,
                    _ => false,
                };
                if ok {
                    Ok(())
                } else {
                    Err(Error::InvalidDomain(format!(
                        "cut {axis:?} is not available for {}",
                        parent.name()
                    )))
                }
            }
        }
    }

    /// Short human readable identifier, used in file names and tables.
    pub fn name(&self) -> String {
        match self {
            DomainSpec::Disk { radius } => format!("disk-{radius}"),
            DomainSpec::Rectangle { a, b } => format!("rect-{a}x{b}"),
            DomainSpec::IsoTriangle { base, height } => format!("iso-{base}x{height}"),
            DomainSpec::EquiTriangle { side } => format!("equi-{side}"),
            DomainSpec::HalfDomain { parent, axis, cut } => {
                let ax = match axis {
                    CutAxis::Vertical => "v",
                    CutAxis::Horizontal => "h",
                    CutAxis::Diagonal => "d",
                };
                let c = match cut {
                    CutCondition::Dirichlet => "dir",
                    CutCondition::Natural => "nat",
                };
                format!("{}-half-{ax}-{c}", parent.name())
            }
        }
    }

    /// Equilateral triangles are isosceles triangles with height `side * sqrt(3) / 2`.
    pub(crate) fn normalized(&self) -> DomainSpec {
        match self {
            DomainSpec::EquiTriangle { side } => DomainSpec::IsoTriangle {
                base: *side,
                height: side * 3f64.sqrt() / 2.0,
            },
            other => other.clone(),
        }
    }
}

/// A line `{x : (x - origin) x direction = 0}` used to locate a cut segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutLine {
    pub origin: Point,
    pub direction: Point,
}

impl CutLine {
    fn distance(&self, x: Point) -> f64 {
        let [dx, dy] = self.direction;
        let n = (dx * dx + dy * dy).sqrt();
        ((x[0] - self.origin[0]) * dy - (x[1] - self.origin[1]) * dx).abs() / n
    }

    /// Signed side: positive on the left of the direction vector.
    fn side(&self, x: Point) -> f64 {
        let [dx, dy] = self.direction;
        dx * (x[1] - self.origin[1]) - dy * (x[0] - self.origin[0])
    }
}

/// Conforming triangulation with per-vertex boundary tags.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    tags: Vec<BoundaryTag>,
    natural_cut: Option<CutLine>,
    free_index: Vec<Option<usize>>,
    free_vertices: Vec<usize>,
    h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshMetrics {
    pub h: f64,
    pub n_triangles: usize,
    pub n_free_vertices: usize,
    pub area: f64,
}

impl Mesh {
    /// Builds a mesh from raw data, validating orientation, conformity and
    /// consistency of the boundary tags with the hull.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, tags: Vec<BoundaryTag>) -> Result<Self> {
        Self::with_cut(vertices, triangles, tags, None)
    }

    fn with_cut(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        tags: Vec<BoundaryTag>,
        natural_cut: Option<CutLine>,
    ) -> Result<Self> {
        if tags.len() != vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "{} tags for {} vertices",
                tags.len(),
                vertices.len()
            )));
        }
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has non-positive signed area {area:e}"
                )));
            }
        }
        let on_hull = hull_vertices(vertices.len(), &triangles)?;
        for (v, (&hull, &tag)) in on_hull.iter().zip(&tags).enumerate() {
            match (hull, tag) {
                (true, BoundaryTag::Interior) => {
                    return Err(Error::InvalidMesh(format!("hull vertex {v} tagged interior")))
                }
                (false, BoundaryTag::Dirichlet | BoundaryTag::Natural) => {
                    return Err(Error::InvalidMesh(format!(
                        "interior vertex {v} tagged {}",
                        tag.as_str()
                    )))
                }
                _ => {}
            }
        }
        if !tags.contains(&BoundaryTag::Dirichlet) {
            return Err(Error::InvalidMesh("mesh needs at least one Dirichlet vertex".into()));
        }
        let mut free_index = vec![None; vertices.len()];
        let mut free_vertices = Vec::new();
        for (v, tag) in tags.iter().enumerate() {
            if *tag != BoundaryTag::Dirichlet {
                free_index[v] = Some(free_vertices.len());
                free_vertices.push(v);
            }
        }
        let h = triangles
            .iter()
            .map(|t| circumdiameter(vertices[t[0]], vertices[t[1]], vertices[t[2]]))
            .fold(0.0, f64::max);
        Ok(Mesh {
            vertices,
            triangles,
            tags,
            natural_cut,
            free_index,
            free_vertices,
            h,
        })
    }

    /// Builds a mesh and derives the tags from the hull: vertices interior to
    /// the natural cut segment are `Natural`, all other hull vertices `Dirichlet`.
    fn tagged(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, natural_cut: Option<CutLine>) -> Result<Self> {
        let tags = derive_tags(&vertices, &triangles, natural_cut.as_ref())?;
        Self::with_cut(vertices, triangles, tags, natural_cut)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn tags(&self) -> &[BoundaryTag] {
        &self.tags
    }

    /// Index into the coefficient vector for a vertex, `None` for Dirichlet vertices.
    pub fn free_index(&self, vertex: usize) -> Option<usize> {
        self.free_index[vertex]
    }

    /// Vertex index for every coefficient slot.
    pub fn free_vertices(&self) -> &[usize] {
        &self.free_vertices
    }

    pub fn n_free(&self) -> usize {
        self.free_vertices.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn area(&self) -> f64 {
        // pairwise summation keeps the refined totals reproducible to ~1 ulp
        let areas: Vec<f64> = (0..self.triangles.len()).map(|t| self.triangle_area(t)).collect();
        pairwise_sum(&areas)
    }

    pub fn metrics(&self) -> MeshMetrics {
        MeshMetrics {
            h: self.h,
            n_triangles: self.triangles.len(),
            n_free_vertices: self.free_vertices.len(),
            area: self.area(),
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
    }

    /// Edges with exactly one adjacent triangle, as vertex pairs.
    pub fn boundary_edges(&self) -> Vec<[usize; 2]> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut edges: Vec<[usize; 2]> = count
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|((a, b), _)| [a, b])
            .collect();
        edges.sort_unstable();
        edges
    }

    /// Distance of every vertex to the Dirichlet part of the boundary.
    pub fn distance_to_dirichlet(&self) -> Vec<f64> {
        let segments: Vec<(Point, Point)> = self
            .boundary_edges()
            .into_iter()
            .filter(|[a, b]| {
                self.tags[*a] == BoundaryTag::Dirichlet && self.tags[*b] == BoundaryTag::Dirichlet
            })
            .map(|[a, b]| (self.vertices[a], self.vertices[b]))
            .collect();
        self.vertices
            .iter()
            .zip(&self.tags)
            .map(|(x, tag)| {
                if *tag == BoundaryTag::Dirichlet {
                    0.0
                } else {
                    segments
                        .iter()
                        .map(|(a, b)| point_segment_distance(*x, *a, *b))
                        .fold(f64::INFINITY, f64::min)
                }
            })
            .collect()
    }

    /// Uniform refinement: every triangle is split into four through its edge midpoints.
    pub fn refine(&self) -> Mesh {
        self.refine_with_parents().0
    }

    /// As [`Mesh::refine`], also returning for every fine vertex the two
    /// coarse vertices whose midpoint it is (an old vertex is its own pair).
    pub fn refine_with_parents(&self) -> (Mesh, Vec<[usize; 2]>) {
        let mut vertices = self.vertices.clone();
        let mut parents: Vec<[usize; 2]> = (0..self.vertices.len()).map(|v| [v, v]).collect();
        let mut tags = self.tags.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for t in &self.triangles {
            let mut m = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                m[k] = *midpoint.entry(key).or_insert_with(|| {
                    let (pa, pb) = (self.vertices[a], self.vertices[b]);
                    vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                    parents.push([a, b]);
                    let on_hull = edge_count[&key] == 1;
                    tags.push(midpoint_tag(on_hull, self.tags[a], self.tags[b]));
                    vertices.len() - 1
                });
            }
            // m[0] on edge (t0,t1), m[1] on (t1,t2), m[2] on (t2,t0)
            triangles.push([t[0], m[0], m[2]]);
            triangles.push([m[0], t[1], m[1]]);
            triangles.push([m[2], m[1], t[2]]);
            triangles.push([m[0], m[1], m[2]]);
        }
        if let Some(cut) = self.natural_cut {
            // a cut made of a single coarse edge has Dirichlet endpoints only;
            // re-deriving from geometry tags its new midpoints correctly
            tags = derive_tags(&vertices, &triangles, Some(&cut)).expect("refinement keeps conformity");
        }
        let mesh = Mesh::with_cut(vertices, triangles, tags, self.natural_cut).expect("refinement preserves validity");
        (mesh, parents)
    }

    /// Hash lookup of vertices by coordinates, tolerance relative to the mesh diameter.
    pub fn vertex_locator(&self) -> VertexLocator {
        VertexLocator::new(&self.vertices, 1e-10 * self.diameter().max(1e-300))
    }
}

fn midpoint_tag(on_hull: bool, a: BoundaryTag, b: BoundaryTag) -> BoundaryTag {
    if !on_hull {
        return BoundaryTag::Interior;
    }
    // a hull edge touching a vertex interior to the natural segment lies on that segment
    if a == BoundaryTag::Natural || b == BoundaryTag::Natural {
        BoundaryTag::Natural
    } else {
        BoundaryTag::Dirichlet
    }
}

/// Coordinate hash for matching vertices under isometries.
pub struct VertexLocator {
    cell: f64,
    map: HashMap<(i64, i64), Vec<usize>>,
    points: Vec<Point>,
    tol: f64,
}

impl VertexLocator {
    fn new(points: &[Point], tol: f64) -> Self {
        let cell = 4.0 * tol;
        let mut map: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            map.entry(((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64))
                .or_default()
                .push(i);
        }
        VertexLocator {
            cell,
            map,
            points: points.to_vec(),
            tol,
        }
    }

    pub fn find(&self, x: Point) -> Option<usize> {
        let (ci, cj) = ((x[0] / self.cell).floor() as i64, (x[1] / self.cell).floor() as i64);
        for di in -1..=1 {
            for dj in -1..=1 {
                if let Some(list) = self.map.get(&(ci + di, cj + dj)) {
                    for &i in list {
                        let p = self.points[i];
                        if (p[0] - x[0]).abs() <= self.tol && (p[1] - x[1]).abs() <= self.tol {
                            return Some(i);
                        }
                    }
                }
            }
        }
        None
    }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn circumdiameter(a: Point, b: Point, c: Point) -> f64 {
    let area = signed_area(a, b, c).abs();
    dist(a, b) * dist(b, c) * dist(c, a) / (2.0 * area)
}

fn point_segment_distance(x: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    dist(x, [a[0] + t * d[0], a[1] + t * d[1]])
}

pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Marks hull vertices; fails if an edge is shared by more than two triangles.
fn hull_vertices(n_vertices: usize, triangles: &[[usize; 3]]) -> Result<Vec<bool>> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut hull = vec![false; n_vertices];
    for (&(a, b), &c) in &count {
        match c {
            1 => {
                hull[a] = true;
                hull[b] = true;
            }
            2 => {}
            _ => return Err(Error::InvalidMesh(format!("edge ({a},{b}) shared by {c} triangles"))),
        }
    }
    Ok(hull)
}

fn derive_tags(vertices: &[Point], triangles: &[[usize; 3]], cut: Option<&CutLine>) -> Result<Vec<BoundaryTag>> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let scale = vertices
        .iter()
        .map(|p| p[0].abs().max(p[1].abs()))
        .fold(0.0, f64::max)
        .max(1e-300);
    let on_cut = |v: usize| cut.is_some_and(|c| c.distance(vertices[v]) <= 1e-9 * scale);
    // 0: not on hull, 1: only natural hull edges so far, 2: touches a Dirichlet hull edge
    let mut state = vec![0u8; vertices.len()];
    for (&(a, b), &c) in &count {
        if c > 2 {
            return Err(Error::InvalidMesh(format!("edge ({a},{b}) shared by {c} triangles")));
        }
        if c == 1 {
            let natural = on_cut(a) && on_cut(b);
            for v in [a, b] {
                state[v] = if natural { state[v].max(1) } else { 2 };
            }
        }
    }
    Ok(state
        .into_iter()
        .map(|s| match s {
            0 => BoundaryTag::Interior,
            1 => BoundaryTag::Natural,
            _ => BoundaryTag::Dirichlet,
        })
        .collect())
}

/// Generates a mesh of `spec` with roughly `target_triangle_count` triangles
/// (within a factor 2). The structured generators have fixed count families:
/// `2 nx ny` for rectangles, `6 n^2` for the disk and `2 m^2` for triangles.
pub fn build_domain(spec: &DomainSpec, target_triangle_count: usize) -> Result<Mesh> {
    spec.validate()?;
    if target_triangle_count < 8 {
        return Err(Error::InvalidDomain(format!(
            "target triangle count must be at least 8, got {target_triangle_count}"
        )));
    }
    let spec = spec.normalized();
    match &spec {
        DomainSpec::Rectangle { a, b } => {
            let (nx, ny) = rectangle_cells(*a, *b, target_triangle_count);
            let (v, t) = rectangle_grid(*a, *b, nx, ny);
            Mesh::tagged(v, t, None)
        }
        DomainSpec::Disk { radius } => {
            let n = ((target_triangle_count as f64 / 6.0).sqrt().round() as usize).max(2);
            let (v, t) = hex_disk(*radius, n);
            Mesh::tagged(v, t, None)
        }
        DomainSpec::IsoTriangle { base, height } => {
            let m = ((target_triangle_count as f64 / 2.0).sqrt().round() as usize).max(2);
            let (v, t) = iso_triangle(*base, *height, m);
            Mesh::tagged(v, t, None)
        }
        DomainSpec::EquiTriangle { .. } => unreachable!("normalized away"),
        DomainSpec::HalfDomain { parent, axis, cut } => {
            let parent = parent.normalized();
            let full = build_domain(&parent, 2 * target_triangle_count)?;
            let line = cut_line(&parent, *axis);
            restrict_to_half(&full, line, *cut)
        }
    }
}

fn rectangle_cells(a: f64, b: f64, target: usize) -> (usize, usize) {
    let cells = target as f64 / 2.0;
    let even = |x: f64| (2.0 * (x / 2.0).round()).max(2.0) as usize;
    if (a - b).abs() <= 1e-12 * a.max(b) {
        let n = even(cells.sqrt());
        return (n, n);
    }
    let ny = even((cells * b / a).sqrt());
    let nx = even(cells / ny as f64);
    (nx, ny)
}

/// Rectangle grid; cells in the lower-left and upper-right quadrants are split
/// along the `/` diagonal, the others along `\`, so the triangulation is
/// invariant under both midline reflections (and both diagonals for a square).
fn rectangle_grid(a: f64, b: f64, nx: usize, ny: usize) -> (Vec<Point>, Vec<[usize; 3]>) {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([a * i as f64 / nx as f64, b * j as f64 / ny as f64]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            if (2 * i < nx) == (2 * j < ny) {
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            } else {
                triangles.push([v00, v10, v01]);
                triangles.push([v10, v11, v01]);
            }
        }
    }
    (vertices, triangles)
}

/// Disk from a hexagonal lattice mapped onto concentric rings: ring `k` has
/// `6k` vertices equally spaced in angle at radius `k/n`, so the boundary is
/// the inscribed regular `6n`-gon and the mesh has `6 n^2` triangles.
fn hex_disk(radius: f64, n: usize) -> (Vec<Point>, Vec<[usize; 3]>) {
    let mut vertices = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    for k in 1..=n {
        ring_start.push(vertices.len());
        let r = radius * k as f64 / n as f64;
        for j in 0..6 * k {
            let theta = 2.0 * PI * j as f64 / (6 * k) as f64;
            vertices.push([r * theta.cos(), r * theta.sin()]);
        }
    }
    let id = |k: usize, j: usize| -> usize {
        if k == 0 {
            0
        } else {
            ring_start[k] + j % (6 * k)
        }
    };
    let mut triangles = Vec::with_capacity(6 * n * n);
    let mut push = |t: [usize; 3], vertices: &Vec<Point>| {
        if signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]) > 0.0 {
            triangles.push(t);
        } else {
            triangles.push([t[0], t[2], t[1]]);
        }
    };
    for k in 1..=n {
        for s in 0..6 {
            for t in 0..k {
                push([id(k, s * k + t), id(k, s * k + t + 1), id(k - 1, s * (k - 1) + t)], &vertices);
            }
            for t in 0..k.saturating_sub(1) {
                push(
                    [id(k - 1, s * (k - 1) + t), id(k, s * k + t + 1), id(k - 1, s * (k - 1) + t + 1)],
                    &vertices,
                );
            }
        }
    }
    (vertices, triangles)
}

/// Regular subdivision of a triangle into `m^2` similar triangles.
fn subdivide_triangle(p0: Point, p1: Point, p2: Point, m: usize) -> (Vec<Point>, Vec<[usize; 3]>) {
    let mut vertices = Vec::new();
    let mut index = vec![vec![0usize; m + 1]; m + 1];
    for i in 0..=m {
        for j in 0..=(m - i) {
            let (s, t) = (i as f64 / m as f64, j as f64 / m as f64);
            index[i][j] = vertices.len();
            vertices.push([
                p0[0] + s * (p1[0] - p0[0]) + t * (p2[0] - p0[0]),
                p0[1] + s * (p1[1] - p0[1]) + t * (p2[1] - p0[1]),
            ]);
        }
    }
    let flip = signed_area(p0, p1, p2) < 0.0;
    let mut triangles = Vec::with_capacity(m * m);
    let mut push = |t: [usize; 3]| triangles.push(if flip { [t[0], t[2], t[1]] } else { t });
    for i in 0..m {
        for j in 0..(m - i) {
            push([index[i][j], index[i + 1][j], index[i][j + 1]]);
            if i + j + 1 < m {
                push([index[i + 1][j], index[i + 1][j + 1], index[i][j + 1]]);
            }
        }
    }
    (vertices, triangles)
}

/// Isosceles triangle as two mirrored regular subdivisions of its upper half,
/// so the height x2 = 0 is a mesh line.
fn iso_triangle(base: f64, height: f64, m: usize) -> (Vec<Point>, Vec<[usize; 3]>) {
    let (upper_v, upper_t) = subdivide_triangle([0.0, 0.0], [height, 0.0], [0.0, 0.5 * base], m);
    let tol = 1e-12 * base.max(height);
    let mut vertices = upper_v.clone();
    let mut mirror = vec![0usize; upper_v.len()];
    for (i, p) in upper_v.iter().enumerate() {
        if p[1].abs() <= tol {
            mirror[i] = i;
        } else {
            mirror[i] = vertices.len();
            vertices.push([p[0], -p[1]]);
        }
    }
    let mut triangles = upper_t.clone();
    for t in &upper_t {
        // reflection reverses orientation
        triangles.push([mirror[t[0]], mirror[t[2]], mirror[t[1]]]);
    }
    (vertices, triangles)
}

fn cut_line(parent: &DomainSpec, axis: CutAxis) -> CutLine {
    match (parent, axis) {
        (DomainSpec::Rectangle { a, b }, CutAxis::Vertical) => CutLine {
            origin: [0.5 * a, 0.0],
            // left of upward direction is x1 < a/2
            direction: [0.0, *b],
        },
        (DomainSpec::Rectangle { a, b }, CutAxis::Horizontal) => CutLine {
            origin: [0.0, 0.5 * b],
            // left of the leftward direction is x2 < b/2
            direction: [-a, 0.0],
        },
        (DomainSpec::Rectangle { a, .. }, CutAxis::Diagonal) => CutLine {
            origin: [0.0, 0.0],
            // left of (-1,-1) is x2 < x1
            direction: [-a, -a],
        },
        (_, CutAxis::Horizontal) => CutLine {
            origin: [0.0, 0.0],
            direction: [1.0, 0.0],
        },
        _ => unreachable!("validated before"),
    }
}

fn restrict_to_half(full: &Mesh, line: CutLine, cut: CutCondition) -> Result<Mesh> {
    let scale = full.diameter();
    let tol = 1e-9 * scale;
    let mut keep = Vec::new();
    for t in full.triangles() {
        let sides: Vec<f64> = t.iter().map(|&v| line.side(full.vertices[v])).collect();
        let centroid_side = sides.iter().sum::<f64>() / 3.0;
        if centroid_side > 0.0 {
            if sides.iter().any(|&s| s < -tol * scale) {
                return Err(Error::InvalidMesh("cut line is not a mesh line".into()));
            }
            keep.push(*t);
        }
    }
    let mut map = vec![usize::MAX; full.vertices.len()];
    let mut vertices = Vec::new();
    for t in &keep {
        for &v in t {
            if map[v] == usize::MAX {
                map[v] = vertices.len();
                vertices.push(full.vertices[v]);
            }
        }
    }
    let triangles: Vec<[usize; 3]> = keep.iter().map(|t| [map[t[0]], map[t[1]], map[t[2]]]).collect();
    let natural = match cut {
        CutCondition::Natural => Some(line),
        CutCondition::Dirichlet => None,
    };
    Mesh::tagged(vertices, triangles, natural)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_tag(mesh: &Mesh, tag: BoundaryTag) -> usize {
        mesh.tags().iter().filter(|&&t| t == tag).count()
    }

    #[test]
    fn unit_square_minimal_grid() {
        let mesh = build_domain(&DomainSpec::square(1.0), 8).unwrap();
        assert_eq!(mesh.triangles().len(), 8);
        assert_eq!(count_tag(&mesh, BoundaryTag::Interior), 1);
        assert_eq!(mesh.n_free(), 1);
        assert_eq!(mesh.area(), 1.0);
        let fine = mesh.refine();
        assert_eq!(fine.triangles().len(), 32);
        assert_eq!(count_tag(&fine, BoundaryTag::Interior), 9);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(matches!(
            build_domain(&DomainSpec::rectangle(0.0, 1.0), 100),
            Err(Error::InvalidDomain(_))
        ));
        assert!(build_domain(&DomainSpec::disk(-1.0), 100).is_err());
        assert!(build_domain(&DomainSpec::square(1.0), 4).is_err());
        let bad = DomainSpec::rectangle(2.0, 1.0).half(CutAxis::Diagonal, CutCondition::Dirichlet);
        assert!(build_domain(&bad, 100).is_err());
        let nested = DomainSpec::square(1.0)
            .half(CutAxis::Vertical, CutCondition::Dirichlet)
            .half(CutAxis::Vertical, CutCondition::Dirichlet);
        assert!(nested.validate().is_err());
    }

    #[test]
    fn counts_within_factor_two() {
        let specs = [
            DomainSpec::disk(1.0),
            DomainSpec::rectangle(2.0, 1.75),
            DomainSpec::iso_triangle(1.0, 1.0),
            DomainSpec::iso_triangle(1.0, 0.75),
            DomainSpec::equi_triangle(1.0),
        ];
        for spec in &specs {
            for target in [100usize, 5000, 20000] {
                let n = build_domain(spec, target).unwrap().triangles().len();
                assert!(n * 2 >= target && n <= 2 * target, "{spec:?} {target} -> {n}");
            }
        }
    }

    #[test]
    fn disk_polygon_area() {
        let mesh = build_domain(&DomainSpec::disk(1.0), 68_608).unwrap();
        let n = mesh.triangles().len();
        assert!(n * 2 >= 68_608 && n <= 2 * 68_608);
        let sides = mesh.boundary_edges().len() as f64;
        let polygon = 0.5 * sides * (2.0 * PI / sides).sin();
        assert!((mesh.area() - polygon).abs() < 1e-10);
        assert!((mesh.area() - PI).abs() / PI < 1e-3);
        // boundary vertex count grows like sqrt(n_triangles)
        assert!((sides - (6.0 * n as f64).sqrt()).abs() < 1.0);
    }

    #[test]
    fn refinement_conserves_area_and_halves_h() {
        for spec in [DomainSpec::rectangle(2.0, 1.75), DomainSpec::disk(1.0), DomainSpec::iso_triangle(1.0, 0.75)] {
            let mesh = build_domain(&spec, 300).unwrap();
            let twice = mesh.refine().refine();
            assert_eq!(twice.triangles().len(), 16 * mesh.triangles().len());
            assert!((twice.area() - mesh.area()).abs() <= 1e-12 * mesh.area());
            assert!((twice.h() - 0.25 * mesh.h()).abs() <= 1e-9 * mesh.h());
        }
    }

    #[test]
    fn hull_edges_single_and_interior_edges_double() {
        let mesh = build_domain(&DomainSpec::disk(1.0), 600).unwrap();
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in mesh.triangles() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        assert!(count.values().all(|&c| c == 1 || c == 2));
        for [a, b] in mesh.boundary_edges() {
            assert_eq!(mesh.tags()[a], BoundaryTag::Dirichlet);
            assert_eq!(mesh.tags()[b], BoundaryTag::Dirichlet);
            let r = |v: usize| (mesh.vertices()[v][0].powi(2) + mesh.vertices()[v][1].powi(2)).sqrt();
            assert!((r(a) - 1.0).abs() < 1e-12 && (r(b) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn natural_half_triangle_tags() {
        let spec = DomainSpec::iso_triangle(1.0, 1.0).half(CutAxis::Horizontal, CutCondition::Natural);
        let mesh = build_domain(&spec, 800).unwrap();
        let full = build_domain(&DomainSpec::iso_triangle(1.0, 1.0), 1600).unwrap();
        assert_eq!(2 * mesh.triangles().len(), full.triangles().len());
        let hull: std::collections::HashSet<usize> = mesh.boundary_edges().into_iter().flatten().collect();
        for v in 0..mesh.vertices().len() {
            let x = mesh.vertices()[v];
            let interior_to_cut = x[1].abs() < 1e-14 && x[0] > 1e-14 && x[0] < 1.0 - 1e-14;
            let expected = if !hull.contains(&v) {
                BoundaryTag::Interior
            } else if interior_to_cut {
                BoundaryTag::Natural
            } else {
                BoundaryTag::Dirichlet
            };
            assert_eq!(mesh.tags()[v], expected, "vertex {v} at {x:?}");
        }
        // refinement keeps the same tagging rule
        let fine = mesh.refine();
        let natural = count_tag(&fine, BoundaryTag::Natural);
        assert_eq!(natural, 2 * count_tag(&mesh, BoundaryTag::Natural) + 1);
    }

    #[test]
    fn single_edge_natural_cut_refines_correctly() {
        let spec = DomainSpec::square(2.0).half(CutAxis::Vertical, CutCondition::Natural);
        let mesh = build_domain(&spec, 8).unwrap();
        let fine = mesh.refine();
        let on_cut_interior = fine
            .vertices()
            .iter()
            .zip(fine.tags())
            .filter(|(x, _)| (x[0] - 1.0).abs() < 1e-14 && x[1] > 1e-14 && x[1] < 2.0 - 1e-14)
            .collect::<Vec<_>>();
        assert!(!on_cut_interior.is_empty());
        assert!(on_cut_interior.iter().all(|(_, t)| **t == BoundaryTag::Natural));
    }

    #[test]
    fn half_domains_are_halves() {
        let cases = [
            (DomainSpec::square(2.0), CutAxis::Diagonal),
            (DomainSpec::square(2.0), CutAxis::Vertical),
            (DomainSpec::rectangle(2.0, 1.75), CutAxis::Horizontal),
            (DomainSpec::disk(1.0), CutAxis::Horizontal),
            (DomainSpec::equi_triangle(1.0), CutAxis::Horizontal),
        ];
        for (parent, axis) in cases {
            let full = build_domain(&parent, 2000).unwrap();
            let half = build_domain(&parent.clone().half(axis, CutCondition::Dirichlet), 1000).unwrap();
            assert!((2.0 * half.area() - full.area()).abs() < 1e-12 * full.area(), "{parent:?} {axis:?}");
        }
    }

    #[test]
    fn meshes_are_reflection_invariant() {
        let check = |mesh: &Mesh, map: &dyn Fn(Point) -> Point| {
            let loc = mesh.vertex_locator();
            for v in mesh.vertices() {
                assert!(loc.find(map(*v)).is_some(), "image of {v:?} missing");
            }
        };
        let rect = build_domain(&DomainSpec::rectangle(2.0, 1.75), 2000).unwrap();
        check(&rect, &|x| [2.0 - x[0], x[1]]);
        check(&rect, &|x| [x[0], 1.75 - x[1]]);
        let sq = build_domain(&DomainSpec::square(2.0), 2000).unwrap();
        check(&sq, &|x| [x[1], x[0]]);
        check(&sq, &|x| [2.0 - x[1], 2.0 - x[0]]);
        let disk = build_domain(&DomainSpec::disk(1.0), 2000).unwrap();
        check(&disk, &|x| [x[0], -x[1]]);
        let tri = build_domain(&DomainSpec::iso_triangle(1.0, 0.75), 2000).unwrap();
        check(&tri, &|x| [x[0], -x[1]]);
    }

    #[test]
    fn rejects_inverted_triangle() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let tags = vec![BoundaryTag::Dirichlet; 3];
        assert!(Mesh::new(v.clone(), vec![[0, 2, 1]], tags.clone()).is_err());
        assert!(Mesh::new(v, vec![[0, 1, 2]], tags).is_ok());
    }
}
