//! Voronoi cells by half-space clipping, with rigorous volume enclosures.
//!
//! The cell is built in floating point by clipping a bounding cube with the
//! bisector planes of the anchor and its neighbors, nearest first. Vertices
//! remember which planes they lie on. For the volume, each vertex is then
//! re-derived as an interval by Cramer's rule from three of its planes (plane
//! data itself held as intervals) and the faces are fanned into tetrahedra
//! with apex at the anchor.

use std::ops::{Add, Mul, Sub};

use serde::Serialize;

use crate::interval::Interval;
use crate::packing::{neighbors, PackingError, PackingPatch, Point};

pub const DEFAULT_CUTOFF: f64 = 6.0;
/// Vertices closer than this to a clipping plane count as lying on it.
const ON_PLANE_EPS: f64 = 1e-10;
/// Vertices closer than this are merged.
const MERGE_EPS: f64 = 1e-9;
/// Slack on center differences: covers the rounding in the differences and a
/// few ulps of error in generated lattice coordinates.
const CENTER_SLACK_ULPS: u32 = 4;
/// Half-width of the coordinate inflation used when no well-conditioned plane
/// triple is available for a vertex.
const VERTEX_FALLBACK_RADIUS: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum VoronoiError {
    #[error("cutoff {0} is below 4")]
    CutoffTooSmall(f64),
    #[error("center {0} is not interior; its cell is not determined by the patch")]
    NotInterior(usize),
    #[error("edge lengths are not realizable as a tetrahedron (144·V² ≤ {0})")]
    NonRealizable(f64),
    #[error(transparent)]
    Packing(#[from] PackingError),
}

pub type IVec3 = [Interval; 3];

fn ivec(p: &Point) -> IVec3 {
    [p.x.into(), p.y.into(), p.z.into()]
}

fn idot(a: &IVec3, b: &IVec3) -> Interval {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn icross(a: &IVec3, b: &IVec3) -> IVec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn isub(a: &IVec3, b: &IVec3) -> IVec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// `a · (b × c)`, six times the signed volume of the tetrahedron (0, a, b, c).
pub fn triple_product(a: &IVec3, b: &IVec3, c: &IVec3) -> Interval {
    idot(a, &icross(b, c))
}

/// Volume of the tetrahedron with the given corners; contains `|det|/6`.
pub fn tetra_volume(p0: &Point, p1: &Point, p2: &Point, p3: &Point) -> Interval {
    let o = ivec(p0);
    let det = triple_product(&isub(&ivec(p1), &o), &isub(&ivec(p2), &o), &isub(&ivec(p3), &o));
    det.abs().div(&Interval::point(6.0)).expect("6 is nonzero")
}

/// Minimal arithmetic needed to evaluate the Cayley–Menger form generically
/// (plain intervals here, interval dual numbers in the prover).
pub trait Ring: Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    fn constant(x: f64) -> Self;
}

impl Ring for Interval {
    fn constant(x: f64) -> Self {
        Interval::point(x)
    }
}

/// `144 V²` of a tetrahedron from its six edge lengths, ordered
/// `d01, d02, d03, d12, d13, d23`.
pub fn cayley_menger_144v2<T: Ring>(d: &[T; 6]) -> T {
    let sq = |x: &T| x.clone() * x.clone();
    let (a, b, c) = (sq(&d[0]), sq(&d[1]), sq(&d[2]));
    let x2 = a.clone() + b.clone() - sq(&d[3]);
    let y2 = a.clone() + c.clone() - sq(&d[4]);
    let z2 = b.clone() + c.clone() - sq(&d[5]);
    T::constant(4.0) * a.clone() * b.clone() * c.clone() + x2.clone() * y2.clone() * z2.clone()
        - a * sq(&z2)
        - b * sq(&y2)
        - c * sq(&x2)
}

/// Tetrahedron volume from its six edge lengths.
pub fn cayley_menger_volume(d: &[Interval; 6]) -> Result<Interval, VoronoiError> {
    let form = cayley_menger_144v2(&d.map(|x| x.abs()));
    let scale = d.iter().map(|x| x.mag()).fold(1.0, f64::max).powi(6);
    if form.hi() < -1e-12 * scale {
        return Err(VoronoiError::NonRealizable(form.hi()));
    }
    let root = form.max(&Interval::ZERO).sqrt().expect("clamped to >= 0");
    Ok(root.div(&Interval::point(12.0)).expect("12 is nonzero"))
}

// ---- convex polytopes ---------------------------------------------------------

/// Half-space `normal · x <= offset`, with interval coefficients.
#[derive(Debug, Clone)]
pub struct PlaneDef {
    pub normal: IVec3,
    pub offset: Interval,
}

impl PlaneDef {
    pub fn exact(normal: [f64; 3], offset: f64) -> Self {
        PlaneDef {
            normal: normal.map(Interval::point),
            offset: Interval::point(offset),
        }
    }

    /// Unit normal and offset in floating point.
    fn float(&self) -> (Point, f64) {
        let n = Point::new(self.normal[0].mid(), self.normal[1].mid(), self.normal[2].mid());
        let len = n.norm();
        (n / len, self.offset.mid() / len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Face {
    /// Index of the generating plane.
    pub plane: usize,
    /// Vertex cycle, counterclockwise seen from outside.
    pub vertices: Vec<usize>,
}

/// Bounded convex polytope maintained under half-space clipping.
#[derive(Debug, Clone)]
pub struct ConvexPolytope {
    planes: Vec<PlaneDef>,
    vertices: Vec<Point>,
    vertex_planes: Vec<Vec<usize>>,
    faces: Vec<Face>,
}

impl ConvexPolytope {
    /// The cube `[-h, h]³`; its planes are 0..6 (+x, -x, +y, -y, +z, -z).
    pub fn cube(h: f64) -> Self {
        let planes = vec![
            PlaneDef::exact([1.0, 0.0, 0.0], h),
            PlaneDef::exact([-1.0, 0.0, 0.0], h),
            PlaneDef::exact([0.0, 1.0, 0.0], h),
            PlaneDef::exact([0.0, -1.0, 0.0], h),
            PlaneDef::exact([0.0, 0.0, 1.0], h),
            PlaneDef::exact([0.0, 0.0, -1.0], h),
        ];
        let mut vertices = Vec::new();
        let mut vertex_planes = Vec::new();
        for bits in 0..8u32 {
            let s = |bit: u32| if bits & bit != 0 { h } else { -h };
            vertices.push(Point::new(s(1), s(2), s(4)));
            vertex_planes.push(vec![
                if bits & 1 != 0 { 0 } else { 1 },
                if bits & 2 != 0 { 2 } else { 3 },
                if bits & 4 != 0 { 4 } else { 5 },
            ]);
        }
        for vp in &mut vertex_planes {
            vp.sort_unstable();
        }
        let faces = [
            (0, [1, 3, 7, 5]),
            (1, [0, 4, 6, 2]),
            (2, [2, 6, 7, 3]),
            (3, [0, 1, 5, 4]),
            (4, [4, 5, 7, 6]),
            (5, [0, 2, 3, 1]),
        ]
        .into_iter()
        .map(|(plane, v)| Face {
            plane,
            vertices: v.to_vec(),
        })
        .collect();
        ConvexPolytope {
            planes,
            vertices,
            vertex_planes,
            faces,
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn planes(&self) -> &[PlaneDef] {
        &self.planes
    }

    /// Plane ids each vertex lies on.
    pub fn vertex_planes(&self) -> &[Vec<usize>] {
        &self.vertex_planes
    }

    pub fn max_vertex_norm(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Registers `plane` and cuts the polytope with it. Returns whether any
    /// vertex was removed. The plane is recorded either way.
    pub fn clip(&mut self, plane: PlaneDef) -> bool {
        let pid = self.planes.len();
        let (n, d) = plane.float();
        self.planes.push(plane);
        let side: Vec<f64> = self.vertices.iter().map(|v| n.dot(v) - d).collect();
        if side.iter().all(|&s| s <= ON_PLANE_EPS) {
            for (vp, &s) in self.vertex_planes.iter_mut().zip(&side) {
                if s.abs() <= ON_PLANE_EPS {
                    vp.push(pid);
                }
            }
            return false;
        }

        let mut vertices = self.vertices.clone();
        let mut vertex_planes = self.vertex_planes.clone();
        let mut cap: Vec<usize> = Vec::new();
        for (v, &s) in side.iter().enumerate() {
            if s.abs() <= ON_PLANE_EPS {
                vertex_planes[v].push(pid);
                cap.push(v);
            }
        }
        let mut edge_points: Vec<((usize, usize), usize)> = Vec::new();
        let mut new_faces = Vec::with_capacity(self.faces.len() + 1);
        for face in &self.faces {
            let mut cycle = Vec::with_capacity(face.vertices.len() + 1);
            let m = face.vertices.len();
            for idx in 0..m {
                let u = face.vertices[idx];
                let w = face.vertices[(idx + 1) % m];
                let (su, sw) = (side[u], side[w]);
                if su <= ON_PLANE_EPS {
                    cycle.push(u);
                }
                let crosses = (su < -ON_PLANE_EPS && sw > ON_PLANE_EPS)
                    || (su > ON_PLANE_EPS && sw < -ON_PLANE_EPS);
                if crosses {
                    let key = (u.min(w), u.max(w));
                    let id = match edge_points.iter().find(|(k, _)| *k == key) {
                        Some(&(_, id)) => id,
                        None => {
                            let t = su / (su - sw);
                            let p = self.vertices[u] + (self.vertices[w] - self.vertices[u]) * t;
                            let mut planes: Vec<usize> = self.vertex_planes[u]
                                .iter()
                                .copied()
                                .filter(|q| self.vertex_planes[w].contains(q))
                                .collect();
                            planes.push(pid);
                            let id = merge_or_push(&mut vertices, &mut vertex_planes, &side, p, planes);
                            edge_points.push((key, id));
                            if !cap.contains(&id) {
                                cap.push(id);
                            }
                            id
                        }
                    };
                    cycle.push(id);
                }
            }
            dedup_cycle(&mut cycle);
            if cycle.len() >= 3 {
                new_faces.push(Face {
                    plane: face.plane,
                    vertices: cycle,
                });
            }
        }
        if cap.len() >= 3 {
            new_faces.push(Face {
                plane: pid,
                vertices: order_around(&vertices, &cap, &n),
            });
        }
        for vp in &mut vertex_planes {
            vp.sort_unstable();
            vp.dedup();
        }

        // Compact to the vertices still referenced by a face.
        let mut remap = vec![usize::MAX; vertices.len()];
        let mut kept_vertices = Vec::new();
        let mut kept_planes = Vec::new();
        for face in &mut new_faces {
            for v in &mut face.vertices {
                if remap[*v] == usize::MAX {
                    remap[*v] = kept_vertices.len();
                    kept_vertices.push(vertices[*v]);
                    kept_planes.push(std::mem::take(&mut vertex_planes[*v]));
                }
                *v = remap[*v];
            }
        }
        self.vertices = kept_vertices;
        self.vertex_planes = kept_planes;
        self.faces = new_faces;
        true
    }

    /// Interval enclosure of each vertex, from three of its planes.
    pub fn vertex_enclosures(&self) -> Vec<IVec3> {
        (0..self.vertices.len())
            .map(|v| self.enclose_vertex(v))
            .collect()
    }

    fn enclose_vertex(&self, v: usize) -> IVec3 {
        let ids = &self.vertex_planes[v];
        let mut best: Option<([usize; 3], f64)> = None;
        for a in 0..ids.len() {
            for b in a + 1..ids.len() {
                for c in b + 1..ids.len() {
                    let triple = [ids[a], ids[b], ids[c]];
                    let [na, nb, nc] = triple.map(|q| self.planes[q].float().0);
                    let det = na.dot(&nb.cross(&nc)).abs();
                    if best.is_none_or(|(_, d)| det > d) {
                        best = Some((triple, det));
                    }
                }
            }
        }
        if let Some((triple, _)) = best {
            if let Some(x) = cramer(triple.map(|q| &self.planes[q])) {
                let p = self.vertices[v];
                // The float vertex and the enclosure must agree; otherwise the
                // combinatorics are off and the fallback is safer.
                if (0..3).all(|k| (x[k].mid() - p[k]).abs() <= 1e-6) {
                    return x;
                }
            }
        }
        let p = self.vertices[v];
        [p.x, p.y, p.z].map(|c| {
            Interval::point(c - VERTEX_FALLBACK_RADIUS).hull(&Interval::point(c + VERTEX_FALLBACK_RADIUS))
        })
    }

    /// Enclosure of the volume, fanning faces from `apex` (any point).
    pub fn volume(&self, apex: &Point) -> Interval {
        let enc = self.vertex_enclosures();
        let o = ivec(apex);
        let mut total = Interval::ZERO;
        for face in &self.faces {
            let v0 = isub(&enc[face.vertices[0]], &o);
            for pair in face.vertices[1..].windows(2) {
                let v1 = isub(&enc[pair[0]], &o);
                let v2 = isub(&enc[pair[1]], &o);
                total = total + triple_product(&v0, &v1, &v2);
            }
        }
        total.div(&Interval::point(6.0)).expect("6 is nonzero")
    }
}

fn merge_or_push(
    vertices: &mut Vec<Point>,
    vertex_planes: &mut Vec<Vec<usize>>,
    side: &[f64],
    p: Point,
    planes: Vec<usize>,
) -> usize {
    // Only vertices that survive the cut (old inside ones or new points) qualify.
    let existing = vertices.iter().enumerate().position(|(idx, q)| {
        let alive = idx >= side.len() || side[idx] <= ON_PLANE_EPS;
        alive && (q - p).norm() <= MERGE_EPS
    });
    match existing {
        Some(idx) => {
            vertex_planes[idx].extend(planes);
            idx
        }
        None => {
            vertices.push(p);
            vertex_planes.push(planes);
            vertices.len() - 1
        }
    }
}

fn dedup_cycle(cycle: &mut Vec<usize>) {
    cycle.dedup();
    while cycle.len() > 1 && cycle.first() == cycle.last() {
        cycle.pop();
    }
}

/// Counterclockwise order of coplanar points seen from the `normal` side.
fn order_around(vertices: &[Point], ids: &[usize], normal: &Point) -> Vec<usize> {
    let centroid = ids.iter().fold(Point::zeros(), |acc, &i| acc + vertices[i]) / ids.len() as f64;
    let helper = if normal.x.abs() < 0.9 {
        Point::x()
    } else {
        Point::y()
    };
    let e1 = normal.cross(&helper).normalize();
    let e2 = normal.cross(&e1);
    let mut keyed: Vec<(f64, usize)> = ids
        .iter()
        .map(|&i| {
            let d = vertices[i] - centroid;
            (d.dot(&e2).atan2(d.dot(&e1)), i)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Intersection point of three planes by interval Cramer's rule.
fn cramer(planes: [&PlaneDef; 3]) -> Option<IVec3> {
    let rows = planes.map(|p| p.normal);
    let col = |k: usize| [rows[0][k], rows[1][k], rows[2][k]];
    let (c0, c1, c2) = (col(0), col(1), col(2));
    let rhs = [planes[0].offset, planes[1].offset, planes[2].offset];
    let det = triple_product(&c0, &c1, &c2);
    if det.contains_zero() {
        return None;
    }
    let x = triple_product(&rhs, &c1, &c2).div(&det).ok()?;
    let y = triple_product(&c0, &rhs, &c2).div(&det).ok()?;
    let z = triple_product(&c0, &c1, &rhs).div(&det).ok()?;
    Some([x, y, z])
}

// ---- Voronoi cells --------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PlaneSource {
    Neighbor(usize),
    BoundingBox,
}

/// Half-space `normal · x <= offset` in patch coordinates (unit normal).
#[derive(Debug, Clone, Serialize)]
pub struct HalfSpace {
    pub normal: [f64; 3],
    pub offset: f64,
    pub source: PlaneSource,
}

#[derive(Debug, Clone)]
pub struct VoronoiCell {
    pub anchor: usize,
    pub halfspaces: Vec<HalfSpace>,
    /// Vertices in patch coordinates.
    pub vertices: Vec<Point>,
    /// Faces; `plane` indexes `halfspaces`.
    pub faces: Vec<Face>,
    /// Enclosure of the volume of the computed polytope (box-clipped when the
    /// cell is not interior).
    pub volume: Interval,
    pub cutoff: f64,
    interior: bool,
    max_vertex_distance: f64,
}

impl VoronoiCell {
    pub fn is_interior(&self) -> bool {
        self.interior
    }

    pub fn max_vertex_distance(&self) -> f64 {
        self.max_vertex_distance
    }

    /// Debug dump with `anchor`, `vertices`, `faces`, `volume_lo`, `volume_hi`.
    pub fn dump(&self) -> serde_json::Value {
        serde_json::json!({
            "anchor": self.anchor,
            "vertices": self.vertices.iter().map(|v| [v.x, v.y, v.z]).collect::<Vec<_>>(),
            "faces": self.faces.iter().map(|f| f.vertices.clone()).collect::<Vec<_>>(),
            "volume_lo": crate::decimal::format_f64(self.volume.lo()),
            "volume_hi": crate::decimal::format_f64(self.volume.hi()),
        })
    }
}

/// Voronoi cell of center `i` against all neighbors within `cutoff`, clipped
/// to the cube of half-width `cutoff` around the center.
pub fn voronoi_cell(p: &PackingPatch, i: usize, cutoff: f64) -> Result<VoronoiCell, VoronoiError> {
    if !(cutoff >= 4.0) {
        return Err(VoronoiError::CutoffTooSmall(cutoff));
    }
    let anchor = *p.center(i)?;
    let near = neighbors(p, i, cutoff)?;
    let mut poly = ConvexPolytope::cube(cutoff);
    let mut sources = vec![PlaneSource::BoundingBox; 6];
    for &j in &near {
        let rel = p.centers()[j] - anchor;
        let half = 0.5 * rel.norm();
        let normal = [rel.x, rel.y, rel.z].map(|x| Interval::around(x, CENTER_SLACK_ULPS));
        let offset = idot(&normal, &normal)
            .div(&Interval::point(2.0))
            .expect("2 is nonzero");
        sources.push(PlaneSource::Neighbor(j));
        poly.clip(PlaneDef { normal, offset });
        // Neighbors are sorted by distance: once the bisector is farther than
        // every vertex, the rest are redundant as well.
        if half > poly.max_vertex_norm() + ON_PLANE_EPS {
            break;
        }
    }
    // Record the remaining bisectors so the cell lists every constraint.
    let registered = poly.planes().len() - 6;
    let halfspaces: Vec<HalfSpace> = poly
        .planes()
        .iter()
        .zip(&sources)
        .map(|(plane, source)| {
            let (n, d) = plane.float();
            HalfSpace {
                normal: [n.x, n.y, n.z],
                offset: d + n.dot(&anchor),
                source: *source,
            }
        })
        .chain(near[registered..].iter().map(|&j| {
            let rel = p.centers()[j] - anchor;
            let n = rel.normalize();
            HalfSpace {
                normal: [n.x, n.y, n.z],
                offset: 0.5 * rel.norm() + n.dot(&anchor),
                source: PlaneSource::Neighbor(j),
            }
        }))
        .collect();

    let volume = poly.volume(&Point::zeros());
    let max_vertex_distance = poly.max_vertex_norm();
    let touches_box = poly.faces().iter().any(|f| f.plane < 6);
    let mut interior = !touches_box
        && !poly.faces().is_empty()
        && max_vertex_distance < cutoff / 2.0 - 0.1;
    if let Some(region) = p.region() {
        let from_center = (anchor - Point::from(region.center)).norm();
        interior &= from_center + 2.0 * max_vertex_distance <= region.radius;
    }
    Ok(VoronoiCell {
        anchor: i,
        halfspaces,
        vertices: poly.vertices().iter().map(|v| v + anchor).collect(),
        faces: poly.faces().to_vec(),
        volume,
        cutoff,
        interior,
        max_vertex_distance,
    })
}

/// Certified volume of an interior cell.
pub fn cell_volume(cell: &VoronoiCell) -> Result<Interval, VoronoiError> {
    if cell.interior {
        Ok(cell.volume)
    } else {
        Err(VoronoiError::NotInterior(cell.anchor))
    }
}

/// Whether the cell of `i` is fully determined by the patch: every vertex lies
/// within `cutoff/2 - 0.1` of the center (so no center beyond `cutoff` can cut
/// it), no bounding-box face survives, and, when the patch declares a
/// completeness region, the ball of radius twice the vertex distance around
/// the center lies inside it.
pub fn is_interior(p: &PackingPatch, i: usize, cutoff: f64) -> Result<bool, VoronoiError> {
    Ok(voronoi_cell(p, i, cutoff)?.is_interior())
}

/// Computes and stores interior flags for every center.
pub fn mark_interior(p: &mut PackingPatch, cutoff: f64) -> Result<(), VoronoiError> {
    let flags = (0..p.len())
        .map(|i| is_interior(p, i, cutoff))
        .collect::<Result<Vec<_>, _>>()?;
    p.set_interior_flags(flags);
    Ok(())
}
