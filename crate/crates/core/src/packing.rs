//! Finite patches of unit-ball packings: generation, I/O, neighbor queries and
//! triangle enumeration.
//!
//! Balls have radius 1, so admissible centers are at mutual distance >= 2.
//! Patches generated from a lattice keep a `(offset, cell)` label per center.
//! Distances between labelled centers are evaluated from the lattice metric
//! on the label difference, which makes them exactly invariant under lattice
//! translations and exactly symmetric in the pair. Periodic cancellation
//! checks depend on that.

use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::interval::Interval;
use crate::TOL_GEOM;

pub type Point = Vector3<f64>;

#[derive(Debug, thiserror::Error)]
pub enum PackingError {
    #[error("centers {i} and {j} are at distance {distance}, below 2")]
    MinDistance { i: usize, j: usize, distance: f64 },
    #[error("center index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("edge cutoff r = {0} outside [2, √8]")]
    ROutOfRange(f64),
    #[error("non-positive cutoff {0}")]
    BadCutoff(f64),
    #[error("malformed patch document: {0}")]
    Malformed(String),
    #[error("patch has no lattice structure")]
    NotPeriodic,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Periodic structure: Cartesian basis rows, fractional offsets, and the
/// metric (Gram matrix) used for label-based distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub basis: [[f64; 3]; 3],
    pub offsets: Vec<[f64; 3]>,
    pub metric: [[f64; 3]; 3],
}

impl Lattice {
    /// Lattice whose metric is computed from the basis.
    pub fn new(basis: [[f64; 3]; 3], offsets: Vec<[f64; 3]>) -> Self {
        let mut metric = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                metric[r][c] = (0..3).map(|k| basis[r][k] * basis[c][k]).sum();
            }
        }
        Lattice {
            basis,
            offsets,
            metric,
        }
    }

    fn basis_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.basis[r][c])
    }

    /// Cartesian position of fractional coordinates `frac` (row vector times basis).
    pub fn to_cartesian(&self, frac: [f64; 3]) -> Point {
        let mut p = Point::zeros();
        for k in 0..3 {
            for c in 0..3 {
                p[c] += frac[k] * self.basis[k][c];
            }
        }
        p
    }

    fn quadratic_form(&self, v: [f64; 3]) -> f64 {
        let mut s = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                s += self.metric[r][c] * v[r] * v[c];
            }
        }
        s
    }

    /// Volume of one lattice cell.
    pub fn cell_volume(&self) -> f64 {
        self.basis_matrix().determinant().abs()
    }

    /// Per-axis bound on lattice coordinates of points within `radius`.
    fn cell_bound(&self, radius: f64) -> [i64; 3] {
        let inv = self
            .basis_matrix()
            .try_inverse()
            .expect("lattice basis must be nonsingular");
        let mut out = [0i64; 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let col_norm = (0..3).map(|r| inv[(r, k)].powi(2)).sum::<f64>().sqrt();
            *slot = (radius * col_norm).ceil() as i64 + 2;
        }
        out
    }

    /// `k × k × k` supercell of this lattice.
    pub fn supercell(&self, k: usize) -> Lattice {
        let kf = k as f64;
        let mut basis = self.basis;
        for row in basis.iter_mut() {
            for x in row.iter_mut() {
                *x *= kf;
            }
        }
        let mut metric = self.metric;
        for row in metric.iter_mut() {
            for x in row.iter_mut() {
                *x *= kf * kf;
            }
        }
        let mut offsets = Vec::new();
        for a in 0..k {
            for b in 0..k {
                for c in 0..k {
                    for o in &self.offsets {
                        offsets.push([
                            (o[0] + a as f64) / kf,
                            (o[1] + b as f64) / kf,
                            (o[2] + c as f64) / kf,
                        ]);
                    }
                }
            }
        }
        Lattice {
            basis,
            offsets,
            metric,
        }
    }
}

/// Which lattice image a center is: offset index plus integer cell vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticeLabel {
    pub offset: usize,
    pub cell: [i64; 3],
}

/// A ball known to contain every center of the packing that lies in it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct PackingPatch {
    centers: Vec<Point>,
    lattice: Option<Lattice>,
    labels: Vec<LatticeLabel>,
    region: Option<Region>,
    interior_flags: Vec<bool>,
}

impl PackingPatch {
    /// Unstructured patch; rejects pairs closer than `2 - TOL_GEOM`.
    pub fn new(centers: Vec<Point>) -> Result<Self, PackingError> {
        let patch = PackingPatch {
            interior_flags: vec![false; centers.len()],
            centers,
            lattice: None,
            labels: Vec::new(),
            region: None,
        };
        patch.check_min_distance()?;
        Ok(patch)
    }

    /// Patch of lattice images. Cartesian centers are derived from labels.
    pub fn from_labels(lattice: Lattice, labels: Vec<LatticeLabel>) -> Result<Self, PackingError> {
        for l in &labels {
            if l.offset >= lattice.offsets.len() {
                return Err(PackingError::Malformed(format!(
                    "label refers to offset {} of {}",
                    l.offset,
                    lattice.offsets.len()
                )));
            }
        }
        let centers = labels
            .iter()
            .map(|l| lattice.to_cartesian(label_frac(&lattice, l)))
            .collect::<Vec<_>>();
        let patch = PackingPatch {
            interior_flags: vec![false; centers.len()],
            centers,
            lattice: Some(lattice),
            labels,
            region: None,
        };
        patch.check_min_distance()?;
        Ok(patch)
    }

    pub fn with_region(mut self, region: Option<Region>) -> Self {
        self.region = region;
        self
    }

    fn check_min_distance(&self) -> Result<(), PackingError> {
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let d = self.distance(i, j);
                if d < 2.0 - TOL_GEOM {
                    return Err(PackingError::MinDistance { i, j, distance: d });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn center(&self, i: usize) -> Result<&Point, PackingError> {
        self.centers.get(i).ok_or(PackingError::IndexOutOfRange(i))
    }

    pub fn lattice(&self) -> Option<&Lattice> {
        self.lattice.as_ref()
    }

    pub fn labels(&self) -> &[LatticeLabel] {
        &self.labels
    }

    pub fn region(&self) -> Option<&Region> {
        self.region.as_ref()
    }

    pub fn interior_flags(&self) -> &[bool] {
        &self.interior_flags
    }

    pub fn set_interior_flags(&mut self, flags: Vec<bool>) {
        assert_eq!(flags.len(), self.len());
        self.interior_flags = flags;
    }

    /// Index of the center at the origin, if there is one.
    pub fn origin_index(&self) -> Option<usize> {
        self.centers.iter().position(|c| c.norm() <= TOL_GEOM)
    }

    /// Center distance. Symmetric bit-for-bit; for labelled lattice centers
    /// also invariant under lattice translation.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        match &self.lattice {
            Some(lat) if !self.labels.is_empty() => {
                let (a, b) = (self.labels[i], self.labels[j]);
                let (fa, fb) = (lat.offsets[a.offset], lat.offsets[b.offset]);
                let mut delta = [0.0; 3];
                for k in 0..3 {
                    delta[k] = (b.cell[k] - a.cell[k]) as f64 + (fb[k] - fa[k]);
                }
                lat.quadratic_form(delta).max(0.0).sqrt()
            }
            _ => (self.centers[j] - self.centers[i]).norm(),
        }
    }

    /// Same patch under `x -> rotation * x + translation`. Lattice labels are
    /// dropped; distances fall back to Cartesian coordinates.
    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Point) -> PackingPatch {
        PackingPatch {
            centers: self
                .centers
                .iter()
                .map(|c| rotation * c + translation)
                .collect(),
            lattice: None,
            labels: Vec::new(),
            region: self.region.map(|r| {
                let c = rotation * Point::from(r.center) + translation;
                Region {
                    center: [c.x, c.y, c.z],
                    radius: r.radius,
                }
            }),
            interior_flags: self.interior_flags.clone(),
        }
    }

    /// Extends a fundamental-domain sample periodically.
    ///
    /// Returns a patch holding every image within `radius` of the domain
    /// centroid plus the domain itself, and the indices of the domain centers
    /// (offset order). The patch's region records the completeness ball.
    pub fn periodic_extension(&self, radius: f64) -> Result<(PackingPatch, Vec<usize>), PackingError> {
        let lat = self.lattice.clone().ok_or(PackingError::NotPeriodic)?;
        let domain: Vec<Point> = lat
            .offsets
            .iter()
            .map(|f| lat.to_cartesian(*f))
            .collect();
        let centroid = domain.iter().fold(Point::zeros(), |acc, p| acc + p) / domain.len().max(1) as f64;
        let spread = domain
            .iter()
            .map(|p| (p - centroid).norm())
            .fold(0.0, f64::max);
        let bound = lat.cell_bound(radius + spread + centroid.norm());
        let mut labels = Vec::new();
        for offset in 0..lat.offsets.len() {
            for a in -bound[0]..=bound[0] {
                for b in -bound[1]..=bound[1] {
                    for c in -bound[2]..=bound[2] {
                        let label = LatticeLabel {
                            offset,
                            cell: [a, b, c],
                        };
                        let p = lat.to_cartesian(label_frac(&lat, &label));
                        if (p - centroid).norm() <= radius + TOL_GEOM {
                            labels.push(label);
                        }
                    }
                }
            }
        }
        // Domain first, then the remaining images in label order.
        labels.sort_by_key(|l| (l.cell != [0, 0, 0], *l));
        let domain_idx = (0..lat.offsets.len()).collect();
        let patch = PackingPatch::from_labels(lat, labels)?.with_region(Some(Region {
            center: [centroid.x, centroid.y, centroid.z],
            radius,
        }));
        Ok((patch, domain_idx))
    }
}

fn label_frac(lat: &Lattice, l: &LatticeLabel) -> [f64; 3] {
    let f = lat.offsets[l.offset];
    [
        l.cell[0] as f64 + f[0],
        l.cell[1] as f64 + f[1],
        l.cell[2] as f64 + f[2],
    ]
}

// ---- generators ----------------------------------------------------------------

/// Primitive FCC lattice with nearest-neighbor distance 2.
pub fn fcc_lattice() -> Lattice {
    let s = std::f64::consts::SQRT_2;
    Lattice {
        basis: [[s, s, 0.0], [s, 0.0, s], [0.0, s, s]],
        offsets: vec![[0.0; 3]],
        metric: [[4.0, 2.0, 2.0], [2.0, 4.0, 2.0], [2.0, 2.0, 4.0]],
    }
}

/// Conventional cubic FCC cell (edge 2√2, four centers).
pub fn fcc_conventional_lattice() -> Lattice {
    let a = 2.0 * std::f64::consts::SQRT_2;
    Lattice {
        basis: [[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]],
        offsets: vec![
            [0.0, 0.0, 0.0],
            [0.5, 0.5, 0.0],
            [0.5, 0.0, 0.5],
            [0.0, 0.5, 0.5],
        ],
        metric: [[8.0, 0.0, 0.0], [0.0, 8.0, 0.0], [0.0, 0.0, 8.0]],
    }
}

/// Hexagonal close packing: hexagonal cell with two centers, distance 2.
pub fn hcp_lattice() -> Lattice {
    let h = (32.0f64 / 3.0).sqrt();
    Lattice {
        basis: [[2.0, 0.0, 0.0], [1.0, 3.0f64.sqrt(), 0.0], [0.0, 0.0, h]],
        offsets: vec![[0.0, 0.0, 0.0], [1.0 / 3.0, 1.0 / 3.0, 0.5]],
        metric: [[4.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 32.0 / 3.0]],
    }
}

/// All images of `lattice` within `radius` of the origin, sorted by distance
/// then label. Offset 0 must sit at the origin so it comes first.
pub fn lattice_patch(lattice: Lattice, radius: f64) -> PackingPatch {
    let bound = lattice.cell_bound(radius);
    let mut labelled = Vec::new();
    for offset in 0..lattice.offsets.len() {
        for a in -bound[0]..=bound[0] {
            for b in -bound[1]..=bound[1] {
                for c in -bound[2]..=bound[2] {
                    let label = LatticeLabel {
                        offset,
                        cell: [a, b, c],
                    };
                    let d = lattice.quadratic_form(label_frac(&lattice, &label)).sqrt();
                    if d <= radius + TOL_GEOM {
                        labelled.push((d, label));
                    }
                }
            }
        }
    }
    labelled.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let labels = labelled.into_iter().map(|(_, l)| l).collect();
    PackingPatch::from_labels(lattice, labels)
        .expect("lattice generators produce admissible packings")
        .with_region(Some(Region {
            center: [0.0; 3],
            radius,
        }))
}

pub fn gen_fcc(patch_radius: f64) -> PackingPatch {
    lattice_patch(fcc_lattice(), patch_radius)
}

pub fn gen_hcp(patch_radius: f64) -> PackingPatch {
    lattice_patch(hcp_lattice(), patch_radius)
}

/// Fundamental-domain sample of a lattice: its offsets, nothing else.
pub fn periodic_cell(lattice: Lattice) -> Result<PackingPatch, PackingError> {
    let labels = (0..lattice.offsets.len())
        .map(|offset| LatticeLabel {
            offset,
            cell: [0; 3],
        })
        .collect();
    PackingPatch::from_labels(lattice, labels)
}

// ---- neighbors ------------------------------------------------------------------

/// Centers within `cutoff` of center `i`, nearest first (ties by index).
pub fn neighbors(p: &PackingPatch, i: usize, cutoff: f64) -> Result<Vec<usize>, PackingError> {
    p.center(i)?;
    if cutoff <= 0.0 || cutoff.is_nan() {
        return Err(PackingError::BadCutoff(cutoff));
    }
    let mut found: Vec<(f64, usize)> = (0..p.len())
        .filter(|&j| j != i)
        .map(|j| (p.distance(i, j), j))
        .filter(|&(d, _)| d <= cutoff)
        .collect();
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(found.into_iter().map(|(_, j)| j).collect())
}

// ---- triangles ------------------------------------------------------------------

/// A triangle of centers. Vertices are stored ascending; `lengths[k]` is the
/// edge opposite `vertices[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub lengths: [f64; 3],
    /// Position (0..3) of the anchor vertex, when anchored.
    pub anchor: Option<usize>,
    /// Position `k` of the distinguished edge: the edge opposite `vertices[k]`.
    pub distinguished: Option<usize>,
}

impl Triangle {
    /// Triangle from three distinct center indices and the edge opposite each.
    pub fn new(vertices: [usize; 3], lengths: [f64; 3]) -> Result<Self, PackingError> {
        if vertices[0] == vertices[1] || vertices[1] == vertices[2] || vertices[0] == vertices[2] {
            return Err(PackingError::Malformed("repeated triangle vertex".into()));
        }
        let [a, b, c] = lengths;
        let slack = TOL_GEOM * (a + b + c);
        if lengths.iter().any(|&l| !(l >= 2.0 - TOL_GEOM) || !l.is_finite())
            || a > b + c + slack
            || b > a + c + slack
            || c > a + b + slack
        {
            return Err(PackingError::Malformed(format!(
                "edge lengths {lengths:?} do not form an admissible triangle"
            )));
        }
        let mut order = [0usize, 1, 2];
        order.sort_by_key(|&k| vertices[k]);
        Ok(Triangle {
            vertices: order.map(|k| vertices[k]),
            lengths: order.map(|k| lengths[k]),
            anchor: None,
            distinguished: None,
        })
    }

    fn from_patch(p: &PackingPatch, mut v: [usize; 3]) -> Triangle {
        v.sort_unstable();
        Triangle {
            vertices: v,
            lengths: [p.distance(v[1], v[2]), p.distance(v[0], v[2]), p.distance(v[0], v[1])],
            anchor: None,
            distinguished: None,
        }
    }

    pub fn position(&self, center: usize) -> Option<usize> {
        self.vertices.iter().position(|&v| v == center)
    }

    /// Copy anchored at `center`; `None` if it is not a vertex.
    pub fn anchored_at(&self, center: usize) -> Option<Triangle> {
        let k = self.position(center)?;
        Some(Triangle {
            anchor: Some(k),
            ..self.clone()
        })
    }

    /// `(a, b, c)` with `c` opposite the anchor.
    pub fn abc(&self) -> Option<(f64, f64, f64)> {
        let k = self.anchor?;
        Some((
            self.lengths[(k + 1) % 3],
            self.lengths[(k + 2) % 3],
            self.lengths[k],
        ))
    }

    /// Length of the distinguished edge.
    pub fn w(&self) -> Option<f64> {
        self.distinguished.map(|k| self.lengths[k])
    }

    /// Endpoints of the distinguished edge.
    pub fn distinguished_endpoints(&self) -> Option<(usize, usize)> {
        self.distinguished
            .map(|k| (self.vertices[(k + 1) % 3], self.vertices[(k + 2) % 3]))
    }
}

/// Decides S-membership of a triangle from its edge lengths alone, which makes
/// every implementation vertex-symmetric by construction.
pub trait SRule: Send + Sync {
    fn name(&self) -> &'static str;
    /// Position of the distinguished edge, or `None` when rejected.
    fn distinguished_edge(&self, lengths: &[f64; 3], r: f64) -> Option<usize>;
    /// Largest edge length any accepted triangle may have.
    fn max_edge(&self) -> f64;
}

/// Accept iff a unique longest edge has length in `(r, √8 + TOL_GEOM]` and the
/// other two edges are `<= r`; that edge is distinguished.
#[derive(Debug, Clone, Copy, Default)]
pub struct LongestEdgeRule;

impl SRule for LongestEdgeRule {
    fn name(&self) -> &'static str {
        "longest-edge"
    }

    fn distinguished_edge(&self, lengths: &[f64; 3], r: f64) -> Option<usize> {
        let w = lengths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lengths.iter().filter(|&&l| l == w).count() != 1 {
            return None;
        }
        let k = lengths.iter().position(|&l| l == w)?;
        let others_short = (0..3).filter(|&m| m != k).all(|m| lengths[m] <= r);
        (w > r && w <= self.max_edge() && others_short).then_some(k)
    }

    fn max_edge(&self) -> f64 {
        Interval::sqrt8().hi() + TOL_GEOM
    }
}

/// Accepts nothing; turns the S-sum off.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoSRule;

impl SRule for NoSRule {
    fn name(&self) -> &'static str {
        "none"
    }

    fn distinguished_edge(&self, _: &[f64; 3], _: f64) -> Option<usize> {
        None
    }

    fn max_edge(&self) -> f64 {
        0.0
    }
}

pub fn check_edge_cutoff(r: f64) -> Result<(), PackingError> {
    if r >= 2.0 && r <= Interval::sqrt8().hi() {
        Ok(())
    } else {
        Err(PackingError::ROutOfRange(r))
    }
}

/// All triangles `{i, j, k}` whose pairwise distances satisfy `keep`, with
/// `j, k` drawn from centers within `reach` of `i`.
fn triangles_through(
    p: &PackingPatch,
    i: usize,
    reach: f64,
    keep: impl Fn(&Triangle) -> bool,
) -> Result<Vec<Triangle>, PackingError> {
    let near = neighbors(p, i, reach)?;
    let mut out = Vec::new();
    for (x, &j) in near.iter().enumerate() {
        for &k in &near[x + 1..] {
            if p.distance(j, k) > reach {
                continue;
            }
            let tri = Triangle::from_patch(p, [i, j, k]);
            if keep(&tri) {
                out.push(tri.anchored_at(i).expect("i is a vertex"));
            }
        }
    }
    out.sort_by(|a, b| a.vertices.cmp(&b.vertices));
    out.dedup_by(|a, b| a.vertices == b.vertices);
    Ok(out)
}

/// Triangles with a vertex at `i` and every edge `<= r`, anchored at `i`.
pub fn triangles_t(p: &PackingPatch, i: usize, r: f64) -> Result<Vec<Triangle>, PackingError> {
    check_edge_cutoff(r)?;
    triangles_through(p, i, r, |t| t.lengths.iter().all(|&l| l <= r))
}

/// Triangles through `i` accepted by `rule`, anchored at `i`, with the
/// distinguished edge set.
pub fn triangles_s(
    p: &PackingPatch,
    i: usize,
    r: f64,
    rule: &dyn SRule,
) -> Result<Vec<Triangle>, PackingError> {
    check_edge_cutoff(r)?;
    let reach = rule.max_edge();
    if reach < 2.0 - TOL_GEOM {
        p.center(i)?;
        return Ok(Vec::new());
    }
    let mut out = triangles_through(p, i, reach, |t| rule.distinguished_edge(&t.lengths, r).is_some())?;
    for t in &mut out {
        t.distinguished = rule.distinguished_edge(&t.lengths, r);
    }
    Ok(out)
}

// ---- document I/O -------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PatchDoc {
    radius_unit: String,
    centers: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lattice: Option<LatticeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    region: Option<Region>,
}

#[derive(Serialize, Deserialize)]
struct LatticeDoc {
    basis: [[f64; 3]; 3],
    offsets: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metric: Option<[[f64; 3]; 3]>,
}

pub fn save_patch<W: Write>(p: &PackingPatch, mut out: W) -> Result<(), PackingError> {
    let doc = PatchDoc {
        radius_unit: "ball_radius".into(),
        centers: p.centers.iter().map(|c| [c.x, c.y, c.z]).collect(),
        lattice: p.lattice.as_ref().map(|l| LatticeDoc {
            basis: l.basis,
            offsets: l.offsets.clone(),
            metric: Some(l.metric),
        }),
        region: p.region,
    };
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| PackingError::Malformed(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

pub fn load_patch<R: Read>(input: R) -> Result<PackingPatch, PackingError> {
    let doc: PatchDoc =
        serde_json::from_reader(input).map_err(|e| PackingError::Malformed(e.to_string()))?;
    if doc.radius_unit != "ball_radius" {
        return Err(PackingError::Malformed(format!(
            "unsupported radius_unit `{}`",
            doc.radius_unit
        )));
    }
    let centers: Vec<Point> = doc.centers.iter().map(|c| Point::new(c[0], c[1], c[2])).collect();
    if centers.iter().any(|c| !c.iter().all(|x| x.is_finite())) {
        return Err(PackingError::Malformed("non-finite coordinate".into()));
    }
    let patch = match doc.lattice {
        None => PackingPatch::new(centers)?,
        Some(ld) => {
            let lattice = match ld.metric {
                Some(metric) => Lattice {
                    basis: ld.basis,
                    offsets: ld.offsets,
                    metric,
                },
                None => Lattice::new(ld.basis, ld.offsets),
            };
            if lattice.offsets.is_empty() {
                return Err(PackingError::Malformed("lattice without offsets".into()));
            }
            let labels = centers
                .iter()
                .enumerate()
                .map(|(idx, c)| recover_label(&lattice, c, idx))
                .collect::<Result<Vec<_>, _>>()?;
            let mut patch = PackingPatch::from_labels(lattice, labels)?;
            // Keep the stored coordinates verbatim.
            patch.centers = centers;
            patch
        }
    };
    Ok(patch.with_region(doc.region))
}

fn recover_label(lat: &Lattice, c: &Point, idx: usize) -> Result<LatticeLabel, PackingError> {
    let inv = lat
        .basis_matrix()
        .try_inverse()
        .ok_or_else(|| PackingError::Malformed("singular lattice basis".into()))?;
    // Row vector frac with frac * B = c, i.e. frac = c^T B^{-1}.
    let frac = inv.transpose() * c;
    for (offset, f) in lat.offsets.iter().enumerate() {
        let cell = [
            (frac[0] - f[0]).round() as i64,
            (frac[1] - f[1]).round() as i64,
            (frac[2] - f[2]).round() as i64,
        ];
        let label = LatticeLabel { offset, cell };
        if (lat.to_cartesian(label_frac(lat, &label)) - c).norm() <= 1e-9 {
            return Ok(label);
        }
    }
    Err(PackingError::Malformed(format!(
        "center {idx} is not a lattice image of any offset"
    )))
}
