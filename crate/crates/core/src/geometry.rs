//! Directions, support vectors, convex polygons, and set distances.
//!
//! A body is described either parametrically ([`ShapeModel`]) or through its
//! support values `h_i = h_K(u_i)` over a fixed [`DirectionSet`] of outer
//! normals. A support vector is *consistent* when some convex polygon with
//! exactly those normals realizes it; consistency is a finite family of
//! linear inequalities in `h` (cyclic, three consecutive entries each), and
//! the polygon vertices are rational linear expressions in `h`. Everything
//! downstream (moment polynomials, the feasible set of the estimator) builds
//! on those two facts.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Absolute tolerance for the consistency inequalities.
pub const CONSISTENCY_TOL: f64 = 1e-10;
/// Consecutive vertices closer than this (in either coordinate) are merged.
pub const VERTEX_MERGE_TOL: f64 = 1e-12;
/// Convexity slack when validating vertex lists.
const CONVEXITY_TOL: f64 = 1e-9;

#[derive(Serialize, Deserialize)]
struct AnglesJson {
    angles_rad: Vec<f64>,
}

/// Strictly increasing angles in `[0, 2pi)` with every cyclic gap `< pi`.
///
/// The gap condition keeps every adjacent pair of normals linearly
/// independent (positively spanning the plane), which is what the vertex
/// formulas divide by.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "AnglesJson")]
pub struct DirectionSet {
    angles: Vec<f64>,
    cosines: Vec<f64>,
    sines: Vec<f64>,
}

impl From<DirectionSet> for AnglesJson {
    fn from(d: DirectionSet) -> Self {
        AnglesJson { angles_rad: d.angles }
    }
}

impl<'de> Deserialize<'de> for DirectionSet {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = AnglesJson::deserialize(de)?;
        DirectionSet::new(raw.angles_rad).map_err(serde::de::Error::custom)
    }
}

impl DirectionSet {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        let n = angles.len();
        if n < 3 {
            return Err(Error::InvalidDirections(format!(
                "need at least 3 directions, got {n}"
            )));
        }
        let tau = std::f64::consts::TAU;
        for (i, &a) in angles.iter().enumerate() {
            if !a.is_finite() || !(0.0..tau).contains(&a) {
                return Err(Error::InvalidDirections(format!(
                    "angle {i} = {a} is not in [0, 2pi)"
                )));
            }
            if i > 0 && a <= angles[i - 1] {
                return Err(Error::InvalidDirections(format!(
                    "angles must be strictly increasing, violated at index {i}"
                )));
            }
        }
        for i in 0..n {
            let gap = if i + 1 < n {
                angles[i + 1] - angles[i]
            } else {
                angles[0] + tau - angles[n - 1]
            };
            if gap >= std::f64::consts::PI {
                return Err(Error::InvalidDirections(format!(
                    "cyclic gap after index {i} is {gap:.6} rad, must be < pi"
                )));
            }
        }
        let cosines = angles.iter().map(|a| a.cos()).collect();
        let sines = angles.iter().map(|a| a.sin()).collect();
        Ok(Self { angles, cosines, sines })
    }

    /// `n` equally spaced directions starting at angle 0. With `n` divisible
    /// by 4 the set contains all four axis directions exactly.
    pub fn equidistant(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidDirections(format!(
                "need at least 3 directions, got {n}"
            )));
        }
        let tau = std::f64::consts::TAU;
        Self::new((0..n).map(|i| tau * i as f64 / n as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Unit vector of direction `i`.
    pub fn unit(&self, i: usize) -> [f64; 2] {
        [self.cosines[i], self.sines[i]]
    }

    pub fn cosines(&self) -> &[f64] {
        &self.cosines
    }

    pub fn sines(&self) -> &[f64] {
        &self.sines
    }

    /// Cyclic gap from direction `i` to its successor.
    pub fn gap(&self, i: usize) -> f64 {
        let n = self.len();
        if i + 1 < n {
            self.angles[i + 1] - self.angles[i]
        } else {
            self.angles[0] + std::f64::consts::TAU - self.angles[n - 1]
        }
    }

    /// Largest cyclic gap between consecutive directions.
    pub fn max_gap(&self) -> f64 {
        (0..self.len()).map(|i| self.gap(i)).fold(0.0, f64::max)
    }

    /// True when all four axis directions `0, pi/2, pi, 3pi/2` are present
    /// (within `1e-12`). Required wherever results must stay in the unit
    /// square.
    pub fn includes_axes(&self) -> bool {
        let quarters = [
            0.0,
            std::f64::consts::FRAC_PI_2,
            std::f64::consts::PI,
            1.5 * std::f64::consts::PI,
        ];
        quarters
            .iter()
            .all(|q| self.angles.iter().any(|a| (a - q).abs() < 1e-12))
    }
}

#[derive(Serialize, Deserialize)]
struct SupportJson {
    angles_rad: Vec<f64>,
    h: Vec<f64>,
}

/// Support values over a direction set. Not necessarily consistent: the
/// estimator moves through inconsistent vectors freely and only the polygon
/// extraction insists on consistency.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "SupportJson")]
pub struct SupportVector {
    directions: DirectionSet,
    h: Vec<f64>,
}

impl From<SupportVector> for SupportJson {
    fn from(sv: SupportVector) -> Self {
        SupportJson { angles_rad: sv.directions.angles, h: sv.h }
    }
}

impl<'de> Deserialize<'de> for SupportVector {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = SupportJson::deserialize(de)?;
        let dirs = DirectionSet::new(raw.angles_rad).map_err(serde::de::Error::custom)?;
        SupportVector::new(dirs, raw.h).map_err(serde::de::Error::custom)
    }
}

impl SupportVector {
    pub fn new(directions: DirectionSet, h: Vec<f64>) -> Result<Self> {
        if h.len() != directions.len() {
            return Err(Error::SupportLengthMismatch {
                found: h.len(),
                expected: directions.len(),
            });
        }
        if let Some(bad) = h.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("support value {bad} is not finite")));
        }
        Ok(Self { directions, h })
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.directions
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// Checks the cyclic consistency inequalities
    ///
    /// ```text
    /// h_{i-1} sin(t_{i+1} - t_i) - h_i sin(t_{i+1} - t_{i-1})
    ///   + h_{i+1} sin(t_i - t_{i-1}) >= 0
    /// ```
    ///
    /// (written below through products of the stored sines/cosines, which
    /// handles the cyclic wrap-around for free). Exact zeros, i.e. segments
    /// and points, are accepted; the tolerance is [`CONSISTENCY_TOL`].
    pub fn is_consistent(&self) -> bool {
        self.worst_consistency_residual() >= -CONSISTENCY_TOL
    }

    /// Smallest left-hand side over the consistency inequalities (negative
    /// means violated).
    pub fn worst_consistency_residual(&self) -> f64 {
        let d = &self.directions;
        let n = d.len();
        let h = &self.h;
        let mut worst = f64::INFINITY;
        for i in 0..n {
            let im1 = (i + n - 1) % n;
            let ip1 = (i + 1) % n;
            let (ci, si) = (d.cosines[i], d.sines[i]);
            let (cm, sm) = (d.cosines[im1], d.sines[im1]);
            let (cp, sp) = (d.cosines[ip1], d.sines[ip1]);
            let expr = h[im1] * (sp * ci - cp * si) - h[i] * (sp * cm - cp * sm)
                + h[ip1] * (si * cm - ci * sm);
            worst = worst.min(expr);
        }
        worst
    }

    /// Extracts the polygon realizing a consistent support vector. Vertex `i`
    /// is the intersection of the support lines of directions `i` and `i+1`:
    ///
    /// ```text
    /// v_i = ( (h_i s_{i+1} - h_{i+1} s_i) / D_i,
    ///         (h_{i+1} c_i - h_i c_{i+1}) / D_i ),   D_i = sin(t_{i+1} - t_i)
    /// ```
    ///
    /// Consecutive duplicates (within [`VERTEX_MERGE_TOL`]) are merged, so
    /// segments and points come out with 2 or 1 vertices.
    pub fn to_polygon(&self) -> Result<ConvexPolygon> {
        let worst = self.worst_consistency_residual();
        if worst < -CONSISTENCY_TOL {
            return Err(Error::InconsistentSupport { worst });
        }
        let verts = self.raw_vertices()?;
        Ok(ConvexPolygon::from_loop(merge_consecutive(verts)))
    }

    /// Vertices before duplicate merging, one per direction.
    pub fn raw_vertices(&self) -> Result<Vec<[f64; 2]>> {
        Ok(raw_vertices_unchecked(&self.directions, &self.h))
    }
}

/// Support-line intersection vertices for any `h` over validated directions
/// (adjacent gaps below pi guarantee positive denominators). Hot paths in the
/// moment and objective evaluators call this directly with raw iterates.
pub(crate) fn raw_vertices_unchecked(d: &DirectionSet, h: &[f64]) -> Vec<[f64; 2]> {
    let n = d.len();
    let mut verts = Vec::with_capacity(n);
    for i in 0..n {
        let ip1 = (i + 1) % n;
        let (ci, si) = (d.cosines[i], d.sines[i]);
        let (cp, sp) = (d.cosines[ip1], d.sines[ip1]);
        let den = ci * sp - si * cp;
        verts.push([(h[i] * sp - h[ip1] * si) / den, (h[ip1] * ci - h[i] * cp) / den]);
    }
    verts
}

fn merge_consecutive(verts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(verts.len());
    for v in verts {
        if let Some(last) = out.last() {
            if (last[0] - v[0]).abs() <= VERTEX_MERGE_TOL && (last[1] - v[1]).abs() <= VERTEX_MERGE_TOL
            {
                continue;
            }
        }
        out.push(v);
    }
    // cyclic wrap: last may duplicate first
    while out.len() > 1 {
        let first = out[0];
        let last = *out.last().unwrap();
        if (last[0] - first[0]).abs() <= VERTEX_MERGE_TOL
            && (last[1] - first[1]).abs() <= VERTEX_MERGE_TOL
        {
            out.pop();
        } else {
            break;
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct VerticesJson {
    vertices: Vec<[f64; 2]>,
}

/// Convex polygon as a counterclockwise vertex list. Lists with one or two
/// distinct vertices are allowed and represent degenerate (area zero)
/// bodies; constructors reject reversed or non-convex input.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "VerticesJson")]
pub struct ConvexPolygon {
    vertices: Vec<[f64; 2]>,
}

impl From<ConvexPolygon> for VerticesJson {
    fn from(p: ConvexPolygon) -> Self {
        VerticesJson { vertices: p.vertices }
    }
}

impl<'de> Deserialize<'de> for ConvexPolygon {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = VerticesJson::deserialize(de)?;
        ConvexPolygon::new(raw.vertices).map_err(serde::de::Error::custom)
    }
}

impl ConvexPolygon {
    /// Validates a counterclockwise convex vertex list (cross products of
    /// consecutive edges `>= 0` up to a small slack, total turning one full
    /// counterclockwise revolution). Consecutive duplicates are merged.
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidPolygon("empty vertex list".into()));
        }
        if let Some(v) = vertices
            .iter()
            .find(|v| !v[0].is_finite() || !v[1].is_finite())
        {
            return Err(Error::InvalidPolygon(format!(
                "vertex ({}, {}) is not finite",
                v[0], v[1]
            )));
        }
        let vertices = merge_consecutive(vertices);
        let n = vertices.len();
        if n >= 3 {
            let mut signed2 = 0.0;
            for i in 0..n {
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                let c = vertices[(i + 2) % n];
                let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
                if cross < -CONVEXITY_TOL {
                    return Err(Error::InvalidPolygon(format!(
                        "not convex/counterclockwise at vertex {}",
                        (i + 1) % n
                    )));
                }
                signed2 += a[0] * b[1] - a[1] * b[0];
            }
            if signed2 < 0.0 {
                return Err(Error::InvalidPolygon("vertices wind clockwise".into()));
            }
        }
        Ok(Self { vertices })
    }

    /// Builds from pre-validated cyclic output (used by the support-vector
    /// extraction where convexity holds by construction).
    fn from_loop(vertices: Vec<[f64; 2]>) -> Self {
        Self { vertices }
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Fewer than three vertices, or (numerically) zero area.
    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3 || self.area() <= 1e-14
    }

    /// Shoelace area (counterclockwise lists give nonnegative values).
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            s += a[0] * b[1] - a[1] * b[0];
        }
        0.5 * s
    }

    /// Support value `max_v <v, (cos t, sin t)>`.
    pub fn support_value(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.vertices
            .iter()
            .map(|v| v[0] * c + v[1] * s)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Point membership with slack `tol` (nondegenerate polygons only give
    /// meaningful answers; degenerate ones report false).
    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            if cross < -tol {
                return false;
            }
        }
        true
    }

    /// Euclidean distance from a point to the polygon (zero inside).
    pub fn distance_to_point(&self, p: [f64; 2]) -> f64 {
        if self.contains(p, 0.0) {
            return 0.0;
        }
        let n = self.vertices.len();
        if n == 1 {
            let v = self.vertices[0];
            return ((p[0] - v[0]).powi(2) + (p[1] - v[1]).powi(2)).sqrt();
        }
        let mut best = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            best = best.min(point_segment_distance(p, a, b));
        }
        best
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("polygon serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidPolygon(format!("json: {e}")))
    }
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Axis-aligned ellipse description rotated by `rotation_rad`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    /// Semi-axis lengths `[a, b]` along the rotated x/y axes.
    pub semi_axes: [f64; 2],
    #[serde(default)]
    pub rotation_rad: f64,
}

/// Parametric convex body, constrained to the unit square wherever moments
/// or support-vector sampling are requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShapeModel {
    Polygon(ConvexPolygon),
    Ellipse(Ellipse),
}

impl ShapeModel {
    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let shape = ShapeModel::Polygon(ConvexPolygon::new(vertices)?);
        shape.validate_in_unit_square()?;
        Ok(shape)
    }

    pub fn ellipse(center: [f64; 2], semi_axes: [f64; 2], rotation_rad: f64) -> Result<Self> {
        if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) {
            return Err(Error::InvalidEllipse { a: semi_axes[0], b: semi_axes[1] });
        }
        let shape = ShapeModel::Ellipse(Ellipse { center, semi_axes, rotation_rad });
        shape.validate_in_unit_square()?;
        Ok(shape)
    }

    /// Exact support value in direction `theta`.
    ///
    /// Polygons take the max over vertices; ellipses use the closed form
    /// `<c,u> + sqrt((a <u,e>)^2 + (b <u,e_perp>)^2)` with `e` the rotated
    /// major-axis direction.
    pub fn support_value(&self, theta: f64) -> f64 {
        match self {
            ShapeModel::Polygon(p) => p.support_value(theta),
            ShapeModel::Ellipse(e) => {
                let (s, c) = theta.sin_cos();
                let (sr, cr) = e.rotation_rad.sin_cos();
                let along = c * cr + s * sr;
                let across = -c * sr + s * cr;
                e.center[0] * c
                    + e.center[1] * s
                    + ((e.semi_axes[0] * along).powi(2) + (e.semi_axes[1] * across).powi(2)).sqrt()
            }
        }
    }

    /// Verifies the body lies in `[0,1]^2` by checking the four axis support
    /// values; the error names the violated direction.
    pub fn validate_in_unit_square(&self) -> Result<()> {
        let checks = [
            (0.0, 1.0),
            (std::f64::consts::FRAC_PI_2, 1.0),
            (std::f64::consts::PI, 0.0),
            (1.5 * std::f64::consts::PI, 0.0),
        ];
        for (theta, limit) in checks {
            let support = self.support_value(theta);
            if support > limit + 1e-12 {
                return Err(Error::ShapeOutsideUnitSquare { theta, support, limit });
            }
        }
        Ok(())
    }

    /// Samples the exact support function over `directions`. The result is
    /// always consistent (support vectors of convex bodies satisfy the
    /// consistency inequalities by definition).
    pub fn polygonize(&self, directions: &DirectionSet) -> Result<SupportVector> {
        self.validate_in_unit_square()?;
        let h = directions.angles().iter().map(|&t| self.support_value(t)).collect();
        SupportVector::new(directions.clone(), h)
    }

    /// A point in the (closure of the) body, used as a quadrature anchor.
    pub fn anchor(&self) -> [f64; 2] {
        match self {
            ShapeModel::Polygon(p) => {
                let n = p.vertices.len().max(1) as f64;
                let (mut x, mut y) = (0.0, 0.0);
                for v in &p.vertices {
                    x += v[0];
                    y += v[1];
                }
                [x / n, y / n]
            }
            ShapeModel::Ellipse(e) => e.center,
        }
    }

    /// Fine inscribed polygonal approximation (vertices on the boundary).
    /// Polygons return themselves; ellipses use `samples` boundary points.
    pub fn to_fine_polygon(&self, samples: usize) -> ConvexPolygon {
        match self {
            ShapeModel::Polygon(p) => p.clone(),
            ShapeModel::Ellipse(e) => {
                let (sr, cr) = e.rotation_rad.sin_cos();
                let pts = (0..samples)
                    .map(|i| {
                        let t = std::f64::consts::TAU * i as f64 / samples as f64;
                        let (st, ct) = t.sin_cos();
                        let lx = e.semi_axes[0] * ct;
                        let ly = e.semi_axes[1] * st;
                        [
                            e.center[0] + lx * cr - ly * sr,
                            e.center[1] + lx * sr + ly * cr,
                        ]
                    })
                    .collect();
                ConvexPolygon::from_loop(pts)
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("shape serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidConfig(format!("shape json: {e}")))
    }
}

/// Intersection of two convex counterclockwise polygons via
/// Sutherland-Hodgman clipping. Returns the (possibly empty) vertex loop.
pub fn intersect_convex(p: &ConvexPolygon, q: &ConvexPolygon) -> Vec<[f64; 2]> {
    if p.len() < 3 || q.len() < 3 {
        return Vec::new();
    }
    let mut subject: Vec<[f64; 2]> = p.vertices.clone();
    let clip = &q.vertices;
    let n = clip.len();
    for i in 0..n {
        if subject.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let inside = |v: [f64; 2]| (b[0] - a[0]) * (v[1] - a[1]) - (b[1] - a[1]) * (v[0] - a[0]) >= 0.0;
        let input = std::mem::take(&mut subject);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let cur_in = inside(cur);
            let prev_in = inside(prev);
            if cur_in != prev_in {
                // segment crosses the clip line; interpolate
                let dx = cur[0] - prev[0];
                let dy = cur[1] - prev[1];
                let denom = (b[0] - a[0]) * dy - (b[1] - a[1]) * dx;
                if denom != 0.0 {
                    let t = ((b[0] - a[0]) * (a[1] - prev[1]) - (b[1] - a[1]) * (a[0] - prev[0]))
                        / denom;
                    subject.push([prev[0] + t * dx, prev[1] + t * dy]);
                }
            }
            if cur_in {
                subject.push(cur);
            }
        }
    }
    subject
}

fn loop_area(verts: &[[f64; 2]]) -> f64 {
    let n = verts.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s
}

/// Nikodym (symmetric-difference) distance
/// `A(P) + A(Q) - 2 A(P intersect Q)`.
///
/// A pseudo-metric on polygons: degenerate bodies have area zero, so
/// distinct degenerate bodies are at distance zero from each other.
pub fn nikodym_distance(p: &ConvexPolygon, q: &ConvexPolygon) -> f64 {
    let inter = loop_area(&intersect_convex(p, q));
    (p.area() + q.area() - 2.0 * inter).max(0.0)
}

/// Hausdorff distance between two nondegenerate convex polygons.
///
/// For convex sets the maximum of `d(x, Q)` over `x in P` is attained at a
/// vertex of `P`, so scanning both vertex sets against the other polygon's
/// edges is exact.
pub fn hausdorff_distance(p: &ConvexPolygon, q: &ConvexPolygon) -> Result<f64> {
    if p.is_degenerate() || q.is_degenerate() {
        return Err(Error::DegeneratePolygon);
    }
    let mut d: f64 = 0.0;
    for v in p.vertices() {
        d = d.max(q.distance_to_point(*v));
    }
    for v in q.vertices() {
        d = d.max(p.distance_to_point(*v));
    }
    Ok(d)
}

/// Convex hull (Andrew's monotone chain), counterclockwise without
/// collinear points. Fewer than three distinct input points yield the
/// degenerate hull.
pub fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let n = pts.len();
    if n < 3 {
        return pts;
    }
    let cross =
        |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * n);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev() {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Random convex polygon inside `[margin, 1-margin]^2`: convex hull of
/// `n_points` uniform samples (resampled in the vanishingly unlikely
/// degenerate case).
pub fn random_convex_polygon<R: rand::Rng>(rng: &mut R, n_points: usize, margin: f64) -> ConvexPolygon {
    let lo = margin;
    let hi = 1.0 - margin;
    loop {
        let pts: Vec<[f64; 2]> = (0..n_points.max(3))
            .map(|_| [rng.random_range(lo..hi), rng.random_range(lo..hi)])
            .collect();
        let hull = convex_hull(pts);
        if hull.len() >= 3 {
            return ConvexPolygon::from_loop(hull);
        }
    }
}

/// Smallest enclosing circle of a point set (Welzl's algorithm, expected
/// linear time); returns `(center, radius)`. Used to get exact circumradii
/// of polygons.
pub fn min_enclosing_circle(points: &[[f64; 2]]) -> ([f64; 2], f64) {
    assert!(!points.is_empty());
    let mut pts = points.to_vec();
    // deterministic shuffle; input orders here are already arbitrary
    let n = pts.len();
    let mut state = 0x9e3779b97f4a7c15u64 ^ (n as u64);
    for i in (1..n).rev() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        pts.swap(i, (state % (i as u64 + 1)) as usize);
    }
    let mut c = (pts[0], 0.0);
    for i in 1..n {
        if dist(pts[i], c.0) > c.1 + 1e-14 {
            c = (pts[i], 0.0);
            for j in 0..i {
                if dist(pts[j], c.0) > c.1 + 1e-14 {
                    c = circle_two(pts[i], pts[j]);
                    for k in 0..j {
                        if dist(pts[k], c.0) > c.1 + 1e-14 {
                            c = circle_three(pts[i], pts[j], pts[k]);
                        }
                    }
                }
            }
        }
    }
    c
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn circle_two(a: [f64; 2], b: [f64; 2]) -> ([f64; 2], f64) {
    let c = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    (c, dist(a, c))
}

fn circle_three(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> ([f64; 2], f64) {
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    if d.abs() < 1e-30 {
        // collinear; fall back to the widest pair
        let cands = [circle_two(a, b), circle_two(a, c), circle_two(b, c)];
        return cands
            .into_iter()
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
    }
    let a2 = a[0] * a[0] + a[1] * a[1];
    let b2 = b[0] * b[0] + b[1] * b[1];
    let c2 = c[0] * c[0] + c[1] * c[1];
    let ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d;
    let uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d;
    let center = [ux, uy];
    (center, dist(a, center).max(dist(b, center)).max(dist(c, center)))
}
