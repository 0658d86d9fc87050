//! Planar convex geometry: vectors, convex polygons, grain shapes, the
//! periodic window, and polygon predicates used throughout the crate.
//!
//! Polygons are vertex lists in counterclockwise order with strictly convex
//! corners. Grain shapes are parametric (ellipse, rectangle, explicit
//! polygon) and are discretized to polygons before simulation or
//! measurement.

pub(crate) mod union;

pub use union::{union_on_torus, BoundaryLoop, BoundarySegment, PolyconvexRegion};

use std::ops::{Add, Div, Mul, Neg, Sub};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon is not strictly convex and counterclockwise at vertex {0}")]
    NotStrictlyConvex(usize),
    #[error("invalid shape parameter: {0}")]
    BadParameter(String),
    #[error("window side {side} must exceed twice the grain circumradius {circumradius}")]
    WindowTooSmall { side: f64, circumradius: f64 },
    #[error("boundary stitching failed: {0}")]
    Stitch(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm2(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn rotated(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Counterclockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Angle in (-pi, pi].
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, k: f64) -> Vec2 {
        Vec2::new(self.x / k, self.y / k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Convex polygon with counterclockwise vertices and strictly convex corners.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    verts: Vec<Vec2>,
}

impl ConvexPolygon {
    /// Validates orientation and strict convexity. The convexity test is
    /// relative: each corner's cross product must exceed 1e-12 times the
    /// product of adjacent edge lengths.
    pub fn new(verts: Vec<Vec2>) -> Result<Self, GeomError> {
        let n = verts.len();
        if n < 3 {
            return Err(GeomError::TooFewVertices(n));
        }
        for i in 0..n {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            let c = verts[(i + 2) % n];
            let e1 = b - a;
            let e2 = c - b;
            if e1.cross(e2) <= 1e-12 * e1.norm() * e2.norm() {
                return Err(GeomError::NotStrictlyConvex((i + 1) % n));
            }
        }
        Ok(Self { verts })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.verts
    }

    pub fn num_vertices(&self) -> usize {
        self.verts.len()
    }

    /// Directed edges (a, b).
    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.verts.len();
        (0..n).map(move |i| (self.verts[i], self.verts[(i + 1) % n]))
    }

    /// Outward unit normal of edge i (from vertex i to vertex i+1).
    pub fn edge_normal(&self, i: usize) -> Vec2 {
        let n = self.verts.len();
        let e = self.verts[(i + 1) % n] - self.verts[i];
        Vec2::new(e.y, -e.x).normalized()
    }

    pub fn area(&self) -> f64 {
        let n = self.verts.len();
        let mut s = 0.0;
        for i in 0..n {
            s += self.verts[i].cross(self.verts[(i + 1) % n]);
        }
        0.5 * s
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.verts.len();
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a = 0.0;
        for i in 0..n {
            let p = self.verts[i];
            let q = self.verts[(i + 1) % n];
            let w = p.cross(q);
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
            a += w;
        }
        Vec2::new(cx / (3.0 * a), cy / (3.0 * a))
    }

    /// Largest vertex distance from the origin (grains rotate about the
    /// origin, so this bounds the rotated shape).
    pub fn circumradius(&self) -> f64 {
        self.verts.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Axis-aligned bounding box (min, max).
    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = self.verts[0];
        let mut hi = self.verts[0];
        for v in &self.verts[1..] {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// Closed containment with a small relative slack.
    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.verts.len();
        for i in 0..n {
            let a = self.verts[i];
            let b = self.verts[(i + 1) % n];
            let e = b - a;
            if e.cross(p - a) < -1e-12 * e.norm() * (p - a).norm().max(e.norm()) {
                return false;
            }
        }
        true
    }

    /// Strict interior containment.
    pub fn contains_strict(&self, p: Vec2) -> bool {
        let n = self.verts.len();
        for i in 0..n {
            let a = self.verts[i];
            let b = self.verts[(i + 1) % n];
            let e = b - a;
            if e.cross(p - a) <= 1e-12 * e.norm() * (p - a).norm().max(e.norm()) {
                return false;
            }
        }
        true
    }

    pub fn translated(&self, t: Vec2) -> ConvexPolygon {
        ConvexPolygon {
            verts: self.verts.iter().map(|&v| v + t).collect(),
        }
    }

    pub fn rotated(&self, theta: f64) -> ConvexPolygon {
        ConvexPolygon {
            verts: self.verts.iter().map(|v| v.rotated(theta)).collect(),
        }
    }

    /// Support function h(u) = max_v <v, u>.
    pub fn support(&self, u: Vec2) -> f64 {
        self.verts.iter().map(|v| v.dot(u)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Parametric grain shape. All shapes are star-shaped about the origin,
/// which is the rotation center and the germ attachment point.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseGrain {
    /// Axis-aligned ellipse with semi-axes p (horizontal) and q (vertical),
    /// discretized as the inscribed regular-angle m-gon.
    Ellipse { p: f64, q: f64, m: usize },
    /// Origin-centered rectangle with full side lengths a and b.
    Rectangle { a: f64, b: f64 },
    /// Explicit convex polygon.
    Polygon(ConvexPolygon),
}

impl BaseGrain {
    pub fn validate(&self) -> Result<(), GeomError> {
        match self {
            BaseGrain::Ellipse { p, q, m } => {
                if !(p.is_finite() && q.is_finite() && *p > 0.0 && *q > 0.0) {
                    return Err(GeomError::BadParameter(format!(
                        "ellipse semi-axes must be positive, got p={p}, q={q}"
                    )));
                }
                if *m < 8 {
                    return Err(GeomError::BadParameter(format!(
                        "ellipse discretization needs at least 8 vertices, got {m}"
                    )));
                }
                Ok(())
            }
            BaseGrain::Rectangle { a, b } => {
                if !(a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0) {
                    return Err(GeomError::BadParameter(format!(
                        "rectangle sides must be positive, got a={a}, b={b}"
                    )));
                }
                Ok(())
            }
            BaseGrain::Polygon(p) => {
                // Re-run the constructor checks on the stored vertices.
                ConvexPolygon::new(p.vertices().to_vec()).map(|_| ())
            }
        }
    }

    /// Polygonal version used for simulation and polygon-based measurement.
    /// Ellipses take vertices at parameter angles 2 pi k / m on the ellipse
    /// itself (an inscribed polygon).
    pub fn discretize(&self) -> Result<ConvexPolygon, GeomError> {
        self.validate()?;
        match self {
            BaseGrain::Ellipse { p, q, m } => {
                let verts = (0..*m)
                    .map(|k| {
                        let phi = 2.0 * std::f64::consts::PI * k as f64 / *m as f64;
                        Vec2::new(p * phi.cos(), q * phi.sin())
                    })
                    .collect();
                ConvexPolygon::new(verts)
            }
            BaseGrain::Rectangle { a, b } => {
                let (hx, hy) = (a / 2.0, b / 2.0);
                ConvexPolygon::new(vec![
                    Vec2::new(hx, hy),
                    Vec2::new(-hx, hy),
                    Vec2::new(-hx, -hy),
                    Vec2::new(hx, -hy),
                ])
            }
            BaseGrain::Polygon(p) => Ok(p.clone()),
        }
    }

    /// Exact area of the grain (the true ellipse area for ellipse grains,
    /// not the area of the inscribed polygon).
    pub fn area(&self) -> f64 {
        match self {
            BaseGrain::Ellipse { p, q, .. } => std::f64::consts::PI * p * q,
            BaseGrain::Rectangle { a, b } => a * b,
            BaseGrain::Polygon(poly) => poly.area(),
        }
    }

    /// Diameter of the grain: the largest distance between two of its
    /// points.
    pub fn diameter(&self) -> f64 {
        match self {
            BaseGrain::Ellipse { p, q, .. } => 2.0 * p.max(*q),
            BaseGrain::Rectangle { a, b } => a.hypot(*b),
            BaseGrain::Polygon(poly) => {
                let vs = poly.vertices();
                let mut best: f64 = 0.0;
                for i in 0..vs.len() {
                    for j in i + 1..vs.len() {
                        best = best.max((vs[i] - vs[j]).norm());
                    }
                }
                best
            }
        }
    }
}

/// Square observation window [0, L)^2 with periodic (toroidal) boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusWindow {
    pub side: f64,
}

impl TorusWindow {
    pub fn new(side: f64) -> Result<Self, GeomError> {
        if !(side.is_finite() && side > 0.0) {
            return Err(GeomError::BadParameter(format!(
                "window side must be positive, got {side}"
            )));
        }
        Ok(Self { side })
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    /// Checks the no-self-overlap condition for a grain of the given
    /// circumradius.
    pub fn admits(&self, circumradius: f64) -> Result<(), GeomError> {
        if self.side > 2.0 * circumradius {
            Ok(())
        } else {
            Err(GeomError::WindowTooSmall {
                side: self.side,
                circumradius,
            })
        }
    }

    /// Wraps a point into [0, L)^2.
    pub fn wrap(&self, p: Vec2) -> Vec2 {
        let l = self.side;
        Vec2::new(p.x.rem_euclid(l), p.y.rem_euclid(l))
    }
}

/// Intersection of two convex polygons via half-plane clipping. Returns
/// None when the intersection has (numerically) empty interior.
pub fn convex_intersect(subject: &ConvexPolygon, clip: &ConvexPolygon) -> Option<ConvexPolygon> {
    let scale = subject
        .vertices()
        .iter()
        .chain(clip.vertices())
        .map(|v| v.x.abs().max(v.y.abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;

    let mut cur: Vec<Vec2> = subject.vertices().to_vec();
    let n = clip.num_vertices();
    for i in 0..n {
        let a = clip.vertices()[i];
        let b = clip.vertices()[(i + 1) % n];
        let e = (b - a).normalized();
        // signed distance to the inside (left of a->b)
        let sd = |p: Vec2| e.cross(p - a);
        let mut next: Vec<Vec2> = Vec::with_capacity(cur.len() + 1);
        for j in 0..cur.len() {
            let p = cur[j];
            let q = cur[(j + 1) % cur.len()];
            let dp = sd(p);
            let dq = sd(q);
            if dp >= -tol {
                next.push(p);
            }
            if (dp > tol && dq < -tol) || (dp < -tol && dq > tol) {
                let t = dp / (dp - dq);
                next.push(p + (q - p) * t);
            }
        }
        cur = next;
        if cur.is_empty() {
            return None;
        }
    }

    // Cleanup: drop near-duplicate and collinear vertices.
    let mut cleaned: Vec<Vec2> = Vec::with_capacity(cur.len());
    for &p in &cur {
        if cleaned.last().map_or(true, |&q| (p - q).norm() > tol) {
            cleaned.push(p);
        }
    }
    while cleaned.len() > 1 && (cleaned[0] - *cleaned.last().unwrap()).norm() <= tol {
        cleaned.pop();
    }
    let mut out: Vec<Vec2> = Vec::with_capacity(cleaned.len());
    let m = cleaned.len();
    for i in 0..m {
        let prev = cleaned[(i + m - 1) % m];
        let here = cleaned[i];
        let next = cleaned[(i + 1) % m];
        if (here - prev).cross(next - here) > tol * tol {
            out.push(here);
        }
    }
    if out.len() < 3 {
        return None;
    }
    let poly = ConvexPolygon { verts: out };
    if poly.area() <= tol * tol {
        return None;
    }
    Some(poly)
}

/// Euler characteristic of a finite union of convex polygons by
/// inclusion-exclusion over nonempty intersections. Assumes generic
/// position (pairwise intersections are either empty or have interior
/// points). Exponential in the worst case but fast when overlaps are
/// local; used as an oracle for the boundary-walk computation.
pub fn euler_by_inclusion_exclusion(bodies: &[ConvexPolygon]) -> i64 {
    fn dfs(bodies: &[ConvexPolygon], start: usize, current: &ConvexPolygon, depth: u32) -> i64 {
        let mut acc = 0i64;
        for i in start..bodies.len() {
            if let Some(inter) = convex_intersect(current, &bodies[i]) {
                // depth+1 bodies in this intersection: sign (-1)^(depth)
                acc += if depth % 2 == 0 { 1 } else { -1 };
                acc += dfs(bodies, i + 1, &inter, depth + 1);
            }
        }
        acc
    }

    let mut total = 0i64;
    for i in 0..bodies.len() {
        total += 1;
        total += dfs(bodies, i + 1, &bodies[i], 1);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square(side: f64, at: Vec2) -> ConvexPolygon {
        ConvexPolygon::new(vec![
            at,
            at + Vec2::new(side, 0.0),
            at + Vec2::new(side, side),
            at + Vec2::new(0.0, side),
        ])
        .unwrap()
    }

    #[test]
    fn polygon_validation() {
        assert!(matches!(
            ConvexPolygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)]),
            Err(GeomError::TooFewVertices(2))
        ));
        // clockwise square rejected
        assert!(ConvexPolygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
        ])
        .is_err());
        // collinear midpoint rejected
        assert!(ConvexPolygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.5, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ])
        .is_err());
    }

    #[test]
    fn area_perimeter_centroid() {
        let s = square(2.0, Vec2::new(1.0, 1.0));
        assert_relative_eq!(s.area(), 4.0);
        assert_relative_eq!(s.perimeter(), 8.0);
        let c = s.centroid();
        assert_relative_eq!(c.x, 2.0);
        assert_relative_eq!(c.y, 2.0);
    }

    #[test]
    fn rectangle_discretization() {
        let g = BaseGrain::Rectangle { a: 3.0, b: 1.0 };
        let p = g.discretize().unwrap();
        assert_eq!(p.num_vertices(), 4);
        assert_relative_eq!(p.area(), 3.0);
        assert_relative_eq!(p.perimeter(), 8.0);
        assert_relative_eq!(p.circumradius(), (1.5f64.powi(2) + 0.25).sqrt());
    }

    #[test]
    fn ellipse_discretization_area() {
        // Inscribed m-gon with vertices at parameter angles 2 pi k / m has
        // area (m/2) p q sin(2 pi / m).
        let (p, q, m) = (2.0, 0.5, 30usize);
        let poly = BaseGrain::Ellipse { p, q, m }.discretize().unwrap();
        let expect = 0.5 * m as f64 * p * q * (2.0 * std::f64::consts::PI / m as f64).sin();
        assert_relative_eq!(poly.area(), expect, max_relative = 1e-13);
        assert_relative_eq!(poly.circumradius(), p, max_relative = 1e-13);
        assert!(BaseGrain::Ellipse { p, q, m: 7 }.discretize().is_err());
    }

    #[test]
    fn edge_normals_point_outward() {
        let s = square(1.0, Vec2::ZERO);
        let c = s.centroid();
        for i in 0..4 {
            let n = s.edge_normal(i);
            let (a, b) = (s.vertices()[i], s.vertices()[(i + 1) % 4]);
            let mid = (a + b) * 0.5;
            assert!(n.dot(mid - c) > 0.0);
            assert_relative_eq!(n.norm(), 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn containment() {
        let s = square(1.0, Vec2::ZERO);
        assert!(s.contains(Vec2::new(0.5, 0.5)));
        assert!(s.contains(Vec2::new(0.0, 0.5))); // boundary closed
        assert!(!s.contains(Vec2::new(1.2, 0.5)));
        assert!(!s.contains_strict(Vec2::new(0.0, 0.5)));
    }

    #[test]
    fn intersect_overlapping_squares() {
        let a = square(1.0, Vec2::ZERO);
        let b = square(1.0, Vec2::new(0.5, 0.5));
        let i = convex_intersect(&a, &b).unwrap();
        assert_relative_eq!(i.area(), 0.25, max_relative = 1e-12);
        assert!(convex_intersect(&a, &square(1.0, Vec2::new(3.0, 0.0))).is_none());
        // touching along an edge: degenerate, treated as empty
        assert!(convex_intersect(&a, &square(1.0, Vec2::new(1.0, 0.0))).is_none());
    }

    #[test]
    fn intersect_is_commutative_in_area() {
        let a = square(2.0, Vec2::new(-1.0, -1.0));
        let tri = ConvexPolygon::new(vec![
            Vec2::new(0.0, -2.0),
            Vec2::new(3.0, 1.0),
            Vec2::new(-3.0, 1.0),
        ])
        .unwrap();
        let ab = convex_intersect(&a, &tri).unwrap();
        let ba = convex_intersect(&tri, &a).unwrap();
        assert_relative_eq!(ab.area(), ba.area(), max_relative = 1e-12);
    }

    #[test]
    fn inclusion_exclusion_chain() {
        // Three squares in a row, consecutive ones overlapping: chi = 1.
        let bodies = vec![
            square(1.0, Vec2::ZERO),
            square(1.0, Vec2::new(0.8, 0.2)),
            square(1.0, Vec2::new(1.6, 0.4)),
        ];
        assert_eq!(euler_by_inclusion_exclusion(&bodies), 1);
        // Two far-apart squares: chi = 2.
        let bodies = vec![square(1.0, Vec2::ZERO), square(1.0, Vec2::new(5.0, 0.0))];
        assert_eq!(euler_by_inclusion_exclusion(&bodies), 2);
    }

    #[test]
    fn inclusion_exclusion_ring_with_hole() {
        // Four rectangles forming a frame with genuine pairwise overlaps
        // around a hole: chi = 4 - 4 = 0.
        let rect = |w: f64, h: f64, at: Vec2| {
            ConvexPolygon::new(vec![
                at,
                at + Vec2::new(w, 0.0),
                at + Vec2::new(w, h),
                at + Vec2::new(0.0, h),
            ])
            .unwrap()
        };
        let bodies = vec![
            rect(3.0, 1.0, Vec2::new(1.0, 1.0)),
            rect(1.0, 3.0, Vec2::new(3.0, 1.0)),
            rect(3.0, 1.0, Vec2::new(1.0, 3.0)),
            rect(1.0, 3.0, Vec2::new(1.0, 1.0)),
        ];
        assert_eq!(euler_by_inclusion_exclusion(&bodies), 0);
    }

    #[test]
    fn torus_wrap() {
        let w = TorusWindow::new(10.0).unwrap();
        let p = w.wrap(Vec2::new(-0.5, 10.5));
        assert_relative_eq!(p.x, 9.5);
        assert_relative_eq!(p.y, 0.5);
        assert!(w.admits(4.9).is_ok());
        assert!(w.admits(5.0).is_err());
    }

    #[test]
    fn support_function() {
        let r = BaseGrain::Rectangle { a: 2.0, b: 4.0 }.discretize().unwrap();
        assert_relative_eq!(r.support(Vec2::new(1.0, 0.0)), 1.0);
        assert_relative_eq!(r.support(Vec2::new(0.0, -1.0)), 2.0);
    }
}
