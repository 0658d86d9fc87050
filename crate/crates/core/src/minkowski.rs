//! Minkowski functionals and tensors of polygons and polyconvex regions.
//!
//! Conventions for a polygon K with counterclockwise boundary:
//!
//! * surface tensors: Phi_1^{r,s}(K) = (1/(r! s! w_{1+s})) sum over edges of
//!   n^s integrated against x^r (arc length), where n is the outward unit
//!   normal and w_m is the surface area of the unit sphere in R^m
//!   (w_1 = 2, w_2 = 2 pi, w_3 = 4 pi). Phi_1^{0,0} is the intrinsic volume
//!   V_1 (half the perimeter); Phi_1^{0,2} of an a x b box is
//!   diag(b, a) / (4 pi).
//! * volume tensors: Phi_2^{r,0}(K) = (1/r!) of the r-th moment of K.
//! * point tensors: Phi_0^{0,s}(K) = (2/(s! w_{s+1})) chi(K) Q^{s/2} for
//!   even s and zero for odd s, where Q is the metric tensor; this holds
//!   for every polyconvex set by additivity.

use crate::geom2d::union::{merge_unit_intervals, offsets};
use crate::geom2d::{ConvexPolygon, GeomError, PolyconvexRegion, Vec2};
use crate::quad::{factorial, omega, GL5};
use crate::tensor::SymTensor2;

/// Surface Minkowski tensor Phi_1^{r,s} of a convex polygon.
pub fn surface_tensor_polygon(poly: &ConvexPolygon, r: usize, s: usize) -> SymTensor2 {
    let mut acc = SymTensor2::zero(r + s);
    let n = poly.num_vertices();
    for k in 0..n {
        let a = poly.vertices()[k];
        let b = poly.vertices()[(k + 1) % n];
        let nu = poly.edge_normal(k);
        let moment = segment_moment(a, b, r);
        let u_pow = SymTensor2::vec_power(nu.x, nu.y, s);
        acc = &acc + &u_pow.sym_mul(&moment);
    }
    &acc * (1.0 / (factorial(r) * factorial(s) * omega(1 + s)))
}

/// Integral of the tensor power x^r over a segment (arc-length measure).
fn segment_moment(a: Vec2, b: Vec2, r: usize) -> SymTensor2 {
    let len = (b - a).norm();
    if r == 0 {
        return SymTensor2::scalar(len);
    }
    let mid = (a + b) * 0.5;
    let half = (b - a) * 0.5;
    let mut acc = SymTensor2::zero(r);
    for (x, w) in GL5 {
        let p = mid + half * x;
        acc = &acc + &(&SymTensor2::vec_power(p.x, p.y, r) * w);
    }
    &acc * (len / 2.0)
}

/// Volume moment tensor Phi_2^{r,0} of a convex polygon, integrated by fan
/// triangulation with a tensor-product Gauss rule on each triangle (exact
/// for the polynomial integrand).
pub fn volume_moment_tensor(poly: &ConvexPolygon, r: usize) -> SymTensor2 {
    let verts = poly.vertices();
    let v0 = verts[0];
    let mut acc = SymTensor2::zero(r);
    for k in 1..verts.len() - 1 {
        let p = verts[k] - v0;
        let q = verts[k + 1] - v0;
        let two_area = p.cross(q);
        if r == 0 {
            acc = &acc + &SymTensor2::scalar(0.5 * two_area);
            continue;
        }
        // Duffy map of the unit square onto the simplex: (u, v) ->
        // s = u (1 - v), t = u v with Jacobian u.
        let mut tri = SymTensor2::zero(r);
        for (xu, wu) in GL5 {
            let u = 0.5 * (xu + 1.0);
            for (xv, wv) in GL5 {
                let v = 0.5 * (xv + 1.0);
                let s = u * (1.0 - v);
                let t = u * v;
                let pt = v0 + p * s + q * t;
                tri = &tri + &(&SymTensor2::vec_power(pt.x, pt.y, r) * (wu * wv * u * 0.25));
            }
        }
        acc = &acc + &(&tri * two_area);
    }
    &acc * (1.0 / factorial(r))
}

/// Point tensor Phi_0^{0,s} of a polyconvex set with Euler characteristic
/// `chi`: (2/(s! w_{s+1})) chi Q^{s/2} for even s, zero for odd s.
pub fn euler_point_tensor(chi: f64, s: usize) -> SymTensor2 {
    if s % 2 == 1 {
        return SymTensor2::zero(s);
    }
    &SymTensor2::q_power(s) * (2.0 * chi / (factorial(s) * omega(s + 1)))
}

/// Mixed functional of two convex polygons:
/// (1/(2 pi)) sum over edge pairs of L_i M_j alpha_ij sin(alpha_ij), with
/// alpha_ij the angle in [0, pi] between the outward normals.
pub fn mixed_v11(p: &ConvexPolygon, q: &ConvexPolygon) -> f64 {
    let np = p.num_vertices();
    let nq = q.num_vertices();
    let mut acc = 0.0;
    for i in 0..np {
        let (a1, a2) = (p.vertices()[i], p.vertices()[(i + 1) % np]);
        let li = (a2 - a1).norm();
        let ni = p.edge_normal(i);
        for j in 0..nq {
            let (b1, b2) = (q.vertices()[j], q.vertices()[(j + 1) % nq]);
            let mj = (b2 - b1).norm();
            let nj = q.edge_normal(j);
            let alpha = ni.dot(nj).clamp(-1.0, 1.0).acos();
            acc += li * mj * alpha * alpha.sin();
        }
    }
    acc / (2.0 * std::f64::consts::PI)
}

/// Angle kernel t -> A sin A with A the distance of t to 2 pi Z; the
/// summand of `mixed_v11` as a function of the normal-angle difference.
pub fn angle_kernel(t: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut a = t.rem_euclid(tau);
    if a > std::f64::consts::PI {
        a = tau - a;
    }
    a * a.sin()
}

/// Translation-invariant functionals of a region on the periodic window.
#[derive(Debug, Clone)]
pub struct FunctionalSet {
    pub window_area: f64,
    /// Area of the region per fundamental domain.
    pub area: f64,
    /// Euler characteristic per fundamental domain.
    pub euler: i64,
    /// Surface tensors Phi_1^{0,s} per fundamental domain, index = rank s.
    pub surface_tensors: Vec<SymTensor2>,
}

impl FunctionalSet {
    pub fn volume_fraction(&self) -> f64 {
        self.area / self.window_area
    }

    /// Density of V_1 (half the boundary length per unit area).
    pub fn v1_density(&self) -> f64 {
        self.surface_tensors[0].get(0) / self.window_area
    }

    pub fn euler_density(&self) -> f64 {
        self.euler as f64 / self.window_area
    }

    /// Density of Phi_1^{0,s}.
    pub fn surface_tensor_density(&self, s: usize) -> SymTensor2 {
        &self.surface_tensors[s] * (1.0 / self.window_area)
    }
}

/// Measures area, Euler characteristic, and the translation-invariant
/// surface tensors Phi_1^{0,s} for s = 0..=s_max of a region on its
/// periodic window.
pub fn measure(region: &PolyconvexRegion, s_max: usize) -> FunctionalSet {
    let mut tensors: Vec<SymTensor2> = (0..=s_max).map(SymTensor2::zero).collect();
    for lp in region.loops() {
        for seg in &lp.segments {
            let d = seg.end - seg.start;
            let len = d.norm();
            if len == 0.0 {
                continue;
            }
            let nu = Vec2::new(d.y, -d.x) / len;
            for (s, tens) in tensors.iter_mut().enumerate() {
                let u_pow = SymTensor2::vec_power(nu.x, nu.y, s);
                *tens = &*tens + &(&u_pow * (len / (factorial(s) * omega(1 + s))));
            }
        }
    }
    FunctionalSet {
        window_area: region.window().area(),
        area: region.area(),
        euler: region.euler_characteristic(),
        surface_tensors: tensors,
    }
}

/// Minkowski functionals and tensors of the intersection of a region with
/// a convex observation polygon.
#[derive(Debug, Clone)]
pub struct ClippedFunctionals {
    pub chi: i64,
    /// Volume tensors Phi_2^{r,0}, index = r.
    pub volume_tensors: Vec<SymTensor2>,
    /// Surface tensors Phi_1^{r,s}, indexed [r][s].
    pub surface_tensors: Vec<Vec<SymTensor2>>,
}

impl ClippedFunctionals {
    /// Point tensor Phi_0^{0,s} of the clipped set.
    pub fn point_tensor(&self, s: usize) -> SymTensor2 {
        euler_point_tensor(self.chi as f64, s)
    }
}

/// Segment clip against a convex polygon returning the parameter interval
/// and the binding polygon edge for each end (usize::MAX when the end is
/// the segment's own endpoint).
fn clip_segment_edges(
    p: Vec2,
    q: Vec2,
    poly: &ConvexPolygon,
) -> Option<(f64, f64, usize, usize)> {
    let d = q - p;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    let mut e0 = usize::MAX;
    let mut e1 = usize::MAX;
    let n = poly.num_vertices();
    for k in 0..n {
        let a = poly.vertices()[k];
        let b = poly.vertices()[(k + 1) % n];
        let e = b - a;
        let pk = -e.cross(d);
        let qk = e.cross(p - a);
        if pk == 0.0 {
            if qk < 0.0 {
                return None;
            }
        } else {
            let t = qk / pk;
            if pk < 0.0 {
                if t > t1 {
                    return None;
                }
                if t > t0 {
                    t0 = t;
                    e0 = k;
                }
            } else {
                if t < t0 {
                    return None;
                }
                if t < t1 {
                    t1 = t;
                    e1 = k;
                }
            }
        }
    }
    if t1 - t0 > 1e-15 {
        Some((t0, t1, e0, e1))
    } else {
        None
    }
}

fn turn(d0: Vec2, d1: Vec2) -> f64 {
    d0.cross(d1).atan2(d0.dot(d1))
}

/// Measures Phi_2^{r,0} (r <= r_max), Phi_1^{r,s} (r <= r_max, s <= s_max)
/// and the Euler characteristic of region ∩ w. The observation polygon w
/// must lie inside one fundamental domain and the intersection must be
/// generic (no tangencies between the region boundary and ∂w).
pub fn measure_clipped(
    region: &PolyconvexRegion,
    w: &ConvexPolygon,
    r_max: usize,
    s_max: usize,
) -> Result<ClippedFunctionals, GeomError> {
    let mut phi2: Vec<SymTensor2> = (0..=r_max).map(SymTensor2::zero).collect();
    let mut phi1: Vec<Vec<SymTensor2>> = (0..=r_max)
        .map(|r| (0..=s_max).map(|s| SymTensor2::zero(r + s)).collect())
        .collect();
    let mut turning = 0.0f64;

    let nw = w.num_vertices();
    let w_dir = |k: usize| -> Vec2 {
        (w.vertices()[(k + 1) % nw] - w.vertices()[k]).normalized()
    };

    // Boundary-of-region contributions.
    for lp in region.loops() {
        let segs = &lp.segments;
        for seg in segs {
            let d = seg.end - seg.start;
            let len = d.norm();
            if len == 0.0 {
                continue;
            }
            let Some((t0, t1, e0, e1)) = clip_segment_edges(seg.start, seg.end, w) else {
                continue;
            };
            let a = seg.start + d * t0;
            let b = seg.start + d * t1;
            let nu = Vec2::new(d.y, -d.x) / len;
            accumulate_boundary(&mut phi2, &mut phi1, a, b, nu, r_max, s_max);
            let dn = d / len;
            if t0 > 0.0 && e0 != usize::MAX {
                // entering w: comes along ∂w, turns onto the region boundary
                turning += turn(w_dir(e0), dn);
            }
            if t1 < 1.0 && e1 != usize::MAX {
                // leaving w: turns from the region boundary onto ∂w
                turning += turn(dn, w_dir(e1));
            }
        }
        // Interior vertex turns between consecutive direction-bearing
        // segments whose shared vertex lies strictly inside w.
        let dirs: Vec<(Vec2, Vec2)> = segs
            .iter()
            .filter(|s| (s.end - s.start).norm() > 0.0)
            .map(|s| (s.end, s.end - s.start))
            .collect();
        let md = dirs.len();
        for k in 0..md {
            let (v, d0) = dirs[k];
            let (_, d1) = dirs[(k + 1) % md];
            if w.contains_strict(v) {
                turning += turn(d0, d1);
            }
        }
    }

    // Boundary-of-w contributions: stretches of ∂w covered by the region.
    let l = region.window().side;
    let offs = offsets(l);
    for k in 0..nw {
        let a = w.vertices()[k];
        let b = w.vertices()[(k + 1) % nw];
        let mut ivls: Vec<(f64, f64)> = Vec::new();
        for g in region.grains() {
            for t in offs {
                if let Some((t0, t1, _, _)) = clip_segment_edges(a - t, b - t, g) {
                    ivls.push((t0, t1));
                }
            }
        }
        let nu = w.edge_normal(k);
        for (t0, t1) in merge_unit_intervals(ivls) {
            let p = a + (b - a) * t0;
            let q = a + (b - a) * t1;
            accumulate_boundary(&mut phi2, &mut phi1, p, q, nu, r_max, s_max);
        }
    }

    // Corners of w inside the region.
    for k in 0..nw {
        let v = w.vertices()[k];
        if region.contains(v) {
            let d_prev = v - w.vertices()[(k + nw - 1) % nw];
            let d_next = w.vertices()[(k + 1) % nw] - v;
            turning += turn(d_prev, d_next);
        }
    }

    let chi_f = turning / std::f64::consts::TAU;
    let chi = chi_f.round();
    if (chi_f - chi).abs() > 1e-6 {
        return Err(GeomError::Stitch(format!(
            "clipped Euler turning {chi_f} is not close to an integer"
        )));
    }

    Ok(ClippedFunctionals {
        chi: chi as i64,
        volume_tensors: phi2,
        surface_tensors: phi1,
    })
}

/// Adds one directed boundary piece (outward normal `nu`) to the volume
/// and surface tensor accumulators.
fn accumulate_boundary(
    phi2: &mut [SymTensor2],
    phi1: &mut [Vec<SymTensor2>],
    a: Vec2,
    b: Vec2,
    nu: Vec2,
    r_max: usize,
    s_max: usize,
) {
    let len = (b - a).norm();
    if len == 0.0 {
        return;
    }
    let mid = (a + b) * 0.5;
    let half = (b - a) * 0.5;
    // Gauss nodes shared by both accumulations; exact through degree 9,
    // which covers r_max + 1 <= 5.
    let pts: Vec<(Vec2, f64)> = GL5
        .iter()
        .map(|&(x, wgt)| (mid + half * x, wgt * len / 2.0))
        .collect();

    for r in 0..=r_max {
        // Volume tensors via the divergence theorem:
        // integral of x1^i x2^j over the set equals the boundary integral
        // of x1^(i+1) x2^j / (i+1) times the x-component of the normal.
        let mut comps = vec![0.0; r + 1];
        for (p, wgt) in &pts {
            for (i, c) in comps.iter_mut().enumerate() {
                let j = r - i;
                *c += wgt * nu.x * p.x.powi(i as i32 + 1) * p.y.powi(j as i32) / (i + 1) as f64;
            }
        }
        let add = &SymTensor2::from_comps(comps) * (1.0 / factorial(r));
        phi2[r] = &phi2[r] + &add;

        // Surface tensors.
        let moment = if r == 0 {
            SymTensor2::scalar(len)
        } else {
            let mut acc = SymTensor2::zero(r);
            for (p, wgt) in &pts {
                acc = &acc + &(&SymTensor2::vec_power(p.x, p.y, r) * *wgt);
            }
            acc
        };
        for s in 0..=s_max {
            let u_pow = SymTensor2::vec_power(nu.x, nu.y, s);
            let add = &u_pow.sym_mul(&moment)
                * (1.0 / (factorial(r) * factorial(s) * omega(1 + s)));
            phi1[r][s] = &phi1[r][s] + &add;
        }
    }
}

/// Brute-force evaluation of the translative integral of the Euler
/// characteristic, integral over x of chi(P ∩ (Q + x)) dx, by a midpoint
/// grid and separating-axis overlap tests. Converges to
/// V_2(P) + V_2(Q) + the mixed functional of P and Q as the grid refines;
/// used as an independent oracle.
pub fn translative_oracle(p: &ConvexPolygon, q: &ConvexPolygon, grid: usize) -> f64 {
    let mut axes: Vec<Vec2> = Vec::new();
    for k in 0..p.num_vertices() {
        axes.push(p.edge_normal(k));
    }
    for k in 0..q.num_vertices() {
        axes.push(q.edge_normal(k));
    }
    // Overlap of P and Q + x iff for every axis a:
    // minP.a - maxQ.a <= x.a <= maxP.a - minQ.a
    let ranges: Vec<(Vec2, f64, f64)> = axes
        .iter()
        .map(|&a| {
            let (plo, phi) = proj_range(p, a);
            let (qlo, qhi) = proj_range(q, a);
            (a, plo - qhi, phi - qlo)
        })
        .collect();
    let (plo, phi) = p.bbox();
    let (qlo, qhi) = q.bbox();
    let lo = Vec2::new(plo.x - qhi.x, plo.y - qhi.y);
    let hi = Vec2::new(phi.x - qlo.x, phi.y - qlo.y);
    let dx = (hi.x - lo.x) / grid as f64;
    let dy = (hi.y - lo.y) / grid as f64;
    let mut count: u64 = 0;
    for i in 0..grid {
        let x = lo.x + (i as f64 + 0.5) * dx;
        for j in 0..grid {
            let y = lo.y + (j as f64 + 0.5) * dy;
            let v = Vec2::new(x, y);
            if ranges
                .iter()
                .all(|&(a, rlo, rhi)| {
                    let t = v.dot(a);
                    t >= rlo && t <= rhi
                })
            {
                count += 1;
            }
        }
    }
    count as f64 * dx * dy
}

fn proj_range(p: &ConvexPolygon, a: Vec2) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in p.vertices() {
        let t = v.dot(a);
        lo = lo.min(t);
        hi = hi.max(t);
    }
    (lo, hi)
}
