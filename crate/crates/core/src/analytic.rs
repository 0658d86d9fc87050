//! Closed-form and quadrature evaluation of the density formulas of the
//! planar Boolean model whose grains are independently rotated copies of a
//! fixed base grain, with rotation angle density
//!
//! ```text
//! f_a(t) = c(a) |cos t|^a,   c(a) = Gamma(1 + a/2) / (2 sqrt(pi) Gamma((a+1)/2)),
//! ```
//!
//! for an orientation parameter a in [0, inf). The distinguished aligned
//! case (a = inf, no rotation) is handled by exact degenerate formulas,
//! never by limiting quadrature.
//!
//! Everything here is deterministic: densities of the grain process X
//! (gamma-weighted rotation averages), densities of the union set Z
//! (exponential volume-fraction corrections), mixed second-order
//! functionals, mean values over a bounded observation window, and the
//! normalization constants tying isotropic tensor densities to scalar
//! densities.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use thiserror::Error;

use crate::geom2d::{BaseGrain, ConvexPolygon, GeomError, Vec2};
use crate::minkowski::{
    angle_kernel, euler_point_tensor, mixed_v11, surface_tensor_polygon, volume_moment_tensor,
};
use crate::quad::{binomial, double_factorial, factorial, integrate_split, omega, QuadError};
use crate::tensor::SymTensor2;

/// Relative tolerance for grain-level boundary integrals.
const GRAIN_TOL: f64 = 1e-12;
/// Relative tolerance for angular averages over the orientation density.
const ANGULAR_TOL: f64 = 1e-9;
/// Grid size of the tabulated angular self-convolution kernel.
const KERNEL_GRID: usize = 8192;

#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("unsupported combination: {0}")]
    Unsupported(String),
}

/// Orientation parameter of the rotation distribution: either the finite
/// exponent of the power-cosine density or the degenerate aligned case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Orientation {
    Finite(f64),
    Aligned,
}

impl Orientation {
    pub fn validate(self) -> Result<(), AnalyticError> {
        match self {
            Orientation::Finite(a) if a.is_finite() && a >= 0.0 => Ok(()),
            Orientation::Aligned => Ok(()),
            Orientation::Finite(a) => Err(AnalyticError::Unsupported(format!(
                "orientation exponent must be finite and nonnegative, got {a}"
            ))),
        }
    }

    /// The exponent as a float, with the aligned case mapped to infinity.
    pub fn as_f64(self) -> f64 {
        match self {
            Orientation::Finite(a) => a,
            Orientation::Aligned => f64::INFINITY,
        }
    }

    /// Builds from a float, mapping infinity to the aligned case.
    pub fn from_f64(a: f64) -> Self {
        if a.is_infinite() && a > 0.0 {
            Orientation::Aligned
        } else {
            Orientation::Finite(a)
        }
    }
}

/// Full parameter set of the model: intensity, orientation parameter, and
/// base grain.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub gamma: f64,
    pub alpha: Orientation,
    pub grain: BaseGrain,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), AnalyticError> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(AnalyticError::Unsupported(format!(
                "intensity must be positive and finite, got {}",
                self.gamma
            )));
        }
        self.alpha.validate()?;
        self.grain.validate()?;
        Ok(())
    }
}

/// Normalizing constant of the power-cosine orientation density, computed
/// through log-gamma so that large exponents do not overflow.
///
/// Panics when the exponent is negative or not finite; the aligned case has
/// no density.
pub fn normalization_c(alpha: f64) -> f64 {
    assert!(
        alpha.is_finite() && alpha >= 0.0,
        "orientation exponent must be finite and nonnegative, got {alpha}"
    );
    let lg = libm::lgamma(1.0 + alpha / 2.0) - libm::lgamma((alpha + 1.0) / 2.0);
    lg.exp() / (2.0 * PI.sqrt())
}

/// Moment of the entries of a random rotation matrix against the
/// power-cosine density: with R(t) = [[cos t, -sin t], [sin t, cos t]],
/// the integral of R11^s1 R12^s2 R21^s3 R22^s4 f_a(t) over a full turn.
///
/// Zero unless s1+s4 and s2+s3 are both even; otherwise
/// (-1)^s2 (s2+s3-1)!! prod_{m<=({s1+s4})/2} (a+2m-1) / prod_{m<=s/2} (a+2m).
pub fn rotation_entry_moment(alpha: f64, s1: usize, s2: usize, s3: usize, s4: usize) -> f64 {
    let s = s1 + s2 + s3 + s4;
    if (s1 + s4) % 2 == 1 || (s2 + s3) % 2 == 1 {
        return 0.0;
    }
    let mut v = if s2 % 2 == 1 { -1.0 } else { 1.0 };
    for m in 1..=(s2 + s3) / 2 {
        v *= (2 * m - 1) as f64;
    }
    for m in 1..=(s1 + s4) / 2 {
        v *= alpha + (2 * m - 1) as f64;
    }
    for m in 1..=s / 2 {
        v /= alpha + (2 * m) as f64;
    }
    v
}

/// Curvature radius function of an axis-aligned ellipse with semi-axes
/// (p, q): at the boundary point with outer unit normal u the osculating
/// radius is p^2 q^2 / (p^2 u1^2 + q^2 u2^2)^{3/2}.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureRadius {
    p: f64,
    q: f64,
}

impl CurvatureRadius {
    pub fn at(&self, u: Vec2) -> f64 {
        let h2 = self.p * self.p * u.x * u.x + self.q * self.q * u.y * u.y;
        self.p * self.p * self.q * self.q / (h2 * h2.sqrt())
    }

    /// Radius at the normal direction (cos phi, sin phi).
    pub fn at_angle(&self, phi: f64) -> f64 {
        self.at(Vec2::new(phi.cos(), phi.sin()))
    }
}

/// Deterministic functionals of the base grain: area, first intrinsic
/// volume, the translation-invariant surface tensors up to a requested
/// rank, and (for smooth grains) the curvature radius function.
#[derive(Debug, Clone)]
pub struct GrainAnalytics {
    pub area: f64,
    pub v1: f64,
    /// Surface tensors of rank s = 0..=s_max, index = s.
    pub surface_tensors: Vec<SymTensor2>,
    /// Curvature radius handle; present only for ellipse grains.
    pub radius: Option<CurvatureRadius>,
}

impl GrainAnalytics {
    pub fn surface_tensor(&self, s: usize) -> &SymTensor2 {
        &self.surface_tensors[s]
    }

    /// The rank-2 surface tensor as a symmetric 2x2 matrix; requires the
    /// analytics to have been computed with s_max >= 2.
    pub fn s2_matrix(&self) -> [[f64; 2]; 2] {
        self.surface_tensors[2].as_matrix2()
    }
}

/// Integral of cos^a sin^b over a full turn: zero unless both exponents
/// are even, else 2 pi (a-1)!! (b-1)!! / (a+b)!!.
fn trig_moment(a: usize, b: usize) -> f64 {
    if a % 2 == 1 || b % 2 == 1 {
        return 0.0;
    }
    TAU * double_factorial(a as i64 - 1) * double_factorial(b as i64 - 1)
        / double_factorial((a + b) as i64)
}

/// Computes the grain analytics: exact closed forms for rectangles and
/// circles, adaptive boundary quadrature for proper ellipses, and the
/// polygon face formulas for polygon grains.
pub fn grain_analytics(grain: &BaseGrain, s_max: usize) -> Result<GrainAnalytics, AnalyticError> {
    grain.validate()?;
    match *grain {
        BaseGrain::Rectangle { a, b } => {
            let mut tensors = Vec::with_capacity(s_max + 1);
            for s in 0..=s_max {
                let mut t = SymTensor2::zero(s);
                if s % 2 == 0 {
                    let norm = factorial(s) * omega(1 + s);
                    // Two vertical edges of length b carry normals (+-1, 0),
                    // two horizontal edges of length a carry normals (0, +-1).
                    t.set(s, 2.0 * b / norm);
                    let lo = t.get(0) + 2.0 * a / norm;
                    t.set(0, lo);
                }
                tensors.push(t);
            }
            Ok(GrainAnalytics {
                area: a * b,
                v1: a + b,
                surface_tensors: tensors,
                radius: None,
            })
        }
        BaseGrain::Ellipse { p, q, .. } if p == q => {
            // Circle: boundary integrals reduce to full-turn trigonometric
            // moments, evaluated exactly.
            let r = p;
            let mut tensors = Vec::with_capacity(s_max + 1);
            for s in 0..=s_max {
                let mut t = SymTensor2::zero(s);
                let norm = factorial(s) * omega(1 + s);
                for l in 0..=s {
                    t.set(l, r * trig_moment(l, s - l) / norm);
                }
                tensors.push(t);
            }
            Ok(GrainAnalytics {
                area: PI * r * r,
                v1: PI * r,
                surface_tensors: tensors,
                radius: Some(CurvatureRadius { p, q }),
            })
        }
        BaseGrain::Ellipse { p, q, .. } => {
            // Boundary parametrization x(t) = (p cos t, q sin t) with speed
            // w(t) = hypot(p sin t, q cos t) and outer normal
            // (q cos t, p sin t) / w(t). Components of odd parity vanish by
            // symmetry and are set exactly to zero; the remaining ones are
            // positive and integrated to relative tolerance 1e-12 on a
            // quarter period.
            let speed = |t: f64| (p * t.sin()).hypot(q * t.cos());
            let v1 = 2.0 * integrate_split(&mut |t| speed(t), &[0.0, FRAC_PI_2], GRAIN_TOL, 0.0)?;
            let mut tensors = Vec::with_capacity(s_max + 1);
            for s in 0..=s_max {
                let mut t = SymTensor2::zero(s);
                if s % 2 == 0 {
                    let norm = factorial(s) * omega(1 + s);
                    for l in (0..=s).step_by(2) {
                        if (s - l) % 2 == 1 {
                            continue;
                        }
                        let mut f = |tt: f64| {
                            let w = speed(tt);
                            (q * tt.cos()).powi(l as i32) * (p * tt.sin()).powi((s - l) as i32)
                                * w.powi(1 - s as i32)
                        };
                        let quarter = integrate_split(&mut f, &[0.0, FRAC_PI_2], GRAIN_TOL, 0.0)?;
                        t.set(l, 4.0 * quarter / norm);
                    }
                }
                tensors.push(t);
            }
            Ok(GrainAnalytics {
                area: PI * p * q,
                v1,
                surface_tensors: tensors,
                radius: Some(CurvatureRadius { p, q }),
            })
        }
        BaseGrain::Polygon(ref poly) => {
            let tensors = (0..=s_max)
                .map(|s| surface_tensor_polygon(poly, 0, s))
                .collect();
            Ok(GrainAnalytics {
                area: poly.area(),
                v1: poly.perimeter() / 2.0,
                surface_tensors: tensors,
                radius: None,
            })
        }
    }
}

/// Density of the rank-s surface tensor of the grain process X, by the
/// closed combinatorial rotation average. Zero for odd s at any finite
/// orientation exponent; the aligned case returns gamma times the grain
/// tensor.
pub fn density_surface_tensor_x_with(
    gamma: f64,
    alpha: Orientation,
    grain: &GrainAnalytics,
    s: usize,
) -> SymTensor2 {
    let base = grain.surface_tensor(s);
    let a = match alpha {
        Orientation::Aligned => return base * gamma,
        Orientation::Finite(a) => a,
    };
    let mut out = SymTensor2::zero(s);
    if s % 2 == 1 {
        return out;
    }
    let mut full = 1.0;
    for m in 1..=s / 2 {
        full *= a + (2 * m) as f64;
    }
    for l in 0..=s {
        let mut acc = 0.0;
        for j in 0..=s {
            if (j + l) % 2 == 1 {
                continue;
            }
            let klo = j.saturating_sub(s - l);
            let khi = j.min(l);
            let mut coef = 0.0;
            for k in klo..=khi {
                let mut term = if (l - k) % 2 == 1 { -1.0 } else { 1.0 };
                term *= binomial(l, k) * binomial(s - l, j - k);
                for m in 1..=(l + j - 2 * k) / 2 {
                    term *= (2 * m - 1) as f64;
                }
                for m in 1..=(s + 2 * k - l - j) / 2 {
                    term *= a + (2 * m - 1) as f64;
                }
                coef += term;
            }
            acc += coef * base.get(j);
        }
        out.set(l, gamma * acc / full);
    }
    out
}

/// Convenience wrapper of `density_surface_tensor_x_with` that computes
/// the grain analytics on the fly.
pub fn density_surface_tensor_x(params: &ModelParams, s: usize) -> Result<SymTensor2, AnalyticError> {
    let ga = grain_analytics(&params.grain, s)?;
    Ok(density_surface_tensor_x_with(params.gamma, params.alpha, &ga, s))
}

/// Rank-2 specialization of the surface tensor density of X written as an
/// explicit matrix:
/// (gamma/(a+2)) [[(a+1) P11 + P22, a P12], [a P12, P11 + (a+1) P22]]
/// in terms of the grain tensor entries P.
pub fn density_surface_tensor_x_s2(
    gamma: f64,
    alpha: Orientation,
    grain: &GrainAnalytics,
) -> SymTensor2 {
    let m = grain.s2_matrix();
    let a = match alpha {
        Orientation::Aligned => return grain.surface_tensor(2) * gamma,
        Orientation::Finite(a) => a,
    };
    let f = gamma / (a + 2.0);
    SymTensor2::from_matrix2(
        f * ((a + 1.0) * m[0][0] + m[1][1]),
        f * (a * m[0][1]),
        f * (m[0][0] + (a + 1.0) * m[1][1]),
    )
}

/// Quadrature oracle for the surface tensor density of X: the direct
/// rotation average gamma int R(t).T f_a(t) dt evaluated componentwise by
/// adaptive panels split at the quarter-turn kinks of the density.
pub fn density_surface_tensor_x_oracle(
    gamma: f64,
    alpha: f64,
    grain: &GrainAnalytics,
    s: usize,
) -> Result<SymTensor2, AnalyticError> {
    let c = normalization_c(alpha);
    let base = grain.surface_tensor(s);
    let splits = [0.0, FRAC_PI_2, PI, 1.5 * PI, TAU];
    let mut out = SymTensor2::zero(s);
    for l in 0..=s {
        let mut f = |t: f64| base.rotate(t).get(l) * c * t.cos().abs().powf(alpha);
        let v = integrate_split(&mut f, &splits, 1e-11, 1e-13)?;
        out.set(l, gamma * v);
    }
    Ok(out)
}

/// Expected area fraction of the union set: 1 - exp(-gamma V2(E)).
pub fn volume_fraction(params: &ModelParams) -> f64 {
    1.0 - (-params.gamma * params.grain.area()).exp()
}

/// Density of the rank-s surface tensor of the union set Z: the X-density
/// damped by the uncovered fraction exp(-gamma V2(E)).
pub fn surface_tensor_density_z_with(
    gamma: f64,
    alpha: Orientation,
    grain: &GrainAnalytics,
    s: usize,
) -> SymTensor2 {
    let x = density_surface_tensor_x_with(gamma, alpha, grain, s);
    &x * (-gamma * grain.area).exp()
}

pub fn surface_tensor_density_z(params: &ModelParams, s: usize) -> Result<SymTensor2, AnalyticError> {
    let ga = grain_analytics(&params.grain, s)?;
    Ok(surface_tensor_density_z_with(params.gamma, params.alpha, &ga, s))
}

/// Shape coefficient of the rank-2 surface tensor density of Z as a curve
/// in the volume fraction: the tensor with
/// density_Z = (phi - 1) ln(1 - phi) c1, independent of the intensity.
pub fn c1_02(alpha: Orientation, grain: &GrainAnalytics) -> SymTensor2 {
    &density_surface_tensor_x_with(1.0, alpha, grain, 2) * (1.0 / grain.area)
}

/// The rank-2 surface tensor density of Z expressed through the volume
/// fraction: (phi - 1) ln(1 - phi) c1.
pub fn surface_tensor_curve(c1: &SymTensor2, phi: f64) -> SymTensor2 {
    c1 * ((phi - 1.0) * (-phi).ln_1p())
}

/// The angular self-convolution kernel of the orientation density,
/// K(t) = c(a)^2 int |cos(t + v)|^a |cos v|^a dv, a probability density in
/// t over a full turn. Evaluated by adaptive quadrature with panels split
/// at the kink positions of both cosine factors.
fn kernel_exact(alpha: f64, c2: f64, t: f64) -> Result<f64, QuadError> {
    let mut pts = vec![
        0.0,
        FRAC_PI_2,
        1.5 * PI,
        TAU,
        (FRAC_PI_2 - t).rem_euclid(TAU),
        (1.5 * PI - t).rem_euclid(TAU),
    ];
    pts.retain(|x| x.is_finite());
    let mut f = |v: f64| {
        (t + v).cos().abs().powf(alpha) * v.cos().abs().powf(alpha)
    };
    let v = integrate_split(&mut f, &pts, ANGULAR_TOL, 1e-14)?;
    Ok(c2 * v)
}

/// Tabulated form of the self-convolution kernel on a uniform periodic
/// grid with cubic interpolation; used for the polygon edge-pair sums
/// where the kernel is evaluated inside many inner integrals.
struct KernelTable {
    vals: Vec<f64>,
}

impl KernelTable {
    fn build(alpha: f64) -> Result<Self, QuadError> {
        let c = normalization_c(alpha);
        let c2 = c * c;
        let mut vals = Vec::with_capacity(KERNEL_GRID);
        for i in 0..KERNEL_GRID {
            let t = TAU * i as f64 / KERNEL_GRID as f64;
            vals.push(kernel_exact(alpha, c2, t)?);
        }
        Ok(KernelTable { vals })
    }

    /// Periodic Catmull-Rom interpolation.
    fn eval(&self, t: f64) -> f64 {
        let n = self.vals.len();
        let x = t.rem_euclid(TAU) / TAU * n as f64;
        let i0 = x.floor() as usize % n;
        let u = x - x.floor();
        let pm1 = self.vals[(i0 + n - 1) % n];
        let p0 = self.vals[i0];
        let p1 = self.vals[(i0 + 1) % n];
        let p2 = self.vals[(i0 + 2) % n];
        0.5 * (2.0 * p0
            + (p1 - pm1) * u
            + (2.0 * pm1 - 5.0 * p0 + 4.0 * p1 - p2) * u * u
            + (3.0 * p0 - pm1 - 3.0 * p1 + p2) * u * u * u)
    }
}

/// Edge lengths and outward-normal angles of a convex polygon.
fn edge_data(poly: &ConvexPolygon) -> (Vec<f64>, Vec<f64>) {
    let n = poly.num_vertices();
    let mut lens = Vec::with_capacity(n);
    let mut angs = Vec::with_capacity(n);
    for i in 0..n {
        let a = poly.vertices()[i];
        let b = poly.vertices()[(i + 1) % n];
        lens.push((b - a).norm());
        angs.push(poly.edge_normal(i).angle());
    }
    (lens, angs)
}

/// Mixed second-order functional of a rotated copy against the base grain
/// as a function of the rotation angle, for rectangle grains:
/// (a^2 + b^2) |sin t| + 2 a b |cos t| with full side lengths a, b.
fn mixed_rotation_profile_rectangle(a: f64, b: f64, t: f64) -> f64 {
    (a * a + b * b) * t.sin().abs() + 2.0 * a * b * t.cos().abs()
}

/// Mixed second-order functional of a rotated ellipse against itself as a
/// function of the rotation angle, through the double boundary integral
/// with the curvature radius weight:
/// (1/2pi) int_0^2pi int_0^pi b sin b [r(u(b + v - t)) + r(u(-b + v - t))] r(u(v)) db dv.
fn mixed_rotation_profile_ellipse(r: &CurvatureRadius, t: f64) -> Result<f64, QuadError> {
    // Inner angle v runs over a full period with a smooth integrand, so a
    // uniform periodic rule converges spectrally; the outer variable b is
    // handled adaptively on [0, pi].
    const NV: usize = 512;
    let mut f = |beta: f64| {
        let mut acc = 0.0;
        for k in 0..NV {
            let v = TAU * k as f64 / NV as f64;
            acc += (r.at_angle(beta + v - t) + r.at_angle(-beta + v - t)) * r.at_angle(v);
        }
        beta * beta.sin() * acc * (TAU / NV as f64)
    };
    let v = integrate_split(&mut f, &[0.0, PI], ANGULAR_TOL, 1e-14)?;
    Ok(v / TAU)
}

/// The intensity-free mixed density of the grain process against itself:
/// the orientation average of the mixed functional of two independently
/// rotated grains. Multiplying by gamma^2 gives the mixed density of X.
pub fn mixed_v11_x_normalized(alpha: Orientation, grain: &BaseGrain) -> Result<f64, AnalyticError> {
    grain.validate()?;
    match alpha {
        Orientation::Aligned => match *grain {
            BaseGrain::Rectangle { a, b } => Ok(2.0 * a * b),
            BaseGrain::Ellipse { p, q, .. } if p == q => Ok(TAU * p * q),
            BaseGrain::Ellipse { p, q, .. } => {
                Ok(mixed_rotation_profile_ellipse(&CurvatureRadius { p, q }, 0.0)?)
            }
            BaseGrain::Polygon(ref poly) => Ok(mixed_v11(poly, poly)),
        },
        Orientation::Finite(a) => {
            let c = normalization_c(a);
            let c2 = c * c;
            match *grain {
                // The disk profile is constant and the kernel integrates
                // to one, so the average is exact.
                BaseGrain::Ellipse { p, q, .. } if p == q => Ok(TAU * p * q),
                BaseGrain::Rectangle { a: ra, b: rb } => {
                    let mut f = |t: f64| -> f64 {
                        mixed_rotation_profile_rectangle(ra, rb, t)
                            * kernel_exact(a, c2, t).unwrap_or(f64::NAN)
                    };
                    let pts = [0.0, FRAC_PI_2, PI, 1.5 * PI, TAU];
                    let v = integrate_split(&mut f, &pts, 1e-8, 1e-14)?;
                    if !v.is_finite() {
                        return Err(AnalyticError::Unsupported(
                            "kernel evaluation failed inside the rectangle profile average"
                                .into(),
                        ));
                    }
                    Ok(v)
                }
                BaseGrain::Ellipse { p, q, .. } => {
                    let r = CurvatureRadius { p, q };
                    let mut f = |t: f64| -> f64 {
                        let prof = mixed_rotation_profile_ellipse(&r, t).unwrap_or(f64::NAN);
                        prof * kernel_exact(a, c2, t).unwrap_or(f64::NAN)
                    };
                    let pts = [0.0, PI, TAU];
                    let v = integrate_split(&mut f, &pts, 1e-7, 1e-14)?;
                    if !v.is_finite() {
                        return Err(AnalyticError::Unsupported(
                            "kernel evaluation failed inside the ellipse profile average".into(),
                        ));
                    }
                    Ok(v)
                }
                BaseGrain::Polygon(ref poly) => {
                    // Edge-pair decomposition: the profile is a sum of
                    // shifted copies of the angle kernel, so the average
                    // reduces to one convolution value per edge pair,
                    // evaluated against the tabulated kernel.
                    let table = KernelTable::build(a)?;
                    let (lens, angs) = edge_data(poly);
                    let n = lens.len();
                    let mut acc = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            let delta = angs[i] - angs[j];
                            let mut f = |t: f64| angle_kernel(delta + t) * table.eval(t);
                            let pts = [0.0, PI, (PI - delta).rem_euclid(TAU), TAU];
                            let w = integrate_split(&mut f, &pts, 1e-7, 1e-12)?;
                            acc += lens[i] * lens[j] * w;
                        }
                    }
                    Ok(acc / TAU)
                }
            }
        }
    }
}

/// Mixed density of the grain process against itself (gamma^2 times the
/// normalized orientation average).
pub fn mixed_density_v11_x(params: &ModelParams) -> Result<f64, AnalyticError> {
    Ok(params.gamma * params.gamma * mixed_v11_x_normalized(params.alpha, &params.grain)?)
}

/// Shape coefficient of the Euler characteristic curve: the normalized
/// mixed density divided by twice the grain area. Equals 1 for disks of
/// any radius under any orientation distribution.
pub fn c0_coeff(alpha: Orientation, grain: &BaseGrain) -> Result<f64, AnalyticError> {
    Ok(mixed_v11_x_normalized(alpha, grain)? / (2.0 * grain.area()))
}

/// Euler characteristic density of the union set:
/// exp(-gamma V2(E)) (gamma - mixed/2).
pub fn euler_density_z(params: &ModelParams) -> Result<f64, AnalyticError> {
    let mixed = mixed_density_v11_x(params)?;
    Ok((-params.gamma * params.grain.area()).exp() * (params.gamma - 0.5 * mixed))
}

/// The Euler characteristic density of Z divided by the intensity, as a
/// curve in the volume fraction: (1 - phi)(1 + c0 ln(1 - phi)).
pub fn euler_curve(c0: f64, phi: f64) -> f64 {
    (1.0 - phi) * (1.0 + c0 * (-phi).ln_1p())
}

/// The three intrinsic volume densities (V0, V1, V2) of the union set.
pub fn intrinsic_volume_densities_z(params: &ModelParams) -> Result<(f64, f64, f64), AnalyticError> {
    let ga = grain_analytics(&params.grain, 0)?;
    let v2bar = params.gamma * ga.area;
    let v0 = euler_density_z(params)?;
    let v1 = (-v2bar).exp() * params.gamma * ga.v1;
    let v2 = 1.0 - (-v2bar).exp();
    Ok((v0, v1, v2))
}

/// Proportionality constant between the rank-s tensor density and the
/// scalar density of an isotropic random set in dimension n at degree j:
/// (1/((4 pi)^{s/2} (s/2)!)) Gamma((n-j+s)/2) Gamma(n/2) /
/// (Gamma((n+s)/2) Gamma((n-j)/2)). Requires even s and 0 <= j <= n-1.
pub fn isotropic_constant(n: usize, j: usize, s: usize) -> f64 {
    assert!(s % 2 == 0, "tensor rank must be even, got {s}");
    assert!(j < n, "degree must satisfy 0 <= j <= n-1, got j={j}, n={n}");
    let (nf, jf, sf) = (n as f64, j as f64, s as f64);
    let lg = libm::lgamma((nf - jf + sf) / 2.0) + libm::lgamma(nf / 2.0)
        - libm::lgamma((nf + sf) / 2.0)
        - libm::lgamma((nf - jf) / 2.0);
    lg.exp() / ((4.0 * PI).powi(s as i32 / 2) * factorial(s / 2))
}

/// The orientation-averaged curvature radius weighted by the intensity:
/// the mean curvature-radius function of the grain process at the normal
/// direction (cos phi, sin phi). Defined for smooth (ellipse) grains.
pub fn mean_radius_function(params: &ModelParams, phi: f64) -> Result<f64, AnalyticError> {
    let radius = match params.grain {
        BaseGrain::Ellipse { p, q, .. } => CurvatureRadius { p, q },
        _ => {
            return Err(AnalyticError::Unsupported(
                "the mean curvature-radius function requires a smooth grain".into(),
            ))
        }
    };
    match params.alpha {
        Orientation::Aligned => Ok(params.gamma * radius.at_angle(phi)),
        Orientation::Finite(a) => {
            let c = normalization_c(a);
            let mut f = |t: f64| radius.at_angle(phi - t) * c * t.cos().abs().powf(a);
            let pts = [0.0, FRAC_PI_2, PI, 1.5 * PI, TAU];
            Ok(params.gamma * integrate_split(&mut f, &pts, 1e-10, 1e-14)?)
        }
    }
}

/// Mixed density of a fixed convex window against the grain process:
/// gamma times the orientation average of the mixed functional of the
/// window with a rotated grain.
pub fn mixed_wx_density(params: &ModelParams, w: &ConvexPolygon) -> Result<f64, AnalyticError> {
    let (wl, wa) = edge_data(w);
    match params.alpha {
        Orientation::Aligned => {
            let poly = params.grain.discretize()?;
            match params.grain {
                BaseGrain::Ellipse { p, q, .. } => {
                    // Exact smooth form: per window edge, the angle kernel
                    // integrated against the curvature radius.
                    let r = CurvatureRadius { p, q };
                    let mut acc = 0.0;
                    for (li, ai) in wl.iter().zip(&wa) {
                        let mut f = |b: f64| angle_kernel(ai - b) * r.at_angle(b);
                        let pts = [0.0, (ai - PI).rem_euclid(TAU), (ai + PI).rem_euclid(TAU), TAU];
                        acc += li * integrate_split(&mut f, &pts, 1e-9, 1e-14)?;
                    }
                    Ok(params.gamma * acc / TAU)
                }
                _ => Ok(params.gamma * mixed_v11(w, &poly)),
            }
        }
        Orientation::Finite(a) => {
            let c = normalization_c(a);
            match params.grain {
                BaseGrain::Ellipse { p, q, .. } => {
                    let r = CurvatureRadius { p, q };
                    // Orientation-smoothed radius profile; smooth in the
                    // normal angle.
                    let smoothed = |b: f64| -> Result<f64, QuadError> {
                        let mut f = |t: f64| r.at_angle(b - t) * c * t.cos().abs().powf(a);
                        integrate_split(&mut f, &[0.0, FRAC_PI_2, PI, 1.5 * PI, TAU], 1e-9, 1e-14)
                    };
                    let mut acc = 0.0;
                    for (li, ai) in wl.iter().zip(&wa) {
                        let mut f =
                            |b: f64| angle_kernel(ai - b) * smoothed(b).unwrap_or(f64::NAN);
                        let pts = [0.0, (ai - PI).rem_euclid(TAU), (ai + PI).rem_euclid(TAU), TAU];
                        let v = integrate_split(&mut f, &pts, 1e-7, 1e-14)?;
                        if !v.is_finite() {
                            return Err(AnalyticError::Unsupported(
                                "inner smoothing quadrature failed in the window mixed density"
                                    .into(),
                            ));
                        }
                        acc += li * v;
                    }
                    Ok(params.gamma * acc / TAU)
                }
                _ => {
                    // Polygonal grain: one convolution of the angle kernel
                    // with the orientation density per edge pair.
                    let poly = params.grain.discretize()?;
                    let (gl, ga_) = edge_data(&poly);
                    let mut acc = 0.0;
                    for (li, ai) in wl.iter().zip(&wa) {
                        for (mj, bj) in gl.iter().zip(&ga_) {
                            let delta = ai - bj;
                            let mut f =
                                |t: f64| angle_kernel(delta - t) * c * t.cos().abs().powf(a);
                            let pts = [
                                0.0,
                                FRAC_PI_2,
                                PI,
                                1.5 * PI,
                                (delta - PI).rem_euclid(TAU),
                                (delta + PI).rem_euclid(TAU),
                                TAU,
                            ];
                            acc += li * mj * integrate_split(&mut f, &pts, 1e-8, 1e-13)?;
                        }
                    }
                    Ok(params.gamma * acc / TAU)
                }
            }
        }
    }
}

/// Expected Minkowski tensor of the union set intersected with a convex
/// observation window W:
///
/// * j = 2 (volume tensors, s = 0): Phi_2^{r,0}(W) phi;
/// * j = 1 (surface tensors): Phi_1^{r,s}(W) phi
///   + Phi_2^{r,0}(W) (density of X) exp(-gamma V2(E));
/// * j = 0 (point tensors, r = 0): Phi_0^{0,s}(W) phi
///   + Q-proportional term carrying the mixed window and self densities.
pub fn mean_value_window(
    params: &ModelParams,
    w: &ConvexPolygon,
    j: usize,
    r: usize,
    s: usize,
) -> Result<SymTensor2, AnalyticError> {
    if j > 2 || r > 4 || s > 8 {
        return Err(AnalyticError::Unsupported(format!(
            "window mean values support j <= 2, r <= 4, s <= 8; got j={j}, r={r}, s={s}"
        )));
    }
    if j == 2 && s != 0 {
        return Err(AnalyticError::Unsupported(
            "volume tensors carry no normal exponent: j=2 requires s=0".into(),
        ));
    }
    if j == 0 && r != 0 {
        return Err(AnalyticError::Unsupported(
            "position-weighted point tensors are not evaluated: j=0 requires r=0".into(),
        ));
    }
    params.validate()?;
    let area = params.grain.area();
    let emv = (-params.gamma * area).exp();
    let phi = 1.0 - emv;
    match j {
        2 => Ok(&volume_moment_tensor(w, r) * phi),
        1 => {
            let ga = grain_analytics(&params.grain, s)?;
            let xdens = density_surface_tensor_x_with(params.gamma, params.alpha, &ga, s);
            let boundary = &surface_tensor_polygon(w, r, s) * phi;
            let bulk = volume_moment_tensor(w, r).sym_mul(&xdens);
            Ok(&boundary + &(&bulk * emv))
        }
        _ => {
            let wx = mixed_wx_density(params, w)?;
            let xx = mixed_density_v11_x(params)?;
            let scalar = phi + emv * (wx + w.area() * (params.gamma - 0.5 * xx));
            Ok(&euler_point_tensor(1.0, s) * scalar)
        }
    }
}

/// Rescales a tensor from the convention used here to the alternative
/// normalization W_j^{r,s} = (r! s! w_{j+s} / (n binom(n-1, j-1)))
/// Phi_{n-j}^{r,s} at n = 2, for j in {1, 2}.
pub fn papaya_normalization(j: usize, r: usize, s: usize, t: &SymTensor2) -> SymTensor2 {
    assert!((1..=2).contains(&j), "index j must be 1 or 2, got {j}");
    let scale = factorial(r) * factorial(s) * omega(j + s) / (2.0 * binomial(1, j - 1));
    t * scale
}
