//! Adaptive Gauss-Kronrod quadrature and special-function helpers.
//!
//! The angular integrands of this crate (powers of |cos|, angle kernels of
//! mixed functionals) are smooth except at isolated known kinks, so the
//! integrators here accept explicit split points and subdivide adaptively
//! within each panel. Error control is global: panels are bisected worst
//! first until the summed error estimate meets the requested tolerance.

use thiserror::Error;

/// 15-point Kronrod abscissae (positive half), QUADPACK dqk15 constants.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

/// 15-point Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Embedded 7-point Gauss weights (nodes are the odd-index entries of `XGK`).
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("quadrature did not converge: requested rel {requested:.3e}, achieved rel {achieved:.3e} after {panels} panels")]
    NoConvergence {
        requested: f64,
        achieved: f64,
        panels: usize,
    },
    #[error("invalid integration interval [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
}

/// One Gauss-Kronrod 15(7) rule application on [a, b].
/// Returns (integral, error estimate).
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut result_gauss = WG[3] * fc;
    let mut result_kronrod = WGK[7] * fc;
    // resabs tracks the integral of |f| for the scaled error heuristic.
    let mut resabs = WGK[7] * fc.abs();

    let mut fv = [0.0f64; 15];
    fv[7] = fc;
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv[j] = f1;
        fv[14 - j] = f2;
        result_kronrod += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            result_gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * result_kronrod;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }

    let result = result_kronrod * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((result_kronrod - result_gauss) * half).abs();
    // QUADPACK error rescaling: sharpens the raw |K - G| difference.
    if resasc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / resasc).powf(1.5);
        err = if scale < 1.0 { resasc * scale } else { resasc };
    }
    let eps = f64::EPSILON * 50.0 * resabs;
    if eps > 0.0 && err < eps {
        err = eps;
    }
    (result, err)
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

/// Adaptive integral of `f` over `[a, b]`.
///
/// Subdivides worst panels first until the global error estimate is below
/// `max(abs_tol, rel_tol * |integral|)` or the panel budget is exhausted.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64, QuadError> {
    integrate_split(&mut f, &[a, b], rel_tol, abs_tol)
}

/// Adaptive integral over the panels defined by ascending `points`.
///
/// `points` lists the interval endpoints plus interior split positions
/// (typically the integrand's kinks); duplicates and unordered interior
/// entries are tolerated by sorting and deduplication.
pub fn integrate_split<F: FnMut(f64) -> f64>(
    f: &mut F,
    points: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64, QuadError> {
    if points.len() < 2 {
        return Err(QuadError::BadInterval {
            a: f64::NAN,
            b: f64::NAN,
        });
    }
    let mut pts: Vec<f64> = points.to_vec();
    pts.sort_by(|x, y| x.partial_cmp(y).expect("non-finite split point"));
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + x.abs()));
    let (a, b) = (pts[0], *pts.last().unwrap());
    if !(a < b) {
        return Err(QuadError::BadInterval { a, b });
    }

    const MAX_PANELS: usize = 4000;
    let mut panels: Vec<Panel> = Vec::with_capacity(64);
    for w in pts.windows(2) {
        let (value, err) = gk15(f, w[0], w[1]);
        panels.push(Panel {
            a: w[0],
            b: w[1],
            value,
            err,
        });
    }

    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err_sum: f64 = panels.iter().map(|p| p.err).sum();
        let target = abs_tol.max(rel_tol * total.abs());
        if err_sum <= target {
            return Ok(total);
        }
        if panels.len() >= MAX_PANELS {
            return Err(QuadError::NoConvergence {
                requested: rel_tol,
                achieved: if total != 0.0 {
                    err_sum / total.abs()
                } else {
                    err_sum
                },
                panels: panels.len(),
            });
        }
        // Bisect the worst panel. Linear scan; panel counts stay small.
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|(_, p), (_, q)| p.err.partial_cmp(&q.err).unwrap())
            .unwrap();
        let Panel { a, b, .. } = panels[worst];
        let mid = 0.5 * (a + b);
        if !(a < mid && mid < b) {
            // Interval no longer splittable in f64; accept what we have.
            return Ok(total);
        }
        let (v1, e1) = gk15(f, a, mid);
        let (v2, e2) = gk15(f, mid, b);
        panels[worst] = Panel {
            a,
            b: mid,
            value: v1,
            err: e1,
        };
        panels.push(Panel {
            a: mid,
            b,
            value: v2,
            err: e2,
        });
    }
}

/// 5-point Gauss-Legendre nodes on [-1, 1]; exact for polynomials of
/// degree <= 9, which covers every segment monomial integral in the crate
/// (position exponents r <= 4).
pub const GL5: [(f64, f64); 5] = [
    (-0.906179845938663992797626878299393, 0.236926885056189087514264040719917),
    (-0.538469310105683091036314420700208, 0.478628670499366468041291514835638),
    (0.0, 0.568888888888888888888888888888889),
    (0.538469310105683091036314420700208, 0.478628670499366468041291514835638),
    (0.906179845938663992797626878299393, 0.236926885056189087514264040719917),
];

/// Integral of `f` along the parameter t in [0, 1], exact for polynomial
/// integrands of degree <= 9.
pub fn gl5_unit<F: Fn(f64) -> f64>(f: F) -> f64 {
    let mut acc = 0.0;
    for &(x, w) in GL5.iter() {
        acc += w * f(0.5 * (x + 1.0));
    }
    0.5 * acc
}

/// Gamma function (libm tgamma).
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Ratio Gamma(x)/Gamma(y) evaluated through log space; stable when both
/// arguments are large (e.g. normalization constants for alpha ~ 50).
pub fn gamma_ratio(x: f64, y: f64) -> f64 {
    libm::exp(libm::lgamma(x) - libm::lgamma(y))
}

/// n! as f64 (n <= 170).
pub fn factorial(n: usize) -> f64 {
    let mut acc = 1.0;
    for k in 2..=n {
        acc *= k as f64;
    }
    acc
}

/// Binomial coefficient as f64.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Double factorial n!! with the usual conventions (-1)!! = 0!! = 1.
pub fn double_factorial(n: i64) -> f64 {
    if n <= 0 {
        return 1.0;
    }
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// Surface area of the unit sphere S^{m-1} in R^m:
/// omega_m = 2 pi^{m/2} / Gamma(m/2).
///
/// omega_1 = 2, omega_2 = 2 pi, omega_3 = 4 pi, omega_4 = 2 pi^2, ...
/// Evaluated through the closed even/odd forms so no Gamma rounding enters.
pub fn omega(m: usize) -> f64 {
    assert!(m >= 1, "omega_m needs m >= 1");
    use std::f64::consts::PI;
    if m % 2 == 0 {
        let k = m / 2;
        2.0 * PI.powi(k as i32) / factorial(k - 1)
    } else {
        let k = m / 2; // m = 2k + 1
        2f64.powi(k as i32 + 1) * PI.powi(k as i32) / double_factorial(2 * k as i64 - 1)
    }
}
