//! Parameter recovery and shape reconstruction from measured densities:
//! intensity and orientation-exponent estimators inverted from the
//! closed-form densities, replicate-level bootstrap errors, and the
//! Fourier synthesis of the mean curvature-radius function from surface
//! tensor densities of increasing rank.

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::analytic::GrainAnalytics;
use crate::quad::{binomial, factorial, omega};
use crate::sampler::replicate_rng;
use crate::tensor::SymTensor2;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("volume fraction must lie in [0, 1), got {0}")]
    BadVolumeFraction(f64),
    #[error("grain area must be positive, got {0}")]
    BadArea(f64),
    #[error("the grain's rank-2 surface tensor is isotropic; the orientation exponent is not identifiable")]
    IsotropicGrain,
    #[error("orientation estimator diverged: {0}")]
    Diverged(String),
    #[error("need the rank-{needed} tensor density, have ranks 0..={have}")]
    MissingRank { needed: usize, have: usize },
    #[error("{0}")]
    BadInput(String),
}

/// Intensity estimator inverted from the covered-area fraction:
/// gamma_hat = -ln(1 - phi_hat) / V2(E).
pub fn estimate_gamma(phi_hat: f64, grain_area: f64) -> Result<f64, InferenceError> {
    if !(0.0..1.0).contains(&phi_hat) {
        return Err(InferenceError::BadVolumeFraction(phi_hat));
    }
    if !(grain_area > 0.0 && grain_area.is_finite()) {
        return Err(InferenceError::BadArea(grain_area));
    }
    Ok(-(-phi_hat).ln_1p() / grain_area)
}

/// Orientation exponent estimator inverted from the (1,1) entry of the
/// measured rank-2 surface tensor density of the union set:
///
/// alpha_hat = (gamma_hat (P11 + P22) - 2 e^{gamma_hat V2} T11)
///           / (e^{gamma_hat V2} T11 - gamma_hat P11),
///
/// with P the grain tensor and T11 the measured entry. Fails when the
/// grain tensor is isotropic (no identifiability) and flags a divergent
/// denominator. The returned value may be negative when noise pushes the
/// measurement past the isotropic point; callers decide how to treat it.
pub fn estimate_alpha(
    t11_z: f64,
    phi_hat: f64,
    grain: &GrainAnalytics,
) -> Result<f64, InferenceError> {
    if !(0.0..1.0).contains(&phi_hat) {
        return Err(InferenceError::BadVolumeFraction(phi_hat));
    }
    let m = grain.s2_matrix();
    let (p11, p22) = (m[0][0], m[1][1]);
    let scale = p11.abs().max(p22.abs());
    if (p11 - p22).abs() < 1e-12 * scale {
        return Err(InferenceError::IsotropicGrain);
    }
    let gamma_hat = estimate_gamma(phi_hat, grain.area)?;
    // e^{gamma_hat V2(E)} = 1 / (1 - phi_hat) by construction.
    let boosted = t11_z / (1.0 - phi_hat);
    let denom = boosted - gamma_hat * p11;
    let numer = gamma_hat * (p11 + p22) - 2.0 * boosted;
    if denom == 0.0 {
        return Err(InferenceError::Diverged(
            "measured entry sits exactly at the aligned limit".into(),
        ));
    }
    let alpha = numer / denom;
    if !alpha.is_finite() {
        return Err(InferenceError::Diverged(format!(
            "non-finite estimate from T11={t11_z}, phi={phi_hat}"
        )));
    }
    Ok(alpha)
}

/// Alternative orientation estimator using both diagonal entries of the
/// measured tensor: the normalized diagonal gap
/// rho = (T22 - T11)(P11 + P22) / ((T11 + T22)(P22 - P11)) satisfies
/// rho = alpha / (alpha + 2), so alpha = 2 rho / (1 - rho). It does not
/// use the measured volume fraction, which makes it insensitive to the
/// intensity estimate, but it is not the primary inversion formula.
pub fn estimate_alpha_symmetric(
    t_z: &SymTensor2,
    grain: &GrainAnalytics,
) -> Result<f64, InferenceError> {
    if t_z.rank() != 2 {
        return Err(InferenceError::BadInput(format!(
            "need a rank-2 tensor, got rank {}",
            t_z.rank()
        )));
    }
    let m = grain.s2_matrix();
    let (p11, p22) = (m[0][0], m[1][1]);
    let scale = p11.abs().max(p22.abs());
    if (p11 - p22).abs() < 1e-12 * scale {
        return Err(InferenceError::IsotropicGrain);
    }
    let tm = t_z.as_matrix2();
    let trace = tm[0][0] + tm[1][1];
    if trace <= 0.0 {
        return Err(InferenceError::Diverged(format!(
            "nonpositive measured trace {trace}"
        )));
    }
    let rho = (tm[1][1] - tm[0][0]) * (p11 + p22) / (trace * (p22 - p11));
    if rho >= 1.0 {
        return Err(InferenceError::Diverged(format!(
            "diagonal gap ratio {rho} at or past the aligned limit"
        )));
    }
    Ok(2.0 * rho / (1.0 - rho))
}

/// Point estimate and bootstrap standard error of one statistic.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapSummary {
    pub estimate: f64,
    pub se: f64,
    /// Bootstrap draws discarded because the statistic was not finite
    /// (for example a diverged estimator on a resample).
    pub dropped: usize,
}

/// Replicate-level bootstrap of several statistics at once with shared
/// index draws: per bootstrap iteration one resample of 0..n is drawn and
/// every statistic is evaluated on it, preserving cross-statistic
/// correlation. `stats` maps an index multiset to the statistic vector;
/// its length must always equal `k`. The point estimates come from the
/// identity indexing. Non-finite draws are dropped per component and
/// counted.
pub fn bootstrap_vector<F>(
    n: usize,
    k: usize,
    n_boot: usize,
    seed: u64,
    mut stats: F,
) -> Result<Vec<BootstrapSummary>, InferenceError>
where
    F: FnMut(&[usize]) -> Vec<f64>,
{
    if n == 0 {
        return Err(InferenceError::BadInput("bootstrap over zero replicates".into()));
    }
    let identity: Vec<usize> = (0..n).collect();
    let estimates = stats(&identity);
    if estimates.len() != k {
        return Err(InferenceError::BadInput(format!(
            "statistic returned {} values, expected {k}",
            estimates.len()
        )));
    }
    let mut rng = replicate_rng(seed, 0xB007_5732A9);
    let mut idx = vec![0usize; n];
    let mut sums = vec![0.0f64; k];
    let mut sumsq = vec![0.0f64; k];
    let mut kept = vec![0usize; k];
    for _ in 0..n_boot {
        for slot in idx.iter_mut() {
            *slot = rng.gen_range(0..n);
        }
        let draw = stats(&idx);
        if draw.len() != k {
            return Err(InferenceError::BadInput(format!(
                "statistic returned {} values, expected {k}",
                draw.len()
            )));
        }
        for (i, v) in draw.into_iter().enumerate() {
            if v.is_finite() {
                sums[i] += v;
                sumsq[i] += v * v;
                kept[i] += 1;
            }
        }
    }
    Ok((0..k)
        .map(|i| {
            let m = kept[i];
            let se = if m >= 2 {
                let mean = sums[i] / m as f64;
                ((sumsq[i] / m as f64 - mean * mean).max(0.0) * m as f64 / (m as f64 - 1.0))
                    .sqrt()
            } else {
                f64::NAN
            };
            BootstrapSummary {
                estimate: estimates[i],
                se,
                dropped: n_boot - m,
            }
        })
        .collect())
}

/// Bootstrap of a single statistic; see `bootstrap_vector`.
pub fn bootstrap_scalar<F>(
    n: usize,
    n_boot: usize,
    seed: u64,
    mut stat: F,
) -> Result<BootstrapSummary, InferenceError>
where
    F: FnMut(&[usize]) -> f64,
{
    Ok(bootstrap_vector(n, 1, n_boot, seed, |idx| vec![stat(idx)])?[0])
}

/// Fourier coefficients of the mean curvature-radius function of the
/// grain process from its surface tensor densities: for frequency s >= 0,
///
/// g_hat(s) = sum_{j=0}^{s} binom(s, j) (-i)^{s-j} (s! w_{1+s} / 2 pi) T_j,
///
/// with T_j the j-ones component of the rank-s density; negative
/// frequencies follow by conjugation since the tensors are real.
/// `densities` holds the rank-s tensor at index s for s = 0..=N and the
/// result is indexed by frequency + N (length 2N + 1).
pub fn fourier_coefficients(densities: &[SymTensor2]) -> Result<Vec<Complex64>, InferenceError> {
    if densities.is_empty() {
        return Err(InferenceError::MissingRank { needed: 0, have: 0 });
    }
    let nmax = densities.len() - 1;
    for (s, t) in densities.iter().enumerate() {
        if t.rank() != s {
            return Err(InferenceError::BadInput(format!(
                "density at index {s} has rank {}, expected {s}",
                t.rank()
            )));
        }
    }
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * nmax + 1];
    let minus_i = Complex64::new(0.0, -1.0);
    for s in 0..=nmax {
        let scale = factorial(s) * omega(1 + s) / std::f64::consts::TAU;
        let mut c = Complex64::new(0.0, 0.0);
        for j in 0..=s {
            c += minus_i.powu((s - j) as u32) * binomial(s, j) * scale * densities[s].get(j);
        }
        coeffs[nmax + s] = c;
        coeffs[nmax - s] = c.conj();
    }
    Ok(coeffs)
}

/// Reconstruction of the mean curvature-radius function on a uniform
/// angular grid by the symmetric partial Fourier sum.
#[derive(Debug, Clone)]
pub struct RadiusFunction {
    pub angles: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest imaginary part over the grid, a consistency diagnostic:
    /// for exact (noise-free) coefficient inputs it sits at rounding
    /// level.
    pub max_imag: f64,
}

pub fn reconstruct_radius(
    coeffs: &[Complex64],
    grid: usize,
) -> Result<RadiusFunction, InferenceError> {
    if coeffs.len() % 2 == 0 {
        return Err(InferenceError::BadInput(format!(
            "coefficient list must have odd length 2N+1, got {}",
            coeffs.len()
        )));
    }
    if grid == 0 {
        return Err(InferenceError::BadInput("empty reconstruction grid".into()));
    }
    let nmax = (coeffs.len() - 1) as i64 / 2;
    let mut angles = Vec::with_capacity(grid);
    let mut values = Vec::with_capacity(grid);
    let mut max_imag: f64 = 0.0;
    for g in 0..grid {
        let phi = std::f64::consts::TAU * g as f64 / grid as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, c) in coeffs.iter().enumerate() {
            let k = i as i64 - nmax;
            acc += c * Complex64::new(0.0, k as f64 * phi).exp();
        }
        angles.push(phi);
        values.push(acc.re);
        max_imag = max_imag.max(acc.im.abs());
    }
    Ok(RadiusFunction { angles, values, max_imag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{
        density_surface_tensor_x_with, grain_analytics, mean_radius_function,
        surface_tensor_density_z_with, volume_fraction, ModelParams, Orientation,
    };
    use crate::geom2d::BaseGrain;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn ellipse(p: f64, q: f64) -> BaseGrain {
        BaseGrain::Ellipse { p, q, m: 30 }
    }

    #[test]
    fn gamma_round_trip() {
        for &gamma in &[0.05f64, 0.7, 3.0] {
            let area = 0.37;
            let phi = 1.0 - (-gamma * area).exp();
            let hat = estimate_gamma(phi, area).unwrap();
            assert_relative_eq!(hat, gamma, max_relative = 1e-13);
        }
        assert!(estimate_gamma(1.0, 1.0).is_err());
        assert!(estimate_gamma(-0.1, 1.0).is_err());
        assert!(estimate_gamma(0.5, 0.0).is_err());
    }

    #[test]
    fn alpha_round_trip_is_exact_on_noise_free_input() {
        let ga = grain_analytics(&ellipse(1.0, 0.25), 2).unwrap();
        let gamma = 0.4;
        for &a in &[0.0, 0.5, 1.0, 3.0, 10.0, 25.0, 50.0] {
            let alpha = Orientation::Finite(a);
            let t = surface_tensor_density_z_with(gamma, alpha, &ga, 2);
            let phi = 1.0 - (-gamma * ga.area).exp();
            let hat = estimate_alpha(t.as_matrix2()[0][0], phi, &ga).unwrap();
            assert_abs_diff_eq!(hat, a, epsilon = 1e-8 * (1.0 + a));
            let hat_sym = estimate_alpha_symmetric(&t, &ga).unwrap();
            assert_abs_diff_eq!(hat_sym, a, epsilon = 1e-8 * (1.0 + a));
        }
    }

    #[test]
    fn alpha_estimator_rejects_isotropic_grains() {
        let ga = grain_analytics(&ellipse(0.3, 0.3), 2).unwrap();
        assert!(matches!(
            estimate_alpha(0.01, 0.2, &ga),
            Err(InferenceError::IsotropicGrain)
        ));
        let square = grain_analytics(&BaseGrain::Rectangle { a: 1.0, b: 1.0 }, 2).unwrap();
        assert!(matches!(
            estimate_alpha(0.01, 0.2, &square),
            Err(InferenceError::IsotropicGrain)
        ));
    }

    #[test]
    fn alpha_estimator_flags_divergence() {
        let ga = grain_analytics(&ellipse(1.0, 0.25), 2).unwrap();
        let gamma = 0.4;
        let phi = 1.0 - (-gamma * ga.area).exp();
        // The aligned limit of the (1,1) entry makes the denominator zero.
        let t11_aligned = gamma * ga.s2_matrix()[0][0] * (1.0 - phi);
        assert!(matches!(
            estimate_alpha(t11_aligned, phi, &ga),
            Err(InferenceError::Diverged(_))
        ));
        // Noise past the limit produces a negative estimate, not an error.
        let hat = estimate_alpha(t11_aligned * 0.98, phi, &ga).unwrap();
        assert!(hat < 0.0 || hat > 100.0);
    }

    #[test]
    fn bootstrap_of_constant_data_has_zero_error() {
        let values = vec![2.5; 40];
        let s = bootstrap_scalar(values.len(), 500, 9, |idx| {
            idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64
        })
        .unwrap();
        assert_eq!(s.estimate, 2.5);
        assert_eq!(s.se, 0.0);
        assert_eq!(s.dropped, 0);
    }

    #[test]
    fn bootstrap_matches_the_classical_error_of_a_mean() {
        // iid values: the bootstrap SE of the mean approximates s/sqrt(n).
        let mut rng = replicate_rng(123, 0);
        let values: Vec<f64> = (0..400).map(|_| rng.gen::<f64>()).collect();
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd =
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        let classical = sd / (n as f64).sqrt();
        let s = bootstrap_scalar(n, 4000, 77, |idx| {
            idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64
        })
        .unwrap();
        assert_relative_eq!(s.estimate, mean, max_relative = 1e-15);
        assert_relative_eq!(s.se, classical, max_relative = 0.1);
    }

    #[test]
    fn bootstrap_draws_are_shared_across_components() {
        // The difference of two perfectly correlated statistics has zero
        // bootstrap variance only when index draws are shared.
        let mut rng = replicate_rng(5, 5);
        let values: Vec<f64> = (0..50).map(|_| rng.gen::<f64>()).collect();
        let out = bootstrap_vector(values.len(), 3, 300, 3, |idx| {
            let m = idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64;
            vec![m, 2.0 * m, 2.0 * m - 2.0 * m]
        })
        .unwrap();
        assert_relative_eq!(out[1].se, 2.0 * out[0].se, max_relative = 1e-12);
        assert_eq!(out[2].se, 0.0);
    }

    #[test]
    fn bootstrap_is_deterministic_in_the_seed() {
        let values: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let f = |idx: &[usize]| idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64;
        let a = bootstrap_scalar(values.len(), 200, 4, f).unwrap();
        let b = bootstrap_scalar(values.len(), 200, 4, f).unwrap();
        assert_eq!(a.se.to_bits(), b.se.to_bits());
        let c = bootstrap_scalar(values.len(), 200, 5, f).unwrap();
        assert_ne!(a.se.to_bits(), c.se.to_bits());
    }

    #[test]
    fn disk_fourier_spectrum_is_flat() {
        let gamma = 0.8;
        let r = 0.35;
        let ga = grain_analytics(&ellipse(r, r), 8).unwrap();
        let dens: Vec<SymTensor2> = (0..=8)
            .map(|s| density_surface_tensor_x_with(gamma, Orientation::Finite(2.0), &ga, s))
            .collect();
        let coeffs = fourier_coefficients(&dens).unwrap();
        let n = 8;
        assert_relative_eq!(coeffs[n].re, gamma * r, max_relative = 1e-12);
        assert_abs_diff_eq!(coeffs[n].im, 0.0, epsilon = 1e-14);
        for (i, c) in coeffs.iter().enumerate() {
            if i != n {
                assert_abs_diff_eq!(c.norm(), 0.0, epsilon = 1e-12);
            }
        }
        let rec = reconstruct_radius(&coeffs, 64).unwrap();
        for v in &rec.values {
            assert_relative_eq!(*v, gamma * r, max_relative = 1e-10);
        }
        assert!(rec.max_imag < 1e-12);
    }

    #[test]
    fn coefficients_are_conjugate_symmetric() {
        let ga = grain_analytics(&ellipse(1.0, 0.5), 6).unwrap();
        let dens: Vec<SymTensor2> = (0..=6)
            .map(|s| density_surface_tensor_x_with(1.0, Orientation::Finite(3.0), &ga, s))
            .collect();
        let coeffs = fourier_coefficients(&dens).unwrap();
        let n = 6;
        for k in 0..=n {
            let a = coeffs[n + k];
            let b = coeffs[n - k];
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, -b.im, epsilon = 1e-15);
        }
        // A centrally symmetric grain has no odd-frequency content.
        for k in (1..=n).step_by(2) {
            assert_abs_diff_eq!(coeffs[n + k].norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn aligned_ellipse_reconstruction_hits_the_true_radius() {
        // Aligned grains: the mean radius function is the curvature
        // radius itself scaled by the intensity, and the partial sum with
        // frequencies up to 32 lands within a percent everywhere.
        let gamma = 1.3;
        let grain = ellipse(0.5, 0.25);
        let ga = grain_analytics(&grain, 32).unwrap();
        let dens: Vec<SymTensor2> = (0..=32)
            .map(|s| density_surface_tensor_x_with(gamma, Orientation::Aligned, &ga, s))
            .collect();
        let coeffs = fourier_coefficients(&dens).unwrap();
        let rec = reconstruct_radius(&coeffs, 256).unwrap();
        let params = ModelParams {
            gamma,
            alpha: Orientation::Aligned,
            grain: grain.clone(),
        };
        let sup_true = gamma * 0.5 * 0.5 / 0.25;
        let mut worst: f64 = 0.0;
        for (phi, v) in rec.angles.iter().zip(&rec.values) {
            let truth = mean_radius_function(&params, *phi).unwrap();
            worst = worst.max((v - truth).abs());
        }
        assert!(
            worst <= 0.01 * sup_true,
            "worst absolute gap {worst} vs bound {}",
            0.01 * sup_true
        );
        assert!(rec.max_imag < 1e-10);
    }

    #[test]
    fn smoothed_model_reconstruction_agrees_with_direct_smoothing() {
        // Finite exponent: the synthesis from rotation-averaged tensors
        // must match the directly smoothed radius profile.
        let gamma = 0.9;
        let grain = ellipse(0.4, 0.2);
        let a = Orientation::Finite(3.0);
        let ga = grain_analytics(&grain, 16).unwrap();
        let dens: Vec<SymTensor2> = (0..=16)
            .map(|s| density_surface_tensor_x_with(gamma, a, &ga, s))
            .collect();
        let coeffs = fourier_coefficients(&dens).unwrap();
        let rec = reconstruct_radius(&coeffs, 64).unwrap();
        let params = ModelParams { gamma, alpha: a, grain: grain.clone() };
        for (phi, v) in rec.angles.iter().zip(&rec.values) {
            let truth = mean_radius_function(&params, *phi).unwrap();
            assert_abs_diff_eq!(*v, truth, epsilon = 2e-3 * gamma);
        }
    }

    #[test]
    fn volume_fraction_and_gamma_agree_with_the_model_helpers() {
        let params = ModelParams {
            gamma: 0.6,
            alpha: Orientation::Finite(2.0),
            grain: ellipse(0.5, 0.25),
        };
        let phi = volume_fraction(&params);
        let hat = estimate_gamma(phi, params.grain.area()).unwrap();
        assert_relative_eq!(hat, 0.6, max_relative = 1e-13);
    }
}
