//! Deterministic model of the expected convergence trajectory.
//!
//! Conditioned on the current expected strength `y`, the rotated sensor
//! phases are modeled as i.i.d. Laplacian with parameter `φ₀` tied to `y`
//! by `y = N/(1 + φ₀²)`. The perturbed phasor sum then has an in-phase
//! Gaussian component with variance
//!
//! ```text
//! σ₁² = (N/2)·[(1 − C_δ²) − (y/N)/(4 − 3·y/N)·(C_δ² − C_2δ)]
//! ```
//!
//! and the one-bit accept rule turns the expected update into
//!
//! ```text
//! y⁺ = y + σ₁·g(x),   x = y(1 − C_δ)/σ₁,   g(x) = φ(x) − x·Q(x)
//! ```
//!
//! with `φ`/`Q` the standard normal density and tail. The recursion starts
//! at `y[1] = √N` and, with unit gains, is clamped to the coherent bound N.

use crate::error::{domain, invalid, Result};
use crate::perturbation::{DistSchedule, Moments};

const INV_SQRT_2PI: f64 = 0.3989422804014327;

/// Relative σ₁ floor below which a step degenerates to the identity.
const SIGMA_FLOOR: f64 = 1e-12;

/// Standard normal tail probability `Q(x) = P(Z > x)`.
///
/// Evaluated through the complementary error function; absolute error is
/// well below 1e-12 for |x| ≤ 8 (checked against quadrature in the tests).
pub fn q_function(x: f64) -> f64 {
    debug_assert!(x.is_finite());
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `g(x) = φ(x) − x·Q(x)` for x ≥ 0: the expected positive part of a unit
/// Gaussian shifted by −x. Strictly positive and decreasing.
pub fn g_func(x: f64) -> f64 {
    assert!(x >= 0.0, "g_func requires x >= 0, got {x}");
    // The difference underflows to a negative ulp in the far tail; the
    // mathematical value is positive.
    (normal_pdf(x) - x * q_function(x)).max(0.0)
}

fn check_y(y: f64, n_sensors: usize) -> Result<f64> {
    if n_sensors == 0 {
        return Err(invalid("n_sensors must be at least 1"));
    }
    let n = n_sensors as f64;
    if !y.is_finite() || y <= 0.0 || y > n {
        return Err(domain(format!("y must lie in (0, N]; y = {y}, N = {n}")));
    }
    Ok(n)
}

/// Laplacian scale from the expected strength: `φ₀ = √(N/y − 1)`.
pub fn phi0_from_y(y: f64, n_sensors: usize) -> Result<f64> {
    let n = check_y(y, n_sensors)?;
    Ok((n / y - 1.0).sqrt())
}

/// Variances `(σ₁², σ₂²)` of the in-phase and quadrature perturbation
/// components, under the Laplacian phase model at strength `y`.
///
/// The model assumes unit gains; heterogeneous-gain ensembles must not be
/// fed through it.
pub fn variances(y: f64, n_sensors: usize, moments: &Moments) -> Result<(f64, f64)> {
    let n = check_y(y, n_sensors)?;
    if !moments.is_feasible() {
        return Err(invalid(format!(
            "moments ({}, {}) outside the feasible region",
            moments.c_delta, moments.c_2delta
        )));
    }
    let frac = y / n;
    let cos2_mean = frac / (4.0 - 3.0 * frac);
    let c = moments.c_delta;
    let c2 = moments.c_2delta;
    let s1 = 0.5 * n * ((1.0 - c * c) - cos2_mean * (c * c - c2));
    let s2 = 0.5 * n * (1.0 - cos2_mean * c2);
    Ok((s1.max(0.0), s2.max(0.0)))
}

/// One model step with σ₁ supplied by the caller.
///
/// Exposed so the slope of the update map can be probed with σ₁ held
/// constant. Degenerates to the identity when σ₁ is negligible and clamps
/// the result to the coherent bound N.
pub fn model_step_with_sigma(y: f64, n_sensors: usize, c_delta: f64, sigma1: f64) -> f64 {
    let n = n_sensors as f64;
    if sigma1 <= SIGMA_FLOOR * n {
        return y;
    }
    let x = y * (1.0 - c_delta) / sigma1;
    let next = y + sigma1 * g_func(x);
    if next > n {
        log::debug!("model step clamped: y = {y}, raw next = {next}, N = {n}");
        n
    } else {
        next
    }
}

/// Expected best strength after one timeslot.
pub fn model_step(y: f64, n_sensors: usize, moments: &Moments) -> Result<f64> {
    let (s1_sq, _) = variances(y, n_sensors, moments)?;
    Ok(model_step_with_sigma(y, n_sensors, moments.c_delta, s1_sq.sqrt()))
}

/// The same update written through the acceptance probability
/// `p = Q(y(1−C_δ)/σ₁)`:
///
/// ```text
/// y⁺ = y·(1 − p·(1 − C_δ)) + σ₁·φ(x)
/// ```
///
/// Algebraically identical to [`model_step`]; kept as an independent route
/// for validation.
pub fn model_step_prob_form(y: f64, n_sensors: usize, moments: &Moments) -> Result<f64> {
    let n = n_sensors as f64;
    let (s1_sq, _) = variances(y, n_sensors, moments)?;
    let sigma1 = s1_sq.sqrt();
    if sigma1 <= SIGMA_FLOOR * n {
        return Ok(y);
    }
    let c = moments.c_delta;
    let x = y * (1.0 - c) / sigma1;
    let p = q_function(x);
    let next = y * (1.0 - p * (1.0 - c)) + sigma1 * normal_pdf(x);
    Ok(next.min(n))
}

/// Runs the recursion from `y[1] = √N` for `horizon` timeslots.
pub fn run_model(n_sensors: usize, schedule: &DistSchedule, horizon: usize) -> Result<Vec<f64>> {
    if n_sensors == 0 {
        return Err(invalid("n_sensors must be at least 1"));
    }
    if horizon == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    let mut ys = Vec::with_capacity(horizon);
    ys.push((n_sensors as f64).sqrt());
    for slot in 1..horizon {
        let moments = schedule.dist_at(slot).moments();
        let y = *ys.last().expect("nonempty");
        ys.push(model_step(y, n_sensors, &moments)?);
    }
    Ok(ys)
}

/// Diagnostic view of the recursion at one strength value: the fitted
/// Laplacian scale and both perturbation-component deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelState {
    pub y: f64,
    pub n_sensors: usize,
    /// `√(N/y − 1)`.
    pub phi0: f64,
    pub sigma1: f64,
    /// Quadrature component deviation; not used by the recursion.
    pub sigma2: f64,
}

impl ModelState {
    pub fn at(y: f64, n_sensors: usize, moments: &Moments) -> Result<Self> {
        let phi0 = phi0_from_y(y, n_sensors)?;
        let (s1_sq, s2_sq) = variances(y, n_sensors, moments)?;
        Ok(Self {
            y,
            n_sensors,
            phi0,
            sigma1: s1_sq.sqrt(),
            sigma2: s2_sq.sqrt(),
        })
    }
}

/// Laplacian density `f(φ) = e^{−|φ|/φ₀}/(2φ₀)`.
pub fn laplacian_pdf(phi: f64, phi0: f64) -> Result<f64> {
    if !phi0.is_finite() || phi0 <= 0.0 {
        return Err(domain(format!("phi0 must be positive, got {phi0}")));
    }
    Ok((-phi.abs() / phi0).exp() / (2.0 * phi0))
}

/// CDF of |φ| for Laplacian φ (an exponential law): `1 − e^{−t/φ₀}`.
pub fn laplacian_folded_cdf(t: f64, phi0: f64) -> Result<f64> {
    if !phi0.is_finite() || phi0 <= 0.0 {
        return Err(domain(format!("phi0 must be positive, got {phi0}")));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - (-t / phi0).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::{DistSchedule, PerturbationDist, ScheduleStep};
    use crate::quadrature::integrate;
    use crate::seeding;
    use rand::Rng;
    use std::f64::consts::PI;

    fn q_quadrature(x: f64) -> f64 {
        integrate(normal_pdf, x, x.max(0.0) + 40.0, 1e-14)
    }

    #[test]
    fn q_symmetry() {
        assert_eq!(q_function(0.0), 0.5);
        for &x in &[0.1, 0.5, 1.0, 2.5, 4.0, 7.0] {
            assert!((q_function(x) + q_function(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn q_matches_quadrature_oracle() {
        assert!((q_function(1.0) - 0.1586552539).abs() < 1e-9);
        for &x in &[-8.0, -4.0, -2.0, -1.0, -0.3, 0.0, 0.5, 1.0, 2.0, 3.6, 5.0, 8.0] {
            let oracle = q_quadrature(x);
            let err = (q_function(x) - oracle).abs();
            assert!(err < 1e-12, "x = {x}: err = {err}");
        }
    }

    #[test]
    fn g_examples() {
        assert!((g_func(0.0) - INV_SQRT_2PI).abs() < 1e-15);
        assert!(g_func(8.0) < 1e-13);
        let expect = normal_pdf(1.0) - q_quadrature(1.0);
        assert!((g_func(1.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn g_positive_and_decreasing() {
        let mut prev = f64::INFINITY;
        let mut x = 0.0;
        while x <= 8.0 {
            let g = g_func(x);
            assert!(g > 0.0, "g({x}) = {g}");
            assert!(g < prev);
            prev = g;
            x += 0.05;
        }
    }

    #[test]
    #[should_panic]
    fn g_rejects_negative() {
        g_func(-0.1);
    }

    #[test]
    fn phi0_examples() {
        assert_eq!(phi0_from_y(100.0, 100).unwrap(), 0.0);
        assert!((phi0_from_y(50.0, 100).unwrap() - 1.0).abs() < 1e-15);
        assert!((phi0_from_y(20.0, 100).unwrap() - 2.0).abs() < 1e-15);
        assert!(phi0_from_y(0.0, 100).is_err());
        assert!(phi0_from_y(100.1, 100).is_err());
    }

    #[test]
    fn variance_vanishes_without_perturbation() {
        let m = Moments {
            c_delta: 1.0,
            c_2delta: 1.0,
        };
        let (s1, _) = variances(37.0, 100, &m).unwrap();
        assert_eq!(s1, 0.0);
    }

    #[test]
    fn variance_vanishes_for_two_point_at_coherence() {
        let m = PerturbationDist::two_point(PI / 30.0).unwrap().moments();
        let (s1, s2) = variances(100.0, 100, &m).unwrap();
        assert_eq!(s1, 0.0);
        assert!(s2 >= 0.0);
    }

    #[test]
    fn variance_matches_laplacian_monte_carlo() {
        // Direct evaluation of the variance sum with 10^6 Laplacian-sampled
        // phases at φ₀ = 1 (y = N/2).
        let n = 100usize;
        let y = 50.0;
        let m = PerturbationDist::uniform(PI / 30.0).unwrap().moments();
        let phi0 = phi0_from_y(y, n).unwrap();
        assert!((phi0 - 1.0).abs() < 1e-12);

        let mut rng = seeding::stream(2024, 0);
        let draws = 1_000_000usize;
        let mut cos2_sum = 0.0;
        for _ in 0..draws {
            let u: f64 = rng.gen();
            let centered = u - 0.5;
            let phi = -phi0 * centered.signum() * (1.0 - 2.0 * centered.abs()).ln();
            cos2_sum += (2.0 * phi).cos();
        }
        let cos2_mean = cos2_sum / draws as f64;
        let c = m.c_delta;
        let mc_estimate = 0.5 * n as f64 * ((1.0 - c * c) - cos2_mean * (c * c - m.c_2delta));

        let (s1, _) = variances(y, n, &m).unwrap();
        let rel = (s1 - mc_estimate).abs() / mc_estimate;
        assert!(rel < 0.01, "s1 = {s1}, mc = {mc_estimate}, rel = {rel}");
    }

    #[test]
    fn step_is_identity_when_sigma_vanishes() {
        let m = Moments {
            c_delta: 1.0,
            c_2delta: 1.0,
        };
        assert_eq!(model_step(42.0, 100, &m).unwrap(), 42.0);
    }

    #[test]
    fn two_step_forms_agree() {
        let dists = [
            PerturbationDist::uniform(PI / 100.0).unwrap(),
            PerturbationDist::uniform(PI / 30.0).unwrap(),
            PerturbationDist::uniform(PI / 6.0).unwrap(),
            PerturbationDist::two_point(PI / 30.0).unwrap(),
            PerturbationDist::three_point(PI / 10.0, 0.3).unwrap(),
        ];
        for n in [10usize, 100, 2000] {
            for k in 1..=19 {
                let y = n as f64 * k as f64 / 20.0;
                for d in &dists {
                    let m = d.moments();
                    let a = model_step(y, n, &m).unwrap();
                    let b = model_step_prob_form(y, n, &m).unwrap();
                    assert!(
                        (a - b).abs() <= 1e-12 * a.abs(),
                        "n={n} y={y} {}: {a} vs {b}",
                        d.family()
                    );
                }
            }
        }
    }

    #[test]
    fn step_matches_gaussian_expectation_oracle() {
        // One-step oracle: E[max(C_δ·y + σ₁·Z, y)] over 10^7 Gaussian draws.
        let n = 100usize;
        let y = 10.0;
        let m = PerturbationDist::uniform(PI / 30.0).unwrap().moments();
        let (s1_sq, _) = variances(y, n, &m).unwrap();
        let sigma = s1_sq.sqrt();

        let mut rng = seeding::stream(55, 0);
        let draws = 10_000_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut i = 0;
        while i < draws {
            // Box-Muller.
            let u1: f64 = rng.gen::<f64>().max(1e-300);
            let u2: f64 = rng.gen();
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            for z in [r * c, r * s] {
                let v = (m.c_delta * y + sigma * z).max(y);
                sum += v;
                sum_sq += v * v;
            }
            i += 2;
        }
        let mc_mean = sum / draws as f64;
        let mc_var = sum_sq / draws as f64 - mc_mean * mc_mean;
        let se = (mc_var / draws as f64).sqrt();

        let stepped = model_step(y, n, &m).unwrap();
        assert!(
            (stepped - mc_mean).abs() < 3.0 * se,
            "step = {stepped}, mc = {mc_mean}, se = {se}"
        );
    }

    #[test]
    fn coherence_is_fixed_point_for_two_point() {
        let m = PerturbationDist::two_point(PI / 30.0).unwrap().moments();
        assert_eq!(model_step(100.0, 100, &m).unwrap(), 100.0);
    }

    #[test]
    fn run_model_basics() {
        let sched = DistSchedule::Fixed(PerturbationDist::uniform(PI / 30.0).unwrap());
        let ys = run_model(100, &sched, 1).unwrap();
        assert_eq!(ys, vec![10.0]);

        let ys = run_model(100, &sched, 2000).unwrap();
        assert_eq!(ys.len(), 2000);
        for w in ys.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(*ys.last().unwrap() <= 100.0);

        // Step schedules advance monotonically too.
        let stepped = DistSchedule::steps(vec![
            ScheduleStep {
                from_slot: 1,
                dist: PerturbationDist::uniform(PI / 10.0).unwrap(),
            },
            ScheduleStep {
                from_slot: 500,
                dist: PerturbationDist::uniform(PI / 60.0).unwrap(),
            },
        ])
        .unwrap();
        let ys = run_model(100, &stepped, 1500).unwrap();
        for w in ys.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn update_slope_stays_in_band() {
        // With σ₁ held fixed, dF/dy = 1 − (1 − C_δ)·Q(x), which lies in
        // (C_δ, 1].
        for &d0 in &[PI / 100.0, PI / 30.0, PI / 10.0] {
            let m = PerturbationDist::uniform(d0).unwrap().moments();
            let n = 100usize;
            for k in 1..=9 {
                let y = n as f64 * k as f64 / 10.0;
                let (s1_sq, _) = variances(y, n, &m).unwrap();
                let sigma = s1_sq.sqrt();
                let h = 1e-5 * n as f64;
                let fd = (model_step_with_sigma(y + h, n, m.c_delta, sigma)
                    - model_step_with_sigma(y - h, n, m.c_delta, sigma))
                    / (2.0 * h);
                let x = y * (1.0 - m.c_delta) / sigma;
                let analytic = 1.0 - (1.0 - m.c_delta) * q_function(x);
                assert!(
                    (fd - analytic).abs() < 1e-6,
                    "d0={d0} y={y}: fd = {fd}, analytic = {analytic}"
                );
                assert!(fd > m.c_delta && fd <= 1.0 + 1e-6, "fd = {fd}");
            }
        }
    }

    #[test]
    fn laplacian_density_properties() {
        for &phi0 in &[0.5, 1.0, 2.0] {
            let peak = laplacian_pdf(0.0, phi0).unwrap();
            assert!((peak - 1.0 / (2.0 * phi0)).abs() < 1e-15);

            let l = 60.0 * phi0;
            let total = integrate(|x| laplacian_pdf(x, phi0).unwrap(), -l, l, 1e-12);
            assert!((total - 1.0).abs() < 1e-8, "norm = {total}");

            let e_cos = integrate(|x| x.cos() * laplacian_pdf(x, phi0).unwrap(), -l, l, 1e-12);
            assert!(
                (e_cos - 1.0 / (1.0 + phi0 * phi0)).abs() < 1e-8,
                "E cos = {e_cos}"
            );
            let e_cos2 = integrate(
                |x| (2.0 * x).cos() * laplacian_pdf(x, phi0).unwrap(),
                -l,
                l,
                1e-12,
            );
            assert!(
                (e_cos2 - 1.0 / (1.0 + 4.0 * phi0 * phi0)).abs() < 1e-8,
                "E cos2 = {e_cos2}"
            );
        }
        assert!(laplacian_pdf(0.0, 0.0).is_err());
        assert!(laplacian_folded_cdf(1.0, -1.0).is_err());
        assert_eq!(laplacian_folded_cdf(-0.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn model_state_invariants() {
        let m = PerturbationDist::uniform(PI / 30.0).unwrap().moments();
        for &frac in &[0.1, 0.5, 0.9, 1.0] {
            let n = 120usize;
            let y = frac * n as f64;
            let s = ModelState::at(y, n, &m).unwrap();
            assert!((s.phi0 - (n as f64 / y - 1.0).sqrt()).abs() < 1e-12);
            assert!(s.sigma1 >= 0.0 && s.sigma2 >= 0.0);
            assert!(s.sigma1.powi(2) <= variances(y, n, &m).unwrap().0 + 1e-12);
        }
        assert!(ModelState::at(0.0, 10, &m).is_err());
    }

    #[test]
    fn laplacian_parameter_roundtrip() {
        // phi0_from_y composed with E[cos φ] = 1/(1 + φ₀²) returns y/N.
        for &frac in &[0.05, 0.3, 0.72, 0.99] {
            let n = 250usize;
            let y = frac * n as f64;
            let phi0 = phi0_from_y(y, n).unwrap();
            let back = n as f64 / (1.0 + phi0 * phi0);
            assert!((back - y).abs() < 1e-9 * y, "y = {y}, back = {back}");
        }
    }
}
