//! Random phase-perturbation distributions and their cosine moments.
//!
//! The analytical model sees a perturbation law only through the two moments
//! `C_δ = E[cos δ]` and `C_2δ = E[cos 2δ]`, which live in the feasible
//! region `2C_δ² − 1 ≤ C_2δ ≤ 2C_δ − 1` (for perturbations within
//! `[-π/2, π/2]`). Three families cover the study:
//!
//! - `two_point`: δ = ±δ₀ with probability ½ each — the lower boundary,
//! - `uniform`: δ ~ uniform[-δ₀, δ₀],
//! - `three_point`: P(±δ₀) = p, P(0) = 1 − 2p — spans the whole region.
//!
//! Closed-form moments are canonical; sampling exists only for the protocol
//! simulator.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{invalid, Result};

/// Floating-point slack for the feasibility boundaries: the two-point family
/// sits exactly on the lower boundary and rounding must not push it out.
const FEASIBILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    TwoPoint,
    Uniform,
    ThreePoint,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::TwoPoint => "two_point",
            Family::Uniform => "uniform",
            Family::ThreePoint => "three_point",
        }
    }

    pub fn parse_name(name: &str) -> Result<Self> {
        match name {
            "two_point" => Ok(Family::TwoPoint),
            "uniform" => Ok(Family::Uniform),
            "three_point" => Ok(Family::ThreePoint),
            other => Err(invalid(format!("unknown distribution family `{other}`"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Cosine moments of a perturbation law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub c_delta: f64,
    pub c_2delta: f64,
}

impl Moments {
    /// Membership in the feasible region `2C_δ² − 1 ≤ C_2δ ≤ 2C_δ − 1`
    /// (up to floating-point slack on the boundaries).
    pub fn is_feasible(&self) -> bool {
        let lower = 2.0 * self.c_delta * self.c_delta - 1.0;
        let upper = 2.0 * self.c_delta - 1.0;
        self.c_2delta >= lower - FEASIBILITY_SLACK && self.c_2delta <= upper + FEASIBILITY_SLACK
    }
}

/// A validated perturbation distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationDist {
    family: Family,
    delta0: f64,
    weight_p: Option<f64>,
}

impl PerturbationDist {
    /// Validates and builds a distribution. `weight_p` is required for
    /// `three_point` and ignored otherwise.
    pub fn new(family: Family, delta0: f64, weight_p: Option<f64>) -> Result<Self> {
        if !delta0.is_finite() || delta0 <= 0.0 || delta0 >= PI {
            return Err(invalid(format!(
                "delta0 must lie in (0, π), got {delta0}"
            )));
        }
        let weight_p = match family {
            Family::ThreePoint => {
                let p = weight_p.ok_or_else(|| invalid("three_point requires weight p"))?;
                if !p.is_finite() || p <= 0.0 || p > 0.5 {
                    return Err(invalid(format!("weight p must lie in (0, 0.5], got {p}")));
                }
                Some(p)
            }
            _ => None,
        };
        Ok(Self {
            family,
            delta0,
            weight_p,
        })
    }

    pub fn two_point(delta0: f64) -> Result<Self> {
        Self::new(Family::TwoPoint, delta0, None)
    }

    pub fn uniform(delta0: f64) -> Result<Self> {
        Self::new(Family::Uniform, delta0, None)
    }

    pub fn three_point(delta0: f64, p: f64) -> Result<Self> {
        Self::new(Family::ThreePoint, delta0, Some(p))
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn weight_p(&self) -> Option<f64> {
        self.weight_p
    }

    /// Closed-form cosine moments.
    ///
    /// For `two_point` the second moment is computed through the
    /// double-angle identity so the pair lands exactly on the lower
    /// feasibility boundary.
    pub fn moments(&self) -> Moments {
        match self.family {
            Family::TwoPoint => {
                let c = self.delta0.cos();
                Moments {
                    c_delta: c,
                    c_2delta: 2.0 * c * c - 1.0,
                }
            }
            Family::Uniform => Moments {
                c_delta: sinc(self.delta0),
                c_2delta: sinc(2.0 * self.delta0),
            },
            Family::ThreePoint => {
                let p = self.weight_p.expect("validated");
                Moments {
                    c_delta: 1.0 - 2.0 * p * (1.0 - self.delta0.cos()),
                    c_2delta: 1.0 - 2.0 * p * (1.0 - (2.0 * self.delta0).cos()),
                }
            }
        }
    }

    /// Second moment `E[δ²]`, used by the small-angle sanity checks.
    pub fn delta_sq_mean(&self) -> f64 {
        let d2 = self.delta0 * self.delta0;
        match self.family {
            Family::TwoPoint => d2,
            Family::Uniform => d2 / 3.0,
            Family::ThreePoint => 2.0 * self.weight_p.expect("validated") * d2,
        }
    }

    /// One draw from the law.
    pub fn sample_one(&self, rng: &mut impl Rng) -> f64 {
        match self.family {
            Family::TwoPoint => {
                if rng.gen::<bool>() {
                    self.delta0
                } else {
                    -self.delta0
                }
            }
            Family::Uniform => rng.gen_range(-self.delta0..=self.delta0),
            Family::ThreePoint => {
                let p = self.weight_p.expect("validated");
                let u: f64 = rng.gen();
                if u < p {
                    self.delta0
                } else if u < 2.0 * p {
                    -self.delta0
                } else {
                    0.0
                }
            }
        }
    }

    /// `n` i.i.d. draws from one stream.
    pub fn sample(&self, rng: &mut impl Rng, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(invalid("sample count must be at least 1"));
        }
        Ok((0..n).map(|_| self.sample_one(rng)).collect())
    }
}

fn sinc(x: f64) -> f64 {
    // x is bounded away from 0 by construction (delta0 > 0).
    x.sin() / x
}

/// One step of a piecewise-constant distribution schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleStep {
    /// First timeslot (1-based) at which `dist` applies.
    pub from_slot: usize,
    pub dist: PerturbationDist,
}

/// Perturbation law per timeslot: fixed, or a step table.
#[derive(Debug, Clone, PartialEq)]
pub enum DistSchedule {
    Fixed(PerturbationDist),
    Steps(Vec<ScheduleStep>),
}

impl DistSchedule {
    pub fn steps(steps: Vec<ScheduleStep>) -> Result<Self> {
        if steps.is_empty() {
            return Err(invalid("schedule must have at least one step"));
        }
        if steps[0].from_slot != 1 {
            return Err(invalid("schedule must start at timeslot 1"));
        }
        if steps.windows(2).any(|w| w[1].from_slot <= w[0].from_slot) {
            return Err(invalid("schedule steps must have increasing from_slot"));
        }
        Ok(DistSchedule::Steps(steps))
    }

    /// The distribution in force at a (1-based) timeslot.
    pub fn dist_at(&self, slot: usize) -> &PerturbationDist {
        match self {
            DistSchedule::Fixed(d) => d,
            DistSchedule::Steps(steps) => {
                let idx = steps.partition_point(|s| s.from_slot <= slot);
                &steps[idx.saturating_sub(1)].dist
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use crate::seeding;
    use rand::Rng;

    #[test]
    fn make_dist_validation() {
        assert!(PerturbationDist::uniform(PI / 30.0).is_ok());
        assert!(PerturbationDist::two_point(0.0).is_err());
        assert!(PerturbationDist::three_point(PI / 4.0, 0.6).is_err());
        assert!(PerturbationDist::three_point(PI / 4.0, 0.0).is_err());
        assert!(PerturbationDist::uniform(PI).is_err());
        assert!(PerturbationDist::new(Family::ThreePoint, 0.1, None).is_err());
    }

    #[test]
    fn two_point_moments_at_pi_over_3() {
        let m = PerturbationDist::two_point(PI / 3.0).unwrap().moments();
        assert!((m.c_delta - 0.5).abs() < 1e-15);
        assert!((m.c_2delta + 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_moments_match_quadrature() {
        let d0 = PI / 30.0;
        let m = PerturbationDist::uniform(d0).unwrap().moments();
        let c_quad = integrate(|x| x.cos(), -d0, d0, 1e-14) / (2.0 * d0);
        let c2_quad = integrate(|x| (2.0 * x).cos(), -d0, d0, 1e-14) / (2.0 * d0);
        assert!((m.c_delta - c_quad).abs() < 1e-10);
        assert!((m.c_2delta - c2_quad).abs() < 1e-10);
        assert!((m.c_delta - (d0.sin() / d0)).abs() < 1e-15);
    }

    #[test]
    fn three_point_moments_direct_expectation() {
        let m = PerturbationDist::three_point(PI / 4.0, 0.25).unwrap().moments();
        let expect = 1.0 - 0.5 * (1.0 - std::f64::consts::FRAC_1_SQRT_2);
        assert!((m.c_delta - expect).abs() < 1e-15);
    }

    #[test]
    fn feasibility_examples() {
        // Any two-point law sits exactly on the lower boundary.
        for &d0 in &[0.01, PI / 30.0, PI / 6.0, PI / 3.0, 1.5] {
            let m = PerturbationDist::two_point(d0).unwrap().moments();
            assert_eq!(m.c_2delta, 2.0 * m.c_delta * m.c_delta - 1.0);
            assert!(m.is_feasible());
        }
        assert!(!Moments {
            c_delta: 0.9,
            c_2delta: 0.9
        }
        .is_feasible());
        assert!(Moments {
            c_delta: 1.0,
            c_2delta: 1.0
        }
        .is_feasible());
    }

    #[test]
    fn all_families_feasible_over_small_angle_grid() {
        // The upper feasibility bound relies on perturbations within
        // [-π/2, π/2], so the grid stays in that regime.
        let mut k = 1;
        while k <= 64 {
            let d0 = PI / 2.0 * k as f64 / 64.0;
            assert!(PerturbationDist::two_point(d0).unwrap().moments().is_feasible());
            assert!(PerturbationDist::uniform(d0).unwrap().moments().is_feasible());
            for &p in &[0.05, 0.25, 0.5] {
                let m = PerturbationDist::three_point(d0, p).unwrap().moments();
                assert!(m.is_feasible(), "three_point d0={d0} p={p}");
            }
            k += 1;
        }
    }

    #[test]
    fn small_angle_taylor_property() {
        // |C_δ − (1 − E[δ²]/2)| < δ₀⁴/24 for δ₀ ≤ π/20.
        for k in 1..=20 {
            let d0 = PI / 20.0 * k as f64 / 20.0;
            let dists = [
                PerturbationDist::two_point(d0).unwrap(),
                PerturbationDist::uniform(d0).unwrap(),
                PerturbationDist::three_point(d0, 0.3).unwrap(),
                PerturbationDist::three_point(d0, 0.5).unwrap(),
            ];
            for d in dists {
                let gap = (d.moments().c_delta - (1.0 - d.delta_sq_mean() / 2.0)).abs();
                assert!(
                    gap < d0.powi(4) / 24.0,
                    "{} d0={d0}: gap={gap}",
                    d.family()
                );
            }
        }
    }

    #[test]
    fn two_point_draws_are_pm_delta0() {
        let d = PerturbationDist::two_point(PI / 20.0).unwrap();
        let mut rng = seeding::stream(9, 0);
        for _ in 0..1000 {
            let x = d.sample_one(&mut rng);
            assert!(x == PI / 20.0 || x == -PI / 20.0);
        }
    }

    #[test]
    fn three_point_draws_supported_and_weighted() {
        let d = PerturbationDist::three_point(0.3, 0.2).unwrap();
        let mut rng = seeding::stream(10, 0);
        let mut zeros = 0usize;
        for _ in 0..100_000 {
            let x = d.sample_one(&mut rng);
            assert!(x == 0.3 || x == -0.3 || x == 0.0);
            if x == 0.0 {
                zeros += 1;
            }
        }
        let frac = zeros as f64 / 100_000.0;
        assert!((frac - 0.6).abs() < 0.01, "frac = {frac}");
    }

    #[test]
    fn uniform_sample_mean_matches_quadrature_oracle() {
        let d0 = PI / 20.0;
        let d = PerturbationDist::uniform(d0).unwrap();
        let mut rng = seeding::stream(1234, 0);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut bound_ok = true;
        for _ in 0..n {
            let x = d.sample_one(&mut rng);
            bound_ok &= (-d0..=d0).contains(&x);
            sum += x.cos();
        }
        assert!(bound_ok);
        let mean = sum / n as f64;
        let e1 = integrate(|x| x.cos(), -d0, d0, 1e-14) / (2.0 * d0);
        let e2 = integrate(|x| x.cos() * x.cos(), -d0, d0, 1e-14) / (2.0 * d0);
        let se = ((e2 - e1 * e1) / n as f64).sqrt();
        assert!(
            (mean - e1).abs() < 3.0 * se,
            "mean = {mean}, oracle = {e1}, se = {se}"
        );
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let d = PerturbationDist::uniform(PI / 20.0).unwrap();
        let a = d.sample(&mut seeding::sensor_stream(5, 3), 64).unwrap();
        let b = d.sample(&mut seeding::sensor_stream(5, 3), 64).unwrap();
        assert_eq!(a, b);
        assert!(d.sample(&mut seeding::stream(5, 0), 0).is_err());
    }

    #[test]
    fn sensor_draws_do_not_depend_on_ensemble_size() {
        let d = PerturbationDist::uniform(PI / 20.0).unwrap();
        let mut s = seeding::sensor_stream(42, 7);
        let first: f64 = d.sample_one(&mut s);
        // Re-derive the same sensor's stream as if part of a larger ensemble.
        let mut s2 = seeding::sensor_stream(42, 7);
        assert_eq!(first, d.sample_one(&mut s2));
    }

    #[test]
    fn schedule_lookup() {
        let a = PerturbationDist::uniform(0.2).unwrap();
        let b = PerturbationDist::uniform(0.1).unwrap();
        let s = DistSchedule::steps(vec![
            ScheduleStep {
                from_slot: 1,
                dist: a,
            },
            ScheduleStep {
                from_slot: 100,
                dist: b,
            },
        ])
        .unwrap();
        assert_eq!(s.dist_at(1), &a);
        assert_eq!(s.dist_at(99), &a);
        assert_eq!(s.dist_at(100), &b);
        assert_eq!(s.dist_at(10_000), &b);

        assert!(DistSchedule::steps(vec![]).is_err());
        assert!(DistSchedule::steps(vec![ScheduleStep {
            from_slot: 2,
            dist: a
        }])
        .is_err());
    }

    #[test]
    fn uniform_draw_consumption_is_one_value_per_call() {
        // The protocol replay oracle reproduces draws; pin the call pattern.
        let d = PerturbationDist::uniform(0.15).unwrap();
        let mut rng = seeding::stream(77, 2);
        let x = d.sample_one(&mut rng);
        let mut rng2 = seeding::stream(77, 2);
        let y: f64 = rng2.gen_range(-0.15..=0.15);
        assert_eq!(x, y);
    }
}
