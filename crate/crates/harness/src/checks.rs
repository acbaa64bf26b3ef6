//! Acceptance checks: each check pins one quantitative claim about the
//! system and reports pass/fail with the measured margin. The `check`
//! subcommand and the acceptance test suite share these implementations.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use distbeam_core::model::{
    model_step, model_step_prob_form, model_step_with_sigma, q_function, run_model, variances,
};
use distbeam_core::optimizer::run_optimized_model;
use distbeam_core::perturbation::{DistSchedule, Family, PerturbationDist};
use distbeam_core::phasor::mag;
use distbeam_core::protocol::{run_protocol, ProtocolRun, RunSpec, Window};
use distbeam_core::quadrature::integrate;
use distbeam_core::scaling::{
    check_scaling_monotonicity, q_tail_series_lower, q_tail_series_upper, scaling_sweep, SweepMode,
};
use distbeam_core::seeding;
use rand::Rng;

use crate::config::HistogramAt;
use crate::error::{config_err, Result};
use crate::histogram::phase_histogram;

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckReport {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }

    pub fn status_line(&self) -> String {
        format!(
            "check {:<22} {}  ({})",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

fn uniform_sched(d0: f64) -> DistSchedule {
    DistSchedule::Fixed(PerturbationDist::uniform(d0).expect("valid delta0"))
}

/// Model vs Monte-Carlo mean: N = 100, uniform δ₀ = π/30, 50 seeds,
/// 5% relative band at every slot after slot 10.
pub fn check_model_agreement() -> Result<CheckReport> {
    let n = 100usize;
    let horizon = 3000usize;
    let seeds: Vec<u64> = (0..50).collect();
    let sched = uniform_sched(PI / 30.0);
    let model = run_model(n, &sched, horizon)?;

    let traces: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&seed| {
            run_protocol(&RunSpec::new(n, sched.clone(), horizon, seed))
                .map(|t| t.iter().map(|r| r.y_best).collect())
        })
        .collect::<std::result::Result<_, _>>()?;

    // Diagnostic companion: the same recursion started from the true mean
    // initial strength √(πN)/2 instead of the conventional RMS √N. The
    // conventional start overshoots the mean by ~13%, which dominates the
    // early-transient gap.
    let m = PerturbationDist::uniform(PI / 30.0).expect("valid").moments();
    let mut alt = vec![(PI * n as f64).sqrt() / 2.0];
    for _ in 1..horizon {
        let y = *alt.last().expect("nonempty");
        alt.push(model_step(y, n, &m)?);
    }

    let mut worst = (0usize, 0.0f64);
    let mut worst_alt = 0.0f64;
    let mut last_violation = None;
    for slot in 11..=horizon {
        let mean: f64 = traces.iter().map(|t| t[slot - 1]).sum::<f64>() / seeds.len() as f64;
        let rel = (mean - model[slot - 1]).abs() / model[slot - 1];
        if rel > worst.1 {
            worst = (slot, rel);
        }
        if rel > 0.05 {
            last_violation = Some(slot);
        }
        worst_alt = worst_alt.max((mean - alt[slot - 1]).abs() / alt[slot - 1]);
    }
    let passed = last_violation.is_none();
    Ok(CheckReport::new(
        "model-agreement",
        passed,
        format!(
            "worst rel gap {:.4} at slot {}; band 0.05; violations through slot {:?}; with mean-valued initialization the worst gap would be {:.4}",
            worst.1, worst.0, last_violation, worst_alt
        ),
    ))
}

/// Almost-sure convergence: N = 10, uniform δ₀ = π/20, every one of 100
/// seeds reaches 0.99·G_opt within 5000 slots.
pub fn check_convergence() -> Result<CheckReport> {
    let n = 10usize;
    let target = 0.99 * n as f64;
    let sched = uniform_sched(PI / 20.0);
    let failures: Vec<u64> = (0..100u64)
        .collect::<Vec<_>>()
        .par_iter()
        .filter_map(|&seed| {
            let trace = run_protocol(&RunSpec::new(n, sched.clone(), 5000, seed)).ok()?;
            let last = trace.last()?;
            let best = last.y_best.max(last.y);
            (best < target).then_some(seed)
        })
        .collect();
    Ok(CheckReport::new(
        "convergence",
        failures.is_empty(),
        format!("{}/100 seeds reached 0.99·G_opt; failures: {failures:?}", 100 - failures.len()),
    ))
}

/// Pairwise model dominance across ensemble sizes, uniform and two-point
/// schedules, horizon 5000, 1e-12 slack.
pub fn check_scaling_monotone() -> Result<CheckReport> {
    let sizes = [10usize, 50, 100, 500, 2000];
    let schedules = [
        ("uniform", uniform_sched(PI / 30.0)),
        (
            "two_point",
            DistSchedule::Fixed(PerturbationDist::two_point(PI / 30.0).expect("valid")),
        ),
    ];
    let mut checked = 0;
    for (label, sched) in &schedules {
        for i in 0..sizes.len() {
            for j in (i + 1)..sizes.len() {
                let res = check_scaling_monotonicity(sizes[i], sizes[j], sched, 5000)?;
                checked += 1;
                if !res.holds {
                    return Ok(CheckReport::new(
                        "scaling-monotonicity",
                        false,
                        format!(
                            "{label}: pair (N1={}, N2={}) violated at slot {:?}",
                            sizes[i], sizes[j], res.first_violation
                        ),
                    ));
                }
            }
        }
    }
    Ok(CheckReport::new(
        "scaling-monotonicity",
        true,
        format!("{checked} ordered pairs hold under both schedules"),
    ))
}

/// Near-linear convergence time: optimized sweep over six sizes, f = 0.75,
/// T_f nondecreasing and T/N spread < 20% across the top three sizes.
pub fn check_linear_scaling() -> Result<CheckReport> {
    let report = scaling_sweep(
        &[50, 100, 200, 400, 800, 1600],
        0.75,
        &SweepMode::Optimized(Family::Uniform),
        10_000,
    )?;
    if report.entries.iter().any(|e| e.t_fraction.is_none()) {
        return Ok(CheckReport::new(
            "linear-scaling",
            false,
            "some sizes never reached the fraction".into(),
        ));
    }
    let ratios: Vec<f64> = report
        .entries
        .iter()
        .rev()
        .take(3)
        .filter_map(|e| e.t_over_n)
        .collect();
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    let spread = (max - min) / min;
    let times: Vec<usize> = report.entries.iter().filter_map(|e| e.t_fraction).collect();
    let passed = report.monotone && spread < 0.20;
    Ok(CheckReport::new(
        "linear-scaling",
        passed,
        format!(
            "T = {times:?}, monotone = {}, top-3 T/N spread = {:.4} (< 0.20)",
            report.monotone, spread
        ),
    ))
}

/// Optimized model dominates every fixed-δ₀ trace at N = 200, strictly at
/// the slot where the best fixed trace reaches 0.75·N.
pub fn check_optimizer_dominance() -> Result<CheckReport> {
    let n = 200usize;
    let horizon = 3000usize;
    let (opt, _) = run_optimized_model(n, Family::Uniform, horizon)?;
    let deltas = [PI / 10.0, PI / 30.0, PI / 60.0, PI / 100.0];

    let mut best_crossing: Option<(usize, f64)> = None;
    for &d0 in &deltas {
        let fixed = run_model(n, &uniform_sched(d0), horizon)?;
        for slot in 0..horizon {
            if opt[slot] < fixed[slot] - 1e-9 {
                return Ok(CheckReport::new(
                    "optimizer-dominance",
                    false,
                    format!("fixed d0={d0:.5} beats optimized at slot {}", slot + 1),
                ));
            }
        }
        if let Some(cross) = fixed.iter().position(|&y| y >= 0.75 * n as f64) {
            let better = match best_crossing {
                Some((c, _)) => cross < c,
                None => true,
            };
            if better {
                best_crossing = Some((cross, fixed[cross]));
            }
        }
    }
    let (cross, fixed_y) = best_crossing
        .ok_or_else(|| config_err("no fixed trace reached 0.75·N within the horizon"))?;
    let strict = opt[cross] > fixed_y;
    Ok(CheckReport::new(
        "optimizer-dominance",
        strict,
        format!(
            "dominates 4 fixed traces; at best-fixed crossing (slot {}) optimized leads by {:.3}",
            cross + 1,
            opt[cross] - fixed_y
        ),
    ))
}

/// One-parameter near-optimality: the uniform-family optimal moment
/// trajectory stays within 0.01 of the three-point one and the three-point
/// per-slot strength exceeds uniform's by less than 0.1%.
pub fn check_one_parameter() -> Result<CheckReport> {
    let n = 2000usize;
    let horizon = 10_001usize;
    let (yu, su) = run_optimized_model(n, Family::Uniform, horizon)?;
    let (yt, st) = run_optimized_model(n, Family::ThreePoint, horizon)?;

    let mut worst_dist = (0usize, 0.0f64);
    for (i, (a, b)) in su.iter().zip(&st).enumerate() {
        let d = ((a.c_delta - b.c_delta).powi(2) + (a.c_2delta - b.c_2delta).powi(2)).sqrt();
        if d > worst_dist.1 {
            worst_dist = (i + 1, d);
        }
    }
    let mut worst_gap = (0usize, f64::MIN);
    let mut worst_under = (0usize, f64::MAX);
    for (i, (u, t)) in yu.iter().zip(&yt).enumerate() {
        let rel = (t - u) / u;
        if rel > worst_gap.1 {
            worst_gap = (i + 1, rel);
        }
        if rel < worst_under.1 {
            worst_under = (i + 1, rel);
        }
    }
    let distance_ok = worst_dist.1 <= 0.01;
    let gap_ok = worst_gap.1 < 0.001 && worst_under.1 >= -1e-12;
    Ok(CheckReport::new(
        "one-parameter",
        distance_ok && gap_ok,
        format!(
            "max moment-pair distance {:.4} at slot {} (band 0.01); three-point strength rel gap in [{:.2e}, {:.4}] (band [0, 0.001))",
            worst_dist.1, worst_dist.0, worst_under.1, worst_gap.1
        ),
    ))
}

/// Laplacian fit of the rotated phases at 0.8·G_opt: mean KS distance over
/// 20 seeds below 0.15.
pub fn check_laplacian_fit() -> Result<CheckReport> {
    let sched = uniform_sched(PI / 20.0);
    let kss: Vec<f64> = (0..20u64)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&seed| {
            let spec = RunSpec::new(100, sched.clone(), 20_000, seed);
            phase_histogram(&spec, HistogramAt::Fraction(0.8), 41).map(|h| h.ks_distance)
        })
        .collect::<Result<_>>()?;
    let mean = kss.iter().sum::<f64>() / kss.len() as f64;
    let max = kss.iter().cloned().fold(0.0f64, f64::max);
    Ok(CheckReport::new(
        "laplacian-fit",
        mean < 0.15,
        format!("mean KS {:.4} over 20 seeds (max {:.4}); gate 0.15", mean, max),
    ))
}

/// Tracking under per-sensor Doppler: after convergence, the adaptive run's
/// trailing-1000-slot mean strength beats a frozen-phase control by 2x.
pub fn check_tracking() -> Result<CheckReport> {
    let n = 100usize;
    let horizon = 4000usize;
    let drift_from = 1501usize;
    let g = n as f64;
    let mut spec = RunSpec::new(n, uniform_sched(PI / 10.0), horizon, 0);
    spec.window = Window::Sliding(3);
    spec.doppler_magnitude = PI / 200.0;
    spec.doppler_from_slot = drift_from;

    let mut run = ProtocolRun::new(&spec)?;
    let mut adaptive = Vec::with_capacity(horizon);
    let mut control: Option<distbeam_core::phasor::SensorEnsemble> = None;
    let mut control_ys = Vec::new();
    let mut freeze_slot = None;
    while let Some(rec) = run.step_slot() {
        if let Some(ens) = control.as_mut() {
            // Mirror the run's channel evolution exactly.
            if rec.timeslot >= drift_from {
                ens.advance_channel_phases();
            }
            control_ys.push(ens.measure_unperturbed());
        }
        if control.is_none() && rec.y >= 0.75 * g {
            freeze_slot = Some(rec.timeslot);
            control = Some(run.state().ensemble().clone());
        }
        adaptive.push(rec.y);
    }
    let freeze = match freeze_slot {
        Some(s) => s,
        None => {
            return Ok(CheckReport::new(
                "tracking",
                false,
                "run never reached 0.75·G_opt".into(),
            ))
        }
    };
    let tail = 1000usize;
    let mean_adaptive = adaptive[horizon - tail..].iter().sum::<f64>() / tail as f64 / g;
    let ctrl_tail = &control_ys[control_ys.len() - tail..];
    let mean_control = ctrl_tail.iter().sum::<f64>() / tail as f64 / g;
    let ratio = mean_adaptive / mean_control;
    Ok(CheckReport::new(
        "tracking",
        ratio >= 2.0,
        format!(
            "froze control at slot {freeze}; trailing means adaptive {:.3} vs control {:.3}, ratio {:.2} (gate 2.0)",
            mean_adaptive, mean_control, ratio
        ),
    ))
}

/// Property suite with no dependence on reported figures: rotation
/// invariance, step-form identity, moment feasibility, tail probabilities
/// vs quadrature, the update-map slope band, the tail-series sandwich and
/// feedback monotonicity.
pub fn check_properties() -> Result<CheckReport> {
    let mut failures: Vec<String> = Vec::new();

    // Rotation invariance of the received magnitude, 1e-12 relative.
    let mut rng = seeding::stream(99, 0);
    for _ in 0..200 {
        let n = rng.gen_range(1..50);
        let gains: Vec<f64> = (0..n).map(|_| 0.1 + rng.gen::<f64>() * 2.0).collect();
        let phases: Vec<f64> = (0..n).map(|_| TAU * rng.gen::<f64>()).collect();
        let c = TAU * rng.gen::<f64>() - PI;
        let shifted: Vec<f64> = phases.iter().map(|p| p + c).collect();
        let m0 = mag(&gains, &phases)?;
        let m1 = mag(&gains, &shifted)?;
        if (m0 - m1).abs() > 1e-12 * m0.max(1e-12) {
            failures.push(format!("rotation invariance: {m0} vs {m1}"));
            break;
        }
    }

    // The two algebraic forms of the expected update agree to 1e-12.
    'identity: for n in [10usize, 100, 2000] {
        for k in 1..=19 {
            let y = n as f64 * k as f64 / 20.0;
            for d in [
                PerturbationDist::uniform(PI / 100.0)?,
                PerturbationDist::uniform(PI / 6.0)?,
                PerturbationDist::two_point(PI / 30.0)?,
                PerturbationDist::three_point(PI / 10.0, 0.3)?,
            ] {
                let m = d.moments();
                let a = model_step(y, n, &m)?;
                let b = model_step_prob_form(y, n, &m)?;
                if (a - b).abs() > 1e-12 * a {
                    failures.push(format!("step identity at N={n} y={y}: {a} vs {b}"));
                    break 'identity;
                }
            }
        }
    }

    // Moment feasibility across the small-perturbation grid.
    for k in 1..=64 {
        let d0 = PI / 2.0 * k as f64 / 64.0;
        let all_ok = PerturbationDist::two_point(d0)?.moments().is_feasible()
            && PerturbationDist::uniform(d0)?.moments().is_feasible()
            && [0.05, 0.2, 0.5].iter().all(|&p| {
                PerturbationDist::three_point(d0, p)
                    .map(|d| d.moments().is_feasible())
                    .unwrap_or(false)
            });
        if !all_ok {
            failures.push(format!("moment feasibility at d0={d0}"));
            break;
        }
    }

    // Gaussian tail vs adaptive quadrature, 1e-9 absolute.
    let mut x = -8.0;
    while x <= 8.0 {
        let oracle = integrate(distbeam_core::model::normal_pdf, x, x.max(0.0) + 40.0, 1e-13);
        if (q_function(x) - oracle).abs() > 1e-9 {
            failures.push(format!("tail probability at x={x}"));
            break;
        }
        x += 0.5;
    }

    // Update-map slope in (C_δ, 1], finite differences at 1e-6 with σ held.
    'slope: for &d0 in &[PI / 100.0, PI / 30.0, PI / 10.0] {
        let m = PerturbationDist::uniform(d0)?.moments();
        let n = 100usize;
        for k in 1..=9 {
            let y = n as f64 * k as f64 / 10.0;
            let sigma = variances(y, n, &m)?.0.sqrt();
            let h = 1e-5 * n as f64;
            let fd = (model_step_with_sigma(y + h, n, m.c_delta, sigma)
                - model_step_with_sigma(y - h, n, m.c_delta, sigma))
                / (2.0 * h);
            if !(fd > m.c_delta && fd <= 1.0 + 1e-6) {
                failures.push(format!("slope band at d0={d0} y={y}: fd={fd}"));
                break 'slope;
            }
        }
    }

    // Tail-series sandwich on [1, 8] and the gain bound it implies.
    let mut x = 1.0;
    while x <= 8.0 {
        let q = q_function(x);
        let g = distbeam_core::model::g_func(x);
        let gain_lb =
            distbeam_core::model::normal_pdf(x) * (1.0 / (x * x) - 3.0 / (x * x * x * x));
        if !(q < q_tail_series_upper(x) && q > q_tail_series_lower(x) && g > gain_lb) {
            failures.push(format!("tail series bounds at x={x}"));
            break;
        }
        x += 0.01;
    }

    // Feedback reference never decreases under static channels.
    let trace = run_protocol(&RunSpec::new(30, uniform_sched(PI / 20.0), 1500, 11))?;
    if trace.windows(2).any(|w| w[1].y_best < w[0].y_best) {
        failures.push("y_best decreased under static channels".into());
    }

    let passed = failures.is_empty();
    Ok(CheckReport::new(
        "properties",
        passed,
        if passed {
            "7 property suites hold".into()
        } else {
            failures.join("; ")
        },
    ))
}

pub const CHECK_NAMES: &[&str] = &[
    "model-agreement",
    "convergence",
    "scaling-monotonicity",
    "linear-scaling",
    "optimizer-dominance",
    "one-parameter",
    "laplacian-fit",
    "properties",
    "tracking",
];

fn run_one(name: &str) -> Result<CheckReport> {
    match name {
        "model-agreement" | "fig6" => check_model_agreement(),
        "convergence" | "fig2" => check_convergence(),
        "scaling-monotonicity" => check_scaling_monotone(),
        "linear-scaling" | "fig9" | "fig9a" | "fig9b" => check_linear_scaling(),
        "optimizer-dominance" | "fig8" => check_optimizer_dominance(),
        "one-parameter" | "fig7" => check_one_parameter(),
        "laplacian-fit" | "fig5" => check_laplacian_fit(),
        "properties" => check_properties(),
        "tracking" | "fig10" => check_tracking(),
        other => Err(config_err(format!(
            "unknown check `{other}`; available: all, {}",
            CHECK_NAMES.join(", ")
        ))),
    }
}

/// Runs one named check, or every check for `"all"`.
pub fn run_checks(name: &str) -> Result<Vec<CheckReport>> {
    if name == "all" {
        CHECK_NAMES.iter().map(|n| run_one(n)).collect()
    } else {
        Ok(vec![run_one(name)?])
    }
}
