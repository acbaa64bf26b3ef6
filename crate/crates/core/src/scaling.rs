//! Convergence time versus the number of sensors.
//!
//! `T_f(N)` is the first timeslot at which the deterministic model trace
//! reaches the fraction f of the coherent bound. Adding sensors always
//! raises the absolute strength and lowers the achieved fraction at any
//! slot, so `T_f` grows with N; under per-slot optimized perturbations the
//! per-slot gain at fraction f has a positive N-free lower bound, which
//! caps the growth of `T_f(N)` at linear.

use crate::error::{domain, invalid, Result};
use crate::model::{normal_pdf, run_model};
use crate::optimizer::run_optimized_model;
use crate::perturbation::{DistSchedule, Family};

/// Location of the maximum of the tail-bound gain expression.
const GAIN_BOUND_PEAK_X: f64 = 3.6;

/// Relative slack for the exact model inequalities (pure rounding headroom).
const INEQ_SLACK: f64 = 1e-12;

/// First (1-based) timeslot at which `ys` reaches `f·N`; `None` when the
/// horizon is exhausted first.
pub fn time_to_fraction(ys: &[f64], n_sensors: usize, f: f64) -> Result<Option<usize>> {
    if n_sensors == 0 {
        return Err(invalid("n_sensors must be at least 1"));
    }
    if !(0.0..1.0).contains(&f) || f <= 0.0 {
        return Err(domain(format!("fraction must lie in (0, 1), got {f}")));
    }
    if ys.is_empty() {
        return Err(invalid("empty trace"));
    }
    let target = f * n_sensors as f64;
    Ok(ys.iter().position(|&y| y >= target).map(|i| i + 1))
}

/// Outcome of the pairwise model-dominance check.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityCheck {
    pub holds: bool,
    /// First slot (1-based) violating either inequality.
    pub first_violation: Option<usize>,
}

/// Verifies, slot by slot, that the larger ensemble dominates in absolute
/// strength while the smaller one dominates in achieved fraction:
/// `y₂[n] ≥ y₁[n]` and `y₁[n]/N₁ ≥ y₂[n]/N₂` for every `n ≤ horizon`,
/// with both ensembles driven by the same distribution schedule.
pub fn check_scaling_monotonicity(
    n1: usize,
    n2: usize,
    schedule: &DistSchedule,
    horizon: usize,
) -> Result<MonotonicityCheck> {
    if n1 == 0 || n2 < n1 {
        return Err(invalid("need n2 >= n1 >= 1"));
    }
    let y1 = run_model(n1, schedule, horizon)?;
    let y2 = run_model(n2, schedule, horizon)?;
    for (i, (a, b)) in y1.iter().zip(&y2).enumerate() {
        let absolute = *b >= *a * (1.0 - INEQ_SLACK);
        let fraction = a / n1 as f64 >= b / n2 as f64 * (1.0 - INEQ_SLACK);
        if !absolute || !fraction {
            return Ok(MonotonicityCheck {
                holds: false,
                first_violation: Some(i + 1),
            });
        }
    }
    Ok(MonotonicityCheck {
        holds: true,
        first_violation: None,
    })
}

/// Three-term asymptotic series for the Gaussian tail, an upper bound:
/// `Q(x) < φ(x)·(1/x − 1/x³ + 3/x⁵)` for x > 0.
///
/// Substituted into the per-slot gain `g(x) = φ(x) − x·Q(x)` this yields
/// the lower bound `g(x) > φ(x)·(1/x² − 3/x⁴)` behind
/// [`optimized_gain_lower_bound`].
pub fn q_tail_series_upper(x: f64) -> f64 {
    assert!(x > 0.0, "tail series requires x > 0, got {x}");
    let x2 = x * x;
    normal_pdf(x) * (1.0 / x - 1.0 / (x * x2) + 3.0 / (x * x2 * x2))
}

/// Two-term series counterpart, a lower bound:
/// `Q(x) > φ(x)·(1/x − 1/x³)` for x > 0.
pub fn q_tail_series_lower(x: f64) -> f64 {
    assert!(x > 0.0, "tail series requires x > 0, got {x}");
    normal_pdf(x) * (1.0 / x - 1.0 / (x * x * x))
}

/// N-free lower bound on the optimized per-slot gain at fraction f:
///
/// ```text
/// K(f) = (2/f)·((1−f)/(4−3f))·φ(x₀)·(1/x₀ − 3/x₀³),  x₀ = 3.6
/// ```
pub fn optimized_gain_lower_bound(f: f64) -> Result<f64> {
    if !f.is_finite() || f <= 0.0 || f >= 1.0 {
        return Err(domain(format!("fraction must lie in (0, 1), got {f}")));
    }
    let x0 = GAIN_BOUND_PEAK_X;
    Ok((2.0 / f) * ((1.0 - f) / (4.0 - 3.0 * f)) * normal_pdf(x0) * (1.0 / x0 - 3.0 / (x0 * x0 * x0)))
}

/// Distribution mode for a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepMode {
    Fixed(DistSchedule),
    Optimized(Family),
}

impl SweepMode {
    pub fn label(&self) -> &'static str {
        match self {
            SweepMode::Fixed(_) => "fixed",
            SweepMode::Optimized(_) => "optimized",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub n_sensors: usize,
    /// `None` when the horizon was exhausted before reaching the fraction.
    pub t_fraction: Option<usize>,
    pub t_over_n: Option<f64>,
}

/// Convergence times across ensemble sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub f: f64,
    pub mode_label: String,
    pub entries: Vec<SweepEntry>,
    /// `T_f` nondecreasing over the reached entries.
    pub monotone: bool,
}

impl ScalingReport {
    /// Largest `T_f(N)/N` over the reached entries.
    pub fn max_t_over_n(&self) -> Option<f64> {
        self.entries
            .iter()
            .filter_map(|e| e.t_over_n)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }
}

/// Runs the model (fixed or per-slot optimized) for every N in `n_list`
/// and reports `T_f` per N.
pub fn scaling_sweep(
    n_list: &[usize],
    f: f64,
    mode: &SweepMode,
    horizon: usize,
) -> Result<ScalingReport> {
    if n_list.is_empty() {
        return Err(invalid("n_list must be nonempty"));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("n_list must be strictly ascending"));
    }
    let mut entries = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let ys = match mode {
            SweepMode::Fixed(schedule) => run_model(n, schedule, horizon)?,
            SweepMode::Optimized(family) => run_optimized_model(n, *family, horizon)?.0,
        };
        let t = time_to_fraction(&ys, n, f)?;
        entries.push(SweepEntry {
            n_sensors: n,
            t_fraction: t,
            t_over_n: t.map(|t| t as f64 / n as f64),
        });
    }
    let reached: Vec<usize> = entries.iter().filter_map(|e| e.t_fraction).collect();
    let monotone = reached.windows(2).all(|w| w[1] >= w[0]);
    Ok(ScalingReport {
        f,
        mode_label: mode.label().to_string(),
        entries,
        monotone,
    })
}
