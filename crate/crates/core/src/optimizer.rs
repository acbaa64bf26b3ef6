//! Greedy per-timeslot optimization of the perturbation distribution.
//!
//! Given the model state `y`, picks the family parameters that maximize the
//! predicted next strength: a coarse log-spaced grid over δ₀ (and a grid
//! over the weight p for the three-point family) followed by golden-section
//! refinement. The search for the three-point family is additionally seeded
//! with the moment-matched image of the uniform optimum, since any uniform
//! moment pair is reachable inside the three-point family.

use std::f64::consts::FRAC_PI_2;

use crate::error::{domain, invalid, Result};
use crate::model::model_step;
use crate::perturbation::{Family, Moments, PerturbationDist};

/// Smallest δ₀ the search considers.
pub const DELTA0_MIN: f64 = 1e-4;
/// Largest δ₀ the search considers (small-perturbation regime).
pub const DELTA0_MAX: f64 = FRAC_PI_2;

const DELTA0_GRID: usize = 64;
const P_GRID: usize = 16;
/// Smallest weight the three-point grid probes; the optimal weight shrinks
/// with the coherence deficit, so the grid is log-spaced down to here.
const P_MIN: f64 = 1e-4;
/// Golden-section refinement width, in radians (and in p units).
const REFINE_TOL: f64 = 1e-6;

/// Result of one per-slot optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedStep {
    pub dist: PerturbationDist,
    pub moments: Moments,
    /// Predicted strength after one slot with `dist`.
    pub y_next: f64,
}

/// One row of the emitted parameter schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry {
    pub timeslot: usize,
    pub family: Family,
    pub delta0: f64,
    pub weight_p: Option<f64>,
    pub c_delta: f64,
    pub c_2delta: f64,
    pub y_predicted: f64,
}

fn log_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    let ln_min = min.ln();
    let ln_max = max.ln();
    let mut grid: Vec<f64> = (0..points)
        .map(|k| (ln_min + (ln_max - ln_min) * k as f64 / (points - 1) as f64).exp())
        .collect();
    grid[0] = min;
    grid[points - 1] = max;
    grid
}

fn delta0_grid() -> Vec<f64> {
    log_grid(DELTA0_MIN, DELTA0_MAX, DELTA0_GRID)
}

/// Golden-section maximization on `[a, b]`. Assumes a (near-)unimodal
/// objective; returns the better of the two final probes.
fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

struct Incumbent {
    dist: PerturbationDist,
    value: f64,
}

impl Incumbent {
    /// Keeps strictly better candidates only, so exact ties resolve to the
    /// earliest (smallest-δ₀) candidate.
    fn offer(&mut self, dist: PerturbationDist, value: f64) {
        if value > self.value {
            self.dist = dist;
            self.value = value;
        }
    }
}

fn check_inputs(y: f64, n_sensors: usize) -> Result<()> {
    if n_sensors == 0 {
        return Err(invalid("n_sensors must be at least 1"));
    }
    let n = n_sensors as f64;
    if !y.is_finite() || y <= 0.0 || y > n {
        return Err(domain(format!("y must lie in (0, N]; y = {y}, N = {n}")));
    }
    Ok(())
}

fn optimize_one_param(
    y: f64,
    n_sensors: usize,
    family: Family,
) -> Result<OptimizedStep> {
    let objective = |d0: f64| -> f64 {
        let dist = PerturbationDist::new(family, d0, None).expect("grid delta0 is valid");
        model_step(y, n_sensors, &dist.moments()).expect("validated inputs")
    };
    let grid = delta0_grid();
    let mut best_idx = 0;
    let mut inc = Incumbent {
        dist: PerturbationDist::new(family, grid[0], None)?,
        value: objective(grid[0]),
    };
    for (i, &d0) in grid.iter().enumerate().skip(1) {
        let v = objective(d0);
        if v > inc.value {
            best_idx = i;
            inc.offer(PerturbationDist::new(family, d0, None)?, v);
        }
    }
    let lo = grid[best_idx.saturating_sub(1)];
    let hi = grid[(best_idx + 1).min(grid.len() - 1)];
    let (d0_ref, v_ref) = golden_max(&objective, lo, hi, REFINE_TOL);
    inc.offer(PerturbationDist::new(family, d0_ref, None)?, v_ref);

    let moments = inc.dist.moments();
    Ok(OptimizedStep {
        dist: inc.dist,
        moments,
        y_next: inc.value,
    })
}

/// Maps a moment pair onto three-point parameters `(δ₀, p)` achieving it.
///
/// Solves `1 − 2p(1 − cos δ₀) = C_δ`, `1 − 2p(1 − cos 2δ₀) = C_2δ`; the
/// ratio of the two deficits fixes δ₀ through `4cos²(δ₀/2)`.
fn three_point_matching(moments: &Moments) -> Option<(f64, f64)> {
    let dc = 1.0 - moments.c_delta;
    let dc2 = 1.0 - moments.c_2delta;
    if dc <= 0.0 || dc2 <= 0.0 {
        return None;
    }
    let ratio = dc2 / dc;
    if !(0.0..4.0).contains(&ratio) {
        return None;
    }
    let d0 = 2.0 * (0.25 * ratio).sqrt().acos();
    if !(DELTA0_MIN..=DELTA0_MAX).contains(&d0) {
        return None;
    }
    let p = dc / (2.0 * (1.0 - d0.cos()));
    if !(0.0..=0.5).contains(&p) || p == 0.0 {
        return None;
    }
    Some((d0, p))
}

fn optimize_three_point(y: f64, n_sensors: usize) -> Result<OptimizedStep> {
    let objective = |d0: f64, p: f64| -> f64 {
        let dist = PerturbationDist::three_point(d0, p).expect("grid point is valid");
        model_step(y, n_sensors, &dist.moments()).expect("validated inputs")
    };
    let d0_grid = delta0_grid();
    let p_grid = log_grid(P_MIN, 0.5, P_GRID);

    let mut best = (0usize, 0usize);
    let mut inc = Incumbent {
        dist: PerturbationDist::three_point(d0_grid[0], p_grid[0])?,
        value: objective(d0_grid[0], p_grid[0]),
    };
    for (i, &d0) in d0_grid.iter().enumerate() {
        for (j, &p) in p_grid.iter().enumerate() {
            if i == 0 && j == 0 {
                continue;
            }
            let v = objective(d0, p);
            if v > inc.value {
                best = (i, j);
                inc.offer(PerturbationDist::three_point(d0, p)?, v);
            }
        }
    }

    // Coordinate refinement around the best grid cell.
    let (bi, bj) = best;
    let d0_lo = d0_grid[bi.saturating_sub(1)];
    let d0_hi = d0_grid[(bi + 1).min(d0_grid.len() - 1)];
    let p_lo = p_grid[bj.saturating_sub(1)];
    let p_hi = p_grid[(bj + 1).min(p_grid.len() - 1)];
    let mut d0_star = inc.dist.delta0();
    let mut p_star = inc.dist.weight_p().expect("three_point has p");
    for _ in 0..3 {
        let (d0_new, v) = golden_max(&|d0| objective(d0, p_star), d0_lo, d0_hi, REFINE_TOL);
        if v > inc.value {
            d0_star = d0_new;
            inc.offer(PerturbationDist::three_point(d0_star, p_star)?, v);
        }
        let (p_new, v) = golden_max(&|p| objective(d0_star, p), p_lo, p_hi, REFINE_TOL);
        if v > inc.value {
            p_star = p_new;
            inc.offer(PerturbationDist::three_point(d0_star, p_star)?, v);
        }
    }

    // Seed with the moment-matched image of the uniform optimum: the
    // three-point family contains every uniform moment pair, so its optimum
    // must not fall below the uniform one.
    let uniform_opt = optimize_one_param(y, n_sensors, Family::Uniform)?;
    if let Some((d0, p)) = three_point_matching(&uniform_opt.moments) {
        let v = objective(d0, p);
        inc.offer(PerturbationDist::three_point(d0, p)?, v);
    }

    let moments = inc.dist.moments();
    Ok(OptimizedStep {
        dist: inc.dist,
        moments,
        y_next: inc.value,
    })
}

/// Parameters of `family` maximizing the predicted one-step gain at state
/// `y`, together with the predicted next strength.
pub fn optimize_step_params(y: f64, n_sensors: usize, family: Family) -> Result<OptimizedStep> {
    check_inputs(y, n_sensors)?;
    match family {
        Family::Uniform | Family::TwoPoint => optimize_one_param(y, n_sensors, family),
        Family::ThreePoint => optimize_three_point(y, n_sensors),
    }
}

/// Greedy per-slot optimization from `y[1] = √N`.
///
/// Returns the strength trajectory `y[1..=horizon]` and the per-slot
/// parameter schedule (one entry per executed step).
pub fn run_optimized_model(
    n_sensors: usize,
    family: Family,
    horizon: usize,
) -> Result<(Vec<f64>, Vec<ScheduleEntry>)> {
    if n_sensors == 0 {
        return Err(invalid("n_sensors must be at least 1"));
    }
    if horizon == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    let mut ys = Vec::with_capacity(horizon);
    let mut schedule = Vec::with_capacity(horizon.saturating_sub(1));
    ys.push((n_sensors as f64).sqrt());
    for slot in 1..horizon {
        let y = *ys.last().expect("nonempty");
        let step = optimize_step_params(y, n_sensors, family)?;
        schedule.push(ScheduleEntry {
            timeslot: slot,
            family,
            delta0: step.dist.delta0(),
            weight_p: step.dist.weight_p(),
            c_delta: step.moments.c_delta,
            c_2delta: step.moments.c_2delta,
            y_predicted: step.y_next,
        });
        ys.push(step.y_next);
    }
    Ok((ys, schedule))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::run_model;
    use crate::perturbation::DistSchedule;
    use std::f64::consts::PI;

    #[test]
    fn narrower_distributions_near_coherence() {
        let n = 200usize;
        let wide = optimize_step_params(0.10 * n as f64, n, Family::Uniform).unwrap();
        let narrow = optimize_step_params(0.99 * n as f64, n, Family::Uniform).unwrap();
        assert!(
            narrow.dist.delta0() < wide.dist.delta0(),
            "narrow = {}, wide = {}",
            narrow.dist.delta0(),
            wide.dist.delta0()
        );
    }

    #[test]
    fn three_point_dominates_uniform() {
        for (y_frac, n) in [(0.1, 100usize), (0.5, 100), (0.8, 400), (0.3, 2000)] {
            let y = y_frac * n as f64;
            let u = optimize_step_params(y, n, Family::Uniform).unwrap();
            let t = optimize_step_params(y, n, Family::ThreePoint).unwrap();
            assert!(
                t.y_next >= u.y_next * (1.0 - 1e-12),
                "n={n} y={y}: three_point {} vs uniform {}",
                t.y_next,
                u.y_next
            );
        }
    }

    #[test]
    fn degenerate_coherent_state_returns_grid_minimum() {
        let n = 50usize;
        let opt = optimize_step_params(n as f64, n, Family::Uniform).unwrap();
        assert_eq!(opt.dist.delta0(), DELTA0_MIN);
        assert_eq!(opt.y_next, n as f64);
    }

    #[test]
    fn greedy_dominance_on_finer_grid() {
        let n = 150usize;
        let y = 0.3 * n as f64;
        for family in [Family::Uniform, Family::TwoPoint] {
            let opt = optimize_step_params(y, n, family).unwrap();
            let ln_min = DELTA0_MIN.ln();
            let ln_max = DELTA0_MAX.ln();
            for k in 0..1024 {
                let d0 = (ln_min + (ln_max - ln_min) * k as f64 / 1023.0).exp();
                let dist = PerturbationDist::new(family, d0, None).unwrap();
                let v = model_step(y, n, &dist.moments()).unwrap();
                assert!(
                    v <= opt.y_next * (1.0 + 1e-9),
                    "{family} d0={d0}: {v} beats {}",
                    opt.y_next
                );
            }
        }
    }

    #[test]
    fn three_point_dominance_on_finer_grid() {
        let n = 150usize;
        let y = 0.3 * n as f64;
        let opt = optimize_step_params(y, n, Family::ThreePoint).unwrap();
        for d0 in log_grid(DELTA0_MIN, DELTA0_MAX, 128) {
            for p in log_grid(1e-5, 0.5, 48) {
                let dist = PerturbationDist::three_point(d0, p).unwrap();
                let v = model_step(y, n, &dist.moments()).unwrap();
                assert!(
                    v <= opt.y_next * (1.0 + 1e-9),
                    "d0={d0} p={p}: {v} beats {}",
                    opt.y_next
                );
            }
        }
    }

    #[test]
    fn optimized_run_invariants() {
        let (ys, schedule) = run_optimized_model(100, Family::Uniform, 300).unwrap();
        assert_eq!(ys.len(), 300);
        assert_eq!(schedule.len(), 299);
        assert_eq!(ys[0], 10.0);
        for w in ys.windows(2) {
            assert!(w[1] >= w[0]);
        }
        for w in schedule.windows(2) {
            assert!(w[1].y_predicted >= w[0].y_predicted);
        }
        for e in &schedule {
            let m = Moments {
                c_delta: e.c_delta,
                c_2delta: e.c_2delta,
            };
            assert!(m.is_feasible(), "slot {}: infeasible moments", e.timeslot);
        }
    }

    #[test]
    fn optimal_delta0_shrinks_over_time() {
        let (_, schedule) = run_optimized_model(100, Family::Uniform, 400).unwrap();
        // Search resolution allows tiny local jitter; the trend must be down.
        for w in schedule.windows(2) {
            assert!(
                w[1].delta0 <= w[0].delta0 + 1e-5,
                "slot {}: {} -> {}",
                w[0].timeslot,
                w[0].delta0,
                w[1].delta0
            );
        }
        assert!(schedule.last().unwrap().delta0 < schedule[0].delta0);
    }

    #[test]
    fn optimized_trace_dominates_fixed_traces() {
        let n = 100usize;
        let horizon = 500usize;
        let (opt, _) = run_optimized_model(n, Family::Uniform, horizon).unwrap();
        for &d0 in &[PI / 10.0, PI / 30.0] {
            let sched = DistSchedule::Fixed(PerturbationDist::uniform(d0).unwrap());
            let fixed = run_model(n, &sched, horizon).unwrap();
            for (slot, (o, f)) in opt.iter().zip(&fixed).enumerate() {
                assert!(o >= f || (f - o) < 1e-9, "slot {slot}: opt {o} < fixed {f}");
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(optimize_step_params(0.0, 10, Family::Uniform).is_err());
        assert!(optimize_step_params(11.0, 10, Family::Uniform).is_err());
        assert!(optimize_step_params(5.0, 0, Family::Uniform).is_err());
        assert!(run_optimized_model(10, Family::Uniform, 0).is_err());
    }
}
