//! Rotated-phase snapshots: histogram of the φ_i mid-run with the fitted
//! Laplacian overlay and the goodness-of-fit distance.

use std::f64::consts::PI;

use distbeam_core::model::{laplacian_folded_cdf, phi0_from_y};
use distbeam_core::phasor::rotate_to_zero_phase;
use distbeam_core::protocol::{ProtocolRun, RunSpec};
use distbeam_core::stats::ks_statistic;

use crate::config::HistogramAt;
use crate::error::{config_err, Result};

#[derive(Debug, Clone)]
pub struct PhaseHistogram {
    /// Timeslot after which the snapshot was taken.
    pub slot: usize,
    /// Feedback reference at the snapshot (strength of the kept phases).
    pub y_best: f64,
    /// Fitted Laplacian scale `φ₀ = √(N/y_best − 1)`.
    pub phi0: f64,
    /// `bins + 1` edges covering `[-π, π]`.
    pub edges: Vec<f64>,
    /// Empirical probability mass per bin (sums to 1).
    pub mass: Vec<f64>,
    /// Laplacian probability mass per bin for the overlay.
    pub laplacian_mass: Vec<f64>,
    /// Kolmogorov–Smirnov distance between the folded |φ| sample and the
    /// folded Laplacian CDF.
    pub ks_distance: f64,
}

fn laplacian_signed_cdf(x: f64, phi0: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / phi0).exp()
    } else {
        1.0 - 0.5 * (-x / phi0).exp()
    }
}

/// Runs the protocol to the requested point and snapshots the rotated
/// phases.
pub fn phase_histogram(spec: &RunSpec, at: HistogramAt, bins: usize) -> Result<PhaseHistogram> {
    let mut run = ProtocolRun::new(spec)?;
    let g_opt = run.state().g_opt();
    match at {
        HistogramAt::Fraction(f) => {
            while run.state().best_reference() < f * g_opt {
                if run.step_slot().is_none() {
                    return Err(config_err(format!(
                        "fraction {f} not reached within horizon {}",
                        spec.horizon
                    )));
                }
            }
        }
        HistogramAt::Slot(slot) => {
            if slot > spec.horizon {
                return Err(config_err(format!(
                    "snapshot slot {slot} beyond horizon {}",
                    spec.horizon
                )));
            }
            while run.state().timeslot() <= slot {
                run.step_slot();
            }
        }
    }

    let state = run.state();
    let snapshot_slot = state.timeslot() - 1;
    let y_best = state.best_reference();
    let n = state.n_sensors();
    let phi0 = phi0_from_y(y_best.min(n as f64), n)?;
    let rotated = rotate_to_zero_phase(state.ensemble().gains(), &state.ensemble().received_phases())?;

    let width = 2.0 * PI / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| -PI + width * k as f64).collect();
    let mut mass = vec![0.0; bins];
    for &phi in &rotated.phases {
        let idx = (((phi + PI) / width) as usize).min(bins - 1);
        mass[idx] += 1.0 / n as f64;
    }
    let laplacian_mass: Vec<f64> = (0..bins)
        .map(|k| laplacian_signed_cdf(edges[k + 1], phi0) - laplacian_signed_cdf(edges[k], phi0))
        .collect();

    let folded: Vec<f64> = rotated.phases.iter().map(|p| p.abs()).collect();
    let ks_distance = ks_statistic(&folded, |t| laplacian_folded_cdf(t, phi0).unwrap_or(1.0));

    Ok(PhaseHistogram {
        slot: snapshot_slot,
        y_best,
        phi0,
        edges,
        mass,
        laplacian_mass,
        ks_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use distbeam_core::perturbation::{DistSchedule, PerturbationDist};

    fn spec() -> RunSpec {
        RunSpec::new(
            100,
            DistSchedule::Fixed(PerturbationDist::uniform(PI / 20.0).unwrap()),
            20_000,
            1,
        )
    }

    #[test]
    fn mass_sums_to_one() {
        let h = phase_histogram(&spec(), HistogramAt::Fraction(0.8), 41).unwrap();
        let total: f64 = h.mass.iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "total = {total}");
        let overlay: f64 = h.laplacian_mass.iter().sum();
        assert!(overlay > 0.9, "overlay mass = {overlay}"); // tails beyond ±π excluded
        assert_eq!(h.edges.len(), 42);
    }

    #[test]
    fn coherent_snapshot_concentrates_at_zero() {
        // A small ensemble driven essentially to coherence: the whole mass
        // sits in the central bins and the fitted scale collapses.
        let spec = RunSpec::new(
            5,
            DistSchedule::Fixed(PerturbationDist::uniform(PI / 20.0).unwrap()),
            200_000,
            1,
        );
        let h = phase_histogram(&spec, HistogramAt::Fraction(0.999), 41).unwrap();
        assert!(h.phi0 < 0.05, "phi0 = {}", h.phi0);
        let center: f64 = h.mass[19..=21].iter().sum();
        assert!((center - 1.0).abs() < 1e-12, "center mass = {center}");
    }

    #[test]
    fn snapshot_at_fixed_slot() {
        let h = phase_histogram(&spec(), HistogramAt::Slot(100), 21).unwrap();
        assert_eq!(h.slot, 100);
        assert!(phase_histogram(&spec(), HistogramAt::Slot(30_000), 21).is_err());
    }

    #[test]
    fn unreachable_fraction_is_an_error() {
        let mut s = spec();
        s.horizon = 5;
        assert!(phase_histogram(&s, HistogramAt::Fraction(0.999), 11).is_err());
    }
}
