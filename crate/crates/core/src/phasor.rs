//! Complex-phasor arithmetic for the received signal.
//!
//! The received signal strength for gains `a_i` and received phases `Φ_i` is
//! the magnitude of the phasor sum `|Σ a_i e^{jΦ_i}|`. It is bounded by
//! `Σ a_i`, with equality exactly at phase coherence, and is invariant under
//! a common rotation of all phases — which is why the rotated frame where
//! the total phasor has zero phase is a convenient canonical state.

use std::f64::consts::{PI, TAU};

use crate::error::{invalid, Result};

/// Wraps a phase to the canonical interval `[0, 2π)`.
pub fn wrap_to_tau(phase: f64) -> f64 {
    let r = phase.rem_euclid(TAU);
    if r == TAU {
        0.0
    } else {
        r
    }
}

/// Wraps a phase to `(-π, π]`, the convention for rotated phases.
pub fn wrap_to_pi(phase: f64) -> f64 {
    let r = wrap_to_tau(phase);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

fn check_pair(gains: &[f64], phases: &[f64]) -> Result<()> {
    if gains.is_empty() {
        return Err(invalid("gains and phases must be nonempty"));
    }
    if gains.len() != phases.len() {
        return Err(invalid(format!(
            "length mismatch: {} gains vs {} phases",
            gains.len(),
            phases.len()
        )));
    }
    if gains.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(invalid("gains must be finite and nonnegative"));
    }
    if phases.iter().any(|p| !p.is_finite()) {
        return Err(invalid("phases must be finite"));
    }
    Ok(())
}

/// Phasor sum over `(gain, phase)` pairs, clamped to the coherent bound.
///
/// Returns `(magnitude, re, im, gain_sum)`. The magnitude is clamped to
/// `Σ a_i`: the bound holds exactly in exact arithmetic and rounding must
/// not be allowed to break it, since the protocol's accept rule is a strict
/// comparison.
pub(crate) fn phasor_sum(pairs: impl Iterator<Item = (f64, f64)>) -> (f64, f64, f64, f64) {
    let mut re = 0.0;
    let mut im = 0.0;
    let mut gain_sum = 0.0;
    for (a, phase) in pairs {
        let (s, c) = phase.sin_cos();
        re += a * c;
        im += a * s;
        gain_sum += a;
    }
    (re.hypot(im).min(gain_sum), re, im, gain_sum)
}

/// Received signal strength `|Σ a_i e^{jΦ_i}|`.
pub fn mag(gains: &[f64], phases: &[f64]) -> Result<f64> {
    check_pair(gains, phases)?;
    let (m, ..) = phasor_sum(gains.iter().copied().zip(phases.iter().copied()));
    Ok(m)
}

/// The optimum gain `Σ a_i`, attained at perfect phase coherence.
pub fn g_opt(gains: &[f64]) -> Result<f64> {
    if gains.is_empty() {
        return Err(invalid("gains must be nonempty"));
    }
    if gains.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(invalid("gains must be finite and nonnegative"));
    }
    Ok(gains.iter().sum())
}

/// Phases rotated so the total received phasor has zero phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedPhaseVector {
    /// Rotated phases in `(-π, π]`.
    pub phases: Vec<f64>,
    pub gains: Vec<f64>,
}

impl ReceivedPhaseVector {
    /// `|Σ a_i sin φ_i|`, which is zero (up to rounding) in the rotated frame.
    pub fn imag_residual(&self) -> f64 {
        self.gains
            .iter()
            .zip(&self.phases)
            .map(|(a, p)| a * p.sin())
            .sum::<f64>()
            .abs()
    }
}

/// Rotates phases into the frame where the total received phasor is real.
///
/// Fails when the total phasor is zero, in which case the rotation is
/// undefined.
pub fn rotate_to_zero_phase(gains: &[f64], phases: &[f64]) -> Result<ReceivedPhaseVector> {
    check_pair(gains, phases)?;
    let (m, re, im, _) = phasor_sum(gains.iter().copied().zip(phases.iter().copied()));
    if m == 0.0 {
        return Err(crate::Error::DegenerateInput(
            "total phasor is zero; rotation undefined".into(),
        ));
    }
    let total_phase = im.atan2(re);
    let rotated: Vec<f64> = phases.iter().map(|p| wrap_to_pi(p - total_phase)).collect();
    let out = ReceivedPhaseVector {
        phases: rotated,
        gains: gains.to_vec(),
    };
    debug_assert!(out.imag_residual() < 1e-9 * gains.iter().sum::<f64>().max(f64::MIN_POSITIVE));
    Ok(out)
}

/// Per-sensor channel state: gains, phases and drift rates.
///
/// The received phase of sensor i is `γ_i + θ_i + ψ_i` (oscillator offset,
/// beamformer phase, channel phase). Phases are stored unconstrained and
/// canonicalized to `[0, 2π)` by the accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorEnsemble {
    gains: Vec<f64>,
    channel_phases: Vec<f64>,
    oscillator_offsets: Vec<f64>,
    beam_phases: Vec<f64>,
    drift_rates: Vec<f64>,
}

impl SensorEnsemble {
    /// Builds an ensemble with zero beam phases and zero drift.
    pub fn new(
        gains: Vec<f64>,
        channel_phases: Vec<f64>,
        oscillator_offsets: Vec<f64>,
    ) -> Result<Self> {
        check_pair(&gains, &channel_phases)?;
        if oscillator_offsets.len() != gains.len() {
            return Err(invalid("oscillator_offsets length mismatch"));
        }
        if oscillator_offsets.iter().any(|p| !p.is_finite()) {
            return Err(invalid("oscillator offsets must be finite"));
        }
        let n = gains.len();
        Ok(Self {
            gains,
            channel_phases,
            oscillator_offsets,
            beam_phases: vec![0.0; n],
            drift_rates: vec![0.0; n],
        })
    }

    /// Unit-gain ensemble with the given channel phases.
    pub fn with_unit_gains(channel_phases: Vec<f64>) -> Result<Self> {
        let n = channel_phases.len();
        Self::new(vec![1.0; n], channel_phases, vec![0.0; n])
    }

    pub fn count(&self) -> usize {
        self.gains.len()
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Channel phases `ψ_i`, canonicalized to `[0, 2π)`.
    pub fn channel_phases(&self) -> Vec<f64> {
        self.channel_phases.iter().map(|&p| wrap_to_tau(p)).collect()
    }

    /// Oscillator offsets `γ_i`, canonicalized to `[0, 2π)`.
    pub fn oscillator_offsets(&self) -> Vec<f64> {
        self.oscillator_offsets
            .iter()
            .map(|&p| wrap_to_tau(p))
            .collect()
    }

    /// Beamformer phases `θ_i`, canonicalized to `[0, 2π)`.
    pub fn beam_phases(&self) -> Vec<f64> {
        self.beam_phases.iter().map(|&p| wrap_to_tau(p)).collect()
    }

    /// Raw (unwrapped) beamformer phases; zero until the first accepted step.
    pub fn beam_phases_raw(&self) -> &[f64] {
        &self.beam_phases
    }

    pub fn drift_rates(&self) -> &[f64] {
        &self.drift_rates
    }

    pub fn set_drift_rates(&mut self, rates: Vec<f64>) -> Result<()> {
        if rates.len() != self.count() {
            return Err(invalid("drift_rates length mismatch"));
        }
        if rates.iter().any(|r| !r.is_finite()) {
            return Err(invalid("drift rates must be finite"));
        }
        self.drift_rates = rates;
        Ok(())
    }

    /// Received phases `γ_i + θ_i + ψ_i` (unwrapped).
    pub fn received_phases(&self) -> Vec<f64> {
        (0..self.count()).map(|i| self.received_phase(i)).collect()
    }

    #[inline]
    fn received_phase(&self, i: usize) -> f64 {
        (self.oscillator_offsets[i] + self.beam_phases[i]) + self.channel_phases[i]
    }

    /// `Σ a_i`.
    pub fn g_opt(&self) -> f64 {
        self.gains.iter().sum()
    }

    /// Signal strength with a perturbation applied on top of the received
    /// phases: `|Σ a_i e^{j(γ_i + θ_i + ψ_i + δ_i)}|`.
    pub fn measure(&self, deltas: &[f64]) -> f64 {
        debug_assert_eq!(deltas.len(), self.count());
        let (m, ..) = phasor_sum(
            (0..self.count()).map(|i| (self.gains[i], self.received_phase(i) + deltas[i])),
        );
        m
    }

    /// Signal strength of the unperturbed state.
    pub fn measure_unperturbed(&self) -> f64 {
        let (m, ..) = phasor_sum((0..self.count()).map(|i| (self.gains[i], self.received_phase(i))));
        m
    }

    /// Commits an accepted perturbation into the beamformer phases.
    pub fn add_to_beam_phases(&mut self, deltas: &[f64]) {
        debug_assert_eq!(deltas.len(), self.count());
        for (theta, d) in self.beam_phases.iter_mut().zip(deltas) {
            *theta += d;
        }
    }

    /// Advances each channel phase by its drift rate (one timeslot).
    pub fn advance_channel_phases(&mut self) {
        for (psi, r) in self.channel_phases.iter_mut().zip(&self.drift_rates) {
            *psi += r;
        }
    }
}
