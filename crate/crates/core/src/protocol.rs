//! Monte-Carlo simulation of the one-bit feedback loop.
//!
//! Each timeslot every sensor perturbs its beamformer phase by an
//! independent draw `δ_i`, the base station measures the resulting strength
//! `Y[n]`, and a single feedback bit tells the sensors whether `Y[n]`
//! strictly beat the reference strength. On accept the perturbation is
//! committed, otherwise discarded; the reference is the running maximum of
//! all past measurements, or a sliding-window maximum when tracking
//! time-varying channels (an unbounded maximum freezes adaptation once the
//! channel drifts away from the historical best).

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::perturbation::{DistSchedule, PerturbationDist};
use crate::phasor::SensorEnsemble;
use crate::seeding;

/// Feedback comparison window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Compare against the best measurement ever seen (the paper's rule).
    Unbounded,
    /// Compare against the best of the last W measurements (tracking mode).
    Sliding(usize),
}

#[derive(Debug, Clone, PartialEq)]
enum BestTracker {
    Unbounded(f64),
    Sliding { buf: VecDeque<f64>, cap: usize },
}

impl BestTracker {
    fn new(window: Window, initial: f64) -> Result<Self> {
        match window {
            Window::Unbounded => Ok(BestTracker::Unbounded(initial)),
            Window::Sliding(0) => Err(invalid("sliding window must be at least 1 slot")),
            Window::Sliding(cap) => {
                let mut buf = VecDeque::with_capacity(cap.min(1 << 20));
                buf.push_back(initial);
                Ok(BestTracker::Sliding { buf, cap })
            }
        }
    }

    fn reference(&self) -> f64 {
        match self {
            BestTracker::Unbounded(best) => *best,
            BestTracker::Sliding { buf, .. } => buf.iter().copied().fold(f64::MIN, f64::max),
        }
    }

    fn push(&mut self, y: f64) {
        match self {
            BestTracker::Unbounded(best) => *best = best.max(y),
            BestTracker::Sliding { buf, cap } => {
                if buf.len() == *cap {
                    buf.pop_front();
                }
                buf.push_back(y);
            }
        }
    }
}

/// One timeslot's observables.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Timeslot index, 1-based.
    pub timeslot: usize,
    /// Measured strength of the perturbed transmission.
    pub y: f64,
    /// Reference strength the measurement was compared against.
    pub y_best: f64,
    /// Feedback bit: `y > y_best` strictly.
    pub accepted: bool,
    /// δ₀ of the distribution in force this slot.
    pub delta0_used: f64,
}

/// Live simulation state: ensemble, timeslot counter and feedback reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolState {
    ensemble: SensorEnsemble,
    timeslot: usize,
    best: BestTracker,
}

impl ProtocolState {
    /// Unit-gain initialization: beam phases zero, per-sensor received-phase
    /// offsets i.i.d. uniform in `[0, 2π)` from `phase_seed`, reference set
    /// to the unperturbed initial strength.
    ///
    /// The oscillator offset and the channel phase enter the algorithm only
    /// through their sum, so the combined draw is stored as the channel
    /// phase.
    pub fn init(n_sensors: usize, phase_seed: u64, window: Window) -> Result<Self> {
        Self::init_with_gains(vec![1.0; n_sensors.max(1)], n_sensors, phase_seed, window)
    }

    /// Like [`ProtocolState::init`] with explicit gains.
    pub fn init_with_gains(
        gains: Vec<f64>,
        n_sensors: usize,
        phase_seed: u64,
        window: Window,
    ) -> Result<Self> {
        if n_sensors == 0 {
            return Err(invalid("n_sensors must be at least 1"));
        }
        if gains.len() != n_sensors {
            return Err(invalid(format!(
                "expected {n_sensors} gains, got {}",
                gains.len()
            )));
        }
        let mut rng = seeding::stream(phase_seed, seeding::STREAM_INIT_PHASES);
        let offsets: Vec<f64> = (0..n_sensors)
            .map(|_| std::f64::consts::TAU * rng.gen::<f64>())
            .collect();
        let ensemble = SensorEnsemble::new(gains, offsets, vec![0.0; n_sensors])?;
        Self::from_ensemble(ensemble, window)
    }

    /// Wraps an explicitly constructed ensemble; the reference starts at the
    /// unperturbed strength of that ensemble.
    pub fn from_ensemble(ensemble: SensorEnsemble, window: Window) -> Result<Self> {
        let initial = ensemble.measure_unperturbed();
        Ok(Self {
            ensemble,
            timeslot: 1,
            best: BestTracker::new(window, initial)?,
        })
    }

    pub fn ensemble(&self) -> &SensorEnsemble {
        &self.ensemble
    }

    pub fn n_sensors(&self) -> usize {
        self.ensemble.count()
    }

    /// The upcoming timeslot index (1-based).
    pub fn timeslot(&self) -> usize {
        self.timeslot
    }

    /// Current feedback reference (`Y_best` for the upcoming slot).
    pub fn best_reference(&self) -> f64 {
        self.best.reference()
    }

    pub fn g_opt(&self) -> f64 {
        self.ensemble.g_opt()
    }

    /// Draws per-sensor drift rates i.i.d. uniform in `[-magnitude,
    /// +magnitude]`.
    ///
    /// A drift common to all sensors is invisible to the magnitude, so
    /// heterogeneous rates are what make channel time-variation observable.
    /// The rates must also be incommensurate: with only two values ±D the
    /// ensemble splits into two counter-rotating coherent sub-beams that
    /// periodically re-align, which is not a de-cohering channel at all.
    pub fn assign_drift_rates(&mut self, magnitude: f64, rng: &mut ChaCha8Rng) -> Result<()> {
        if !magnitude.is_finite() || magnitude < 0.0 {
            return Err(invalid("doppler magnitude must be finite and >= 0"));
        }
        let rates: Vec<f64> = (0..self.n_sensors())
            .map(|_| {
                if magnitude == 0.0 {
                    0.0
                } else {
                    rng.gen_range(-magnitude..=magnitude)
                }
            })
            .collect();
        self.ensemble.set_drift_rates(rates)
    }

    /// Overrides drift rates directly (diagnostics and tests).
    pub fn set_drift_rates(&mut self, rates: Vec<f64>) -> Result<()> {
        self.ensemble.set_drift_rates(rates)
    }

    /// Advances every channel phase by its drift rate; call once per
    /// timeslot before the perturbation step.
    pub fn evolve_channels(&mut self) {
        self.ensemble.advance_channel_phases();
    }

    /// Executes one timeslot with the given perturbation vector: measure,
    /// compare strictly against the reference, commit on accept, update the
    /// reference window, advance the slot counter.
    pub fn apply_slot(&mut self, deltas: &[f64], delta0_label: f64) -> TraceRecord {
        let y = self.ensemble.measure(deltas);
        let reference = self.best.reference();
        let accepted = y > reference;
        if accepted {
            self.ensemble.add_to_beam_phases(deltas);
        }
        self.best.push(y);
        let record = TraceRecord {
            timeslot: self.timeslot,
            y,
            y_best: reference,
            accepted,
            delta0_used: delta0_label,
        };
        self.timeslot += 1;
        record
    }

    /// One timeslot with draws taken from the per-sensor streams.
    pub fn step(&mut self, dist: &PerturbationDist, streams: &mut SensorStreams) -> TraceRecord {
        let mut deltas = vec![0.0; self.n_sensors()];
        streams.draw_into(dist, &mut deltas);
        self.apply_slot(&deltas, dist.delta0())
    }
}

/// One independent perturbation stream per sensor, all derived from the
/// master seed, so sensor i's draws do not depend on the ensemble size.
pub struct SensorStreams {
    streams: Vec<ChaCha8Rng>,
}

impl SensorStreams {
    pub fn new(master_seed: u64, n_sensors: usize) -> Self {
        Self {
            streams: (0..n_sensors)
                .map(|i| seeding::sensor_stream(master_seed, i))
                .collect(),
        }
    }

    pub fn draw_into(&mut self, dist: &PerturbationDist, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.streams.len());
        for (slot, rng) in out.iter_mut().zip(self.streams.iter_mut()) {
            *slot = dist.sample_one(rng);
        }
    }
}

/// Full description of one protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub n_sensors: usize,
    /// Unit gains when `None`.
    pub gains: Option<Vec<f64>>,
    pub schedule: DistSchedule,
    pub horizon: usize,
    pub window: Window,
    /// Per-sensor drift magnitude in radians/timeslot; 0 disables drift.
    pub doppler_magnitude: f64,
    /// First timeslot at which the channels drift, allowing a static
    /// warm-up phase before tracking begins.
    pub doppler_from_slot: usize,
    /// Master seed; all streams of the run derive from it.
    pub seed: u64,
}

impl RunSpec {
    /// Unit-gain static-channel run with an unbounded window.
    pub fn new(n_sensors: usize, schedule: DistSchedule, horizon: usize, seed: u64) -> Self {
        Self {
            n_sensors,
            gains: None,
            schedule,
            horizon,
            window: Window::Unbounded,
            doppler_magnitude: 0.0,
            doppler_from_slot: 1,
            seed,
        }
    }
}

/// Step-by-step driver for a [`RunSpec`], for callers that need to inspect
/// the state mid-run.
pub struct ProtocolRun {
    state: ProtocolState,
    streams: SensorStreams,
    schedule: DistSchedule,
    horizon: usize,
    doppler: bool,
    doppler_from_slot: usize,
    scratch: Vec<f64>,
}

impl ProtocolRun {
    pub fn new(spec: &RunSpec) -> Result<Self> {
        if spec.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        let mut state = match &spec.gains {
            Some(gains) => {
                ProtocolState::init_with_gains(gains.clone(), spec.n_sensors, spec.seed, spec.window)?
            }
            None => ProtocolState::init(spec.n_sensors, spec.seed, spec.window)?,
        };
        let mut drift_rng = seeding::stream(spec.seed, seeding::STREAM_DRIFT);
        state.assign_drift_rates(spec.doppler_magnitude, &mut drift_rng)?;
        Ok(Self {
            state,
            streams: SensorStreams::new(spec.seed, spec.n_sensors),
            schedule: spec.schedule.clone(),
            horizon: spec.horizon,
            doppler: spec.doppler_magnitude > 0.0,
            doppler_from_slot: spec.doppler_from_slot.max(1),
            scratch: vec![0.0; spec.n_sensors],
        })
    }

    pub fn state(&self) -> &ProtocolState {
        &self.state
    }

    /// Runs the next timeslot; `None` once the horizon is exhausted.
    pub fn step_slot(&mut self) -> Option<TraceRecord> {
        let slot = self.state.timeslot();
        if slot > self.horizon {
            return None;
        }
        if self.doppler && slot >= self.doppler_from_slot {
            self.state.evolve_channels();
        }
        let dist = *self.schedule.dist_at(slot);
        self.streams.draw_into(&dist, &mut self.scratch);
        Some(self.state.apply_slot(&self.scratch, dist.delta0()))
    }
}

/// Executes all timeslots of a run and returns the trace.
pub fn run_protocol(spec: &RunSpec) -> Result<Vec<TraceRecord>> {
    let mut run = ProtocolRun::new(spec)?;
    let mut trace = Vec::with_capacity(spec.horizon);
    while let Some(record) = run.step_slot() {
        trace.push(record);
    }
    Ok(trace)
}
