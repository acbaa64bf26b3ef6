//! Experiment configuration: a flat TOML schema with one distribution mode
//! per experiment (fixed `[dist]`, a `[[schedule]]` step table, or
//! `[optimized]`), plus optional `[sweep]` and `[histogram]` sections.

use distbeam_core::perturbation::{DistSchedule, Family, PerturbationDist, ScheduleStep};
use distbeam_core::protocol::Window;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Figure label this experiment reproduces (presets fill this in).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub figure: Option<String>,
    pub n_sensors: usize,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    #[serde(default = "WindowField::unbounded")]
    pub feedback_window: WindowField,
    #[serde(default)]
    pub doppler_magnitude: f64,
    #[serde(default = "default_one")]
    pub doppler_from_slot: usize,
    #[serde(default)]
    pub emit_model_trace: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist: Option<DistField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<ScheduleStepField>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimized: Option<OptimizedField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram: Option<HistogramField>,
}

fn default_one() -> usize {
    1
}

/// `"unbounded"` or a positive slot count.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WindowField {
    Slots(usize),
    Named(String),
}

impl WindowField {
    fn unbounded() -> Self {
        WindowField::Named("unbounded".into())
    }

    fn to_window(&self) -> Result<Window> {
        match self {
            WindowField::Slots(0) => Err(config_err("feedback_window must be at least 1")),
            WindowField::Slots(w) => Ok(Window::Sliding(*w)),
            WindowField::Named(name) if name == "unbounded" => Ok(Window::Unbounded),
            WindowField::Named(other) => Err(config_err(format!(
                "feedback_window must be \"unbounded\" or a slot count, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistField {
    pub family: String,
    /// Radians.
    pub delta0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl DistField {
    pub fn to_dist(&self) -> Result<PerturbationDist> {
        let family = Family::parse_name(&self.family)?;
        Ok(PerturbationDist::new(family, self.delta0, self.p)?)
    }

    pub fn from_dist(dist: &PerturbationDist) -> Self {
        Self {
            family: dist.family().name().to_string(),
            delta0: dist.delta0(),
            p: dist.weight_p(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleStepField {
    pub from_slot: usize,
    pub family: String,
    pub delta0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizedField {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub families: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepField {
    pub n_list: Vec<usize>,
    pub f: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramField {
    /// Snapshot when `Y_best/G_opt` first reaches this fraction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at_fraction: Option<f64>,
    /// Snapshot after exactly this timeslot.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at_slot: Option<usize>,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_bins() -> usize {
    41
}

/// Distribution mode of a validated experiment.
#[derive(Debug, Clone)]
pub enum Mode {
    Fixed(DistSchedule),
    Optimized(Vec<Family>),
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub n_list: Vec<usize>,
    pub f: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum HistogramAt {
    Fraction(f64),
    Slot(usize),
}

#[derive(Debug, Clone)]
pub struct HistogramSettings {
    pub at: HistogramAt,
    pub bins: usize,
}

/// A fully validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub figure: Option<String>,
    pub n_sensors: usize,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub window: Window,
    pub doppler_magnitude: f64,
    pub doppler_from_slot: usize,
    pub emit_model_trace: bool,
    pub gains: Option<Vec<f64>>,
    pub mode: Mode,
    pub sweep: Option<SweepSettings>,
    pub histogram: Option<HistogramSettings>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(format!("TOML parse failure: {e}")))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| config_err(format!("serialize failure: {e}")))
    }

    pub fn validate(&self) -> Result<Experiment> {
        if self.n_sensors == 0 {
            return Err(config_err("n_sensors must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(config_err("horizon must be at least 1"));
        }
        if !self.doppler_magnitude.is_finite() || self.doppler_magnitude < 0.0 {
            return Err(config_err("doppler_magnitude must be finite and >= 0"));
        }
        if let Some(gains) = &self.gains {
            if gains.len() != self.n_sensors {
                return Err(config_err(format!(
                    "gains list has {} entries for {} sensors",
                    gains.len(),
                    self.n_sensors
                )));
            }
            // The analytical recursion assumes unit gains; refuse rather
            // than silently feed it a heterogeneous ensemble.
            let model_involved =
                self.emit_model_trace || self.sweep.is_some() || self.optimized.is_some();
            if model_involved && gains.iter().any(|&a| a != 1.0) {
                return Err(config_err(
                    "model traces, sweeps and optimized runs require unit gains",
                ));
            }
        }

        let modes_given =
            self.dist.is_some() as u8 + self.schedule.is_some() as u8 + self.optimized.is_some() as u8;
        if modes_given != 1 {
            return Err(config_err(
                "exactly one of [dist], [[schedule]] or [optimized] is required",
            ));
        }
        let mode = if let Some(d) = &self.dist {
            Mode::Fixed(DistSchedule::Fixed(d.to_dist()?))
        } else if let Some(steps) = &self.schedule {
            let steps: Result<Vec<ScheduleStep>> = steps
                .iter()
                .map(|s| {
                    let family = Family::parse_name(&s.family)?;
                    Ok(ScheduleStep {
                        from_slot: s.from_slot,
                        dist: PerturbationDist::new(family, s.delta0, s.p)?,
                    })
                })
                .collect();
            Mode::Fixed(DistSchedule::steps(steps?)?)
        } else {
            let opt = self.optimized.as_ref().expect("mode checked");
            let names: Vec<String> = match (&opt.family, &opt.families) {
                (Some(one), None) => vec![one.clone()],
                (None, Some(many)) if !many.is_empty() => many.clone(),
                _ => {
                    return Err(config_err(
                        "[optimized] needs `family = \"...\"` or a nonempty `families` list",
                    ))
                }
            };
            let families: Result<Vec<Family>> = names
                .iter()
                .map(|n| Family::parse_name(n).map_err(Into::into))
                .collect();
            Mode::Optimized(families?)
        };

        let sweep = match &self.sweep {
            None => None,
            Some(s) => {
                if !(s.f > 0.0 && s.f < 1.0) {
                    return Err(config_err("sweep fraction f must lie in (0, 1)"));
                }
                if s.n_list.is_empty() || s.n_list.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(config_err("sweep n_list must be nonempty and ascending"));
                }
                Some(SweepSettings {
                    n_list: s.n_list.clone(),
                    f: s.f,
                })
            }
        };

        let histogram = match &self.histogram {
            None => None,
            Some(h) => {
                if h.bins == 0 {
                    return Err(config_err("histogram bins must be at least 1"));
                }
                let at = match (h.at_fraction, h.at_slot) {
                    (Some(f), None) => {
                        if !(f > 0.0 && f < 1.0) {
                            return Err(config_err("histogram at_fraction must lie in (0, 1)"));
                        }
                        HistogramAt::Fraction(f)
                    }
                    (None, Some(slot)) => {
                        if slot == 0 || slot > self.horizon {
                            return Err(config_err("histogram at_slot must lie in 1..=horizon"));
                        }
                        HistogramAt::Slot(slot)
                    }
                    _ => {
                        return Err(config_err(
                            "histogram needs exactly one of at_fraction or at_slot",
                        ))
                    }
                };
                if self.seeds.is_empty() {
                    return Err(config_err("histogram requires at least one seed"));
                }
                Some(HistogramSettings { at, bins: h.bins })
            }
        };

        if self.seeds.is_empty() && !self.emit_model_trace && sweep.is_none() {
            return Err(config_err(
                "nothing to run: no seeds, no model trace, no sweep",
            ));
        }

        Ok(Experiment {
            name: self.name.clone().unwrap_or_else(|| "experiment".into()),
            figure: self.figure.clone(),
            n_sensors: self.n_sensors,
            horizon: self.horizon,
            seeds: self.seeds.clone(),
            window: self.feedback_window.to_window()?,
            doppler_magnitude: self.doppler_magnitude,
            doppler_from_slot: self.doppler_from_slot.max(1),
            emit_model_trace: self.emit_model_trace,
            gains: self.gains.clone(),
            mode,
            sweep,
            histogram,
        })
    }
}
