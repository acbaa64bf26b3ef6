//! Experiment execution and CSV emission.
//!
//! All outputs are CSV with a `#`-prefixed metadata header; re-running a
//! config with the same seed list produces byte-identical files (no
//! timestamps, stable float formatting).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use distbeam_core::model::run_model;
use distbeam_core::optimizer::{run_optimized_model, ScheduleEntry};
use distbeam_core::perturbation::{DistSchedule, Family, PerturbationDist, ScheduleStep};
use distbeam_core::protocol::{run_protocol, RunSpec, TraceRecord, Window};
use distbeam_core::scaling::{scaling_sweep, ScalingReport, SweepMode};

use crate::config::{Experiment, Mode};
use crate::error::Result;
use crate::histogram::{phase_histogram, PhaseHistogram};

/// Files written by one experiment.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
}

fn window_label(window: Window) -> String {
    match window {
        Window::Unbounded => "unbounded".into(),
        Window::Sliding(w) => w.to_string(),
    }
}

fn dist_label(dist: &PerturbationDist) -> String {
    match dist.weight_p() {
        Some(p) => format!("{} delta0={} p={p}", dist.family(), dist.delta0()),
        None => format!("{} delta0={}", dist.family(), dist.delta0()),
    }
}

fn mode_label(mode: &Mode) -> String {
    match mode {
        Mode::Fixed(DistSchedule::Fixed(d)) => dist_label(d),
        Mode::Fixed(DistSchedule::Steps(steps)) => format!("schedule({} steps)", steps.len()),
        Mode::Optimized(families) => {
            let names: Vec<&str> = families.iter().map(|f| f.name()).collect();
            format!("optimized({})", names.join(","))
        }
    }
}

struct CsvFile {
    writer: BufWriter<fs::File>,
    path: PathBuf,
}

impl CsvFile {
    fn create(dir: &Path, name: &str, kind: &str, exp: &Experiment) -> Result<Self> {
        let path = dir.join(name);
        let file = fs::File::create(&path)?;
        let mut writer = BufWriter::new(file);
        writeln!(writer, "# distbeam v1")?;
        writeln!(writer, "# kind: {kind}")?;
        writeln!(writer, "# experiment: {}", exp.name)?;
        if let Some(fig) = &exp.figure {
            writeln!(writer, "# figure: {fig}")?;
        }
        writeln!(writer, "# n_sensors: {}", exp.n_sensors)?;
        writeln!(writer, "# horizon: {}", exp.horizon)?;
        writeln!(writer, "# feedback_window: {}", window_label(exp.window))?;
        writeln!(
            writer,
            "# doppler: magnitude={} from_slot={}",
            exp.doppler_magnitude, exp.doppler_from_slot
        )?;
        writeln!(writer, "# mode: {}", mode_label(&exp.mode))?;
        Ok(Self { writer, path })
    }

    fn meta(&mut self, key: &str, value: impl std::fmt::Display) -> Result<()> {
        writeln!(self.writer, "# {key}: {value}")?;
        Ok(())
    }

    fn line(&mut self, line: &str) -> Result<()> {
        writeln!(self.writer, "{line}")?;
        Ok(())
    }

    fn finish(mut self, outcome: &mut RunOutcome) -> Result<()> {
        self.writer.flush()?;
        outcome.files.push(self.path);
        Ok(())
    }
}

fn write_protocol_trace(
    dir: &Path,
    exp: &Experiment,
    seed: u64,
    trace: &[TraceRecord],
    outcome: &mut RunOutcome,
) -> Result<()> {
    let mut f = CsvFile::create(
        dir,
        &format!("{}_protocol_seed{}.csv", exp.name, seed),
        "protocol-trace",
        exp,
    )?;
    f.meta("seed", seed)?;
    f.line("timeslot,y,y_best,accepted,delta0_used")?;
    for r in trace {
        f.line(&format!(
            "{},{},{},{},{}",
            r.timeslot, r.y, r.y_best, r.accepted, r.delta0_used
        ))?;
    }
    f.finish(outcome)
}

fn write_model_trace(
    dir: &Path,
    exp: &Experiment,
    file_name: &str,
    ys: &[f64],
    delta0_at: impl Fn(usize) -> f64,
    outcome: &mut RunOutcome,
) -> Result<()> {
    let mut f = CsvFile::create(dir, file_name, "model-trace", exp)?;
    f.line("timeslot,y,y_best,accepted,delta0_used")?;
    for (i, y) in ys.iter().enumerate() {
        let slot = i + 1;
        f.line(&format!("{slot},{y},{y},,{}", delta0_at(slot)))?;
    }
    f.finish(outcome)
}

fn write_param_schedule(
    dir: &Path,
    exp: &Experiment,
    family: Family,
    entries: &[ScheduleEntry],
    outcome: &mut RunOutcome,
) -> Result<()> {
    let mut f = CsvFile::create(
        dir,
        &format!("{}_schedule_{}.csv", exp.name, family.name()),
        "param-schedule",
        exp,
    )?;
    f.line("timeslot,family,delta0,p,c_delta,c_2delta,y_predicted")?;
    for e in entries {
        let p = e.weight_p.map(|p| p.to_string()).unwrap_or_default();
        f.line(&format!(
            "{},{},{},{},{},{},{}",
            e.timeslot, e.family, e.delta0, p, e.c_delta, e.c_2delta, e.y_predicted
        ))?;
    }
    f.finish(outcome)
}

fn write_scaling_report(
    dir: &Path,
    exp: &Experiment,
    report: &ScalingReport,
    outcome: &mut RunOutcome,
) -> Result<()> {
    let mut f = CsvFile::create(dir, &format!("{}_scaling.csv", exp.name), "scaling-report", exp)?;
    f.meta("fraction", report.f)?;
    f.meta("monotone", report.monotone)?;
    f.line("n_sensors,t_fraction,t_over_n,mode,f")?;
    for e in &report.entries {
        let t = e.t_fraction.map(|t| t.to_string()).unwrap_or_default();
        let ratio = e.t_over_n.map(|r| r.to_string()).unwrap_or_default();
        f.line(&format!(
            "{},{},{},{},{}",
            e.n_sensors, t, ratio, report.mode_label, report.f
        ))?;
    }
    f.finish(outcome)
}

fn write_histogram(
    dir: &Path,
    exp: &Experiment,
    seed: u64,
    hist: &PhaseHistogram,
    outcome: &mut RunOutcome,
) -> Result<()> {
    let mut f = CsvFile::create(
        dir,
        &format!("{}_histogram_seed{}.csv", exp.name, seed),
        "phase-histogram",
        exp,
    )?;
    f.meta("seed", seed)?;
    f.meta("snapshot_slot", hist.slot)?;
    f.meta("y_best", hist.y_best)?;
    f.meta("phi0", hist.phi0)?;
    f.meta("ks_distance", hist.ks_distance)?;
    f.line("bin_lo,bin_hi,mass,laplacian_mass")?;
    for k in 0..hist.mass.len() {
        f.line(&format!(
            "{},{},{},{}",
            hist.edges[k],
            hist.edges[k + 1],
            hist.mass[k],
            hist.laplacian_mass[k]
        ))?;
    }
    f.finish(outcome)
}

/// Converts a per-slot optimized parameter schedule into a protocol
/// distribution schedule.
fn optimized_to_dist_schedule(entries: &[ScheduleEntry]) -> Result<DistSchedule> {
    let steps: std::result::Result<Vec<ScheduleStep>, distbeam_core::Error> = entries
        .iter()
        .map(|e| {
            Ok(ScheduleStep {
                from_slot: e.timeslot,
                dist: PerturbationDist::new(e.family, e.delta0, e.weight_p)?,
            })
        })
        .collect();
    Ok(DistSchedule::steps(steps?)?)
}

fn run_spec(exp: &Experiment, schedule: DistSchedule, seed: u64) -> RunSpec {
    RunSpec {
        n_sensors: exp.n_sensors,
        gains: exp.gains.clone(),
        schedule,
        horizon: exp.horizon,
        window: exp.window,
        doppler_magnitude: exp.doppler_magnitude,
        doppler_from_slot: exp.doppler_from_slot,
        seed,
    }
}

/// Executes an experiment, writing every output under `out_dir`.
pub fn run_experiment(exp: &Experiment, out_dir: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir)?;
    let mut outcome = RunOutcome::default();

    // The distribution schedule driving protocol runs (for optimized mode,
    // the per-slot optimal parameters of the first family).
    let protocol_schedule: DistSchedule = match &exp.mode {
        Mode::Fixed(schedule) => {
            if exp.emit_model_trace {
                let ys = run_model(exp.n_sensors, schedule, exp.horizon)?;
                let sched = schedule.clone();
                write_model_trace(
                    out_dir,
                    exp,
                    &format!("{}_model.csv", exp.name),
                    &ys,
                    |slot| sched.dist_at(slot).delta0(),
                    &mut outcome,
                )?;
            }
            schedule.clone()
        }
        Mode::Optimized(families) => {
            let mut first_schedule = None;
            for &family in families {
                let (ys, entries) = run_optimized_model(exp.n_sensors, family, exp.horizon)?;
                if exp.emit_model_trace {
                    let by_slot = entries.clone();
                    write_model_trace(
                        out_dir,
                        exp,
                        &format!("{}_model_{}.csv", exp.name, family.name()),
                        &ys,
                        |slot| {
                            by_slot
                                .get(slot.saturating_sub(1).min(by_slot.len().saturating_sub(1)))
                                .map(|e| e.delta0)
                                .unwrap_or(f64::NAN)
                        },
                        &mut outcome,
                    )?;
                }
                write_param_schedule(out_dir, exp, family, &entries, &mut outcome)?;
                if first_schedule.is_none() {
                    first_schedule = Some(optimized_to_dist_schedule(&entries)?);
                }
            }
            first_schedule.expect("validated: at least one family")
        }
    };

    if !exp.seeds.is_empty() {
        let traces: Vec<(u64, Result<Vec<TraceRecord>>)> = exp
            .seeds
            .par_iter()
            .map(|&seed| {
                let spec = run_spec(exp, protocol_schedule.clone(), seed);
                (seed, run_protocol(&spec).map_err(Into::into))
            })
            .collect();
        for (seed, trace) in traces {
            write_protocol_trace(out_dir, exp, seed, &trace?, &mut outcome)?;
        }
    }

    if let Some(sweep) = &exp.sweep {
        let mode = match &exp.mode {
            Mode::Fixed(schedule) => SweepMode::Fixed(schedule.clone()),
            Mode::Optimized(families) => SweepMode::Optimized(families[0]),
        };
        let report = scaling_sweep(&sweep.n_list, sweep.f, &mode, exp.horizon)?;
        write_scaling_report(out_dir, exp, &report, &mut outcome)?;
    }

    if let Some(hist) = &exp.histogram {
        for &seed in &exp.seeds {
            let spec = run_spec(exp, protocol_schedule.clone(), seed);
            let snapshot = phase_histogram(&spec, hist.at, hist.bins)?;
            write_histogram(out_dir, exp, seed, &snapshot, &mut outcome)?;
        }
    }

    Ok(outcome)
}
