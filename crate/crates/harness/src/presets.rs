//! Figure presets. Each preset expands to one or more plain experiment
//! configs, so anything a preset does can also be written as a config file.

use std::f64::consts::PI;

use crate::config::{
    DistField, ExperimentConfig, HistogramField, OptimizedField, SweepField, WindowField,
};
use crate::error::{config_err, Result};

pub const PRESET_NAMES: &[&str] = &[
    "fig2", "fig3", "fig5", "fig6", "fig7", "fig8", "fig9a", "fig9b", "fig10",
];

fn base(name: &str, figure: &str, n_sensors: usize, horizon: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: Some(name.to_string()),
        figure: Some(figure.to_string()),
        n_sensors,
        horizon,
        seeds: Vec::new(),
        feedback_window: WindowField::Named("unbounded".into()),
        doppler_magnitude: 0.0,
        doppler_from_slot: 1,
        emit_model_trace: false,
        gains: None,
        dist: None,
        schedule: None,
        optimized: None,
        sweep: None,
        histogram: None,
    }
}

fn uniform(delta0: f64) -> DistField {
    DistField {
        family: "uniform".into(),
        delta0,
        p: None,
    }
}

/// Expands a preset into its experiment configs.
pub fn expand(preset: &str) -> Result<Vec<ExperimentConfig>> {
    match preset {
        // Single-run convergence, N = 10.
        "fig2" => {
            let mut cfg = base("fig2", "2", 10, 5000);
            cfg.seeds = vec![1];
            cfg.dist = Some(uniform(PI / 20.0));
            Ok(vec![cfg])
        }
        // Two independent instances, N = 100.
        "fig3" => {
            let mut cfg = base("fig3", "3", 100, 3000);
            cfg.seeds = vec![1, 2];
            cfg.dist = Some(uniform(PI / 20.0));
            Ok(vec![cfg])
        }
        // Rotated-phase histogram vs the fitted Laplacian, mid-convergence.
        "fig5" => {
            let mut cfg = base("fig5", "5", 100, 20_000);
            cfg.seeds = vec![1];
            cfg.dist = Some(uniform(PI / 20.0));
            cfg.histogram = Some(HistogramField {
                at_fraction: Some(0.8),
                at_slot: None,
                bins: 41,
            });
            Ok(vec![cfg])
        }
        // Model vs Monte-Carlo mean for uniform and two-point laws.
        "fig6" => {
            let seeds: Vec<u64> = (0..50).collect();
            let mut a = base("fig6_uniform", "6", 100, 3000);
            a.seeds = seeds.clone();
            a.emit_model_trace = true;
            a.dist = Some(uniform(PI / 30.0));
            let mut b = base("fig6_two_point", "6", 100, 3000);
            b.seeds = seeds;
            b.emit_model_trace = true;
            b.dist = Some(DistField {
                family: "two_point".into(),
                delta0: PI / 30.0,
                p: None,
            });
            Ok(vec![a, b])
        }
        // Optimal moment-pair trajectories for both families.
        "fig7" => {
            let mut cfg = base("fig7", "7", 2000, 10_001);
            cfg.emit_model_trace = true;
            cfg.optimized = Some(OptimizedField {
                family: None,
                families: Some(vec!["uniform".into(), "three_point".into()]),
            });
            Ok(vec![cfg])
        }
        // Optimized trace against fixed-δ₀ traces, N = 200.
        "fig8" => {
            let mut out = Vec::new();
            let mut opt = base("fig8_optimized", "8", 200, 3000);
            opt.emit_model_trace = true;
            opt.optimized = Some(OptimizedField {
                family: Some("uniform".into()),
                families: None,
            });
            out.push(opt);
            for (label, d0) in [
                ("pi_over_10", PI / 10.0),
                ("pi_over_30", PI / 30.0),
                ("pi_over_60", PI / 60.0),
                ("pi_over_100", PI / 100.0),
            ] {
                let mut cfg = base(&format!("fig8_fixed_{label}"), "8", 200, 3000);
                cfg.emit_model_trace = true;
                cfg.dist = Some(uniform(d0));
                out.push(cfg);
            }
            Ok(out)
        }
        // Convergence-time sweep, fixed distribution.
        "fig9a" => {
            let mut cfg = base("fig9a", "9(a)", 800, 20_000);
            cfg.dist = Some(uniform(PI / 30.0));
            cfg.sweep = Some(SweepField {
                n_list: vec![50, 100, 200, 400, 800],
                f: 0.75,
            });
            Ok(vec![cfg])
        }
        // Convergence-time sweep, per-slot optimized distribution.
        "fig9b" => {
            let mut cfg = base("fig9b", "9(b)", 1600, 20_000);
            cfg.optimized = Some(OptimizedField {
                family: Some("uniform".into()),
                families: None,
            });
            cfg.sweep = Some(SweepField {
                n_list: vec![50, 100, 200, 400, 800, 1600],
                f: 0.75,
            });
            Ok(vec![cfg])
        }
        // Tracking under per-sensor Doppler after a static warm-up.
        "fig10" => {
            let mut cfg = base("fig10", "10", 100, 4000);
            cfg.seeds = vec![0];
            cfg.dist = Some(uniform(PI / 10.0));
            cfg.feedback_window = WindowField::Slots(3);
            cfg.doppler_magnitude = PI / 200.0;
            cfg.doppler_from_slot = 1501;
            Ok(vec![cfg])
        }
        other => Err(config_err(format!(
            "unknown preset `{other}`; available: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_expand_and_validate() {
        for name in PRESET_NAMES {
            let configs = expand(name).unwrap();
            assert!(!configs.is_empty(), "{name} expanded to nothing");
            for cfg in configs {
                cfg.validate()
                    .unwrap_or_else(|e| panic!("{name}: invalid config: {e}"));
                assert!(cfg.figure.is_some(), "{name} must declare its figure");
            }
        }
        assert!(expand("fig999").is_err());
    }

    #[test]
    fn presets_roundtrip_as_plain_configs() {
        for name in PRESET_NAMES {
            for cfg in expand(name).unwrap() {
                let text = cfg.to_toml_string().unwrap();
                let back = ExperimentConfig::from_toml_str(&text)
                    .unwrap_or_else(|e| panic!("{name}: reparse failed: {e}"));
                back.validate().unwrap();
            }
        }
    }
}
