//! Benchmark configuration and its TOML file form.
//!
//! The file has one table per module. Angles are given in degrees (keys end
//! in `_deg`) and converted to radians on load; every key is optional and
//! falls back to the built-in default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerKind, EpisodeConfig};
use crate::error::{Error, Result};
use crate::geometry::{CurveSampling, ShapeKind};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub shapes: Vec<ShapeKind>,
    pub controllers: Vec<ControllerKind>,
    pub episodes_per_shape: usize,
    pub base_seed: u64,
    pub sampling: CurveSampling,
    pub episode: EpisodeConfig,
    pub csv_path: Option<PathBuf>,
    /// Directory receiving one JSONL trajectory per episode.
    pub trajectory_dir: Option<PathBuf>,
    /// Fill the `wall_ms` column; off keeps the CSV byte-for-byte reproducible.
    pub record_wall_time: bool,
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            shapes: ShapeKind::ALL.to_vec(),
            controllers: vec![ControllerKind::FullObs, ControllerKind::Heuristic],
            episodes_per_shape: 200,
            base_seed: 2024,
            sampling: CurveSampling::default(),
            episode: EpisodeConfig::default(),
            csv_path: None,
            trajectory_dir: None,
            record_wall_time: false,
            threads: None,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes_per_shape == 0 {
            return Err(Error::Config("episodes_per_shape must be positive".into()));
        }
        if self.shapes.is_empty() || self.controllers.is_empty() {
            return Err(Error::Config("need at least one shape and one controller".into()));
        }
        let implied = self.episode.sim.attached_length();
        if (self.sampling.attached_length - implied).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "attached length {} does not match strap_length - initial_peeled = {implied}",
                self.sampling.attached_length
            )));
        }
        self.episode.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = Self::default();
        file.apply(&mut cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Renders the configuration in file form (degrees for angles).
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(&FileConfig::from_config(self)).expect("config serialises")
    }
}

fn deg(v: Option<f64>) -> Option<f64> {
    v.map(f64::to_radians)
}

fn deg_pair(v: Option<(f64, f64)>) -> Option<(f64, f64)> {
    v.map(|(a, b)| (a.to_radians(), b.to_radians()))
}

macro_rules! set {
    ($src:expr => $dst:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    benchmark: BenchmarkSection,
    #[serde(default)]
    geometry: GeometrySection,
    #[serde(default)]
    simulator: SimulatorSection,
    #[serde(default)]
    filter: FilterSection,
    #[serde(default)]
    controller: ControllerSection,
    #[serde(default)]
    cost: CostSection,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchmarkSection {
    shapes: Option<Vec<String>>,
    controllers: Option<Vec<String>>,
    episodes_per_shape: Option<usize>,
    base_seed: Option<u64>,
    csv: Option<PathBuf>,
    trajectory_dir: Option<PathBuf>,
    record_wall_time: Option<bool>,
    threads: Option<usize>,
    snapshot_particles: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometrySection {
    tilt_range_deg: Option<(f64, f64)>,
    arc_radius_range: Option<(f64, f64)>,
    corner_radius_range: Option<(f64, f64)>,
    flat_after_ratio_range: Option<(f64, f64)>,
    turn_sign: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulatorSection {
    substeps: Option<usize>,
    noise_std_beta_deg: Option<f64>,
    forbidden_min_deg: Option<f64>,
    forbidden_max_deg: Option<f64>,
    forbidden_after_rotation: Option<bool>,
    initial_relative_phi_deg: Option<f64>,
    initial_peeled: Option<f64>,
    strap_length: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilterSection {
    n_particles: Option<usize>,
    sigma1_deg: Option<f64>,
    sigma2: Option<f64>,
    sigma3_deg: Option<f64>,
    roughening_theta_deg: Option<f64>,
    decay_lambda: Option<f64>,
    history_window: Option<usize>,
    min_arc_radius: Option<f64>,
    r_prior_mean: Option<f64>,
    r_prior_std: Option<f64>,
    theta_prior_range_deg: Option<(f64, f64)>,
    /// "strap": prior range is relative to the surface angle implied by the
    /// first observation; "world": absolute.
    theta_prior_frame: Option<String>,
    /// Drop particles that enter the simulator's forbidden zone.
    mask_forbidden: Option<bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerSection {
    peel_step: Option<f64>,
    angle_deadband_deg: Option<f64>,
    explore_rotation_deg: Option<f64>,
    max_steps: Option<usize>,
    clamp_explore: Option<bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostSection {
    c1: Option<f64>,
    c2: Option<f64>,
}

impl FileConfig {
    fn apply(self, cfg: &mut BenchmarkConfig) -> Result<()> {
        let b = self.benchmark;
        if let Some(shapes) = b.shapes {
            cfg.shapes = shapes.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        }
        if let Some(ctrls) = b.controllers {
            cfg.controllers = ctrls.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        }
        set!(b.episodes_per_shape => cfg.episodes_per_shape);
        set!(b.base_seed => cfg.base_seed);
        set!(b.record_wall_time => cfg.record_wall_time);
        set!(b.snapshot_particles => cfg.episode.snapshot_particles);
        if b.csv.is_some() {
            cfg.csv_path = b.csv;
        }
        if b.trajectory_dir.is_some() {
            cfg.trajectory_dir = b.trajectory_dir;
        }
        if b.threads.is_some() {
            cfg.threads = b.threads;
        }

        let g = self.geometry;
        let s = &mut cfg.sampling;
        set!(deg_pair(g.tilt_range_deg) => s.tilt_range);
        set!(g.arc_radius_range => s.arc_radius_range);
        set!(g.corner_radius_range => s.corner_radius_range);
        set!(g.flat_after_ratio_range => s.flat_after_ratio_range);
        set!(g.turn_sign => s.turn_sign);

        let m = self.simulator;
        let sim = &mut cfg.episode.sim;
        set!(m.substeps => sim.substeps);
        set!(deg(m.noise_std_beta_deg) => sim.noise_std_beta);
        set!(deg(m.forbidden_min_deg) => sim.zone.min);
        set!(deg(m.forbidden_max_deg) => sim.zone.max);
        set!(m.forbidden_after_rotation => sim.zone.after_rotation);
        set!(deg(m.initial_relative_phi_deg) => sim.initial_relative_phi);
        set!(m.initial_peeled => sim.initial_peeled);
        set!(m.strap_length => sim.strap_length);
        cfg.sampling.attached_length = sim.attached_length();

        let f = self.filter;
        let fc = &mut cfg.episode.filter;
        set!(f.n_particles => fc.n_particles);
        set!(deg(f.sigma1_deg) => fc.sigma1);
        set!(f.sigma2 => fc.sigma2);
        set!(deg(f.sigma3_deg) => fc.sigma3);
        set!(deg(f.roughening_theta_deg) => fc.roughening_theta);
        set!(f.decay_lambda => fc.decay_lambda);
        set!(f.history_window => fc.history_window);
        set!(f.min_arc_radius => fc.min_arc_radius);
        set!(f.r_prior_mean => fc.r_prior_mean);
        set!(f.r_prior_std => fc.r_prior_std);
        set!(deg_pair(f.theta_prior_range_deg) => fc.theta_prior_range);
        let strap_frame = match f.theta_prior_frame.as_deref() {
            None => fc.theta_prior_anchor.is_some(),
            Some("strap") => true,
            Some("world") => false,
            Some(other) => {
                return Err(Error::Config(format!("theta_prior_frame must be \"strap\" or \"world\", got {other:?}")))
            }
        };
        fc.theta_prior_anchor = strap_frame.then_some(sim.initial_relative_phi);
        let mask = f.mask_forbidden.unwrap_or(fc.feasible_relative.is_some());
        fc.feasible_relative = mask.then_some((sim.zone.min, sim.zone.max));

        let c = self.controller;
        let cc = &mut cfg.episode.controller;
        set!(c.peel_step => cc.peel_step);
        set!(deg(c.angle_deadband_deg) => cc.angle_deadband);
        set!(deg(c.explore_rotation_deg) => cc.explore_rotation);
        set!(c.max_steps => cc.max_steps);
        set!(c.clamp_explore => cc.clamp_explore);

        set!(self.cost.c1 => cfg.episode.cost.c1);
        set!(self.cost.c2 => cfg.episode.cost.c2);
        Ok(())
    }

    fn from_config(cfg: &BenchmarkConfig) -> Self {
        let d = f64::to_degrees;
        let dp = |(a, b): (f64, f64)| (a.to_degrees(), b.to_degrees());
        let e = &cfg.episode;
        FileConfig {
            benchmark: BenchmarkSection {
                shapes: Some(cfg.shapes.iter().map(|s| s.to_string()).collect()),
                controllers: Some(cfg.controllers.iter().map(|c| c.to_string()).collect()),
                episodes_per_shape: Some(cfg.episodes_per_shape),
                base_seed: Some(cfg.base_seed),
                csv: cfg.csv_path.clone(),
                trajectory_dir: cfg.trajectory_dir.clone(),
                record_wall_time: Some(cfg.record_wall_time),
                threads: cfg.threads,
                snapshot_particles: Some(e.snapshot_particles),
            },
            geometry: GeometrySection {
                tilt_range_deg: Some(dp(cfg.sampling.tilt_range)),
                arc_radius_range: Some(cfg.sampling.arc_radius_range),
                corner_radius_range: Some(cfg.sampling.corner_radius_range),
                flat_after_ratio_range: Some(cfg.sampling.flat_after_ratio_range),
                turn_sign: Some(cfg.sampling.turn_sign),
            },
            simulator: SimulatorSection {
                substeps: Some(e.sim.substeps),
                noise_std_beta_deg: Some(d(e.sim.noise_std_beta)),
                forbidden_min_deg: Some(d(e.sim.zone.min)),
                forbidden_max_deg: Some(d(e.sim.zone.max)),
                forbidden_after_rotation: Some(e.sim.zone.after_rotation),
                initial_relative_phi_deg: Some(d(e.sim.initial_relative_phi)),
                initial_peeled: Some(e.sim.initial_peeled),
                strap_length: Some(e.sim.strap_length),
            },
            filter: FilterSection {
                n_particles: Some(e.filter.n_particles),
                sigma1_deg: Some(d(e.filter.sigma1)),
                sigma2: Some(e.filter.sigma2),
                sigma3_deg: Some(d(e.filter.sigma3)),
                roughening_theta_deg: Some(d(e.filter.roughening_theta)),
                decay_lambda: Some(e.filter.decay_lambda),
                history_window: Some(e.filter.history_window),
                min_arc_radius: Some(e.filter.min_arc_radius),
                r_prior_mean: Some(e.filter.r_prior_mean),
                r_prior_std: Some(e.filter.r_prior_std),
                theta_prior_range_deg: Some(dp(e.filter.theta_prior_range)),
                theta_prior_frame: Some(if e.filter.theta_prior_anchor.is_some() { "strap" } else { "world" }.into()),
                mask_forbidden: Some(e.filter.feasible_relative.is_some()),
            },
            controller: ControllerSection {
                peel_step: Some(e.controller.peel_step),
                angle_deadband_deg: Some(d(e.controller.angle_deadband)),
                explore_rotation_deg: Some(d(e.controller.explore_rotation)),
                max_steps: Some(e.controller.max_steps),
                clamp_explore: Some(e.controller.clamp_explore),
            },
            cost: CostSection { c1: Some(e.cost.c1), c2: Some(e.cost.c2) },
        }
    }
}
