//! Peeling controllers and the episode loop.
//!
//! The heuristic controller sees only observations and acts on the filter's
//! weighted-mean estimate. Each iteration realigns the peeled part to the
//! right angle if needed, peels along the bisecting direction, and with
//! probability equal to the health index spends an extra rotation to gather
//! tip-position and surface-angle information. The fully observable baseline
//! runs the same align-then-peel pattern on the true state.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::angle::wrap;
use crate::cost::{action_cost, CostConfig, EpisodeMetrics, Termination};
use crate::error::{Error, Result};
use crate::filter::{FilterConfig, ParticleSet, UpdateKind};
use crate::geometry::SurfaceCurve;
use crate::harness::TrajectoryRecord;
use crate::simulator::{
    apply_peel, apply_rotate, observe, Action, ActionKind, Observation, SimConfig, StepEvent, StepOutcome,
    WorldState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    FullObs,
    Heuristic,
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::FullObs => "full_obs",
            ControllerKind::Heuristic => "heuristic",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "full_obs" | "fullobs" => Ok(ControllerKind::FullObs),
            "heuristic" | "ours" => Ok(ControllerKind::Heuristic),
            other => Err(Error::Config(format!("unknown controller `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    /// Tip displacement of every peeling action, cm.
    pub peel_step: f64,
    /// Misalignment of `phi - theta` from π/2 tolerated before realigning.
    pub angle_deadband: f64,
    /// Rotation of the information-gathering action.
    pub explore_rotation: f64,
    /// Episode budget in executed actions.
    pub max_steps: usize,
    /// Shrink the explore rotation so the estimated angle stays inside the
    /// allowed band.
    pub clamp_explore: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            peel_step: 1.0,
            angle_deadband: 1f64.to_radians(),
            explore_rotation: -FRAC_PI_4,
            max_steps: 500,
            clamp_explore: false,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.peel_step > 0.0) {
            return Err(Error::Config(format!("peel_step must be positive, got {}", self.peel_step)));
        }
        if self.angle_deadband < 0.0 {
            return Err(Error::Config("angle_deadband must be non-negative".into()));
        }
        Ok(())
    }
}

/// Everything an episode needs besides the curve and the seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub sim: SimConfig,
    pub filter: FilterConfig,
    pub controller: ControllerConfig,
    pub cost: CostConfig,
    /// Particles kept per trajectory record; 0 disables snapshots.
    pub snapshot_particles: usize,
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.filter.validate()?;
        self.controller.validate()?;
        self.cost.validate()
    }
}

/// Hooks for inspecting an episode while it runs.
pub trait EpisodeProbe {
    fn on_action(&mut self, _before: &WorldState, _action: &Action, _outcome: &StepOutcome) {}

    /// Whether [`EpisodeProbe::on_update`] should be called; cloning the
    /// particle set for it is skipped otherwise.
    fn observes_updates(&self) -> bool {
        false
    }

    fn on_update(&mut self, _kind: UpdateKind, _before: &ParticleSet, _after: &ParticleSet) {}
}

/// Probe that ignores everything.
pub struct NoProbe;

impl EpisodeProbe for NoProbe {}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub metrics: EpisodeMetrics,
    pub records: Vec<TrajectoryRecord>,
    pub final_world: WorldState,
    pub final_particles: Option<ParticleSet>,
}

/// Control-flow signal after an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop(Termination),
}

/// A running episode: true world, cost bookkeeping and trajectory.
pub struct Episode<'a, P: EpisodeProbe + ?Sized> {
    pub world: WorldState,
    pub cfg: &'a EpisodeConfig,
    pub rng: ChaCha8Rng,
    pub total_cost: f64,
    pub steps: usize,
    pub records: Vec<TrajectoryRecord>,
    pub last_obs: Observation,
    record: bool,
    probe: &'a mut P,
}

impl<'a, P: EpisodeProbe + ?Sized> Episode<'a, P> {
    pub fn new(world: WorldState, cfg: &'a EpisodeConfig, seed: u64, record: bool, probe: &'a mut P) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last_obs = observe(&world, cfg.sim.noise_std_beta, &mut rng);
        Self { world, cfg, rng, total_cost: 0.0, steps: 0, records: Vec::new(), last_obs, record, probe }
    }

    /// Executes one action on the true world, charges its cost and takes a
    /// fresh observation.
    pub fn execute(&mut self, action: Action) -> Result<Flow> {
        if self.steps >= self.cfg.controller.max_steps {
            return Ok(Flow::Stop(Termination::MaxSteps));
        }
        let sim = &self.cfg.sim;
        let outcome = match action.kind {
            ActionKind::Peel => apply_peel(&self.world, action.alpha, action.d, sim.substeps, &sim.zone)?,
            ActionKind::Rotate => apply_rotate(&self.world, action.delta_phi, sim.substeps, &sim.zone)?,
        };
        self.probe.on_action(&self.world, &action, &outcome);
        let cost = action_cost(&outcome, &action, &self.cfg.cost);
        self.total_cost += cost;
        self.steps += 1;
        self.world = outcome.state;
        self.last_obs = observe(&self.world, sim.noise_std_beta, &mut self.rng);
        if self.record {
            self.records.push(TrajectoryRecord {
                step: self.steps,
                action,
                event: outcome.event,
                truth: self.world.velcro_state(),
                observation: self.last_obs,
                estimate: None,
                health_index: None,
                cost,
                particles: None,
            });
        }
        Ok(match outcome.event {
            StepEvent::Ok => Flow::Continue,
            StepEvent::FullyPeeled => Flow::Stop(Termination::FullyPeeled),
            StepEvent::Slack => Flow::Stop(Termination::Slack),
            StepEvent::ForbiddenZone => Flow::Stop(Termination::ForbiddenZone),
        })
    }

    fn annotate(&mut self, ps: &ParticleSet) {
        let snapshot = self.cfg.snapshot_particles;
        if let Some(rec) = self.records.last_mut().filter(|_| self.record) {
            rec.estimate = Some(ps.estimate());
            rec.health_index = Some(ps.health_index());
            if snapshot > 0 {
                rec.particles = Some(ps.snapshot(snapshot));
            }
        }
    }

    fn update(&mut self, ps: &mut ParticleSet, kind: UpdateKind, theta_hat: f64) -> Result<()> {
        let before = self.probe.observes_updates().then(|| ps.clone());
        let fcfg = &self.cfg.filter;
        let obs = self.last_obs;
        match kind {
            UpdateKind::F1 => ps.update_f1(&obs, fcfg, &mut self.rng)?,
            UpdateKind::F2 => ps.update_f2(&obs, fcfg, &mut self.rng)?,
            UpdateKind::F3 => ps.update_f3(theta_hat, fcfg, &mut self.rng)?,
        }
        if let Some(before) = before {
            self.probe.on_update(kind, &before, ps);
        }
        Ok(())
    }

    /// Executes an action and runs the filter through it: prediction
    /// followed by the given measurement updates.
    fn act_and_filter(&mut self, ps: &mut ParticleSet, action: Action, updates: &[UpdateKind]) -> Result<Flow> {
        let flow = self.execute(action)?;
        if flow != Flow::Continue {
            return Ok(flow);
        }
        ps.predict(&action, &self.cfg.filter, &mut self.rng);
        for &kind in updates {
            self.update(ps, kind, 0.0)?;
        }
        self.annotate(ps);
        Ok(Flow::Continue)
    }

    /// One iteration of the partially observable controller.
    pub fn heuristic_step(&mut self, ps: &mut ParticleSet) -> Result<Flow> {
        let ccfg = self.cfg.controller;

        let est = ps.estimate();
        let misalign = FRAC_PI_2 - est.relative_angle();
        if misalign.abs() > ccfg.angle_deadband {
            let flow = self.act_and_filter(ps, Action::rotate(wrap(misalign)), &[UpdateKind::F1, UpdateKind::F2])?;
            if flow != Flow::Continue {
                return Ok(flow);
            }
        }

        let est = ps.estimate();
        let peel = Action::peel(est.theta + FRAC_PI_4, ccfg.peel_step);
        let flow = self.act_and_filter(ps, peel, &[UpdateKind::F1])?;
        if flow != Flow::Continue {
            return Ok(flow);
        }

        let z = ps.health_index();
        if self.rng.gen::<f64>() < z {
            let mut rotation = ccfg.explore_rotation;
            if ccfg.clamp_explore {
                rotation = clamp_rotation(ps.estimate().relative_angle(), rotation, &self.cfg.sim);
            }
            let flow = self.act_and_filter(ps, Action::rotate(rotation), &[UpdateKind::F1, UpdateKind::F2])?;
            if flow != Flow::Continue {
                return Ok(flow);
            }
            if let Some(fit) = ps.fit_theta(&self.cfg.filter) {
                self.update(ps, UpdateKind::F3, fit.theta)?;
                self.annotate(ps);
            }
        }
        Ok(Flow::Continue)
    }

    /// One iteration of the fully observable baseline.
    pub fn full_obs_step(&mut self) -> Result<Flow> {
        let ccfg = self.cfg.controller;
        let misalign = FRAC_PI_2 - self.world.relative_angle();
        if misalign.abs() > ccfg.angle_deadband {
            let flow = self.execute(Action::rotate(wrap(misalign)))?;
            if flow != Flow::Continue {
                return Ok(flow);
            }
        }
        self.execute(Action::peel(self.world.theta() + FRAC_PI_4, ccfg.peel_step))
    }

    fn finish(self, termination: Termination, particles: Option<ParticleSet>) -> EpisodeResult {
        EpisodeResult {
            metrics: EpisodeMetrics::new(self.total_cost, self.steps, termination),
            records: self.records,
            final_world: self.world,
            final_particles: particles,
        }
    }
}

// Keeps `relative + rotation` at least a degree inside the allowed band.
fn clamp_rotation(relative: f64, rotation: f64, sim: &SimConfig) -> f64 {
    let margin = 1f64.to_radians();
    let target = (relative + rotation).clamp(sim.zone.min + margin, sim.zone.max - margin);
    target - relative
}

/// Runs one seeded episode of `kind` on `curve`.
///
/// `record` controls whether per-action trajectory records are kept. The
/// result is a pure function of the inputs.
pub fn run_episode<P: EpisodeProbe + ?Sized>(
    curve: SurfaceCurve,
    kind: ControllerKind,
    cfg: &EpisodeConfig,
    seed: u64,
    record: bool,
    probe: &mut P,
) -> Result<EpisodeResult> {
    let world = cfg.sim.initial_world(curve);
    let mut ep = Episode::new(world, cfg, seed, record, probe);
    match kind {
        ControllerKind::FullObs => loop {
            if let Flow::Stop(t) = ep.full_obs_step()? {
                return Ok(ep.finish(t, None));
            }
        },
        ControllerKind::Heuristic => {
            let first = ep.last_obs;
            let mut ps = ParticleSet::init(&first, &cfg.filter, &mut ep.rng);
            loop {
                let flow = match ep.heuristic_step(&mut ps) {
                    Ok(flow) => flow,
                    Err(Error::FilterDivergence(_)) => Flow::Stop(Termination::FilterDivergence),
                    Err(e) => return Err(e),
                };
                if let Flow::Stop(t) = flow {
                    return Ok(ep.finish(t, Some(ps)));
                }
            }
        }
    }
}
