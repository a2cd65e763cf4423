//! Particle filter over the peeling state with state-space decomposition.
//!
//! Three measurement updates act on disjoint coordinate subsets:
//!
//! | update | measurement                | resampled coordinates |
//! |--------|----------------------------|-----------------------|
//! | F1     | force direction `beta`     | `phi`                 |
//! | F2     | tip position `(t_x, t_y)`  | `h_x, h_y, r`         |
//! | F3     | auxiliary surface angle    | `theta`               |
//!
//! Resampling is systematic over the particle weights, but only the designated
//! coordinates are copied from the drawn source particles; every other
//! coordinate stays in its slot. Weights are normalised by their maximum so
//! that the health index thresholds live on a fixed `[0, 1]` scale.

mod aux_fit;
mod resample;

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use aux_fit::{fit_theta_aux, AuxFit, AuxFitParams, FitModel, HingeSample};
pub use resample::systematic;

use crate::angle::{circular_mean, wrap};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::simulator::{solve_quasi_static_step, Action, ActionKind, Observation, VelcroState};

/// Filter parameters. Angles in radians, lengths in cm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub n_particles: usize,
    /// Force-direction noise.
    pub sigma1: f64,
    /// Tip-position noise.
    pub sigma2: f64,
    /// Surface-angle noise around the auxiliary estimate.
    pub sigma3: f64,
    /// Process noise added to `theta` on every peeling prediction, scaled by
    /// `1 + z` with `z` the current health index.
    pub roughening_theta: f64,
    pub decay_lambda: f64,
    pub history_window: usize,
    pub min_arc_radius: f64,
    pub r_prior_mean: f64,
    pub r_prior_std: f64,
    pub theta_prior_range: (f64, f64),
    /// Assumed `phi - theta` at the first observation. When set,
    /// `theta_prior_range` is taken relative to the surface angle this implies
    /// (`beta - pi - anchor`); when `None` it is absolute.
    pub theta_prior_anchor: Option<f64>,
    /// Open band of `phi - theta` every live state lies in. Particles predicted
    /// outside it get weight 0 in the next update, like slack ones.
    pub feasible_relative: Option<(f64, f64)>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            n_particles: 500,
            sigma1: 1.2f64.to_radians(),
            sigma2: 0.75,
            sigma3: 6.5f64.to_radians(),
            roughening_theta: 2.5f64.to_radians(),
            decay_lambda: 0.9,
            history_window: 30,
            min_arc_radius: 8.0,
            r_prior_mean: 10.0,
            r_prior_std: 0.5,
            theta_prior_range: (-25f64.to_radians(), 25f64.to_radians()),
            theta_prior_anchor: Some(FRAC_PI_2),
            feasible_relative: Some((5f64.to_radians(), 175f64.to_radians())),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_particles == 0 {
            return bad("n_particles must be positive".into());
        }
        for (name, v) in [("sigma1", self.sigma1), ("sigma2", self.sigma2), ("sigma3", self.sigma3)] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.decay_lambda > 0.0 && self.decay_lambda < 1.0) {
            return bad(format!("decay_lambda must lie in (0, 1), got {}", self.decay_lambda));
        }
        if self.roughening_theta < 0.0 || self.r_prior_std < 0.0 {
            return bad("roughening_theta and r_prior_std must be non-negative".into());
        }
        if !(self.r_prior_mean > 0.0) {
            return bad("r_prior_mean must be positive".into());
        }
        let (lo, hi) = self.theta_prior_range;
        if !(lo <= hi) {
            return bad(format!("empty theta prior range ({lo}, {hi})"));
        }
        if let Some((lo, hi)) = self.feasible_relative {
            if !(lo < hi) {
                return bad(format!("empty feasible band ({lo}, {hi})"));
            }
        }
        Ok(())
    }

    pub fn aux_params(&self) -> AuxFitParams {
        AuxFitParams {
            decay_lambda: self.decay_lambda,
            window: self.history_window,
            min_arc_radius: self.min_arc_radius,
        }
    }
}

/// Which measurement update last touched the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateKind {
    F1,
    F2,
    F3,
}

impl UpdateKind {
    fn name(self) -> &'static str {
        match self {
            UpdateKind::F1 => "F1",
            UpdateKind::F2 => "F2",
            UpdateKind::F3 => "F3",
        }
    }
}

/// A particle with its weight, as written to trajectory dumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleSnapshot {
    pub state: VelcroState,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSet {
    pub particles: Vec<VelcroState>,
    pub weights: Vec<f64>,
    pub hinge_history: Vec<HingeSample>,
    /// Number of predictions applied so far.
    pub step: usize,
    // Particles whose last prediction went slack; excluded from the next update.
    slack: Vec<bool>,
    // The ensemble the current weights were computed for, when a resample
    // has since replaced some coordinates.
    weighted: Option<Vec<VelcroState>>,
}

impl ParticleSet {
    /// Builds an ensemble from an explicit list of states, all weights 1.
    pub fn from_particles(particles: Vec<VelcroState>) -> Self {
        let n = particles.len();
        Self { particles, weights: vec![1.0; n], hinge_history: Vec::new(), step: 0, slack: vec![false; n], weighted: None }
    }

    /// Samples the initial ensemble around the first observation.
    pub fn init<R: Rng + ?Sized>(first_obs: &Observation, cfg: &FilterConfig, rng: &mut R) -> Self {
        let r_prior = Normal::new(cfg.r_prior_mean, cfg.r_prior_std.max(0.0)).expect("finite prior");
        let phi_noise = Normal::new(0.0, cfg.sigma1.max(0.0)).expect("finite sigma1");
        let centre = cfg.theta_prior_anchor.map_or(0.0, |a| first_obs.beta - PI - a);
        let (lo, hi) = (cfg.theta_prior_range.0 + centre, cfg.theta_prior_range.1 + centre);
        let tip = first_obs.tip();
        let particles = (0..cfg.n_particles)
            .map(|_| {
                let r = loop {
                    let r = r_prior.sample(rng);
                    if r > 0.0 {
                        break r;
                    }
                };
                let phi = wrap(first_obs.beta - PI + phi_noise.sample(rng));
                let theta = wrap(if lo < hi { rng.gen_range(lo..hi) } else { lo });
                let h = tip - r * Point2::unit(phi);
                VelcroState { h_x: h.x, h_y: h.y, theta, phi, r }
            })
            .collect();
        Self::from_particles(particles)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Propagates every particle through the action.
    ///
    /// Peeling uses each particle's own `theta` in the closed-form step and
    /// then roughens `theta`. A particle whose step would go slack, or that
    /// leaves the feasible band, keeps its state and gets weight 0.
    pub fn predict<R: Rng + ?Sized>(&mut self, action: &Action, cfg: &FilterConfig, rng: &mut R) {
        self.step += 1;
        self.weighted = None;
        match action.kind {
            ActionKind::Rotate => {
                for p in &mut self.particles {
                    p.phi = wrap(p.phi + action.delta_phi);
                }
            }
            ActionKind::Peel => {
                let scale = 1.0 + self.health_index();
                let sigma = cfg.roughening_theta * scale;
                let rough = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite roughening"));
                for (i, p) in self.particles.iter_mut().enumerate() {
                    match solve_quasi_static_step(p, action.alpha, action.d) {
                        Ok((_, next)) => *p = next,
                        Err(_) => self.slack[i] = true,
                    }
                    if let Some(rough) = &rough {
                        p.theta = wrap(p.theta + rough.sample(rng));
                    }
                }
            }
        }
        if let Some((lo, hi)) = cfg.feasible_relative {
            for (p, dead) in self.particles.iter().zip(&mut self.slack) {
                let rel = p.relative_angle();
                *dead |= !(rel > lo && rel < hi);
            }
        }
        for (w, &dead) in self.weights.iter_mut().zip(&self.slack) {
            if dead {
                *w = 0.0;
            }
        }
    }

    fn reweight_and_resample<R: Rng + ?Sized>(
        &mut self,
        kind: UpdateKind,
        neg_log_lik: impl Fn(&VelcroState) -> f64,
        copy: impl Fn(&mut VelcroState, &VelcroState),
        rng: &mut R,
    ) -> Result<()> {
        if self.particles.is_empty() {
            return Err(Error::Domain("empty particle set".into()));
        }
        let mut weights: Vec<f64> = self
            .particles
            .iter()
            .zip(&self.slack)
            .map(|(p, &dead)| if dead { 0.0 } else { (-neg_log_lik(p)).exp() })
            .collect();
        let max = weights.iter().copied().fold(0.0, f64::max);
        if !(max > 0.0) || !max.is_finite() {
            return Err(Error::FilterDivergence(kind.name()));
        }
        for w in &mut weights {
            *w /= max;
        }
        let sources = systematic(&weights, rng).ok_or(Error::FilterDivergence(kind.name()))?;
        let before = self.particles.clone();
        for (slot, &src) in self.particles.iter_mut().zip(&sources) {
            copy(slot, &before[src]);
        }
        self.weights = weights;
        self.weighted = Some(before);
        self.slack.iter_mut().for_each(|s| *s = false);
        Ok(())
    }

    /// Force-direction update; resamples `phi` only.
    pub fn update_f1<R: Rng + ?Sized>(&mut self, obs: &Observation, cfg: &FilterConfig, rng: &mut R) -> Result<()> {
        let two_var = 2.0 * cfg.sigma1 * cfg.sigma1;
        self.reweight_and_resample(
            UpdateKind::F1,
            |p| {
                let e = wrap(obs.beta - p.phi - PI);
                e * e / two_var
            },
            |dst, src| dst.phi = src.phi,
            rng,
        )
    }

    /// Tip-position update; resamples `(h_x, h_y, r)` jointly and records the
    /// resulting mean hinge in the history.
    pub fn update_f2<R: Rng + ?Sized>(&mut self, obs: &Observation, cfg: &FilterConfig, rng: &mut R) -> Result<()> {
        let two_var = 2.0 * cfg.sigma2 * cfg.sigma2;
        let tip = obs.tip();
        self.reweight_and_resample(
            UpdateKind::F2,
            |p| (tip - p.tip()).norm_sq() / two_var,
            |dst, src| {
                dst.h_x = src.h_x;
                dst.h_y = src.h_y;
                dst.r = src.r;
            },
            rng,
        )?;
        let est = self.estimate();
        self.hinge_history.push(HingeSample { point: est.hinge(), step: self.step });
        let keep = cfg.history_window.max(3);
        if self.hinge_history.len() > keep {
            let excess = self.hinge_history.len() - keep;
            self.hinge_history.drain(..excess);
        }
        Ok(())
    }

    /// Surface-angle update against the auxiliary estimate; resamples `theta` only.
    pub fn update_f3<R: Rng + ?Sized>(&mut self, theta_hat: f64, cfg: &FilterConfig, rng: &mut R) -> Result<()> {
        let two_var = 2.0 * cfg.sigma3 * cfg.sigma3;
        self.reweight_and_resample(
            UpdateKind::F3,
            |p| {
                let e = wrap(p.theta - theta_hat);
                e * e / two_var
            },
            |dst, src| dst.theta = src.theta,
            rng,
        )
    }

    /// Runs the auxiliary line/arc fit over the recorded hinge estimates.
    pub fn fit_theta(&self, cfg: &FilterConfig) -> Option<AuxFit> {
        fit_theta_aux(&self.hinge_history, &cfg.aux_params())
    }

    /// Fraction of weights below 0.1 minus fraction above 0.9, floored at 0.
    pub fn health_index(&self) -> f64 {
        if self.weights.is_empty() {
            return 0.0;
        }
        let n = self.weights.len() as f64;
        let low = self.weights.iter().filter(|&&w| w < 0.1).count() as f64;
        let high = self.weights.iter().filter(|&&w| w > 0.9).count() as f64;
        ((low - high) / n).max(0.0)
    }

    /// Weighted mean state; angles use circular means.
    ///
    /// Right after an update the weights are applied to the particles they
    /// were computed for, i.e. before resampling.
    pub fn estimate(&self) -> VelcroState {
        let particles = self.weighted.as_deref().unwrap_or(&self.particles);
        let total: f64 = self.weights.iter().sum();
        let uniform = !(total > 0.0);
        let w = |i: usize| if uniform { 1.0 } else { self.weights[i] };
        let norm = if uniform { particles.len() as f64 } else { total };
        let mut h_x = 0.0;
        let mut h_y = 0.0;
        let mut r = 0.0;
        for (i, p) in particles.iter().enumerate() {
            h_x += w(i) * p.h_x;
            h_y += w(i) * p.h_y;
            r += w(i) * p.r;
        }
        let phi = circular_mean(particles.iter().enumerate().map(|(i, p)| (p.phi, w(i))));
        let theta = circular_mean(particles.iter().enumerate().map(|(i, p)| (p.theta, w(i))));
        VelcroState { h_x: h_x / norm, h_y: h_y / norm, theta, phi, r: r / norm }
    }

    /// Evenly strided subset of at most `max` particles.
    pub fn snapshot(&self, max: usize) -> Vec<ParticleSnapshot> {
        if max == 0 || self.is_empty() {
            return Vec::new();
        }
        let stride = self.len().div_ceil(max);
        self.particles
            .iter()
            .zip(&self.weights)
            .step_by(stride)
            .map(|(state, &weight)| ParticleSnapshot { state: *state, weight })
            .collect()
    }
}
