//! Potential, action energy cost and episode metrics.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{Action, ActionKind, PathSample, StepOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostConfig {
    /// Weight per cm of peeled length.
    pub c1: f64,
    /// Weight per radian of rotation.
    pub c2: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self { c1: 1.0, c2: 1.0 }
    }
}

impl CostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c1 > 0.0 && self.c2 > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("cost weights must be positive (c1 = {}, c2 = {})", self.c1, self.c2)))
        }
    }
}

/// `1 + (phi - theta - π/2)^2`, minimal when the peeled part is perpendicular
/// to the attached part.
pub fn potential(phi: f64, theta: f64) -> f64 {
    let dev = phi - theta - FRAC_PI_2;
    1.0 + dev * dev
}

fn trapezoid(samples: &[PathSample], coord: impl Fn(&PathSample) -> f64) -> f64 {
    samples
        .windows(2)
        .map(|w| {
            let ua = potential(w[0].phi, w[0].theta);
            let ub = potential(w[1].phi, w[1].theta);
            0.5 * (ua + ub) * (coord(&w[1]) - coord(&w[0]))
        })
        .sum()
}

/// Integrates the potential along the path of an executed action: over `r`
/// for peeling actions and over `phi` for rotations.
pub fn action_cost(outcome: &StepOutcome, action: &Action, cfg: &CostConfig) -> f64 {
    match action.kind {
        ActionKind::Peel => cfg.c1 * trapezoid(&outcome.path_samples, |s| s.r),
        ActionKind::Rotate => cfg.c2 * trapezoid(&outcome.path_samples, |s| s.phi).abs(),
    }
}

/// How an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    FullyPeeled,
    Slack,
    ForbiddenZone,
    FilterDivergence,
    MaxSteps,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::FullyPeeled => "fully_peeled",
            Termination::Slack => "slack",
            Termination::ForbiddenZone => "forbidden_zone",
            Termination::FilterDivergence => "filter_divergence",
            Termination::MaxSteps => "max_steps",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub total_cost: f64,
    pub success: bool,
    pub steps: usize,
    pub terminal_event: Termination,
}

impl EpisodeMetrics {
    pub fn new(total_cost: f64, steps: usize, terminal_event: Termination) -> Self {
        Self { total_cost, success: terminal_event == Termination::FullyPeeled, steps, terminal_event }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub episodes: usize,
    pub successes: usize,
    /// Mean cost over successful episodes; NaN when none succeeded.
    pub mean_cost_success: f64,
    pub mean_cost_all: f64,
    pub success_rate: f64,
}

pub fn aggregate(episodes: &[EpisodeMetrics]) -> Result<Aggregate> {
    if episodes.is_empty() {
        return Err(Error::Domain("cannot aggregate an empty episode set".into()));
    }
    let n = episodes.len();
    let successes = episodes.iter().filter(|e| e.success).count();
    let sum_success: f64 = episodes.iter().filter(|e| e.success).map(|e| e.total_cost).sum();
    let sum_all: f64 = episodes.iter().map(|e| e.total_cost).sum();
    Ok(Aggregate {
        episodes: n,
        successes,
        mean_cost_success: if successes > 0 { sum_success / successes as f64 } else { f64::NAN },
        mean_cost_all: sum_all / n as f64,
        success_rate: 100.0 * successes as f64 / n as f64,
    })
}
