//! Quasi-static simulation, state estimation and control for peeling a
//! Velcro strap off an unknown surface using only tip-position and
//! force-direction feedback.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: arc-length parametrised attached surfaces (flat, arc, corner).
//! - [`simulator`]: the ground-truth world, peeling/rotation actions and observations.
//! - [`cost`]: potential, per-action energy cost and episode aggregation.
//! - [`filter`]: the decomposed particle filter and the auxiliary surface-angle fit.
//! - [`controller`]: the partially observable heuristic controller and the
//!   fully observable baseline, plus the episode loop.
//! - [`harness`]: benchmark configuration, seeded episode runs, CSV/JSONL output.

pub mod angle;
pub mod controller;
pub mod cost;
pub mod error;
pub mod filter;
pub mod geometry;
pub mod harness;
pub mod simulator;

pub use error::{Error, Result};
pub use geometry::{Point2, ShapeKind, SurfaceCurve};
pub use simulator::{Action, ActionKind, Observation, StepEvent, StepOutcome, VelcroState, WorldState};
