//! Ground-truth quasi-static peeling model.
//!
//! The peeled part is a taut straight segment from the hinge to the gripper
//! tip, so a configuration is fully described by the peeled arc length along
//! the surface and the peel angle `phi`. Peeling actions move the tip and
//! advance the hinge along the true surface; non-peeling actions rotate the
//! peeled part about a fixed hinge.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::angle::wrap;
use crate::error::{Error, Result};
use crate::geometry::{Point2, SurfaceCurve};

/// Number of bisection halvings used to locate the peeled arc length.
pub const BISECTION_ITERS: usize = 80;

/// Peeling state `[h_x, h_y, theta, phi, r]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelcroState {
    pub h_x: f64,
    pub h_y: f64,
    pub theta: f64,
    pub phi: f64,
    pub r: f64,
}

impl VelcroState {
    pub fn hinge(&self) -> Point2 {
        Point2::new(self.h_x, self.h_y)
    }

    pub fn tip(&self) -> Point2 {
        self.hinge() + self.r * Point2::unit(self.phi)
    }

    /// `phi - theta` wrapped into `(-π, π]`.
    pub fn relative_angle(&self) -> f64 {
        wrap(self.phi - self.theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Peel,
    Rotate,
}

/// Action `[alpha, d, s, delta_phi]`; `kind` carries the binary `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub alpha: f64,
    pub d: f64,
    pub kind: ActionKind,
    pub delta_phi: f64,
}

impl Action {
    pub fn peel(alpha: f64, d: f64) -> Self {
        Self { alpha, d, kind: ActionKind::Peel, delta_phi: 0.0 }
    }

    pub fn rotate(delta_phi: f64) -> Self {
        Self { alpha: 0.0, d: 0.0, kind: ActionKind::Rotate, delta_phi }
    }

    pub fn s(&self) -> u8 {
        match self.kind {
            ActionKind::Peel => 0,
            ActionKind::Rotate => 1,
        }
    }

    pub fn is_valid(&self) -> bool {
        match self.kind {
            ActionKind::Peel => self.d > 0.0 && self.delta_phi == 0.0,
            ActionKind::Rotate => self.d == 0.0,
        }
    }
}

/// Observation `[t_x, t_y, beta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t_x: f64,
    pub t_y: f64,
    pub beta: f64,
}

impl Observation {
    pub fn tip(&self) -> Point2 {
        Point2::new(self.t_x, self.t_y)
    }
}

/// Closed-form peeling transition on a locally straight surface.
///
/// Returns the peeled increment `dr` and the next state. `theta` is carried
/// over unchanged since the transition does not constrain it.
pub fn solve_quasi_static_step(state: &VelcroState, alpha: f64, d: f64) -> Result<(f64, VelcroState)> {
    if d == 0.0 {
        return Ok((0.0, *state));
    }
    let a = Point2::unit(alpha);
    let tip = state.tip() + d * a;
    let w = state.r * Point2::unit(state.phi);
    // r + v·u and ‖v‖² − r² expanded so neither cancels.
    let denom = 2.0 * (state.r * (1.0 + (state.phi - state.theta).cos()) + d * (alpha - state.theta).cos());
    if !(denom > 1e-12) {
        return Err(Error::Numeric(format!("degenerate peel denominator {denom}")));
    }
    let dr = d * (2.0 * w.dot(a) + d) / denom;
    let u = Point2::unit(state.theta);
    if dr < 0.0 {
        return Err(Error::Slack { dr });
    }
    let hinge = state.hinge() + dr * u;
    let next = VelcroState {
        h_x: hinge.x,
        h_y: hinge.y,
        theta: state.theta,
        phi: (tip - hinge).angle(),
        r: state.r + dr,
    };
    Ok((dr, next))
}

/// Band of `phi - theta` outside which an episode fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForbiddenZone {
    pub min: f64,
    pub max: f64,
    /// Also check after non-peeling actions, not only after peels.
    pub after_rotation: bool,
}

impl Default for ForbiddenZone {
    fn default() -> Self {
        Self { min: 5f64.to_radians(), max: 175f64.to_radians(), after_rotation: true }
    }
}

impl ForbiddenZone {
    pub fn contains(&self, relative_angle: f64) -> bool {
        !(relative_angle > self.min && relative_angle < self.max)
    }
}

/// Simulator settings shared by every episode. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Substeps per peeling action.
    pub substeps: usize,
    pub zone: ForbiddenZone,
    /// Standard deviation of the force-direction noise.
    pub noise_std_beta: f64,
    /// Initial `phi - theta` at the start of the strap.
    pub initial_relative_phi: f64,
    pub initial_peeled: f64,
    pub strap_length: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            substeps: 32,
            zone: ForbiddenZone::default(),
            noise_std_beta: 1f64.to_radians(),
            initial_relative_phi: PI / 2.0,
            initial_peeled: 10.0,
            strap_length: 60.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.substeps == 0 {
            return Err(Error::Config("substeps must be at least 1".into()));
        }
        if !(self.noise_std_beta >= 0.0) {
            return Err(Error::Config("noise_std_beta must be non-negative".into()));
        }
        if !(self.initial_peeled > 0.0 && self.strap_length > self.initial_peeled) {
            return Err(Error::Config(format!(
                "need 0 < initial_peeled < strap_length (got {} and {})",
                self.initial_peeled, self.strap_length
            )));
        }
        if !(self.zone.min < self.zone.max) {
            return Err(Error::Config("forbidden zone bounds are inverted".into()));
        }
        Ok(())
    }

    /// Attached length implied by the strap geometry.
    pub fn attached_length(&self) -> f64 {
        self.strap_length - self.initial_peeled
    }

    pub fn initial_world(&self, curve: SurfaceCurve) -> WorldState {
        let theta0 = curve.tangent_unchecked(0.0);
        WorldState {
            curve,
            ell: 0.0,
            phi: theta0 + self.initial_relative_phi,
            initial_peeled: self.initial_peeled,
            strap_length: self.strap_length,
        }
    }
}

/// True configuration of the strap on its surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub curve: SurfaceCurve,
    /// Arc length peeled off the surface so far.
    pub ell: f64,
    pub phi: f64,
    pub initial_peeled: f64,
    pub strap_length: f64,
}

impl WorldState {
    pub fn new(curve: SurfaceCurve, phi: f64, initial_peeled: f64, strap_length: f64) -> Result<Self> {
        if !(initial_peeled > 0.0) {
            return Err(Error::Domain(format!("initial peeled length must be positive, got {initial_peeled}")));
        }
        if strap_length < initial_peeled {
            return Err(Error::Domain("strap shorter than its initially peeled part".into()));
        }
        Ok(Self { curve, ell: 0.0, phi, initial_peeled, strap_length })
    }

    /// Standard 60 cm strap with 10 cm peeled and the peeled part at
    /// `relative_phi` from the surface tangent at the start.
    pub fn initial(curve: SurfaceCurve, relative_phi: f64) -> Self {
        let theta0 = curve.tangent_unchecked(0.0);
        Self { curve, ell: 0.0, phi: theta0 + relative_phi, initial_peeled: 10.0, strap_length: 60.0 }
    }

    pub fn r(&self) -> f64 {
        self.initial_peeled + self.ell
    }

    pub fn hinge(&self) -> Point2 {
        self.curve.point_unchecked(self.ell)
    }

    pub fn theta(&self) -> f64 {
        self.curve.tangent_unchecked(self.ell)
    }

    pub fn tip(&self) -> Point2 {
        self.hinge() + self.r() * Point2::unit(self.phi)
    }

    pub fn relative_angle(&self) -> f64 {
        wrap(self.phi - self.theta())
    }

    pub fn velcro_state(&self) -> VelcroState {
        let h = self.hinge();
        VelcroState { h_x: h.x, h_y: h.y, theta: self.theta(), phi: self.phi, r: self.r() }
    }

    pub fn remaining(&self) -> f64 {
        self.curve.attached_length - self.ell
    }

    fn sample(&self) -> PathSample {
        PathSample { r: self.r(), phi: self.phi, theta: self.theta() }
    }

    // g(ell') = |tip - p(ell')| - (r0 + ell')
    fn taut_residual(&self, tip: Point2, ell: f64) -> f64 {
        (tip - self.curve.point_unchecked(ell)).norm() - (self.initial_peeled + ell)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepEvent {
    Ok,
    Slack,
    ForbiddenZone,
    FullyPeeled,
}

/// Micro-state visited during an action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub r: f64,
    pub phi: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub state: WorldState,
    pub event: StepEvent,
    pub path_samples: Vec<PathSample>,
    /// Gripper tip after the action, tracked independently of the state.
    pub tip: Point2,
}

fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    // f(lo) >= 0 > f(hi) is maintained.
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Moves the tip by `d` along `alpha`, split into `substeps` pieces, and
/// solves the curved tautness constraint for the new peeled arc length.
pub fn apply_peel(
    world: &WorldState,
    alpha: f64,
    d: f64,
    substeps: usize,
    zone: &ForbiddenZone,
) -> Result<StepOutcome> {
    if !(d > 0.0) || substeps == 0 {
        return Err(Error::Domain(format!("peel needs d > 0 and substeps >= 1 (d = {d}, substeps = {substeps})")));
    }
    let start_tip = world.tip();
    let dir = Point2::unit(alpha);
    let end_ell = world.curve.attached_length;
    let mut state = *world;
    let mut path = Vec::with_capacity(substeps + 1);
    path.push(state.sample());
    let mut tip = start_tip;

    for k in 1..=substeps {
        let prev_tip = tip;
        tip = start_tip + (d * k as f64 / substeps as f64) * dir;
        let g_lo = state.taut_residual(tip, state.ell);
        if g_lo < -1e-12 {
            return Ok(StepOutcome { state, event: StepEvent::Slack, path_samples: path, tip });
        }
        if state.taut_residual(tip, end_ell) > 0.0 {
            // Strap end detaches within this substep: locate the tip position
            // where the hinge reaches the end of the attached region.
            let t = bisect(
                |t| -state.taut_residual(prev_tip + t * (tip - prev_tip), end_ell),
                0.0,
                1.0,
            );
            tip = prev_tip + t * (tip - prev_tip);
            state.ell = end_ell;
            state.phi = (tip - state.hinge()).angle();
            path.push(state.sample());
            return Ok(StepOutcome { state, event: StepEvent::FullyPeeled, path_samples: path, tip });
        }
        let ell = if g_lo <= 0.0 {
            state.ell
        } else {
            bisect(|l| state.taut_residual(tip, l), state.ell, end_ell)
        };
        state.ell = ell;
        state.phi = (tip - state.hinge()).angle();
        path.push(state.sample());
    }

    let event = if zone.contains(state.relative_angle()) { StepEvent::ForbiddenZone } else { StepEvent::Ok };
    Ok(StepOutcome { state, event, path_samples: path, tip })
}

/// Rotates the taut peeled part about the fixed hinge.
pub fn apply_rotate(world: &WorldState, delta_phi: f64, substeps: usize, zone: &ForbiddenZone) -> Result<StepOutcome> {
    if !(delta_phi.abs() < PI) {
        return Err(Error::Domain(format!("rotation {delta_phi} must satisfy |delta_phi| < π")));
    }
    let substeps = substeps.max(1);
    let mut state = *world;
    let theta = world.theta();
    let r = world.r();
    let path = (0..=substeps)
        .map(|k| PathSample { r, phi: world.phi + delta_phi * k as f64 / substeps as f64, theta })
        .collect();
    state.phi = world.phi + delta_phi;
    let event = if zone.after_rotation && zone.contains(state.relative_angle()) {
        StepEvent::ForbiddenZone
    } else {
        StepEvent::Ok
    };
    Ok(StepOutcome { state, event, path_samples: path, tip: state.tip() })
}

/// Exact tip position and force direction `phi + π` corrupted by Gaussian noise.
pub fn observe<R: Rng + ?Sized>(world: &WorldState, noise_std_beta: f64, rng: &mut R) -> Observation {
    let tip = world.tip();
    let noise = if noise_std_beta > 0.0 {
        Normal::new(0.0, noise_std_beta).expect("finite std").sample(rng)
    } else {
        0.0
    };
    Observation { t_x: tip.x, t_y: tip.y, beta: wrap(world.phi + PI + noise) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_curve, ShapeKind};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn upright() -> VelcroState {
        VelcroState { h_x: 0.0, h_y: 0.0, theta: 0.0, phi: FRAC_PI_2, r: 10.0 }
    }

    fn flat_world() -> WorldState {
        WorldState::new(SurfaceCurve::flat(0.0, 50.0).unwrap(), FRAC_PI_2, 10.0, 60.0).unwrap()
    }

    // Oracle: bisection on |E - H(dr)| - (r + dr) along the tangent.
    fn dr_by_bisection(s: &VelcroState, alpha: f64, d: f64) -> f64 {
        let tip = s.tip() + d * Point2::unit(alpha);
        let u = Point2::unit(s.theta);
        let f = |dr: f64| (tip - (s.hinge() + dr * u)).norm() - (s.r + dr);
        let (mut lo, mut hi) = (0.0, 10.0 * d + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn closed_form_step_examples() {
        let (dr, next) = solve_quasi_static_step(&upright(), FRAC_PI_4, 1.0).unwrap();
        assert_abs_diff_eq!(dr, SQRT_2 / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dr, dr_by_bisection(&upright(), FRAC_PI_4, 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(next.h_x, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(next.h_y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(next.r, 10.7071068, epsilon = 1e-7);
        assert_abs_diff_eq!(next.phi, FRAC_PI_2, epsilon = 1e-12);

        let (dr, _) = solve_quasi_static_step(&upright(), FRAC_PI_2, 1.0).unwrap();
        assert_abs_diff_eq!(dr, 1.05, epsilon = 1e-12);
        assert_abs_diff_eq!(dr, dr_by_bisection(&upright(), FRAC_PI_2, 1.0), epsilon = 1e-12);

        let (dr, next) = solve_quasi_static_step(&upright(), 1.3, 0.0).unwrap();
        assert_eq!(dr, 0.0);
        assert_eq!(next, upright());
    }

    #[test]
    fn closed_form_satisfies_constraints() {
        let s = VelcroState { h_x: 1.0, h_y: -2.0, theta: 0.3, phi: 1.9, r: 12.0 };
        let (alpha, d) = (1.2, 0.8);
        let (dr, n) = solve_quasi_static_step(&s, alpha, d).unwrap();
        let lhs = s.r * Point2::unit(s.phi) + d * Point2::unit(alpha);
        let rhs = dr * Point2::unit(s.theta) + n.r * Point2::unit(n.phi);
        assert_abs_diff_eq!(lhs.x, rhs.x, epsilon = 1e-9);
        assert_abs_diff_eq!(lhs.y, rhs.y, epsilon = 1e-9);
        assert_abs_diff_eq!(n.h_x, s.h_x + dr * s.theta.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(n.h_y, s.h_y + dr * s.theta.sin(), epsilon = 1e-12);
        assert_eq!(n.theta, s.theta);
    }

    #[test]
    fn pushing_toward_the_hinge_is_slack() {
        let err = solve_quasi_static_step(&upright(), -FRAC_PI_2, 1.0).unwrap_err();
        assert!(matches!(err, Error::Slack { .. }));
        let out = apply_peel(&flat_world(), -FRAC_PI_2, 1.0, 8, &ForbiddenZone::default()).unwrap();
        assert_eq!(out.event, StepEvent::Slack);
    }

    #[test]
    fn flat_peel_matches_closed_form() {
        let out = apply_peel(&flat_world(), FRAC_PI_4, 1.0, 32, &ForbiddenZone::default()).unwrap();
        assert_eq!(out.event, StepEvent::Ok);
        assert_abs_diff_eq!(out.state.ell, SQRT_2 / 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(out.state.phi, FRAC_PI_2, epsilon = 1e-9);
        assert_eq!(out.path_samples.len(), 33);
        assert_eq!(out.path_samples[0], PathSample { r: 10.0, phi: FRAC_PI_2, theta: 0.0 });
    }

    #[test]
    fn arc_peel_converges_and_drifts() {
        let curve = SurfaceCurve::arc(25.0, 0.0, -1.0, 50.0).unwrap();
        let w = WorldState::new(curve, FRAC_PI_2, 10.0, 60.0).unwrap();
        let zone = ForbiddenZone::default();
        let coarse = apply_peel(&w, FRAC_PI_4, 1.0, 32, &zone).unwrap();
        let fine = apply_peel(&w, FRAC_PI_4, 1.0, 1024, &zone).unwrap();
        assert!((coarse.state.ell - fine.state.ell).abs() < 1e-4);
        assert!(coarse.state.ell > 0.0);
        assert!((coarse.state.relative_angle() - FRAC_PI_2).abs() > 1e-4);
        // Tautness holds against the independently tracked tip.
        assert_abs_diff_eq!(fine.tip.distance(fine.state.hinge()), fine.state.r(), epsilon = 1e-9);
    }

    #[test]
    fn arc_single_substep_matches_oracle() {
        // Whole action in one substep: the final tip is known in closed form,
        // so an independent bisection on the circle gives the exact answer.
        let curve = SurfaceCurve::arc(25.0, 0.0, -1.0, 50.0).unwrap();
        let w = WorldState::new(curve, FRAC_PI_2, 10.0, 60.0).unwrap();
        let out = apply_peel(&w, FRAC_PI_4, 1.0, 1, &ForbiddenZone::default()).unwrap();
        let tip = Point2::new(0.0, 10.0) + Point2::unit(FRAC_PI_4);
        let g = |l: f64| {
            let p = Point2::new(25.0 * (l / 25.0).sin(), -25.0 * (1.0 - (l / 25.0).cos()));
            (tip - p).norm() - (10.0 + l)
        };
        let (mut lo, mut hi) = (0.0, 50.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if g(m) > 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        assert_abs_diff_eq!(out.state.ell, lo, epsilon = 1e-9);
    }

    #[test]
    fn peel_off_the_end() {
        let mut w = flat_world();
        w.ell = 49.9;
        let out = apply_peel(&w, FRAC_PI_4, 1.0, 32, &ForbiddenZone::default()).unwrap();
        assert_eq!(out.event, StepEvent::FullyPeeled);
        assert_eq!(out.state.ell, 50.0);
        let last = out.path_samples.last().unwrap();
        assert_eq!(last.r, 60.0);
        assert_abs_diff_eq!(out.tip.distance(out.state.hinge()), 60.0, epsilon = 1e-9);
    }

    #[test]
    fn rotation_examples() {
        let zone = ForbiddenZone::default();
        let w = flat_world();
        let out = apply_rotate(&w, -FRAC_PI_4, 16, &zone).unwrap();
        assert_eq!(out.event, StepEvent::Ok);
        assert_abs_diff_eq!(out.state.phi, FRAC_PI_4, epsilon = 1e-15);
        assert_eq!(out.state.r(), w.r());
        assert_eq!(out.state.hinge(), w.hinge());

        let out = apply_rotate(&w, 0.0, 16, &zone).unwrap();
        assert_eq!(out.state, w);
        assert_eq!(out.path_samples.len(), 17);
        assert!(out.path_samples.iter().all(|s| *s == out.path_samples[0]));

        let mut w2 = w;
        w2.phi = 0.12;
        let out = apply_rotate(&w2, -0.05, 16, &zone).unwrap();
        assert_eq!(out.event, StepEvent::ForbiddenZone);
        let lenient = ForbiddenZone { after_rotation: false, ..zone };
        assert_eq!(apply_rotate(&w2, -0.05, 16, &lenient).unwrap().event, StepEvent::Ok);
        assert!(apply_rotate(&w, PI, 4, &zone).is_err());
    }

    #[test]
    fn observation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = flat_world();
        let o = observe(&w, 0.0, &mut rng);
        assert_abs_diff_eq!(o.t_x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.t_y, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.beta, -FRAC_PI_2, epsilon = 1e-12);

        let s = VelcroState { h_x: 5.0, h_y: 0.0, theta: 0.0, phi: PI / 3.0, r: 12.0 };
        assert_abs_diff_eq!(s.tip().x, 11.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.tip().y, 10.3923048, epsilon = 1e-7);

        let sigma = 1f64.to_radians();
        let before = w;
        for _ in 0..1000 {
            let o = observe(&w, sigma, &mut rng);
            assert!(wrap(o.beta + FRAC_PI_2).abs() < 5.0 * sigma);
        }
        assert_eq!(before, w);
    }

    #[test]
    fn substep_convergence_on_sampled_curves() {
        let zone = ForbiddenZone { min: -10.0, max: 10.0, after_rotation: false };
        for seed in 0..8 {
            for shape in ShapeKind::ALL {
                let curve = sample_curve(shape, seed);
                let mut w = WorldState::initial(curve, FRAC_PI_2);
                // Walk to a few places along the strap, including the corner.
                for _ in 0..60 {
                    let alpha = w.theta() + 0.5 * w.relative_angle();
                    let a = apply_peel(&w, alpha, 1.0, 32, &zone).unwrap();
                    let b = apply_peel(&w, alpha, 1.0, 1024, &zone).unwrap();
                    assert_eq!(a.event, b.event);
                    assert!((a.state.ell - b.state.ell).abs() < 1e-4, "{shape} seed {seed}");
                    if a.event != StepEvent::Ok {
                        break;
                    }
                    w = b.state;
                    w.phi = w.theta() + FRAC_PI_2;
                }
            }
        }
    }
}
