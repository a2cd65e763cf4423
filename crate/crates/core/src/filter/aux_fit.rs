//! Auxiliary surface-angle estimator.
//!
//! Fits the recent hinge estimates with a weighted principal-axis line and a
//! weighted algebraic (Kåsa) circle, and reports the tangent direction at the
//! newest hinge from whichever model explains the points better. Sample
//! weights decay geometrically with age, counted in history entries.

use serde::{Deserialize, Serialize};

use crate::geometry::Point2;

/// Hinge estimate recorded by the filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HingeSample {
    pub point: Point2,
    /// Filter step at which the estimate was taken.
    pub step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum FitModel {
    Line,
    Arc { center: Point2, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxFit {
    pub theta: f64,
    /// Weighted mean squared geometric residual of the winning model, cm².
    pub residual: f64,
    pub model: FitModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxFitParams {
    pub decay_lambda: f64,
    pub window: usize,
    /// Circles tighter than this are rejected as noise fits.
    pub min_arc_radius: f64,
}

const MIN_SPREAD: f64 = 1e-10;

struct Weighted<'a> {
    points: &'a [Point2],
    weights: Vec<f64>,
    total: f64,
}

impl Weighted<'_> {
    fn centroid(&self) -> Point2 {
        let s = self
            .points
            .iter()
            .zip(&self.weights)
            .fold(Point2::ORIGIN, |acc, (p, w)| acc + *w * *p);
        (1.0 / self.total) * s
    }

    // Weighted covariance entries (sxx, sxy, syy) about `c`.
    fn scatter(&self, c: Point2) -> (f64, f64, f64) {
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for (p, w) in self.points.iter().zip(&self.weights) {
            let d = *p - c;
            sxx += w * d.x * d.x;
            sxy += w * d.x * d.y;
            syy += w * d.y * d.y;
        }
        (sxx / self.total, sxy / self.total, syy / self.total)
    }

    fn mean(&self, f: impl Fn(Point2) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(*p)).sum::<f64>() / self.total
    }
}

// Orients a direction so it agrees with the hinge motion over the window.
fn orient(dir: Point2, motion: Point2) -> Point2 {
    if dir.dot(motion) < 0.0 {
        -1.0 * dir
    } else {
        dir
    }
}

fn fit_line(data: &Weighted, motion: Point2) -> (Point2, f64) {
    let c = data.centroid();
    let (sxx, sxy, syy) = data.scatter(c);
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let dir = orient(Point2::unit(angle), motion);
    let normal = Point2::new(-dir.y, dir.x);
    let residual = data.mean(|p| {
        let e = (p - c).dot(normal);
        e * e
    });
    (dir, residual)
}

// Minimises Σ w (x² + y² + D x + E y + F)² in coordinates centred on the
// weighted centroid.
fn fit_circle(data: &Weighted) -> Option<(Point2, f64, f64)> {
    let c0 = data.centroid();
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for (p, w) in data.points.iter().zip(&data.weights) {
        let q = *p - c0;
        let row = [q.x, q.y, 1.0];
        let z = -(q.x * q.x + q.y * q.y);
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += w * row[i] * row[j];
            }
            rhs[i] += w * row[i] * z;
        }
    }
    let [d, e, f] = solve3(m, rhs)?;
    let center = Point2::new(-0.5 * d, -0.5 * e);
    let r2 = center.norm_sq() - f;
    if !(r2 > 0.0) || !r2.is_finite() {
        return None;
    }
    let radius = r2.sqrt();
    let residual = data.mean(|p| {
        let e = (p - c0 - center).norm() - radius;
        e * e
    });
    Some((center + c0, radius, residual))
}

// Gaussian elimination with partial pivoting; `None` for a singular system.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let k = a[row][col] / a[col][col];
            for c in col..3 {
                a[row][c] -= k * a[col][c];
            }
            b[row] -= k * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Estimates the surface angle at the newest hinge from the hinge history.
///
/// Returns `None` with fewer than three samples or when the samples are all
/// coincident. The circle model is only tried with four or more samples. The
/// models are compared on their residual variance, i.e. the weighted mean
/// squared residual scaled by `n / (n - p)` for `p` fitted parameters.
pub fn fit_theta_aux(history: &[HingeSample], params: &AuxFitParams) -> Option<AuxFit> {
    let window = params.window.max(3);
    let recent = &history[history.len().saturating_sub(window)..];
    let n = recent.len();
    if n < 3 {
        return None;
    }
    let points: Vec<Point2> = recent.iter().map(|h| h.point).collect();
    let weights: Vec<f64> = (0..n).map(|i| params.decay_lambda.powi((n - 1 - i) as i32)).collect();
    let total = weights.iter().sum();
    let data = Weighted { points: &points, weights, total };

    let c = data.centroid();
    let (sxx, _, syy) = data.scatter(c);
    if sxx + syy < MIN_SPREAD {
        return None;
    }
    let newest = points[n - 1];
    let motion = newest - points[0];

    let (line_dir, line_res) = fit_line(&data, motion);
    let nf = n as f64;
    let mut best = AuxFit { theta: line_dir.angle(), residual: line_res, model: FitModel::Line };
    let line_score = line_res * nf / (nf - 2.0);

    if n >= 4 {
        if let Some((center, radius, arc_res)) = fit_circle(&data) {
            let arc_score = arc_res * nf / (nf - 3.0);
            if radius >= params.min_arc_radius && arc_score < line_score {
                let radial = newest - center;
                let tangent = orient(Point2::new(-radial.y, radial.x), motion);
                best = AuxFit { theta: tangent.angle(), residual: arc_res, model: FitModel::Arc { center, radius } };
            }
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::wrap;

    fn params() -> AuxFitParams {
        AuxFitParams { decay_lambda: 0.9, window: 15, min_arc_radius: 1.0 }
    }

    fn samples(points: impl IntoIterator<Item = Point2>) -> Vec<HingeSample> {
        points.into_iter().enumerate().map(|(step, point)| HingeSample { point, step }).collect()
    }

    #[test]
    fn collinear_points_pick_the_line() {
        let dir = Point2::unit(30f64.to_radians());
        let h = samples((0..8).map(|i| Point2::new(2.0, -1.0) + (0.7 * i as f64) * dir));
        let fit = fit_theta_aux(&h, &params()).unwrap();
        assert_eq!(fit.model, FitModel::Line);
        assert!(wrap(fit.theta - 30f64.to_radians()).abs() < 1e-9);
        assert!(fit.residual < 1e-20);
    }

    #[test]
    fn line_direction_follows_motion() {
        let dir = Point2::unit(2.5);
        let h = samples((0..5).map(|i| (i as f64) * dir));
        let fit = fit_theta_aux(&h, &params()).unwrap();
        assert!(wrap(fit.theta - 2.5).abs() < 1e-9);
    }

    #[test]
    fn circle_points_pick_the_arc() {
        // 8 points over 40° of a radius-25 circle, traversed clockwise.
        let center = Point2::new(3.0, -25.0);
        let span = 40f64.to_radians();
        let pts: Vec<_> = (0..8)
            .map(|i| {
                let a = std::f64::consts::FRAC_PI_2 - span * i as f64 / 7.0;
                center + 25.0 * Point2::unit(a)
            })
            .collect();
        let fit = fit_theta_aux(&samples(pts), &params()).unwrap();
        let FitModel::Arc { radius, center: c } = fit.model else { panic!("expected arc, got {fit:?}") };
        assert!((radius - 25.0).abs() < 0.1);
        assert!(c.distance(center) < 0.1);
        // Clockwise motion: tangent at the last point is its radial angle - π/2.
        let last_angle = std::f64::consts::FRAC_PI_2 - span;
        let truth = last_angle - std::f64::consts::FRAC_PI_2;
        assert!(wrap(fit.theta - truth).abs() < 0.5f64.to_radians());
    }

    #[test]
    fn degenerate_inputs() {
        let two = samples([Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]);
        assert!(fit_theta_aux(&two, &params()).is_none());
        let same = samples([Point2::new(1.0, 1.0); 6]);
        assert!(fit_theta_aux(&same, &params()).is_none());
        // Three points only: line model even when not collinear.
        let three = samples([Point2::new(0.0, 0.0), Point2::new(1.0, 0.1), Point2::new(2.0, 0.0)]);
        assert_eq!(fit_theta_aux(&three, &params()).unwrap().model, FitModel::Line);
    }

    #[test]
    fn window_drops_old_samples() {
        // Old samples along x, recent ones along y: a 4-wide window sees only y.
        let mut pts: Vec<_> = (0..10).map(|i| Point2::new(i as f64, 0.0)).collect();
        pts.extend((1..=4).map(|i| Point2::new(9.0, i as f64)));
        let p = AuxFitParams { window: 4, ..params() };
        let fit = fit_theta_aux(&samples(pts), &p).unwrap();
        assert!(wrap(fit.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn solve3_matches_known_system() {
        let x = solve3([[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]], [3.0, 5.0, 5.0]).unwrap();
        for (v, e) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((v - e).abs() < 1e-12);
        }
        assert!(solve3([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]], [1.0, 2.0, 3.0]).is_none());
    }
}
