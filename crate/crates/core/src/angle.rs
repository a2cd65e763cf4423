//! Small helpers for working with planar angles.

use std::f64::consts::{PI, TAU};

/// Wraps an angle into `(-π, π]`.
pub fn wrap(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

pub fn deg(degrees: f64) -> f64 {
    degrees.to_radians()
}

/// Weighted circular mean, `atan2` of the weighted mean sine and cosine.
pub fn circular_mean(angles: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let (s, c) = angles
        .into_iter()
        .fold((0.0, 0.0), |(s, c), (a, w)| (s + w * a.sin(), c + w * a.cos()));
    s.atan2(c)
}
