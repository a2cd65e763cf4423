//! Attached-surface curves parametrised by arc length.
//!
//! Every curve starts at the world origin. `tangent_at` returns the angle of
//! the unit tangent pointing toward the still-attached end, so a hinge at arc
//! length `ell` sees the attached strap leaving in direction `tangent_at(ell)`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians from the x-axis.
    pub fn unit(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, p: Point2) -> Point2 {
        Point2::new(self * p.x, self * p.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Flat,
    Arc,
    Corner,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 3] = [ShapeKind::Flat, ShapeKind::Arc, ShapeKind::Corner];

    pub fn as_str(self) -> &'static str {
        match self {
            ShapeKind::Flat => "flat",
            ShapeKind::Arc => "arc",
            ShapeKind::Corner => "corner",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "flat" => Ok(ShapeKind::Flat),
            "arc" => Ok(ShapeKind::Arc),
            "corner" => Ok(ShapeKind::Corner),
            other => Err(Error::Config(format!("unknown shape kind `{other}`"))),
        }
    }
}

/// Shape of the attached surface. All angles in radians, lengths in cm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CurveShape {
    Flat {
        tilt: f64,
    },
    Arc {
        radius: f64,
        tilt: f64,
        turn_sign: f64,
    },
    /// A leading flat, a quarter-circle rounded corner, then a trailing flat.
    Corner {
        corner_radius: f64,
        flat_after_ratio: f64,
        tilt: f64,
        turn_sign: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCurve {
    pub shape: CurveShape,
    pub attached_length: f64,
}

impl SurfaceCurve {
    pub fn flat(tilt: f64, attached_length: f64) -> Result<Self> {
        Self::new(CurveShape::Flat { tilt }, attached_length)
    }

    pub fn arc(radius: f64, tilt: f64, turn_sign: f64, attached_length: f64) -> Result<Self> {
        Self::new(CurveShape::Arc { radius, tilt, turn_sign }, attached_length)
    }

    pub fn corner(
        corner_radius: f64,
        flat_after_ratio: f64,
        tilt: f64,
        turn_sign: f64,
        attached_length: f64,
    ) -> Result<Self> {
        Self::new(
            CurveShape::Corner { corner_radius, flat_after_ratio, tilt, turn_sign },
            attached_length,
        )
    }

    pub fn new(shape: CurveShape, attached_length: f64) -> Result<Self> {
        let curve = Self { shape, attached_length };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.attached_length > 0.0) || !self.attached_length.is_finite() {
            return Err(Error::Domain(format!(
                "attached_length must be positive, got {}",
                self.attached_length
            )));
        }
        let check_sign = |s: f64| {
            if s == 1.0 || s == -1.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!("turn_sign must be ±1, got {s}")))
            }
        };
        match self.shape {
            CurveShape::Flat { .. } => Ok(()),
            CurveShape::Arc { radius, turn_sign, .. } => {
                check_sign(turn_sign)?;
                if radius > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Domain(format!("arc radius must be positive, got {radius}")))
                }
            }
            CurveShape::Corner { corner_radius, flat_after_ratio, turn_sign, .. } => {
                check_sign(turn_sign)?;
                if !(corner_radius > 0.0) {
                    return Err(Error::Domain(format!(
                        "corner radius must be positive, got {corner_radius}"
                    )));
                }
                if !(0.0..=1.0).contains(&flat_after_ratio) {
                    return Err(Error::Domain(format!(
                        "flat_after_ratio must lie in [0, 1], got {flat_after_ratio}"
                    )));
                }
                if FRAC_PI_2 * corner_radius >= self.attached_length {
                    return Err(Error::Domain(format!(
                        "quarter arc of radius {corner_radius} does not fit in {} cm",
                        self.attached_length
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn kind(&self) -> ShapeKind {
        match self.shape {
            CurveShape::Flat { .. } => ShapeKind::Flat,
            CurveShape::Arc { .. } => ShapeKind::Arc,
            CurveShape::Corner { .. } => ShapeKind::Corner,
        }
    }

    pub fn tilt(&self) -> f64 {
        match self.shape {
            CurveShape::Flat { tilt } | CurveShape::Arc { tilt, .. } | CurveShape::Corner { tilt, .. } => {
                tilt
            }
        }
    }

    /// Arc-length breakpoints `(arc_start, arc_end)` of the rounded corner.
    pub fn corner_span(&self) -> Option<(f64, f64)> {
        match self.shape {
            CurveShape::Corner { corner_radius, flat_after_ratio, .. } => {
                let arc_len = FRAC_PI_2 * corner_radius;
                let flat_total = self.attached_length - arc_len;
                let lead = flat_total - flat_after_ratio * flat_total;
                Some((lead, lead + arc_len))
            }
            _ => None,
        }
    }

    fn check_ell(&self, ell: f64) -> Result<()> {
        if ell.is_nan() || ell < 0.0 || ell > self.attached_length {
            Err(Error::Domain(format!(
                "arc length {ell} outside [0, {}]",
                self.attached_length
            )))
        } else {
            Ok(())
        }
    }

    /// World-frame position of the surface point `ell` cm from the start.
    pub fn point_at(&self, ell: f64) -> Result<Point2> {
        self.check_ell(ell)?;
        Ok(self.point_unchecked(ell))
    }

    /// Surface tangent angle at arc length `ell`.
    pub fn tangent_at(&self, ell: f64) -> Result<f64> {
        self.check_ell(ell)?;
        Ok(self.tangent_unchecked(ell))
    }

    pub(crate) fn point_unchecked(&self, ell: f64) -> Point2 {
        match self.shape {
            CurveShape::Flat { tilt } => ell * Point2::unit(tilt),
            CurveShape::Arc { radius, tilt, turn_sign } => {
                arc_point(tilt, turn_sign / radius, ell)
            }
            CurveShape::Corner { corner_radius, tilt, turn_sign, .. } => {
                let (a0, a1) = self.corner_span().expect("corner");
                if ell <= a0 {
                    ell * Point2::unit(tilt)
                } else {
                    let start = a0 * Point2::unit(tilt);
                    let kappa = turn_sign / corner_radius;
                    if ell <= a1 {
                        start + arc_point(tilt, kappa, ell - a0)
                    } else {
                        let end = start + arc_point(tilt, kappa, a1 - a0);
                        end + (ell - a1) * Point2::unit(tilt + turn_sign * FRAC_PI_2)
                    }
                }
            }
        }
    }

    pub(crate) fn tangent_unchecked(&self, ell: f64) -> f64 {
        match self.shape {
            CurveShape::Flat { tilt } => tilt,
            CurveShape::Arc { radius, tilt, turn_sign } => tilt + turn_sign * ell / radius,
            CurveShape::Corner { corner_radius, tilt, turn_sign, .. } => {
                let (a0, a1) = self.corner_span().expect("corner");
                if ell >= a1 {
                    tilt + turn_sign * FRAC_PI_2
                } else {
                    tilt + turn_sign * (ell - a0).max(0.0) / corner_radius
                }
            }
        }
    }

    /// Net change of the tangent angle from start to end.
    pub fn total_turn(&self) -> f64 {
        self.tangent_unchecked(self.attached_length) - self.tangent_unchecked(0.0)
    }
}

// Circular arc starting at the origin with initial heading `tilt` and signed
// curvature `kappa`.
fn arc_point(tilt: f64, kappa: f64, ell: f64) -> Point2 {
    let end = tilt + kappa * ell;
    Point2::new(
        (end.sin() - tilt.sin()) / kappa,
        (tilt.cos() - end.cos()) / kappa,
    )
}

/// Ranges used when drawing random experiment curves. Angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveSampling {
    pub tilt_range: (f64, f64),
    pub arc_radius_range: (f64, f64),
    pub corner_radius_range: (f64, f64),
    pub flat_after_ratio_range: (f64, f64),
    pub turn_sign: f64,
    pub attached_length: f64,
}

impl Default for CurveSampling {
    fn default() -> Self {
        Self {
            tilt_range: (-60f64.to_radians(), 60f64.to_radians()),
            arc_radius_range: (20.0, 40.0),
            corner_radius_range: (4.0, 15.0),
            flat_after_ratio_range: (0.3, 0.7),
            turn_sign: -1.0,
            attached_length: 50.0,
        }
    }
}

/// Draws an experiment curve of the given shape with default sampling ranges.
pub fn sample_curve(shape: ShapeKind, rng_seed: u64) -> SurfaceCurve {
    sample_curve_with(shape, &CurveSampling::default(), rng_seed)
        .expect("default sampling ranges are valid")
}

pub fn sample_curve_with(shape: ShapeKind, cfg: &CurveSampling, rng_seed: u64) -> Result<SurfaceCurve> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut uniform = |(lo, hi): (f64, f64)| -> Result<f64> {
        if !(lo <= hi) {
            return Err(Error::Config(format!("empty sampling range ({lo}, {hi})")));
        }
        Ok(if lo == hi { lo } else { rng.gen_range(lo..=hi) })
    };
    let tilt = uniform(cfg.tilt_range)?;
    let shape = match shape {
        ShapeKind::Flat => CurveShape::Flat { tilt },
        ShapeKind::Arc => CurveShape::Arc {
            radius: uniform(cfg.arc_radius_range)?,
            tilt,
            turn_sign: cfg.turn_sign,
        },
        ShapeKind::Corner => CurveShape::Corner {
            corner_radius: uniform(cfg.corner_radius_range)?,
            flat_after_ratio: uniform(cfg.flat_after_ratio_range)?,
            tilt,
            turn_sign: cfg.turn_sign,
        },
    };
    SurfaceCurve::new(shape, cfg.attached_length)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn any_curve() -> impl Strategy<Value = SurfaceCurve> {
        (0usize..3, any::<u64>()).prop_map(|(k, seed)| sample_curve(ShapeKind::ALL[k], seed))
    }

    proptest! {
        #[test]
        fn unit_speed_and_tangent_consistency(curve in any_curve(), frac in 0.0f64..1.0) {
            let h = 1e-5;
            let ell = h + frac * (curve.attached_length - 2.0 * h);
            if let Some((a0, a1)) = curve.corner_span() {
                prop_assume!((ell - a0).abs() > 2.0 * h && (ell - a1).abs() > 2.0 * h);
            }
            let d = (1.0 / (2.0 * h))
                * (curve.point_at(ell + h).unwrap() - curve.point_at(ell - h).unwrap());
            prop_assert!((d.norm() - 1.0).abs() < 1e-6);
            let err = crate::angle::wrap(d.angle() - curve.tangent_at(ell).unwrap());
            prop_assert!(err.abs() < 1e-4);
        }

        #[test]
        fn continuity_across_corner_junctions(seed in any::<u64>()) {
            let curve = sample_curve(ShapeKind::Corner, seed);
            let (a0, a1) = curve.corner_span().unwrap();
            for b in [a0, a1] {
                let gap = curve.point_at(b + 1e-9).unwrap().distance(curve.point_at(b - 1e-9).unwrap());
                prop_assert!(gap < 1e-8);
            }
            prop_assert!((curve.total_turn().abs() - FRAC_PI_2).abs() < 1e-12);
        }
    }
}
