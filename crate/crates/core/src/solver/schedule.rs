//! Piecewise-linear time functions.

use crate::error::{Error, Result};
use crate::so3::Vec3;

/// Piecewise-linear function of time through `(t, value)` breakpoints,
/// held constant outside the first and last breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    points: Vec<(f64, f64)>,
}

impl Schedule {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("schedule needs at least one breakpoint".into()));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidArgument("schedule breakpoints must be finite".into()));
        }
        if points.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::InvalidArgument("schedule breakpoints must be time-sorted".into()));
        }
        Ok(Self { points })
    }

    pub fn constant(value: f64) -> Self {
        Self { points: vec![(0.0, value)] }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn value(&self, t: f64) -> f64 {
        let p = &self.points;
        if t <= p[0].0 {
            return p[0].1;
        }
        for w in p.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t <= t1 {
                if t1 == t0 {
                    return v1;
                }
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        p[p.len() - 1].1
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| (lo.min(*v), hi.max(*v)))
    }

    /// The same schedule with every value multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self { points: self.points.iter().map(|(t, v)| (*t, v * k)).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.points.iter().all(|(_, v)| *v == 0.0)
    }
}

/// A fixed spatial vector scaled by a time function.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSchedule {
    pub vector: Vec3,
    pub profile: Schedule,
}

impl VectorSchedule {
    pub fn new(vector: Vec3, profile: Schedule) -> Self {
        Self { vector, profile }
    }

    pub fn zero() -> Self {
        Self { vector: Vec3::zeros(), profile: Schedule::zero() }
    }

    pub fn value(&self, t: f64) -> Vec3 {
        self.vector * self.profile.value(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_and_hold() {
        let s = Schedule::new(vec![(0.0, 31.5), (5.0, 90.0)]).unwrap();
        assert_eq!(s.value(-1.0), 31.5);
        assert_eq!(s.value(0.0), 31.5);
        assert!((s.value(2.5) - 60.75).abs() < 1e-12);
        assert_eq!(s.value(7.0), 90.0);
        let step = Schedule::new(vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]).unwrap();
        assert_eq!(step.value(1.0), 0.0);
        assert_eq!(step.value(1.0 + 1e-12), 1.0);
        assert!(Schedule::new(vec![(1.0, 0.0), (0.5, 1.0)]).is_err());
        assert!(Schedule::new(vec![]).is_err());
    }
}
