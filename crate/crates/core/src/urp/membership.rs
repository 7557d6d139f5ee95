use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MembershipError {
    #[error("membership function needs at least one breakpoint")]
    Empty,
    #[error("breakpoints must be strictly increasing in x")]
    Unsorted,
    #[error("degree {0} outside [0, 1]")]
    DegreeOutOfRange(f64),
    #[error("breakpoint coordinates must be finite")]
    NonFinite,
}

/// Piecewise-linear map from a factor value to a degree in `[0, 1]`.
/// Values outside the breakpoint range take the nearest end degree.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipFunction {
    points: Vec<(f64, f64)>,
}

impl MembershipFunction {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, MembershipError> {
        if points.is_empty() {
            return Err(MembershipError::Empty);
        }
        for &(x, y) in &points {
            if !x.is_finite() || !y.is_finite() {
                return Err(MembershipError::NonFinite);
            }
            if !(0.0..=1.0).contains(&y) {
                return Err(MembershipError::DegreeOutOfRange(y));
            }
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(MembershipError::Unsorted);
        }
        Ok(Self { points })
    }

    /// Ramp from 0 at `zero_at` to 1 at `one_at` (either orientation).
    pub fn ramp(zero_at: f64, one_at: f64) -> Result<Self, MembershipError> {
        if zero_at <= one_at {
            Self::new(vec![(zero_at, 0.0), (one_at, 1.0)])
        } else {
            Self::new(vec![(one_at, 1.0), (zero_at, 0.0)])
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn degree(&self, x: f64) -> f64 {
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if x <= first.0 {
            return first.1;
        }
        if x >= last.0 {
            return last.1;
        }
        // first index whose x exceeds the query; guaranteed in 1..len
        let hi = self.points.partition_point(|p| p.0 <= x);
        let (x0, y0) = self.points[hi - 1];
        let (x1, y1) = self.points[hi];
        if x == x0 {
            return y0;
        }
        let t = (x - x0) / (x1 - x0);
        (y0 + t * (y1 - y0)).clamp(0.0, 1.0)
    }
}

pub fn membership(mf: &MembershipFunction, x: f64) -> f64 {
    mf.degree(x)
}
