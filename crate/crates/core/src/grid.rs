//! Uniform time grids.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Absolute slack allowed when matching times to grid points.
pub const GRID_TOL: f64 = 1e-9;

/// A uniform grid on `[start, end]` with spacing `step`, both endpoints included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    start: f64,
    end: f64,
    step: f64,
    n_steps: usize,
}

impl TimeGrid {
    /// Build a grid from an explicit step count, sidestepping the span
    /// divisibility check (`end` is defined as `start + n_steps * step`).
    pub fn with_steps(start: f64, step: f64, n_steps: usize) -> Result<Self> {
        if !(start >= 0.0) {
            return Err(Error::InvalidGrid(format!("start {start} must be >= 0")));
        }
        if !(step > 0.0) {
            return Err(Error::InvalidGrid(format!("step {step} must be > 0")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("grid needs at least one step".into()));
        }
        Ok(TimeGrid { start, end: start + n_steps as f64 * step, step, n_steps })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    /// Time of the k-th grid point. The last point is `end` exactly.
    pub fn point(&self, k: usize) -> f64 {
        debug_assert!(k <= self.n_steps);
        if k == self.n_steps {
            self.end
        } else {
            self.start + k as f64 * self.step
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points()).map(|k| self.point(k)).collect()
    }

    /// Index of the grid point closest to `t`, if `t` lies on the grid
    /// within `GRID_TOL`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = ((t - self.start) / self.step).round();
        if k < 0.0 || k > self.n_steps as f64 {
            return None;
        }
        let k = k as usize;
        ((t - self.point(k)).abs() <= GRID_TOL).then_some(k)
    }

    /// Number of steps spanned by a duration `dt`, rounded to the nearest
    /// integer. Callers that require exact divisibility should check the
    /// returned count against `dt` themselves.
    pub fn steps_in(&self, dt: f64) -> usize {
        (dt / self.step).round() as usize
    }
}

/// Build a uniform grid; `(end - start) / step` must be integral within 1e-9.
pub fn make_grid(start: f64, end: f64, step: f64) -> Result<TimeGrid> {
    if !(start >= 0.0 && end > start) {
        return Err(Error::InvalidGrid(format!(
            "need 0 <= start < end, got start={start}, end={end}"
        )));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidGrid(format!("step {step} must be > 0")));
    }
    let span = (end - start) / step;
    if (span - span.round()).abs() > 1e-9 * span.max(1.0) {
        return Err(Error::InvalidGrid(format!(
            "span {} is not an integral multiple of step {step}",
            end - start
        )));
    }
    TimeGrid::with_steps(start, step, span.round() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_points() {
        let g = make_grid(0.0, 1.0, 0.5).unwrap();
        assert_eq!(g.points(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn point_count() {
        let g = make_grid(0.0, 2.0, 0.25).unwrap();
        assert_eq!(g.n_points(), 9);
    }

    #[test]
    fn non_integral_span_rejected() {
        assert!(make_grid(0.0, 1.0, 0.3).is_err());
        assert!(make_grid(0.0, 1.0, -0.1).is_err());
        assert!(make_grid(1.0, 0.5, 0.1).is_err());
    }

    #[test]
    fn index_lookup() {
        let g = make_grid(0.0, 1.0, 0.125).unwrap();
        assert_eq!(g.index_of(0.5), Some(4));
        assert_eq!(g.index_of(1.0), Some(8));
        assert_eq!(g.index_of(0.51), None);
        assert_eq!(g.index_of(1.2), None);
    }

    #[test]
    fn last_point_is_end_exactly() {
        // 0.1 is not exactly representable; accumulating 10 steps drifts.
        let g = make_grid(0.0, 1.0, 0.1).unwrap();
        assert_eq!(g.point(10), 1.0);
    }
}
