//! Planar positions, scene extents and regular lattices over them.

use crate::error::{Error, Result};

/// Slack used when a ratio of lengths should be an integer but went through
/// floating point (e.g. `6.0 / 0.1`).
pub(crate) const LATTICE_EPS: f64 = 1e-9;

/// A point in the scene plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn offset(self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    pub fn distance(self, other: Position) -> f64 {
        squared_distance(self, other).sqrt()
    }
}

impl From<(f64, f64)> for Position {
    fn from((x, y): (f64, f64)) -> Self {
        Self::new(x, y)
    }
}

/// `||a - b||²`.
#[inline]
pub fn squared_distance(a: Position, b: Position) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy
}

/// Axis-aligned rectangular scene extent. The origin convention is
/// `(x_min, y_min)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl SceneBounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let b = Self {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    /// `[0, width] × [0, height]`.
    pub fn sized(width: f64, height: f64) -> Result<Self> {
        Self::new(0.0, width, 0.0, height)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.x_min, self.x_max, self.y_min, self.y_max];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("bounds", "coordinates must be finite"));
        }
        if self.x_min >= self.x_max {
            return Err(Error::invalid("bounds", "x_min must be below x_max"));
        }
        if self.y_min >= self.y_max {
            return Err(Error::invalid("bounds", "y_min must be below y_max"));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Closed containment, edges included.
    pub fn contains(&self, p: Position) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Grows the rectangle by `margin` on every side.
    pub fn expanded(&self, margin: f64) -> Self {
        Self {
            x_min: self.x_min - margin,
            x_max: self.x_max + margin,
            y_min: self.y_min - margin,
            y_max: self.y_max + margin,
        }
    }

    pub fn center(&self) -> Position {
        Position::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }
}

/// Number of lattice nodes along an extent, both edges included.
pub(crate) fn node_count(extent: f64, step: f64) -> usize {
    ((extent / step) - LATTICE_EPS).ceil().max(0.0) as usize + 1
}

/// Regular lattice geometry shared by [`grid_points`] and
/// [`FieldGrid`](crate::field::FieldGrid). Node `(i, j)` (column, row) sits at
/// `(x_min + i·res, y_min + j·res)`, clipped to the upper edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub bounds: SceneBounds,
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Lattice {
    pub fn new(bounds: SceneBounds, resolution: f64) -> Result<Self> {
        bounds.validate()?;
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::invalid("resolution", "must be positive and finite"));
        }
        Ok(Self {
            bounds,
            resolution,
            nx: node_count(bounds.width(), resolution),
            ny: node_count(bounds.height(), resolution),
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_at(&self, i: usize) -> f64 {
        (self.bounds.x_min + i as f64 * self.resolution).min(self.bounds.x_max)
    }

    pub fn y_at(&self, j: usize) -> f64 {
        (self.bounds.y_min + j as f64 * self.resolution).min(self.bounds.y_max)
    }

    /// Row-major flat index of node `(i, j)`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn position(&self, flat: usize) -> Position {
        Position::new(self.x_at(flat % self.nx), self.y_at(flat / self.nx))
    }

    pub fn positions(&self) -> Vec<Position> {
        (0..self.len()).map(|k| self.position(k)).collect()
    }

    /// Nearest node to `p`; ties go to the lower index.
    pub fn nearest(&self, p: Position) -> usize {
        let i = nearest_axis(p.x - self.bounds.x_min, self.resolution, self.nx);
        let j = nearest_axis(p.y - self.bounds.y_min, self.resolution, self.ny);
        self.index(i, j)
    }
}

fn nearest_axis(offset: f64, step: f64, n: usize) -> usize {
    let t = offset / step;
    // exact halves round down so ties resolve to the lower index
    let k = (t - 0.5).ceil().max(0.0) as usize;
    k.min(n - 1)
}

/// Row-major lattice over `bounds` including both boundary edges.
pub fn grid_points(bounds: SceneBounds, resolution: f64) -> Result<Vec<Position>> {
    Ok(Lattice::new(bounds, resolution)?.positions())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> SceneBounds {
        SceneBounds::sized(1.0, 1.0).unwrap()
    }

    #[test]
    fn squared_distance_examples() {
        let o = Position::new(0.0, 0.0);
        assert_eq!(squared_distance(o, o), 0.0);
        assert_eq!(squared_distance(o, Position::new(3.0, 4.0)), 25.0);
        assert_eq!(
            squared_distance(Position::new(1.0, 2.0), Position::new(4.0, 6.0)),
            25.0
        );
    }

    #[test]
    fn unit_square_lattice() {
        let pts = grid_points(unit(), 1.0).unwrap();
        let want = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        assert_eq!(pts, want.map(Position::from).to_vec());
    }

    #[test]
    fn coarse_resolution_clips_to_edges() {
        let pts = grid_points(unit(), 2.0).unwrap();
        let want = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        assert_eq!(pts, want.map(Position::from).to_vec());
    }

    #[test]
    fn room_lattice_at_decimeter_resolution() {
        let b = SceneBounds::sized(10.0, 6.0).unwrap();
        let lat = Lattice::new(b, 0.1).unwrap();
        assert_eq!((lat.nx, lat.ny), (101, 61));
        assert_eq!(grid_points(b, 0.1).unwrap().len(), 6161);
        assert_eq!(lat.position(6160), Position::new(10.0, 6.0));
    }

    #[test]
    fn rejects_bad_resolution_and_bounds() {
        assert!(grid_points(unit(), 0.0).is_err());
        assert!(grid_points(unit(), -1.0).is_err());
        assert!(SceneBounds::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(SceneBounds::new(0.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn nearest_node_ties_go_low() {
        let lat = Lattice::new(unit(), 0.5).unwrap();
        assert_eq!(lat.nearest(Position::new(0.25, 0.0)), 0);
        assert_eq!(lat.nearest(Position::new(0.26, 0.0)), 1);
        assert_eq!(lat.nearest(Position::new(5.0, 5.0)), lat.len() - 1);
        assert_eq!(lat.nearest(Position::new(-1.0, 0.74)), lat.index(0, 1));
    }
}
