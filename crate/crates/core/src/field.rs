//! Scalar fields sampled on a regular lattice.

use crate::error::{Error, Result};
use crate::geometry::{Lattice, Position, SceneBounds, LATTICE_EPS};

/// A row-major scalar field (row 0 is the `y_min` edge) with an optional
/// evaluation mask of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    lattice: Lattice,
    values: Vec<f64>,
    mask: Option<Vec<bool>>,
}

impl FieldGrid {
    pub fn new(bounds: SceneBounds, resolution: f64, values: Vec<f64>) -> Result<Self> {
        let lattice = Lattice::new(bounds, resolution)?;
        if values.len() != lattice.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {}x{} lattice",
                values.len(),
                lattice.ny,
                lattice.nx
            )));
        }
        Ok(Self {
            lattice,
            values,
            mask: None,
        })
    }

    pub fn from_fn(
        bounds: SceneBounds,
        resolution: f64,
        mut f: impl FnMut(Position) -> f64,
    ) -> Result<Self> {
        let lattice = Lattice::new(bounds, resolution)?;
        let values = (0..lattice.len()).map(|k| f(lattice.position(k))).collect();
        Ok(Self {
            lattice,
            values,
            mask: None,
        })
    }

    pub fn constant(bounds: SceneBounds, resolution: f64, value: f64) -> Result<Self> {
        Self::from_fn(bounds, resolution, |_| value)
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.values.len() {
            return Err(Error::ShapeMismatch(format!(
                "mask of {} cells for a grid of {}",
                mask.len(),
                self.values.len()
            )));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn bounds(&self) -> SceneBounds {
        self.lattice.bounds
    }

    pub fn resolution(&self) -> f64 {
        self.lattice.resolution
    }

    /// `(rows, cols)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.lattice.ny, self.lattice.nx)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[self.lattice.index(col, row)]
    }

    pub fn positions(&self) -> Vec<Position> {
        self.lattice.positions()
    }

    pub fn same_geometry(&self, other: &FieldGrid) -> bool {
        self.lattice == other.lattice
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Elementwise combination of two grids on the same lattice.
    pub fn zip_with(&self, other: &FieldGrid, f: impl Fn(f64, f64) -> f64) -> Result<FieldGrid> {
        if !self.same_geometry(other) {
            return Err(Error::ShapeMismatch(
                "grids do not share bounds and resolution".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(FieldGrid {
            lattice: self.lattice,
            values,
            mask: None,
        })
    }

    /// Bilinear lookup. Exact at lattice nodes.
    pub fn sample(&self, p: Position) -> Result<f64> {
        let b = self.lattice.bounds;
        let tol = LATTICE_EPS * self.lattice.resolution.max(1.0);
        if !p.is_finite()
            || p.x < b.x_min - tol
            || p.x > b.x_max + tol
            || p.y < b.y_min - tol
            || p.y > b.y_max + tol
        {
            return Err(Error::OutOfCoverage(p));
        }
        let (i, fx) = self.axis_cell(p.x, true);
        let (j, fy) = self.axis_cell(p.y, false);
        let i1 = (i + 1).min(self.lattice.nx - 1);
        let j1 = (j + 1).min(self.lattice.ny - 1);
        let v00 = self.get(i, j);
        if fx == 0.0 && fy == 0.0 {
            return Ok(v00);
        }
        let v10 = self.get(i1, j);
        let v01 = self.get(i, j1);
        let v11 = self.get(i1, j1);
        let bottom = v00 + fx * (v10 - v00);
        let top = v01 + fx * (v11 - v01);
        Ok(bottom + fy * (top - bottom))
    }

    fn axis_cell(&self, coord: f64, along_x: bool) -> (usize, f64) {
        let lat = &self.lattice;
        let (origin, n) = if along_x {
            (lat.bounds.x_min, lat.nx)
        } else {
            (lat.bounds.y_min, lat.ny)
        };
        let node = |k: usize| if along_x { lat.x_at(k) } else { lat.y_at(k) };
        if n == 1 {
            return (0, 0.0);
        }
        let t = (coord - origin) / lat.resolution;
        let k = ((t + LATTICE_EPS).floor().max(0.0) as usize).min(n - 1);
        if k == n - 1 {
            return (k, 0.0);
        }
        let (lo, hi) = (node(k), node(k + 1));
        let f = ((coord - lo) / (hi - lo)).clamp(0.0, 1.0);
        (k, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane() -> FieldGrid {
        let b = SceneBounds::sized(2.0, 1.0).unwrap();
        FieldGrid::from_fn(b, 0.5, |p| 3.0 * p.x - 2.0 * p.y + 1.0).unwrap()
    }

    #[test]
    fn shape_follows_lattice() {
        let g = plane();
        assert_eq!(g.shape(), (3, 5));
        assert!(FieldGrid::new(g.bounds(), 0.5, vec![0.0; 14]).is_err());
        assert!(g.clone().with_mask(vec![false; 3]).is_err());
    }

    #[test]
    fn bilinear_is_exact_on_planes_and_nodes() {
        let g = plane();
        for p in g.positions() {
            assert_eq!(g.sample(p).unwrap(), 3.0 * p.x - 2.0 * p.y + 1.0);
        }
        let p = Position::new(1.3, 0.8);
        assert!((g.sample(p).unwrap() - (3.9 - 1.6 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn decimeter_nodes_are_returned_verbatim() {
        let b = SceneBounds::sized(10.0, 6.0).unwrap();
        let g = FieldGrid::from_fn(b, 0.1, |p| (p.x * 7.1).sin() + p.y.cos()).unwrap();
        for (k, p) in g.positions().into_iter().enumerate() {
            assert_eq!(g.sample(p).unwrap(), g.values()[k]);
        }
    }

    #[test]
    fn outside_coverage_is_an_error() {
        let g = plane();
        assert!(matches!(
            g.sample(Position::new(2.5, 0.0)),
            Err(Error::OutOfCoverage(_))
        ));
    }
}
