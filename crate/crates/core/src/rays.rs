//! Ray structure around a receiver.
//!
//! A receiver at `p` hears `R` rays spread evenly in angle, each carrying `N`
//! virtual signal sources spaced `d` meters apart. Source `(r, n)` sits at
//! `p + n·d·(cos θ_r, sin θ_r)` with `θ_r = 2πr/R`, and contributes with weight
//! `β / (n·d)`. Both lists use the same layout: ray outer, sample inner.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::geometry::Position;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayConfig {
    /// Number of rays `R`.
    pub rays: usize,
    /// Sources per ray `N`.
    pub samples: usize,
    /// On-ray spacing `d` in meters.
    pub spacing: f64,
    /// Medium parameter `β`.
    pub beta: f64,
}

impl Default for RayConfig {
    fn default() -> Self {
        Self {
            rays: 16,
            samples: 16,
            spacing: 0.25,
            beta: 1.0,
        }
    }
}

impl RayConfig {
    pub fn new(rays: usize, samples: usize, spacing: f64, beta: f64) -> Result<Self> {
        let cfg = Self {
            rays,
            samples,
            spacing,
            beta,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rays == 0 {
            return Err(Error::invalid("rays.R", "at least one ray is required"));
        }
        if self.samples == 0 {
            return Err(Error::invalid(
                "rays.N",
                "at least one sample per ray is required",
            ));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::invalid("rays.d", "must be positive and finite"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("rays.beta", "must be positive and finite"));
        }
        Ok(())
    }

    /// `R·N`.
    pub fn sources(&self) -> usize {
        self.rays * self.samples
    }

    /// Longest source distance from the receiver, `N·d`.
    pub fn reach(&self) -> f64 {
        self.samples as f64 * self.spacing
    }

    /// Source displacements relative to the receiver.
    pub fn source_offsets(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.sources());
        for r in 1..=self.rays {
            let theta = TAU * r as f64 / self.rays as f64;
            let (s, c) = theta.sin_cos();
            for n in 1..=self.samples {
                let dist = n as f64 * self.spacing;
                out.push((dist * c, dist * s));
            }
        }
        out
    }
}

/// Virtual-source positions feeding a receiver at `p_rx`, ray outer, sample inner.
pub fn virtual_source_positions(p_rx: Position, cfg: &RayConfig) -> Vec<Position> {
    cfg.source_offsets()
        .into_iter()
        .map(|(dx, dy)| p_rx.offset(dx, dy))
        .collect()
}

/// Propagation-loss weights `β/(n·d)` in the same layout as
/// [`virtual_source_positions`]. Independent of the receiver position.
pub fn loss_vector(cfg: &RayConfig) -> Vec<f64> {
    let per_ray: Vec<f64> = (1..=cfg.samples)
        .map(|n| cfg.beta / (n as f64 * cfg.spacing))
        .collect();
    per_ray.repeat(cfg.rays)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[Position], b: &[(f64, f64)]) {
        assert_eq!(a.len(), b.len());
        for (p, &(x, y)) in a.iter().zip(b) {
            assert!(
                (p.x - x).abs() < 1e-12 && (p.y - y).abs() < 1e-12,
                "{p:?} vs ({x}, {y})"
            );
        }
    }

    #[test]
    fn four_unit_rays() {
        let cfg = RayConfig::new(4, 1, 1.0, 1.0).unwrap();
        let pts = virtual_source_positions(Position::new(0.0, 0.0), &cfg);
        close(&pts, &[(0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 0.0)]);
    }

    #[test]
    fn single_ray_points_along_x() {
        let cfg = RayConfig::new(1, 2, 0.5, 1.0).unwrap();
        let pts = virtual_source_positions(Position::new(2.0, 3.0), &cfg);
        close(&pts, &[(2.5, 3.0), (3.0, 3.0)]);
    }

    #[test]
    fn two_opposite_rays() {
        let cfg = RayConfig::new(2, 1, 1.0, 1.0).unwrap();
        let pts = virtual_source_positions(Position::new(0.0, 0.0), &cfg);
        close(&pts, &[(-1.0, 0.0), (1.0, 0.0)]);
    }

    #[test]
    fn loss_vector_examples() {
        assert_eq!(
            loss_vector(&RayConfig::new(1, 2, 0.5, 1.0).unwrap()),
            vec![2.0, 1.0]
        );
        assert_eq!(
            loss_vector(&RayConfig::new(8, 1, 1.0, 1.0).unwrap()),
            vec![1.0; 8]
        );
        let w = loss_vector(&RayConfig::new(2, 3, 1.0, 2.0).unwrap());
        let third = 2.0 / 3.0;
        assert_eq!(w, vec![2.0, 1.0, third, 2.0, 1.0, third]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(RayConfig::new(0, 1, 1.0, 1.0).is_err());
        assert!(RayConfig::new(1, 0, 1.0, 1.0).is_err());
        assert!(RayConfig::new(1, 1, 0.0, 1.0).is_err());
        assert!(RayConfig::new(1, 1, 1.0, -2.0).is_err());
    }
}
