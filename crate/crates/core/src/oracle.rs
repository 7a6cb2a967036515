//! Synthetic ground-truth fields and brute-force reference computations.
//!
//! These stand in for measured scenes. Every generator is a pure function of
//! its arguments and seed.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::covariance::{rbf_cov, KernelParams};
use crate::error::{Error, Result};
use crate::field::FieldGrid;
use crate::geometry::{squared_distance, Lattice, Position, SceneBounds};
use crate::predictor::factor_escalating;
use crate::rays::{loss_vector, virtual_source_positions, RayConfig};

/// Largest lattice [`gen_gp_field`] will factor densely.
pub const GP_FIELD_MAX_POINTS: usize = 4000;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Description of a synthetic truth field.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleSpec {
    Constant {
        value: f64,
    },
    /// Log-distance path loss around a transmitter.
    PathLoss {
        tx: Position,
        p0: f64,
        gamma: f64,
    },
    /// `base` plus a product-of-sines ripple inside `region`.
    Sharp {
        base: Box<OracleSpec>,
        region: SceneBounds,
        ripple_amp: f64,
        ripple_period: f64,
    },
    /// One exact draw of the zero-mean RBF prior on the lattice.
    Gp {
        length_scale: f64,
        amp2: f64,
        seed: u64,
    },
    /// `base` at slot t; slot t+1 adds a Gaussian bump.
    DynamicPair {
        base: Box<OracleSpec>,
        bump_center: Position,
        bump_amp: f64,
        bump_radius: f64,
    },
}

impl OracleSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            OracleSpec::Constant { .. } => "constant",
            OracleSpec::PathLoss { .. } => "pathloss",
            OracleSpec::Sharp { .. } => "sharp",
            OracleSpec::Gp { .. } => "gp",
            OracleSpec::DynamicPair { .. } => "dynamic-pair",
        }
    }

    /// Renders the field. For a dynamic pair this is the slot-(t+1) field.
    pub fn render(&self, bounds: SceneBounds, res: f64) -> Result<FieldGrid> {
        match self {
            OracleSpec::Constant { value } => FieldGrid::constant(bounds, res, *value),
            OracleSpec::PathLoss { tx, p0, gamma } => {
                gen_pathloss_field(bounds, res, *tx, *p0, *gamma)
            }
            OracleSpec::Sharp {
                base,
                region,
                ripple_amp,
                ripple_period,
            } => gen_sharp_field(bounds, res, base, *region, *ripple_amp, *ripple_period),
            OracleSpec::Gp {
                length_scale,
                amp2,
                seed,
            } => gen_gp_field(bounds, res, *length_scale, *amp2, *seed),
            OracleSpec::DynamicPair {
                base,
                bump_center,
                bump_amp,
                bump_radius,
            } => Ok(gen_dynamic_pair(bounds, res, base, *bump_center, *bump_amp, *bump_radius)?.1),
        }
    }
}

/// `p0 - 10·γ·log10(max(|p - tx|, res))`.
pub fn gen_pathloss_field(
    bounds: SceneBounds,
    res: f64,
    tx_pos: Position,
    p0: f64,
    gamma: f64,
) -> Result<FieldGrid> {
    if !bounds.contains(tx_pos) {
        return Err(Error::OutOfCoverage(tx_pos));
    }
    FieldGrid::from_fn(bounds, res, |p| {
        p0 - 10.0 * gamma * p.distance(tx_pos).max(res).log10()
    })
}

/// `base` plus `amp·sin(2πx/T)·sin(2πy/T)` on the closed `region`.
pub fn gen_sharp_field(
    bounds: SceneBounds,
    res: f64,
    base: &OracleSpec,
    region: SceneBounds,
    ripple_amp: f64,
    ripple_period: f64,
) -> Result<FieldGrid> {
    region.validate()?;
    if region.x_min < bounds.x_min
        || region.x_max > bounds.x_max
        || region.y_min < bounds.y_min
        || region.y_max > bounds.y_max
    {
        return Err(Error::invalid("oracle.region", "must lie inside the scene"));
    }
    if ripple_period.is_nan() || ripple_period <= 0.0 {
        return Err(Error::invalid("oracle.ripple_period", "must be positive"));
    }
    let mut grid = base.render(bounds, res)?;
    let positions = grid.positions();
    for (v, p) in grid.values_mut().iter_mut().zip(positions) {
        if region.contains(p) {
            *v += ripple(p, ripple_amp, ripple_period);
        }
    }
    Ok(grid)
}

fn ripple(p: Position, amp: f64, period: f64) -> f64 {
    amp * (TAU * p.x / period).sin() * (TAU * p.y / period).sin()
}

/// One draw of the zero-mean RBF field with length-scale `l` and variance
/// `amp2`, sampled exactly on the lattice.
pub fn gen_gp_field(
    bounds: SceneBounds,
    res: f64,
    l: f64,
    amp2: f64,
    seed: u64,
) -> Result<FieldGrid> {
    KernelParams::new(amp2, l, 0.0)?;
    let lattice = Lattice::new(bounds, res)?;
    let n = lattice.len();
    if n > GP_FIELD_MAX_POINTS {
        return Err(Error::LatticeTooLarge {
            points: n,
            limit: GP_FIELD_MAX_POINTS,
        });
    }
    let pts = lattice.positions();
    let inv = -1.0 / (2.0 * l * l);
    let gram = DMatrix::from_fn(n, n, |i, j| (squared_distance(pts[i], pts[j]) * inv).exp());
    let chol = factor_escalating(gram, 1.0, 1e-10).ok_or(Error::Factorization {
        duplicates: Vec::new(),
    })?;
    let mut rng = rng(seed);
    let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
    let draw = chol.l() * z * amp2.sqrt();
    FieldGrid::new(bounds, res, draw.as_slice().to_vec())
}

/// Slot-t field from `base` and a slot-(t+1) copy with
/// `amp·exp(-|p - c|² / (2·(r/2)²))` added.
pub fn gen_dynamic_pair(
    bounds: SceneBounds,
    res: f64,
    base: &OracleSpec,
    bump_center: Position,
    bump_amp: f64,
    bump_radius: f64,
) -> Result<(FieldGrid, FieldGrid)> {
    if !bounds.contains(bump_center) {
        return Err(Error::OutOfCoverage(bump_center));
    }
    if bump_radius.is_nan() || bump_radius <= 0.0 {
        return Err(Error::invalid("oracle.bump_radius", "must be positive"));
    }
    let before = base.render(bounds, res)?;
    let mut after = before.clone();
    let positions = after.positions();
    for (v, p) in after.values_mut().iter_mut().zip(positions) {
        *v += bump(p, bump_center, bump_amp, bump_radius);
    }
    Ok((before, after))
}

pub(crate) fn bump(p: Position, center: Position, amp: f64, radius: f64) -> f64 {
    let sigma = 0.5 * radius;
    amp * (-squared_distance(p, center) / (2.0 * sigma * sigma)).exp()
}

/// Monte-Carlo estimate of `Cov(y(p_a), y(p_b))` from joint draws of the
/// virtual sources, with its standard error.
pub fn mc_cov_oracle(
    p_a: Position,
    p_b: Position,
    cfg: &RayConfig,
    k: &KernelParams,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    k.validate()?;
    if n_samples < 2 {
        return Err(Error::invalid(
            "n_samples",
            "at least two samples are required",
        ));
    }
    let weights = loss_vector(cfg);
    let mut union: Vec<Position> = Vec::new();
    let mut place = |p: Position| match union.iter().position(|&q| q == p) {
        Some(i) => i,
        None => {
            union.push(p);
            union.len() - 1
        }
    };
    let idx_a: Vec<usize> = virtual_source_positions(p_a, cfg)
        .into_iter()
        .map(&mut place)
        .collect();
    let idx_b: Vec<usize> = virtual_source_positions(p_b, cfg)
        .into_iter()
        .map(&mut place)
        .collect();
    let n = union.len();
    let kmat = DMatrix::from_fn(n, n, |i, j| rbf_cov(union[i], union[j], k));
    let eig = SymmetricEigen::new(kmat);
    // y = αᵀx with x = V·√Λ·z, so y = wᵀz for w = √Λ·Vᵀ·α
    let project = |idx: &[usize]| {
        let mut alpha = DVector::zeros(n);
        for (&i, &w) in idx.iter().zip(&weights) {
            alpha[i] += w;
        }
        let mut w = eig.eigenvectors.transpose() * alpha;
        for (wi, &lam) in w.iter_mut().zip(eig.eigenvalues.iter()) {
            *wi *= lam.max(0.0).sqrt();
        }
        w
    };
    let (wa, wb) = (project(&idx_a), project(&idx_b));
    let mut rng = rng(seed);
    let mut z = DVector::zeros(n);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let prod = wa.dot(&z) * wb.dot(&z);
        sum += prod;
        sum_sq += prod * prod;
    }
    let nf = n_samples as f64;
    let mean = sum / nf;
    let var = (sum_sq - nf * mean * mean) / (nf - 1.0);
    Ok((mean, (var.max(0.0) / nf).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> SceneBounds {
        SceneBounds::sized(10.0, 6.0).unwrap()
    }

    #[test]
    fn pathloss_reference_distances() {
        let tx = Position::new(2.0, 3.0);
        let g = gen_pathloss_field(room(), 0.5, tx, -30.0, 2.0).unwrap();
        let at = |x: f64, y: f64| g.sample(Position::new(x, y)).unwrap();
        assert!((at(3.0, 3.0) + 30.0).abs() < 1e-12);
        assert!((at(2.0, 4.0) + 30.0).abs() < 1e-12);
        // 10 m away would leave the room; check the log law at 8 m instead
        assert!((at(10.0, 3.0) - (-30.0 - 20.0 * 8f64.log10())).abs() < 1e-12);
        assert!(gen_pathloss_field(room(), 0.5, Position::new(11.0, 0.0), 0.0, 2.0).is_err());
    }

    #[test]
    fn pathloss_ten_meters() {
        let b = SceneBounds::sized(12.0, 2.0).unwrap();
        let g = gen_pathloss_field(b, 1.0, Position::new(0.0, 0.0), -20.0, 3.0).unwrap();
        assert!((g.get(10, 0) - (-50.0)).abs() < 1e-12);
        assert_eq!(g.get(0, 0), -20.0);
    }

    #[test]
    fn pathloss_is_radially_non_increasing() {
        let tx = Position::new(5.0, 3.0);
        let g = gen_pathloss_field(room(), 0.1, tx, -30.0, 2.5).unwrap();
        for j in 0..61 {
            for i in 50..100 {
                assert!(g.get(i + 1, j) <= g.get(i, j) + 1e-12);
            }
        }
    }

    #[test]
    fn sharp_field_only_changes_the_region() {
        let base = OracleSpec::Constant { value: -50.0 };
        let region = SceneBounds::new(5.0, 10.0, 0.0, 6.0).unwrap();
        let g = gen_sharp_field(room(), 0.25, &base, region, 4.0, 2.0).unwrap();
        for (p, &v) in g.positions().iter().zip(g.values()) {
            if !region.contains(*p) {
                assert_eq!(v, -50.0);
            }
        }
        // crest at x = y = T/4 (mod T)
        let crest = g.sample(Position::new(6.5, 4.5)).unwrap();
        assert!((crest - (-46.0)).abs() < 1e-9);
    }

    #[test]
    fn gp_field_is_deterministic_per_seed() {
        let b = SceneBounds::sized(2.0, 2.0).unwrap();
        let a = gen_gp_field(b, 0.2, 0.7, 2.0, 9).unwrap();
        assert_eq!(a, gen_gp_field(b, 0.2, 0.7, 2.0, 9).unwrap());
        assert_ne!(a, gen_gp_field(b, 0.2, 0.7, 2.0, 10).unwrap());
        assert!(matches!(
            gen_gp_field(room(), 0.1, 1.0, 1.0, 0),
            Err(Error::LatticeTooLarge { points: 6161, .. })
        ));
    }

    #[test]
    fn dynamic_pair_bump() {
        let base = OracleSpec::Constant { value: -40.0 };
        let c = Position::new(7.0, 3.0);
        let (t0, t1) = gen_dynamic_pair(room(), 0.1, &base, c, 6.0, 1.0).unwrap();
        let diff = t1.zip_with(&t0, |a, b| a - b).unwrap();
        assert!((diff.sample(c).unwrap() - 6.0).abs() < 1e-12);
        for (p, &d) in diff.positions().iter().zip(diff.values()) {
            if p.distance(c) > 3.0 {
                assert!(d.abs() < 0.02 * 6.0);
            }
        }
        let (a, b) = gen_dynamic_pair(room(), 0.1, &base, c, 0.0, 1.0).unwrap();
        assert_eq!(a, b);
    }
}
