//! RBF kernel on virtual sources and the ray-integrated observation covariance.
//!
//! An observation is `y(p) = Σᵢ αᵢ x(p + sᵢ)` over the ray sources `sᵢ`, so
//! the covariance of two observations is `ᾱᵀ K_ab ᾱ` with `K_ab` the RBF kernel
//! between the two source sets. The kernel is stationary, hence the
//! observation covariance only depends on the receiver displacement `δ`:
//!
//! `Cov(y(a), y(a + δ)) = a² Σᵢⱼ αᵢ αⱼ exp(-|δ + sⱼ - sᵢ|² / 2l²)`.
//!
//! [`RayKernel`] evaluates that sum at unit amplitude; [`LatticeMemo`]
//! memoizes it for receivers that sit on a common lattice.

use std::sync::atomic::{AtomicU64, Ordering};

use dashmap::DashMap;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{squared_distance, Position};
use crate::rays::{loss_vector, virtual_source_positions, RayConfig};

/// RBF amplitude, length-scale and relative diagonal nugget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Prior variance `a²` of each virtual source.
    pub amp2: f64,
    /// Length-scale `l` in meters.
    pub length_scale: f64,
    /// Fraction of the prior variance added to observation-covariance diagonals.
    pub jitter_rel: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            amp2: 1.0,
            length_scale: 1.0,
            jitter_rel: 1e-6,
        }
    }
}

impl KernelParams {
    pub fn new(amp2: f64, length_scale: f64, jitter_rel: f64) -> Result<Self> {
        let k = Self {
            amp2,
            length_scale,
            jitter_rel,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amp2 > 0.0 && self.amp2.is_finite()) {
            return Err(Error::invalid("kernel.amp2", "must be positive and finite"));
        }
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::invalid(
                "kernel.length_scale",
                "must be positive and finite",
            ));
        }
        if !(self.jitter_rel >= 0.0 && self.jitter_rel.is_finite()) {
            return Err(Error::invalid(
                "kernel.jitter_rel",
                "must be non-negative and finite",
            ));
        }
        Ok(())
    }

    pub fn with_length_scale(mut self, l: f64) -> Self {
        self.length_scale = l;
        self
    }

    pub fn with_amp2(mut self, amp2: f64) -> Self {
        self.amp2 = amp2;
        self
    }
}

/// `a² exp(-||p_i - p_j||² / 2l²)`.
#[inline]
pub fn rbf_cov(p_i: Position, p_j: Position, k: &KernelParams) -> f64 {
    k.amp2 * (-squared_distance(p_i, p_j) / (2.0 * k.length_scale * k.length_scale)).exp()
}

/// Squared distances between the source sets of two receivers, reusable for
/// any amplitude and length-scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceCache {
    pub p_a: Position,
    pub p_b: Position,
    /// `(R·N) × (R·N)`, rows indexed by sources of `p_a`.
    pub sq_dist: DMatrix<f64>,
}

impl DistanceCache {
    /// `ᾱᵀ K_ab ᾱ` re-exponentiated at `k`.
    pub fn covariance(&self, weights: &[f64], k: &KernelParams) -> f64 {
        let inv = -1.0 / (2.0 * k.length_scale * k.length_scale);
        let mut acc = 0.0;
        for (i, &wi) in weights.iter().enumerate() {
            let mut row = 0.0;
            for (j, &wj) in weights.iter().enumerate() {
                row += wj * (self.sq_dist[(i, j)] * inv).exp();
            }
            acc += wi * row;
        }
        k.amp2 * acc
    }
}

pub fn build_distance_cache(p_a: Position, p_b: Position, cfg: &RayConfig) -> DistanceCache {
    let sa = virtual_source_positions(p_a, cfg);
    let sb = virtual_source_positions(p_b, cfg);
    let sq_dist = DMatrix::from_fn(sa.len(), sb.len(), |i, j| squared_distance(sa[i], sb[j]));
    DistanceCache { p_a, p_b, sq_dist }
}

/// Covariance of the observations at `p_a` and `p_b`. A supplied cache must
/// have been built for the same receivers and ray configuration.
pub fn obs_cross_cov(
    p_a: Position,
    p_b: Position,
    cfg: &RayConfig,
    k: &KernelParams,
    cache: Option<&DistanceCache>,
) -> f64 {
    let weights = loss_vector(cfg);
    match cache {
        Some(c) => {
            debug_assert!(c.p_a == p_a && c.p_b == p_b);
            c.covariance(&weights, k)
        }
        None => build_distance_cache(p_a, p_b, cfg).covariance(&weights, k),
    }
}

/// Observation covariance matrix over `positions`, with
/// `jitter_rel · prior_variance` added to the diagonal.
pub fn obs_cov_matrix(positions: &[Position], cfg: &RayConfig, k: &KernelParams) -> DMatrix<f64> {
    let kernel = RayKernel::new(cfg);
    let mut m = unit_gram(&kernel, positions, k.length_scale);
    add_jitter(&mut m, kernel.unit_prior(k.length_scale), k.jitter_rel);
    m * k.amp2
}

/// Counts RBF evaluations. Atomic so concurrent workers can share one.
#[derive(Debug, Default)]
pub struct EvalCounter(AtomicU64);

impl EvalCounter {
    pub fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

/// Unit-amplitude observation covariance as a function of receiver positions.
pub trait CovarianceSource: Sync {
    /// `Cov(y(a), y(b)) / a²` at length-scale `l`.
    fn unit_cov(&self, a: Position, b: Position, l: f64) -> f64;

    /// `Var(y(p)) / a²`, identical for every `p`.
    fn unit_prior(&self, l: f64) -> f64;

    /// RBF evaluations performed so far.
    fn kernel_evals(&self) -> u64;
}

/// Direct evaluation of the displacement form over all source pairs.
#[derive(Debug)]
pub struct RayKernel {
    cfg: RayConfig,
    /// `(αᵢαⱼ, sⱼ - sᵢ)` for `i ≠ j`.
    pairs: Vec<(f64, f64, f64)>,
    /// `Σ αᵢ²`, the coincident-source pairs.
    self_weight: f64,
    counter: EvalCounter,
}

impl RayKernel {
    pub fn new(cfg: &RayConfig) -> Self {
        let offsets = cfg.source_offsets();
        let weights = loss_vector(cfg);
        let n = offsets.len();
        let mut pairs = Vec::with_capacity(n * n - n);
        let mut self_weight = 0.0;
        for i in 0..n {
            self_weight += weights[i] * weights[i];
            for j in 0..n {
                if i != j {
                    let (ux, uy) = (offsets[j].0 - offsets[i].0, offsets[j].1 - offsets[i].1);
                    pairs.push((weights[i] * weights[j], ux, uy));
                }
            }
        }
        Self {
            cfg: *cfg,
            pairs,
            self_weight,
            counter: EvalCounter::default(),
        }
    }

    pub fn config(&self) -> &RayConfig {
        &self.cfg
    }

    pub fn counter(&self) -> &EvalCounter {
        &self.counter
    }

    /// Unit-amplitude covariance at receiver displacement `(dx, dy)`.
    pub fn at_displacement(&self, dx: f64, dy: f64, l: f64) -> f64 {
        let inv = -1.0 / (2.0 * l * l);
        let d2 = dx * dx + dy * dy;
        let mut acc = self.self_weight * (d2 * inv).exp();
        for &(w, ux, uy) in &self.pairs {
            let ex = dx + ux;
            let ey = dy + uy;
            acc += w * ((ex * ex + ey * ey) * inv).exp();
        }
        self.counter
            .add(self.pairs.len() as u64 + self.cfg.sources() as u64);
        acc
    }
}

impl CovarianceSource for RayKernel {
    fn unit_cov(&self, a: Position, b: Position, l: f64) -> f64 {
        self.at_displacement(b.x - a.x, b.y - a.y, l)
    }

    fn unit_prior(&self, l: f64) -> f64 {
        self.at_displacement(0.0, 0.0, l)
    }

    fn kernel_evals(&self) -> u64 {
        self.counter.get()
    }
}

/// Memoizes [`RayKernel`] for receivers on a lattice of spacing `resolution`.
/// Displacements that are not lattice multiples fall through to direct
/// evaluation.
#[derive(Debug)]
pub struct LatticeMemo {
    kernel: RayKernel,
    resolution: f64,
    table: DashMap<(i32, i32, u64), f64>,
}

impl LatticeMemo {
    pub fn new(cfg: &RayConfig, resolution: f64) -> Self {
        Self {
            kernel: RayKernel::new(cfg),
            resolution,
            table: DashMap::new(),
        }
    }

    pub fn entries(&self) -> usize {
        self.table.len()
    }

    fn lattice_steps(&self, d: f64) -> Option<i32> {
        let t = d / self.resolution;
        let k = t.round();
        ((t - k).abs() < 1e-6 && k.abs() < i32::MAX as f64).then_some(k as i32)
    }

    fn lookup(&self, mut i: i32, mut j: i32, l: f64) -> f64 {
        // g(δ) = g(-δ)
        if (i, j) < (0, 0) {
            i = -i;
            j = -j;
        }
        let key = (i, j, l.to_bits());
        if let Some(v) = self.table.get(&key) {
            return *v;
        }
        let v =
            self.kernel
                .at_displacement(i as f64 * self.resolution, j as f64 * self.resolution, l);
        self.table.insert(key, v);
        v
    }
}

impl CovarianceSource for LatticeMemo {
    fn unit_cov(&self, a: Position, b: Position, l: f64) -> f64 {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        match (self.lattice_steps(dx), self.lattice_steps(dy)) {
            (Some(i), Some(j)) => self.lookup(i, j, l),
            _ => self.kernel.at_displacement(dx, dy, l),
        }
    }

    fn unit_prior(&self, l: f64) -> f64 {
        self.lookup(0, 0, l)
    }

    fn kernel_evals(&self) -> u64 {
        self.kernel.counter.get()
    }
}

/// Unit-amplitude Gram matrix without jitter. Entries are filled in parallel;
/// the diagonal is the shared prior value.
pub fn unit_gram<S: CovarianceSource + ?Sized>(
    source: &S,
    positions: &[Position],
    l: f64,
) -> DMatrix<f64> {
    let m = positions.len();
    let prior = source.unit_prior(l);
    let upper: Vec<(usize, usize, f64)> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| {
            (i + 1..m).map(move |j| (i, j, source.unit_cov(positions[i], positions[j], l)))
        })
        .collect();
    let mut g = DMatrix::from_diagonal_element(m, m, prior);
    for (i, j, v) in upper {
        g[(i, j)] = v;
        g[(j, i)] = v;
    }
    g
}

/// Serial Gram assembly for the small local systems, where thread fan-out
/// costs more than it saves.
pub(crate) fn unit_gram_serial<S: CovarianceSource + ?Sized>(
    source: &S,
    positions: &[Position],
    l: f64,
) -> DMatrix<f64> {
    let m = positions.len();
    let mut g = DMatrix::from_diagonal_element(m, m, source.unit_prior(l));
    for i in 0..m {
        for j in i + 1..m {
            let v = source.unit_cov(positions[i], positions[j], l);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

pub(crate) fn add_jitter(m: &mut DMatrix<f64>, prior: f64, jitter_rel: f64) {
    for i in 0..m.nrows() {
        m[(i, i)] += jitter_rel * prior;
    }
}
