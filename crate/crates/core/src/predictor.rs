//! Exact conditional-Gaussian prediction of received power.
//!
//! With observation covariance `Σ = a²(G + jc₀I)` (unit Gram `G`, unit prior
//! `c₀`, relative jitter `j`) and target cross-covariance `a²c*`:
//!
//! * mean = `m + c*ᵀ (G + jc₀I)⁻¹ (y - m·1)`
//! * variance = `a²(c₀ - c*ᵀ (G + jc₀I)⁻¹ c*)`
//!
//! where `m` is the mean offset (zero for the strict zero-mean prior). The
//! amplitude cancels from the mean. Solves go through a Cholesky factor; no
//! inverse is formed.

use nalgebra::{Cholesky, DVector, Dyn};
use rayon::prelude::*;

use crate::covariance::{unit_gram, unit_gram_serial, CovarianceSource, KernelParams, RayKernel};
use crate::error::{Error, Result};
use crate::geometry::Position;
use crate::observation::ObservationSet;
use crate::rays::RayConfig;

/// Largest relative jitter tried before falling back to deduplication.
pub const MAX_JITTER_REL: f64 = 1e-2;
/// Jitter tried first when the configured value is exactly zero and fails.
const FIRST_NONZERO_JITTER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
    pub n_obs_used: usize,
    pub length_scale_used: f64,
}

/// `ᾱᵀ Σ_p ᾱ`, the same for every target.
pub fn prior_variance(_target: Position, cfg: &RayConfig, k: &KernelParams) -> f64 {
    k.amp2 * RayKernel::new(cfg).unit_prior(k.length_scale)
}

/// Factored observation system at one length-scale.
#[derive(Debug, Clone)]
pub(crate) struct Conditioned {
    pub positions: Vec<Position>,
    pub chol: Cholesky<f64, Dyn>,
    /// `(G + jc₀I)⁻¹ (y - m)`.
    pub weights: DVector<f64>,
    pub centered: DVector<f64>,
    pub unit_prior: f64,
    pub length_scale: f64,
}

impl Conditioned {
    /// Factors `obs` at `l`, escalating jitter and then merging duplicate
    /// positions on failure.
    pub fn build<S: CovarianceSource + ?Sized>(
        source: &S,
        obs: &ObservationSet,
        l: f64,
        jitter_rel: f64,
        mean_offset: f64,
        parallel: bool,
    ) -> Result<Self> {
        match Self::try_build(source, obs, l, jitter_rel, mean_offset, parallel) {
            Some(c) => Ok(c),
            None => {
                let (merged, duplicates) = obs.dedup_positions();
                if duplicates.is_empty() {
                    return Err(Error::Factorization { duplicates });
                }
                Self::try_build(source, &merged, l, jitter_rel, mean_offset, parallel)
                    .ok_or(Error::Factorization { duplicates })
            }
        }
    }

    fn try_build<S: CovarianceSource + ?Sized>(
        source: &S,
        obs: &ObservationSet,
        l: f64,
        jitter_rel: f64,
        mean_offset: f64,
        parallel: bool,
    ) -> Option<Self> {
        let positions = obs.positions();
        let gram = if parallel {
            unit_gram(source, &positions, l)
        } else {
            unit_gram_serial(source, &positions, l)
        };
        let unit_prior = source.unit_prior(l);
        let chol = factor_escalating(gram, unit_prior, jitter_rel)?;
        let centered = DVector::from_iterator(obs.len(), obs.iter().map(|o| o.value - mean_offset));
        let weights = chol.solve(&centered);
        Some(Self {
            positions,
            chol,
            weights,
            centered,
            unit_prior,
            length_scale: l,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    /// `ỹᵀ (G + jc₀I)⁻¹ ỹ`.
    pub fn quadratic_form(&self) -> f64 {
        self.centered.dot(&self.weights)
    }

    /// `log |G + jc₀I|`.
    pub fn log_det(&self) -> f64 {
        2.0 * self
            .chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>()
    }

    /// Mean offset `m` added back, amplitude `amp2` applied to the variance.
    pub fn predict<S: CovarianceSource + ?Sized>(
        &self,
        source: &S,
        target: Position,
        amp2: f64,
        mean_offset: f64,
    ) -> Prediction {
        let cross = DVector::from_iterator(
            self.len(),
            self.positions
                .iter()
                .map(|&p| source.unit_cov(p, target, self.length_scale)),
        );
        let mean = mean_offset + cross.dot(&self.weights);
        let reduced = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&cross)
            .expect("Cholesky factor has a positive diagonal");
        let variance = amp2 * (self.unit_prior - reduced.norm_squared());
        Prediction {
            mean,
            variance: variance.max(0.0),
            n_obs_used: self.len(),
            length_scale_used: self.length_scale,
        }
    }
}

/// Cholesky of `gram + j·prior·I`, multiplying `j` by ten on failure up to
/// [`MAX_JITTER_REL`].
pub(crate) fn factor_escalating(
    gram: nalgebra::DMatrix<f64>,
    prior: f64,
    jitter_rel: f64,
) -> Option<Cholesky<f64, Dyn>> {
    let mut jitter = jitter_rel;
    loop {
        let mut m = gram.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter * prior;
        }
        if let Some(c) = Cholesky::new(m) {
            return Some(c);
        }
        jitter = if jitter == 0.0 {
            FIRST_NONZERO_JITTER
        } else {
            jitter * 10.0
        };
        if jitter > MAX_JITTER_REL * (1.0 + 1e-9) {
            return None;
        }
    }
}

/// Posterior mean and variance at `target` given `obs`, with the prior mean
/// set to `mean_offset`.
pub fn predict(
    target: Position,
    obs: &ObservationSet,
    cfg: &RayConfig,
    k: &KernelParams,
    mean_offset: f64,
) -> Result<Prediction> {
    let mut out = predict_batch(&[target], obs, cfg, k, mean_offset)?;
    Ok(out.pop().expect("one target in, one prediction out"))
}

/// [`predict`] over many targets sharing one factorization.
pub fn predict_batch(
    targets: &[Position],
    obs: &ObservationSet,
    cfg: &RayConfig,
    k: &KernelParams,
    mean_offset: f64,
) -> Result<Vec<Prediction>> {
    predict_batch_with(&RayKernel::new(cfg), targets, obs, k, mean_offset)
}

/// [`predict_batch`] against an arbitrary covariance source.
pub fn predict_batch_with<S: CovarianceSource + ?Sized>(
    source: &S,
    targets: &[Position],
    obs: &ObservationSet,
    k: &KernelParams,
    mean_offset: f64,
) -> Result<Vec<Prediction>> {
    k.validate()?;
    if targets.is_empty() {
        return Ok(Vec::new());
    }
    let l = k.length_scale;
    if obs.is_empty() {
        let prior = k.amp2 * source.unit_prior(l);
        return Ok(vec![
            Prediction {
                mean: mean_offset,
                variance: prior,
                n_obs_used: 0,
                length_scale_used: l,
            };
            targets.len()
        ]);
    }
    let cond = Conditioned::build(source, obs, l, k.jitter_rel, mean_offset, true)?;
    Ok(targets
        .par_iter()
        .map(|&t| cond.predict(source, t, k.amp2, mean_offset))
        .collect())
}
