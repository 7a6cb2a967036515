//! Full-lattice reconstruction: prediction mean and variance on every node.

use crate::covariance::{CovarianceSource, KernelParams, LatticeMemo};
use crate::error::Result;
use crate::field::FieldGrid;
use crate::geometry::{Lattice, Position};
use crate::local::{LocalOptions, LocalPrediction, LocalPredictor};
use crate::observation::ObservationSet;
use crate::rays::RayConfig;

/// Which observations a target conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scope {
    /// Neighborhood of radius `L` with a per-neighborhood kernel fit.
    #[default]
    Local,
    /// All observations with one kernel fit.
    Global,
}

impl Scope {
    pub fn options(self, opts: &LocalOptions) -> LocalOptions {
        match self {
            Scope::Local => opts.clone(),
            Scope::Global => LocalOptions {
                radius: f64::MAX,
                ..opts.clone()
            },
        }
    }
}

/// Predicted mean and variance grids.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub mean: FieldGrid,
    pub variance: FieldGrid,
    pub predictions: Vec<LocalPrediction>,
}

/// Predictions at arbitrary targets.
pub fn predict_targets<S: CovarianceSource + ?Sized>(
    source: &S,
    obs: &ObservationSet,
    targets: &[Position],
    kernel: &KernelParams,
    opts: &LocalOptions,
    scope: Scope,
) -> Result<Vec<LocalPrediction>> {
    LocalPredictor::new(source, obs, *kernel, scope.options(opts))?.predict_many(targets)
}

/// Reconstructs every node of `lattice` from `obs`.
pub fn reconstruct_with<S: CovarianceSource + ?Sized>(
    source: &S,
    lattice: &Lattice,
    obs: &ObservationSet,
    kernel: &KernelParams,
    opts: &LocalOptions,
    scope: Scope,
) -> Result<Reconstruction> {
    let predictions = predict_targets(source, obs, &lattice.positions(), kernel, opts, scope)?;
    let b = lattice.bounds;
    let r = lattice.resolution;
    Ok(Reconstruction {
        mean: FieldGrid::new(b, r, predictions.iter().map(|p| p.mean).collect())?,
        variance: FieldGrid::new(b, r, predictions.iter().map(|p| p.variance).collect())?,
        predictions,
    })
}

/// [`reconstruct_with`] using a lattice-memoized ray kernel.
pub fn reconstruct(
    lattice: &Lattice,
    obs: &ObservationSet,
    cfg: &RayConfig,
    kernel: &KernelParams,
    opts: &LocalOptions,
    scope: Scope,
) -> Result<Reconstruction> {
    let memo = LatticeMemo::new(cfg, lattice.resolution);
    reconstruct_with(&memo, lattice, obs, kernel, opts, scope)
}
