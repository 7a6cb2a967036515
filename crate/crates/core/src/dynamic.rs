//! Reconstruction of a changed field from a known baseline.
//!
//! Instead of relearning the slot-(t+1) field, the sampler measures the
//! change `e = y_{t+1} - baseline` and reconstructs it as a zero-mean field.
//! The output is `baseline + ê` on the baseline lattice.

use crate::active::{
    run_active_on, Difference, SamplerParams, SamplingTrace, Scoring, ValueSource,
};
use crate::covariance::{CovarianceSource, KernelParams, LatticeMemo};
use crate::error::{Error, Result};
use crate::field::FieldGrid;
use crate::geometry::Lattice;
use crate::local::{Centering, LocalOptions};
use crate::observation::{Observation, ObservationSet};
use crate::rays::RayConfig;
use crate::reconstruct::{reconstruct_with, Reconstruction, Scope};

/// Subtracts the interpolated baseline from every observation.
pub fn difference_observations(
    new_obs: &ObservationSet,
    baseline: &FieldGrid,
) -> Result<ObservationSet> {
    let items = new_obs
        .iter()
        .map(|o| {
            let b = baseline.sample(o.position)?;
            Ok(Observation::new(o.position, o.value - b).at_slot(o.slot))
        })
        .collect::<Result<Vec<_>>>()?;
    ObservationSet::new(items)
}

/// `baseline + difference`, cell by cell.
pub fn compose(baseline: &FieldGrid, difference: &FieldGrid) -> Result<FieldGrid> {
    baseline.zip_with(difference, |b, e| b + e)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicResult {
    /// Reconstructed slot-(t+1) field.
    pub composed: FieldGrid,
    pub difference: Reconstruction,
    /// Selected positions; the recorded values are differences.
    pub trace: SamplingTrace,
}

/// Options for the difference pipeline: the caller's settings with strict
/// zero-mean centering.
pub fn difference_options(opts: &LocalOptions) -> LocalOptions {
    LocalOptions {
        centering: Centering::Zero,
        ..opts.clone()
    }
}

/// Active sampling of the change field, then composition with the baseline.
///
/// Candidates lie on the lattice at `params.candidate_res`; the composed
/// grid uses the baseline's lattice. When `truth_t1` is given, per-round
/// metrics score the composed field against it.
#[allow(clippy::too_many_arguments)]
pub fn reconstruct_dynamic<O: ValueSource + ?Sized>(
    baseline: &FieldGrid,
    oracle_t1: &O,
    cfg: &RayConfig,
    kernel: &KernelParams,
    opts: &LocalOptions,
    params: &SamplerParams,
    truth_t1: Option<&FieldGrid>,
) -> Result<DynamicResult> {
    let memo = LatticeMemo::new(cfg, baseline.resolution());
    reconstruct_dynamic_with(&memo, baseline, oracle_t1, kernel, opts, params, truth_t1)
}

/// [`reconstruct_dynamic`] over an explicit covariance source.
pub fn reconstruct_dynamic_with<S: CovarianceSource + ?Sized, O: ValueSource + ?Sized>(
    memo: &S,
    baseline: &FieldGrid,
    oracle_t1: &O,
    kernel: &KernelParams,
    opts: &LocalOptions,
    params: &SamplerParams,
    truth_t1: Option<&FieldGrid>,
) -> Result<DynamicResult> {
    let bounds = baseline.bounds();
    let opts = difference_options(opts);
    let candidates = Lattice::new(bounds, params.candidate_res)?.positions();
    let oracle = Difference {
        minuend: oracle_t1,
        baseline,
    };
    let scoring = match truth_t1 {
        Some(t) if !t.same_geometry(baseline) => {
            return Err(Error::ShapeMismatch(
                "baseline and slot-(t+1) truth grids differ".into(),
            ))
        }
        Some(truth) => Some(Scoring {
            truth,
            baseline: Some(baseline),
        }),
        None => None,
    };
    let mut trace = run_active_on(
        memo,
        &oracle,
        bounds,
        &candidates,
        kernel,
        &opts,
        params,
        scoring,
    )?;
    trace.slot = 1;
    let diffs = trace.observations()?;
    let difference = reconstruct_with(
        memo,
        baseline.lattice(),
        &diffs,
        kernel,
        &opts,
        Scope::Local,
    )?;
    let composed = compose(baseline, &difference.mean)?;
    Ok(DynamicResult {
        composed,
        difference,
        trace,
    })
}
