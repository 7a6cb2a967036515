//! Median and mean absolute error over lattice cells that were not observed.

use crate::active::SamplingTrace;
use crate::covariance::{CovarianceSource, KernelParams, LatticeMemo};
use crate::error::{Error, Result};
use crate::field::FieldGrid;
use crate::geometry::Position;
use crate::local::LocalOptions;
use crate::rays::RayConfig;
use crate::reconstruct::{reconstruct_with, Scope};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub mae: f64,
    pub median_ae: f64,
    pub n_evaluated: usize,
}

/// Errors of `pred` against `truth` over cells not hit by `exclude` (each
/// position masks its nearest cell) and not masked by `truth`'s own mask.
pub fn error_report(
    pred: &FieldGrid,
    truth: &FieldGrid,
    exclude: &[Position],
) -> Result<ErrorReport> {
    if !pred.same_geometry(truth) {
        return Err(Error::ShapeMismatch(
            "prediction and truth grids differ in bounds or resolution".into(),
        ));
    }
    let lattice = truth.lattice();
    let mut masked = match truth.mask() {
        Some(m) => m.to_vec(),
        None => vec![false; lattice.len()],
    };
    for &p in exclude {
        masked[lattice.nearest(p)] = true;
    }
    let errors: Vec<f64> = pred
        .values()
        .iter()
        .zip(truth.values())
        .zip(&masked)
        .filter(|(_, &m)| !m)
        .map(|((a, b), _)| (a - b).abs())
        .collect();
    summarize(errors)
}

pub(crate) fn summarize(mut errors: Vec<f64>) -> Result<ErrorReport> {
    if errors.is_empty() {
        return Err(Error::AllMasked);
    }
    let n = errors.len();
    let mae = errors.iter().sum::<f64>() / n as f64;
    errors.sort_by(f64::total_cmp);
    let median_ae = if n % 2 == 1 {
        errors[n / 2]
    } else {
        0.5 * (errors[n / 2 - 1] + errors[n / 2])
    };
    Ok(ErrorReport {
        mae,
        median_ae,
        n_evaluated: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub n_obs: usize,
    pub mae: f64,
    pub median_ae: f64,
}

/// Trace prefix lengths at which [`error_curve`] evaluates: every multiple of
/// `stride` plus the full length.
pub fn curve_lengths(len: usize, stride: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    let stride = stride.max(1);
    let mut out: Vec<usize> = (1..=len / stride).map(|k| k * stride).collect();
    if out.last() != Some(&len) {
        out.push(len);
    }
    out
}

/// Reconstruction error after each `stride` trace observations.
pub fn error_curve(
    trace: &SamplingTrace,
    truth: &FieldGrid,
    cfg: &RayConfig,
    kernel: &KernelParams,
    opts: &LocalOptions,
    eval_stride: usize,
) -> Result<Vec<CurvePoint>> {
    let memo = LatticeMemo::new(cfg, truth.resolution());
    error_curve_with(&memo, trace, truth, kernel, opts, eval_stride)
}

pub fn error_curve_with<S: CovarianceSource + ?Sized>(
    source: &S,
    trace: &SamplingTrace,
    truth: &FieldGrid,
    kernel: &KernelParams,
    opts: &LocalOptions,
    eval_stride: usize,
) -> Result<Vec<CurvePoint>> {
    let all = trace.observations()?;
    curve_lengths(all.len(), eval_stride)
        .into_iter()
        .map(|n| {
            let obs = all.prefix(n);
            let rec = reconstruct_with(source, truth.lattice(), &obs, kernel, opts, Scope::Local)?;
            let rep = error_report(&rec.mean, truth, &obs.positions())?;
            Ok(CurvePoint {
                n_obs: n,
                mae: rep.mae,
                median_ae: rep.median_ae,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SceneBounds;

    fn grid(values: &[f64]) -> FieldGrid {
        let cols = values.len().min(3);
        let b =
            SceneBounds::sized((cols - 1) as f64, (values.len() / cols - 1).max(1) as f64).unwrap();
        FieldGrid::new(b, 1.0, values.to_vec()).unwrap()
    }

    #[test]
    fn skewed_errors() {
        let b = SceneBounds::sized(2.0, 1.0).unwrap();
        let truth = FieldGrid::constant(b, 1.0, 0.0).unwrap();
        let pred = FieldGrid::new(b, 1.0, vec![1.0, -2.0, 10.0, 0.0, 0.0, 0.0]).unwrap();
        let exclude = [
            Position::new(0.0, 1.0),
            Position::new(1.0, 1.0),
            Position::new(2.0, 1.0),
        ];
        let r = error_report(&pred, &truth, &exclude).unwrap();
        assert!((r.mae - 13.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.median_ae, 2.0);
        assert_eq!(r.n_evaluated, 3);
    }

    #[test]
    fn identical_grids_have_zero_error() {
        let g = grid(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let r = error_report(&g, &g, &[]).unwrap();
        assert_eq!((r.mae, r.median_ae, r.n_evaluated), (0.0, 0.0, 6));
    }

    #[test]
    fn excluded_cell_is_dropped() {
        let b = SceneBounds::sized(1.0, 1.0).unwrap();
        let truth = FieldGrid::new(b, 1.0, vec![0.0, 0.0, 0.0, 0.0]).unwrap();
        let pred = FieldGrid::new(b, 1.0, vec![1.0, 2.0, 3.0, 100.0]).unwrap();
        let r = error_report(&pred, &truth, &[Position::new(0.9, 0.8)]).unwrap();
        assert_eq!(r.n_evaluated, 3);
        assert_eq!(r.mae, 2.0);
        assert_eq!(r.median_ae, 2.0);
    }

    #[test]
    fn even_count_median_averages_middle_pair() {
        let r = summarize(vec![4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(r.median_ae, 2.5);
        assert!(matches!(summarize(vec![]), Err(Error::AllMasked)));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = grid(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = FieldGrid::constant(SceneBounds::sized(4.0, 1.0).unwrap(), 1.0, 0.0).unwrap();
        assert!(matches!(
            error_report(&a, &b, &[]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn curve_lengths_cover_the_trace() {
        assert!(curve_lengths(0, 5).is_empty());
        assert_eq!(curve_lengths(7, 10), vec![7]);
        assert_eq!(curve_lengths(10, 5), vec![5, 10]);
        assert_eq!(curve_lengths(12, 5), vec![5, 10, 12]);
    }
}
