//! Per-target neighborhoods and maximum-likelihood length-scales.
//!
//! For each target only the observations within radius `L` enter the model.
//! The length-scale is the grid point maximizing the Gaussian log-likelihood
//! of those observations, and the amplitude is either fixed or profiled out
//! in closed form, `â²(l) = ỹᵀ C_l⁻¹ ỹ / M_local`. Prediction then conditions
//! on the same neighborhood with the fitted kernel, so each factorization is
//! `M_local × M_local` instead of `M × M`.

use std::collections::HashMap;
use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::covariance::{CovarianceSource, KernelParams, RayKernel};
use crate::error::{Error, Result};
use crate::geometry::{squared_distance, Position};
use crate::observation::ObservationSet;
use crate::predictor::{Conditioned, Prediction};
use crate::rays::RayConfig;

/// Lower bound on a profiled prior variance `â²·c₀`, in power².
pub const PRIOR_VARIANCE_FLOOR: f64 = 1e-12;

/// How the prior mean of a neighborhood is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Centering {
    /// Mean of the observations that enter the prediction.
    #[default]
    LocalMean,
    /// Zero prior mean.
    Zero,
}

impl Centering {
    pub fn offset(self, obs: &ObservationSet) -> f64 {
        match self {
            Centering::LocalMean => obs.mean_value().unwrap_or(0.0),
            Centering::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOptions {
    /// Locality radius `L` in meters.
    pub radius: f64,
    /// Candidate length-scales, strictly increasing.
    pub l_grid: Vec<f64>,
    pub min_local: usize,
    pub expand_factor: f64,
    pub max_expansions: usize,
    /// Profile the amplitude out instead of using [`KernelParams::amp2`].
    pub estimate_amp2: bool,
    pub centering: Centering,
}

impl Default for LocalOptions {
    fn default() -> Self {
        Self {
            radius: 1.0,
            l_grid: log_grid(0.1, 5.0, 25),
            min_local: 3,
            expand_factor: 1.5,
            max_expansions: 3,
            estimate_amp2: true,
            centering: Centering::LocalMean,
        }
    }
}

impl LocalOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid("local.L", "must be positive"));
        }
        if self.l_grid.is_empty() {
            return Err(Error::invalid(
                "local.l_grid",
                "needs at least one candidate",
            ));
        }
        if self.l_grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::invalid(
                "local.l_grid",
                "candidates must be positive",
            ));
        }
        if self.l_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "local.l_grid",
                "must be strictly increasing",
            ));
        }
        if self.min_local == 0 {
            return Err(Error::invalid("local.min_local", "must be at least 1"));
        }
        if !(self.expand_factor > 1.0 && self.expand_factor.is_finite()) {
            return Err(Error::invalid("local.expand_factor", "must exceed 1"));
        }
        Ok(())
    }

    /// Single fixed length-scale, no amplitude estimation.
    pub fn fixed(radius: f64, l: f64) -> Self {
        Self {
            radius,
            l_grid: vec![l],
            estimate_amp2: false,
            ..Self::default()
        }
    }

    pub fn max_radius(&self) -> f64 {
        self.radius * self.expand_factor.powi(self.max_expansions as i32)
    }
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| {
                    if i + 1 == count {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPrediction {
    pub mean: f64,
    pub variance: f64,
    pub l_hat: f64,
    pub amp2_hat: f64,
    pub n_local: usize,
    pub radius_used: f64,
}

impl LocalPrediction {
    pub fn as_prediction(&self) -> Prediction {
        Prediction {
            mean: self.mean,
            variance: self.variance,
            n_obs_used: self.n_local,
            length_scale_used: self.l_hat,
        }
    }
}

fn within_indices(target: Position, obs: &ObservationSet, radius: f64) -> Vec<usize> {
    let r2 = radius * radius;
    obs.iter()
        .enumerate()
        .filter(|(_, o)| squared_distance(o.position, target) <= r2)
        .map(|(i, _)| i)
        .collect()
}

/// Observations within `radius` of `target` (boundary included), in input order.
pub fn select_local(target: Position, obs: &ObservationSet, radius: f64) -> ObservationSet {
    obs.subset(&within_indices(target, obs, radius))
}

fn gaussian_log_likelihood(cond: &Conditioned, amp2: f64) -> f64 {
    let m = cond.len() as f64;
    -0.5 * cond.quadratic_form() / amp2
        - 0.5 * (m * amp2.ln() + cond.log_det())
        - 0.5 * m * TAU.ln()
}

fn profiled_amp2(cond: &Conditioned) -> f64 {
    let q = cond.quadratic_form() / cond.len() as f64;
    q.max(PRIOR_VARIANCE_FLOOR / cond.unit_prior)
}

/// Log-likelihood of `local_obs` (shifted by `mean_offset`) under the
/// observation covariance at length-scale `l` and amplitude `amp2`.
pub fn log_likelihood(
    l: f64,
    local_obs: &ObservationSet,
    cfg: &RayConfig,
    amp2: f64,
    jitter_rel: f64,
    mean_offset: f64,
) -> Result<f64> {
    if local_obs.is_empty() {
        return Err(Error::InsufficientNeighborhood {
            found: 0,
            required: 1,
        });
    }
    let kernel = RayKernel::new(cfg);
    let cond = Conditioned::build(&kernel, local_obs, l, jitter_rel, mean_offset, false)?;
    Ok(gaussian_log_likelihood(&cond, amp2))
}

/// Fitted kernel for one neighborhood.
#[derive(Debug, Clone)]
struct Fit {
    l_hat: f64,
    amp2_hat: f64,
    cond: Conditioned,
}

fn fit_neighborhood<S: CovarianceSource + ?Sized>(
    source: &S,
    local_obs: &ObservationSet,
    kernel: &KernelParams,
    opts: &LocalOptions,
    mean_offset: f64,
) -> Result<Fit> {
    if local_obs.len() < opts.min_local {
        return Err(Error::InsufficientNeighborhood {
            found: local_obs.len(),
            required: opts.min_local,
        });
    }
    let mut best: Option<(f64, Fit)> = None;
    let mut last_err = None;
    for &l in &opts.l_grid {
        let cond =
            match Conditioned::build(source, local_obs, l, kernel.jitter_rel, mean_offset, false) {
                Ok(c) => c,
                Err(e) => {
                    last_err = Some(e);
                    continue;
                }
            };
        let amp2 = if opts.estimate_amp2 {
            profiled_amp2(&cond)
        } else {
            kernel.amp2
        };
        let ll = gaussian_log_likelihood(&cond, amp2);
        if !ll.is_finite() {
            continue;
        }
        // strict comparison keeps the smallest l among ties
        if best.as_ref().is_none_or(|(b, _)| ll > *b) {
            best = Some((
                ll,
                Fit {
                    l_hat: l,
                    amp2_hat: amp2,
                    cond,
                },
            ));
        }
    }
    match best {
        Some((_, fit)) => Ok(fit),
        None => Err(last_err.unwrap_or(Error::Factorization {
            duplicates: Vec::new(),
        })),
    }
}

/// Grid-search maximum-likelihood length-scale and the matching amplitude.
pub fn estimate_length_scale(
    local_obs: &ObservationSet,
    cfg: &RayConfig,
    kernel: &KernelParams,
    opts: &LocalOptions,
) -> Result<(f64, f64)> {
    estimate_length_scale_with(&RayKernel::new(cfg), local_obs, kernel, opts)
}

pub fn estimate_length_scale_with<S: CovarianceSource + ?Sized>(
    source: &S,
    local_obs: &ObservationSet,
    kernel: &KernelParams,
    opts: &LocalOptions,
) -> Result<(f64, f64)> {
    opts.validate()?;
    let offset = opts.centering.offset(local_obs);
    let fit = fit_neighborhood(source, local_obs, kernel, opts, offset)?;
    Ok((fit.l_hat, fit.amp2_hat))
}

/// Neighborhood selection, kernel fit and prediction at one target.
pub fn local_predict(
    target: Position,
    obs: &ObservationSet,
    cfg: &RayConfig,
    kernel: &KernelParams,
    opts: &LocalOptions,
) -> Result<LocalPrediction> {
    let kern = RayKernel::new(cfg);
    let mut out =
        LocalPredictor::new(&kern, obs, *kernel, opts.clone())?.predict_many(&[target])?;
    Ok(out.pop().expect("one target in, one prediction out"))
}

/// Local prediction over many targets. Targets whose neighborhoods coincide
/// share one kernel fit and factorization; distinct neighborhoods and
/// targets are processed in parallel.
pub struct LocalPredictor<'a, S: CovarianceSource + ?Sized> {
    source: &'a S,
    obs: &'a ObservationSet,
    kernel: KernelParams,
    opts: LocalOptions,
}

enum Plan {
    Prior,
    Fitted(Fit, f64),
}

impl<'a, S: CovarianceSource + ?Sized> LocalPredictor<'a, S> {
    pub fn new(
        source: &'a S,
        obs: &'a ObservationSet,
        kernel: KernelParams,
        opts: LocalOptions,
    ) -> Result<Self> {
        kernel.validate()?;
        opts.validate()?;
        Ok(Self {
            source,
            obs,
            kernel,
            opts,
        })
    }

    /// Neighborhood indices and the radius that produced them.
    pub fn neighborhood(&self, target: Position) -> (Vec<usize>, f64) {
        let mut radius = self.opts.radius;
        let mut idx = within_indices(target, self.obs, radius);
        let mut expansions = 0;
        while idx.len() < self.opts.min_local && expansions < self.opts.max_expansions {
            radius *= self.opts.expand_factor;
            idx = within_indices(target, self.obs, radius);
            expansions += 1;
        }
        (idx, radius)
    }

    fn plan(&self, idx: &[usize]) -> Result<Plan> {
        if idx.is_empty() {
            return Ok(Plan::Prior);
        }
        let local = self.obs.subset(idx);
        let offset = self.opts.centering.offset(&local);
        if local.len() >= self.opts.min_local {
            let fit = fit_neighborhood(self.source, &local, &self.kernel, &self.opts, offset)?;
            return Ok(Plan::Fitted(fit, offset));
        }
        // too few neighbors even after expansion: keep the configured
        // length-scale and only fit the amplitude
        let l = self.kernel.length_scale;
        let cond = Conditioned::build(
            self.source,
            &local,
            l,
            self.kernel.jitter_rel,
            offset,
            false,
        )?;
        let amp2_hat = if self.opts.estimate_amp2 {
            profiled_amp2(&cond)
        } else {
            self.kernel.amp2
        };
        Ok(Plan::Fitted(
            Fit {
                l_hat: l,
                amp2_hat,
                cond,
            },
            offset,
        ))
    }

    fn prior_prediction(&self, radius: f64) -> LocalPrediction {
        let l = self.kernel.length_scale;
        LocalPrediction {
            mean: self.opts.centering.offset(self.obs),
            variance: self.kernel.amp2 * self.source.unit_prior(l),
            l_hat: l,
            amp2_hat: self.kernel.amp2,
            n_local: 0,
            radius_used: radius,
        }
    }

    pub fn predict_many(&self, targets: &[Position]) -> Result<Vec<LocalPrediction>> {
        let hoods: Vec<(Vec<usize>, f64)> =
            targets.par_iter().map(|&t| self.neighborhood(t)).collect();

        let mut group_of: HashMap<&[usize], usize> = HashMap::new();
        let mut groups: Vec<&[usize]> = Vec::new();
        let assignment: Vec<usize> = hoods
            .iter()
            .map(|(idx, _)| {
                *group_of.entry(idx.as_slice()).or_insert_with(|| {
                    groups.push(idx.as_slice());
                    groups.len() - 1
                })
            })
            .collect();

        let plans: Vec<Plan> = groups
            .par_iter()
            .map(|idx| self.plan(idx))
            .collect::<Result<_>>()?;

        Ok(targets
            .par_iter()
            .zip(hoods.par_iter())
            .zip(assignment.par_iter())
            .map(|((&t, (_, radius)), &g)| match &plans[g] {
                Plan::Prior => self.prior_prediction(*radius),
                Plan::Fitted(fit, offset) => {
                    let p = fit.cond.predict(self.source, t, fit.amp2_hat, *offset);
                    LocalPrediction {
                        mean: p.mean,
                        variance: p.variance,
                        l_hat: fit.l_hat,
                        amp2_hat: fit.amp2_hat,
                        n_local: p.n_obs_used,
                        radius_used: *radius,
                    }
                }
            })
            .collect())
    }
}
