//! Variance-driven measurement selection.
//!
//! The scene is cut into square sections. Each round predicts the variance at
//! every unmeasured candidate, picks the highest-variance candidate in every
//! section whose maximum clears the threshold, measures the whole batch and
//! repeats until the budget is spent or every section is skipped.

use rand::seq::index::sample;

use crate::covariance::{CovarianceSource, KernelParams, LatticeMemo};
use crate::error::{Error, Result};
use crate::eval::{summarize, CurvePoint};
use crate::field::FieldGrid;
use crate::geometry::{node_count, Lattice, Position, SceneBounds, LATTICE_EPS};
use crate::local::{LocalOptions, LocalPredictor};
use crate::observation::{Observation, ObservationSet};
use crate::oracle::rng;
use crate::rays::RayConfig;

/// Floor on the reference variance a relative threshold is scaled by.
pub const MIN_REFERENCE_VARIANCE: f64 = 1e-6;

/// Row-major tiling of the scene; edge tiles are clipped.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionGrid {
    pub bounds: SceneBounds,
    pub section_size: f64,
    pub nx: usize,
    pub ny: usize,
    pub sections: Vec<SceneBounds>,
}

impl SectionGrid {
    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    /// Tile containing `p`; points on a shared edge go to the lower index.
    pub fn tile_of(&self, p: Position) -> Option<usize> {
        if !self.bounds.contains(p) {
            return None;
        }
        let axis = |offset: f64, n: usize| {
            let t = offset / self.section_size;
            ((t - LATTICE_EPS).ceil() as isize - 1).clamp(0, n as isize - 1) as usize
        };
        let i = axis(p.x - self.bounds.x_min, self.nx);
        let j = axis(p.y - self.bounds.y_min, self.ny);
        Some(j * self.nx + i)
    }
}

pub fn partition_sections(bounds: SceneBounds, section_size: f64) -> Result<SectionGrid> {
    bounds.validate()?;
    if !(section_size > 0.0 && section_size.is_finite()) {
        return Err(Error::invalid("active.section_size", "must be positive"));
    }
    let nx = node_count(bounds.width(), section_size) - 1;
    let ny = node_count(bounds.height(), section_size) - 1;
    let (nx, ny) = (nx.max(1), ny.max(1));
    let mut sections = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x0 = bounds.x_min + i as f64 * section_size;
            let y0 = bounds.y_min + j as f64 * section_size;
            sections.push(SceneBounds {
                x_min: x0,
                x_max: (x0 + section_size).min(bounds.x_max),
                y_min: y0,
                y_max: (y0 + section_size).min(bounds.y_max),
            });
        }
    }
    Ok(SectionGrid {
        bounds,
        section_size,
        nx,
        ny,
        sections,
    })
}

/// Indices into `candidates` of the per-section variance maxima, in section
/// order. Sections whose maximum is below `threshold` contribute nothing.
pub fn select_indices(
    candidates: &[(Position, f64)],
    grid: &SectionGrid,
    threshold: f64,
) -> Vec<usize> {
    let mut best: Vec<Option<(usize, f64)>> = vec![None; grid.len()];
    for (k, &(p, var)) in candidates.iter().enumerate() {
        let Some(tile) = grid.tile_of(p) else {
            continue;
        };
        if best[tile].is_none_or(|(_, b)| var > b) {
            best[tile] = Some((k, var));
        }
    }
    best.into_iter()
        .flatten()
        .filter(|&(_, var)| var >= threshold)
        .map(|(k, _)| k)
        .collect()
}

/// Per-section highest-variance positions.
pub fn select_next(
    candidates: &[(Position, f64)],
    grid: &SectionGrid,
    threshold: f64,
) -> Vec<Position> {
    select_indices(candidates, grid, threshold)
        .into_iter()
        .map(|k| candidates[k].0)
        .collect()
}

/// Anything that can report received power at a position.
pub trait ValueSource: Sync {
    fn measure(&self, p: Position) -> Result<f64>;
}

impl ValueSource for FieldGrid {
    fn measure(&self, p: Position) -> Result<f64> {
        self.sample(p)
    }
}

/// Answers only at recorded positions, for replaying a measured dataset.
#[derive(Debug, Clone)]
pub struct Replay {
    obs: ObservationSet,
}

impl Replay {
    pub fn new(obs: ObservationSet) -> Self {
        Self { obs }
    }

    pub fn positions(&self) -> Vec<Position> {
        self.obs.positions()
    }
}

impl ValueSource for Replay {
    fn measure(&self, p: Position) -> Result<f64> {
        self.obs
            .iter()
            .find(|o| o.position == p)
            .map(|o| o.value)
            .ok_or(Error::NoRecordedValue(p))
    }
}

/// Point-wise difference `minuend(p) - baseline(p)`.
pub struct Difference<'a, A: ValueSource + ?Sized, B: ValueSource + ?Sized> {
    pub minuend: &'a A,
    pub baseline: &'a B,
}

impl<A: ValueSource + ?Sized, B: ValueSource + ?Sized> ValueSource for Difference<'_, A, B> {
    fn measure(&self, p: Position) -> Result<f64> {
        Ok(self.minuend.measure(p)? - self.baseline.measure(p)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Absolute variance in power².
    Absolute(f64),
    /// Fraction of the reference prior variance: the configured prior when
    /// the amplitude is fixed, otherwise the second moment of the initial
    /// observations about their prior mean.
    Relative(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerParams {
    pub init_m: usize,
    pub budget: usize,
    pub section_size: f64,
    pub threshold: Threshold,
    pub candidate_res: f64,
    /// One section covering the scene: pure global argmax sampling.
    pub global_argmax: bool,
    pub seed: u64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            init_m: 20,
            budget: 100,
            section_size: 2.0,
            threshold: Threshold::Relative(0.05),
            candidate_res: 0.1,
            global_argmax: false,
            seed: 0,
        }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.section_size > 0.0 && self.section_size.is_finite()) {
            return Err(Error::invalid("active.section_size", "must be positive"));
        }
        if !(self.candidate_res > 0.0 && self.candidate_res.is_finite()) {
            return Err(Error::invalid("active.candidate_res", "must be positive"));
        }
        match self.threshold {
            Threshold::Absolute(t) | Threshold::Relative(t) if !(t >= 0.0 && t.is_finite()) => {
                Err(Error::invalid("active.threshold", "must be non-negative"))
            }
            _ => Ok(()),
        }
    }

    fn sections(&self, bounds: SceneBounds) -> Result<SectionGrid> {
        if self.global_argmax {
            partition_sections(bounds, bounds.width().max(bounds.height()))
        } else {
            partition_sections(bounds, self.section_size)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    /// 0 for the random initial observations.
    pub round: usize,
    pub position: Position,
    pub value: f64,
    /// Predicted variance when selected; NaN for initial observations.
    pub variance: f64,
}

/// Ordered record of a sampling run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SamplingTrace {
    pub entries: Vec<TraceEntry>,
    pub initial_count: usize,
    pub slot: u32,
    /// Error after each variance pass, when a truth grid was supplied.
    pub metrics: Vec<CurvePoint>,
}

impl SamplingTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn observations(&self) -> Result<ObservationSet> {
        ObservationSet::new(
            self.entries
                .iter()
                .map(|e| Observation::new(e.position, e.value).at_slot(self.slot))
                .collect(),
        )
    }

    pub fn initial_observations(&self) -> Result<ObservationSet> {
        Ok(self.observations()?.prefix(self.initial_count))
    }

    /// Entries chosen by variance, i.e. everything after the initial draw.
    pub fn selected(&self) -> &[TraceEntry] {
        &self.entries[self.initial_count.min(self.entries.len())..]
    }

    pub fn rounds(&self) -> usize {
        self.entries.last().map_or(0, |e| e.round)
    }
}

/// Truth used to score each variance pass. With a baseline, the scored
/// prediction is `baseline + mean`.
#[derive(Debug, Clone, Copy)]
pub struct Scoring<'a> {
    pub truth: &'a FieldGrid,
    pub baseline: Option<&'a FieldGrid>,
}

/// Reference variance a relative threshold multiplies.
pub fn reference_variance<S: CovarianceSource + ?Sized>(
    source: &S,
    initial: &ObservationSet,
    kernel: &KernelParams,
    opts: &LocalOptions,
) -> f64 {
    if !opts.estimate_amp2 || initial.is_empty() {
        return kernel.amp2 * source.unit_prior(kernel.length_scale);
    }
    let offset = opts.centering.offset(initial);
    let second = initial
        .iter()
        .map(|o| (o.value - offset).powi(2))
        .sum::<f64>()
        / initial.len() as f64;
    second.max(MIN_REFERENCE_VARIANCE)
}

/// Closed-loop sampling over the lattice at `params.candidate_res`.
#[allow(clippy::too_many_arguments)]
pub fn run_active<O: ValueSource + ?Sized>(
    oracle: &O,
    bounds: SceneBounds,
    cfg: &RayConfig,
    kernel: &KernelParams,
    opts: &LocalOptions,
    params: &SamplerParams,
    scoring: Option<Scoring<'_>>,
) -> Result<SamplingTrace> {
    let lattice = Lattice::new(bounds, params.candidate_res)?;
    let memo = LatticeMemo::new(cfg, params.candidate_res);
    run_active_on(
        &memo,
        oracle,
        bounds,
        &lattice.positions(),
        kernel,
        opts,
        params,
        scoring,
    )
}

/// Closed-loop sampling over an explicit candidate list.
#[allow(clippy::too_many_arguments)]
pub fn run_active_on<S: CovarianceSource + ?Sized, O: ValueSource + ?Sized>(
    source: &S,
    oracle: &O,
    bounds: SceneBounds,
    candidates: &[Position],
    kernel: &KernelParams,
    opts: &LocalOptions,
    params: &SamplerParams,
    scoring: Option<Scoring<'_>>,
) -> Result<SamplingTrace> {
    kernel.validate()?;
    opts.validate()?;
    params.validate()?;
    let sections = params.sections(bounds)?;
    if let Some(s) = &scoring {
        check_scoring(s, candidates)?;
    }

    let n_cand = candidates.len();
    let mut measured = vec![false; n_cand];
    let mut trace = SamplingTrace::default();
    let mut obs = ObservationSet::default();

    let init = params.init_m.min(n_cand);
    let mut rng = rng(params.seed);
    for k in sample(&mut rng, n_cand, init).into_iter() {
        let p = candidates[k];
        let value = oracle.measure(p)?;
        obs.push(Observation::new(p, value))?;
        measured[k] = true;
        trace.entries.push(TraceEntry {
            round: 0,
            position: p,
            value,
            variance: f64::NAN,
        });
    }
    trace.initial_count = init;

    let threshold = match params.threshold {
        Threshold::Absolute(t) => t,
        Threshold::Relative(f) => f * reference_variance(source, &obs, kernel, opts),
    };

    let mut remaining = params.budget;
    let mut round = 0;
    loop {
        let open: Vec<usize> = (0..n_cand).filter(|&k| !measured[k]).collect();
        let need_pass = (remaining > 0 && !open.is_empty()) || scoring.is_some();
        if !need_pass {
            break;
        }
        let targets: Vec<Position> = open.iter().map(|&k| candidates[k]).collect();
        let preds =
            LocalPredictor::new(source, &obs, *kernel, opts.clone())?.predict_many(&targets)?;
        if let Some(s) = &scoring {
            if !open.is_empty() {
                trace.metrics.push(score(
                    s,
                    &open,
                    &preds.iter().map(|p| p.mean).collect::<Vec<_>>(),
                    obs.len(),
                )?);
            }
        }
        if remaining == 0 || open.is_empty() {
            break;
        }
        let variances: Vec<(Position, f64)> = targets
            .iter()
            .zip(&preds)
            .map(|(&p, pr)| (p, pr.variance))
            .collect();
        let mut picks = select_indices(&variances, &sections, threshold);
        if picks.is_empty() {
            break;
        }
        if picks.len() > remaining {
            // keep the highest variances; stable sort preserves section order on ties
            picks.sort_by(|&a, &b| variances[b].1.total_cmp(&variances[a].1));
            picks.truncate(remaining);
            picks.sort_unstable();
        }
        round += 1;
        for k in picks {
            let (p, var) = variances[k];
            let value = oracle.measure(p)?;
            obs.push(Observation::new(p, value))?;
            measured[open[k]] = true;
            trace.entries.push(TraceEntry {
                round,
                position: p,
                value,
                variance: var,
            });
            remaining -= 1;
        }
    }
    Ok(trace)
}

fn check_scoring(s: &Scoring<'_>, candidates: &[Position]) -> Result<()> {
    let lattice = s.truth.lattice();
    if let Some(b) = s.baseline {
        if !b.same_geometry(s.truth) {
            return Err(Error::ShapeMismatch(
                "baseline and truth grids differ".into(),
            ));
        }
    }
    if candidates.len() != lattice.len()
        || candidates
            .iter()
            .enumerate()
            .any(|(k, &p)| lattice.position(k) != p)
    {
        return Err(Error::ShapeMismatch(
            "scoring needs candidates on the truth lattice".into(),
        ));
    }
    Ok(())
}

fn score(s: &Scoring<'_>, open: &[usize], means: &[f64], n_obs: usize) -> Result<CurvePoint> {
    let mask = s.truth.mask();
    let errors: Vec<f64> = open
        .iter()
        .zip(means)
        .filter(|(&k, _)| !mask.is_some_and(|m| m[k]))
        .map(|(&k, &m)| {
            let pred = match s.baseline {
                Some(b) => b.values()[k] + m,
                None => m,
            };
            (pred - s.truth.values()[k]).abs()
        })
        .collect();
    let rep = summarize(errors)?;
    Ok(CurvePoint {
        n_obs,
        mae: rep.mae,
        median_ae: rep.median_ae,
    })
}

/// Uniform random sampling of `n` distinct candidates, for baselines.
pub fn random_observations<O: ValueSource + ?Sized>(
    oracle: &O,
    candidates: &[Position],
    n: usize,
    seed: u64,
) -> Result<ObservationSet> {
    let mut rng = rng(seed);
    let mut obs = ObservationSet::default();
    for k in sample(&mut rng, candidates.len(), n.min(candidates.len())).into_iter() {
        let p = candidates[k];
        obs.push(Observation::new(p, oracle.measure(p)?))?;
    }
    Ok(obs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> SceneBounds {
        SceneBounds::sized(10.0, 6.0).unwrap()
    }

    #[test]
    fn section_counts() {
        assert_eq!(partition_sections(room(), 2.0).unwrap().len(), 15);
        assert_eq!(partition_sections(room(), 12.0).unwrap().len(), 1);
        let g = partition_sections(room(), 3.0).unwrap();
        assert_eq!((g.nx, g.ny, g.len()), (4, 2, 8));
        assert_eq!(g.sections[3].x_max - g.sections[3].x_min, 1.0);
        assert_eq!(g.sections[7].y_max, 6.0);
        assert!(partition_sections(room(), 0.0).is_err());
    }

    #[test]
    fn shared_edges_belong_to_the_lower_tile() {
        let g = partition_sections(room(), 2.0).unwrap();
        assert_eq!(g.tile_of(Position::new(0.0, 0.0)), Some(0));
        assert_eq!(g.tile_of(Position::new(2.0, 0.0)), Some(0));
        assert_eq!(g.tile_of(Position::new(2.0 + 1e-6, 0.0)), Some(1));
        // 0.1-lattice rounding must not push an edge node up a tile
        assert_eq!(g.tile_of(Position::new(20.0 * 0.1, 40.0 * 0.1)), Some(5));
        assert_eq!(g.tile_of(Position::new(10.0, 6.0)), Some(14));
        assert_eq!(g.tile_of(Position::new(11.0, 6.0)), None);
    }

    #[test]
    fn select_next_examples() {
        let one = partition_sections(room(), 20.0).unwrap();
        let a = Position::new(1.0, 1.0);
        let b = Position::new(5.0, 5.0);
        assert_eq!(select_next(&[(a, 0.1), (b, 0.9)], &one, 0.0), vec![b]);
        assert!(select_next(&[(a, 0.1), (b, 0.9)], &one, 1.0).is_empty());
        assert!(select_next(&[], &one, 0.0).is_empty());

        let two = partition_sections(SceneBounds::sized(4.0, 2.0).unwrap(), 2.0).unwrap();
        let c = [
            (Position::new(0.5, 0.5), 0.3),
            (Position::new(1.5, 0.5), 0.4),
            (Position::new(2.5, 0.5), 0.2),
            (Position::new(3.5, 1.5), 0.2),
        ];
        // tie in the second tile goes to the earlier candidate
        assert_eq!(select_next(&c, &two, 0.0), vec![c[1].0, c[2].0]);
    }

    #[test]
    fn replay_only_answers_recorded_positions() {
        let obs =
            ObservationSet::new(vec![Observation::new(Position::new(1.0, 2.0), -3.0)]).unwrap();
        let r = Replay::new(obs);
        assert_eq!(r.measure(Position::new(1.0, 2.0)).unwrap(), -3.0);
        assert!(matches!(
            r.measure(Position::new(1.0, 2.5)),
            Err(Error::NoRecordedValue(_))
        ));
    }
}
