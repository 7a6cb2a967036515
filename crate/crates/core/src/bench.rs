//! Seeded comparison suites: active against random sampling, and
//! difference learning against reconstruction from scratch.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::active::{random_observations, run_active_on, SamplerParams, SamplingTrace, Scoring};
use crate::config::RunConfig;
use crate::covariance::{CovarianceSource, LatticeMemo};
use crate::dynamic::reconstruct_dynamic_with;
use crate::error::{Error, Result};
use crate::eval::{error_curve_with, error_report, CurvePoint};
use crate::field::FieldGrid;
use crate::geometry::{Position, SceneBounds};
use crate::io::fmt_f64;
use crate::oracle::{gen_dynamic_pair, OracleSpec};
use crate::reconstruct::reconstruct_with;

/// Stream offset separating random-baseline draws from sampler draws.
const RANDOM_STREAM: u64 = 0x5EED_0000_0000_0001;

/// Error of the most recent pass that had at most `n` observations.
pub fn error_at(curve: &[CurvePoint], n: usize) -> Option<CurvePoint> {
    curve.iter().rev().find(|c| c.n_obs <= n).copied()
}

/// Fewest observations at which `curve` reaches `target` MAE.
pub fn observations_to_reach(curve: &[CurvePoint], target: f64) -> Option<usize> {
    curve.iter().find(|c| c.mae <= target).map(|c| c.n_obs)
}

/// Box around a bump of the given radius, grown by `margin` on every side.
pub fn changed_region(center: Position, radius: f64, margin: f64) -> SceneBounds {
    SceneBounds {
        x_min: center.x - radius - margin,
        x_max: center.x + radius + margin,
        y_min: center.y - radius - margin,
        y_max: center.y + radius + margin,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSeed {
    pub seed: u64,
    /// Error of trace-prefix reconstructions every `eval_stride` observations.
    pub active: Vec<CurvePoint>,
    pub random: Vec<CurvePoint>,
    /// Random-sampling MAE at the comparison size.
    pub target_mae: f64,
    pub reached_n: Option<usize>,
    pub trace: SamplingTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicSeed {
    pub seed: u64,
    pub dynamic: Vec<CurvePoint>,
    pub scratch: Vec<CurvePoint>,
    pub target_mae: f64,
    pub reached_n: Option<usize>,
    /// Share of variance-selected positions inside the grown changed region.
    pub inside_fraction: f64,
    pub trace: SamplingTrace,
}

fn sampler(cfg: &RunConfig, seed: u64, total: usize) -> SamplerParams {
    SamplerParams {
        budget: total.saturating_sub(cfg.init_m),
        candidate_res: cfg.resolution,
        seed,
        ..cfg.sampler()
    }
}

/// Random-sampling curve from nested prefixes of one random draw.
pub fn random_curve<S: CovarianceSource + ?Sized>(
    source: &S,
    cfg: &RunConfig,
    truth: &FieldGrid,
    n_max: usize,
    ns: &[usize],
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    let lattice = truth.lattice();
    let all = random_observations(truth, &lattice.positions(), n_max, seed ^ RANDOM_STREAM)?;
    let opts = cfg.local_options();
    ns.iter()
        .map(|&n| {
            let obs = all.prefix(n);
            let rec = reconstruct_with(source, lattice, &obs, &cfg.kernel, &opts, cfg.scope)?;
            let r = error_report(&rec.mean, truth, &obs.positions())?;
            Ok(CurvePoint {
                n_obs: obs.len(),
                mae: r.mae,
                median_ae: r.median_ae,
            })
        })
        .collect()
}

/// One seed of the active-versus-random suite.
pub fn active_vs_random<S: CovarianceSource + ?Sized>(
    source: &S,
    cfg: &RunConfig,
    truth: &FieldGrid,
    seed: u64,
) -> Result<ActiveSeed> {
    let b = &cfg.benchmark;
    let lattice = truth.lattice();
    let params = sampler(cfg, seed, b.active_max);
    let trace = run_active_on(
        source,
        truth,
        truth.bounds(),
        &lattice.positions(),
        &cfg.kernel,
        &cfg.local_options(),
        &params,
        None,
    )?;
    let active = error_curve_with(
        source,
        &trace,
        truth,
        &cfg.kernel,
        &cfg.local_options(),
        b.eval_stride,
    )?;
    let mut ns = grid_points(cfg.init_m, b.random_n, b.eval_stride);
    if ns.last() != Some(&b.random_n) {
        ns.push(b.random_n);
    }
    let random = random_curve(source, cfg, truth, b.random_n, &ns, seed)?;
    let target_mae = random.last().map_or(f64::NAN, |c| c.mae);
    let after_init: Vec<CurvePoint> = active
        .iter()
        .filter(|c| c.n_obs >= cfg.init_m)
        .copied()
        .collect();
    Ok(ActiveSeed {
        seed,
        reached_n: observations_to_reach(&after_init, target_mae),
        active,
        random,
        target_mae,
        trace,
    })
}

/// One seed of the difference-versus-scratch suite.
pub fn dynamic_vs_scratch(
    memo: &LatticeMemo,
    cfg: &RunConfig,
    before: &FieldGrid,
    after: &FieldGrid,
    region: SceneBounds,
    seed: u64,
) -> Result<DynamicSeed> {
    let b = &cfg.benchmark;
    let lattice = after.lattice();
    let scratch = run_active_on(
        memo,
        after,
        after.bounds(),
        &lattice.positions(),
        &cfg.kernel,
        &cfg.local_options(),
        &sampler(cfg, seed, b.scratch_n),
        Some(Scoring {
            truth: after,
            baseline: None,
        }),
    )?;
    let target_mae = scratch.metrics.last().map_or(f64::NAN, |c| c.mae);
    let dynamic = reconstruct_dynamic_with(
        memo,
        before,
        after,
        &cfg.kernel,
        &cfg.dynamic_options(),
        &sampler(cfg, seed, b.dynamic_n),
        Some(after),
    )?;
    let selected = dynamic.trace.selected();
    let inside = selected
        .iter()
        .filter(|e| region.contains(e.position))
        .count();
    let inside_fraction = if selected.is_empty() {
        f64::NAN
    } else {
        inside as f64 / selected.len() as f64
    };
    Ok(DynamicSeed {
        seed,
        reached_n: observations_to_reach(&dynamic.trace.metrics, target_mae),
        dynamic: dynamic.trace.metrics.clone(),
        scratch: scratch.metrics,
        target_mae,
        inside_fraction,
        trace: dynamic.trace,
    })
}

fn grid_points(from: usize, to: usize, stride: usize) -> Vec<usize> {
    (1..=to / stride)
        .map(|k| k * stride)
        .filter(|&n| n >= from)
        .collect()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.retain(|x| !x.is_nan());
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Median of per-seed "observations needed"; a seed that never reached
/// the target counts as infinitely many.
pub fn median_reached(reached: &[Option<usize>]) -> f64 {
    median(
        reached
            .iter()
            .map(|r| r.map_or(f64::INFINITY, |n| n as f64))
            .collect(),
    )
}

fn mae_or_nan(curve: &[CurvePoint], n: usize) -> (f64, f64) {
    error_at(curve, n).map_or((f64::NAN, f64::NAN), |c| (c.mae, c.median_ae))
}

/// Two curves sampled on a shared observation-count grid.
fn paired_csv(names: [&str; 2], rows: &[(usize, [(f64, f64); 2])]) -> String {
    let mut out = format!(
        "n_obs,{a}_mae,{a}_median_ae,{b}_mae,{b}_median_ae\n",
        a = names[0],
        b = names[1]
    );
    for (n, [(m0, d0), (m1, d1)]) in rows {
        let _ = writeln!(
            out,
            "{n},{},{},{},{}",
            fmt_f64(*m0),
            fmt_f64(*d0),
            fmt_f64(*m1),
            fmt_f64(*d1)
        );
    }
    out
}

fn fmt_reached(r: Option<usize>) -> String {
    r.map_or_else(|| "none".into(), |n| n.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutput {
    pub active: Vec<ActiveSeed>,
    pub dynamic: Vec<DynamicSeed>,
    pub files: Vec<PathBuf>,
}

impl BenchmarkOutput {
    pub fn active_median_reached(&self) -> f64 {
        median_reached(&self.active.iter().map(|s| s.reached_n).collect::<Vec<_>>())
    }

    pub fn dynamic_median_reached(&self) -> f64 {
        median_reached(&self.dynamic.iter().map(|s| s.reached_n).collect::<Vec<_>>())
    }
}

/// Runs the configured suites and writes their CSV files into `out_dir`.
///
/// Each suite writes one curve file per seed, one file of per-step medians
/// and one summary file. Seed `k` uses `run.seed + k`.
pub fn run_benchmark(cfg: &RunConfig, out_dir: &Path) -> Result<BenchmarkOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let b = &cfg.benchmark;
    let seeds: Vec<u64> = (0..b.seeds as u64)
        .map(|k| cfg.seed.wrapping_add(k))
        .collect();
    let memo = LatticeMemo::new(&cfg.rays, cfg.resolution);
    let mut out = BenchmarkOutput {
        active: Vec::new(),
        dynamic: Vec::new(),
        files: Vec::new(),
    };
    let mut write = |name: String, text: String| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        out.files.push(path);
        Ok(())
    };

    if b.suite.runs_active() {
        let truth = cfg.oracle.spec()?.render(cfg.bounds, cfg.resolution)?;
        let runs: Vec<ActiveSeed> = seeds
            .par_iter()
            .map(|&s| active_vs_random(&memo, cfg, &truth, s))
            .collect::<Result<_>>()?;
        let ns = grid_points(cfg.init_m, b.active_max.max(b.random_n), b.eval_stride);
        let row = |s: &ActiveSeed, n: usize| {
            let random = s
                .random
                .iter()
                .find(|c| c.n_obs == n)
                .map_or((f64::NAN, f64::NAN), |c| (c.mae, c.median_ae));
            [mae_or_nan(&s.active, n), random]
        };
        for s in &runs {
            let rows: Vec<_> = ns.iter().map(|&n| (n, row(s, n))).collect();
            write(
                format!("active_seed{}.csv", s.seed),
                paired_csv(["active", "random"], &rows),
            )?;
        }
        let med: Vec<_> = ns
            .iter()
            .map(|&n| {
                let rs: Vec<_> = runs.iter().map(|s| row(s, n)).collect();
                let col = |i: usize, j: usize| {
                    median(
                        rs.iter()
                            .map(|r| if j == 0 { r[i].0 } else { r[i].1 })
                            .collect(),
                    )
                };
                (n, [(col(0, 0), col(0, 1)), (col(1, 0), col(1, 1))])
            })
            .collect();
        write(
            "active_median.csv".into(),
            paired_csv(["active", "random"], &med),
        )?;
        let mut summary = String::from("seed,random_n,target_mae,reached_n\n");
        for s in &runs {
            let _ = writeln!(
                summary,
                "{},{},{},{}",
                s.seed,
                b.random_n,
                fmt_f64(s.target_mae),
                fmt_reached(s.reached_n)
            );
        }
        let reached: Vec<_> = runs.iter().map(|s| s.reached_n).collect();
        let _ = writeln!(
            summary,
            "median,{},{},{}",
            b.random_n,
            fmt_f64(median(runs.iter().map(|s| s.target_mae).collect())),
            fmt_f64(median_reached(&reached))
        );
        write("active_summary.csv".into(), summary)?;
        out.active = runs;
    }

    if b.suite.runs_dynamic() {
        let OracleSpec::DynamicPair {
            base,
            bump_center,
            bump_amp,
            bump_radius,
        } = cfg.oracle.dynamic_pair()?
        else {
            unreachable!("dynamic_pair always builds a pair")
        };
        let (before, after) = gen_dynamic_pair(
            cfg.bounds,
            cfg.resolution,
            &base,
            bump_center,
            bump_amp,
            bump_radius,
        )?;
        let region = changed_region(bump_center, bump_radius, 1.0);
        let runs: Vec<DynamicSeed> = seeds
            .par_iter()
            .map(|&s| dynamic_vs_scratch(&memo, cfg, &before, &after, region, s))
            .collect::<Result<_>>()?;
        let ns = grid_points(cfg.init_m, b.scratch_n.max(b.dynamic_n), b.eval_stride);
        let row = |s: &DynamicSeed, n: usize| {
            let dynamic = if n <= b.dynamic_n {
                mae_or_nan(&s.dynamic, n)
            } else {
                (f64::NAN, f64::NAN)
            };
            [dynamic, mae_or_nan(&s.scratch, n)]
        };
        for s in &runs {
            let rows: Vec<_> = ns.iter().map(|&n| (n, row(s, n))).collect();
            write(
                format!("dynamic_seed{}.csv", s.seed),
                paired_csv(["difference", "scratch"], &rows),
            )?;
        }
        let med: Vec<_> = ns
            .iter()
            .map(|&n| {
                let rs: Vec<_> = runs.iter().map(|s| row(s, n)).collect();
                let col = |i: usize, j: usize| {
                    median(
                        rs.iter()
                            .map(|r| if j == 0 { r[i].0 } else { r[i].1 })
                            .collect(),
                    )
                };
                (n, [(col(0, 0), col(0, 1)), (col(1, 0), col(1, 1))])
            })
            .collect();
        write(
            "dynamic_median.csv".into(),
            paired_csv(["difference", "scratch"], &med),
        )?;
        let mut summary = String::from("seed,scratch_n,target_mae,reached_n,inside_fraction\n");
        for s in &runs {
            let _ = writeln!(
                summary,
                "{},{},{},{},{}",
                s.seed,
                b.scratch_n,
                fmt_f64(s.target_mae),
                fmt_reached(s.reached_n),
                fmt_f64(s.inside_fraction)
            );
        }
        let reached: Vec<_> = runs.iter().map(|s| s.reached_n).collect();
        let _ = writeln!(
            summary,
            "median,{},{},{},{}",
            b.scratch_n,
            fmt_f64(median(runs.iter().map(|s| s.target_mae).collect())),
            fmt_f64(median_reached(&reached)),
            fmt_f64(median(runs.iter().map(|s| s.inside_fraction).collect()))
        );
        write("dynamic_summary.csv".into(), summary)?;
        out.dynamic = runs;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(n: usize, mae: f64) -> CurvePoint {
        CurvePoint {
            n_obs: n,
            mae,
            median_ae: mae,
        }
    }

    #[test]
    fn curve_lookups() {
        let c = [pt(20, 3.0), pt(35, 2.0), pt(50, 1.0)];
        assert_eq!(error_at(&c, 40).unwrap().mae, 2.0);
        assert!(error_at(&c, 10).is_none());
        assert_eq!(observations_to_reach(&c, 2.5), Some(35));
        assert_eq!(observations_to_reach(&c, 0.5), None);
    }

    #[test]
    fn medians() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, f64::NAN, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
        assert_eq!(median_reached(&[Some(10), None, Some(30)]), 30.0);
        assert_eq!(median_reached(&[None, None, Some(30)]), f64::INFINITY);
    }

    #[test]
    fn grid_points_start_at_init() {
        assert_eq!(grid_points(20, 60, 20), vec![20, 40, 60]);
        assert_eq!(grid_points(25, 60, 20), vec![40, 60]);
    }

    #[test]
    fn region_box() {
        let r = changed_region(Position::new(5.0, 3.0), 1.0, 1.0);
        assert_eq!((r.x_min, r.x_max, r.y_min, r.y_max), (3.0, 7.0, 1.0, 5.0));
    }
}
