//! Flat `key = value` run configuration.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored. Keys not
//! listed in [`KEYS`] are rejected. Values left unset keep their defaults.

use std::collections::HashMap;
use std::path::Path;

use crate::active::{SamplerParams, Threshold};
use crate::covariance::KernelParams;
use crate::error::{Error, Result};
use crate::geometry::{Position, SceneBounds};
use crate::local::{log_grid, Centering, LocalOptions};
use crate::oracle::OracleSpec;
use crate::rays::RayConfig;
use crate::reconstruct::Scope;

/// Every accepted key, in documentation order.
pub const KEYS: &[&str] = &[
    "scene.x_min",
    "scene.x_max",
    "scene.y_min",
    "scene.y_max",
    "scene.resolution",
    "rays.R",
    "rays.N",
    "rays.d",
    "rays.beta",
    "kernel.amp2",
    "kernel.length_scale",
    "kernel.jitter_rel",
    "local.L",
    "local.l_min",
    "local.l_max",
    "local.l_count",
    "local.min_local",
    "local.expand_factor",
    "local.max_expansions",
    "local.estimate_amp2",
    "local.scope",
    "active.init_M",
    "active.budget",
    "active.section_size",
    "active.threshold",
    "active.threshold_rel",
    "active.candidate_res",
    "active.global_argmax",
    "dynamic.L",
    "dynamic.l_min",
    "dynamic.l_max",
    "dynamic.l_count",
    "run.seed",
    "run.centering",
    "run.strict",
    "oracle.kind",
    "oracle.base",
    "oracle.value",
    "oracle.tx_x",
    "oracle.tx_y",
    "oracle.p0",
    "oracle.gamma",
    "oracle.l",
    "oracle.amp2",
    "oracle.seed",
    "oracle.region_x_min",
    "oracle.region_x_max",
    "oracle.region_y_min",
    "oracle.region_y_max",
    "oracle.ripple_amp",
    "oracle.ripple_period",
    "oracle.bump_x",
    "oracle.bump_y",
    "oracle.bump_amp",
    "oracle.bump_radius",
    "benchmark.suite",
    "benchmark.seeds",
    "benchmark.random_n",
    "benchmark.active_max",
    "benchmark.scratch_n",
    "benchmark.dynamic_n",
    "benchmark.eval_stride",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Active,
    Dynamic,
    All,
}

impl Suite {
    pub fn runs_active(self) -> bool {
        matches!(self, Suite::Active | Suite::All)
    }

    pub fn runs_dynamic(self) -> bool {
        matches!(self, Suite::Dynamic | Suite::All)
    }
}

/// Length-scale search for one pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSearch {
    pub radius: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub l_count: usize,
}

impl GridSearch {
    pub fn l_grid(&self) -> Vec<f64> {
        log_grid(self.l_min, self.l_max, self.l_count)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSettings {
    pub kind: String,
    pub base: String,
    pub value: f64,
    pub tx: Position,
    pub p0: f64,
    pub gamma: f64,
    pub length_scale: f64,
    pub amp2: f64,
    pub seed: u64,
    pub region: SceneBounds,
    pub ripple_amp: f64,
    pub ripple_period: f64,
    pub bump_center: Position,
    pub bump_amp: f64,
    pub bump_radius: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            kind: "sharp".into(),
            base: "pathloss".into(),
            value: -60.0,
            tx: Position::new(2.0, 3.0),
            p0: -40.0,
            gamma: 2.0,
            length_scale: 1.0,
            amp2: 1.0,
            seed: 0,
            region: SceneBounds {
                x_min: 5.0,
                x_max: 9.0,
                y_min: 1.0,
                y_max: 5.0,
            },
            ripple_amp: 6.0,
            ripple_period: 1.0,
            bump_center: Position::new(7.0, 3.0),
            bump_amp: 10.0,
            bump_radius: 1.0,
        }
    }
}

impl OracleSettings {
    fn simple(&self, kind: &str) -> Result<OracleSpec> {
        Ok(match kind {
            "constant" => OracleSpec::Constant { value: self.value },
            "pathloss" => OracleSpec::PathLoss {
                tx: self.tx,
                p0: self.p0,
                gamma: self.gamma,
            },
            "gp" => OracleSpec::Gp {
                length_scale: self.length_scale,
                amp2: self.amp2,
                seed: self.seed,
            },
            "sharp" => OracleSpec::Sharp {
                base: Box::new(self.simple(&self.base)?),
                region: self.region,
                ripple_amp: self.ripple_amp,
                ripple_period: self.ripple_period,
            },
            _ => {
                return Err(Error::invalid(
                    "oracle.base",
                    format!("unknown field kind '{kind}'"),
                ))
            }
        })
    }

    /// The configured field.
    pub fn spec(&self) -> Result<OracleSpec> {
        match self.kind.as_str() {
            "dynamic-pair" => self.dynamic_pair(),
            "constant" | "pathloss" | "gp" | "sharp" => self.simple(&self.kind),
            other => Err(Error::invalid(
                "oracle.kind",
                format!("unknown kind '{other}'"),
            )),
        }
    }

    /// A dynamic pair over the configured field (or over `oracle.base` when
    /// the configured kind is itself a dynamic pair).
    pub fn dynamic_pair(&self) -> Result<OracleSpec> {
        let base = match self.kind.as_str() {
            "dynamic-pair" => self.simple(&self.base)?,
            _ => self.spec()?,
        };
        Ok(OracleSpec::DynamicPair {
            base: Box::new(base),
            bump_center: self.bump_center,
            bump_amp: self.bump_amp,
            bump_radius: self.bump_radius,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSettings {
    pub suite: Suite,
    pub seeds: usize,
    /// Random-sampling size whose error the active run must match.
    pub random_n: usize,
    /// Total observations an active run may use.
    pub active_max: usize,
    /// Samples given to the from-scratch pipeline in the dynamic suite.
    pub scratch_n: usize,
    /// Total samples given to the difference pipeline.
    pub dynamic_n: usize,
    pub eval_stride: usize,
}

impl Default for BenchmarkSettings {
    fn default() -> Self {
        Self {
            suite: Suite::All,
            seeds: 10,
            random_n: 200,
            active_max: 200,
            scratch_n: 300,
            dynamic_n: 100,
            eval_stride: 10,
        }
    }
}

/// Every tunable of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bounds: SceneBounds,
    pub resolution: f64,
    pub rays: RayConfig,
    pub kernel: KernelParams,
    pub local: GridSearch,
    pub min_local: usize,
    pub expand_factor: f64,
    pub max_expansions: usize,
    pub estimate_amp2: bool,
    pub scope: Scope,
    pub init_m: usize,
    pub budget: usize,
    pub section_size: f64,
    /// Absolute threshold; overrides `threshold_rel` when set.
    pub threshold: Option<f64>,
    pub threshold_rel: f64,
    pub candidate_res: f64,
    pub global_argmax: bool,
    pub dynamic: GridSearch,
    pub seed: u64,
    pub centering: Centering,
    /// Zero-mean prior with the configured amplitude, nothing estimated
    /// beyond the length-scale.
    pub strict: bool,
    pub oracle: OracleSettings,
    pub benchmark: BenchmarkSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let local = GridSearch {
            radius: 1.0,
            l_min: 0.1,
            l_max: 5.0,
            l_count: 25,
        };
        Self {
            bounds: SceneBounds {
                x_min: 0.0,
                x_max: 10.0,
                y_min: 0.0,
                y_max: 6.0,
            },
            resolution: 0.1,
            rays: RayConfig::default(),
            kernel: KernelParams::default(),
            local,
            min_local: 3,
            expand_factor: 1.5,
            max_expansions: 3,
            estimate_amp2: true,
            scope: Scope::Local,
            init_m: 20,
            budget: 100,
            section_size: 2.0,
            threshold: None,
            threshold_rel: 0.05,
            candidate_res: 0.1,
            global_argmax: false,
            dynamic: GridSearch {
                radius: 1.5,
                ..local
            },
            seed: 0,
            centering: Centering::LocalMean,
            strict: false,
            oracle: OracleSettings::default(),
            benchmark: BenchmarkSettings::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse '{v}'"))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

impl RunConfig {
    /// Assigns one key. Unknown keys and unparsable values are errors.
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let o = &mut self.oracle;
        let b = &mut self.benchmark;
        match key {
            "scene.x_min" => self.bounds.x_min = parse_num(v)?,
            "scene.x_max" => self.bounds.x_max = parse_num(v)?,
            "scene.y_min" => self.bounds.y_min = parse_num(v)?,
            "scene.y_max" => self.bounds.y_max = parse_num(v)?,
            "scene.resolution" => self.resolution = parse_num(v)?,
            "rays.R" => self.rays.rays = parse_num(v)?,
            "rays.N" => self.rays.samples = parse_num(v)?,
            "rays.d" => self.rays.spacing = parse_num(v)?,
            "rays.beta" => self.rays.beta = parse_num(v)?,
            "kernel.amp2" => self.kernel.amp2 = parse_num(v)?,
            "kernel.length_scale" => self.kernel.length_scale = parse_num(v)?,
            "kernel.jitter_rel" => self.kernel.jitter_rel = parse_num(v)?,
            "local.L" => self.local.radius = parse_num(v)?,
            "local.l_min" => self.local.l_min = parse_num(v)?,
            "local.l_max" => self.local.l_max = parse_num(v)?,
            "local.l_count" => self.local.l_count = parse_num(v)?,
            "local.min_local" => self.min_local = parse_num(v)?,
            "local.expand_factor" => self.expand_factor = parse_num(v)?,
            "local.max_expansions" => self.max_expansions = parse_num(v)?,
            "local.estimate_amp2" => self.estimate_amp2 = parse_bool(v)?,
            "local.scope" => {
                self.scope = match v {
                    "local" => Scope::Local,
                    "global" => Scope::Global,
                    _ => return Err(format!("expected local or global, got '{v}'")),
                }
            }
            "active.init_M" => self.init_m = parse_num(v)?,
            "active.budget" => self.budget = parse_num(v)?,
            "active.section_size" => self.section_size = parse_num(v)?,
            "active.threshold" => self.threshold = Some(parse_num(v)?),
            "active.threshold_rel" => self.threshold_rel = parse_num(v)?,
            "active.candidate_res" => self.candidate_res = parse_num(v)?,
            "active.global_argmax" => self.global_argmax = parse_bool(v)?,
            "dynamic.L" => self.dynamic.radius = parse_num(v)?,
            "dynamic.l_min" => self.dynamic.l_min = parse_num(v)?,
            "dynamic.l_max" => self.dynamic.l_max = parse_num(v)?,
            "dynamic.l_count" => self.dynamic.l_count = parse_num(v)?,
            "run.seed" => self.seed = parse_num(v)?,
            "run.centering" => {
                self.centering = match v {
                    "local_mean" => Centering::LocalMean,
                    "zero" => Centering::Zero,
                    _ => return Err(format!("expected local_mean or zero, got '{v}'")),
                }
            }
            "run.strict" => self.strict = parse_bool(v)?,
            "oracle.kind" => o.kind = v.to_string(),
            "oracle.base" => o.base = v.to_string(),
            "oracle.value" => o.value = parse_num(v)?,
            "oracle.tx_x" => o.tx.x = parse_num(v)?,
            "oracle.tx_y" => o.tx.y = parse_num(v)?,
            "oracle.p0" => o.p0 = parse_num(v)?,
            "oracle.gamma" => o.gamma = parse_num(v)?,
            "oracle.l" => o.length_scale = parse_num(v)?,
            "oracle.amp2" => o.amp2 = parse_num(v)?,
            "oracle.seed" => o.seed = parse_num(v)?,
            "oracle.region_x_min" => o.region.x_min = parse_num(v)?,
            "oracle.region_x_max" => o.region.x_max = parse_num(v)?,
            "oracle.region_y_min" => o.region.y_min = parse_num(v)?,
            "oracle.region_y_max" => o.region.y_max = parse_num(v)?,
            "oracle.ripple_amp" => o.ripple_amp = parse_num(v)?,
            "oracle.ripple_period" => o.ripple_period = parse_num(v)?,
            "oracle.bump_x" => o.bump_center.x = parse_num(v)?,
            "oracle.bump_y" => o.bump_center.y = parse_num(v)?,
            "oracle.bump_amp" => o.bump_amp = parse_num(v)?,
            "oracle.bump_radius" => o.bump_radius = parse_num(v)?,
            "benchmark.suite" => {
                b.suite = match v {
                    "active" => Suite::Active,
                    "dynamic" => Suite::Dynamic,
                    "all" => Suite::All,
                    _ => return Err(format!("expected active, dynamic or all, got '{v}'")),
                }
            }
            "benchmark.seeds" => b.seeds = parse_num(v)?,
            "benchmark.random_n" => b.random_n = parse_num(v)?,
            "benchmark.active_max" => b.active_max = parse_num(v)?,
            "benchmark.scratch_n" => b.scratch_n = parse_num(v)?,
            "benchmark.dynamic_n" => b.dynamic_n = parse_num(v)?,
            "benchmark.eval_stride" => b.eval_stride = parse_num(v)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Checks every component invariant.
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::invalid("scene.resolution", "must be positive"));
        }
        self.rays.validate()?;
        self.kernel.validate()?;
        for (g, name) in [(&self.local, "local"), (&self.dynamic, "dynamic")] {
            if !(g.l_min > 0.0 && g.l_min <= g.l_max && g.l_max.is_finite()) || g.l_count == 0 {
                let key = if name == "local" {
                    "local.l_grid"
                } else {
                    "dynamic.l_grid"
                };
                return Err(Error::invalid(
                    key,
                    "needs 0 < l_min <= l_max and l_count >= 1",
                ));
            }
            if g.l_count > 1 && g.l_min == g.l_max {
                let key = if name == "local" {
                    "local.l_grid"
                } else {
                    "dynamic.l_grid"
                };
                return Err(Error::invalid(
                    key,
                    "l_min must be below l_max when l_count > 1",
                ));
            }
        }
        self.local_options().validate()?;
        if !(self.dynamic.radius > 0.0 && self.dynamic.radius.is_finite()) {
            return Err(Error::invalid("dynamic.L", "must be positive"));
        }
        if !(self.threshold_rel >= 0.0 && self.threshold_rel.is_finite()) {
            return Err(Error::invalid(
                "active.threshold_rel",
                "must be non-negative",
            ));
        }
        self.sampler().validate()?;
        self.oracle.spec()?;
        if self.benchmark.eval_stride == 0 {
            return Err(Error::invalid(
                "benchmark.eval_stride",
                "must be at least 1",
            ));
        }
        Ok(())
    }

    pub fn local_options(&self) -> LocalOptions {
        let l_grid = if self.local.l_count == 1 {
            vec![self.local.l_min]
        } else {
            self.local.l_grid()
        };
        let mut opts = LocalOptions {
            radius: self.local.radius,
            l_grid,
            min_local: self.min_local,
            expand_factor: self.expand_factor,
            max_expansions: self.max_expansions,
            estimate_amp2: self.estimate_amp2,
            centering: self.centering,
        };
        if self.strict {
            opts.estimate_amp2 = false;
            opts.centering = Centering::Zero;
        }
        opts
    }

    /// Options for the difference field, zero-mean regardless of centering.
    pub fn dynamic_options(&self) -> LocalOptions {
        let l_grid = if self.dynamic.l_count == 1 {
            vec![self.dynamic.l_min]
        } else {
            self.dynamic.l_grid()
        };
        LocalOptions {
            radius: self.dynamic.radius,
            l_grid,
            centering: Centering::Zero,
            ..self.local_options()
        }
    }

    pub fn sampler(&self) -> SamplerParams {
        SamplerParams {
            init_m: self.init_m,
            budget: self.budget,
            section_size: self.section_size,
            threshold: match self.threshold {
                Some(t) => Threshold::Absolute(t),
                None => Threshold::Relative(self.threshold_rel),
            },
            candidate_res: self.candidate_res,
            global_argmax: self.global_argmax,
            seed: self.seed,
        }
    }

    /// Parses config text; `origin` names the source in errors.
    pub fn parse_str(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut lines: HashMap<String, usize> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::parse(origin, line_no, "expected 'key = value'"));
            };
            let (k, v) = (k.trim(), v.trim());
            cfg.set(k, v)
                .map_err(|m| Error::parse(origin, line_no, format!("{k}: {m}")))?;
            lines.insert(k.to_string(), line_no);
        }
        cfg.validate().map_err(|e| locate(e, &lines, origin))?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides on top of `self`, then revalidates.
    pub fn with_overrides<S: AsRef<str>>(mut self, overrides: &[S]) -> Result<Self> {
        let origin = Path::new("--set");
        for (i, o) in overrides.iter().enumerate() {
            let o = o.as_ref();
            let Some((k, v)) = o.split_once('=') else {
                return Err(Error::parse(
                    origin,
                    i + 1,
                    format!("expected key=value, got '{o}'"),
                ));
            };
            let (k, v) = (k.trim(), v.trim());
            self.set(k, v)
                .map_err(|m| Error::parse(origin, i + 1, format!("{k}: {m}")))?;
        }
        self.validate()?;
        Ok(self)
    }
}

/// Attaches the line that set the offending key, when there is one.
fn locate(e: Error, lines: &HashMap<String, usize>, origin: &Path) -> Error {
    let Error::InvalidParameter { name, reason } = &e else {
        return e;
    };
    let candidates: Vec<&str> = match *name {
        "bounds" => vec!["scene.x_min", "scene.x_max", "scene.y_min", "scene.y_max"],
        "resolution" => vec!["scene.resolution"],
        "kernel.length_scale" => vec!["kernel.length_scale"],
        "local.l_grid" => vec!["local.l_min", "local.l_max", "local.l_count"],
        "dynamic.l_grid" => vec!["dynamic.l_min", "dynamic.l_max", "dynamic.l_count"],
        "oracle.region" => vec![
            "oracle.region_x_min",
            "oracle.region_x_max",
            "oracle.region_y_min",
            "oracle.region_y_max",
        ],
        "active.threshold" => vec!["active.threshold", "active.threshold_rel"],
        other => vec![other],
    };
    match candidates.iter().filter_map(|k| lines.get(*k)).max() {
        Some(&line) => Error::parse(origin, line, format!("invalid {name}: {reason}")),
        None => e,
    }
}

/// Reads and parses a config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::parse_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse_str(text, Path::new("test.cfg"))
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse("").unwrap(), RunConfig::default());
        assert_eq!(parse("# only a comment\n\n").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn rays_r_is_read() {
        let c = parse("rays.R = 16   # inline comment\n").unwrap();
        assert_eq!(c.rays.rays, 16);
        assert_eq!(parse("rays.R=5").unwrap().rays.rays, 5);
    }

    #[test]
    fn invariant_error_names_the_key_and_line() {
        let e = parse("rays.R = 4\nrays.d = -1\n").unwrap_err();
        let msg = e.to_string();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{msg}");
        assert!(msg.contains("rays.d"), "{msg}");
    }

    #[test]
    fn unknown_key_and_bad_value_report_lines() {
        let e = parse("\nrays.Q = 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(e.to_string().contains("rays.Q"));
        let e = parse("kernel.amp2 = lots\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        assert!(parse("just words\n").is_err());
    }

    #[test]
    fn every_documented_key_is_settable() {
        let mut c = RunConfig::default();
        for k in KEYS {
            let v = match *k {
                "local.scope" => "global",
                "run.centering" => "zero",
                "oracle.kind" => "pathloss",
                "oracle.base" => "constant",
                "benchmark.suite" => "active",
                k if k.ends_with("argmax")
                    || k.ends_with("amp2") && k.starts_with("local")
                    || k.ends_with("strict") =>
                {
                    "true"
                }
                _ => "1",
            };
            c.set(k, v).unwrap_or_else(|m| panic!("{k}: {m}"));
        }
    }

    #[test]
    fn overrides_win_and_are_validated() {
        let c = parse("active.budget = 5\n").unwrap();
        let c = c
            .with_overrides(&["active.budget=7", "run.seed = 3"])
            .unwrap();
        assert_eq!((c.budget, c.seed), (7, 3));
        assert!(RunConfig::default().with_overrides(&["rays.N=0"]).is_err());
        assert!(RunConfig::default().with_overrides(&["nonsense"]).is_err());
    }

    #[test]
    fn strict_mode_forces_zero_mean_fixed_amplitude() {
        let c = parse("run.strict = true\n").unwrap();
        let o = c.local_options();
        assert_eq!(o.centering, Centering::Zero);
        assert!(!o.estimate_amp2);
        assert_eq!(c.dynamic_options().centering, Centering::Zero);
    }

    #[test]
    fn absolute_threshold_overrides_relative() {
        let c = parse("active.threshold = 0.5\n").unwrap();
        assert_eq!(c.sampler().threshold, Threshold::Absolute(0.5));
        assert_eq!(
            RunConfig::default().sampler().threshold,
            Threshold::Relative(0.05)
        );
    }

    #[test]
    fn oracle_kinds_build() {
        let mut c = RunConfig::default();
        assert_eq!(c.oracle.spec().unwrap().kind(), "sharp");
        assert_eq!(c.oracle.dynamic_pair().unwrap().kind(), "dynamic-pair");
        c.set("oracle.kind", "dynamic-pair").unwrap();
        assert_eq!(c.oracle.spec().unwrap().kind(), "dynamic-pair");
        c.set("oracle.kind", "warp").unwrap();
        assert!(c.validate().is_err());
    }
}
