//! Run configuration (TOML).

use std::fmt;
use std::path::{Path, PathBuf};

use levy_ml::fp_solver::{AdvectionScheme, Domain, ExteriorJumps, SolverConfig};
use levy_ml::mlt::{StartPair, DEFAULT_DWELL};
use levy_ml::model::{MlParams, State};
use levy_ml::stable_noise::StableSpec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    PhasePortrait,
    Density,
    Mlt,
    PhaseDiagram,
    McCheck,
}

impl RunKind {
    pub fn name(self) -> &'static str {
        match self {
            RunKind::PhasePortrait => "phase-portrait",
            RunKind::Density => "density",
            RunKind::Mlt => "mlt",
            RunKind::PhaseDiagram => "phase-diagram",
            RunKind::McCheck => "mc-check",
        }
    }
}

impl fmt::Display for RunKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseBlock {
    pub alpha: f64,
    pub sigma: f64,
    /// Sweep values for `phase-diagram`.
    pub alphas: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl Default for NoiseBlock {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            sigma: 0.25,
            alphas: vec![0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0],
            sigmas: vec![0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub j: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub horizon: f64,
    pub snapshot_every: f64,
    pub scheme: AdvectionScheme,
    pub exterior: ExteriorJumps,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            j: d.j,
            dt: d.dt,
            horizon: d.horizon,
            snapshot_every: d.snapshot_every,
            scheme: d.scheme,
            exterior: d.exterior,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartSet {
    StableCycle,
    UnstableCycle,
    Both,
}

impl StartSet {
    pub fn pairs(self) -> Vec<StartPair> {
        match self {
            StartSet::StableCycle => vec![StartPair::StableCycle],
            StartSet::UnstableCycle => vec![StartPair::UnstableCycle],
            StartSet::Both => vec![StartPair::StableCycle, StartPair::UnstableCycle],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MltBlock {
    pub dwell: usize,
    pub starts: StartSet,
    /// Initial state `[v, w]` for `density` and `mc-check`.
    pub start: [f64; 2],
    /// Snapshot times written by `density`.
    pub density_times: Vec<f64>,
}

impl Default for MltBlock {
    fn default() -> Self {
        Self {
            dwell: DEFAULT_DWELL,
            starts: StartSet::Both,
            start: [-32.7, 0.4578],
            density_times: vec![1.0, 20.0, 70.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloBlock {
    pub n_paths: usize,
    pub dt: f64,
    /// Comparison time.
    pub t: f64,
    /// Write every terminal state (large).
    pub dump_paths: bool,
}

impl Default for MonteCarloBlock {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            dt: levy_ml::montecarlo::DEFAULT_DT,
            t: 1.0,
            dump_paths: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<RunKind>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub model: MlParams,
    pub domain: Domain,
    pub noise: NoiseBlock,
    pub solver: SolverBlock,
    pub mlt: MltBlock,
    pub montecarlo: MonteCarloBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kind: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
            model: MlParams::default(),
            domain: Domain::default(),
            noise: NoiseBlock::default(),
            solver: SolverBlock::default(),
            mlt: MltBlock::default(),
            montecarlo: MonteCarloBlock::default(),
        }
    }
}

/// One offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<FieldError>),
}

fn check(errors: &mut Vec<FieldError>, ok: bool, path: &str, message: impl Into<String>) {
    if !ok {
        errors.push(FieldError {
            path: path.to_string(),
            message: message.into(),
        });
    }
}

fn alpha_ok(a: f64) -> bool {
    a > 0.0 && a <= 2.0
}

fn sigma_ok(s: f64) -> bool {
    s.is_finite() && s >= 0.0
}

impl RunConfig {
    /// Lists every invariant violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut e = Vec::new();
        if let Err(err) = self.model.validate() {
            e.push(FieldError {
                path: "model".into(),
                message: err.to_string(),
            });
        }
        check(
            &mut e,
            self.seed <= i64::MAX as u64,
            "seed",
            format!("must not exceed {}, got {}", i64::MAX, self.seed),
        );
        let d = &self.domain;
        let finite = [d.v_min, d.v_max, d.w_min, d.w_max].iter().all(|x| x.is_finite());
        check(&mut e, finite && d.v_min < d.v_max, "domain.v_max", "must exceed domain.v_min");
        check(&mut e, finite && d.w_min < d.w_max, "domain.w_max", "must exceed domain.w_min");

        let n = &self.noise;
        check(&mut e, alpha_ok(n.alpha), "noise.alpha", format!("must lie in (0, 2], got {}", n.alpha));
        check(&mut e, sigma_ok(n.sigma), "noise.sigma", format!("must be finite and >= 0, got {}", n.sigma));
        for (k, a) in n.alphas.iter().enumerate() {
            check(&mut e, alpha_ok(*a), &format!("noise.alphas[{k}]"), format!("must lie in (0, 2], got {a}"));
        }
        for (k, s) in n.sigmas.iter().enumerate() {
            check(&mut e, sigma_ok(*s), &format!("noise.sigmas[{k}]"), format!("must be finite and >= 0, got {s}"));
        }

        let s = &self.solver;
        check(&mut e, s.j >= 2, "solver.j", format!("must be at least 2, got {}", s.j));
        check(
            &mut e,
            s.snapshot_every > 0.0 && s.snapshot_every.is_finite(),
            "solver.snapshot_every",
            format!("must be positive, got {}", s.snapshot_every),
        );
        check(
            &mut e,
            s.horizon >= s.snapshot_every && s.horizon.is_finite(),
            "solver.horizon",
            format!("must be finite and >= solver.snapshot_every, got {}", s.horizon),
        );
        if let Some(dt) = s.dt {
            check(
                &mut e,
                dt > 0.0 && dt <= s.snapshot_every && dt <= s.horizon,
                "solver.dt",
                format!("must lie in (0, snapshot_every] and not exceed the horizon, got {dt}"),
            );
        }

        let m = &self.mlt;
        check(&mut e, m.dwell >= 1, "mlt.dwell", "must be at least 1");
        let start = State::new(m.start[0], m.start[1]);
        check(&mut e, finite && self.domain.contains(start), "mlt.start", "must lie strictly inside the domain");
        for (k, t) in m.density_times.iter().enumerate() {
            check(
                &mut e,
                *t >= 0.0 && *t <= s.horizon,
                &format!("mlt.density_times[{k}]"),
                format!("must lie in [0, solver.horizon], got {t}"),
            );
        }

        let mc = &self.montecarlo;
        check(&mut e, mc.n_paths >= 1, "montecarlo.n_paths", "must be at least 1");
        check(&mut e, mc.dt > 0.0 && mc.dt.is_finite(), "montecarlo.dt", format!("must be positive, got {}", mc.dt));
        check(&mut e, mc.t > 0.0 && mc.t.is_finite(), "montecarlo.t", format!("must be positive, got {}", mc.t));

        if e.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Validation(e))
        }
    }

    pub fn noise_spec(&self) -> StableSpec {
        StableSpec {
            alpha: self.noise.alpha,
            sigma: self.noise.sigma,
        }
    }

    pub fn start_state(&self) -> State {
        State::new(self.mlt.start[0], self.mlt.start[1])
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            params: self.model,
            domain: self.domain,
            j: self.solver.j,
            dt: self.solver.dt,
            horizon: self.solver.horizon,
            snapshot_every: self.solver.snapshot_every,
            noise: self.noise_spec(),
            lf_speeds: None,
            scheme: self.solver.scheme,
            exterior: self.solver.exterior,
        }
    }

    /// The `(alpha, sigma)` cells of a phase-diagram run.
    pub fn sweep_plan(&self) -> Vec<(f64, f64)> {
        self.noise
            .alphas
            .iter()
            .flat_map(|&a| self.noise.sigmas.iter().map(move |&s| (a, s)))
            .collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_str(&text)
}
