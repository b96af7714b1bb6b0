//! Nonlocal Fokker-Planck solver.
//!
//! The density `p(v, w, t)` of
//!
//! ```text
//! dv = f1(v, w) dt + sigma dL^alpha,    dw = f2(v, w) dt
//! ```
//!
//! is evolved on the rectangle `D = (a, b) x (c, d)` with an absorbing
//! exterior. Coordinates are rescaled to `(-1, 1)^2`:
//!
//! ```text
//! x = 2 (v - a) / (b - a) - 1,   y = 2 (w - c) / (d - c) - 1
//! ```
//!
//! and the rescaled field is stored as a probability density in `(x, y)`, so
//! `sum(P) * h^2` is the probability of still being inside `D`. The drift is
//! discretised with global Lax-Friedrichs flux splitting, the jump part with
//! a trapezoidal quadrature plus a zeta-function correction for the
//! singular neighbourhood, and time is advanced with SSP-RK3.

mod advection;
mod io;
mod nonlocal;
mod stepper;

pub use advection::{Advection, AdvectionScheme, LfSpeeds};
pub use io::{read_binary, write_binary, write_csv, BINARY_HEADER_LEN, BINARY_MAGIC, BINARY_VERSION};
pub use nonlocal::{ExteriorJumps, LocalDiffusion, NonlocalOperator};
pub use stepper::{
    resolve_dt, solve, solve_any, solve_brownian, solve_with, ssp_rk3_step, step, FpOperator,
    SolveSummary,
    StepReport, Workspace,
};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{MlParams, ModelError, State};
use crate::stable_noise::{NoiseError, StableSpec};

/// Values above this abort a solve.
pub const BLOWUP_THRESHOLD: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("stability index {0} not supported by this solver")]
    AlphaOutOfRange(f64),
    #[error("initial state ({v}, {w}) lies outside the computational domain")]
    OutOfDomain { v: f64, w: f64 },
    #[error("solution blew up at t = {time}: value {value}")]
    Unstable { time: f64, value: f64 },
    #[error("mass increased from {before} to {after} at t = {time}")]
    MassIncrease { time: f64, before: f64, after: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The rectangle `(v_min, v_max) x (w_min, w_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Domain {
    pub v_min: f64,
    pub v_max: f64,
    pub w_min: f64,
    pub w_max: f64,
}

impl Default for Domain {
    fn default() -> Self {
        Self {
            v_min: -60.0,
            v_max: 40.0,
            w_min: 0.0,
            w_max: 0.6,
        }
    }
}

impl Domain {
    pub fn new(v_min: f64, v_max: f64, w_min: f64, w_max: f64) -> Result<Self, SolverError> {
        let d = Self {
            v_min,
            v_max,
            w_min,
            w_max,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let finite = [self.v_min, self.v_max, self.w_min, self.w_max]
            .iter()
            .all(|x| x.is_finite());
        if !finite || self.v_min >= self.v_max || self.w_min >= self.w_max {
            return Err(SolverError::InvalidConfig(format!(
                "domain bounds must satisfy a < b and c < d, got {self:?}"
            )));
        }
        Ok(())
    }

    /// `dx/dv = 2 / (b - a)`
    pub fn v_factor(&self) -> f64 {
        2.0 / (self.v_max - self.v_min)
    }

    /// `dy/dw = 2 / (d - c)`
    pub fn w_factor(&self) -> f64 {
        2.0 / (self.w_max - self.w_min)
    }

    pub fn to_rescaled(&self, s: State) -> (f64, f64) {
        (
            (s.v - self.v_min) * self.v_factor() - 1.0,
            (s.w - self.w_min) * self.w_factor() - 1.0,
        )
    }

    pub fn from_rescaled(&self, x: f64, y: f64) -> State {
        State::new(
            self.v_min + (x + 1.0) / self.v_factor(),
            self.w_min + (y + 1.0) / self.w_factor(),
        )
    }

    /// Strict interior test.
    pub fn contains(&self, s: State) -> bool {
        s.v > self.v_min && s.v < self.v_max && s.w > self.w_min && s.w < self.w_max
    }

    /// Amplitude of the jump term after rescaling, `(2 sigma / (b - a))^alpha`.
    pub fn noise_factor(&self, spec: &StableSpec) -> f64 {
        (spec.sigma * self.v_factor()).powf(spec.alpha)
    }

    /// Converts a rescaled density value to a density in `(v, w)`.
    pub fn to_original_density(&self, value: f64) -> f64 {
        value * self.v_factor() * self.w_factor()
    }

    /// Rectangle scaled about its centre by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let (cv, cw) = (
            0.5 * (self.v_min + self.v_max),
            0.5 * (self.w_min + self.w_max),
        );
        let (hv, hw) = (
            0.5 * factor * (self.v_max - self.v_min),
            0.5 * factor * (self.w_max - self.w_min),
        );
        Self {
            v_min: cv - hv,
            v_max: cv + hv,
            w_min: cw - hw,
            w_max: cw + hw,
        }
    }
}

/// Uniform grid `x_i = i h`, `h = 1 / J`. Unknowns live on the interior
/// nodes `-J+1 ..= J-1` of each axis; array index `k` maps to `i = k - (J-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub j: usize,
}

impl Grid {
    pub fn new(j: usize) -> Result<Self, SolverError> {
        if j < 2 {
            return Err(SolverError::InvalidConfig(format!(
                "grid resolution J must be at least 2, got {j}"
            )));
        }
        Ok(Self { j })
    }

    pub fn h(&self) -> f64 {
        1.0 / self.j as f64
    }

    /// Interior nodes per axis, `2J - 1`.
    pub fn n(&self) -> usize {
        2 * self.j - 1
    }

    /// Signed node index of array index `k`.
    pub fn node_index(&self, k: usize) -> i64 {
        k as i64 - (self.j as i64 - 1)
    }

    pub fn coord(&self, k: usize) -> f64 {
        self.node_index(k) as f64 * self.h()
    }

    /// Array index of the cell `[x_i - h/2, x_i + h/2)` containing `x`.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        let i = (x / self.h() + 0.5).floor() as i64;
        let lim = self.j as i64 - 1;
        (i.abs() <= lim).then(|| (i + lim) as usize)
    }

    pub fn cell_area(&self) -> f64 {
        self.h() * self.h()
    }
}

/// Rescaled probability density at one time. `values[[r, c]]` is the node
/// `(x_c, y_r)`: rows run along `w`, columns along `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: Grid,
    pub domain: Domain,
    pub time: f64,
    pub values: Array2<f64>,
}

impl DensityField {
    pub fn zeros(grid: Grid, domain: Domain) -> Self {
        let n = grid.n();
        Self {
            grid,
            domain,
            time: 0.0,
            values: Array2::zeros((n, n)),
        }
    }

    /// Midpoint quadrature of the field.
    pub fn mass(&self) -> f64 {
        self.values.sum() * self.grid.cell_area()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Phase-plane location of node `(row, col)`.
    pub fn node_state(&self, row: usize, col: usize) -> State {
        self.domain
            .from_rescaled(self.grid.coord(col), self.grid.coord(row))
    }

    /// Density in `(v, w)` units at node `(row, col)`.
    pub fn original_value(&self, row: usize, col: usize) -> f64 {
        self.domain.to_original_density(self.values[[row, col]])
    }
}

/// Delta initial condition: unit mass in the single cell containing `s0`.
pub fn init_delta(s0: State, grid: Grid, domain: Domain) -> Result<DensityField, SolverError> {
    if !domain.contains(s0) {
        return Err(SolverError::OutOfDomain { v: s0.v, w: s0.w });
    }
    let (x, y) = domain.to_rescaled(s0);
    let (col, row) = match (grid.cell_of(x), grid.cell_of(y)) {
        (Some(c), Some(r)) => (c, r),
        _ => return Err(SolverError::OutOfDomain { v: s0.v, w: s0.w }),
    };
    let mut field = DensityField::zeros(grid, domain);
    field.values[[row, col]] = 1.0 / grid.cell_area();
    Ok(field)
}

/// Run settings for one Fokker-Planck solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub params: MlParams,
    pub domain: Domain,
    pub j: usize,
    /// Overrides the automatic step.
    pub dt: Option<f64>,
    pub horizon: f64,
    /// Snapshot cadence in time units.
    pub snapshot_every: f64,
    pub noise: StableSpec,
    /// Lax-Friedrichs speeds; estimated from the drift when absent.
    pub lf_speeds: Option<LfSpeeds>,
    pub scheme: AdvectionScheme,
    pub exterior: ExteriorJumps,
}

/// Production resolution.
pub const DEFAULT_J: usize = 100;
/// Resolution used by the test suites.
pub const TEST_J: usize = 50;
/// Safety factor applied to the explicit stability limit.
pub const CFL_FACTOR: f64 = 0.4;

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            params: MlParams::default(),
            domain: Domain::default(),
            j: DEFAULT_J,
            dt: None,
            horizon: 100.0,
            snapshot_every: 0.5,
            noise: StableSpec {
                alpha: 0.5,
                sigma: 0.25,
            },
            lf_speeds: None,
            scheme: AdvectionScheme::default(),
            exterior: ExteriorJumps::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        self.params.validate()?;
        self.domain.validate()?;
        StableSpec::new(self.noise.alpha, self.noise.sigma)?;
        Grid::new(self.j)?;
        if !(self.snapshot_every > 0.0) || !(self.horizon >= self.snapshot_every) {
            return Err(SolverError::InvalidConfig(format!(
                "need 0 < snapshot_every <= horizon, got {} and {}",
                self.snapshot_every, self.horizon
            )));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || dt > self.snapshot_every {
                return Err(SolverError::InvalidConfig(format!(
                    "time step {dt} must lie in (0, snapshot_every]"
                )));
            }
        }
        Ok(())
    }
}
