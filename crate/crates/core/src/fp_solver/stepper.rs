//! Time stepping and full solves.

use log::{debug, trace};
use ndarray::{Array2, ArrayView2, ArrayViewMut2, Zip};

use super::{
    init_delta, Advection, DensityField, Grid, LfSpeeds, LocalDiffusion, NonlocalOperator,
    SolverConfig, SolverError, BLOWUP_THRESHOLD, CFL_FACTOR,
};
use crate::model::State;

#[derive(Debug, Clone)]
enum Diffusion {
    None,
    Levy(NonlocalOperator),
    Brownian(LocalDiffusion),
}

/// Right-hand side of the semi-discrete system.
#[derive(Debug, Clone)]
pub struct FpOperator {
    diffusion: Diffusion,
    advection: Option<Advection>,
    h: f64,
}

impl FpOperator {
    pub fn levy(nonlocal: NonlocalOperator, advection: Option<Advection>, grid: Grid) -> Self {
        Self {
            diffusion: Diffusion::Levy(nonlocal),
            advection,
            h: grid.h(),
        }
    }

    pub fn brownian(diff: LocalDiffusion, advection: Option<Advection>, grid: Grid) -> Self {
        Self {
            diffusion: Diffusion::Brownian(diff),
            advection,
            h: grid.h(),
        }
    }

    pub fn transport_only(advection: Advection, grid: Grid) -> Self {
        Self {
            diffusion: Diffusion::None,
            advection: Some(advection),
            h: grid.h(),
        }
    }

    /// Builds the operator for `config`, routing `alpha = 2` to the local
    /// diffusion term.
    pub fn from_config(config: &SolverConfig) -> Result<Self, SolverError> {
        config.validate()?;
        let grid = Grid::new(config.j)?;
        let speeds = config
            .lf_speeds
            .unwrap_or_else(|| LfSpeeds::estimate(&config.params, &config.domain));
        let advection = Advection::new(&config.params, grid, &config.domain, speeds, config.scheme);
        if config.noise.is_brownian() {
            let diff = LocalDiffusion::new(config.noise.sigma, grid, &config.domain);
            Ok(Self::brownian(diff, Some(advection), grid))
        } else {
            let nl = NonlocalOperator::new(&config.noise, grid, &config.domain, config.exterior)?;
            Ok(Self::levy(nl, Some(advection), grid))
        }
    }

    /// `out = dP/dt`.
    pub fn eval(&self, p: ArrayView2<f64>, out: &mut ArrayViewMut2<f64>) {
        match &self.diffusion {
            Diffusion::None => out.fill(0.0),
            Diffusion::Levy(op) => op.apply(p, 0.0, out),
            Diffusion::Brownian(op) => op.apply(p, 0.0, out),
        }
        if let Some(adv) = &self.advection {
            adv.accumulate(p, out);
        }
    }

    /// Largest stable explicit step times the safety factor.
    pub fn max_stable_dt(&self) -> f64 {
        let transport = self
            .advection
            .as_ref()
            .map(|a| self.h / a.max_speed())
            .unwrap_or(f64::INFINITY);
        let rate = match &self.diffusion {
            Diffusion::None => 0.0,
            Diffusion::Levy(op) => op.max_rate(),
            Diffusion::Brownian(op) => op.max_rate(),
        };
        let diffusive = if rate > 0.0 { 1.0 / rate } else { f64::INFINITY };
        CFL_FACTOR * transport.min(diffusive)
    }
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct Workspace {
    rate: Array2<f64>,
    stage: Array2<f64>,
}

impl Workspace {
    pub fn new(shape: (usize, usize)) -> Self {
        Self {
            rate: Array2::zeros(shape),
            stage: Array2::zeros(shape),
        }
    }
}

/// Diagnostics of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Negative mass removed by the clamp, relative to the mass before it.
    pub negative_fraction: f64,
    pub mass: f64,
}

/// One SSP-RK3 (Shu-Osher) step of `dP/dt = op(P)` on a raw array, followed
/// by the mass-preserving positivity clamp.
pub fn ssp_rk3_step(
    p: &mut Array2<f64>,
    dt: f64,
    op: &FpOperator,
    ws: &mut Workspace,
) -> StepReport {
    let Workspace { rate, stage } = ws;
    // u1 = u + dt L(u)
    op.eval(p.view(), &mut rate.view_mut());
    Zip::from(&mut *stage)
        .and(&*p)
        .and(&*rate)
        .for_each(|s, &u, &l| *s = u + dt * l);
    // u2 = 3/4 u + 1/4 (u1 + dt L(u1))
    op.eval(stage.view(), &mut rate.view_mut());
    Zip::from(&mut *stage)
        .and(&*p)
        .and(&*rate)
        .for_each(|s, &u, &l| *s = 0.75 * u + 0.25 * (*s + dt * l));
    // u = 1/3 u + 2/3 (u2 + dt L(u2))
    op.eval(stage.view(), &mut rate.view_mut());
    Zip::from(&mut *p)
        .and(&*stage)
        .and(&*rate)
        .for_each(|u, &s, &l| *u = *u / 3.0 + 2.0 / 3.0 * (s + dt * l));
    clamp_preserving_mass(p)
}

/// Zeroes negative values and rescales the positive part so the net sum is
/// unchanged. The net sum only decreases under the scheme, so this keeps the
/// mass sequence monotone.
fn clamp_preserving_mass(p: &mut Array2<f64>) -> StepReport {
    let (mut pos, mut neg) = (0.0, 0.0);
    for &x in p.iter() {
        if x > 0.0 {
            pos += x;
        } else {
            neg -= x;
        }
    }
    let net = pos - neg;
    if neg > 0.0 {
        let scale = if net > 0.0 { net / pos } else { 0.0 };
        p.mapv_inplace(|x| if x > 0.0 { x * scale } else { 0.0 });
    }
    StepReport {
        negative_fraction: if pos > 0.0 { neg / pos } else { 0.0 },
        mass: net.max(0.0),
    }
}

/// Advances `field` by `dt`.
pub fn step(
    field: &mut DensityField,
    dt: f64,
    op: &FpOperator,
    ws: &mut Workspace,
) -> Result<StepReport, SolverError> {
    let before = field.mass();
    let mut report = ssp_rk3_step(&mut field.values, dt, op, ws);
    field.time += dt;
    report.mass *= field.grid.cell_area();
    let worst = field
        .values
        .iter()
        .copied()
        .find(|x| !x.is_finite() || *x > BLOWUP_THRESHOLD);
    if let Some(value) = worst {
        return Err(SolverError::Unstable {
            time: field.time,
            value,
        });
    }
    if report.mass > before + 1e-10 {
        return Err(SolverError::MassIncrease {
            time: field.time,
            before,
            after: report.mass,
        });
    }
    Ok(report)
}

/// Statistics of a finished solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSummary {
    pub dt: f64,
    pub steps: usize,
    /// Largest per-step clamped negative mass fraction.
    pub max_negative_fraction: f64,
    pub final_mass: f64,
}

/// Step aligned to the snapshot cadence.
pub fn resolve_dt(config: &SolverConfig, op: &FpOperator) -> f64 {
    let raw = config.dt.unwrap_or_else(|| op.max_stable_dt());
    let per = (config.snapshot_every / raw).ceil().max(1.0);
    config.snapshot_every / per
}

/// Runs a solve from a delta at `s0`, handing every snapshot (including
/// `t = 0`) to `sink`. Dispatches on `alpha` like [`FpOperator::from_config`].
pub fn solve_with<F>(config: &SolverConfig, s0: State, mut sink: F) -> Result<SolveSummary, SolverError>
where
    F: FnMut(&DensityField),
{
    let op = FpOperator::from_config(config)?;
    let grid = Grid::new(config.j)?;
    let mut field = init_delta(s0, grid, config.domain)?;
    let dt = resolve_dt(config, &op);
    let per_snapshot = (config.snapshot_every / dt).round() as usize;
    let n_snapshots = (config.horizon / config.snapshot_every + 1e-9).floor() as usize;
    debug!(
        "fp solve: J={} alpha={} sigma={} dt={dt:.3e} snapshots={n_snapshots} start=({}, {})",
        config.j, config.noise.alpha, config.noise.sigma, s0.v, s0.w
    );
    let mut ws = Workspace::new(field.values.dim());
    let mut max_neg = 0.0f64;
    let mut steps = 0;
    sink(&field);
    for snap in 1..=n_snapshots {
        for _ in 0..per_snapshot {
            let rep = step(&mut field, dt, &op, &mut ws)?;
            max_neg = max_neg.max(rep.negative_fraction);
            steps += 1;
        }
        // remove accumulated round-off in the clock
        field.time = snap as f64 * config.snapshot_every;
        trace!("t={} mass={:.6e}", field.time, field.mass());
        sink(&field);
    }
    Ok(SolveSummary {
        dt,
        steps,
        max_negative_fraction: max_neg,
        final_mass: field.mass(),
    })
}

/// Collects all snapshots of a Levy solve (`0 < alpha < 2`).
pub fn solve(config: &SolverConfig, s0: State) -> Result<Vec<DensityField>, SolverError> {
    if config.noise.is_brownian() {
        return Err(SolverError::AlphaOutOfRange(config.noise.alpha));
    }
    solve_any(config, s0)
}

/// Collects all snapshots of a Brownian solve (`alpha = 2`).
pub fn solve_brownian(config: &SolverConfig, s0: State) -> Result<Vec<DensityField>, SolverError> {
    if !config.noise.is_brownian() {
        return Err(SolverError::AlphaOutOfRange(config.noise.alpha));
    }
    solve_any(config, s0)
}

pub fn solve_any(config: &SolverConfig, s0: State) -> Result<Vec<DensityField>, SolverError> {
    let mut out = Vec::new();
    solve_with(config, s0, |f| out.push(f.clone()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fp_solver::{AdvectionScheme, Domain, ExteriorJumps};
    use crate::stable_noise::StableSpec;

    fn small_config(alpha: f64) -> SolverConfig {
        SolverConfig {
            j: 16,
            horizon: 2.0,
            snapshot_every: 0.5,
            noise: StableSpec::new(alpha, 0.25).unwrap(),
            ..SolverConfig::default()
        }
    }

    #[test]
    fn zero_field_stays_zero() {
        let cfg = small_config(0.7);
        let op = FpOperator::from_config(&cfg).unwrap();
        let g = Grid::new(cfg.j).unwrap();
        let mut f = DensityField::zeros(g, Domain::default());
        let mut ws = Workspace::new(f.values.dim());
        step(&mut f, 0.01, &op, &mut ws).unwrap();
        assert!(f.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn clamp_keeps_net_mass() {
        let mut p = Array2::from_shape_vec((1, 4), vec![1.0, -0.25, 2.0, 0.5]).unwrap();
        let rep = clamp_preserving_mass(&mut p);
        assert!((p.sum() - 3.25).abs() < 1e-14);
        assert!(p.iter().all(|&x| x >= 0.0));
        assert!((rep.negative_fraction - 0.25 / 3.5).abs() < 1e-14);
    }

    #[test]
    fn dispatch_by_alpha() {
        let cfg = small_config(2.0);
        let s0 = State::new(-32.7, 0.4578);
        assert!(matches!(solve(&cfg, s0), Err(SolverError::AlphaOutOfRange(_))));
        solve_brownian(&cfg, s0).unwrap();
        let cfg = small_config(1.0);
        assert!(matches!(
            solve_brownian(&cfg, s0),
            Err(SolverError::AlphaOutOfRange(_))
        ));
    }

    #[test]
    fn snapshots_cover_horizon_and_mass_decreases() {
        for scheme in [AdvectionScheme::Upwind1, AdvectionScheme::Weno5] {
            let cfg = SolverConfig {
                scheme,
                exterior: ExteriorJumps::Absorbed,
                ..small_config(1.2)
            };
            let snaps = solve(&cfg, State::new(-32.7, 0.4578)).unwrap();
            assert_eq!(snaps.len(), 5);
            assert_eq!(snaps.last().unwrap().time, 2.0);
            for w in snaps.windows(2) {
                assert!(w[1].mass() <= w[0].mass() + 1e-10);
                assert!(w[1].min() >= 0.0);
            }
        }
    }

    #[test]
    fn dt_respects_cadence_and_override() {
        let mut cfg = small_config(1.0);
        let op = FpOperator::from_config(&cfg).unwrap();
        let dt = resolve_dt(&cfg, &op);
        assert!(dt <= op.max_stable_dt() + 1e-15);
        let k = cfg.snapshot_every / dt;
        assert!((k - k.round()).abs() < 1e-9);
        cfg.dt = Some(0.01);
        assert!((resolve_dt(&cfg, &op) - 0.01).abs() < 1e-15);
    }
}
