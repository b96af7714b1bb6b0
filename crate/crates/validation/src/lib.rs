//! Shared plumbing for the acceptance suite: result lines and per-solve
//! records.

use std::fmt::Display;
use std::io::Write;
use std::time::{Duration, Instant};

use levy_ml::fp_solver::{solve_with, Domain, SolverConfig};
use levy_ml::mlt::{classify_transition, MlTrajectory, TransitionVerdict, SWITCH_FRACTION};
use levy_ml::model::{classify_basin, Basin, LimitCycle, State};

/// Writes `PASS <id> <title>: <detail>` (or `FAIL ...`) straight to stderr,
/// so the line shows up even when the harness captures output.
pub fn report(id: &str, title: &str, pass: bool, detail: impl Display) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{tag} {id} {title}: {detail}");
}

/// Everything the suite checks about one solve.
#[derive(Debug, Clone)]
pub struct CaseRecord {
    pub alpha: f64,
    pub sigma: f64,
    pub start: State,
    pub domain: Domain,
    pub trajectory: MlTrajectory,
    pub verdict: TransitionVerdict,
    /// Snapshot masses in time order.
    pub masses: Vec<f64>,
    pub max_negative_fraction: f64,
    pub elapsed: Duration,
}

impl CaseRecord {
    pub fn mass_nonincreasing(&self) -> bool {
        self.masses.windows(2).all(|m| m[1] <= m[0]) && self.masses[0] <= 1.0 + 1e-8
    }

    /// Basin of the final sample; `None` when it is ambiguous.
    pub fn final_basin(&self, unstable: &LimitCycle) -> Option<Basin> {
        let last = self.trajectory.last()?.location;
        classify_basin(last, unstable).ok()
    }

    /// Steps longer than the switch threshold that were not logged.
    pub fn unlogged_jumps(&self) -> usize {
        let limit = SWITCH_FRACTION * 2.0 * std::f64::consts::SQRT_2;
        let logged: Vec<usize> = self.trajectory.switches.iter().map(|s| s.index).collect();
        let samples = &self.trajectory.samples;
        (1..samples.len())
            .filter(|&k| {
                let (x0, y0) = self.domain.to_rescaled(samples[k - 1].location);
                let (x1, y1) = self.domain.to_rescaled(samples[k].location);
                (x1 - x0).hypot(y1 - y0) > limit && !logged.contains(&k)
            })
            .count()
    }

    pub fn label(&self) -> String {
        format!(
            "alpha={} sigma={} s0=({}, {})",
            self.alpha, self.sigma, self.start.v, self.start.w
        )
    }
}

/// Solves `config` from `start`, streaming snapshots into the trajectory.
pub fn run_case(config: &SolverConfig, start: State, unstable: &LimitCycle, dwell: usize) -> CaseRecord {
    let clock = Instant::now();
    let mut trajectory = MlTrajectory::default();
    let mut masses = Vec::new();
    let summary = solve_with(config, start, |f| {
        masses.push(f.mass());
        trajectory.push(f).expect("snapshot has a maximum");
    })
    .expect("solve succeeds");
    let verdict = classify_transition(&trajectory, unstable, dwell);
    CaseRecord {
        alpha: config.noise.alpha,
        sigma: config.noise.sigma,
        start,
        domain: config.domain,
        trajectory,
        verdict,
        masses,
        max_negative_fraction: summary.max_negative_fraction,
        elapsed: clock.elapsed(),
    }
}
