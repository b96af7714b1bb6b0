//! Maximal likely trajectories and transition verdicts.
//!
//! The maximal likely trajectory from `s0` is the curve `t -> argmax p(., t)`
//! of the Fokker-Planck density started at `delta(s - s0)`.

use std::fmt;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fp_solver::{solve_with, DensityField, SolverConfig, SolverError};
use crate::model::{classify_basin_with_band, Band, Basin, LimitCycle, ModelError, State};
use crate::stable_noise::StableSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MltError {
    #[error("density has no positive value at t = {time}")]
    DegenerateField { time: f64 },
    #[error("no snapshots to extract a trajectory from")]
    Empty,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Default number of consecutive interior samples that make a transition.
pub const DEFAULT_DWELL: usize = 5;

/// Fraction of the rescaled domain diameter above which a step between
/// consecutive samples is logged as a multimodal switch.
pub const SWITCH_FRACTION: f64 = 0.25;

/// Location of the density maximum of one snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub location: State,
    /// Density in `(v, w)` units at the grid maximum.
    pub pmax: f64,
    pub row: usize,
    pub col: usize,
    /// More than one node attained the maximum.
    pub tie: bool,
}

/// Vertex offset of the parabola through `(-1, l), (0, c), (1, r)`, clamped to
/// half a cell.
fn parabola_offset(l: f64, c: f64, r: f64) -> f64 {
    let curv = l - 2.0 * c + r;
    if curv < 0.0 {
        (0.5 * (l - r) / curv).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

/// Grid argmax with a three-point quadratic refinement along each axis. Ties go
/// to the smallest `(v index, w index)` pair.
pub fn argmax_density(field: &DensityField) -> Result<Peak, MltError> {
    let p = &field.values;
    let (rows, cols) = p.dim();
    let mut best = f64::NEG_INFINITY;
    let mut at = (0, 0);
    let mut ties = 0usize;
    // column-major scan so the first hit is the lexicographic minimum
    for c in 0..cols {
        for r in 0..rows {
            let x = p[[r, c]];
            if x > best {
                best = x;
                at = (r, c);
                ties = 0;
            } else if x == best {
                ties += 1;
            }
        }
    }
    if !(best > 0.0) {
        return Err(MltError::DegenerateField { time: field.time });
    }
    let (r, c) = at;
    if ties > 0 {
        info!(
            "argmax tie at t = {}: {} nodes share the maximum, keeping (i, j) = ({}, {})",
            field.time,
            ties + 1,
            field.grid.node_index(c),
            field.grid.node_index(r)
        );
    }
    let get = |r: usize, c: usize, dr: i64, dc: i64| -> f64 {
        let (rr, cc) = (r as i64 + dr, c as i64 + dc);
        if rr < 0 || cc < 0 || rr >= rows as i64 || cc >= cols as i64 {
            0.0
        } else {
            p[[rr as usize, cc as usize]]
        }
    };
    let h = field.grid.h();
    let dx = parabola_offset(get(r, c, 0, -1), best, get(r, c, 0, 1));
    let dy = parabola_offset(get(r, c, -1, 0), best, get(r, c, 1, 0));
    let x = field.grid.coord(c) + dx * h;
    let y = field.grid.coord(r) + dy * h;
    Ok(Peak {
        location: field.domain.from_rescaled(x, y),
        pmax: field.domain.to_original_density(best),
        row: r,
        col: c,
        tie: ties > 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlSample {
    pub t: f64,
    pub location: State,
    pub pmax: f64,
}

/// A jump of the argmax between two modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    /// Index of the sample after the jump.
    pub index: usize,
    pub t: f64,
    /// Jump length in rescaled coordinates.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MlTrajectory {
    pub samples: Vec<MlSample>,
    pub switches: Vec<SwitchEvent>,
    /// Grid cell size in `(v, w)` of the snapshots.
    pub cell: Option<Band>,
}

impl MlTrajectory {
    /// Appends the maximum of `field`; times must increase.
    pub fn push(&mut self, field: &DensityField) -> Result<(), MltError> {
        let peak = argmax_density(field)?;
        if let Some(prev) = self.samples.last() {
            assert!(field.time > prev.t, "snapshot times must increase");
            let (x0, y0) = field.domain.to_rescaled(prev.location);
            let (x1, y1) = field.domain.to_rescaled(peak.location);
            let distance = (x1 - x0).hypot(y1 - y0);
            if distance > SWITCH_FRACTION * 2.0 * std::f64::consts::SQRT_2 {
                warn!(
                    "argmax switched modes at t = {}: jump of {distance:.3} (rescaled)",
                    field.time
                );
                self.switches.push(SwitchEvent {
                    index: self.samples.len(),
                    t: field.time,
                    distance,
                });
            }
        }
        self.cell.get_or_insert_with(|| cell_band(field));
        self.samples.push(MlSample {
            t: field.time,
            location: peak.location,
            pmax: peak.pmax,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&MlSample> {
        self.samples.last()
    }

    /// `t,v,w,pmax` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,v,w,pmax\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{},{:e}\n", s.t, s.location.v, s.location.w, s.pmax));
        }
        out
    }
}

fn cell_band(field: &DensityField) -> Band {
    let h = field.grid.h();
    Band {
        dv: h / field.domain.v_factor(),
        dw: h / field.domain.w_factor(),
    }
}

pub fn extract_mlt(snapshots: &[DensityField]) -> Result<MlTrajectory, MltError> {
    if snapshots.is_empty() {
        return Err(MltError::Empty);
    }
    let mut mlt = MlTrajectory::default();
    for f in snapshots {
        mlt.push(f)?;
    }
    Ok(mlt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    StayOscillate,
    ToRest,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionVerdict {
    pub verdict: Verdict,
    /// Time of the first sample of the deciding run; set only for `ToRest`.
    pub decision_time: Option<f64>,
}

impl TransitionVerdict {
    pub fn is_transition(&self) -> bool {
        self.verdict == Verdict::ToRest
    }
}

/// Classifies a trajectory against the unstable cycle. Samples within one
/// grid cell of the polyline are ambiguous and break a dwell run.
pub fn classify_transition(mlt: &MlTrajectory, unstable: &LimitCycle, dwell: usize) -> TransitionVerdict {
    let band = mlt.cell.unwrap_or_else(|| unstable.resolution());
    classify_transition_with_band(mlt, unstable, dwell, band)
}

pub fn classify_transition_with_band(
    mlt: &MlTrajectory,
    unstable: &LimitCycle,
    dwell: usize,
    band: Band,
) -> TransitionVerdict {
    let dwell = dwell.max(1);
    let mut inside_run = 0usize;
    let mut ambiguous_run = 0usize;
    for (k, s) in mlt.samples.iter().enumerate() {
        match classify_basin_with_band(s.location, unstable, band) {
            Ok(Basin::Rest) => {
                inside_run += 1;
                ambiguous_run = 0;
                if inside_run == dwell {
                    return TransitionVerdict {
                        verdict: Verdict::ToRest,
                        decision_time: Some(mlt.samples[k + 1 - dwell].t),
                    };
                }
            }
            Ok(Basin::Oscillate) => {
                inside_run = 0;
                ambiguous_run = 0;
            }
            Err(_) => {
                inside_run = 0;
                ambiguous_run += 1;
            }
        }
    }
    let verdict = if ambiguous_run >= dwell {
        Verdict::Undecided
    } else {
        Verdict::StayOscillate
    };
    TransitionVerdict {
        verdict,
        decision_time: None,
    }
}

/// Solves from `s0` and returns the trajectory with its verdict. Snapshots are
/// consumed as they are produced.
pub fn trajectory_and_verdict(
    config: &SolverConfig,
    s0: State,
    unstable: &LimitCycle,
    dwell: usize,
) -> Result<(MlTrajectory, TransitionVerdict), MltError> {
    let mut mlt = MlTrajectory::default();
    let mut failure = None;
    solve_with(config, s0, |f| {
        if failure.is_none() {
            if let Err(e) = mlt.push(f) {
                failure = Some(e);
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let verdict = classify_transition(&mlt, unstable, dwell);
    Ok((mlt, verdict))
}

/// Initial-state pairs used for the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPair {
    /// Two points on the stable limit cycle.
    StableCycle,
    /// Two borderline points on the unstable limit cycle.
    UnstableCycle,
}

impl StartPair {
    pub fn states(self) -> [State; 2] {
        match self {
            StartPair::StableCycle => [State::new(-32.7, 0.4578), State::new(7.459, 0.5004)],
            StartPair::UnstableCycle => [State::new(-22.73, 0.174), State::new(-31.27, 0.15)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mark {
    /// Both trajectories keep oscillating.
    O,
    /// Both trajectories transition to rest.
    X,
    /// The two starts disagree.
    Plus,
}

impl Mark {
    /// `Undecided` counts as not having entered the resting basin.
    pub fn from_verdicts(a: Verdict, b: Verdict) -> Mark {
        match (a == Verdict::ToRest, b == Verdict::ToRest) {
            (true, true) => Mark::X,
            (false, false) => Mark::O,
            _ => Mark::Plus,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Mark::O => "o",
            Mark::X => "x",
            Mark::Plus => "+",
        }
    }
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Done {
        mark: Mark,
        verdicts: [TransitionVerdict; 2],
    },
    Failed(String),
}

impl CellOutcome {
    pub fn mark(&self) -> Option<Mark> {
        match self {
            CellOutcome::Done { mark, .. } => Some(*mark),
            CellOutcome::Failed(_) => None,
        }
    }
}

/// `cells[a][s]` belongs to `alphas[a]`, `sigmas[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    pub alphas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub starts: StartPair,
    pub cells: Vec<Vec<CellOutcome>>,
}

impl PhaseDiagram {
    pub fn mark(&self, alpha: f64, sigma: f64) -> Option<Mark> {
        let a = self.alphas.iter().position(|&x| x == alpha)?;
        let s = self.sigmas.iter().position(|&x| x == sigma)?;
        self.cells[a][s].mark()
    }

    pub fn failures(&self) -> usize {
        self.cells
            .iter()
            .flatten()
            .filter(|c| matches!(c, CellOutcome::Failed(_)))
            .count()
    }

    /// `alpha,sigma,mark` with failed cells marked `failed`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,sigma,mark\n");
        for (a, row) in self.alphas.iter().zip(&self.cells) {
            for (s, cell) in self.sigmas.iter().zip(row) {
                let m = cell.mark().map(|m| m.symbol()).unwrap_or("failed");
                out.push_str(&format!("{a},{s},{m}\n"));
            }
        }
        out
    }

    /// `(alpha, sigma)` points carrying `mark`, in sweep order.
    pub fn points_with(&self, mark: Mark) -> Vec<(f64, f64)> {
        let mut pts = Vec::new();
        for (a, row) in self.alphas.iter().zip(&self.cells) {
            for (s, cell) in self.sigmas.iter().zip(row) {
                if cell.mark() == Some(mark) {
                    pts.push((*a, *s));
                }
            }
        }
        pts
    }
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(|a, b| a.total_cmp(b));
    xs.dedup();
    xs
}

/// Runs the sweep. Every `(alpha, sigma, start)` solve is an independent
/// job; `alpha = 2` cells use the Brownian solver. Failures are recorded per
/// cell and the sweep continues.
pub fn phase_diagram(
    base: &SolverConfig,
    unstable: &LimitCycle,
    alphas: &[f64],
    sigmas: &[f64],
    starts: StartPair,
    dwell: usize,
) -> PhaseDiagram {
    let alphas = sorted(alphas.to_vec());
    let sigmas = sorted(sigmas.to_vec());
    let states = starts.states();
    let jobs: Vec<(usize, usize, usize)> = (0..alphas.len())
        .flat_map(|a| (0..sigmas.len()).flat_map(move |s| (0..2).map(move |k| (a, s, k))))
        .collect();
    let results: Vec<Result<TransitionVerdict, String>> = jobs
        .par_iter()
        .map(|&(a, s, k)| {
            let noise = StableSpec::new(alphas[a], sigmas[s]).map_err(|e| e.to_string())?;
            let cfg = SolverConfig {
                noise,
                ..base.clone()
            };
            trajectory_and_verdict(&cfg, states[k], unstable, dwell)
                .map(|(_, v)| v)
                .map_err(|e| {
                    warn!("cell alpha={} sigma={} start {k} failed: {e}", alphas[a], sigmas[s]);
                    e.to_string()
                })
        })
        .collect();
    let mut cells = vec![Vec::with_capacity(sigmas.len()); alphas.len()];
    for pair in jobs.chunks(2).zip(results.chunks(2)) {
        let ((a, _, _), res) = (pair.0[0], pair.1);
        let cell = match (&res[0], &res[1]) {
            (Ok(v0), Ok(v1)) => CellOutcome::Done {
                mark: Mark::from_verdicts(v0.verdict, v1.verdict),
                verdicts: [*v0, *v1],
            },
            (Err(e), _) | (_, Err(e)) => CellOutcome::Failed(e.clone()),
        };
        cells[a].push(cell);
    }
    PhaseDiagram {
        alphas,
        sigmas,
        starts,
        cells,
    }
}
