//! Euler-Maruyama ensembles of the noisy model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fp_solver::{DensityField, Domain, Grid};
use crate::model::{vector_field, LimitCycle, MlParams, State};
use crate::stable_noise::{increment, stream, StableSpec, StreamRng};

/// Ensemble step size.
pub const DEFAULT_DT: f64 = 0.005;
/// Paths leaving the domain scaled by this factor are frozen.
pub const GUARD_FACTOR: f64 = 3.0;

/// One simulated path, sampled at the requested record times.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub records: Vec<State>,
    pub terminal: State,
    /// Time the path left the guard box, if it did.
    pub escaped_at: Option<f64>,
}

impl Path {
    pub fn escaped(&self) -> bool {
        self.escaped_at.is_some()
    }
}

/// Simulates one path of
///
/// ```text
/// v' = v + f1 dt + sigma dL,   w' = w + f2 dt
/// ```
///
/// up to `t_end`, recording the state at each time in `record_times`
/// (ascending, within `[0, t_end]`). A path that leaves `guard` stays where it
/// left.
pub fn em_path(
    s0: State,
    params: &MlParams,
    spec: &StableSpec,
    dt: f64,
    t_end: f64,
    record_times: &[f64],
    guard: &Domain,
    rng: &mut StreamRng,
) -> Path {
    assert!(dt > 0.0, "step must be positive");
    let steps = (t_end / dt).round() as usize;
    let mut records = Vec::with_capacity(record_times.len());
    let mut next = 0;
    let mut s = s0;
    let mut escaped_at = None;
    for k in 0..=steps {
        let t = k as f64 * dt;
        while next < record_times.len() && record_times[next] <= t + 0.5 * dt {
            records.push(s);
            next += 1;
        }
        if k == steps {
            break;
        }
        if escaped_at.is_some() {
            // keep consuming no randomness once frozen
            continue;
        }
        let (f1, f2) = vector_field(s, params);
        let dl = increment(spec, dt, rng);
        s = State::new(s.v + f1 * dt + dl, s.w + f2 * dt);
        if !guard.contains(s) || !s.v.is_finite() {
            escaped_at = Some(t + dt);
        }
    }
    while records.len() < record_times.len() {
        records.push(s);
    }
    Path {
        records,
        terminal: s,
        escaped_at,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
}

/// States of every path at the record times.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub config: EnsembleConfig,
    pub record_times: Vec<f64>,
    /// `states[k][p]` is path `p` at `record_times[k]`.
    pub states: Vec<Vec<State>>,
    pub terminal: Vec<State>,
    pub escaped: Vec<bool>,
}

impl PathEnsemble {
    pub fn escaped_fraction(&self) -> f64 {
        self.escaped.iter().filter(|&&e| e).count() as f64 / self.escaped.len() as f64
    }

    pub fn states_at(&self, t: f64) -> Option<&[State]> {
        self.record_times
            .iter()
            .position(|&r| (r - t).abs() < 1e-9)
            .map(|k| self.states[k].as_slice())
    }

    /// `path,escaped,v,w` of the terminal states.
    pub fn terminal_csv(&self) -> String {
        let mut out = String::from("path,escaped,v,w\n");
        for (k, (s, e)) in self.terminal.iter().zip(&self.escaped).enumerate() {
            out.push_str(&format!("{k},{},{},{}\n", *e as u8, s.v, s.w));
        }
        out
    }
}

/// Runs `n_paths` independent paths from `s0`; path `p` draws from
/// `stream(seed, p)` so the result does not depend on the thread count.
pub fn ensemble(
    s0: State,
    params: &MlParams,
    spec: &StableSpec,
    domain: &Domain,
    config: EnsembleConfig,
    record_times: &[f64],
) -> PathEnsemble {
    assert!(config.n_paths >= 1, "need at least one path");
    let guard = domain.scaled(GUARD_FACTOR);
    let paths: Vec<Path> = (0..config.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream(config.seed, p as u64);
            em_path(
                s0,
                params,
                spec,
                config.dt,
                config.t_end,
                record_times,
                &guard,
                &mut rng,
            )
        })
        .collect();
    let mut states = vec![Vec::with_capacity(paths.len()); record_times.len()];
    for path in &paths {
        for (k, s) in path.records.iter().enumerate() {
            states[k].push(*s);
        }
    }
    PathEnsemble {
        config,
        record_times: record_times.to_vec(),
        states,
        terminal: paths.iter().map(|p| p.terminal).collect(),
        escaped: paths.iter().map(|p| p.escaped()).collect(),
    }
}

/// Normalised histogram on the solver grid cells, as a rescaled density.
/// Returns the field and the fraction of states outside every cell.
pub fn empirical_density(states: &[State], grid: Grid, domain: Domain, t: f64) -> (DensityField, f64) {
    let mut field = DensityField::zeros(grid, domain);
    field.time = t;
    let weight = 1.0 / (states.len() as f64 * grid.cell_area());
    let mut outside = 0usize;
    for s in states {
        let (x, y) = domain.to_rescaled(*s);
        match (domain.contains(*s), grid.cell_of(x), grid.cell_of(y)) {
            (true, Some(c), Some(r)) => field.values[[r, c]] += weight,
            _ => outside += 1,
        }
    }
    (field, outside as f64 / states.len() as f64)
}

/// Total variation between two sub-probability fields on the same grid, with
/// the missing mass of each treated as one extra atom.
pub fn total_variation(a: &DensityField, b: &DensityField) -> f64 {
    assert_eq!(a.grid, b.grid, "fields must share a grid");
    let area = a.grid.cell_area();
    let inner: f64 = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        * area;
    0.5 * (inner + (a.mass() - b.mass()).abs())
}

/// Fraction of paths whose terminal state lies inside the unstable cycle.
/// Escaped paths count as not at rest.
pub fn transition_fraction(ens: &PathEnsemble, unstable: &LimitCycle) -> f64 {
    let rest = ens
        .terminal
        .iter()
        .zip(&ens.escaped)
        .filter(|(s, e)| !**e && unstable.contains(**s))
        .count();
    rest as f64 / ens.terminal.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_stream_same_path() {
        let p = MlParams::default();
        let spec = StableSpec::new(1.3, 0.5).unwrap();
        let guard = Domain::default().scaled(GUARD_FACTOR);
        let run = |seed| {
            let mut rng = stream(seed, 7);
            em_path(State::new(-32.7, 0.4578), &p, &spec, 0.01, 5.0, &[1.0, 5.0], &guard, &mut rng)
        };
        let (a, b) = (run(11), run(11));
        assert_eq!(a.terminal.v.to_bits(), b.terminal.v.to_bits());
        assert_eq!(a, b);
        assert_ne!(a.terminal, run(12).terminal);
    }

    #[test]
    fn histogram_counts_everything() {
        let g = Grid::new(10).unwrap();
        let d = Domain::default();
        let mut states = vec![State::new(-32.7, 0.4578); 7];
        states.push(State::new(100.0, 0.3));
        states.push(State::new(-10.0, -0.1));
        let (f, out) = empirical_density(&states, g, d, 1.0);
        assert!((f.mass() + out - 1.0).abs() < 1e-12);
        assert_eq!(f.values.iter().filter(|&&x| x > 0.0).count(), 1);
    }

    #[test]
    fn total_variation_bounds() {
        let g = Grid::new(8).unwrap();
        let d = Domain::default();
        let (a, _) = empirical_density(&[State::new(-30.0, 0.2)], g, d, 0.0);
        let (b, _) = empirical_density(&[State::new(20.0, 0.5)], g, d, 0.0);
        assert!((total_variation(&a, &a)).abs() < 1e-15);
        assert!((total_variation(&a, &b) - 1.0).abs() < 1e-12);
        let z = DensityField::zeros(g, d);
        assert!((total_variation(&a, &z) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn escaped_paths_freeze() {
        let p = MlParams::default();
        let spec = StableSpec::new(0.3, 50.0).unwrap();
        let cfg = EnsembleConfig {
            n_paths: 64,
            dt: 0.01,
            t_end: 5.0,
            seed: 3,
        };
        let d = Domain::default();
        let ens = ensemble(State::new(-32.7, 0.4578), &p, &spec, &d, cfg, &[5.0]);
        assert!(ens.escaped_fraction() > 0.0);
        let guard = d.scaled(GUARD_FACTOR);
        for (s, e) in ens.terminal.iter().zip(&ens.escaped) {
            assert_eq!(*e, !guard.contains(*s));
        }
    }
}
