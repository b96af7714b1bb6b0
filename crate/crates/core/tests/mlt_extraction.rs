use levy_ml::fp_solver::{solve, DensityField, Domain, Grid, SolverConfig};
use levy_ml::mlt::{
    argmax_density, classify_transition_with_band, extract_mlt, phase_diagram,
    trajectory_and_verdict, CellOutcome, Mark, MlSample, MlTrajectory, StartPair, Verdict,
};
use levy_ml::model::{Band, Landscape, MlParams, State};
use levy_ml::StableSpec;
use proptest::prelude::*;

fn small_config(horizon: f64) -> SolverConfig {
    SolverConfig {
        j: 16,
        horizon,
        snapshot_every: 0.5,
        noise: StableSpec::new(1.0, 0.5).unwrap(),
        ..SolverConfig::default()
    }
}

fn paraboloid(grid: Grid, x0: f64, y0: f64) -> DensityField {
    let mut f = DensityField::zeros(grid, Domain::default());
    for ((r, c), v) in f.values.indexed_iter_mut() {
        let (x, y) = (grid.coord(c), grid.coord(r));
        *v = (1.0 - 3.0 * (x - x0).powi(2) - 7.0 * (y - y0).powi(2)).max(0.0);
    }
    f
}

proptest! {
    #[test]
    fn quadratic_peak_is_recovered_between_nodes(x0 in -0.5f64..0.5, y0 in -0.5f64..0.5) {
        let grid = Grid::new(20).unwrap();
        let f = paraboloid(grid, x0, y0);
        let peak = argmax_density(&f).unwrap();
        let (x, y) = f.domain.to_rescaled(peak.location);
        prop_assert!((x - x0).abs() < 1e-9, "x {} vs {}", x, x0);
        prop_assert!((y - y0).abs() < 1e-9, "y {} vs {}", y, y0);
        prop_assert!(!peak.tie);
    }
}

#[test]
fn ties_resolve_to_the_smallest_indices() {
    let grid = Grid::new(5).unwrap();
    let mut f = DensityField::zeros(grid, Domain::default());
    f.values[[6, 2]] = 3.0;
    f.values[[1, 2]] = 3.0;
    f.values[[0, 7]] = 3.0;
    let peak = argmax_density(&f).unwrap();
    assert!(peak.tie);
    assert_eq!((peak.col, peak.row), (2, 1));
}

#[test]
fn empty_field_is_degenerate() {
    let f = DensityField::zeros(Grid::new(5).unwrap(), Domain::default());
    assert!(argmax_density(&f).is_err());
    assert!(extract_mlt(&[]).is_err());
}

#[test]
fn extraction_is_deterministic() {
    let cfg = small_config(5.0);
    let s0 = State::new(-32.7, 0.4578);
    let a = extract_mlt(&solve(&cfg, s0).unwrap()).unwrap();
    let b = extract_mlt(&solve(&cfg, s0).unwrap()).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.len(), 11);
    assert_eq!(a.samples[0].t, 0.0);
    assert!((a.last().unwrap().t - 5.0).abs() < 1e-12);
}

#[test]
fn streamed_and_collected_trajectories_agree() {
    let cfg = small_config(3.0);
    let s0 = State::new(-22.73, 0.174);
    let land = Landscape::compute(&MlParams::default()).unwrap();
    let collected = extract_mlt(&solve(&cfg, s0).unwrap()).unwrap();
    let (streamed, _) = trajectory_and_verdict(&cfg, s0, &land.unstable, 5).unwrap();
    assert_eq!(collected, streamed);
}

fn trajectory(points: &[State]) -> MlTrajectory {
    MlTrajectory {
        samples: points
            .iter()
            .enumerate()
            .map(|(k, &location)| MlSample {
                t: 0.5 * k as f64,
                location,
                pmax: 1.0,
            })
            .collect(),
        ..MlTrajectory::default()
    }
}

#[test]
fn verdicts_on_synthetic_paths() {
    let land = Landscape::compute(&MlParams::default()).unwrap();
    let band = Band { dv: 1.2, dw: 0.012 };
    let rest = land.fixed_point.location;
    let out = State::new(-32.7, 0.4578);
    let on = land.unstable.polyline[0];

    let mut pts = vec![out; 4];
    pts.extend(vec![rest; 5]);
    pts.push(out);
    let v = classify_transition_with_band(&trajectory(&pts), &land.unstable, 5, band);
    assert_eq!(v.verdict, Verdict::ToRest);
    assert_eq!(v.decision_time, Some(2.0));

    // four inside samples are not enough, and an ambiguous one breaks the run
    let mut pts = vec![rest; 4];
    pts.push(on);
    pts.extend(vec![rest; 4]);
    pts.push(out);
    let v = classify_transition_with_band(&trajectory(&pts), &land.unstable, 5, band);
    assert_eq!(v.verdict, Verdict::StayOscillate);
    assert_eq!(v.decision_time, None);

    let mut pts = vec![out; 3];
    pts.extend(vec![on; 5]);
    let v = classify_transition_with_band(&trajectory(&pts), &land.unstable, 5, band);
    assert_eq!(v.verdict, Verdict::Undecided);
}

#[test]
fn marks_combine_verdicts() {
    use Verdict::*;
    assert_eq!(Mark::from_verdicts(ToRest, ToRest), Mark::X);
    assert_eq!(Mark::from_verdicts(StayOscillate, StayOscillate), Mark::O);
    assert_eq!(Mark::from_verdicts(Undecided, StayOscillate), Mark::O);
    assert_eq!(Mark::from_verdicts(ToRest, Undecided), Mark::Plus);
    assert_eq!(Mark::from_verdicts(StayOscillate, ToRest), Mark::Plus);
}

#[test]
fn small_sweep_fills_every_cell() {
    let land = Landscape::compute(&MlParams::default()).unwrap();
    let base = small_config(2.0);
    let pd = phase_diagram(&base, &land.unstable, &[2.0, 0.5], &[0.25, 0.5, 0.25], StartPair::StableCycle, 3);
    assert_eq!(pd.alphas, vec![0.5, 2.0]);
    assert_eq!(pd.sigmas, vec![0.25, 0.5]);
    assert_eq!(pd.failures(), 0);
    assert!(pd.cells.iter().flatten().all(|c| matches!(c, CellOutcome::Done { .. })));
    let csv = pd.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "alpha,sigma,mark");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0.5,0.25,"));
    let total: usize = [Mark::O, Mark::X, Mark::Plus]
        .iter()
        .map(|m| pd.points_with(*m).len())
        .sum();
    assert_eq!(total, 4);
}
