use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use levy_ml::fp_solver::{
    solve_with, ssp_rk3_step, Domain, ExteriorJumps, FpOperator, Grid, LocalDiffusion,
    NonlocalOperator, SolverConfig, Workspace, TEST_J,
};
use levy_ml::mlt::{argmax_density, classify_transition, Mark, StartPair, Verdict, DEFAULT_DWELL};
use levy_ml::model::{integrate, Band, Basin, Landscape, MlParams, State};
use levy_ml::montecarlo::{
    empirical_density, ensemble, total_variation, transition_fraction, EnsembleConfig, DEFAULT_DT,
};
use levy_ml::stable_noise::{sample_standard, stream, survival_slope};
use levy_ml::StableSpec;
use mlt_validation::{report, run_case, CaseRecord};
use ndarray::Array2;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use statrs::function::erf::erf;

const SIGMA: f64 = 0.25;
const ALPHAS: [f64; 7] = [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];
const SOFT_SIGMAS: [f64; 3] = [0.5, 0.75, 1.0];
const PAIRS: [StartPair; 2] = [StartPair::StableCycle, StartPair::UnstableCycle];

fn landscape() -> &'static Landscape {
    static L: OnceLock<Landscape> = OnceLock::new();
    L.get_or_init(|| Landscape::compute(&MlParams::default()).unwrap())
}

fn base(j: usize) -> SolverConfig {
    SolverConfig {
        j,
        ..SolverConfig::default()
    }
}

fn run_grid(alphas: &[f64], sigmas: &[f64], j: usize) -> Vec<CaseRecord> {
    let jobs: Vec<(f64, f64, State)> = alphas
        .iter()
        .flat_map(|&a| {
            sigmas.iter().flat_map(move |&s| {
                PAIRS.iter().flat_map(move |p| p.states().map(|st| (a, s, st)))
            })
        })
        .collect();
    let unstable = &landscape().unstable;
    jobs.par_iter()
        .map(|&(a, s, st)| {
            let cfg = SolverConfig {
                noise: StableSpec::new(a, s).unwrap(),
                ..base(j)
            };
            run_case(&cfg, st, unstable, DEFAULT_DWELL)
        })
        .collect()
}

/// The sigma = 0.25 sweep over every alpha and all four starts.
fn sweep() -> &'static [CaseRecord] {
    static S: OnceLock<Vec<CaseRecord>> = OnceLock::new();
    S.get_or_init(|| run_grid(&ALPHAS, &[SIGMA], TEST_J))
}

fn brownian_soft() -> &'static [CaseRecord] {
    static S: OnceLock<Vec<CaseRecord>> = OnceLock::new();
    S.get_or_init(|| run_grid(&[2.0], &SOFT_SIGMAS, TEST_J))
}

fn fine_run() -> &'static CaseRecord {
    static S: OnceLock<CaseRecord> = OnceLock::new();
    S.get_or_init(|| {
        let cfg = SolverConfig {
            noise: StableSpec::new(0.5, SIGMA).unwrap(),
            ..base(100)
        };
        run_case(&cfg, StartPair::StableCycle.states()[0], &landscape().unstable, DEFAULT_DWELL)
    })
}

fn case<'a>(cases: &'a [CaseRecord], alpha: f64, sigma: f64, start: State) -> &'a CaseRecord {
    cases
        .iter()
        .find(|c| c.alpha == alpha && c.sigma == sigma && c.start == start)
        .expect("case was run")
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::StayOscillate => "stay",
        Verdict::ToRest => "rest",
        Verdict::Undecided => "undecided",
    }
}

fn mark(cases: &[CaseRecord], alpha: f64, sigma: f64, pair: StartPair) -> Mark {
    let [a, b] = pair.states().map(|s| case(cases, alpha, sigma, s).verdict.verdict);
    Mark::from_verdicts(a, b)
}

/// Smallest alpha whose cell is `x`.
fn boundary(cases: &[CaseRecord], pair: StartPair) -> Option<f64> {
    ALPHAS.iter().copied().find(|&a| mark(cases, a, SIGMA, pair) == Mark::X)
}

fn marks_row(cases: &[CaseRecord], pair: StartPair) -> String {
    ALPHAS
        .iter()
        .map(|&a| format!("{a}:{}", mark(cases, a, SIGMA, pair)))
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn a1_bistable_landscape() {
    let clock = Instant::now();
    let land = Landscape::compute(&MlParams::default()).unwrap();
    let elapsed = clock.elapsed();
    let fp = &land.fixed_point;
    let sink = fp.is_spiral() && fp.eigenvalues.iter().all(|e| e.re < 0.0 && e.im != 0.0);
    let near = |cycle: &levy_ml::LimitCycle, s: State| {
        cycle.scaled_distance(s, Band { dv: 0.5, dw: 0.01 }) <= 1.0
    };
    let anchors = near(&land.stable, State::new(-32.7, 0.4578))
        && near(&land.stable, State::new(7.459, 0.5004))
        && near(&land.unstable, State::new(-22.73, 0.174))
        && near(&land.unstable, State::new(-31.27, 0.15));
    let pass = sink && anchors && elapsed < Duration::from_secs(30);
    report(
        "A1",
        "bistable landscape",
        pass,
        format!(
            "fixed point ({:.3}, {:.5}) eig {:.5}{:+.5}i, anchors on cycles: {anchors}, {:.2?}",
            fp.location.v, fp.location.w, fp.eigenvalues[0].re, fp.eigenvalues[0].im, elapsed
        ),
    );
    assert!(pass);
}

#[test]
fn a2_density_peak_tracks_stable_cycle() {
    let rec = fine_run();
    let grid = Grid::new(100).unwrap();
    let cell = Band {
        dv: grid.h() / rec.domain.v_factor(),
        dw: grid.h() / rec.domain.w_factor(),
    };
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for t in [1.0, 20.0, 70.0, 100.0] {
        let s = rec
            .trajectory
            .samples
            .iter()
            .find(|s| (s.t - t).abs() < 1e-9)
            .expect("snapshot at t");
        let d = landscape().stable.scaled_distance(s.location, cell);
        worst = worst.max(d);
        detail.push(format!("t={t}: {d:.2} cells"));
    }
    let pass = worst <= 2.0 && rec.elapsed < Duration::from_secs(600);
    report(
        "A2",
        "density peak on stable cycle (J=100)",
        pass,
        format!("{}, solve {:.0?}", detail.join(", "), rec.elapsed),
    );
    assert!(pass);
}

#[test]
fn a3_transition_verdicts() {
    let cases = sweep();
    let expect = [
        (0.5, StartPair::StableCycle, Verdict::StayOscillate),
        (0.5, StartPair::UnstableCycle, Verdict::StayOscillate),
        (1.5, StartPair::StableCycle, Verdict::ToRest),
        (1.5, StartPair::UnstableCycle, Verdict::ToRest),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (alpha, pair, want) in expect {
        for s in pair.states() {
            let got = case(cases, alpha, SIGMA, s).verdict.verdict;
            pass &= got == want;
            detail.push(format!("a={alpha} ({}, {}) {}", s.v, s.w, verdict_name(got)));
        }
    }
    report("A3", "transition verdicts at sigma=0.25", pass, detail.join("; "));
    assert!(pass);
}

#[test]
fn a4_transition_thresholds() {
    let cases = sweep();
    let stable = boundary(cases, StartPair::StableCycle);
    let border = boundary(cases, StartPair::UnstableCycle);
    let within = |b: Option<f64>, want: f64| b.is_some_and(|b| (b - want).abs() <= 0.25 + 1e-12);
    let pass = within(stable, 1.0) && within(border, 1.25);
    report(
        "A4",
        "alpha thresholds within one sweep step",
        pass,
        format!(
            "stable-cycle starts {stable:?} (want 1 +- 0.25) [{}]; borderline starts {border:?} (want 1.25 +- 0.25) [{}]",
            marks_row(cases, StartPair::StableCycle),
            marks_row(cases, StartPair::UnstableCycle)
        ),
    );
    assert!(pass);
}

#[test]
fn a5_brownian_noise_goes_to_rest() {
    let hard: Vec<Verdict> = PAIRS
        .iter()
        .flat_map(|p| p.states())
        .map(|s| case(sweep(), 2.0, SIGMA, s).verdict.verdict)
        .collect();
    let pass = hard.iter().all(|&v| v == Verdict::ToRest);
    let soft: Vec<String> = SOFT_SIGMAS
        .iter()
        .map(|&sg| {
            let vs: Vec<&str> = PAIRS
                .iter()
                .flat_map(|p| p.states())
                .map(|s| verdict_name(case(brownian_soft(), 2.0, sg, s).verdict.verdict))
                .collect();
            format!("sigma={sg}: {}", vs.join("/"))
        })
        .collect();
    report(
        "A5",
        "alpha=2 trajectories reach rest",
        pass,
        format!(
            "sigma=0.25: {} (gating); {} (reported only)",
            hard.iter().map(|&v| verdict_name(v)).collect::<Vec<_>>().join("/"),
            soft.join("; ")
        ),
    );
    assert!(pass);
}

fn bump(grid: Grid, width: f64) -> Array2<f64> {
    let norm = 1.0 / (width * (2.0 * PI).sqrt());
    Array2::from_shape_fn((1, grid.n()), |(_, c)| {
        let x = grid.coord(c);
        norm * (-0.5 * x * x / (width * width)).exp()
    })
}

fn evolve(op: &FpOperator, mut p: Array2<f64>, t: f64) -> Array2<f64> {
    let steps = (t / op.max_stable_dt().min(1e-3)).ceil() as usize;
    let dt = t / steps as f64;
    let mut ws = Workspace::new(p.dim());
    for _ in 0..steps {
        ssp_rk3_step(&mut p, dt, op, &mut ws);
    }
    p
}

fn fourier_solution(alpha: f64, s: f64, t: f64, width: f64, grid: Grid) -> Vec<f64> {
    let (half, m) = (64.0, 1usize << 18);
    let dx = 2.0 * half / m as f64;
    let norm = 1.0 / (width * (2.0 * PI).sqrt());
    let mut buf: Vec<Complex<f64>> = (0..m)
        .map(|k| {
            let x = -half + k as f64 * dx;
            Complex::new(norm * (-0.5 * x * x / (width * width)).exp(), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let kk = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
        let freq = PI * kk / half;
        *z *= (-t * s.powf(alpha) * freq.abs().powf(alpha)).exp() / m as f64;
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    (0..grid.n())
        .map(|c| buf[((grid.coord(c) + half) / dx).round() as usize].re)
        .collect()
}

#[test]
fn a6_one_dimensional_oracles() {
    let grid = Grid::new(200).unwrap();
    let domain = Domain::default();
    let (t, width) = (0.5, 0.08);
    let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * grid.h();
    let mut pass = true;
    let mut detail = Vec::new();
    for alpha in [0.5, 1.0, 1.5] {
        let clock = Instant::now();
        let s = (0.1f64 / t).powf(1.0 / alpha);
        let spec = StableSpec::new(alpha, s / domain.v_factor()).unwrap();
        let nl = NonlocalOperator::new(&spec, grid, &domain, ExteriorJumps::Absorbed).unwrap();
        let p = evolve(&FpOperator::levy(nl, None, grid), bump(grid, width), t);
        let err = l1(p.row(0).as_slice().unwrap(), &fourier_solution(alpha, s, t, width, grid));
        let dt = clock.elapsed();
        pass &= err < 2e-2 && dt < Duration::from_secs(120);
        detail.push(format!("alpha={alpha} L1={err:.2e}"));
    }
    let clock = Instant::now();
    let s = 0.2;
    let diff = LocalDiffusion::new(s / domain.v_factor(), grid, &domain);
    let p = evolve(&FpOperator::brownian(diff, None, grid), bump(grid, width), t);
    let var = width * width + s * s * t;
    let heat: Vec<f64> = (0..grid.n())
        .map(|c| (-0.5 * grid.coord(c).powi(2) / var).exp() / (2.0 * PI * var).sqrt())
        .collect();
    let err = l1(p.row(0).as_slice().unwrap(), &heat);
    pass &= err < 1e-2 && clock.elapsed() < Duration::from_secs(120);
    detail.push(format!("heat kernel L1={err:.2e}"));
    report("A6", "1-D operator oracles (J=200, t=0.5)", pass, detail.join(", "));
    assert!(pass);
}

struct McLevel {
    j: usize,
    n_paths: usize,
    tv: f64,
    fp_mass: f64,
    mc_mass: f64,
    masses_ok: bool,
    elapsed: Duration,
}

/// FP and histogram at t = 1 for alpha = 0.5, sigma = 0.25 on three
/// refinement levels; the last is the full-size comparison.
fn mc_levels() -> &'static [McLevel] {
    static S: OnceLock<Vec<McLevel>> = OnceLock::new();
    S.get_or_init(|| {
        let s0 = StartPair::StableCycle.states()[0];
        let spec = StableSpec::new(0.5, SIGMA).unwrap();
        [(25, 25_000), (50, 50_000), (100, 100_000)]
            .into_iter()
            .map(|(j, n_paths)| {
                let clock = Instant::now();
                let cfg = SolverConfig {
                    horizon: 1.0,
                    snapshot_every: 0.5,
                    noise: spec,
                    ..base(j)
                };
                let mut last = None;
                let mut masses = Vec::new();
                solve_with(&cfg, s0, |f| {
                    masses.push(f.mass());
                    last = Some(f.clone());
                })
                .unwrap();
                let fp = last.unwrap();
                let ens = ensemble(
                    s0,
                    &cfg.params,
                    &spec,
                    &cfg.domain,
                    EnsembleConfig {
                        n_paths,
                        dt: DEFAULT_DT,
                        t_end: 1.0,
                        seed: 0,
                    },
                    &[1.0],
                );
                let (hist, _) = empirical_density(&ens.states[0], fp.grid, cfg.domain, 1.0);
                McLevel {
                    j,
                    n_paths,
                    tv: total_variation(&fp, &hist),
                    fp_mass: fp.mass(),
                    mc_mass: hist.mass(),
                    masses_ok: masses.windows(2).all(|m| m[1] <= m[0]),
                    elapsed: clock.elapsed(),
                }
            })
            .collect()
    })
}

#[test]
fn a7_density_matches_monte_carlo() {
    let top = mc_levels().last().unwrap();
    let pass = top.tv < 0.1 && top.elapsed < Duration::from_secs(900);
    report(
        "A7",
        "FP vs Monte Carlo total variation",
        pass,
        format!(
            "TV={:.3} (limit 0.1) at J={}, {} paths; in-domain mass FP {:.4} vs MC {:.4}; {:.0?}",
            top.tv, top.j, top.n_paths, top.fp_mass, top.mc_mass, top.elapsed
        ),
    );
    assert!(pass, "total variation {}", top.tv);
}

fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn draws(alpha: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, 0);
    (0..n).map(|_| sample_standard(alpha, &mut rng)).collect()
}

#[test]
fn a8_property_suites() {
    let mut checks: Vec<(&str, bool, String)> = Vec::new();

    let records: Vec<&CaseRecord> = sweep()
        .iter()
        .chain(brownian_soft())
        .chain(std::iter::once(fine_run()))
        .collect();
    let bad: Vec<String> = records
        .iter()
        .filter(|r| !r.mass_nonincreasing())
        .map(|r| r.label())
        .collect();
    let mc_ok = mc_levels().iter().all(|l| l.masses_ok);
    checks.push((
        "mass",
        bad.is_empty() && mc_ok,
        format!("{} solves, {} violations", records.len() + mc_levels().len(), bad.len()),
    ));

    let n = 20_000;
    let crit = 1.628 / (n as f64).sqrt();
    let d2 = ks(draws(2.0, n, 1), |x| 0.5 * (1.0 + erf(x / 2.0)));
    let d1 = ks(draws(1.0, n, 2), |x| 0.5 + x.atan() / PI);
    checks.push(("ks", d2 < crit && d1 < crit, format!("D(alpha=2)={d2:.4} D(alpha=1)={d1:.4} < {crit:.4}")));

    let slopes: Vec<(f64, f64)> = [(0.5, 20.0, 2000.0), (1.0, 10.0, 500.0), (1.5, 5.0, 100.0)]
        .iter()
        .map(|&(a, lo, hi)| (a, survival_slope(&draws(a, 1_000_000, 3), lo, hi, 12)))
        .collect();
    checks.push((
        "tail slope",
        slopes.iter().all(|(a, s)| (s + a).abs() < 0.15),
        slopes.iter().map(|(a, s)| format!("{a}:{s:.3}")).collect::<Vec<_>>().join(" "),
    ));

    let p = MlParams::default();
    let s0 = State::new(-32.7, 0.4578);
    let reference = integrate(s0, 10.0, 1e-3, &p).unwrap().last();
    let err = |dt: f64| {
        let s = integrate(s0, 10.0, dt, &p).unwrap().last();
        (s.v - reference.v).abs() / 100.0 + (s.w - reference.w).abs()
    };
    let order = (err(0.1) / err(0.05)).log2();
    checks.push(("rk4", order >= 3.8, format!("order {order:.2}")));

    let mut cfg = mlt_tool::RunConfig::default();
    let mut round = true;
    for (k, (a, s)) in [(0.5, 0.25), (1.25, 0.75), (2.0, 1.0)].into_iter().enumerate() {
        cfg.noise.alpha = a;
        cfg.noise.sigma = s;
        cfg.seed = k as u64 * 7919;
        cfg.kind = Some(mlt_tool::RunKind::PhaseDiagram);
        round &= mlt_tool::parse_str(&cfg.to_toml()).ok().as_ref() == Some(&cfg);
    }
    checks.push(("config", round, "TOML round trip".into()));

    let ens = |seed| {
        ensemble(
            s0,
            &p,
            &StableSpec::new(0.8, SIGMA).unwrap(),
            &Domain::default(),
            EnsembleConfig {
                n_paths: 2000,
                dt: DEFAULT_DT,
                t_end: 1.0,
                seed,
            },
            &[0.5, 1.0],
        )
    };
    let bits = |e: &levy_ml::montecarlo::PathEnsemble| -> Vec<u64> {
        e.terminal.iter().flat_map(|s| [s.v.to_bits(), s.w.to_bits()]).collect()
    };
    let small = SolverConfig {
        horizon: 2.0,
        ..base(20)
    };
    let solve_bits = || {
        let mut out = Vec::new();
        solve_with(&small, s0, |f| out.extend(f.values.iter().map(|x| x.to_bits()))).unwrap();
        out
    };
    let repro = bits(&ens(11)) == bits(&ens(11)) && bits(&ens(11)) != bits(&ens(12)) && solve_bits() == solve_bits();
    checks.push(("reproducible", repro, "fixed seed".into()));

    let pass = checks.iter().all(|c| c.1);
    let detail = checks
        .iter()
        .map(|(name, ok, d)| format!("{name} {} ({d})", if *ok { "ok" } else { "FAILED" }))
        .collect::<Vec<_>>()
        .join("; ");
    report("A8", "property suites", pass, detail);
    assert!(pass);
}

#[test]
fn b1_threshold_cells_exact() {
    let cases = sweep();
    let stable = boundary(cases, StartPair::StableCycle);
    let border = boundary(cases, StartPair::UnstableCycle);
    let pass = stable == Some(1.0) && border == Some(1.25);
    report(
        "B1",
        "first transition cell exactly at 1 and 1.25",
        pass,
        format!("stable-cycle starts {stable:?}, borderline starts {border:?}"),
    );
    assert!(pass);
}

#[test]
fn b2_final_sample_agrees_with_verdict() {
    let unstable = &landscape().unstable;
    let mut bad = Vec::new();
    let mut checked = 0;
    for r in sweep().iter().chain(brownian_soft()).chain(std::iter::once(fine_run())) {
        let want = match r.verdict.verdict {
            Verdict::ToRest => Basin::Rest,
            Verdict::StayOscillate => Basin::Oscillate,
            Verdict::Undecided => continue,
        };
        checked += 1;
        match r.final_basin(unstable) {
            Some(b) if b != want => bad.push(format!(
                "{} {} ends {b:?} after {} switches",
                r.label(),
                verdict_name(r.verdict.verdict),
                r.trajectory.switches.len()
            )),
            _ => {}
        }
    }
    let pass = bad.is_empty();
    report(
        "B2",
        "final trajectory sample matches verdict",
        pass,
        format!("{} of {checked} disagree: {}", bad.len(), bad.join("; ")),
    );
    assert!(pass);
}

#[test]
fn b3_positivity_budget() {
    let worst = sweep()
        .iter()
        .chain(brownian_soft())
        .chain(std::iter::once(fine_run()))
        .map(|r| (r.max_negative_fraction, r.label()))
        .fold((0.0, String::new()), |a, b| if b.0 > a.0 { b } else { a });
    let pass = worst.0 < 1e-6;
    report(
        "B3",
        "clamped negative mass per step below 1e-6",
        pass,
        format!("largest {:.2e} at {}", worst.0, worst.1),
    );
    assert!(pass);
}

#[test]
fn b4_weak_consistency() {
    let levels = mc_levels();
    let pass = levels.windows(2).all(|w| w[1].tv < w[0].tv);
    report(
        "B4",
        "FP vs Monte Carlo distance shrinks under refinement",
        pass,
        levels
            .iter()
            .map(|l| format!("J={} n={}: {:.3}", l.j, l.n_paths, l.tv))
            .collect::<Vec<_>>()
            .join(", "),
    );
    assert!(pass);
}

#[test]
fn b5_verdicts_are_deterministic() {
    let unstable = &landscape().unstable;
    let cached = case(sweep(), 1.25, SIGMA, StartPair::UnstableCycle.states()[0]);
    let again = classify_transition(&cached.trajectory, unstable, DEFAULT_DWELL);
    let cfg = SolverConfig {
        noise: StableSpec::new(1.25, SIGMA).unwrap(),
        ..base(TEST_J)
    };
    let rerun = run_case(&cfg, cached.start, unstable, DEFAULT_DWELL);
    let pass = again == cached.verdict && rerun.trajectory == cached.trajectory && rerun.verdict == cached.verdict;
    report(
        "B5",
        "verdicts are deterministic",
        pass,
        format!("{} -> {}", cached.label(), verdict_name(cached.verdict.verdict)),
    );
    assert!(pass);
}

#[test]
fn b6_trajectory_jumps_are_logged() {
    let records: Vec<&CaseRecord> = sweep().iter().chain(brownian_soft()).collect();
    let unlogged: usize = records.iter().map(|r| r.unlogged_jumps()).sum();
    let logged: usize = records.iter().map(|r| r.trajectory.switches.len()).sum();
    let inside = records.iter().all(|r| {
        r.trajectory.samples.iter().all(|s| r.domain.contains(s.location) && s.pmax > 0.0)
    });
    let pass = unlogged == 0 && inside;
    report(
        "B6",
        "trajectory continuity apart from logged switches",
        pass,
        format!("{logged} logged switches, {unlogged} unlogged jumps, samples inside domain: {inside}"),
    );
    assert!(pass);
}

#[test]
fn b7_monte_carlo_transition_ordering() {
    let p = MlParams::default();
    let s0 = StartPair::StableCycle.states()[0];
    let frac = |alpha: f64| {
        let ens = ensemble(
            s0,
            &p,
            &StableSpec::new(alpha, SIGMA).unwrap(),
            &Domain::default(),
            EnsembleConfig {
                n_paths: 2000,
                dt: DEFAULT_DT,
                t_end: 100.0,
                seed: 0,
            },
            &[],
        );
        transition_fraction(&ens, &landscape().unstable)
    };
    let (lo, hi) = (frac(0.5), frac(1.5));
    let pass = hi > lo;
    report(
        "B7",
        "Monte Carlo rest fraction grows with alpha",
        pass,
        format!("alpha=0.5: {lo:.4}, alpha=1.5: {hi:.4}"),
    );
    assert!(pass);
}

#[test]
fn b8_weak_noise_peak_follows_orbit() {
    let s0 = StartPair::StableCycle.states()[0];
    let cfg = SolverConfig {
        horizon: 20.0,
        snapshot_every: 1.0,
        noise: StableSpec::new(0.5, 1e-4).unwrap(),
        ..base(TEST_J)
    };
    let h = Grid::new(cfg.j).unwrap().h();
    let mut worst = 0.0f64;
    solve_with(&cfg, s0, |f| {
        let peak = argmax_density(f).unwrap().location;
        let exact = if f.time > 0.0 {
            integrate(s0, f.time, 0.01, &cfg.params).unwrap().last()
        } else {
            s0
        };
        let (px, py) = cfg.domain.to_rescaled(peak);
        let (ex, ey) = cfg.domain.to_rescaled(exact);
        worst = worst.max((px - ex).abs().max((py - ey).abs()) / h);
    })
    .unwrap();
    let pass = worst <= 3.0;
    report("B8", "weak-noise peak follows the deterministic orbit", pass, format!("{worst:.2} cells"));
    assert!(pass);
}
