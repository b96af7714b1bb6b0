//! Run kinds.

use std::collections::BTreeMap;

use levy_ml::fp_solver::{solve_with, write_binary, write_csv, DensityField, Grid, SolverConfig};
use levy_ml::mlt::{phase_diagram, trajectory_and_verdict, StartPair, Verdict};
use levy_ml::model::Landscape;
use levy_ml::montecarlo::{empirical_density, ensemble, total_variation, EnsembleConfig};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::{RunConfig, RunKind};
use crate::output::{RunManifest, RunWriter};
use crate::plot::emit_plotdata;
use crate::CliError;

/// Files produced by a kind, before they reach the writer.
#[derive(Debug, Default)]
struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
    warnings: Vec<String>,
}

impl Artifacts {
    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    /// Adds `name` and its plot data.
    fn add_csv(&mut self, name: &str, text: String) -> Result<(), CliError> {
        for (n, t) in emit_plotdata(name, &text)? {
            self.add(n, t);
        }
        self.add(name, text);
        Ok(())
    }
}

fn time_label(t: f64) -> String {
    format!("{t}").replace('-', "m")
}

fn pair_label(p: StartPair) -> &'static str {
    match p {
        StartPair::StableCycle => "stable_cycle",
        StartPair::UnstableCycle => "unstable_cycle",
    }
}

fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::StayOscillate => "stay_oscillate",
        Verdict::ToRest => "to_rest",
        Verdict::Undecided => "undecided",
    }
}

fn phase_portrait(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let land = Landscape::compute(&cfg.model)?;
    let mut out = Artifacts::default();
    out.add_csv("stable_cycle.csv", land.stable.to_csv())?;
    out.add_csv("unstable_cycle.csv", land.unstable.to_csv())?;
    let fp = &land.fixed_point;
    let [e1, e2] = fp.eigenvalues;
    out.add(
        "fixed_point.csv",
        format!(
            "v,w,eig1_re,eig1_im,eig2_re,eig2_im,stability\n{},{},{},{},{},{},{:?}\n",
            fp.location.v, fp.location.w, e1.re, e1.im, e2.re, e2.im, fp.stability
        ),
    );
    out.add(
        "cycles.csv",
        format!(
            "cycle,period,vertices\nstable,{},{}\nunstable,{},{}\n",
            land.stable.period,
            land.stable.polyline.len(),
            land.unstable.period,
            land.unstable.polyline.len()
        ),
    );
    Ok(out)
}

fn density(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let mut times = cfg.mlt.density_times.clone();
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup();
    let solver = cfg.solver_config();
    let mut wanted: BTreeMap<usize, f64> = BTreeMap::new();
    for &t in &times {
        // first snapshot at or after t
        let k = (t / solver.snapshot_every - 1e-9).ceil().max(0.0) as usize;
        wanted.insert(k, t);
    }
    let last = *wanted.keys().last().unwrap_or(&0);
    let horizon = (last as f64 * solver.snapshot_every).max(solver.snapshot_every);
    let run = SolverConfig { horizon, ..solver };
    let mut captured: Vec<(f64, DensityField)> = Vec::new();
    let mut index = 0usize;
    let summary = solve_with(&run, cfg.start_state(), |f| {
        if let Some(&t) = wanted.get(&index) {
            captured.push((t, f.clone()));
        }
        index += 1;
    })?;
    info!(
        "density solve: dt = {:.3e}, {} steps, final mass {:.4e}",
        summary.dt, summary.steps, summary.final_mass
    );
    let mut out = Artifacts::default();
    let noise = cfg.noise_spec();
    for (t, field) in captured {
        let stem = format!("density_t{}", time_label(t));
        let mut csv = Vec::new();
        write_csv(&field, &mut csv).map_err(|e| CliError::Artifact(e.to_string()))?;
        out.add_csv(&format!("{stem}.csv"), String::from_utf8(csv).expect("ascii"))?;
        let mut bin = Vec::new();
        write_binary(&field, &noise, &mut bin).map_err(|e| CliError::Artifact(e.to_string()))?;
        out.add(format!("{stem}.bin"), bin);
    }
    Ok(out)
}

fn mlt(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let land = Landscape::compute(&cfg.model)?;
    let solver = cfg.solver_config();
    let jobs: Vec<(StartPair, usize)> = cfg
        .mlt
        .starts
        .pairs()
        .into_iter()
        .flat_map(|p| [(p, 0), (p, 1)])
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(pair, k)| trajectory_and_verdict(&solver, pair.states()[k], &land.unstable, cfg.mlt.dwell))
        .collect();
    let mut out = Artifacts::default();
    let mut table = String::from("starts,index,v0,w0,verdict,decision_time,switches\n");
    for (&(pair, k), res) in jobs.iter().zip(results) {
        let (traj, verdict) = res?;
        let s0 = pair.states()[k];
        out.add_csv(&format!("mlt_{}_{k}.csv", pair_label(pair)), traj.to_csv())?;
        table.push_str(&format!(
            "{},{k},{},{},{},{},{}\n",
            pair_label(pair),
            s0.v,
            s0.w,
            verdict_label(verdict.verdict),
            verdict.decision_time.map(|t| t.to_string()).unwrap_or_default(),
            traj.switches.len()
        ));
        if !traj.switches.is_empty() {
            out.warnings.push(format!(
                "{} start {k}: {} multimodal switches",
                pair_label(pair),
                traj.switches.len()
            ));
        }
    }
    out.add("verdicts.csv", table);
    Ok(out)
}

fn phase_diagram_run(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let land = Landscape::compute(&cfg.model)?;
    let solver = cfg.solver_config();
    let mut out = Artifacts::default();
    for pair in cfg.mlt.starts.pairs() {
        let pd = phase_diagram(
            &solver,
            &land.unstable,
            &cfg.noise.alphas,
            &cfg.noise.sigmas,
            pair,
            cfg.mlt.dwell,
        );
        for (a, row) in pd.alphas.iter().zip(&pd.cells) {
            for (s, cell) in pd.sigmas.iter().zip(row) {
                if let levy_ml::mlt::CellOutcome::Failed(e) = cell {
                    out.warnings
                        .push(format!("{} alpha={a} sigma={s}: {e}", pair_label(pair)));
                }
            }
        }
        out.add_csv(&format!("phase_diagram_{}.csv", pair_label(pair)), pd.to_csv())?;
    }
    Ok(out)
}

fn mc_check(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let mc = &cfg.montecarlo;
    let solver = SolverConfig {
        horizon: mc.t,
        snapshot_every: mc.t,
        ..cfg.solver_config()
    };
    let s0 = cfg.start_state();
    let mut fp = None;
    solve_with(&solver, s0, |f| fp = Some(f.clone()))?;
    let fp = fp.expect("solve emits snapshots");
    let ens = ensemble(
        s0,
        &cfg.model,
        &cfg.noise_spec(),
        &cfg.domain,
        EnsembleConfig {
            n_paths: mc.n_paths,
            dt: mc.dt,
            t_end: mc.t,
            seed: cfg.seed,
        },
        &[mc.t],
    );
    let grid = Grid::new(cfg.solver.j)?;
    let (hist, outside) = empirical_density(&ens.states[0], grid, cfg.domain, mc.t);
    let tv = total_variation(&fp, &hist);
    info!("mc-check: total variation {tv:.4}");
    let mut out = Artifacts::default();
    out.add(
        "mc_check.csv",
        format!(
            "alpha,sigma,t,j,n_paths,dt,seed,total_variation,fp_mass,mc_mass,outside_fraction,escaped_fraction\n{},{},{},{},{},{},{},{},{},{},{},{}\n",
            cfg.noise.alpha,
            cfg.noise.sigma,
            mc.t,
            cfg.solver.j,
            mc.n_paths,
            mc.dt,
            cfg.seed,
            tv,
            fp.mass(),
            hist.mass(),
            outside,
            ens.escaped_fraction()
        ),
    );
    for (name, field) in [("fp_density.csv", &fp), ("mc_density.csv", &hist)] {
        let mut csv = Vec::new();
        write_csv(field, &mut csv).map_err(|e| CliError::Artifact(e.to_string()))?;
        out.add_csv(name, String::from_utf8(csv).expect("ascii"))?;
    }
    if mc.dump_paths {
        out.add("mc_terminal_states.csv", ens.terminal_csv());
    }
    Ok(out)
}

/// Executes `kind`, writing every artifact and the manifest into the
/// configured output directory.
pub fn run(kind: RunKind, cfg: &RunConfig) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let started = now();
    info!("{kind}: writing to {}", cfg.output_dir.display());
    let artifacts = match kind {
        RunKind::PhasePortrait => phase_portrait(cfg)?,
        RunKind::Density => density(cfg)?,
        RunKind::Mlt => mlt(cfg)?,
        RunKind::PhaseDiagram => phase_diagram_run(cfg)?,
        RunKind::McCheck => mc_check(cfg)?,
    };
    for w in &artifacts.warnings {
        warn!("{w}");
    }
    let mut writer = RunWriter::create(&cfg.output_dir)?;
    let mut echo = cfg.clone();
    echo.kind = Some(kind);
    writer.write("config.toml", echo.to_toml().as_bytes())?;
    for (name, bytes) in &artifacts.files {
        writer.write(name, bytes)?;
    }
    writer.finish(RunManifest {
        kind: kind.name().to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        started,
        finished: now(),
        warnings: artifacts.warnings,
        config: echo.to_toml(),
        artifacts: BTreeMap::new(),
    })
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
