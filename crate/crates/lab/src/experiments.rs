//! The five experiments. Each writes CSV files through an [`OutputDir`] and fills in
//! the manifest; [`run`] writes the manifest last, also on failure.

use std::path::Path;
use std::time::Instant;

use ilwlab_core::evolve::{solve, solve_partial, EvolutionProblem, Trajectory};
use ilwlab_core::integrable::{
    alpha_drift, drift_functional, hs_norm_sq, tail_norm, weighted_functional, SMALLNESS_GATE,
};
use ilwlab_core::normalform::{
    enumerate_trees, measure_bounds, reconstruct, verify_step1, BoundsReport,
};
use ilwlab_core::spectral::{Side, SpectralField};
use ilwlab_core::symbols::{h_delta, lambda_delta, resonance_gap, resonance_kdv, DispersionSymbol};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Experiment, RunConfig, DEFAULT_SEED};
use crate::manifest::{num, OutputDir, RunManifest, RunStatus};
use crate::LabError;

/// Most halvings `alpha-conserve` applies to meet the smallness gate.
pub const MAX_HALVINGS: usize = 10;

struct Run<'a> {
    cfg: &'a RunConfig,
    out: OutputDir,
    manifest: RunManifest,
    /// Failures that did not stop the run.
    failures: Vec<String>,
}

impl Run<'_> {
    fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.manifest.warnings.push(msg);
    }

    fn time(&mut self, key: String, seconds: f64) {
        self.manifest.timings.insert(key, seconds);
    }
}

/// Runs `cfg` into `out_dir`, always writing the manifest.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<(RunManifest, Option<LabError>), LabError> {
    cfg.validate()?;
    let out = OutputDir::create(out_dir)?;
    let mut r = Run {
        cfg,
        out,
        manifest: RunManifest::new(cfg),
        failures: Vec::new(),
    };
    let t0 = Instant::now();
    let result = match cfg.experiment {
        Experiment::ConvergeShallow => converge_shallow(&mut r),
        Experiment::TailTrack => tail_track(&mut r),
        Experiment::AlphaConserve => alpha_conserve(&mut r),
        Experiment::NfVerify => nf_verify(&mut r),
        Experiment::SymbolTable => symbol_table(&mut r),
    };
    let err = match result {
        Err(e) => Some(e),
        Ok(()) if !r.failures.is_empty() => Some(LabError::Numerical(r.failures.join("; "))),
        Ok(()) => None,
    };
    r.time("total".into(), t0.elapsed().as_secs_f64());
    r.manifest.status = match &err {
        None => RunStatus::Ok,
        Some(LabError::Config(_)) => RunStatus::ConfigError,
        Some(LabError::Numerical(_)) => RunStatus::NumericalFailure,
        Some(LabError::Io(_)) => RunStatus::IoError,
    };
    r.manifest.error = err.as_ref().map(|e| e.to_string());
    r.manifest.files = r.out.files().to_vec();
    r.manifest.finished_at = chrono::Utc::now().to_rfc3339();
    r.manifest.write(r.out.path())?;
    Ok((r.manifest, err))
}

fn trajectory_of(
    symbol: DispersionSymbol,
    initial: SpectralField,
    cfg: &RunConfig,
) -> Result<(Trajectory, Option<String>), LabError> {
    let p = EvolutionProblem::new(symbol, initial, cfg.horizon, cfg.dt, cfg.record_every)?;
    match solve_partial(&p) {
        Ok(t) => Ok((t, None)),
        Err(f) => Ok((f.partial, Some(f.error.to_string()))),
    }
}

fn sort_by_delta<T>(rows: &mut [(f64, T)]) {
    // Same order as the (strictly decreasing) configured grid.
    rows.sort_by(|a, b| b.0.total_cmp(&a.0));
}

fn default_split(cfg: &RunConfig) -> Result<f64, LabError> {
    Ok(cfg.split_n.unwrap_or((cfg.grid()?.dealias_cut() / 2) as f64))
}

struct DeltaRun {
    traj: Trajectory,
    failure: Option<String>,
    seconds: f64,
}

fn scaled_runs(cfg: &RunConfig, f: &SpectralField) -> Result<Vec<(f64, DeltaRun)>, LabError> {
    let unit = if f.l2_norm() > 0.0 { f.scale(1.0 / f.l2_norm()) } else { f.clone() };
    let mut runs = cfg
        .delta_grid
        .par_iter()
        .map(|&d| -> Result<(f64, DeltaRun), LabError> {
            let t0 = Instant::now();
            let init = match cfg.perturbation {
                Some(c) => f.axpy(c * d, &unit),
                None => f.clone(),
            };
            let (traj, failure) = trajectory_of(DispersionSymbol::scaled_ilw(d)?, init, cfg)?;
            Ok((
                d,
                DeltaRun {
                    traj,
                    failure,
                    seconds: t0.elapsed().as_secs_f64(),
                },
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;
    sort_by_delta(&mut runs);
    Ok(runs)
}

fn record_run(r: &mut Run, label: String, run: &DeltaRun) {
    r.time(format!("solve {label}"), run.seconds);
    r.manifest.drifts.insert(label.clone(), run.traj.relative_l2_drift());
    for w in &run.traj.warnings {
        r.warn(format!("{label}: {w}"));
    }
    if let Some(e) = &run.failure {
        r.failures.push(format!("{label}: {e}"));
    }
}

fn converge_shallow(r: &mut Run) -> Result<(), LabError> {
    let cfg = r.cfg;
    let grid = cfg.grid()?;
    let f = cfg.initial_data.build(grid)?;
    let split = default_split(cfg)?;

    let t0 = Instant::now();
    let kdv_symbol = DispersionSymbol::kdv();
    let (kdv, kdv_fail) = trajectory_of(kdv_symbol, f.clone(), cfg)?;
    let kdv_run = DeltaRun {
        traj: kdv,
        failure: kdv_fail,
        seconds: t0.elapsed().as_secs_f64(),
    };
    record_run(r, "kdv".into(), &kdv_run);
    if let Some(e) = &kdv_run.failure {
        return Err(LabError::Numerical(format!("reference KdV solve failed: {e}")));
    }
    let kdv = kdv_run.traj;

    let runs = scaled_runs(cfg, &f)?;
    let mut rows = Vec::new();
    let mut series = Vec::new();
    let mut errs = Vec::new();
    for (d, run) in &runs {
        record_run(r, format!("scaled-ilw delta={d}"), run);
        let v = &run.traj;
        let mut err: f64 = 0.0;
        for k in 0..v.len() {
            let diff = kdv.states[k].sub(&v.states[k]);
            err = err.max(diff.l2_norm());
            let low = kdv.interaction(k).sub(&v.interaction(k)).project(split, Side::Low).l2_norm();
            let high = diff.project(split, Side::High).l2_norm();
            series.push(vec![num(*d), num(v.times[k]), num(low), num(high)]);
        }
        let status = if run.failure.is_some() { "blowup" } else { "ok" };
        rows.push(vec![
            num(*d),
            num(err),
            num(kdv.states[0].sub(&v.states[0]).l2_norm()),
            num(v.relative_l2_drift()),
            status.to_string(),
        ]);
        errs.push((*d, err));
    }
    r.out
        .write_csv("converge.csv", &["delta", "err", "initialDiff", "maxDrift", "status"], &rows)?;
    r.out.write_csv("split.csv", &["delta", "t", "lowInteraction", "highProfile"], &series)?;

    let slopes: Vec<f64> = errs
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .collect();
    r.manifest.notes.insert(
        "hypothesis".into(),
        json!("err(delta) = O(delta^2) for smooth data, from h <= delta^2 xi^2; recorded, not asserted"),
    );
    r.manifest.notes.insert("observedSlopes".into(), json!(slopes));
    r.manifest.notes.insert("splitN".into(), json!(split));
    Ok(())
}

fn tail_track(r: &mut Run) -> Result<(), LabError> {
    let cfg = r.cfg;
    let grid = cfg.grid()?;
    let f = cfg.initial_data.build(grid)?;
    let probe = cfg.probe.as_ref().expect("validated").probe()?;
    let runs = scaled_runs(cfg, &f)?;
    let mut rows = Vec::new();
    for (d, run) in &runs {
        record_run(r, format!("scaled-ilw delta={d}"), run);
        let v = &run.traj;
        let drift = drift_functional(v, &probe)?;
        for k in 0..v.len() {
            rows.push(vec![
                num(*d),
                num(v.times[k]),
                num(tail_norm(&v.states[k], probe.n())),
                num(weighted_functional(&v.states[k], &probe)),
                num(drift[k]),
            ]);
        }
    }
    r.out.write_csv("tail.csv", &["delta", "t", "tail", "W", "A_delta"], &rows)
}

fn alpha_conserve(r: &mut Run) -> Result<(), LabError> {
    let cfg = r.cfg;
    let grid = cfg.grid()?;
    let kappa = cfg.kappa.expect("validated");
    let base = cfg.initial_data.build(grid)?;
    let mut rows = Vec::new();
    let mut scalings = serde_json::Map::new();
    for &d in &cfg.delta_grid {
        let mut scale = 1.0;
        let mut halvings = 0;
        while hs_norm_sq(&base.scale(scale), kappa, d)? >= SMALLNESS_GATE {
            if halvings == MAX_HALVINGS {
                return Err(LabError::Config(format!(
                    "initial data does not meet the smallness gate at kappa={kappa}, delta={d} after {MAX_HALVINGS} halvings"
                )));
            }
            scale *= 0.5;
            halvings += 1;
        }
        scalings.insert(format!("{d}"), json!({ "scale": scale, "halvings": halvings }));
        let t0 = Instant::now();
        let (traj, failure) = trajectory_of(DispersionSymbol::ilw(d)?, base.scale(scale), cfg)?;
        let run = DeltaRun {
            traj,
            failure,
            seconds: t0.elapsed().as_secs_f64(),
        };
        record_run(r, format!("ilw delta={d}"), &run);
        let t1 = Instant::now();
        let series = alpha_drift(&run.traj, kappa)?;
        r.time(format!("alpha delta={d}"), t1.elapsed().as_secs_f64());
        r.manifest
            .drifts
            .insert(format!("alpha delta={d}"), series.max_relative_drift());
        for &k in &series.flagged {
            r.warn(format!("delta={d}: smallness gate violated at t={}", series.times[k]));
        }
        for k in 0..series.times.len() {
            rows.push(vec![
                num(d),
                num(series.times[k]),
                num(series.alpha[k]),
                num(series.drift[k]),
                num(series.hs_norm_sq[k]),
            ]);
        }
    }
    r.manifest.notes.insert("amplitudeScaling".into(), json!(scalings));
    r.manifest.notes.insert("kappa".into(), json!(kappa));
    r.out
        .write_csv("alpha.csv", &["delta", "t", "alpha", "drift", "hsNormSq"], &rows)
}

fn nf_verify(r: &mut Run) -> Result<(), LabError> {
    let cfg = r.cfg;
    let grid = cfg.grid()?;
    let nf = cfg.nf.as_ref().expect("validated");
    let params = nf.params(grid)?;
    let f = cfg.initial_data.build(grid)?;

    let t0 = Instant::now();
    let p = EvolutionProblem::new(DispersionSymbol::kdv(), f, cfg.horizon, cfg.dt, cfg.record_every)?;
    let traj = solve(&p)?;
    r.time("solve kdv".into(), t0.elapsed().as_secs_f64());
    r.manifest.drifts.insert("kdv".into(), traj.relative_l2_drift());

    let step1_times = if nf.step1_times.is_empty() {
        vec![traj.times[traj.len() / 2]]
    } else {
        nf.step1_times.clone()
    };
    let t1 = Instant::now();
    let mut rows = Vec::new();
    for &t in &step1_times {
        match verify_step1(&traj, &params, t) {
            Ok(res) => rows.push(vec![num(t), num(res)]),
            Err(e) => r.warn(format!("verify_step1 at t={t}: {e}")),
        }
    }
    r.time("verify_step1".into(), t1.elapsed().as_secs_f64());
    r.out.write_csv("step1.csv", &["t", "residual"], &rows)?;

    let recon_times = if nf.reconstruct_times.is_empty() {
        vec![0.0, *traj.times.last().unwrap()]
    } else {
        nf.reconstruct_times.clone()
    };
    let t2 = Instant::now();
    let mut rows = Vec::new();
    for &t in &recon_times {
        for j in 1..=2usize {
            match reconstruct(&traj, j, &params, t) {
                Ok(rec) => rows.push(vec![
                    num(t),
                    j.to_string(),
                    num(rec.residual),
                    num(rec.quadrature_estimate),
                    num(rec.solver_estimate),
                ]),
                Err(e) => r.warn(format!("reconstruct J={j} at t={t}: {e}")),
            }
        }
    }
    r.time("reconstruct".into(), t2.elapsed().as_secs_f64());
    r.out.write_csv(
        "reconstruct.csv",
        &["t", "J", "residual", "quadratureEstimate", "solverEstimate"],
        &rows,
    )?;

    let t3 = Instant::now();
    let seed = cfg.effective_seed().unwrap_or(DEFAULT_SEED);
    let ks = nf.bound_k.clone().unwrap_or_else(|| vec![params.k]);
    let mut rows = Vec::new();
    for j in 1..=nf.j_max {
        let trees = enumerate_trees(j)?.len();
        for &k in &ks {
            let pk = match ilwlab_core::normalform::NfParams::new(k, params.lattice_cut)
                .and_then(|p| p.with_max_gen(nf.j_max))
            {
                Ok(p) => p,
                Err(e) => {
                    r.warn(format!("bounds K={k}: {e}"));
                    continue;
                }
            };
            match measure_bounds(j, &pk, nf.bound_samples, seed) {
                Ok(rep) => rows.extend(bound_rows(&rep, trees)),
                Err(e) => r.warn(format!("measure_bounds j={j} K={k}: {e}")),
            }
        }
    }
    r.time("measure_bounds".into(), t3.elapsed().as_secs_f64());
    r.out.write_csv(
        "bounds.csv",
        &["j", "K", "operator", "ratio", "samples", "treeCount"],
        &rows,
    )?;
    r.manifest.notes.insert("latticeCut".into(), json!(params.lattice_cut));
    r.manifest.notes.insert("theta".into(), json!(ilwlab_core::normalform::REPORT_THETA));
    Ok(())
}

fn bound_rows(rep: &BoundsReport, trees: usize) -> Vec<Vec<String>> {
    [("N0", rep.n0_ratio), ("N1", rep.n1_ratio), ("N2tilde", rep.n2_tilde_sup)]
        .iter()
        .map(|(name, v)| {
            vec![
                rep.j.to_string(),
                num(rep.k),
                name.to_string(),
                num(*v),
                rep.samples.to_string(),
                trees.to_string(),
            ]
        })
        .collect()
}

fn symbol_table(r: &mut Run) -> Result<(), LabError> {
    let cfg = r.cfg;
    let n = cfg.split_n.unwrap_or((cfg.modes / 2) as f64).floor() as i64;
    let bo = DispersionSymbol::benjamin_ono();
    let kdv = DispersionSymbol::kdv();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &d in &cfg.delta_grid {
        let scaled = DispersionSymbol::scaled_ilw(d)?;
        let ilw = DispersionSymbol::ilw(d)?;
        for xi in 0..=n {
            let x = xi as f64;
            rows.push(vec![
                xi.to_string(),
                num(d),
                num(lambda_delta(x, d)?),
                num(h_delta(x, d)?),
                num(x * x),
                num(kdv.phase(x)),
                num(scaled.phase(x)),
                num(ilw.phase(x)),
                num(bo.phase(x)),
            ]);
        }
        let mut gap: f64 = 0.0;
        let mut kdv_max: f64 = 0.0;
        for a in -n..=n {
            for b in (-n).max(-n - a)..=n.min(n - a) {
                let (xi, x1, x2) = ((a + b) as f64, a as f64, b as f64);
                gap = gap.max(resonance_gap(xi, x1, x2, d)?.abs());
                kdv_max = kdv_max.max(resonance_kdv(xi, x1, x2).abs());
            }
        }
        summary.push(vec![num(d), num(gap), num(kdv_max)]);
    }
    r.out.write_csv(
        "symbols.csv",
        &["xi", "delta", "lambda", "h", "xiSquared", "omegaKdv", "omegaScaledIlw", "omegaIlw", "omegaBo"],
        &rows,
    )?;
    r.out.write_csv("resonance.csv", &["delta", "maxGap", "maxKdv"], &summary)
}
