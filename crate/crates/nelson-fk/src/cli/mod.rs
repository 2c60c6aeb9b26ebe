//! Experiment orchestration behind the `nelson-fk` binary.
//!
//! Every experiment first computes all of its artifacts in memory; files
//! are written only once the computation succeeded, followed by
//! `manifest.json`.

pub mod config;
pub mod verify;

pub use config::{parse_times, RunConfig};
pub use verify::{run_suite, Check, Suite, VerifyReport};

use crate::action::{action_convergence_stat, evaluate, ActionCsvRow, ConvergenceSpec, EvalOptions};
use crate::bounds::{
    bounds_table, pair_lemma_check, pekar_energy, BoundConstants, PairMap, PekarMesh, PekarTrial, SeedLaw,
};
use crate::error::{Error, Result};
use crate::fiber::{effective_mass, fiber_energy, write_fiber_csv, FiberSpec};
use crate::fieldstate::MomentumGrid;
use crate::kernel::KERNEL_CATALOG;
use crate::mc::{run_paths, McEstimate};
use crate::nonfock::tilde_ground_energy;
use crate::paths::sample_path;
use crate::semigroup::{ground_energy, time_indices, write_energy_csv, EnergyFit, EnergySpec};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Action,
    Energy,
    Fiber,
    Nonfock,
    Bounds,
    Verify,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Action => "action",
            Experiment::Energy => "energy",
            Experiment::Fiber => "fiber",
            Experiment::Nonfock => "nonfock",
            Experiment::Bounds => "bounds",
            Experiment::Verify => "verify",
        }
    }
}

/// One output file.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub body: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub experiment: Experiment,
    pub artifacts: Vec<Artifact>,
    /// Printed on stdout and stored in the manifest.
    pub summary: Value,
    /// Some verification check failed.
    pub failed: bool,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

fn json_artifact(name: &str, v: &impl Serialize) -> Result<Artifact> {
    let body = serde_json::to_vec_pretty(v).map_err(|e| Error::Config(format!("json: {e}")))?;
    Ok(Artifact { name: name.into(), body })
}

fn energy_spec(cfg: &RunConfig) -> Result<EnergySpec> {
    let e = &cfg.experiment;
    Ok(EnergySpec {
        params: cfg.model_params()?,
        potential: cfg.potential()?,
        box_half: e.box_half,
        t_grid: cfg.t_grid()?,
        dt: cfg.mc.dt,
        max_rel_err: e.max_rel_err,
        jackknife_blocks: e.jackknife_blocks,
    })
}

fn energy_summary(fit: &EnergyFit, cfg: &RunConfig) -> Value {
    json!({
        "representation": fit.representation,
        "energy": fit.energy,
        "energy_err": fit.energy_err,
        "window": [fit.window.0, fit.window.1],
        "convexity_ok": fit.convexity_ok,
        "slope": fit.slope,
        "slope_err": fit.slope_err,
        "residuals": fit.residuals,
        "params": cfg.model,
    })
}

fn energy_artifacts(fit: &EnergyFit, cfg: &RunConfig, stem: &str) -> Result<(Vec<Artifact>, Value)> {
    let mut body = Vec::new();
    write_energy_csv(&mut body, fit)?;
    let summary = energy_summary(fit, cfg);
    Ok((
        vec![Artifact { name: format!("{stem}.csv"), body }, json_artifact(&format!("{stem}.json"), &summary)?],
        summary,
    ))
}

/// Per-path action terms at every time of `mc.t`, plus an optional cutoff sweep.
fn run_action(cfg: &RunConfig) -> Result<RunOutput> {
    let params = cfg.model_params()?;
    let mc = cfg.mc_controls()?;
    let t_grid = cfg.t_grid()?;
    let idx = time_indices(&t_grid, cfg.mc.dt)?;
    let x = cfg.offsets()?;
    let grid = MomentumGrid::build(&params)?;
    let n = params.n_particles;
    let n_steps = *idx.last().unwrap();
    let every = idx.iter().fold(0, |a, b| gcd(a, *b));
    let direct = params.kappa.is_finite();
    let rows = run_paths(&mc, |s| {
        let path = sample_path(mc.seed, s, n_steps, cfg.mc.dt, n)?;
        let opts = EvalOptions { direct, snapshot_every: Some(every), ..Default::default() };
        let ev = evaluate(&grid, &path, &x, n_steps, &opts)?;
        let all = 0..grid.n_panels();
        Ok(idx
            .iter()
            .map(|&i| {
                let snap = ev.snapshots.iter().find(|sn| sn.t_index == i).expect("snapshot at every requested index");
                let tot = snap.total();
                ActionCsvRow {
                    sample_id: s as usize,
                    t: snap.t,
                    b: tot.b,
                    c_minus: tot.c_minus,
                    c_plus: tot.c_plus,
                    v: tot.v,
                    m: tot.m,
                    u_total: snap.u_total(all.clone()),
                    u_direct: direct.then(|| snap.u_direct(all.clone(), n)),
                    kappa: params.kappa.to_string(),
                    seed: mc.seed,
                    stream: s,
                }
            })
            .collect::<Vec<_>>())
    })?;
    let flat: Vec<ActionCsvRow> = rows.into_iter().flatten().collect();
    let mut body = Vec::new();
    crate::action::write_action_csv(&mut body, &flat)?;
    let mut artifacts = vec![Artifact { name: "action.csv".into(), body }];
    let per_time: Vec<Value> = t_grid
        .iter()
        .map(|&t| {
            let us: Vec<f64> = flat.iter().filter(|r| r.t == t || (r.t - t).abs() < 1e-9).map(|r| r.u_total).collect();
            let e = McEstimate::from_samples(&us);
            json!({"t": t, "u_mean": e.mean, "u_stderr": e.stderr})
        })
        .collect();
    let mut summary = json!({ "kappa": params.kappa.to_string(), "paths": mc.n_paths, "u_total": per_time });
    if !cfg.experiment.kappas.is_empty() {
        let spec = ConvergenceSpec {
            params: params.clone(),
            x: x.clone(),
            n_steps,
            dt: cfg.mc.dt,
            kappas: cfg.experiment.kappas.clone(),
            p: cfg.experiment.p,
            tail_tol: 0.5,
        };
        let table = action_convergence_stat(&spec, &mc)?;
        let mut wr = csv::Writer::from_writer(Vec::new());
        wr.write_record(["kappa", "moment", "stderr", "p", "t"]).map_err(csv_err)?;
        for r in &table.rows {
            wr.write_record([
                r.kappa.to_string(),
                r.estimate.to_string(),
                r.stderr.to_string(),
                spec.p.to_string(),
                (n_steps as f64 * cfg.mc.dt).to_string(),
            ])
            .map_err(csv_err)?;
        }
        let body = wr.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        artifacts.push(Artifact { name: "convergence.csv".into(), body });
        summary["convergence"] = json!({ "rows": table.rows, "slope": table.slope });
    }
    artifacts.push(json_artifact("action.json", &summary)?);
    Ok(RunOutput { experiment: Experiment::Action, artifacts, summary, failed: false })
}

fn run_energy(cfg: &RunConfig) -> Result<RunOutput> {
    let fit = ground_energy(&energy_spec(cfg)?, &cfg.mc_controls()?)?;
    let (artifacts, summary) = energy_artifacts(&fit, cfg, "energy")?;
    Ok(RunOutput { experiment: Experiment::Energy, artifacts, summary, failed: false })
}

fn run_nonfock(cfg: &RunConfig) -> Result<RunOutput> {
    let spec = energy_spec(cfg)?;
    let mc = cfg.mc_controls()?;
    let lambda = cfg.model.lambda;
    let mut spec_fock = spec.clone();
    spec_fock.params.lambda = 0.0;
    let tilde = tilde_ground_energy(&spec_fock, lambda, &mc)?;
    let (mut artifacts, mut summary) = energy_artifacts(&tilde, cfg, "energy_nonfock")?;
    summary["lambda"] = json!(lambda);
    if cfg.experiment.compare {
        let fock = ground_energy(&spec_fock, &mc)?;
        let (more, fs) = energy_artifacts(&fock, cfg, "energy_fock")?;
        artifacts.extend(more);
        let sigma = tilde.energy_err.hypot(fock.energy_err);
        summary["fock"] = fs;
        summary["difference"] = json!(tilde.energy - fock.energy);
        summary["combined_err"] = json!(sigma);
    }
    Ok(RunOutput { experiment: Experiment::Nonfock, artifacts, summary, failed: false })
}

fn run_fiber(cfg: &RunConfig) -> Result<RunOutput> {
    let e = &cfg.experiment;
    let mut params = cfg.model_params()?;
    if params.n_particles != 1 {
        return Err(Error::Config("model.N: the fiber decomposition is for one particle".into()));
    }
    params.lambda = 0.0;
    let spec = FiberSpec {
        params,
        t_grid: cfg.t_grid()?,
        dt: cfg.mc.dt,
        max_rel_err: e.max_rel_err,
        jackknife_blocks: e.jackknife_blocks,
    };
    let mc = cfg.mc_controls()?;
    let norm = e.xi_dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Config("experiment.xi_dir: must be nonzero".into()));
    }
    let fits =
        e.xi.iter().map(|&m| fiber_energy(e.xi_dir.map(|d| m * d / norm), &spec, &mc)).collect::<Result<Vec<_>>>()?;
    let mut body = Vec::new();
    write_fiber_csv(&mut body, &fits)?;
    let profile: Vec<([f64; 3], f64)> = fits.iter().map(|f| (f.xi, f.fit.energy)).collect();
    let mass = if profile.len() >= 2 { effective_mass(&profile).ok() } else { None };
    let summary = json!({
        "dispersion": fits.iter().map(|f| json!({
            "xi": f.xi, "energy": f.fit.energy, "energy_err": f.fit.energy_err,
            "window": [f.fit.window.0, f.fit.window.1], "im_z_score": f.im_z_score,
        })).collect::<Vec<_>>(),
        "e0": mass.map(|m| m.0),
        "effective_mass": mass.map(|m| m.1),
        "params": cfg.model,
    });
    let artifacts = vec![Artifact { name: "fiber.csv".into(), body }, json_artifact("fiber.json", &summary)?];
    Ok(RunOutput { experiment: Experiment::Fiber, artifacts, summary, failed: false })
}

fn run_bounds(cfg: &RunConfig) -> Result<RunOutput> {
    let m = &cfg.model;
    let k = BoundConstants::default();
    let t = *cfg.t_grid()?.last().unwrap();
    let table = bounds_table(m.eps, m.n, m.mu, t, cfg.experiment.p, &k)?;
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["quantity", "formula", "value", "regime", "source"]).map_err(csv_err)?;
    for r in &table {
        let v = r.value.map(|v| v.to_string()).unwrap_or_else(|| "n/a".into());
        wr.write_record([r.quantity.as_str(), r.formula.as_str(), v.as_str(), r.regime.as_str(), r.source.as_str()])
            .map_err(csv_err)?;
    }
    let body = wr.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    let mesh = PekarMesh::default();
    let pekar: Vec<Value> = [("gaussian", PekarTrial::Gaussian), ("exponential", PekarTrial::Hydrogenic)]
        .iter()
        .map(|(name, tr)| {
            pekar_energy(tr, &mesh).map(|v| json!({"trial": name, "energy": v.energy, "best_scale": v.best_scale}))
        })
        .collect::<Result<_>>()?;
    let law = SeedLaw::LogNormal { mu: 0.0, sigma: 0.5 };
    let pairs: Vec<Value> = (2..=4)
        .map(|n| {
            pair_lemma_check(n, law, PairMap::Mean, cfg.experiment.pair_trials, cfg.mc.seed).map(|r| {
                json!({"N": n, "lhs": r.lhs.mean, "lhs_stderr": r.lhs.stderr, "rhs": r.rhs, "violated": r.violated})
            })
        })
        .collect::<Result<_>>()?;
    let summary = json!({ "table": table, "pekar": pekar, "pair_lemma": pairs });
    let artifacts = vec![Artifact { name: "bounds.csv".into(), body }, json_artifact("bounds.json", &summary)?];
    Ok(RunOutput { experiment: Experiment::Bounds, artifacts, summary, failed: false })
}

/// CSV listing of the kernel catalog.
pub fn kernel_catalog_csv() -> Result<Vec<u8>> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["name", "formula", "rank", "uv_power", "ir_power"]).map_err(csv_err)?;
    for k in KERNEL_CATALOG {
        wr.write_record([k.name, k.formula, &k.rank.to_string(), &k.uv_power.to_string(), &k.ir_power.to_string()])
            .map_err(csv_err)?;
    }
    wr.into_inner().map_err(|e| Error::Config(e.to_string()))
}

fn run_verify(cfg: &RunConfig, suites: &[Suite]) -> Result<RunOutput> {
    if suites.is_empty() {
        return Err(Error::Config("no verification suite selected".into()));
    }
    let reports = suites.iter().map(|s| run_suite(*s, cfg)).collect::<Result<Vec<_>>>()?;
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["suite", "check", "residual", "tolerance", "passed", "seed"]).map_err(csv_err)?;
    for r in &reports {
        for c in &r.checks {
            wr.write_record([
                r.suite.name(),
                c.name.as_str(),
                &c.residual.to_string(),
                &c.tolerance.to_string(),
                &c.passed.to_string(),
                &c.seed.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    let body = wr.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    let failed = reports.iter().any(|r| !r.passed());
    let summary = json!({ "passed": !failed, "suites": reports });
    let artifacts = vec![Artifact { name: "verify.csv".into(), body }, json_artifact("verify.json", &summary)?];
    Ok(RunOutput { experiment: Experiment::Verify, artifacts, summary, failed })
}

/// Run one experiment entirely in memory.
pub fn run(experiment: Experiment, cfg: &RunConfig, suites: &[Suite]) -> Result<RunOutput> {
    match experiment {
        Experiment::Action => run_action(cfg),
        Experiment::Energy => run_energy(cfg),
        Experiment::Fiber => run_fiber(cfg),
        Experiment::Nonfock => run_nonfock(cfg),
        Experiment::Bounds => run_bounds(cfg),
        Experiment::Verify => run_verify(cfg, suites),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: Experiment,
    pub config_hash: String,
    pub seed: u64,
    pub wall_time_s: f64,
    pub finished_unix_s: u64,
    pub files: Vec<ManifestFile>,
    pub config: RunConfig,
    pub summary: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct ManifestFile {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Write the artifacts of `out` into `dir`, then `manifest.json`. On a write
/// failure the files already written are removed again.
pub fn persist(dir: &Path, cfg: &RunConfig, out: &RunOutput, started: Instant) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut files = Vec::new();
    for a in &out.artifacts {
        let p = dir.join(&a.name);
        if let Err(e) = std::fs::write(&p, &a.body) {
            for w in &written {
                let _ = std::fs::remove_file(w);
            }
            return Err(e.into());
        }
        written.push(p);
        files.push(ManifestFile {
            name: a.name.clone(),
            sha256: hex::encode(Sha256::digest(&a.body)),
            bytes: a.body.len(),
        });
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: out.experiment,
        config_hash: cfg.hash(),
        seed: cfg.mc.seed,
        wall_time_s: started.elapsed().as_secs_f64(),
        finished_unix_s: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        files,
        config: cfg.clone(),
        summary: out.summary.clone(),
    };
    let body = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Config(format!("json: {e}")))?;
    if let Err(e) = std::fs::write(dir.join("manifest.json"), body) {
        for w in &written {
            let _ = std::fs::remove_file(w);
        }
        return Err(e.into());
    }
    Ok(manifest)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut c = RunConfig::default();
        c.grid.radial = 12;
        c.grid.angular = "6".into();
        c.mc.paths = 6;
        c.mc.dt = 0.05;
        c.mc.t = "0.1,0.2".into();
        c
    }

    #[test]
    fn action_rows_for_every_path_and_time() {
        let out = run(Experiment::Action, &small(), &[]).unwrap();
        let csv = String::from_utf8(out.artifacts[0].body.clone()).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "sample_id,t,b,c_minus,c_plus,v,m,u_total,u_direct,kappa,seed,stream");
        assert_eq!(lines.count(), 12);
    }

    #[test]
    fn persist_writes_manifest_last() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small();
        let out = run(Experiment::Action, &cfg, &[]).unwrap();
        let m = persist(dir.path(), &cfg, &out, Instant::now()).unwrap();
        assert_eq!(m.files.len(), 2);
        assert!(dir.path().join("manifest.json").exists());
        assert_eq!(m.config_hash, cfg.hash());
    }

    #[test]
    fn empty_suite_selection_is_a_config_error() {
        assert!(matches!(run(Experiment::Verify, &small(), &[]), Err(Error::Config(_))));
    }

    #[test]
    fn kernel_catalog_lists_every_kernel() {
        let s = String::from_utf8(kernel_catalog_csv().unwrap()).unwrap();
        assert_eq!(s.lines().count(), KERNEL_CATALOG.len() + 1);
    }
}
