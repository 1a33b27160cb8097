//! Simulation driver, probe records, snapshots, convergence studies.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::so3::{Mat3, Vec3};
use crate::solver::{l2_error, Simulation, StepReport};

use super::build::{build_scenario, Scenario};
use super::config::{Dim, ScenarioConfig};

/// One accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRecord {
    pub time: f64,
    pub temperature: f64,
    pub load_factor: f64,
    pub iterations: usize,
    pub substeps: usize,
    pub probes: Vec<Vec3>,
    pub metrics: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Output directory; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    /// Replaces the configured snapshot times.
    pub snapshot_times: Option<Vec<f64>>,
    /// Stop after this time instead of the configured total.
    pub stop_time: Option<f64>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub probe_names: Vec<String>,
    pub metric_names: Vec<String>,
    pub records: Vec<ProbeRecord>,
    pub snapshots: Vec<(f64, PathBuf)>,
    /// Solver failure that ended the run early.
    pub failure: Option<Error>,
    pub simulation: Simulation,
    pub scenario: Scenario,
}

impl RunOutcome {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    pub fn metric(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.metric_names.iter().position(|m| m == name)?;
        Some(self.records.iter().map(|r| r.metrics[i]).collect())
    }
}

/// Driver state shared by runs, studies and examples.
pub struct Runner {
    pub scenario: Scenario,
    pub sim: Simulation,
    step: usize,
}

impl Runner {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        let scenario = build_scenario(config)?;
        let sim = Simulation::new(scenario.model.clone(), config.solver_settings())?;
        Ok(Self { scenario, sim, step: 0 })
    }

    pub fn h(&self) -> f64 {
        self.scenario.config.h()
    }

    /// Advances to the next grid time `k·h`.
    pub fn step(&mut self) -> Result<StepReport> {
        let target = (self.step + 1) as f64 * self.h();
        let report = self.sim.advance_step(target - self.sim.time)?;
        self.sim.time = target;
        self.step += 1;
        Ok(report)
    }

    pub fn steps_until(&self, t: f64) -> usize {
        (t / self.h() - 1e-9).ceil().max(0.0) as usize
    }

    pub fn probe_names(&self) -> Vec<String> {
        self.scenario.config.probes.iter().map(|p| p.name.clone()).collect()
    }

    pub fn metric_names(&self) -> Vec<String> {
        match &self.scenario.program {
            Some(_) => vec![
                "mean_program_fraction".into(),
                "max_node_displacement".into(),
                "mean_radial_change".into(),
                "max_radial_change".into(),
                "max_shape_deviation".into(),
            ],
            None => vec![],
        }
    }

    pub fn load_factor(&self) -> f64 {
        let t = self.sim.time;
        match &self.scenario.program {
            Some(p) => {
                if t > p.release_time + 1e-12 {
                    0.0
                } else {
                    p.ramp.value(t)
                }
            }
            None => self
                .scenario
                .model
                .nodes
                .iter()
                .flat_map(|n| n.phases.iter())
                .find(|ph| !ph.force.profile.is_zero() || !ph.moment.profile.is_zero())
                .map(|ph| {
                    if ph.force.vector != Vec3::zeros() {
                        ph.force.profile.value(t)
                    } else {
                        ph.moment.profile.value(t)
                    }
                })
                .unwrap_or(0.0),
        }
    }

    pub fn node_displacements(&self) -> Vec<Vec3> {
        match &self.scenario.program {
            Some(p) => p.node_ends.iter().map(|e| self.sim.end_displacement(*e)).collect(),
            None => vec![],
        }
    }

    /// Radial change `r₀ − r` of every node about its crown axis
    /// (crown frame of the initial configuration).
    fn radial_changes(&self) -> Vec<f64> {
        let Some(p) = &self.scenario.program else { return vec![] };
        p.assembly
            .nodes
            .iter()
            .zip(&p.node_ends)
            .map(|(node, e)| {
                let x = self.sim.end_position(*e);
                let (center, frame, r0) = match node.crown {
                    Some(tag) => {
                        let (c, f) = p.assembly.crown_frames[tag.crown];
                        (c, f, (tag.local.x.powi(2) + tag.local.y.powi(2)).sqrt())
                    }
                    None => return 0.0,
                };
                let l = frame.apply_transpose(&(x - center));
                r0 - (l.x * l.x + l.y * l.y).sqrt()
            })
            .collect()
    }

    pub fn metrics(&self) -> Vec<f64> {
        let Some(p) = &self.scenario.program else { return vec![] };
        let disp = self.node_displacements();
        let fractions: Vec<f64> = disp
            .iter()
            .zip(&p.target)
            .filter(|(_, t)| t.norm() > 0.0)
            .map(|(d, t)| d.norm() / t.norm())
            .collect();
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        let dr = self.radial_changes();
        vec![
            mean(&fractions),
            disp.iter().map(|d| d.norm()).fold(0.0, f64::max),
            mean(&dr),
            dr.iter().copied().fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m }),
            shape_deviation(&p.initial, &disp),
        ]
    }

    pub fn probes(&self) -> Result<Vec<Vec3>> {
        self.scenario.config.probes.iter().map(|p| self.sim.displacement(p.patch, p.u)).collect()
    }

    pub fn record(&self, report: Option<&StepReport>) -> Result<ProbeRecord> {
        Ok(ProbeRecord {
            time: self.sim.time,
            temperature: self.sim.temperature(),
            load_factor: self.load_factor(),
            iterations: report.map(|r| r.iterations).unwrap_or(0),
            substeps: report.map(|r| r.substeps).unwrap_or(0),
            probes: self.probes()?,
            metrics: self.metrics(),
        })
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the deformed centroid lines sampled uniformly in `u`:
/// columns `patch_id, sample_index, u, x1, x2, x3`.
/// Largest node distance from the initial configuration after the best
/// rigid fit (Kabsch), so a rigid offset left by the release anchor does not
/// count as unrecovered shape.
pub fn shape_deviation(initial: &[Vec3], displacement: &[Vec3]) -> f64 {
    if initial.is_empty() {
        return 0.0;
    }
    let n = initial.len() as f64;
    let current: Vec<Vec3> = initial.iter().zip(displacement).map(|(a, d)| a + d).collect();
    let c0 = initial.iter().sum::<Vec3>() / n;
    let c1 = current.iter().sum::<Vec3>() / n;
    let mut h = Mat3::zeros();
    for (a, b) in current.iter().zip(initial) {
        h += (a - c1) * (b - c0).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v"));
    let mut fix = Mat3::identity();
    fix[(2, 2)] = (vt.transpose() * u.transpose()).determinant().signum();
    let q = vt.transpose() * fix * u.transpose();
    current
        .iter()
        .zip(initial)
        .map(|(a, b)| (q * (a - c1) + c0 - b).norm())
        .fold(0.0, f64::max)
}

pub fn emit_snapshot(sim: &Simulation, path: &Path, samples_per_patch: usize) -> Result<usize> {
    let text = snapshot_csv(sim, samples_per_patch)?;
    fs::write(path, text)?;
    Ok(sim.patches.len() * samples_per_patch)
}

pub fn snapshot_csv(sim: &Simulation, samples_per_patch: usize) -> Result<String> {
    if samples_per_patch < 2 {
        return Err(Error::InvalidArgument("need at least two samples per patch".into()));
    }
    let mut out = String::from("patch_id,sample_index,u,x1,x2,x3\n");
    for patch in 0..sim.patches.len() {
        for k in 0..samples_per_patch {
            let u = k as f64 / (samples_per_patch - 1) as f64;
            let x = sim.position(patch, u)?;
            writeln!(out, "{patch},{k},{},{},{},{}", num(u), num(x.x), num(x.y), num(x.z)).unwrap();
        }
    }
    Ok(out)
}

fn probes_csv(names: &[String], metrics: &[String], records: &[ProbeRecord]) -> String {
    let mut out = String::from("time,temperature,load_factor,iterations,substeps");
    for n in names {
        write!(out, ",{n}_u1,{n}_u2,{n}_u3").unwrap();
    }
    for m in metrics {
        write!(out, ",{m}").unwrap();
    }
    out.push('\n');
    for r in records {
        write!(out, "{},{},{},{},{}", num(r.time), num(r.temperature), num(r.load_factor), r.iterations, r.substeps)
            .unwrap();
        for p in &r.probes {
            write!(out, ",{},{},{}", num(p.x), num(p.y), num(p.z)).unwrap();
        }
        for m in &r.metrics {
            write!(out, ",{}", num(*m)).unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Metadata<'a> {
    scenario: &'a str,
    schema_version: u32,
    status: &'a str,
    failure: Option<String>,
    completed_time: f64,
    steps: usize,
    h: f64,
    dof: usize,
    patches: usize,
    decisions: std::collections::BTreeMap<String, String>,
    config: String,
    files: Vec<String>,
}

/// Runs a scenario to its total time, recording one probe line per step
/// and writing CSV, snapshot and metadata files when `out_dir` is set.
/// Solver failures end the run with a last-good snapshot and are
/// returned in [`RunOutcome::failure`].
pub fn run_scenario(config: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let mut runner = Runner::new(config)?;
    let total = opts.stop_time.unwrap_or(config.total_time()).min(config.total_time());
    let n_steps = (total / runner.h()).round() as usize;
    let mut snap_times = opts.snapshot_times.clone().unwrap_or_else(|| config.output.snapshot_times.clone());
    snap_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let samples = config.output.samples_per_patch;
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir)?;
    }
    let mut snapshots = vec![];
    let mut pending = snap_times.into_iter().peekable();
    let mut take_snapshots = |runner: &Runner, snapshots: &mut Vec<(f64, PathBuf)>| -> Result<()> {
        let h = runner.h();
        while let Some(&ts) = pending.peek() {
            if ts > runner.sim.time + 0.5 * h {
                break;
            }
            pending.next();
            if let Some(dir) = &opts.out_dir {
                let path = dir.join(format!("snapshot_t{ts:.4}.csv"));
                emit_snapshot(&runner.sim, &path, samples)?;
                snapshots.push((ts, path));
            }
        }
        Ok(())
    };
    let mut records = vec![runner.record(None)?];
    take_snapshots(&runner, &mut snapshots)?;
    let mut failure = None;
    for k in 0..n_steps {
        match runner.step() {
            Ok(report) => {
                records.push(runner.record(Some(&report))?);
                take_snapshots(&runner, &mut snapshots)?;
                if (k + 1) % 100 == 0 {
                    log::info!("{}: t = {:.4} s, {} iterations", config.name, runner.sim.time, report.iterations);
                }
            }
            Err(e) => {
                log::error!("{}: step to t = {:.6} s failed: {e}", config.name, runner.sim.time + runner.h());
                failure = Some(e);
                break;
            }
        }
    }
    let probe_names = runner.probe_names();
    let metric_names = runner.metric_names();
    if let Some(dir) = &opts.out_dir {
        let mut files = vec!["probes.csv".to_string()];
        fs::write(dir.join("probes.csv"), probes_csv(&probe_names, &metric_names, &records))?;
        if failure.is_some() {
            emit_snapshot(&runner.sim, &dir.join("last_good.csv"), samples)?;
            files.push("last_good.csv".into());
        }
        files.extend(snapshots.iter().map(|(_, p)| p.file_name().unwrap().to_string_lossy().into_owned()));
        let meta = Metadata {
            scenario: &config.name,
            schema_version: config.schema_version,
            status: if failure.is_some() { "solver-failure" } else { "ok" },
            failure: failure.as_ref().map(|e| e.to_string()),
            completed_time: runner.sim.time,
            steps: records.len() - 1,
            h: runner.h(),
            dof: runner.sim.dof_count(),
            patches: runner.sim.patches.len(),
            decisions: runner.scenario.decisions.iter().cloned().collect(),
            config: config.to_toml(),
            files,
        };
        fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta).expect("metadata serializes"))?;
    }
    Ok(RunOutcome {
        probe_names,
        metric_names,
        records,
        snapshots,
        failure,
        simulation: runner.sim,
        scenario: runner.scenario,
    })
}

/// One cell of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub degree: usize,
    pub control_points: usize,
    pub error: f64,
    /// Observed order against the previous `n` of the same degree.
    pub rate: Option<f64>,
}

/// Displacements of patch 0 at `u = k/8`, `k = 0..=8`, after running to
/// `time` with degree `p` and `n` control points.
pub fn grid_displacements(config: &ScenarioConfig, p: usize, n: usize, time: f64) -> Result<Vec<Vec3>> {
    let mut cfg = config.clone();
    cfg.discretization.degree = p;
    cfg.discretization.control_points = n;
    let mut runner = Runner::new(&cfg)?;
    for _ in 0..runner.steps_until(time) {
        runner.step()?;
    }
    (0..=8).map(|k| runner.sim.displacement(0, k as f64 / 8.0)).collect()
}

/// Relative L2 errors on the 9-point grid against a reference
/// discretization, with observed rates between successive `n`.
/// Cells run on up to `threads` worker threads.
pub fn convergence_study(
    config: &ScenarioConfig,
    degrees: &[usize],
    control_points: &[usize],
    reference: (usize, usize),
    time: f64,
    threads: usize,
) -> Result<Vec<ConvergenceRow>> {
    let reference_field = grid_displacements(config, reference.0, reference.1, time)?;
    let cells: Vec<(usize, usize)> = degrees
        .iter()
        .flat_map(|&p| control_points.iter().filter(move |&&n| n > p).map(move |&n| (p, n)))
        .collect();
    let results: Vec<std::sync::Mutex<Option<Result<f64>>>> = cells.iter().map(|_| std::sync::Mutex::new(None)).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..threads.max(1).min(cells.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(&(p, n)) = cells.get(i) else { break };
                let r = grid_displacements(config, p, n, time).and_then(|u| l2_error(&u, &reference_field));
                *results[i].lock().unwrap() = Some(r);
            });
        }
    });
    let mut rows: Vec<ConvergenceRow> = vec![];
    for ((p, n), r) in cells.into_iter().zip(results) {
        let error = r.into_inner().unwrap().expect("every cell ran")?;
        let rate = rows
            .last()
            .filter(|prev| prev.degree == p && prev.error > 0.0 && error > 0.0)
            .map(|prev| (prev.error / error).ln() / (n as f64 / prev.control_points as f64).ln());
        rows.push(ConvergenceRow { degree: p, control_points: n, error, rate });
    }
    Ok(rows)
}

/// Convergence study with the parameters of the config's convergence
/// block, optionally overridden.
pub fn convergence_from_config(
    config: &ScenarioConfig,
    degrees: Option<Vec<usize>>,
    control_points: Option<Vec<usize>>,
    threads: usize,
) -> Result<Vec<ConvergenceRow>> {
    let c = config
        .convergence
        .as_ref()
        .ok_or_else(|| Error::Config("convergence: block missing from config".into()))?;
    let time = c.time.si(Dim::Time, "convergence.time")?;
    convergence_study(
        config,
        &degrees.unwrap_or_else(|| c.degrees.clone()),
        &control_points.unwrap_or_else(|| c.control_points.clone()),
        (c.reference_degree, c.reference_control_points),
        time,
        threads,
    )
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("p,n,err_l2,rate\n");
    for r in rows {
        let rate = r.rate.map(num).unwrap_or_default();
        writeln!(out, "{},{},{},{}", r.degree, r.control_points, num(r.error), rate).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::config::{parse_config, Quantity};

    fn short_arch() -> ScenarioConfig {
        let mut c = parse_config("arch-90").unwrap();
        c.discretization.h = Quantity::Si(0.05);
        c.discretization.total_time = Quantity::Si(0.2);
        c.discretization.control_points = 8;
        c
    }

    #[test]
    fn undeformed_arch_snapshot_is_on_the_circle() {
        let runner = Runner::new(&short_arch()).unwrap();
        let csv = snapshot_csv(&runner.sim, 9).unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 9);
        for row in rows {
            let f: Vec<f64> = row.split(',').skip(3).map(|v| v.parse().unwrap()).collect();
            assert!(((f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn snapshot_sample_count() {
        let mut cfg = parse_config("stent-straight-quarter").unwrap();
        cfg.geometry.crowns = Some(2);
        cfg.discretization.control_points = 8;
        let runner = Runner::new(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let count = emit_snapshot(&runner.sim, &dir.path().join("s.csv"), 5).unwrap();
        assert_eq!(count, runner.sim.patches.len() * 5);
        let text = fs::read_to_string(dir.path().join("s.csv")).unwrap();
        assert_eq!(text.lines().count(), count + 1);
    }

    #[test]
    fn quarter_stent_snapshot_at_start_matches_geometry() {
        let mut cfg = parse_config("stent-straight-quarter").unwrap();
        cfg.geometry.crowns = Some(2);
        cfg.discretization.control_points = 8;
        let runner = Runner::new(&cfg).unwrap();
        let asm = &runner.scenario.program.as_ref().unwrap().assembly;
        for (i, p) in asm.patches.iter().enumerate() {
            for k in 0..5 {
                let u = k as f64 / 4.0;
                let a = runner.sim.position(i, u).unwrap();
                let b = p.patch.curve_eval(u, 0).unwrap()[0];
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn reruns_are_bit_identical() {
        let cfg = short_arch();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let opts = |d: &Path| RunOptions { out_dir: Some(d.to_path_buf()), snapshot_times: Some(vec![0.1]), stop_time: None };
        run_scenario(&cfg, &opts(a.path())).unwrap();
        run_scenario(&cfg, &opts(b.path())).unwrap();
        for f in ["probes.csv", "snapshot_t0.1000.csv", "metadata.json"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn metadata_records_decisions() {
        let cfg = short_arch();
        let dir = tempfile::tempdir().unwrap();
        let out = run_scenario(&cfg, &RunOptions { out_dir: Some(dir.path().to_path_buf()), ..Default::default() }).unwrap();
        assert!(out.succeeded());
        assert_eq!(out.records.len(), 5);
        let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("metadata.json")).unwrap()).unwrap();
        let d = meta["decisions"].as_object().unwrap();
        for key in ["curvature_update", "interface_coupling", "linear_solver", "tol_residual", "tol_increment", "max_iter", "note_0"] {
            assert!(d.contains_key(key), "{key}");
        }
        assert_eq!(meta["status"], "ok");
    }

    #[test]
    fn self_reference_has_zero_error() {
        let cfg = short_arch();
        let rows = convergence_study(&cfg, &[3], &[8], (3, 8), 0.1, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].error, 0.0);
    }
}
