//! The four workflows. Each returns an exit status; files are written once at the end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nlrd_core::attractor::{build_graph, verify_structure, ConnectionGraph, StructureReport, StructureVerdict};
use nlrd_core::energy::{run_monitors, EstimateMonitor, MonitorOptions};
use nlrd_core::equilibria::{classify, find_all, Equilibrium, EquilibriumSet};
use nlrd_core::problem::{validate_assumptions, AssumptionReport, SamplingPlan};
use nlrd_core::{integrate, FlowFailure, GalerkinSystem, SpectralState, Trajectory};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    Failure = 1,
    ConfigError = 2,
    NumericalFailure = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn worst(self, other: ExitStatus) -> ExitStatus {
        if other.code() > self.code() {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn status(&self) -> ExitStatus {
        match self {
            RunError::Config(_) => ExitStatus::ConfigError,
            RunError::Numerical(_) | RunError::Write { .. } => ExitStatus::NumericalFailure,
        }
    }
}

fn numerical(e: impl std::fmt::Display) -> RunError {
    RunError::Numerical(e.to_string())
}

/// Collected outputs, flushed by [`Outputs::write`].
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<(String, String)>,
}

impl Outputs {
    fn json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
        text.push('\n');
        self.files.push((name.to_string(), text));
    }

    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        std::fs::create_dir_all(dir).map_err(|source| RunError::Write { path: dir.to_path_buf(), source })?;
        for (name, text) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|source| RunError::Write { path, source })?;
        }
        Ok(())
    }
}

/// One row per record: `t,l2,h1,lp,energy,a_value,dissipation,gamma_1..gamma_n`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.records.first().map_or(0, |r| r.coefficients.len());
    let mut out = String::from("t,l2,h1,lp,energy,a_value,dissipation");
    for k in 1..=n {
        write!(out, ",gamma_{k}").unwrap();
    }
    out.push('\n');
    for r in &traj.records {
        write!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.t, r.l2, r.h1, r.lp, r.energy, r.a_value, r.dissipation
        )
        .unwrap();
        for c in &r.coefficients {
            write!(out, ",{c:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
pub struct SimulationSummary {
    pub n_modes: usize,
    pub t_end: f64,
    pub records: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub failure: Option<FlowFailure>,
    pub energy_balance_residual: f64,
    pub monitors: Vec<EstimateMonitor>,
}

fn simulation(cfg: &RunConfig, out: &mut Outputs) -> Result<(SimulationSummary, AssumptionReport), RunError> {
    let spec = cfg.spec()?;
    let basis = cfg.basis()?;
    let flow = cfg.flow()?;
    let g0 = cfg.initial_state(basis.n_modes())?;
    let report = validate_assumptions(&spec, &SamplingPlan::default()).map_err(numerical)?;
    let sys = GalerkinSystem::new(&spec, &basis).map_err(numerical)?;
    let traj = integrate(&SpectralState::new(g0), &sys, &flow).map_err(numerical)?;
    let options =
        MonitorOptions { rel_tol: flow.rel_tol, tail_start: cfg.analysis.tail_start, ..MonitorOptions::default() };
    let monitors = run_monitors(&traj, &spec, &basis, &report, &options);
    out.files.push(("trajectory.csv".into(), trajectory_csv(&traj)));
    let summary = SimulationSummary {
        n_modes: basis.n_modes(),
        t_end: traj.last().t,
        records: traj.records.len(),
        accepted_steps: traj.accepted_steps,
        rejected_steps: traj.rejected_steps,
        failure: traj.failure.clone(),
        energy_balance_residual: traj.energy_balance_residual(),
        monitors,
    };
    Ok((summary, report))
}

fn simulation_status(s: &SimulationSummary) -> ExitStatus {
    if s.failure.is_some() {
        ExitStatus::NumericalFailure
    } else if s.monitors.iter().any(|m| m.failed()) {
        ExitStatus::Failure
    } else {
        ExitStatus::Pass
    }
}

pub fn cmd_simulate(cfg: &RunConfig, out: &mut Outputs) -> Result<ExitStatus, RunError> {
    let (summary, _) = simulation(cfg, out)?;
    if let Some(f) = &summary.failure {
        eprintln!("{f}");
    }
    for m in &summary.monitors {
        eprintln!("{:<22} {:?}", m.name, m.verdict);
    }
    let status = simulation_status(&summary);
    out.json("summary.json", &summary);
    Ok(status)
}

fn equilibria(cfg: &RunConfig, sys: &GalerkinSystem<'_>) -> Result<EquilibriumSet, RunError> {
    find_all(sys, &cfg.search_plan()?).map_err(numerical)
}

pub fn cmd_equilibria(cfg: &RunConfig, out: &mut Outputs) -> Result<ExitStatus, RunError> {
    let spec = cfg.spec()?;
    let basis = cfg.basis()?;
    let sys = GalerkinSystem::new(&spec, &basis).map_err(numerical)?;
    let set = equilibria(cfg, &sys)?;
    eprintln!("{} equilibria", set.len());
    out.json("equilibria.json", &set);
    Ok(ExitStatus::Pass)
}

#[derive(Deserialize)]
struct StoredEquilibrium {
    coefficients: Vec<f64>,
}

#[derive(Deserialize)]
struct StoredSet {
    equilibria: Vec<StoredEquilibrium>,
}

/// Equilibria written by a previous `equilibria` run, reclassified on this system.
fn load_equilibria(path: &Path, sys: &GalerkinSystem<'_>) -> Result<EquilibriumSet, RunError> {
    let key = "analysis.equilibria_file";
    let text = std::fs::read_to_string(path)
        .map_err(|_| RunError::Config(ConfigError::MissingFile { key, path: path.to_path_buf() }))?;
    let stored: StoredSet = serde_json::from_str(&text)
        .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    let mut equilibria: Vec<Equilibrium> = Vec::with_capacity(stored.equilibria.len());
    for (id, e) in stored.equilibria.into_iter().enumerate() {
        if e.coefficients.len() != sys.n() {
            return Err(ConfigError::Invalid {
                key,
                message: format!("equilibrium {id} has {} modes, expected {}", e.coefficients.len(), sys.n()),
            }
            .into());
        }
        equilibria.push(classify(sys, e.coefficients, id).map_err(numerical)?);
    }
    Ok(EquilibriumSet { equilibria, seeds_used: 0, deflation_rounds: 0, found_by_deflation: 0, newton_failures: 0 })
}

fn graph_status(g: &ConnectionGraph) -> ExitStatus {
    if g.is_acyclic() && g.edges_descend(0.0) {
        ExitStatus::Pass
    } else {
        ExitStatus::Failure
    }
}

/// Equilibria file: `analysis.equilibria_file`, else `equilibria.json` in the output directory.
pub fn equilibria_path(cfg: &RunConfig, out_dir: &Path) -> PathBuf {
    match &cfg.analysis.equilibria_file {
        Some(p) => cfg.resolve(p),
        None => out_dir.join("equilibria.json"),
    }
}

pub fn cmd_connections(cfg: &RunConfig, out_dir: &Path, out: &mut Outputs) -> Result<ExitStatus, RunError> {
    let spec = cfg.spec()?;
    let basis = cfg.basis()?;
    let sys = GalerkinSystem::new(&spec, &basis).map_err(numerical)?;
    let set = load_equilibria(&equilibria_path(cfg, out_dir), &sys)?;
    let graph = build_graph(&sys, &set, &cfg.shoot_options()?).map_err(numerical)?;
    eprintln!("{} edges, {} unresolved shots", graph.edges.len(), graph.unresolved.len());
    let status = graph_status(&graph);
    out.json("connections.json", &graph);
    Ok(status)
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub assumptions: AssumptionReport,
    pub simulation: Option<SimulationSummary>,
    pub equilibria: Option<EquilibriumSet>,
    pub connections: Option<ConnectionGraph>,
    pub structure: Option<StructureReport>,
    pub notes: Vec<String>,
    pub passed: bool,
}

pub fn cmd_verify(cfg: &RunConfig, out: &mut Outputs) -> Result<ExitStatus, RunError> {
    let spec = cfg.spec()?;
    let basis = cfg.basis()?;
    let probe = cfg.probe_options()?;
    let report = validate_assumptions(&spec, &SamplingPlan::default()).map_err(numerical)?;
    let mut notes = Vec::new();
    let mut status = ExitStatus::Pass;

    if report.has_false_claim() {
        for c in report.failures() {
            let msg = format!("claimed {:?} fails: worst violation {:e} at {}", c.name, c.worst_violation, c.location);
            eprintln!("{msg}");
            notes.push(msg);
        }
        out.json(
            "verify.json",
            &VerifyReport {
                assumptions: report,
                simulation: None,
                equilibria: None,
                connections: None,
                structure: None,
                notes,
                passed: false,
            },
        );
        return Ok(ExitStatus::Failure);
    }

    let (summary, _) = simulation(cfg, out)?;
    status = status.worst(simulation_status(&summary));
    for m in summary.monitors.iter().filter(|m| m.failed()) {
        notes.push(format!("monitor {} failed with margin {:e}", m.name, m.min_margin));
    }

    let sys = GalerkinSystem::new(&spec, &basis).map_err(numerical)?;
    let (set, graph, structure) = if sys.is_autonomous() {
        let set = equilibria(cfg, &sys)?;
        let graph = build_graph(&sys, &set, &cfg.shoot_options()?).map_err(numerical)?;
        status = status.worst(graph_status(&graph));
        let structure = verify_structure(&graph, &set, &sys, &probe).map_err(numerical)?;
        match structure.verdict {
            StructureVerdict::Pass => {}
            v => {
                notes.push(format!("structure verification: {v:?}"));
                status = status.worst(ExitStatus::Failure);
            }
        }
        (Some(set), Some(graph), Some(structure))
    } else {
        notes.push("forcing is time dependent: equilibrium structure skipped".into());
        (None, None, None)
    };

    for n in &notes {
        eprintln!("{n}");
    }
    out.json("equilibria.json", &set);
    out.json(
        "verify.json",
        &VerifyReport {
            assumptions: report,
            simulation: Some(summary),
            equilibria: set,
            connections: graph,
            structure,
            notes,
            passed: status == ExitStatus::Pass,
        },
    );
    Ok(status)
}
