//! Connections between equilibria: shots out of unstable directions, forward
//! convergence of random probes, and checks on the resulting graph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::energy::{attractor_pointwise_check, linf_bound_constant};
use crate::equilibria::{Equilibrium, EquilibriumSet};
use crate::flow::{integrate_with, Control, FlowConfig, FlowError, FlowFailure, Trajectory};
use crate::galerkin::{GalerkinSystem, SystemError};
use crate::spectral::{l2_distance, l2_norm, SpectralState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttractorError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("equilibrium {0} has marginal eigenvalues (bifurcation point); refusing to seed")]
    Marginal(usize),
    #[error("connections need autonomous forcing")]
    NonAutonomous,
    #[error("shot failed: {0}")]
    ShotFailed(FlowFailure),
    #[error("need at least {min} probes, got {got}")]
    TooFewProbes { min: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedPerturbation {
    pub direction: usize,
    pub sign: i8,
    pub magnitude: f64,
    #[serde(skip)]
    pub state: Vec<f64>,
}

/// Default seed offset `1e−4·(1 + ‖z‖)`.
pub fn default_delta(eq: &Equilibrium) -> f64 {
    1e-4 * (1.0 + eq.l2())
}

/// `z ± δv` for every unstable unit eigenvector `v` of `z`.
pub fn unstable_seeds(eq: &Equilibrium, delta: Option<f64>) -> Result<Vec<SeedPerturbation>, AttractorError> {
    if eq.marginal_count > 0 {
        return Err(AttractorError::Marginal(eq.id));
    }
    let delta = delta.unwrap_or_else(|| default_delta(eq));
    let mut out = Vec::with_capacity(2 * eq.unstable_count);
    for (direction, v) in eq.unstable_directions.iter().enumerate() {
        for sign in [1i8, -1] {
            let s = f64::from(sign) * delta;
            out.push(SeedPerturbation {
                direction,
                sign,
                magnitude: delta,
                state: eq.coefficients.iter().zip(v).map(|(z, v)| z + s * v).collect(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootOptions {
    pub t_max: f64,
    pub omega_tol: f64,
    /// Keep integrating to at least this time even after convergence.
    pub min_time: f64,
    pub flow: FlowConfig,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self { t_max: 200.0, omega_tol: 1e-6, min_time: 0.0, flow: FlowConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OmegaLimit {
    Converged { target: usize, time: f64, distance: f64 },
    Unresolved { t_max: f64 },
}

impl OmegaLimit {
    pub fn target(&self) -> Option<usize> {
        match self {
            OmegaLimit::Converged { target, .. } => Some(*target),
            OmegaLimit::Unresolved { .. } => None,
        }
    }
}

/// Integrate `seed` until it sits within `omega_tol` of a member of `set`
/// with `‖rhs‖ ≤ omega_tol`, or until `t_max`.
pub fn shoot(
    seed: &[f64],
    sys: &GalerkinSystem<'_>,
    set: &EquilibriumSet,
    options: &ShootOptions,
) -> Result<(OmegaLimit, Trajectory), AttractorError> {
    if !sys.is_autonomous() {
        return Err(AttractorError::NonAutonomous);
    }
    let config = FlowConfig { t_end: options.t_max, record_every: 1, ..options.flow };
    let mut hit: Option<OmegaLimit> = None;
    let traj = integrate_with(&SpectralState::new(seed.to_vec()), sys, &config, |rec| {
        if hit.is_none() {
            if let Some((id, dist)) = set.nearest(&rec.coefficients) {
                if dist <= options.omega_tol {
                    let speed = sys.rhs(&rec.coefficients, rec.t).map(|r| l2_norm(&r)).unwrap_or(f64::INFINITY);
                    if speed <= options.omega_tol {
                        hit = Some(OmegaLimit::Converged { target: id, time: rec.t, distance: dist });
                    }
                }
            }
        }
        if hit.is_some() && rec.t >= options.min_time {
            Control::Stop
        } else {
            Control::Continue
        }
    })?;
    if let Some(f) = &traj.failure {
        return Err(AttractorError::ShotFailed(f.clone()));
    }
    Ok((hit.unwrap_or(OmegaLimit::Unresolved { t_max: options.t_max }), traj))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeteroclinicEdge {
    pub source: usize,
    pub target: usize,
    pub seed: SeedPerturbation,
    pub source_energy: f64,
    pub target_energy: f64,
    pub transit_time: f64,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

impl HeteroclinicEdge {
    pub fn energy_drop(&self) -> f64 {
        self.source_energy - self.target_energy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnresolvedShot {
    pub source: usize,
    pub seed: SeedPerturbation,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectionGraph {
    pub nodes: Vec<Equilibrium>,
    pub edges: Vec<HeteroclinicEdge>,
    pub unresolved: Vec<UnresolvedShot>,
    /// Equilibria skipped because of marginal eigenvalues.
    pub marginal: Vec<usize>,
}

impl ConnectionGraph {
    pub fn out_degree(&self, id: usize) -> usize {
        self.edges.iter().filter(|e| e.source == id).count()
    }

    /// Kahn's algorithm; `true` when the edges admit a topological order.
    pub fn is_acyclic(&self) -> bool {
        let n = self.nodes.iter().map(|e| e.id + 1).max().unwrap_or(0);
        let mut indegree = vec![0usize; n];
        for e in &self.edges {
            indegree[e.target] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = ready.pop() {
            seen += 1;
            for e in self.edges.iter().filter(|e| e.source == i) {
                indegree[e.target] -= 1;
                if indegree[e.target] == 0 {
                    ready.push(e.target);
                }
            }
        }
        seen == n
    }

    /// Every edge lowers the energy by more than `margin`.
    pub fn edges_descend(&self, margin: f64) -> bool {
        self.edges.iter().all(|e| e.target_energy < e.source_energy - margin)
    }
}

/// Shoot from every unstable direction of every equilibrium in `set`.
pub fn build_graph(
    sys: &GalerkinSystem<'_>,
    set: &EquilibriumSet,
    options: &ShootOptions,
) -> Result<ConnectionGraph, AttractorError> {
    if !sys.is_autonomous() {
        return Err(AttractorError::NonAutonomous);
    }
    let mut marginal = Vec::new();
    let mut jobs = Vec::new();
    for eq in &set.equilibria {
        match unstable_seeds(eq, None) {
            Ok(seeds) => jobs.extend(seeds.into_iter().map(|s| (eq, s))),
            Err(AttractorError::Marginal(id)) => marginal.push(id),
            Err(e) => return Err(e),
        }
    }
    let shots: Vec<_> = jobs
        .into_par_iter()
        .map(|(eq, seed)| shoot(&seed.state, sys, set, options).map(|r| (eq, seed, r)))
        .collect::<Result<_, _>>()?;

    let mut edges: Vec<HeteroclinicEdge> = Vec::new();
    let mut unresolved = Vec::new();
    for (eq, seed, (limit, trajectory)) in shots {
        match limit {
            OmegaLimit::Converged { target, time, .. } => {
                if edges.iter().any(|e| e.source == eq.id && e.target == target) {
                    continue;
                }
                let target_energy = set.get(target).expect("target comes from the set").energy;
                edges.push(HeteroclinicEdge {
                    source: eq.id,
                    target,
                    seed,
                    source_energy: eq.energy,
                    target_energy,
                    transit_time: time,
                    trajectory,
                });
            }
            OmegaLimit::Unresolved { t_max } => unresolved.push(UnresolvedShot { source: eq.id, seed, t_max }),
        }
    }
    Ok(ConnectionGraph { nodes: set.equilibria.clone(), edges, unresolved, marginal })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeOptions {
    pub count: usize,
    pub seed: u64,
    /// Start of the tail used for the pointwise bound.
    pub tail_start: f64,
    pub shoot: ShootOptions,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { count: 20, seed: 0, tail_start: 20.0, shoot: ShootOptions { min_time: 30.0, ..ShootOptions::default() } }
    }
}

/// `count` points uniform in the coefficient ball of radius `radius`.
pub fn probe_states(n: usize, radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = l2_norm(&dir);
            let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
            dir.into_iter().map(|v| v * r / norm).collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeOutcome {
    pub initial_l2: f64,
    pub limit: OmegaLimit,
    /// `max over the tail of (grid-max |u| − M)`, when `M` is available.
    pub tail_linf_margin: Option<f64>,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeCheck {
    pub source: usize,
    pub target: usize,
    /// Recorded energy never rises by more than the step tolerance.
    pub energy_nonincreasing: bool,
    pub energy_drop: f64,
    pub start_distance: f64,
    pub end_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureReport {
    pub probe_seed: u64,
    pub probe_radius: f64,
    pub probes: Vec<ProbeOutcome>,
    /// Every probe converged forward to an equilibrium.
    pub forward_convergence: bool,
    /// Every edge leaves an equilibrium neighbourhood and ends at an equilibrium.
    pub edges_connect: bool,
    pub edge_checks: Vec<EdgeCheck>,
    pub acyclic: bool,
    pub strict_descent: bool,
    /// Stable equilibria reached by no probe and no edge (reported only).
    pub uncovered_stable: Vec<usize>,
    pub linf_bound: Option<f64>,
    pub verdict: StructureVerdict,
}

pub const MIN_PROBES: usize = 20;

/// Probe the absorbing ball and check the graph against the Lyapunov structure.
pub fn verify_structure(
    graph: &ConnectionGraph,
    set: &EquilibriumSet,
    sys: &GalerkinSystem<'_>,
    options: &ProbeOptions,
) -> Result<StructureReport, AttractorError> {
    if options.count < MIN_PROBES {
        return Err(AttractorError::TooFewProbes { min: MIN_PROBES, got: options.count });
    }
    let spec = sys.spec;
    let radius = spec.absorbing_radius() + 1.0;
    let starts = probe_states(sys.n(), radius, options.count, options.seed);
    let bound = linf_bound_constant(spec).ok();
    let probes: Vec<ProbeOutcome> = starts
        .par_iter()
        .map(|s| {
            shoot(s, sys, set, &options.shoot).map(|(limit, trajectory)| ProbeOutcome {
                initial_l2: l2_norm(s),
                limit,
                tail_linf_margin: bound
                    .map(|m| attractor_pointwise_check(trajectory.tail(options.tail_start), sys.basis, m)),
                trajectory,
            })
        })
        .collect::<Result<_, _>>()?;
    let forward_convergence = probes.iter().all(|p| p.limit.target().is_some());

    let edge_checks: Vec<EdgeCheck> = graph
        .edges
        .iter()
        .map(|e| {
            let recs = &e.trajectory.records;
            let source = &set.get(e.source).expect("edge source in set").coefficients;
            let target = &set.get(e.target).expect("edge target in set").coefficients;
            let scale = 1.0 + recs.iter().map(|r| r.energy.abs()).fold(0.0, f64::max);
            let tol_e = 10.0 * options.shoot.flow.rel_tol * scale;
            EdgeCheck {
                source: e.source,
                target: e.target,
                energy_nonincreasing: recs.windows(2).all(|w| w[1].energy <= w[0].energy + tol_e),
                energy_drop: recs[0].energy - e.trajectory.last().energy,
                start_distance: l2_distance(&recs[0].coefficients, source),
                end_distance: l2_distance(&e.trajectory.last().coefficients, target),
            }
        })
        .collect();
    let edges_connect =
        graph.edges.iter().zip(&edge_checks).all(|(e, c)| {
            c.start_distance <= e.seed.magnitude * (1.0 + 1e-9) && c.end_distance <= options.shoot.omega_tol
        });
    let acyclic = graph.is_acyclic();
    let strict_descent =
        graph.edges_descend(1e-10) && edge_checks.iter().all(|c| c.energy_nonincreasing && c.energy_drop >= 1e-8);

    let uncovered_stable = set
        .equilibria
        .iter()
        .filter(|e| e.is_stable())
        .map(|e| e.id)
        .filter(|&id| {
            !probes.iter().any(|p| p.limit.target() == Some(id)) && !graph.edges.iter().any(|e| e.target == id)
        })
        .collect();

    let verdict = if !(acyclic && strict_descent && edges_connect) {
        StructureVerdict::Fail
    } else if !forward_convergence || !graph.unresolved.is_empty() || !graph.marginal.is_empty() {
        StructureVerdict::Inconclusive
    } else {
        StructureVerdict::Pass
    };
    Ok(StructureReport {
        probe_seed: options.seed,
        probe_radius: radius,
        probes,
        forward_convergence,
        edges_connect,
        edge_checks,
        acyclic,
        strict_descent,
        uncovered_stable,
        linf_bound: bound,
        verdict,
    })
}
