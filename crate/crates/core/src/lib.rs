//! Spectral Galerkin solver and attractor analysis for reaction-diffusion
//! equations with a nonlocal diffusion coefficient,
//!
//! ```text
//! u_t − a(‖u‖²_{H¹₀}) u_xx = f(u) + h   on (0, L),   u(0) = u(L) = 0.
//! ```

pub mod attractor;
pub mod energy;
pub mod equilibria;
pub mod flow;
pub mod galerkin;
pub mod problem;
pub mod spectral;

pub use attractor::{
    build_graph, shoot, unstable_seeds, verify_structure, ConnectionGraph, HeteroclinicEdge, OmegaLimit,
    StructureReport,
};
pub use energy::{energy, linf_bound_constant, run_monitors, EnergyReport, EstimateMonitor, MonitorOptions, Verdict};
pub use equilibria::{find_all, newton_solve, Equilibrium, EquilibriumSet, NewtonOptions, SearchPlan};
pub use flow::{integrate, ErrorNorm, FlowConfig, FlowFailure, NonlocalCoefficient, Trajectory, TrajectoryRecord};
pub use galerkin::{rhs, GalerkinSystem};
pub use problem::{
    validate_assumptions, AssumptionReport, DiffusionModulator, Forcing, ProblemSpec, ReactionTerm, SamplingPlan,
    Theorem,
};
pub use spectral::{SpectralBasis, SpectralState};
