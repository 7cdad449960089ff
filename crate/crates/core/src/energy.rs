//! The Lyapunov functional and the a priori estimates checked along runs.

use serde::Serialize;
use thiserror::Error;

use crate::flow::{Trajectory, TrajectoryRecord};
use crate::galerkin::{GalerkinSystem, SystemError};
use crate::problem::{AssumptionReport, ProblemError, ProblemSpec, Theorem};
use crate::spectral::{l2_norm, SpectralBasis, SpectralState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("the H² bound needs a nondecreasing diffusion coefficient (a' ≥ 0 not claimed)")]
    NeedsNondecreasingDiffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyParts {
    /// `½A(‖u‖²_{H¹₀})`
    pub diffusion: f64,
    /// `−∫F(u)`
    pub reaction: f64,
    /// `−∫h u`
    pub forcing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub energy: f64,
    pub parts: EnergyParts,
    pub l2: f64,
    pub h1: f64,
    pub lp: f64,
}

fn parts_of(sys: &GalerkinSystem<'_>, nodal: &[f64], h1_sq: f64) -> EnergyParts {
    let spec = sys.spec;
    let basis = sys.basis;
    let h = sys.forcing_nodal();
    EnergyParts {
        diffusion: 0.5 * spec.diffusion.antiderivative(h1_sq),
        reaction: -basis.integrate(|i| spec.reaction.antiderivative(nodal[i])),
        forcing: -basis.integrate(|i| h[i] * nodal[i]),
    }
}

/// `E` from already synthesized nodal values. Time-dependent forcing
/// contributes nothing here (the functional is only defined for autonomous h).
pub(crate) fn energy_of(sys: &GalerkinSystem<'_>, _coefficients: &[f64], nodal: &[f64], h1_sq: f64) -> f64 {
    let p = parts_of(sys, nodal, h1_sq);
    p.diffusion + p.reaction + p.forcing
}

/// `E(u) = ½A(‖u‖²_{H¹₀}) − ∫F(u) − ∫h u` with the Galerkin quadrature.
pub fn energy(
    state: &SpectralState,
    spec: &ProblemSpec,
    basis: &SpectralBasis,
) -> Result<EnergyReport, DiagnosticError> {
    let sys = GalerkinSystem::new(spec, basis)?;
    energy_with(&sys, &state.coefficients)
}

pub fn energy_with(sys: &GalerkinSystem<'_>, coefficients: &[f64]) -> Result<EnergyReport, DiagnosticError> {
    let basis = sys.basis;
    basis.check_dim(coefficients.len()).map_err(SystemError::from)?;
    let mut nodal = vec![0.0; basis.quad_size()];
    basis.synthesize_into(coefficients, &mut nodal);
    let h1_sq = basis.h1_squared(coefficients);
    let parts = parts_of(sys, &nodal, h1_sq);
    Ok(EnergyReport {
        energy: parts.diffusion + parts.reaction + parts.forcing,
        parts,
        l2: l2_norm(coefficients),
        h1: h1_sq.sqrt(),
        lp: basis.lp_from_values(&nodal, sys.spec.reaction.p()),
    })
}

/// Maximize `g` over the real line, assuming `g → −∞` in both directions.
/// Returns `None` when no such decay is found.
pub fn maximize_scalar(g: impl Fn(f64) -> f64) -> Option<(f64, f64)> {
    let mut reach = 1.0;
    let mut found = false;
    for _ in 0..60 {
        let (lo, hi) = (g(-reach), g(reach));
        let (lo_in, hi_in) = (g(-0.5 * reach), g(0.5 * reach));
        if lo < 0.0 && hi < 0.0 && lo < lo_in && hi < hi_in {
            found = true;
            break;
        }
        reach *= 2.0;
    }
    if !found {
        return None;
    }
    let points = 20_001;
    let step = 2.0 * reach / (points - 1) as f64;
    let mut best = (0.0, g(0.0));
    for i in 0..points {
        let s = -reach + i as f64 * step;
        let v = g(s);
        if v > best.1 {
            best = (s, v);
        }
    }
    // golden-section refinement on the bracketing cell
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    for _ in 0..100 {
        if g(c) > g(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    let s = 0.5 * (a + b);
    let v = g(s);
    if v > best.1 {
        best = (s, v);
    }
    Some(best)
}

/// Constants of `(f(s) + h)s ≤ κ̃ − α̃|s|^p` and the resulting `L∞` radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinfConstants {
    pub kappa_tilde: f64,
    pub alpha_tilde: f64,
    pub p: f64,
    pub bound: f64,
}

/// `M = (κ̃/α̃)^{1/p}` with `κ̃ = sup_s (f(s)s + sup|h|·|s| + α̃|s|^p)`.
///
/// `α̃` is the reaction's `α₁`; if that leaves the supremum infinite (as for a
/// linear reaction with forcing), half of it is used instead.
pub fn linf_constants(spec: &ProblemSpec) -> Result<LinfConstants, DiagnosticError> {
    let r = &spec.reaction;
    let p = r.p();
    let hsup = spec.forcing_sup();
    if !hsup.is_finite() {
        return Err(ProblemError::InvalidForcing("forcing is not bounded".into()).into());
    }
    let alpha1 = r.constants.alpha1;
    if alpha1 <= 0.0 {
        return Err(ProblemError::MissingBound("dissipativity with α₁ > 0").into());
    }
    for alpha in [alpha1, 0.5 * alpha1] {
        let g = |s: f64| r.f(s) * s + hsup * s.abs() + alpha * s.abs().powf(p);
        if let Some((_, kappa)) = maximize_scalar(g) {
            let kappa = kappa.max(0.0);
            return Ok(LinfConstants {
                kappa_tilde: kappa,
                alpha_tilde: alpha,
                p,
                bound: (kappa / alpha).powf(1.0 / p),
            });
        }
    }
    Err(ProblemError::MissingBound("(f(s) + h)s ≤ κ̃ − α̃|s|^p").into())
}

pub fn linf_bound_constant(spec: &ProblemSpec) -> Result<f64, DiagnosticError> {
    Ok(linf_constants(spec)?.bound)
}

fn grid_max(basis: &SpectralBasis, coefficients: &[f64], scratch: &mut Vec<f64>) -> f64 {
    scratch.resize(basis.quad_size(), 0.0);
    basis.synthesize_into(coefficients, scratch);
    scratch.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `max over records of (grid-max |u| − M)`; `−M` for an empty tail.
pub fn attractor_pointwise_check(tail: &[TrajectoryRecord], basis: &SpectralBasis, bound: f64) -> f64 {
    let mut scratch = Vec::new();
    tail.iter().map(|r| grid_max(basis, &r.coefficients, &mut scratch) - bound).fold(-bound, f64::max)
}

/// `sup ‖Δu‖_{L²}` over the tail records.
pub fn h2_diagnostic(
    tail: &[TrajectoryRecord],
    spec: &ProblemSpec,
    basis: &SpectralBasis,
) -> Result<f64, DiagnosticError> {
    if !spec.diffusion.claims.aprime_nonneg {
        return Err(DiagnosticError::NeedsNondecreasingDiffusion);
    }
    Ok(tail.iter().map(|r| basis.laplacian_squared(&r.coefficients).sqrt()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateMonitor {
    pub name: &'static str,
    pub bound: &'static str,
    /// `(t, bound − observed)`; negative means the bound is exceeded.
    #[serde(skip)]
    pub margins: Vec<(f64, f64)>,
    pub min_margin: f64,
    pub slack: f64,
    pub verdict: Verdict,
}

impl EstimateMonitor {
    fn from_margins(name: &'static str, bound: &'static str, margins: Vec<(f64, f64)>, slack: f64) -> Self {
        if margins.is_empty() {
            return Self::not_applicable(name, bound, "no records in the monitored window");
        }
        let min_margin = margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
        let verdict = if min_margin >= -slack { Verdict::Pass } else { Verdict::Fail };
        Self { name, bound, margins, min_margin, slack, verdict }
    }

    fn not_applicable(name: &'static str, bound: &'static str, reason: &str) -> Self {
        Self {
            name,
            bound,
            margins: Vec::new(),
            min_margin: f64::NAN,
            slack: 0.0,
            verdict: Verdict::NotApplicable(reason.to_string()),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorOptions {
    pub rel_tol: f64,
    /// Start of the tail used by the `L∞` and `H²` monitors.
    pub tail_start: f64,
    pub linf_slack: f64,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-4, tail_start: 20.0, linf_slack: 1e-3 }
    }
}

/// The standard slack `max(1e−8, 10·rel_tol·scale)`.
pub fn slack(rel_tol: f64, scale: f64) -> f64 {
    (10.0 * rel_tol * scale.abs()).max(1e-8)
}

/// Names of every monitor [`run_monitors`] reports, in order.
pub const MONITOR_NAMES: [&str; 8] = [
    "absorbing_l2_decay",
    "absorbing_ball",
    "mean_h1_window",
    "energy_nonincreasing",
    "energy_equality",
    "energy_lower_bound",
    "linf_bound",
    "h2_tail",
];

/// Evaluate every estimate along `traj`.
pub fn run_monitors(
    traj: &Trajectory,
    spec: &ProblemSpec,
    basis: &SpectralBasis,
    report: &AssumptionReport,
    options: &MonitorOptions,
) -> Vec<EstimateMonitor> {
    let recs = &traj.records;
    let t0 = recs[0].t;
    let rate = spec.first_eigenvalue() * spec.diffusion.m;
    let k1 = spec.kappa1();
    let m = spec.diffusion.m;
    let r0 = recs[0].l2 * recs[0].l2;
    let autonomous = spec.forcing.is_autonomous();
    let absorbing = report.enables(Theorem::AbsorbingBall);
    let lyapunov = report.enables(Theorem::LyapunovStructure) && autonomous;
    let rel_tol = options.rel_tol;
    let mut out = Vec::with_capacity(MONITOR_NAMES.len());

    const NO_ABSORB: &str = "absorbing-ball hypotheses do not hold";
    const NO_LYAP: &str = "energy is not a Lyapunov functional for this problem";

    // ‖u(t)‖² ≤ ‖u₀‖² e^{−λ₁mt} + κ₁/(λ₁m)
    let (name, bound) = (MONITOR_NAMES[0], "l2^2 <= l2(0)^2 exp(-lambda1 m t) + kappa1/(lambda1 m)");
    out.push(if absorbing {
        let margins = recs.iter().map(|r| (r.t, r0 * (-rate * (r.t - t0)).exp() + k1 / rate - r.l2 * r.l2)).collect();
        EstimateMonitor::from_margins(name, bound, margins, slack(rel_tol, r0 + k1 / rate))
    } else {
        EstimateMonitor::not_applicable(name, bound, NO_ABSORB)
    });

    // ‖u(t)‖² ≤ 2κ₁/(λ₁m) for t ≥ t₀(‖u₀‖²)
    let t_abs = t0 + spec.absorbing_time(r0);
    let (name, bound) = (MONITOR_NAMES[1], "l2^2 <= 2 kappa1/(lambda1 m) after the absorbing time");
    out.push(if absorbing {
        let ball = 2.0 * k1 / rate;
        let margins = recs.iter().filter(|r| r.t >= t_abs).map(|r| (r.t, ball - r.l2 * r.l2)).collect();
        EstimateMonitor::from_margins(name, bound, margins, slack(rel_tol, ball))
    } else {
        EstimateMonitor::not_applicable(name, bound, NO_ABSORB)
    });

    // ∫_t^{t+1} ‖u‖²_{H¹₀} ≤ κ₁/m + 2κ₁/(λ₁m) for t ≥ t₀
    let (name, bound) = (MONITOR_NAMES[2], "int_t^{t+1} h1^2 <= kappa1/m + 2 kappa1/(lambda1 m)");
    out.push(if absorbing {
        let cap = k1 / m + 2.0 * k1 / rate;
        let cumulative = cumulative_h1(recs);
        let t_last = recs.last().map_or(t0, |r| r.t);
        let margins = recs
            .iter()
            .filter(|r| r.t >= t_abs && r.t + 1.0 <= t_last)
            .map(|r| {
                let window = interp(recs, &cumulative, r.t + 1.0) - interp(recs, &cumulative, r.t);
                (r.t, cap - window)
            })
            .collect();
        EstimateMonitor::from_margins(name, bound, margins, slack(rel_tol, cap))
    } else {
        EstimateMonitor::not_applicable(name, bound, NO_ABSORB)
    });

    // E nonincreasing
    let (name, bound) = (MONITOR_NAMES[3], "E(t_{k+1}) <= E(t_k)");
    out.push(if lyapunov {
        let margins: Vec<(f64, f64)> = recs.windows(2).map(|w| (w[1].t, w[0].energy - w[1].energy)).collect();
        let scale = 1.0 + recs.iter().map(|r| r.energy.abs()).fold(0.0, f64::max);
        EstimateMonitor::from_margins(name, bound, margins, 10.0 * rel_tol * scale)
    } else {
        EstimateMonitor::not_applicable(name, bound, NO_LYAP)
    });

    // E(T) + ∫‖u_t‖² = E(0)
    let (name, bound) = (MONITOR_NAMES[4], "|E(T) - E(0) + int |u_t|^2| = 0");
    out.push(if lyapunov {
        let mut acc = 0.0;
        let margins: Vec<(f64, f64)> = recs
            .iter()
            .map(|r| {
                acc += r.dissipation;
                (r.t, -(acc + r.energy - recs[0].energy).abs())
            })
            .collect();
        let scale = 1.0 + recs[0].energy.abs() + acc;
        EstimateMonitor::from_margins(name, bound, margins, slack(rel_tol, scale))
    } else {
        EstimateMonitor::not_applicable(name, bound, NO_LYAP)
    });

    // E ≥ (m/2)‖u‖²_{H¹₀} + α̃₁‖u‖^p_{L^p} − κ̃|Ω| − ‖h‖‖u‖
    let (name, bound) = (MONITOR_NAMES[5], "E >= (m/2) h1^2 + alpha~1 lp^p - kappa~ L - |h| l2");
    out.push(if autonomous {
        let c = &spec.reaction.constants;
        let hn = spec.forcing_l2_norm();
        let margins: Vec<(f64, f64)> = recs
            .iter()
            .map(|r| {
                let floor =
                    0.5 * m * r.h1 * r.h1 + c.alpha_tilde1 * r.lp.powf(c.p) - c.kappa_tilde * spec.length - hn * r.l2;
                (r.t, r.energy - floor)
            })
            .collect();
        EstimateMonitor::from_margins(name, bound, margins, 1e-8)
    } else {
        EstimateMonitor::not_applicable(name, bound, "energy needs autonomous forcing")
    });

    // sup|u| ≤ M on the tail
    let (name, bound) = (MONITOR_NAMES[6], "grid-max |u| <= (kappa~/alpha~)^(1/p) on the tail");
    out.push(match (report.enables(Theorem::LinfBound) && autonomous, linf_bound_constant(spec)) {
        (true, Ok(big_m)) => {
            let mut scratch = Vec::new();
            let margins = traj
                .tail(options.tail_start)
                .iter()
                .map(|r| (r.t, big_m - grid_max(basis, &r.coefficients, &mut scratch)))
                .collect();
            EstimateMonitor::from_margins(name, bound, margins, options.linf_slack)
        }
        (true, Err(e)) => EstimateMonitor::not_applicable(name, bound, &e.to_string()),
        (false, _) => EstimateMonitor::not_applicable(name, bound, "L-infinity hypotheses do not hold"),
    });

    // ‖Δu‖ stays bounded on the tail: the second half never exceeds 1.5× the first
    let (name, bound) = (MONITOR_NAMES[7], "sup |Lap u| on late tail <= 1.5 sup on early tail");
    out.push(if report.enables(Theorem::H2Bound) {
        let tail = traj.tail(options.tail_start);
        if tail.len() < 2 {
            EstimateMonitor::not_applicable(name, bound, "no records in the monitored window")
        } else {
            let mid = 0.5 * (tail[0].t + tail[tail.len() - 1].t);
            let split = tail.partition_point(|r| r.t < mid).max(1);
            let early = h2_diagnostic(&tail[..split], spec, basis).unwrap_or(f64::NAN);
            let cap = 1.5 * early;
            let margins: Vec<(f64, f64)> =
                tail[split..].iter().map(|r| (r.t, cap - basis.laplacian_squared(&r.coefficients).sqrt())).collect();
            EstimateMonitor::from_margins(name, bound, margins, slack(rel_tol, cap.max(1.0)))
        }
    } else {
        EstimateMonitor::not_applicable(name, bound, "H2 hypotheses do not hold")
    });

    out
}

fn cumulative_h1(recs: &[TrajectoryRecord]) -> Vec<f64> {
    let mut c = Vec::with_capacity(recs.len());
    let mut acc = 0.0;
    c.push(0.0);
    for w in recs.windows(2) {
        acc += 0.5 * (w[0].h1 * w[0].h1 + w[1].h1 * w[1].h1) * (w[1].t - w[0].t);
        c.push(acc);
    }
    c
}

fn interp(recs: &[TrajectoryRecord], values: &[f64], t: f64) -> f64 {
    let k = recs.partition_point(|r| r.t < t);
    if k == 0 {
        return values[0];
    }
    if k >= recs.len() {
        return *values.last().unwrap();
    }
    let (a, b) = (&recs[k - 1], &recs[k]);
    let w = (t - a.t) / (b.t - a.t);
    values[k - 1] * (1.0 - w) + values[k] * w
}
