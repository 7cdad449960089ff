//! Adaptive IMEX integration of the Galerkin system.
//!
//! One step of size `dt` from `γ⁰`:
//!
//! ```text
//! predictor  γ½ = (γ⁰ + dt/2·N(γ⁰)) / (1 + dt/2·a⁰λ)
//! corrector  γ¹ = ((1 − dt/2·aλ)γ⁰ + dt·N(γ½)) / (1 + dt/2·aλ)
//! embedded   γ̂ = (γ⁰ + dt·N(γ⁰)) / (1 + dt·a⁰λ)
//! ```
//!
//! with `N` the projected reaction plus forcing. The corrector is the
//! trapezoid rule on the diffusion and the explicit midpoint rule on the
//! reaction; in fixed-point mode `a` is iterated to `a(‖(γ⁰+γ¹)/2‖²_{H¹₀})`.
//! The step is accepted when `‖γ¹ − γ̂‖ ≤ rel_tol·‖γ‖ + abs_tol`, or that
//! times `dt` under [`ErrorNorm::PerUnitStep`]. Steps are also capped at
//! `1/max|f'(u)|` so the explicit reaction stays well inside its stability
//! interval.

use serde::Serialize;
use thiserror::Error;

use crate::energy::energy_of;
use crate::galerkin::{GalerkinSystem, Scratch, SystemError};
use crate::problem::{validate_assumptions, AssumptionReport, ProblemSpec, SamplingPlan, Theorem};
use crate::spectral::{l2_norm, SpectralBasis, SpectralState};

/// Norm above which a run is declared blown up.
pub const BLOW_UP_NORM: f64 = 1e8;
const FIXED_POINT_TOL: f64 = 1e-10;
const FIXED_POINT_MAX_ITER: usize = 50;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
/// Steps are capped at `REACTION_STABILITY / max|f'(u)|`, well inside the
/// stability interval of the explicit midpoint rule.
const REACTION_STABILITY: f64 = 1.0;

fn reaction_step_cap(sys: &GalerkinSystem<'_>, nodal: &[f64]) -> f64 {
    let stiff = nodal.iter().fold(0.0f64, |m, &u| m.max(sys.spec.reaction.df(u).abs()));
    if stiff > 0.0 {
        REACTION_STABILITY / stiff
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid flow configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("need at least 3 records, got {0}")]
    TooFewRecords(usize),
    #[error("trajectories do not share a basis: {0} vs {1} modes")]
    ModeMismatch(usize, usize),
    #[error("time rescaling under-resolved: halved-resolution discrepancy {estimate:e} exceeds {tol:e}")]
    UnderResolved { estimate: f64, tol: f64 },
    #[error("uniqueness hypotheses do not hold for this problem")]
    MissingUniquenessHypotheses(Box<AssumptionReport>),
    #[error("assumption check failed: {0}")]
    Assumptions(#[from] crate::problem::ProblemError),
}

/// What the embedded error estimate is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNorm {
    /// `err ≤ tol`; step sizes scale like `tol^{1/2}`.
    PerStep,
    /// `err ≤ dt·tol`; step sizes scale like `tol`, so halving the tolerance
    /// halves the steps.
    PerUnitStep,
}

/// How `a(‖u‖²)` is handled inside a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlocalCoefficient {
    /// Evaluated once at the start of the step.
    Frozen,
    /// Iterated against the implicit solve until it settles.
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    pub coefficient: NonlocalCoefficient,
    pub error_norm: ErrorNorm,
    /// Record every this many accepted steps.
    pub record_every: usize,
    /// When set, steps are clipped so a record lands on every multiple.
    pub sample_interval: Option<f64>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            dt_min: 1e-12,
            dt_max: 0.5,
            rel_tol: 1e-4,
            abs_tol: 1e-9,
            t_end: 20.0,
            coefficient: NonlocalCoefficient::FixedPoint,
            error_norm: ErrorNorm::PerStep,
            record_every: 1,
            sample_interval: None,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: String| Err(FlowError::InvalidConfig(m));
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad(format!(
                "need 0 < dt_min ≤ dt_init ≤ dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad(format!("tolerances must be positive, got {} / {}", self.rel_tol, self.abs_tol));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be finite and nonnegative, got {}", self.t_end));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if let Some(s) = self.sample_interval {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("sample_interval must be positive, got {s}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub coefficients: Vec<f64>,
    pub l2: f64,
    pub h1: f64,
    pub lp: f64,
    pub a_value: f64,
    pub energy: f64,
    /// `Σ ‖Δγ‖²/dt` over the steps since the previous record.
    pub dissipation: f64,
}

impl TrajectoryRecord {
    pub fn state(&self) -> SpectralState {
        SpectralState { coefficients: self.coefficients.clone(), time: self.t }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlowFailure {
    StepUnderflow { t: f64, dt: f64, error: f64 },
    BlowUp { t: f64, norm: f64 },
    NonFinite { t: f64, x: f64 },
    NonlocalNotConverged { t: f64, dt: f64 },
}

impl std::fmt::Display for FlowFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FlowFailure::StepUnderflow { t, dt, error } => {
                write!(f, "step size underflow at t = {t} (dt = {dt:e}, error estimate {error:e})")
            }
            FlowFailure::BlowUp { t, norm } => write!(f, "blow-up at t = {t} (norm {norm:e})"),
            FlowFailure::NonFinite { t, x } => write!(f, "non-finite reaction at t = {t}, x = {x}"),
            FlowFailure::NonlocalNotConverged { t, dt } => {
                write!(f, "nonlocal coefficient did not converge at t = {t} (dt = {dt:e})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub failure: Option<FlowFailure>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn last(&self) -> &TrajectoryRecord {
        self.records.last().expect("trajectory always holds its initial record")
    }

    /// Energy-equality residual `|Σ dissipation + E(end) − E(start)|`.
    pub fn energy_balance_residual(&self) -> f64 {
        let first = &self.records[0];
        let diss: f64 = self.records.iter().map(|r| r.dissipation).sum();
        (diss + self.last().energy - first.energy).abs()
    }

    /// Records at or after `t`.
    pub fn tail(&self, t: f64) -> &[TrajectoryRecord] {
        let start = self.records.partition_point(|r| r.t < t);
        &self.records[start..]
    }
}

/// Returned by an observer to stop an integration early.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

struct StepOutcome {
    next: Vec<f64>,
    error: f64,
}

struct Stepper<'s, 'a> {
    sys: &'s GalerkinSystem<'a>,
    mode: NonlocalCoefficient,
    scratch: Scratch,
    half: Vec<f64>,
    n_half: Vec<f64>,
}

impl Stepper<'_, '_> {
    fn step(&mut self, g0: &[f64], n0: &[f64], a0: f64, t: f64, dt: f64) -> Result<StepOutcome, StepFault> {
        let lam = self.sys.basis.eigenvalues();
        for j in 0..g0.len() {
            self.half[j] = (g0[j] + 0.5 * dt * n0[j]) / (1.0 + 0.5 * dt * a0 * lam[j]);
        }
        self.sys
            .nonlinear_into(&self.half, t + 0.5 * dt, &mut self.scratch, &mut self.n_half)
            .map_err(StepFault::System)?;

        let diffusion = &self.sys.spec.diffusion;
        let iterate = self.mode == NonlocalCoefficient::FixedPoint && !diffusion.is_constant();
        let mut a = if iterate { self.sys.diffusion_at(&self.half) } else { a0 };
        let mut next = vec![0.0; g0.len()];
        let mut converged = !iterate;
        for _ in 0..FIXED_POINT_MAX_ITER {
            for j in 0..g0.len() {
                let z = 0.5 * dt * a * lam[j];
                next[j] = ((1.0 - z) * g0[j] + dt * self.n_half[j]) / (1.0 + z);
            }
            if !iterate {
                break;
            }
            let mid_h1: f64 = (0..g0.len())
                .map(|j| {
                    let m = 0.5 * (g0[j] + next[j]);
                    lam[j] * m * m
                })
                .sum();
            let a_new = diffusion.a(mid_h1);
            let settled = (a_new - a).abs() <= FIXED_POINT_TOL * (1.0 + a.abs());
            a = a_new;
            if settled {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(StepFault::NonlocalNotConverged);
        }

        let mut error = 0.0;
        for j in 0..g0.len() {
            let euler = (g0[j] + dt * n0[j]) / (1.0 + dt * a0 * lam[j]);
            error += (next[j] - euler) * (next[j] - euler);
        }
        Ok(StepOutcome { next, error: error.sqrt() })
    }
}

enum StepFault {
    System(SystemError),
    NonlocalNotConverged,
}

fn make_record(
    sys: &GalerkinSystem<'_>,
    scratch: &mut [f64],
    t: f64,
    coefficients: &[f64],
    dissipation: f64,
) -> TrajectoryRecord {
    let basis = sys.basis;
    basis.synthesize_into(coefficients, scratch);
    let h1_sq = basis.h1_squared(coefficients);
    let report = energy_of(sys, coefficients, scratch, h1_sq);
    TrajectoryRecord {
        t,
        coefficients: coefficients.to_vec(),
        l2: l2_norm(coefficients),
        h1: h1_sq.sqrt(),
        lp: basis.lp_from_values(scratch, sys.spec.reaction.p()),
        a_value: sys.spec.diffusion.a(h1_sq),
        energy: report,
        dissipation,
    }
}

/// Integrate from `state0` to `config.t_end`.
pub fn integrate(
    state0: &SpectralState,
    sys: &GalerkinSystem<'_>,
    config: &FlowConfig,
) -> Result<Trajectory, FlowError> {
    integrate_with(state0, sys, config, |_| Control::Continue)
}

/// Integrate, handing every record to `observer`, which may stop the run.
pub fn integrate_with(
    state0: &SpectralState,
    sys: &GalerkinSystem<'_>,
    config: &FlowConfig,
    mut observer: impl FnMut(&TrajectoryRecord) -> Control,
) -> Result<Trajectory, FlowError> {
    config.validate()?;
    sys.basis.check_dim(state0.len()).map_err(SystemError::from)?;
    let n = sys.n();
    let t0 = state0.time;
    let t_end = t0 + config.t_end;
    let mut g = state0.coefficients.clone();
    let mut nodal = vec![0.0; sys.basis.quad_size()];
    let mut traj = Trajectory { records: Vec::new(), failure: None, accepted_steps: 0, rejected_steps: 0 };

    let first = make_record(sys, &mut nodal, t0, &g, 0.0);
    let stop = observer(&first) == Control::Stop;
    traj.records.push(first);
    if stop || config.t_end == 0.0 {
        return Ok(traj);
    }

    let mut stepper = Stepper {
        sys,
        mode: config.coefficient,
        scratch: Scratch::new(sys.basis),
        half: vec![0.0; n],
        n_half: vec![0.0; n],
    };
    let mut n0 = vec![0.0; n];
    if let Err(e) = sys.nonlinear_into(&g, t0, &mut stepper.scratch, &mut n0) {
        return Err(e.into());
    }
    let mut a0 = sys.diffusion_at(&g);
    let mut cap = reaction_step_cap(sys, stepper.scratch.nodal());
    let mut t = t0;
    let mut dt = config.dt_init.min(cap).max(config.dt_min);
    let mut pending_dissipation = 0.0;
    let mut since_record = 0usize;
    let sample = config.sample_interval;
    let next_sample = |t: f64| sample.map(|s| (((t - t0) / s + 1e-9).floor() + 1.0) * s + t0);

    while t < t_end {
        let mut h = dt.min(t_end - t);
        let mut on_sample = false;
        if let Some(ts) = next_sample(t) {
            if ts <= t + h * (1.0 + 1e-12) {
                h = ts - t;
                on_sample = true;
            }
        }
        let lands_on_end = t + h >= t_end * (1.0 - 1e-15) && h >= (t_end - t) * (1.0 - 1e-12);

        let outcome = match stepper.step(&g, &n0, a0, t, h) {
            Ok(o) => o,
            Err(StepFault::System(SystemError::NonFinite { t, x })) => {
                traj.failure = Some(FlowFailure::NonFinite { t, x });
                break;
            }
            Err(StepFault::System(e)) => return Err(e.into()),
            Err(StepFault::NonlocalNotConverged) => {
                if h <= config.dt_min {
                    traj.failure = Some(FlowFailure::NonlocalNotConverged { t, dt: h });
                    break;
                }
                traj.rejected_steps += 1;
                dt = (h * MIN_FACTOR).max(config.dt_min);
                continue;
            }
        };
        let scale = l2_norm(&g).max(l2_norm(&outcome.next));
        let (tol, exponent) = match config.error_norm {
            ErrorNorm::PerStep => (config.rel_tol * scale + config.abs_tol, 0.5),
            ErrorNorm::PerUnitStep => (h * (config.rel_tol * scale + config.abs_tol), 1.0),
        };
        let finite = outcome.error.is_finite() && outcome.next.iter().all(|v| v.is_finite());
        if !finite || outcome.error > tol {
            traj.rejected_steps += 1;
            if h <= config.dt_min * (1.0 + 1e-12) {
                traj.failure = Some(FlowFailure::StepUnderflow { t, dt: h, error: outcome.error });
                break;
            }
            let factor = if finite {
                (SAFETY * (tol / outcome.error).powf(exponent)).clamp(MIN_FACTOR, 1.0)
            } else {
                MIN_FACTOR
            };
            dt = (h * factor).max(config.dt_min);
            continue;
        }

        traj.accepted_steps += 1;
        let step_sq: f64 = g.iter().zip(&outcome.next).map(|(a, b)| (b - a) * (b - a)).sum();
        pending_dissipation += step_sq / h;
        g = outcome.next;
        t = if lands_on_end { t_end } else { t + h };

        let norm = l2_norm(&g).max(sys.basis.h1_squared(&g).sqrt());
        if norm > BLOW_UP_NORM {
            traj.failure = Some(FlowFailure::BlowUp { t, norm });
            break;
        }
        if let Err(e) = sys.nonlinear_into(&g, t, &mut stepper.scratch, &mut n0) {
            match e {
                SystemError::NonFinite { t, x } => {
                    traj.failure = Some(FlowFailure::NonFinite { t, x });
                    break;
                }
                other => return Err(other.into()),
            }
        }
        a0 = sys.diffusion_at(&g);
        cap = reaction_step_cap(sys, stepper.scratch.nodal());

        let factor = if outcome.error > 0.0 {
            (SAFETY * (tol / outcome.error).powf(exponent)).clamp(MIN_FACTOR, MAX_FACTOR)
        } else {
            MAX_FACTOR
        };
        // a clipped step does not shrink the proposal
        let base = if on_sample || lands_on_end { dt.max(h) } else { h };
        dt = (base * factor).min(cap).clamp(config.dt_min, config.dt_max);

        since_record += 1;
        if since_record >= config.record_every || on_sample || t >= t_end {
            let rec = make_record(sys, &mut nodal, t, &g, pending_dissipation);
            pending_dissipation = 0.0;
            since_record = 0;
            let stop = observer(&rec) == Control::Stop;
            traj.records.push(rec);
            if stop {
                break;
            }
        }
    }
    Ok(traj)
}

/// Samples of `w(τ) = u(α⁻¹(τ))` with `α(t) = ∫₀ᵗ a(‖u(s)‖²_{H¹₀}) ds`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledTrajectory {
    pub tau: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `|α_full(T) − α_half(T)| / α_full(T)` from the halved-resolution trapezoid.
    pub alpha_resolution: f64,
}

impl RescaledTrajectory {
    /// `‖w_τ − w_xx − (f(w) + h)/a(‖w‖²)‖_{L²}` at interior samples, with `w_τ`
    /// by three-point finite differences on the (nonuniform) τ grid.
    pub fn residual(&self, sys: &GalerkinSystem<'_>) -> Result<Vec<(f64, f64)>, FlowError> {
        let lam = sys.basis.eigenvalues();
        let n = sys.n();
        let mut scratch = Scratch::new(sys.basis);
        let mut nl = vec![0.0; n];
        let mut out = Vec::with_capacity(self.tau.len().saturating_sub(2));
        for k in 1..self.tau.len() - 1 {
            let (tm, t, tp) = (self.tau[k - 1], self.tau[k], self.tau[k + 1]);
            let (h0, h1) = (t - tm, tp - t);
            let w = &self.states[k];
            sys.nonlinear_into(w, t, &mut scratch, &mut nl)?;
            let a = sys.diffusion_at(w);
            let mut acc = 0.0;
            for j in 0..n {
                let d = -h1 / (h0 * (h0 + h1)) * self.states[k - 1][j]
                    + (h1 - h0) / (h0 * h1) * w[j]
                    + h0 / (h1 * (h0 + h1)) * self.states[k + 1][j];
                let r = d + lam[j] * w[j] - nl[j] / a;
                acc += r * r;
            }
            out.push((t, acc.sqrt()));
        }
        Ok(out)
    }
}

fn trapezoid_alpha(records: &[&TrajectoryRecord]) -> Vec<f64> {
    let mut alpha = Vec::with_capacity(records.len());
    let mut acc = 0.0;
    alpha.push(0.0);
    for w in records.windows(2) {
        acc += 0.5 * (w[0].a_value + w[1].a_value) * (w[1].t - w[0].t);
        alpha.push(acc);
    }
    alpha
}

/// Reparameterize a trajectory by the accumulated diffusion `α(t)`.
///
/// `tol` bounds the relative discrepancy between `α` on all records and on
/// every other record.
pub fn rescale_time(traj: &Trajectory, tol: f64) -> Result<RescaledTrajectory, FlowError> {
    let records = &traj.records;
    if records.len() < 3 {
        return Err(FlowError::TooFewRecords(records.len()));
    }
    let all: Vec<&TrajectoryRecord> = records.iter().collect();
    let alpha = trapezoid_alpha(&all);
    let mut half: Vec<&TrajectoryRecord> = records.iter().step_by(2).collect();
    if (records.len() - 1) % 2 == 1 {
        half.push(records.last().unwrap());
    }
    let coarse = trapezoid_alpha(&half);
    let total = *alpha.last().unwrap();
    let estimate = if total > 0.0 { (total - coarse.last().unwrap()).abs() / total } else { 0.0 };
    if estimate > tol {
        return Err(FlowError::UnderResolved { estimate, tol });
    }
    Ok(RescaledTrajectory {
        tau: alpha,
        states: records.iter().map(|r| r.coefficients.clone()).collect(),
        alpha_resolution: estimate,
    })
}

fn state_at(traj: &Trajectory, t: f64) -> Option<Vec<f64>> {
    let recs = &traj.records;
    let k = recs.partition_point(|r| r.t < t);
    if k < recs.len() && (recs[k].t - t).abs() <= 1e-12 * (1.0 + t.abs()) {
        return Some(recs[k].coefficients.clone());
    }
    if k == 0 || k >= recs.len() {
        return None;
    }
    let (a, b) = (&recs[k - 1], &recs[k]);
    let w = (t - a.t) / (b.t - a.t);
    Some(a.coefficients.iter().zip(&b.coefficients).map(|(x, y)| x * (1.0 - w) + y * w).collect())
}

/// Worst margin of `‖u₀ − v₀‖² e^{2ηt} − ‖u(t) − v(t)‖²` over the records of
/// `u` that fall inside the span of `v` (linear interpolation when the record
/// times differ).
pub fn continuous_dependence(u: &Trajectory, v: &Trajectory, spec: &ProblemSpec) -> Result<f64, FlowError> {
    let report = validate_assumptions(spec, &SamplingPlan::default())?;
    if !report.enables(Theorem::Uniqueness) {
        return Err(FlowError::MissingUniquenessHypotheses(Box::new(report)));
    }
    continuous_dependence_margin(u, v, spec.reaction.eta())
}

/// The margin computation behind [`continuous_dependence`], without the
/// hypothesis check.
pub fn continuous_dependence_margin(u: &Trajectory, v: &Trajectory, eta: f64) -> Result<f64, FlowError> {
    let (nu, nv) = (u.records[0].coefficients.len(), v.records[0].coefficients.len());
    if nu != nv {
        return Err(FlowError::ModeMismatch(nu, nv));
    }
    let t0 = u.records[0].t;
    let d0 = spectral_sq_dist(&u.records[0].coefficients, &v.records[0].coefficients);
    let mut worst = f64::INFINITY;
    for rec in &u.records {
        let Some(other) = state_at(v, rec.t) else { continue };
        let actual = spectral_sq_dist(&rec.coefficients, &other);
        let bound = d0 * (2.0 * eta * (rec.t - t0)).exp();
        worst = worst.min(bound - actual);
    }
    Ok(worst)
}

fn spectral_sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Convenience: integrate on a fresh system.
pub fn integrate_problem(
    state0: &SpectralState,
    spec: &ProblemSpec,
    basis: &SpectralBasis,
    config: &FlowConfig,
) -> Result<Trajectory, FlowError> {
    let sys = GalerkinSystem::new(spec, basis)?;
    integrate(state0, &sys, config)
}
