//! Problem instances and the standing hypotheses they satisfy.
//!
//! A [`ProblemSpec`] bundles the reaction term `f`, the nonlocal diffusion
//! modulator `a`, the forcing `h` and the interval length. Every catalog
//! member carries closed forms for `f`, `f'`, `F = ∫f`, `a`, `a'` and
//! `A = ∫a`, so the energy functional never depends on numerical quadrature
//! of the nonlinearity. [`validate_assumptions`] checks the claimed
//! inequalities on a dense sample and derives which theorems apply.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("split must lie in (0, 1), got {0}")]
    InvalidSplit(f64),
    #[error("invalid diffusion parameters: {0}")]
    InvalidDiffusion(String),
    #[error("invalid reaction parameters: {0}")]
    InvalidReaction(String),
    #[error("invalid forcing: {0}")]
    InvalidForcing(String),
    #[error("domain length must be positive and finite, got {0}")]
    InvalidLength(f64),
    #[error("sampling plan: {0}")]
    InvalidSampling(String),
    #[error("{evaluator} is not finite at s = {sample}")]
    NonFinite { evaluator: &'static str, sample: f64 },
    #[error("the reaction term does not provide the bound required for {0}")]
    MissingBound(&'static str),
}

/// Dissipativity and growth constants of a reaction term.
///
/// `f(s)s ≤ κ − α₁|s|^p`, `f(s)s ≥ −κ − α₂|s|^p`,
/// `−α̃₂|s|^p − κ̃ ≤ F(s) ≤ κ̃ − α̃₁|s|^p`, `f' ≤ η`,
/// `|f(s)| ≤ C(1 + |s|^{p−1})` and `|F(s)| ≤ C̃(1 + |s|^p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipativityConstants {
    pub p: f64,
    pub kappa: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub kappa_tilde: f64,
    pub alpha_tilde1: f64,
    pub alpha_tilde2: f64,
    pub eta: f64,
    pub growth: f64,
    pub growth_tilde: f64,
}

/// Constants for the cubic reaction `f(s) = λs − s³` (p = 4).
///
/// `split` is the fraction of the quartic kept on the right-hand side of the
/// upper dissipativity bound, so `α₁ = split` and `κ = sup(λs² − (1−split)s⁴)`.
pub fn dissipativity_constants(lambda: f64, split: f64) -> Result<DissipativityConstants, ProblemError> {
    if !(split > 0.0 && split < 1.0) {
        return Err(ProblemError::InvalidSplit(split));
    }
    if !lambda.is_finite() {
        return Err(ProblemError::InvalidReaction(format!("lambda = {lambda}")));
    }
    let pos = lambda.max(0.0);
    let neg = (-lambda).max(0.0);
    // sup_x (b x - c x²) = b² / (4c) on x = s² ≥ 0
    let kappa_up = pos * pos / (4.0 * (1.0 - split));
    let kappa_low = neg * neg / (4.0 * split);
    let kappa_tilde_up = (pos / 2.0).powi(2) / (1.0 - split);
    let kappa_tilde_low = (neg / 2.0).powi(2) / split;
    Ok(DissipativityConstants {
        p: 4.0,
        kappa: kappa_up.max(kappa_low),
        alpha1: split,
        alpha2: 1.0 + split,
        kappa_tilde: kappa_tilde_up.max(kappa_tilde_low),
        alpha_tilde1: split / 4.0,
        alpha_tilde2: (1.0 + split) / 4.0,
        eta: lambda,
        growth: lambda.abs() + 1.0,
        growth_tilde: lambda.abs() / 2.0 + 0.25,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[non_exhaustive]
pub enum ReactionKind {
    /// `f(s) = λs − s³`
    Cubic { lambda: f64 },
    /// `f(s) = slope·s` with `slope ≤ 0`
    Linear { slope: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactionTerm {
    pub kind: ReactionKind,
    pub constants: DissipativityConstants,
    /// Whether the one-sided bound `f' ≤ η` is claimed.
    pub claims_derivative_bound: bool,
}

impl ReactionTerm {
    pub fn cubic(lambda: f64, split: f64) -> Result<Self, ProblemError> {
        Ok(Self {
            kind: ReactionKind::Cubic { lambda },
            constants: dissipativity_constants(lambda, split)?,
            claims_derivative_bound: true,
        })
    }

    pub fn linear(slope: f64) -> Result<Self, ProblemError> {
        if !(slope <= 0.0 && slope.is_finite()) {
            return Err(ProblemError::InvalidReaction(format!(
                "linear slope must be finite and nonpositive, got {slope}"
            )));
        }
        let c = -slope;
        Ok(Self {
            kind: ReactionKind::Linear { slope },
            constants: DissipativityConstants {
                p: 2.0,
                kappa: 0.0,
                alpha1: c,
                alpha2: c,
                kappa_tilde: 0.0,
                alpha_tilde1: c / 2.0,
                alpha_tilde2: c / 2.0,
                eta: slope,
                growth: c,
                growth_tilde: c / 2.0,
            },
            claims_derivative_bound: true,
        })
    }

    #[inline]
    pub fn f(&self, s: f64) -> f64 {
        match self.kind {
            ReactionKind::Cubic { lambda } => lambda * s - s * s * s,
            ReactionKind::Linear { slope } => slope * s,
        }
    }

    #[inline]
    pub fn df(&self, s: f64) -> f64 {
        match self.kind {
            ReactionKind::Cubic { lambda } => lambda - 3.0 * s * s,
            ReactionKind::Linear { slope } => slope,
        }
    }

    /// `F(s) = ∫₀ˢ f(r) dr`
    #[inline]
    pub fn antiderivative(&self, s: f64) -> f64 {
        match self.kind {
            ReactionKind::Cubic { lambda } => {
                let s2 = s * s;
                0.5 * lambda * s2 - 0.25 * s2 * s2
            }
            ReactionKind::Linear { slope } => 0.5 * slope * s * s,
        }
    }

    pub fn p(&self) -> f64 {
        self.constants.p
    }

    pub fn eta(&self) -> f64 {
        self.constants.eta
    }

    /// True when `f(−s) = −f(s)` for all `s`.
    pub fn is_odd(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffusionKind {
    /// `a(s) = m`
    Constant { m: f64 },
    /// `a(s) = m + c·s`, `c ≥ 0`
    Affine { m: f64, c: f64 },
    /// `a(s) = m + c·s/(1+s)`, `c > −m`
    Saturating { m: f64, c: f64 },
}

/// Which structural properties of `a` are claimed by the instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DiffusionClaims {
    /// `a(s) ≤ M₁ + M₂s`
    pub linear_growth: bool,
    /// `s ↦ a(s²)s` nondecreasing
    pub monotone_as: bool,
    /// `a' ≥ 0`
    pub aprime_nonneg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionModulator {
    pub kind: DiffusionKind,
    /// Lower bound `m` with `a(s) ≥ m > 0`.
    pub m: f64,
    pub m1: f64,
    pub m2: f64,
    pub claims: DiffusionClaims,
}

impl DiffusionModulator {
    pub fn new(kind: DiffusionKind) -> Result<Self, ProblemError> {
        let bad = |msg: String| Err(ProblemError::InvalidDiffusion(msg));
        let (m, m1, m2, monotone_as, aprime_nonneg) = match kind {
            DiffusionKind::Constant { m } => {
                if !(m > 0.0 && m.is_finite()) {
                    return bad(format!("m must be positive, got {m}"));
                }
                (m, m, 0.0, true, true)
            }
            DiffusionKind::Affine { m, c } => {
                if !(m > 0.0 && m.is_finite()) || !(c >= 0.0 && c.is_finite()) {
                    return bad(format!("affine needs m > 0 and c ≥ 0, got m = {m}, c = {c}"));
                }
                (m, m, c, true, true)
            }
            DiffusionKind::Saturating { m, c } => {
                if !(m > 0.0 && m.is_finite()) || !(c > -m && c.is_finite()) {
                    return bad(format!("saturating needs m > 0 and c > −m, got m = {m}, c = {c}"));
                }
                // d/ds[a(s²)s] = m + c·φ(s²) with max φ = 9/8, so c ≥ −8m/9 keeps it monotone.
                (m + c.min(0.0), m + c.max(0.0), 0.0, c >= -8.0 * m / 9.0, c >= 0.0)
            }
        };
        Ok(Self { kind, m, m1, m2, claims: DiffusionClaims { linear_growth: true, monotone_as, aprime_nonneg } })
    }

    pub fn constant(m: f64) -> Result<Self, ProblemError> {
        Self::new(DiffusionKind::Constant { m })
    }

    pub fn affine(m: f64, c: f64) -> Result<Self, ProblemError> {
        Self::new(DiffusionKind::Affine { m, c })
    }

    pub fn saturating(m: f64, c: f64) -> Result<Self, ProblemError> {
        Self::new(DiffusionKind::Saturating { m, c })
    }

    /// Replace the derived claims, e.g. to build a deliberately false instance.
    pub fn with_claims(mut self, claims: DiffusionClaims) -> Self {
        self.claims = claims;
        self
    }

    #[inline]
    pub fn a(&self, s: f64) -> f64 {
        match self.kind {
            DiffusionKind::Constant { m } => m,
            DiffusionKind::Affine { m, c } => m + c * s,
            DiffusionKind::Saturating { m, c } => m + c * s / (1.0 + s),
        }
    }

    #[inline]
    pub fn da(&self, s: f64) -> f64 {
        match self.kind {
            DiffusionKind::Constant { .. } => 0.0,
            DiffusionKind::Affine { c, .. } => c,
            DiffusionKind::Saturating { c, .. } => c / ((1.0 + s) * (1.0 + s)),
        }
    }

    /// `A(s) = ∫₀ˢ a(r) dr`
    #[inline]
    pub fn antiderivative(&self, s: f64) -> f64 {
        match self.kind {
            DiffusionKind::Constant { m } => m * s,
            DiffusionKind::Affine { m, c } => m * s + 0.5 * c * s * s,
            DiffusionKind::Saturating { m, c } => m * s + c * (s - s.ln_1p()),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, DiffusionKind::Constant { .. })
    }
}

/// Pointwise forcing `h(x)` (optionally `h(t, x)`).
#[derive(Clone)]
pub enum Forcing {
    Zero,
    Constant(f64),
    /// Piecewise-linear interpolant of `(x, h)` samples covering `[0, L]`.
    Samples {
        x: Vec<f64>,
        values: Vec<f64>,
    },
    /// Time-dependent forcing, accepted by the integrator only.
    TimeDependent(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Zero"),
            Forcing::Constant(v) => write!(f, "Constant({v})"),
            Forcing::Samples { x, .. } => write!(f, "Samples({} points)", x.len()),
            Forcing::TimeDependent(_) => write!(f, "TimeDependent(..)"),
        }
    }
}

impl Forcing {
    pub fn samples(x: Vec<f64>, values: Vec<f64>) -> Result<Self, ProblemError> {
        if x.len() != values.len() || x.len() < 2 {
            return Err(ProblemError::InvalidForcing(format!(
                "need at least two (x, h) pairs of equal length, got {} and {}",
                x.len(),
                values.len()
            )));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ProblemError::InvalidForcing("x samples must be strictly increasing".into()));
        }
        if let Some(i) = values.iter().chain(x.iter()).position(|v| !v.is_finite()) {
            return Err(ProblemError::InvalidForcing(format!("non-finite entry at position {i}")));
        }
        Ok(Forcing::Samples { x, values })
    }

    pub fn is_autonomous(&self) -> bool {
        !matches!(self, Forcing::TimeDependent(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Forcing::Zero => true,
            Forcing::Constant(v) => *v == 0.0,
            Forcing::Samples { values, .. } => values.iter().all(|v| *v == 0.0),
            Forcing::TimeDependent(_) => false,
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Constant(v) => *v,
            Forcing::Samples { x: xs, values } => interpolate(xs, values, x),
            Forcing::TimeDependent(h) => h(t, x),
        }
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let k = xs.partition_point(|&v| v <= x) - 1;
    let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] * (1.0 - w) + ys[k + 1] * w
}

/// One instance of `u_t − a(‖u‖²_{H¹₀}) u_xx = f(u) + h` on `(0, L)`, Dirichlet.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub reaction: ReactionTerm,
    pub diffusion: DiffusionModulator,
    pub forcing: Forcing,
    pub length: f64,
}

impl ProblemSpec {
    pub fn new(
        reaction: ReactionTerm,
        diffusion: DiffusionModulator,
        forcing: Forcing,
        length: f64,
    ) -> Result<Self, ProblemError> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(ProblemError::InvalidLength(length));
        }
        if let Forcing::Constant(v) = forcing {
            if !v.is_finite() {
                return Err(ProblemError::InvalidForcing(format!("constant value {v}")));
            }
        }
        let spec = Self { reaction, diffusion, forcing, length };
        let norm = spec.forcing_l2_norm();
        if !norm.is_finite() {
            return Err(ProblemError::InvalidForcing("forcing has no finite L² norm".into()));
        }
        Ok(spec)
    }

    /// The cubic Chafee–Infante-type instance with constant diffusion and no forcing.
    pub fn chafee_infante(lambda: f64, length: f64) -> Result<Self, ProblemError> {
        Self::new(ReactionTerm::cubic(lambda, 0.5)?, DiffusionModulator::constant(1.0)?, Forcing::Zero, length)
    }

    pub fn first_eigenvalue(&self) -> f64 {
        (PI / self.length).powi(2)
    }

    /// `‖h‖_{L²}` at `t = 0`.
    pub fn forcing_l2_norm(&self) -> f64 {
        let l = self.length;
        match &self.forcing {
            Forcing::Zero => 0.0,
            Forcing::Constant(v) => v.abs() * l.sqrt(),
            Forcing::Samples { .. } | Forcing::TimeDependent(_) => {
                // Exact for piecewise-linear data on the breakpoints, trapezoid elsewhere.
                let mut nodes: Vec<f64> = (0..=2048).map(|i| l * i as f64 / 2048.0).collect();
                if let Forcing::Samples { x, .. } = &self.forcing {
                    nodes.extend(x.iter().copied().filter(|v| *v > 0.0 && *v < l));
                    nodes.sort_by(f64::total_cmp);
                    nodes.dedup();
                }
                let mut acc = 0.0;
                for w in nodes.windows(2) {
                    let (a, b) = (self.forcing.eval(0.0, w[0]), self.forcing.eval(0.0, w[1]));
                    acc += (a * a + a * b + b * b) * (w[1] - w[0]) / 3.0;
                }
                acc.sqrt()
            }
        }
    }

    /// `sup |h|`.
    pub fn forcing_sup(&self) -> f64 {
        match &self.forcing {
            Forcing::Zero => 0.0,
            Forcing::Constant(v) => v.abs(),
            Forcing::Samples { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            Forcing::TimeDependent(h) => {
                (0..=2048).map(|i| h(0.0, self.length * i as f64 / 2048.0).abs()).fold(0.0, f64::max)
            }
        }
    }

    /// `κ₁ = 2κ|Ω| + ‖h‖²/(λ₁ m)`.
    pub fn kappa1(&self) -> f64 {
        let h = self.forcing_l2_norm();
        2.0 * self.reaction.constants.kappa * self.length + h * h / (self.first_eigenvalue() * self.diffusion.m)
    }

    /// Radius of the L² absorbing ball: `√(κ₁/(λ₁ m))`.
    pub fn absorbing_radius(&self) -> f64 {
        (self.kappa1() / (self.first_eigenvalue() * self.diffusion.m)).sqrt()
    }

    /// Time after which `‖u‖² ≤ 2κ₁/(λ₁m)` for `‖u₀‖² ≤ r2`.
    pub fn absorbing_time(&self, r2: f64) -> f64 {
        let rate = self.first_eigenvalue() * self.diffusion.m;
        let k1 = self.kappa1();
        if k1 <= 0.0 {
            return if r2 == 0.0 { 0.0 } else { f64::INFINITY };
        }
        ((rate * r2 / k1).ln() / rate).max(0.0)
    }
}

/// Dense sampling plan for the assumption checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPlan {
    /// Characteristic amplitude; reaction samples span `[−10 s_scale, 10 s_scale]`.
    pub s_scale: f64,
    pub points: usize,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self { s_scale: 1.0, points: 401 }
    }
}

impl SamplingPlan {
    fn validate(&self) -> Result<(), ProblemError> {
        if self.points < 100 {
            return Err(ProblemError::InvalidSampling(format!("need at least 100 points, got {}", self.points)));
        }
        if !(self.s_scale > 0.0 && self.s_scale.is_finite()) {
            return Err(ProblemError::InvalidSampling(format!("s_scale = {}", self.s_scale)));
        }
        Ok(())
    }

    fn symmetric(&self) -> Vec<f64> {
        let r = 10.0 * self.s_scale;
        let n = self.points;
        (0..n).map(|i| -r + 2.0 * r * i as f64 / (n - 1) as f64).collect()
    }

    fn nonnegative(&self, max: f64) -> Vec<f64> {
        let n = self.points;
        (0..n).map(|i| max * i as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    /// `a(s) ≥ m > 0`
    DiffusionLowerBound,
    /// `a(s) ≤ M₁ + M₂ s`
    DiffusionLinearGrowth,
    /// `A' = a`
    DiffusionAntiderivative,
    /// `s ↦ a(s²)s` nondecreasing
    MonotoneDiffusionFlux,
    /// `(a(X)X − a(Y)Y)(X − Y) ≥ 0` with `X, Y` squared norms
    MonotoneNormPairing,
    /// `a' ≥ 0`
    DiffusionNondecreasing,
    /// `f(s)s ≤ κ − α₁|s|^p`
    DissipativityUpper,
    /// `f(s)s ≥ −κ − α₂|s|^p`
    DissipativityLower,
    /// `|f(s)| ≤ C(1 + |s|^{p−1})`
    ReactionGrowth,
    /// `F ≤ κ̃ − α̃₁|s|^p`
    AntiderivativeUpper,
    /// `F ≥ −α̃₂|s|^p − κ̃`
    AntiderivativeLower,
    /// `|F(s)| ≤ C̃(1 + |s|^p)`
    AntiderivativeGrowth,
    /// `F' = f`
    ReactionAntiderivative,
    /// `f' ≤ η`
    DerivativeBound,
    /// `s f(s) ≤ F(s) + η s²/2`
    DerivativeBoundIntegrated,
    /// `p ≤ (2n−2)/(n−2)`, vacuous for n = 1
    GrowthExponent,
    /// `h ∈ L²`
    ForcingSquareIntegrable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: Assumption,
    pub claimed: bool,
    pub sampled_check_passed: bool,
    /// Largest `lhs − rhs` seen on the grid; ≤ 0 means the inequality held.
    pub worst_violation: f64,
    pub location: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    RegularExistence,
    StrongExistence,
    Uniqueness,
    AbsorbingBall,
    LinfBound,
    H2Bound,
    LyapunovStructure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub theorems: Vec<Theorem>,
}

impl AssumptionReport {
    pub fn check(&self, name: Assumption) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Claimed and confirmed on the sample.
    pub fn holds(&self, name: Assumption) -> bool {
        self.check(name).is_some_and(|c| c.claimed && c.sampled_check_passed)
    }

    pub fn enables(&self, theorem: Theorem) -> bool {
        self.theorems.contains(&theorem)
    }

    /// A claimed condition failed its sampled check.
    pub fn has_false_claim(&self) -> bool {
        self.checks.iter().any(|c| c.claimed && !c.sampled_check_passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| c.claimed && !c.sampled_check_passed)
    }
}

/// Tolerance on `lhs − rhs` for the exact inequalities.
const EXACT_SLACK: f64 = 1e-12;

struct Worst {
    violation: f64,
    location: f64,
}

impl Worst {
    fn new() -> Self {
        Self { violation: f64::NEG_INFINITY, location: f64::NAN }
    }

    fn push(&mut self, violation: f64, location: f64) {
        if violation > self.violation {
            self.violation = violation;
            self.location = location;
        }
    }
}

fn finite(evaluator: &'static str, value: f64, sample: f64) -> Result<f64, ProblemError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ProblemError::NonFinite { evaluator, sample })
    }
}

fn scan(samples: &[f64], mut violation: impl FnMut(f64) -> Result<f64, ProblemError>) -> Result<Worst, ProblemError> {
    let mut worst = Worst::new();
    for &s in samples {
        worst.push(violation(s)?, s);
    }
    Ok(worst)
}

/// Relative error of the central difference of `g` against `dg` at `s`.
fn derivative_mismatch(g: impl Fn(f64) -> f64, dg: f64, s: f64) -> f64 {
    let h = 1e-4 * (1.0 + s.abs());
    let fd = (g(s + h) - g(s - h)) / (2.0 * h);
    (fd - dg).abs() - 1e-6 * (1.0 + dg.abs()) * (1.0 + s.abs()).powi(2)
}

/// Check every claimed hypothesis of `spec` on the sampling grid.
pub fn validate_assumptions(spec: &ProblemSpec, plan: &SamplingPlan) -> Result<AssumptionReport, ProblemError> {
    plan.validate()?;
    let r = &spec.reaction;
    let d = &spec.diffusion;
    let k = &r.constants;
    let p = k.p;
    let s_grid = plan.symmetric();
    let norm_grid = plan.nonnegative(10.0 * plan.s_scale);
    let a_grid = plan.nonnegative((10.0 * plan.s_scale).powi(2));

    let f = |s: f64| finite("f", r.f(s), s);
    let big_f = |s: f64| finite("F", r.antiderivative(s), s);
    let a = |s: f64| finite("a", d.a(s), s);

    let mut checks = Vec::new();
    let mut push = |name, claimed, w: Worst| {
        checks.push(AssumptionCheck {
            name,
            claimed,
            sampled_check_passed: w.violation <= EXACT_SLACK,
            worst_violation: w.violation,
            location: w.location,
        });
    };

    push(Assumption::DiffusionLowerBound, true, scan(&a_grid, |s| Ok(d.m - a(s)?))?);
    push(Assumption::DiffusionLinearGrowth, d.claims.linear_growth, scan(&a_grid, |s| Ok(a(s)? - (d.m1 + d.m2 * s)))?);
    push(
        Assumption::DiffusionAntiderivative,
        true,
        scan(&a_grid, |s| {
            a(s)?;
            // keep the stencil inside s ≥ 0 where A is defined
            let s = s.max(1e-3);
            finite("A", d.antiderivative(s), s)?;
            Ok(derivative_mismatch(|x| d.antiderivative(x), d.a(s), s))
        })?,
    );
    push(
        Assumption::MonotoneDiffusionFlux,
        d.claims.monotone_as,
        scan(&norm_grid, |x| {
            let fx = a(x * x)? * x;
            let mut worst = f64::NEG_INFINITY;
            for &y in &norm_grid {
                let fy = d.a(y * y) * y;
                worst = worst.max(-(fx - fy) * (x - y));
            }
            Ok(worst)
        })?,
    );
    push(
        Assumption::MonotoneNormPairing,
        d.claims.monotone_as,
        scan(&norm_grid, |x| {
            let xx = x * x;
            let fx = a(xx)? * xx;
            let mut worst = f64::NEG_INFINITY;
            for &y in &norm_grid {
                let yy = y * y;
                worst = worst.max(-(fx - d.a(yy) * yy) * (xx - yy));
            }
            Ok(worst)
        })?,
    );
    push(
        Assumption::DiffusionNondecreasing,
        d.claims.aprime_nonneg,
        scan(&a_grid, |s| Ok(-finite("a'", d.da(s), s)?))?,
    );

    push(
        Assumption::DissipativityUpper,
        true,
        scan(&s_grid, |s| Ok(f(s)? * s - (k.kappa - k.alpha1 * s.abs().powf(p))))?,
    );
    push(
        Assumption::DissipativityLower,
        true,
        scan(&s_grid, |s| Ok(-k.kappa - k.alpha2 * s.abs().powf(p) - f(s)? * s))?,
    );
    push(
        Assumption::ReactionGrowth,
        true,
        scan(&s_grid, |s| Ok(f(s)?.abs() - k.growth * (1.0 + s.abs().powf(p - 1.0))))?,
    );
    push(
        Assumption::AntiderivativeUpper,
        true,
        scan(&s_grid, |s| Ok(big_f(s)? - (k.kappa_tilde - k.alpha_tilde1 * s.abs().powf(p))))?,
    );
    push(
        Assumption::AntiderivativeLower,
        true,
        scan(&s_grid, |s| Ok(-k.alpha_tilde2 * s.abs().powf(p) - k.kappa_tilde - big_f(s)?))?,
    );
    push(
        Assumption::AntiderivativeGrowth,
        true,
        scan(&s_grid, |s| Ok(big_f(s)?.abs() - k.growth_tilde * (1.0 + s.abs().powf(p))))?,
    );
    push(
        Assumption::ReactionAntiderivative,
        true,
        scan(&s_grid, |s| Ok(derivative_mismatch(|x| r.antiderivative(x), f(s)?, s)))?,
    );
    push(
        Assumption::DerivativeBound,
        r.claims_derivative_bound,
        scan(&s_grid, |s| Ok(finite("f'", r.df(s), s)? - k.eta))?,
    );
    push(
        Assumption::DerivativeBoundIntegrated,
        r.claims_derivative_bound,
        scan(&s_grid, |s| Ok(s * f(s)? - (big_f(s)? + 0.5 * k.eta * s * s)))?,
    );
    // n = 1: every p ≥ 2 is admissible
    push(Assumption::GrowthExponent, true, Worst { violation: if p >= 2.0 { 0.0 } else { 2.0 - p }, location: p });
    let h = spec.forcing_l2_norm();
    push(
        Assumption::ForcingSquareIntegrable,
        true,
        Worst { violation: if h.is_finite() { 0.0 } else { f64::INFINITY }, location: 0.0 },
    );

    let report = AssumptionReport { checks, theorems: Vec::new() };
    let theorems = enabled_theorems(&report, spec);
    Ok(AssumptionReport { theorems, ..report })
}

/// Theorems whose hypotheses are all claimed and confirmed.
fn enabled_theorems(report: &AssumptionReport, spec: &ProblemSpec) -> Vec<Theorem> {
    use Assumption::*;
    let holds = |a| report.holds(a);
    let base = holds(DiffusionLowerBound)
        && holds(DissipativityUpper)
        && holds(DissipativityLower)
        && holds(ReactionAntiderivative)
        && holds(DiffusionAntiderivative)
        && holds(ForcingSquareIntegrable);
    let regular = base && holds(DiffusionLinearGrowth);
    let strong = base && (holds(DerivativeBound) || holds(GrowthExponent));
    let uniqueness = regular && holds(DerivativeBound) && holds(MonotoneDiffusionFlux);
    let absorbing = regular && holds(MonotoneDiffusionFlux) && spec.forcing.is_autonomous();
    let mut theorems = Vec::new();
    if regular {
        theorems.push(Theorem::RegularExistence);
    }
    if strong {
        theorems.push(Theorem::StrongExistence);
    }
    if uniqueness {
        theorems.push(Theorem::Uniqueness);
    }
    if absorbing {
        theorems.push(Theorem::AbsorbingBall);
        if spec.reaction.constants.alpha1 > 0.0 {
            theorems.push(Theorem::LinfBound);
        }
        if holds(DiffusionNondecreasing) && holds(DerivativeBound) {
            theorems.push(Theorem::H2Bound);
        }
        theorems.push(Theorem::LyapunovStructure);
    }
    theorems
}
