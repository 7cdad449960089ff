//! Stationary points: damped Newton on the stationary residual, deflation to
//! enumerate several roots, and linearized stability.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::energy::energy_with;
use crate::galerkin::{GalerkinSystem, SystemError};
use crate::spectral::{l2_distance, l2_norm, SpectralState};

/// Eigenvalues of the linearization above this are unstable.
pub const STABILITY_MARGIN: f64 = 1e-7;
/// Roots closer than this in `L²` are the same equilibrium.
pub const DEDUP_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriaError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("invalid search plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Consecutive non-decreasing steps before giving up.
    pub stagnation_steps: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100, max_halvings: 30, stagnation_steps: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonFailureKind {
    Stagnation,
    MaxIterations,
    SingularJacobian,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonFailure {
    pub kind: NewtonFailureKind,
    pub last: Vec<f64>,
    pub residual_l2: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub id: usize,
    pub coefficients: Vec<f64>,
    pub residual_l2: f64,
    pub energy: f64,
    /// Eigenvalues of the linearized flow, sorted descending.
    pub spectrum: Vec<f64>,
    pub unstable_count: usize,
    /// Eigenvalues within `±STABILITY_MARGIN`.
    pub marginal_count: usize,
    /// Unit eigenvectors for the unstable eigenvalues, in spectrum order.
    #[serde(skip)]
    pub unstable_directions: Vec<Vec<f64>>,
}

impl Equilibrium {
    pub fn state(&self) -> SpectralState {
        SpectralState::new(self.coefficients.clone())
    }

    pub fn l2(&self) -> f64 {
        l2_norm(&self.coefficients)
    }

    pub fn is_stable(&self) -> bool {
        self.unstable_count == 0 && self.marginal_count == 0
    }
}

/// Eigen-decomposition of a symmetric matrix, split along the connected
/// components of its exact sparsity pattern. Keeps eigenvectors of
/// block-structured Jacobians (such as pure-parity states) exactly inside
/// their blocks. Eigenvalues are sorted descending.
pub fn symmetric_eigen_blocks(m: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.nrows();
    let mut component = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let id = blocks.len();
        let mut members = vec![start];
        component[start] = id;
        let mut k = 0;
        while k < members.len() {
            let i = members[k];
            for j in 0..n {
                if component[j] == usize::MAX && (m[(i, j)] != 0.0 || m[(j, i)] != 0.0) {
                    component[j] = id;
                    members.push(j);
                }
            }
            k += 1;
        }
        members.sort_unstable();
        blocks.push(members);
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n);
    for members in &blocks {
        let sub = DMatrix::from_fn(members.len(), members.len(), |a, b| m[(members[a], members[b])]);
        let eig = SymmetricEigen::new(sub);
        for (c, &value) in eig.eigenvalues.iter().enumerate() {
            let mut v = vec![0.0; n];
            for (a, &i) in members.iter().enumerate() {
                v[i] = eig.eigenvectors[(a, c)];
            }
            // fix the sign so the largest entry is positive
            let pivot = v.iter().copied().fold(0.0f64, |p, x| if x.abs() > p.abs() { x } else { p });
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            pairs.push((value, v));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs.into_iter().unzip()
}

/// Attach energy and the linearized spectrum to a root.
pub fn classify(sys: &GalerkinSystem<'_>, coefficients: Vec<f64>, id: usize) -> Result<Equilibrium, EquilibriaError> {
    let residual_l2 = l2_norm(&sys.stationary_residual(&coefficients)?);
    let energy = energy_with(sys, &coefficients)
        .map_err(|e| match e {
            crate::energy::DiagnosticError::System(s) => s,
            other => unreachable!("energy only fails on system errors: {other}"),
        })?
        .energy;
    let jac = sys.stationary_jacobian(&coefficients)?;
    let (spectrum, vectors) = symmetric_eigen_blocks(&(-jac));
    let unstable_count = spectrum.iter().filter(|&&v| v > STABILITY_MARGIN).count();
    let marginal_count = spectrum.iter().filter(|&&v| v.abs() <= STABILITY_MARGIN).count();
    let unstable_directions = vectors.into_iter().take(unstable_count).collect();
    Ok(Equilibrium {
        id,
        coefficients,
        residual_l2,
        energy,
        spectrum,
        unstable_count,
        marginal_count,
        unstable_directions,
    })
}

/// Deflation factor `M(γ) = Π (1 + 1/‖γ − z‖²)` and `∇M / M`.
fn deflation(g: &[f64], roots: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let mut factor = 1.0;
    let mut log_grad = vec![0.0; g.len()];
    for z in roots {
        let d2: f64 = g.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        let d2 = d2.max(1e-300);
        let m = 1.0 + 1.0 / d2;
        factor *= m;
        // ∇m/m = −2(γ − z) / (d⁴ m)
        let c = -2.0 / (d2 * d2 * m);
        for ((lg, a), b) in log_grad.iter_mut().zip(g).zip(z) {
            *lg += c * (a - b);
        }
    }
    (factor, log_grad)
}

fn newton_core(
    sys: &GalerkinSystem<'_>,
    seed: &[f64],
    options: &NewtonOptions,
    deflate: &[Vec<f64>],
) -> Result<Vec<f64>, NewtonFailure> {
    let fail = |kind, last: &[f64], residual_l2, iterations| NewtonFailure {
        kind,
        last: last.to_vec(),
        residual_l2,
        iterations,
    };
    let merit = |g: &[f64]| -> Option<(Vec<f64>, f64)> {
        let r = sys.stationary_residual(g).ok()?;
        let norm = l2_norm(&r) * if deflate.is_empty() { 1.0 } else { deflation(g, deflate).0 };
        norm.is_finite().then_some((r, norm))
    };
    let mut x = seed.to_vec();
    let Some((mut res, mut norm)) = merit(&x) else {
        return Err(fail(NewtonFailureKind::NonFinite, &x, f64::NAN, 0));
    };
    let mut stalled = 0;
    for iter in 0..options.max_iter {
        if l2_norm(&res) <= options.tol {
            return Ok(x);
        }
        let Ok(mut jac) = sys.stationary_jacobian(&x) else {
            return Err(fail(NewtonFailureKind::NonFinite, &x, l2_norm(&res), iter));
        };
        if !deflate.is_empty() {
            // (MJ + G∇Mᵀ)δ = −MG  ⇔  (J + G(∇M/M)ᵀ)δ = −G
            let (_, lg) = deflation(&x, deflate);
            for i in 0..x.len() {
                for j in 0..x.len() {
                    jac[(i, j)] += res[i] * lg[j];
                }
            }
        }
        let rhs = DVector::from_iterator(x.len(), res.iter().map(|v| -v));
        let Some(step) = jac.lu().solve(&rhs) else {
            return Err(fail(NewtonFailureKind::SingularJacobian, &x, l2_norm(&res), iter));
        };
        if step.iter().any(|v| !v.is_finite()) {
            return Err(fail(NewtonFailureKind::SingularJacobian, &x, l2_norm(&res), iter));
        }
        let mut t = 1.0;
        let mut accepted = None;
        let mut fallback = None;
        for _ in 0..=options.max_halvings {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            if let Some((r, n)) = merit(&trial) {
                if n < norm {
                    accepted = Some((trial, r, n));
                    break;
                }
                fallback = Some((trial, r, n));
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, r, n)) => {
                stalled = 0;
                x = trial;
                res = r;
                norm = n;
            }
            None => {
                stalled += 1;
                if stalled >= options.stagnation_steps {
                    return Err(fail(NewtonFailureKind::Stagnation, &x, l2_norm(&res), iter + 1));
                }
                match fallback {
                    Some((trial, r, n)) => {
                        x = trial;
                        res = r;
                        norm = n;
                    }
                    None => return Err(fail(NewtonFailureKind::NonFinite, &x, l2_norm(&res), iter + 1)),
                }
            }
        }
    }
    if l2_norm(&res) <= options.tol {
        return Ok(x);
    }
    Err(fail(NewtonFailureKind::MaxIterations, &x, l2_norm(&res), options.max_iter))
}

/// Damped Newton from `seed`; the result carries its spectrum.
pub fn newton_solve(
    sys: &GalerkinSystem<'_>,
    seed: &[f64],
    options: &NewtonOptions,
) -> Result<Result<Equilibrium, NewtonFailure>, EquilibriaError> {
    sys.basis.check_dim(seed.len()).map_err(SystemError::from)?;
    match newton_core(sys, seed, options, &[]) {
        Ok(root) => Ok(Ok(classify(sys, root, 0)?)),
        Err(f) => Ok(Err(f)),
    }
}

/// Newton on the deflated residual, then polished without deflation.
pub fn deflated_newton(
    sys: &GalerkinSystem<'_>,
    seed: &[f64],
    known: &[Vec<f64>],
    options: &NewtonOptions,
) -> Result<Vec<f64>, NewtonFailure> {
    let rough = newton_core(sys, seed, options, known)?;
    newton_core(sys, &rough, options, &[])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchPlan {
    /// Seeds live in the span of the first `seed_modes` modes.
    pub seed_modes: usize,
    pub amplitudes: Vec<f64>,
    pub deflation_rounds: usize,
    pub newton: NewtonOptions,
    pub dedup_tol: f64,
}

impl Default for SearchPlan {
    fn default() -> Self {
        Self {
            seed_modes: 2,
            amplitudes: vec![0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0],
            deflation_rounds: 2,
            newton: NewtonOptions::default(),
            dedup_tol: DEDUP_TOL,
        }
    }
}

impl SearchPlan {
    pub fn seeds(&self, n: usize) -> Vec<Vec<f64>> {
        let k = self.seed_modes.min(n);
        let mut seeds = vec![vec![0.0; n]];
        for mode in 0..k {
            let mut next = Vec::with_capacity(seeds.len() * self.amplitudes.len());
            for s in &seeds {
                for &a in &self.amplitudes {
                    let mut v = s.clone();
                    v[mode] = a;
                    next.push(v);
                }
            }
            seeds = next;
        }
        seeds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSet {
    pub equilibria: Vec<Equilibrium>,
    pub seeds_used: usize,
    pub deflation_rounds: usize,
    /// Roots found only by deflation.
    pub found_by_deflation: usize,
    pub newton_failures: usize,
}

impl EquilibriumSet {
    pub fn len(&self) -> usize {
        self.equilibria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equilibria.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Equilibrium> {
        self.equilibria.iter().find(|e| e.id == id)
    }

    /// Index of the member within `tol` of `coefficients`, if any.
    pub fn nearest(&self, coefficients: &[f64]) -> Option<(usize, f64)> {
        self.equilibria
            .iter()
            .map(|e| (e.id, l2_distance(&e.coefficients, coefficients)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Sort by energy (ties within `1e−9` relative broken by the first
    /// coefficient, larger first) and renumber.
    fn canonicalize(&mut self) {
        let eq = &mut self.equilibria;
        eq.sort_by(|a, b| a.energy.total_cmp(&b.energy));
        let mut start = 0;
        while start < eq.len() {
            let mut end = start + 1;
            while end < eq.len() && (eq[end].energy - eq[start].energy).abs() <= 1e-9 * (1.0 + eq[start].energy.abs()) {
                end += 1;
            }
            eq[start..end].sort_by(|a, b| {
                b.coefficients
                    .iter()
                    .zip(&a.coefficients)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            start = end;
        }
        for (i, e) in eq.iter_mut().enumerate() {
            e.id = i;
        }
    }
}

fn merge(found: &mut Vec<Vec<f64>>, root: Vec<f64>, tol: f64) -> bool {
    if found.iter().any(|z| l2_distance(z, &root) <= tol) {
        return false;
    }
    found.push(root);
    true
}

/// Run Newton from every seed, then deflation rounds from the same seeds.
/// Seeds are solved in parallel; results are merged in seed order.
pub fn find_all(sys: &GalerkinSystem<'_>, plan: &SearchPlan) -> Result<EquilibriumSet, EquilibriaError> {
    if plan.amplitudes.is_empty() || plan.seed_modes == 0 {
        return Err(EquilibriaError::InvalidPlan("need at least one seed mode and amplitude".into()));
    }
    if !(plan.dedup_tol > 0.0) {
        return Err(EquilibriaError::InvalidPlan(format!("dedup_tol must be positive, got {}", plan.dedup_tol)));
    }
    let seeds = plan.seeds(sys.n());
    let mut failures = 0;
    let mut roots: Vec<Vec<f64>> = Vec::new();
    let plain: Vec<_> = seeds.par_iter().map(|s| newton_core(sys, s, &plan.newton, &[])).collect();
    for r in plain {
        match r {
            Ok(root) => {
                merge(&mut roots, root, plan.dedup_tol);
            }
            Err(_) => failures += 1,
        }
    }
    let mut from_deflation = 0;
    let mut rounds = 0;
    for _ in 0..plan.deflation_rounds {
        rounds += 1;
        let known = roots.clone();
        let deflated: Vec<_> = seeds.par_iter().map(|s| deflated_newton(sys, s, &known, &plan.newton)).collect();
        let mut new = 0;
        for r in deflated.into_iter().flatten() {
            if merge(&mut roots, r, plan.dedup_tol) {
                new += 1;
            }
        }
        from_deflation += new;
        if new == 0 {
            break;
        }
    }
    let equilibria = roots.into_par_iter().map(|r| classify(sys, r, 0)).collect::<Result<Vec<_>, _>>()?;
    let mut set = EquilibriumSet {
        equilibria,
        seeds_used: seeds.len(),
        deflation_rounds: rounds,
        found_by_deflation: from_deflation,
        newton_failures: failures,
    };
    set.canonicalize();
    Ok(set)
}
