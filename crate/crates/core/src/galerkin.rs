//! The Galerkin ODE system `γ' = −a(Σλγ²)Λγ + P_n(f(u) + h)`.
//!
//! [`GalerkinSystem`] binds a problem to a basis and owns the projected
//! forcing. Everything that evaluates the nonlinearity goes through it, so the
//! time stepper, the stationary residual and the energy gradient all see the
//! same quadrature.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::problem::ProblemSpec;
use crate::spectral::{BasisError, SpectralBasis, SpectralState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("problem length {spec} differs from basis length {basis}")]
    LengthMismatch { spec: f64, basis: f64 },
    #[error("non-finite reaction f(u) at t = {t}, x = {x}")]
    NonFinite { t: f64, x: f64 },
}

#[derive(Debug, Clone)]
enum ForcingProjection {
    Zero,
    Static(Vec<f64>),
    Dynamic,
}

/// Scratch buffers for one nonlinear evaluation.
#[derive(Debug, Clone)]
pub struct Scratch {
    u: Vec<f64>,
    g: Vec<f64>,
}

impl Scratch {
    pub fn new(basis: &SpectralBasis) -> Self {
        Self { u: vec![0.0; basis.quad_size()], g: vec![0.0; basis.quad_size()] }
    }

    /// Nodal values of the last synthesized state.
    pub fn nodal(&self) -> &[f64] {
        &self.u
    }
}

#[derive(Debug, Clone)]
pub struct GalerkinSystem<'a> {
    pub spec: &'a ProblemSpec,
    pub basis: &'a SpectralBasis,
    forcing: ForcingProjection,
    forcing_nodal: Vec<f64>,
}

impl<'a> GalerkinSystem<'a> {
    pub fn new(spec: &'a ProblemSpec, basis: &'a SpectralBasis) -> Result<Self, SystemError> {
        if (spec.length - basis.length()).abs() > 1e-12 * spec.length {
            return Err(SystemError::LengthMismatch { spec: spec.length, basis: basis.length() });
        }
        let (forcing, forcing_nodal) = if spec.forcing.is_zero() {
            (ForcingProjection::Zero, vec![0.0; basis.quad_size()])
        } else if spec.forcing.is_autonomous() {
            let nodal: Vec<f64> = basis.nodes().iter().map(|&x| spec.forcing.eval(0.0, x)).collect();
            let mut proj = vec![0.0; basis.n_modes()];
            basis.project_into(&nodal, &mut proj);
            (ForcingProjection::Static(proj), nodal)
        } else {
            (ForcingProjection::Dynamic, vec![0.0; basis.quad_size()])
        };
        Ok(Self { spec, basis, forcing, forcing_nodal })
    }

    pub fn n(&self) -> usize {
        self.basis.n_modes()
    }

    pub fn is_autonomous(&self) -> bool {
        !matches!(self.forcing, ForcingProjection::Dynamic)
    }

    /// `h` at the grid nodes (autonomous forcing only; zeros otherwise).
    pub fn forcing_nodal(&self) -> &[f64] {
        &self.forcing_nodal
    }

    /// `a(‖u‖²_{H¹₀})`
    pub fn diffusion_at(&self, coefficients: &[f64]) -> f64 {
        self.spec.diffusion.a(self.basis.h1_squared(coefficients))
    }

    /// `(f(u) + h(t), w_j)` for every mode, into `out`.
    pub fn nonlinear_into(
        &self,
        coefficients: &[f64],
        t: f64,
        scratch: &mut Scratch,
        out: &mut [f64],
    ) -> Result<(), SystemError> {
        let basis = self.basis;
        basis.synthesize_into(coefficients, &mut scratch.u);
        let reaction = &self.spec.reaction;
        let dynamic = matches!(self.forcing, ForcingProjection::Dynamic);
        for (i, (g, &u)) in scratch.g.iter_mut().zip(&scratch.u).enumerate() {
            let mut v = reaction.f(u);
            if dynamic {
                v += self.spec.forcing.eval(t, basis.nodes()[i]);
            }
            if !v.is_finite() {
                return Err(SystemError::NonFinite { t, x: basis.nodes()[i] });
            }
            *g = v;
        }
        basis.project_into(&scratch.g, out);
        if let ForcingProjection::Static(h) = &self.forcing {
            out.iter_mut().zip(h).for_each(|(o, h)| *o += h);
        }
        Ok(())
    }

    /// Time derivative of the coefficients.
    pub fn rhs(&self, coefficients: &[f64], t: f64) -> Result<Vec<f64>, SystemError> {
        self.basis.check_dim(coefficients.len())?;
        let mut out = vec![0.0; self.n()];
        let mut scratch = Scratch::new(self.basis);
        self.nonlinear_into(coefficients, t, &mut scratch, &mut out)?;
        let a = self.diffusion_at(coefficients);
        for ((o, &c), &l) in out.iter_mut().zip(coefficients).zip(self.basis.eigenvalues()) {
            *o -= a * l * c;
        }
        Ok(out)
    }

    /// `G_j = a λ_j γ_j − (f(u), w_j) − (h, w_j)`; equals `−rhs` and `∇E`.
    pub fn stationary_residual(&self, coefficients: &[f64]) -> Result<Vec<f64>, SystemError> {
        let mut g = self.rhs(coefficients, 0.0)?;
        g.iter_mut().for_each(|v| *v = -*v);
        Ok(g)
    }

    /// Jacobian of [`Self::stationary_residual`]:
    /// `a λ_j δ_jk + 2a'(‖u‖²) λ_jγ_j λ_kγ_k − (f'(u) w_k, w_j)`.
    pub fn stationary_jacobian(&self, coefficients: &[f64]) -> Result<DMatrix<f64>, SystemError> {
        let basis = self.basis;
        basis.check_dim(coefficients.len())?;
        let n = self.n();
        let q = basis.quad_size();
        let mut u = vec![0.0; q];
        basis.synthesize_into(coefficients, &mut u);
        let df: Vec<f64> = u.iter().map(|&v| self.spec.reaction.df(v)).collect();
        let s = basis.h1_squared(coefficients);
        let a = self.spec.diffusion.a(s);
        let da = self.spec.diffusion.da(s);
        let lam = basis.eigenvalues();
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let wj = basis.mode(j);
            for k in j..n {
                let wk = basis.mode(k);
                let mut v = -basis.integrate(|i| df[i] * (wj[i] * wk[i]));
                v += 2.0 * da * lam[j] * coefficients[j] * lam[k] * coefficients[k];
                if j == k {
                    v += a * lam[j];
                }
                jac[(j, k)] = v;
                jac[(k, j)] = v;
            }
        }
        Ok(jac)
    }

    pub fn state_rhs(&self, state: &SpectralState) -> Result<Vec<f64>, SystemError> {
        self.rhs(&state.coefficients, state.time)
    }
}

/// Free-function form of [`GalerkinSystem::rhs`] at the state's timestamp.
pub fn rhs(state: &SpectralState, spec: &ProblemSpec, basis: &SpectralBasis) -> Result<Vec<f64>, SystemError> {
    GalerkinSystem::new(spec, basis)?.state_rhs(state)
}
