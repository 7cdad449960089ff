//! Dirichlet sine basis on `(0, L)` and the grid it is sampled on.
//!
//! The quadrature uses the `Q` interior nodes `x_i = iL/(Q+1)` with uniform
//! weight `L/(Q+1)`. For functions vanishing at both ends this is the
//! trapezoid rule, which integrates every `cos(kπx/L)` with `k < 2(Q+1)`
//! exactly, so with `Q ≥ 4n` the quartic content of the cubic nonlinearity is
//! integrated without aliasing.
//!
//! Tables are filled on the left half of the grid and mirrored with the exact
//! parity `w_k(L − x) = (−1)^{k+1} w_k(x)`; projections sum mirror pairs
//! first. Together these keep states of pure parity (only odd or only even
//! modes) exactly pure under the nonlinear transforms.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("need at least one mode")]
    NoModes,
    #[error("domain length must be positive and finite, got {0}")]
    InvalidLength(f64),
    #[error("quadrature size {quad_size} is below 4 × {n_modes} modes")]
    QuadratureTooSmall { quad_size: usize, n_modes: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone)]
pub struct SpectralBasis {
    n_modes: usize,
    length: f64,
    eigenvalues: Vec<f64>,
    nodes: Vec<f64>,
    weight: f64,
    /// `table[k * Q + i] = w_{k+1}(x_i)`
    table: Vec<f64>,
}

/// Galerkin coefficients `γ` of `u = Σ γ_k w_k` at model time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub coefficients: Vec<f64>,
    pub time: f64,
}

impl SpectralState {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self { coefficients, time: 0.0 }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    pub fn at(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `‖u − v‖_{L²}`, exact in coefficient space.
    pub fn l2_distance(&self, other: &SpectralState) -> f64 {
        l2_distance(&self.coefficients, &other.coefficients)
    }
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn l2_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Nodal values on the quadrature grid of `basis`.
#[derive(Debug, Clone)]
pub struct GridField<'a> {
    pub basis: &'a SpectralBasis,
    pub values: Vec<f64>,
}

impl GridField<'_> {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Quadrature `‖·‖_{L²}` of the nodal values.
    pub fn l2_norm(&self) -> f64 {
        self.basis.integrate(|i| self.values[i] * self.values[i]).sqrt()
    }
}

/// The three norms used throughout: `L²`, `H¹₀` (gradient L²) and `L^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub lp: f64,
}

impl SpectralBasis {
    pub fn new(n_modes: usize, length: f64, quad_size: usize) -> Result<Self, BasisError> {
        if n_modes == 0 {
            return Err(BasisError::NoModes);
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(BasisError::InvalidLength(length));
        }
        if quad_size < 4 * n_modes {
            return Err(BasisError::QuadratureTooSmall { quad_size, n_modes });
        }
        let q = quad_size;
        let h = length / (q + 1) as f64;
        let nodes: Vec<f64> = (1..=q).map(|i| i as f64 * h).collect();
        let eigenvalues = (1..=n_modes).map(|k| (k as f64 * PI / length).powi(2)).collect();
        let scale = (2.0 / length).sqrt();
        let mut table = vec![0.0; n_modes * q];
        for k in 0..n_modes {
            let wave = (k + 1) as f64;
            let even = (k + 1) % 2 == 0;
            let row = &mut table[k * q..(k + 1) * q];
            for i in 0..q / 2 {
                let v = scale * (wave * PI * (i + 1) as f64 / (q + 1) as f64).sin();
                row[i] = v;
                row[q - 1 - i] = if even { -v } else { v };
            }
            if q % 2 == 1 {
                // midpoint: sin(kπ/2)
                row[q / 2] = match (k + 1) % 4 {
                    1 => scale,
                    3 => -scale,
                    _ => 0.0,
                };
            }
        }
        Ok(Self { n_modes, length, eigenvalues, nodes, weight: h, table })
    }

    /// Basis with the default 4× oversampled grid.
    pub fn with_modes(n_modes: usize, length: f64) -> Result<Self, BasisError> {
        Self::new(n_modes, length, 4 * n_modes)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn quad_size(&self) -> usize {
        self.nodes.len()
    }

    /// `λ_k = (kπ/L)²`, `k = 1..n`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// `w_k` sampled on the grid (`k` is zero-based).
    pub fn mode(&self, k: usize) -> &[f64] {
        let q = self.nodes.len();
        &self.table[k * q..(k + 1) * q]
    }

    /// Evaluate `w_k(x)` anywhere (`k` is zero-based).
    pub fn eval_mode(&self, k: usize, x: f64) -> f64 {
        (2.0 / self.length).sqrt() * ((k + 1) as f64 * PI * x / self.length).sin()
    }

    pub fn check_dim(&self, len: usize) -> Result<(), BasisError> {
        if len != self.n_modes {
            return Err(BasisError::DimensionMismatch { expected: self.n_modes, got: len });
        }
        Ok(())
    }

    /// Quadrature of the nodal integrand `g(i)`, summing mirror pairs first.
    pub fn integrate(&self, g: impl Fn(usize) -> f64) -> f64 {
        let q = self.nodes.len();
        let mut acc = 0.0;
        for i in 0..q / 2 {
            acc += g(i) + g(q - 1 - i);
        }
        if q % 2 == 1 {
            acc += g(q / 2);
        }
        acc * self.weight
    }

    /// `u(x_i) = Σ_k γ_k w_k(x_i)` into `out`.
    pub fn synthesize_into(&self, coefficients: &[f64], out: &mut [f64]) {
        let q = self.nodes.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, &c) in coefficients.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &self.table[k * q..(k + 1) * q];
            for (o, w) in out.iter_mut().zip(row) {
                *o += c * w;
            }
        }
    }

    /// `(v, w_k)` by quadrature into `out`.
    pub fn project_into(&self, values: &[f64], out: &mut [f64]) {
        let q = self.nodes.len();
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.table[k * q..(k + 1) * q];
            let mut acc = 0.0;
            for i in 0..q / 2 {
                let j = q - 1 - i;
                acc += values[i] * row[i] + values[j] * row[j];
            }
            if q % 2 == 1 {
                acc += values[q / 2] * row[q / 2];
            }
            *o = acc * self.weight;
        }
    }

    pub fn synthesize(&self, state: &SpectralState) -> Result<GridField<'_>, BasisError> {
        self.check_dim(state.len())?;
        let mut values = vec![0.0; self.nodes.len()];
        self.synthesize_into(&state.coefficients, &mut values);
        Ok(GridField { basis: self, values })
    }

    /// L² projection `P_n` of a grid field onto the span of the basis.
    pub fn analyze(&self, field: &GridField<'_>) -> Result<SpectralState, BasisError> {
        if field.values.len() != self.nodes.len() {
            return Err(BasisError::DimensionMismatch { expected: self.nodes.len(), got: field.values.len() });
        }
        let mut coefficients = vec![0.0; self.n_modes];
        self.project_into(&field.values, &mut coefficients);
        Ok(SpectralState::new(coefficients))
    }

    /// Grid field sampled from a closure `x ↦ g(x)`.
    pub fn sample(&self, g: impl Fn(f64) -> f64) -> GridField<'_> {
        GridField { basis: self, values: self.nodes.iter().map(|&x| g(x)).collect() }
    }

    pub fn l2(&self, coefficients: &[f64]) -> f64 {
        l2_norm(coefficients)
    }

    /// `‖u‖²_{H¹₀} = Σ λ_k γ_k²`
    pub fn h1_squared(&self, coefficients: &[f64]) -> f64 {
        coefficients.iter().zip(&self.eigenvalues).map(|(c, l)| l * c * c).sum()
    }

    /// `‖Δu‖²_{L²} = Σ λ_k² γ_k²`
    pub fn laplacian_squared(&self, coefficients: &[f64]) -> f64 {
        coefficients.iter().zip(&self.eigenvalues).map(|(c, l)| l * l * c * c).sum()
    }

    /// `‖u‖_{L^p}` by quadrature of `|u|^p` on the grid.
    pub fn lp_from_values(&self, values: &[f64], p: f64) -> f64 {
        let integral = if p == 4.0 {
            self.integrate(|i| {
                let v2 = values[i] * values[i];
                v2 * v2
            })
        } else if p == 2.0 {
            self.integrate(|i| values[i] * values[i])
        } else {
            self.integrate(|i| values[i].abs().powf(p))
        };
        integral.powf(1.0 / p)
    }

    pub fn norms(&self, state: &SpectralState, p: f64) -> Result<Norms, BasisError> {
        let field = self.synthesize(state)?;
        Ok(Norms {
            l2: self.l2(&state.coefficients),
            h1: self.h1_squared(&state.coefficients).sqrt(),
            lp: self.lp_from_values(&field.values, p),
        })
    }
}

/// Free-function form of [`SpectralBasis::new`].
pub fn build_basis(n_modes: usize, length: f64, quad_size: usize) -> Result<SpectralBasis, BasisError> {
    SpectralBasis::new(n_modes, length, quad_size)
}
