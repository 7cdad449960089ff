//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;

use nlrd_core::{ProblemSpec, SpectralBasis, SpectralState};

/// The cubic instance with `λ = 2` on `(0, π)` at `n` modes.
pub fn cubic_fixture(n: usize) -> (ProblemSpec, SpectralBasis) {
    let spec = ProblemSpec::chafee_infante(2.0, PI).expect("valid instance");
    let basis = SpectralBasis::with_modes(n, PI).expect("valid basis");
    (spec, basis)
}

/// A smooth state with decaying coefficients `γ_k = (−1)^k / k²`.
pub fn smooth_state(n: usize) -> SpectralState {
    SpectralState::new((1..=n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } / (k * k) as f64).collect())
}
