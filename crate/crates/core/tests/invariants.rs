use std::f64::consts::PI;

use nlrd_core::energy::energy_with;
use nlrd_core::flow::{integrate, FlowConfig};
use nlrd_core::problem::{DiffusionModulator, Forcing, ProblemSpec, ReactionTerm};
use nlrd_core::{GalerkinSystem, SpectralBasis, SpectralState};
use proptest::prelude::*;

fn coefficients(n: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, n)
}

fn diffusion() -> impl Strategy<Value = DiffusionModulator> {
    prop_oneof![
        (0.2..3.0f64).prop_map(|m| DiffusionModulator::constant(m).unwrap()),
        (0.2..3.0f64, 0.0..2.0f64).prop_map(|(m, c)| DiffusionModulator::affine(m, c).unwrap()),
        (0.5..3.0f64, -0.4..2.0f64).prop_map(|(m, c)| DiffusionModulator::saturating(m, c).unwrap()),
    ]
}

fn spec_with(d: DiffusionModulator, lambda: f64, length: f64) -> ProblemSpec {
    ProblemSpec::new(ReactionTerm::cubic(lambda, 0.5).unwrap(), d, Forcing::Constant(0.3), length).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_on_the_grid(g in coefficients(12, 2.0), length in 0.5..5.0f64) {
        let basis = SpectralBasis::with_modes(12, length).unwrap();
        let field = basis.synthesize(&SpectralState::new(g.clone())).unwrap();
        let quad = field.l2_norm();
        let exact = basis.l2(&g);
        prop_assert!((quad - exact).abs() <= 1e-10 * (1.0 + exact));
    }

    #[test]
    fn projection_does_not_increase_the_norm(values in prop::collection::vec(-3.0..3.0f64, 40)) {
        let basis = SpectralBasis::new(8, PI, 40).unwrap();
        let field = nlrd_core::spectral::GridField { basis: &basis, values };
        let p = basis.analyze(&field).unwrap();
        prop_assert!(basis.l2(&p.coefficients) <= field.l2_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn poincare_inequality(g in coefficients(10, 3.0), length in 0.5..5.0f64) {
        let basis = SpectralBasis::with_modes(10, length).unwrap();
        let l2 = basis.l2(&g);
        prop_assert!(basis.h1_squared(&g) >= basis.eigenvalues()[0] * l2 * l2 * (1.0 - 1e-12));
    }

    #[test]
    fn jacobian_is_symmetric(g in coefficients(8, 1.5), d in diffusion(), lambda in -1.0..6.0f64) {
        let spec = spec_with(d, lambda, PI);
        let basis = SpectralBasis::with_modes(8, PI).unwrap();
        let sys = GalerkinSystem::new(&spec, &basis).unwrap();
        let j = sys.stationary_jacobian(&g).unwrap();
        let scale = j.amax();
        for r in 0..8 {
            for c in 0..8 {
                prop_assert!((j[(r, c)] - j[(c, r)]).abs() <= 1e-10 * (1.0 + scale));
            }
        }
    }

    #[test]
    fn residual_is_the_energy_gradient(g in coefficients(6, 1.5), d in diffusion(), lambda in -1.0..6.0f64) {
        let spec = spec_with(d, lambda, 2.0);
        let basis = SpectralBasis::with_modes(6, 2.0).unwrap();
        let sys = GalerkinSystem::new(&spec, &basis).unwrap();
        let grad = sys.stationary_residual(&g).unwrap();
        let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        for k in 0..6 {
            let h = 1e-5;
            let mut up = g.clone();
            let mut down = g.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (energy_with(&sys, &up).unwrap().energy - energy_with(&sys, &down).unwrap().energy) / (2.0 * h);
            prop_assert!((fd - grad[k]).abs() <= 1e-5 * (1.0 + norm), "k = {}: {} vs {}", k, fd, grad[k]);
        }
    }

    #[test]
    fn energy_decays_along_trajectories(g in coefficients(8, 2.0), d in diffusion(), lambda in 0.0..6.0f64) {
        let spec = spec_with(d, lambda, PI);
        let basis = SpectralBasis::with_modes(8, PI).unwrap();
        let sys = GalerkinSystem::new(&spec, &basis).unwrap();
        let cfg = FlowConfig { t_end: 2.0, rel_tol: 1e-4, ..FlowConfig::default() };
        let traj = integrate(&SpectralState::new(g), &sys, &cfg).unwrap();
        prop_assert!(traj.is_complete());
        for w in traj.records.windows(2) {
            let tol = 10.0 * cfg.rel_tol * (1.0 + w[0].energy.abs());
            prop_assert!(w[1].energy <= w[0].energy + tol);
        }
    }

    #[test]
    fn one_sided_derivative_bound_integrates(s in -20.0..20.0f64, lambda in -3.0..8.0f64) {
        // s f(s) ≤ F(s) + η s²/2 with η the derivative bound
        let r = ReactionTerm::cubic(lambda, 0.5).unwrap();
        prop_assert!(s * r.f(s) <= r.antiderivative(s) + 0.5 * r.eta() * s * s + 1e-9 * (1.0 + s.powi(4)));
    }

    #[test]
    fn monotone_norm_pairing(
        d in diffusion(),
        su in 0.0..50.0f64,
        sv in 0.0..50.0f64,
    ) {
        // (a(‖u‖²)‖u‖² − a(‖v‖²)‖v‖²)(‖u‖² − ‖v‖²) ≥ 0, with ‖·‖ the H¹₀ norm
        prop_assume!(d.claims.monotone_as);
        let i = (d.a(su) * su - d.a(sv) * sv) * (su - sv);
        prop_assert!(i >= -1e-12);
        // unsquared form: (a(‖u‖²)‖u‖ − a(‖v‖²)‖v‖)(‖u‖ − ‖v‖) ≥ 0
        let (nu, nv) = (su.sqrt(), sv.sqrt());
        let j = (d.a(su) * nu - d.a(sv) * nv) * (nu - nv);
        prop_assert!(j >= -1e-12);
    }

    #[test]
    fn diffusion_antiderivative_matches_quadrature(d in diffusion(), s in 0.0..40.0f64) {
        let exact = d.antiderivative(s);
        let quad = adaptive_simpson(&|r| d.a(r), 0.0, s, 1e-12, 40);
        prop_assert!((exact - quad).abs() <= 1e-9 * (1.0 + exact.abs()));
    }
}

/// Adaptive Simpson quadrature used as an independent oracle.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn go(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (simpson(f, a, m), simpson(f, m, b));
        if depth == 0 || (l + r - whole).abs() <= 15.0 * tol {
            return l + r + (l + r - whole) / 15.0;
        }
        go(f, a, m, l, 0.5 * tol, depth - 1) + go(f, m, b, r, 0.5 * tol, depth - 1)
    }
    go(f, a, b, simpson(f, a, b), tol, depth)
}
