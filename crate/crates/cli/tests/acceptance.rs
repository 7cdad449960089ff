//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nlrd_core::attractor::{build_graph, verify_structure, ProbeOptions, ShootOptions, StructureVerdict};
use nlrd_core::energy::{attractor_pointwise_check, energy_with, linf_bound_constant, slack};
use nlrd_core::equilibria::{find_all, SearchPlan};
use nlrd_core::flow::continuous_dependence;
use nlrd_core::problem::{
    validate_assumptions, DiffusionClaims, DiffusionModulator, Forcing, ProblemSpec, ReactionTerm, SamplingPlan,
};
use nlrd_core::{integrate, ErrorNorm, FlowConfig, GalerkinSystem, SpectralBasis, SpectralState, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn report(id: usize, title: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    let elapsed = start.elapsed();
    let in_budget = budget.is_none_or(|b| elapsed <= b);
    let pass = o.pass && in_budget;
    let budget_text = budget.map_or(String::new(), |b| format!(" / {:.0}s", b.as_secs_f64()));
    println!(
        "{} [{id}] {title}: {} ({:.2}s{budget_text})",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64()
    );
    pass
}

fn chafee_infante(lambda: f64) -> ProblemSpec {
    ProblemSpec::chafee_infante(lambda, PI).unwrap()
}

/// Ten initial states with `1/k²`-decaying random coefficients and `L²` norm at most 10.
fn random_initial_states(n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..10)
        .map(|_| {
            let raw: Vec<f64> = (1..=n).map(|k| rng.random_range(-1.0..1.0) / (k * k) as f64).collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            let target = 10.0 * rng.random::<f64>().max(0.1);
            raw.into_iter().map(|v| v * target / norm).collect()
        })
        .collect()
}

fn absorbing_runs(rel_tol: f64) -> Vec<Trajectory> {
    let spec = chafee_infante(2.0);
    let basis = SpectralBasis::with_modes(16, PI).unwrap();
    let sys = GalerkinSystem::new(&spec, &basis).unwrap();
    let cfg = FlowConfig { t_end: 30.0, rel_tol, error_norm: ErrorNorm::PerUnitStep, ..FlowConfig::default() };
    random_initial_states(16).into_iter().map(|g| integrate(&SpectralState::new(g), &sys, &cfg).unwrap()).collect()
}

fn criterion_absorbing(runs: &[Trajectory]) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut complete = true;
    for traj in runs {
        complete &= traj.is_complete() && (traj.last().t - 30.0).abs() < 1e-9;
        let r0 = traj.records[0].l2.powi(2);
        for r in &traj.records {
            worst = worst.min(r0 * (-r.t).exp() + 4.0 * PI + 1e-6 - r.l2 * r.l2);
        }
    }
    let max_l2 = runs.iter().map(|t| t.records[0].l2).fold(0.0, f64::max);
    outcome(complete && worst >= 0.0, format!("10 runs to t = 30, max ||u0|| = {max_l2:.3}, worst margin {worst:.3e}"))
}

fn criterion_lyapunov(coarse: &[Trajectory], fine: &[Trajectory], rel_tol: f64) -> Outcome {
    let mut monotone = true;
    for traj in coarse.iter().chain(fine) {
        let scale = traj.records.iter().map(|r| r.energy.abs()).fold(1.0, f64::max);
        let tol_e = slack(rel_tol, scale);
        monotone &= traj.records.windows(2).all(|w| w[1].energy <= w[0].energy + tol_e);
    }
    let ratios: Vec<f64> =
        coarse.iter().zip(fine).map(|(c, f)| c.energy_balance_residual() / f.energy_balance_residual()).collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        monotone && min_ratio >= 3.0,
        format!("energy nonincreasing: {monotone}, min residual ratio at halved rel_tol {min_ratio:.3}"),
    )
}

fn criterion_continuous_dependence() -> Outcome {
    let spec = ProblemSpec::new(
        ReactionTerm::cubic(2.0, 0.5).unwrap(),
        DiffusionModulator::affine(1.0, 1.0).unwrap(),
        Forcing::Zero,
        PI,
    )
    .unwrap();
    let basis = SpectralBasis::with_modes(16, PI).unwrap();
    let sys = GalerkinSystem::new(&spec, &basis).unwrap();
    let mut u0 = vec![0.0; 16];
    u0[0] = 1.2;
    u0[1] = -0.6;
    u0[3] = 0.3;
    let mut v0 = u0.clone();
    v0[0] += 0.6e-3;
    v0[2] -= 0.8e-3;
    let d0 = nlrd_core::spectral::l2_distance(&u0, &v0);
    let cfg = FlowConfig { t_end: 2.0, rel_tol: 1e-8, sample_interval: Some(0.01), ..FlowConfig::default() };
    let u = integrate(&SpectralState::new(u0), &sys, &cfg).unwrap();
    let v = integrate(&SpectralState::new(v0), &sys, &cfg).unwrap();
    // bound 1e−6·e^{4t} + 1e−9 with η = 2
    match continuous_dependence(&u, &v, &spec) {
        Ok(margin) => outcome(
            (d0 - 1e-3).abs() < 1e-15 && margin >= -1e-9 && u.is_complete() && v.is_complete(),
            format!("||u0 - v0|| = {d0:.3e}, worst margin {margin:.3e}"),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

/// Independent two-mode root count for `a ≡ 1`, cubic `λs − s³` on `(0, π)`:
/// cells of the 0.01 grid on `[−3, 3]²` where both components change sign,
/// grouped into connected clusters.
fn two_mode_root_count(lambda: f64) -> usize {
    let (a, b) = (3.0 / (2.0 * PI), 3.0 / PI);
    let g = |x: f64, y: f64| (x * (1.0 - lambda + a * x * x + b * y * y), y * (4.0 - lambda + a * y * y + b * x * x));
    let h = 0.01;
    let n = 600;
    // offset keeps roots off cell corners
    let coord = |i: usize| -3.0 + h * i as f64 + 0.0123 * h;
    let mut marked = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            let c = [
                g(coord(i), coord(j)),
                g(coord(i + 1), coord(j)),
                g(coord(i), coord(j + 1)),
                g(coord(i + 1), coord(j + 1)),
            ];
            let straddles = |vals: [f64; 4]| vals.iter().any(|v| *v <= 0.0) && vals.iter().any(|v| *v >= 0.0);
            marked[i * n + j] = straddles(c.map(|p| p.0)) && straddles(c.map(|p| p.1));
        }
    }
    let mut seen = vec![false; n * n];
    let mut clusters = 0;
    for start in 0..n * n {
        if !marked[start] || seen[start] {
            continue;
        }
        clusters += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(c) = stack.pop() {
            let (i, j) = ((c / n) as i64, (c % n) as i64);
            for di in -1..=1 {
                for dj in -1..=1 {
                    let (p, q) = (i + di, j + dj);
                    if (0..n as i64).contains(&p) && (0..n as i64).contains(&q) {
                        let k = p as usize * n + q as usize;
                        if marked[k] && !seen[k] {
                            seen[k] = true;
                            stack.push(k);
                        }
                    }
                }
            }
        }
    }
    clusters
}

fn criterion_equilibrium_counts() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for (lambda, expected) in [(0.5, 1), (2.0, 3), (5.0, 5)] {
        let spec = chafee_infante(lambda);
        let basis = SpectralBasis::with_modes(16, PI).unwrap();
        let sys = GalerkinSystem::new(&spec, &basis).unwrap();
        let found = find_all(&sys, &SearchPlan::default()).unwrap().len();
        let oracle = two_mode_root_count(lambda);
        pass &= found == expected && oracle == expected;
        details.push(format!("lambda {lambda}: {found} found, oracle {oracle}"));
    }
    // one-mode Galerkin root against √(2π/3)
    let spec = chafee_infante(2.0);
    let one = SpectralBasis::with_modes(1, PI).unwrap();
    let sys = GalerkinSystem::new(&spec, &one).unwrap();
    let set = find_all(&sys, &SearchPlan::default()).unwrap();
    let lead = set.equilibria.iter().map(|e| e.coefficients[0].abs()).fold(0.0, f64::max);
    let analytic = (2.0 * PI / 3.0).sqrt();
    pass &= (lead - analytic).abs() <= 1e-3;
    let basis16 = SpectralBasis::with_modes(16, PI).unwrap();
    let sys16 = GalerkinSystem::new(&spec, &basis16).unwrap();
    let lead16 = find_all(&sys16, &SearchPlan::default())
        .unwrap()
        .equilibria
        .iter()
        .map(|e| e.coefficients[0].abs())
        .fold(0.0, f64::max);
    details.push(format!("one-mode root {lead:.6} vs {analytic:.6} (16-mode leading coefficient {lead16:.6})"));
    outcome(pass, details.join("; "))
}

fn criterion_derivative_oracles() -> Outcome {
    let spec = ProblemSpec::new(
        ReactionTerm::cubic(3.0, 0.5).unwrap(),
        DiffusionModulator::affine(1.0, 0.5).unwrap(),
        Forcing::Constant(0.2),
        PI,
    )
    .unwrap();
    let n = 8;
    let basis = SpectralBasis::with_modes(n, PI).unwrap();
    let sys = GalerkinSystem::new(&spec, &basis).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_j, mut worst_g) = (0.0f64, 0.0f64);
    for _ in 0..5 {
        let g: Vec<f64> = (1..=n).map(|k| rng.random_range(-1.5..1.5) / k as f64).collect();
        let j = sys.stationary_jacobian(&g).unwrap();
        let grad = sys.stationary_residual(&g).unwrap();
        let jscale = j.amax();
        let gscale = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let h = 1e-5;
            let mut up = g.clone();
            let mut down = g.clone();
            up[k] += h;
            down[k] -= h;
            let (ru, rd) = (sys.stationary_residual(&up).unwrap(), sys.stationary_residual(&down).unwrap());
            for r in 0..n {
                worst_j = worst_j.max(((ru[r] - rd[r]) / (2.0 * h) - j[(r, k)]).abs() / jscale);
            }
            let fd = (energy_with(&sys, &up).unwrap().energy - energy_with(&sys, &down).unwrap().energy) / (2.0 * h);
            worst_g = worst_g.max((fd - grad[k]).abs() / gscale);
        }
    }
    outcome(
        worst_j <= 1e-6 && worst_g <= 1e-5,
        format!("jacobian rel err {worst_j:.2e}, gradient rel err {worst_g:.2e}"),
    )
}

struct StructureResults {
    structure: Outcome,
    linf: Outcome,
}

fn criterion_structure() -> StructureResults {
    let mut details = Vec::new();
    let mut pass = true;
    let probe = ProbeOptions::default();
    let shoot = ShootOptions::default();

    let spec = chafee_infante(2.0);
    let basis = SpectralBasis::with_modes(16, PI).unwrap();
    let sys = GalerkinSystem::new(&spec, &basis).unwrap();
    let set = find_all(&sys, &SearchPlan::default()).unwrap();
    let graph = build_graph(&sys, &set, &shoot).unwrap();
    let origin = set.equilibria.iter().find(|e| e.l2() < 1e-8).map(|e| e.id);
    let nonzero: Vec<usize> = set.equilibria.iter().filter(|e| e.l2() >= 1e-8).map(|e| e.id).collect();
    let mut edges: Vec<(usize, usize)> = graph.edges.iter().map(|e| (e.source, e.target)).collect();
    edges.sort_unstable();
    let mut expected: Vec<(usize, usize)> = nonzero.iter().map(|&t| (origin.unwrap_or(usize::MAX), t)).collect();
    expected.sort_unstable();
    let edges_ok = origin.is_some() && nonzero.len() == 2 && edges == expected;
    let report = verify_structure(&graph, &set, &sys, &probe).unwrap();
    let probes_ok = report.probes.iter().all(|p| p.limit.target().is_some_and(|t| nonzero.contains(&t)));
    let dag_ok = graph.is_acyclic() && graph.edges_descend(0.0);
    pass &= edges_ok && probes_ok && dag_ok && report.verdict == StructureVerdict::Pass;
    details.push(format!(
        "lambda 2: edges {edges:?} (expected origin -> both nonzero: {edges_ok}), {} probes all to +-gamma*: {probes_ok}, DAG with descent: {dag_ok}, verdict {:?}",
        report.probes.len(),
        report.verdict
    ));

    // tails on [20, 30] against M = 4^{1/4}
    let m = 4f64.powf(0.25);
    let m_computed = linf_bound_constant(&spec).unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut covered = true;
    for p in &report.probes {
        let recs = &p.trajectory.records;
        covered &= recs.last().is_some_and(|r| r.t >= 30.0 - 1e-9);
        let lo = recs.partition_point(|r| r.t < 20.0);
        let hi = recs.partition_point(|r| r.t <= 30.0 + 1e-9);
        worst = worst.max(attractor_pointwise_check(&recs[lo..hi], &basis, m));
    }
    let linf = outcome(
        covered && worst <= 1e-3 && (m_computed - m).abs() < 1e-9,
        format!("worst tail max|u| - M = {worst:.4} with M = {m:.6} (computed {m_computed:.6})"),
    );

    let spec5 = chafee_infante(5.0);
    let sys5 = GalerkinSystem::new(&spec5, &basis).unwrap();
    let set5 = find_all(&sys5, &SearchPlan::default()).unwrap();
    let graph5 = build_graph(&sys5, &set5, &shoot).unwrap();
    let origin5 = set5.equilibria.iter().find(|e| e.l2() < 1e-8);
    let (deg, unstable) = origin5.map_or((0, usize::MAX), |o| (graph5.out_degree(o.id), o.unstable_count));
    let ok5 = graph5.unresolved.is_empty() && graph5.is_acyclic() && graph5.edges_descend(0.0) && deg == 2 * unstable;
    pass &= ok5;
    details.push(format!(
        "lambda 5: {} edges, {} unresolved, origin out-degree {deg} for {unstable} unstable directions",
        graph5.edges.len(),
        graph5.unresolved.len()
    ));
    StructureResults { structure: outcome(pass, details.join("; ")), linf }
}

fn catalog() -> Vec<(&'static str, ProblemSpec)> {
    let cubic = |l: f64| ReactionTerm::cubic(l, 0.5).unwrap();
    let mk = |r: ReactionTerm, d: DiffusionModulator, h: Forcing| ProblemSpec::new(r, d, h, PI).unwrap();
    vec![
        ("cubic 0.5, constant", chafee_infante(0.5)),
        ("cubic 2, constant", chafee_infante(2.0)),
        ("cubic 5, constant", chafee_infante(5.0)),
        ("cubic 2, affine", mk(cubic(2.0), DiffusionModulator::affine(1.0, 0.5).unwrap(), Forcing::Zero)),
        (
            "cubic 2, saturating up",
            mk(cubic(2.0), DiffusionModulator::saturating(1.0, 1.0).unwrap(), Forcing::Constant(0.3)),
        ),
        ("cubic 2, saturating down", mk(cubic(2.0), DiffusionModulator::saturating(1.0, -0.5).unwrap(), Forcing::Zero)),
        (
            "linear, constant",
            mk(ReactionTerm::linear(-0.5).unwrap(), DiffusionModulator::constant(1.0).unwrap(), Forcing::Zero),
        ),
    ]
}

fn violations() -> Vec<(&'static str, ProblemSpec)> {
    let claims = |monotone_as, aprime_nonneg| DiffusionClaims { linear_growth: true, monotone_as, aprime_nonneg };
    let sat = DiffusionModulator::saturating(1.0, -0.9).unwrap();
    vec![
        (
            "non-monotone a(s^2)s claimed monotone",
            ProblemSpec::new(
                ReactionTerm::cubic(2.0, 0.5).unwrap(),
                sat.clone().with_claims(claims(true, false)),
                Forcing::Zero,
                PI,
            )
            .unwrap(),
        ),
        (
            "decreasing a claimed nondecreasing",
            ProblemSpec::new(
                ReactionTerm::cubic(2.0, 0.5).unwrap(),
                sat.with_claims(claims(false, true)),
                Forcing::Zero,
                PI,
            )
            .unwrap(),
        ),
    ]
}

fn criterion_inequalities() -> Outcome {
    let plan = SamplingPlan::default();
    let mut worst = f64::NEG_INFINITY;
    let mut claimed = 0;
    for (_, spec) in catalog() {
        let r = validate_assumptions(&spec, &plan).unwrap();
        for c in r.checks.iter().filter(|c| c.claimed) {
            claimed += 1;
            worst = worst.max(c.worst_violation);
        }
    }
    let caught = violations().iter().filter(|(_, s)| validate_assumptions(s, &plan).unwrap().has_false_claim()).count();
    outcome(
        worst <= 1e-12 && caught == violations().len(),
        format!(
            "{claimed} claimed checks, worst violation {worst:.2e}; {caught}/{} constructed violations caught",
            violations().len()
        ),
    )
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nlrd")).args(args).output().expect("binary runs")
}

fn config_path(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).display().to_string()
}

fn criterion_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("chafee_infante_lambda2.toml");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let status: Vec<Option<i32>> = [&a, &b]
        .iter()
        .map(|d| run_cli(&["verify", "--config", &cfg, "--out", d.to_str().unwrap(), "--seed", "11"]).status.code())
        .collect();
    let mut names: Vec<String> =
        std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    let identical = names.iter().all(|n| std::fs::read(a.join(n)).ok() == std::fs::read(b.join(n)).ok());
    let violation = run_cli(&[
        "verify",
        "--config",
        &config_path("false_monotone_claim.toml"),
        "--out",
        dir.path().join("v").to_str().unwrap(),
    ]);
    outcome(
        identical && status == [Some(0), Some(0)] && violation.status.code() == Some(1),
        format!(
            "exit codes {status:?}, {} files byte-identical: {identical}; constructed violation exits {:?}",
            names.len(),
            violation.status.code()
        ),
    )
}

fn main() {
    println!("acceptance suite");
    let secs = |s: u64| Some(Duration::from_secs(s));
    let mut all = true;

    let mut coarse = Vec::new();
    all &= report(1, "absorbing bound", secs(10), || {
        coarse = absorbing_runs(1e-3);
        criterion_absorbing(&coarse)
    });
    all &= report(2, "Lyapunov decay and energy equality order", secs(10), || {
        let fine = absorbing_runs(5e-4);
        criterion_lyapunov(&coarse, &fine, 1e-3)
    });
    all &= report(3, "continuous dependence", secs(5), criterion_continuous_dependence);
    all &= report(4, "equilibrium counts", secs(60), criterion_equilibrium_counts);
    all &= report(5, "jacobian and gradient oracles", secs(5), criterion_derivative_oracles);
    let mut linf = None;
    all &= report(6, "connection graph and structure", secs(120), || {
        let r = criterion_structure();
        linf = Some(r.linf);
        r.structure
    });
    all &= report(7, "pointwise attractor bound", None, || linf.take().expect("computed with item 6"));
    all &= report(8, "inequality suite", secs(2), criterion_inequalities);
    all &= report(9, "determinism", None, criterion_determinism);

    if all {
        println!("acceptance: all criteria PASS");
    } else {
        println!("acceptance: FAILURES");
        std::process::exit(1);
    }
}
