//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Oracles are independent of the solver paths they check: the
//! transport profile is verified by brute-force curve enumeration on a
//! coarse grid, and the quadratic-cost profile comes from one-dimensional
//! minimization in closed form, cross-checked against the direct formula
//! on a refined mesh.

use hjgraph_core::config::{
    graph_from_json, FunctionSpec, GridParams, HamiltonianConfig, Problem, Route, SolvedCase,
};
use hjgraph_core::func::SpatialFn;
use hjgraph_core::graph::{sample_mesh, MetricGraph, Point};
use hjgraph_core::hamiltonian::{
    audit_assumptions, legendre_h_back, AuditSamples, HamiltonianSpec, LagrangianView, TabulatedH,
};
use hjgraph_core::solver::{
    dpp_residual_eikonal, dpp_residual_general, hopflax_direct, SolveConfig,
};
use hjgraph_core::verify::{
    check_bounds, check_initial_layer, comparison_experiment, convergence_study, curve_residual,
    monge_verdict, random_grid_samples, Oracle,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use std::time::Instant;

const SEGMENT_JSON: &str = r#"{
    "vertices": ["a", "b"],
    "edges": [{ "u": "a", "v": "b", "len": 1.0 }]
}"#;

const STAR_JSON: &str = r#"{
    "vertices": ["c", "l0", "l1", "l2"],
    "edges": [
        { "u": "c", "v": "l0", "len": 1.0 },
        { "u": "c", "v": "l1", "len": 1.0 },
        { "u": "c", "v": "l2", "len": 1.0 }
    ]
}"#;

fn verdict_line(criterion: usize, pass: bool, detail: &str) {
    eprintln!(
        "criterion {criterion:2}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn grid(n: usize) -> GridParams {
    GridParams {
        h: 1.0 / n as f64,
        dt: 1.0 / n as f64,
        t_horizon: 1.0,
    }
}

fn transport_problem() -> Problem {
    let g = graph_from_json(SEGMENT_JSON).unwrap();
    let ham = HamiltonianConfig {
        form: "eikonal".into(),
        alpha: None,
        a: None,
        b: None,
        f: Some(FunctionSpec::Const(0.0)),
        p: None,
        values: None,
        t_horizon: None,
    };
    let spec = ham.to_spec(&g, 1.0).unwrap();
    Problem::from_parts(
        g,
        spec,
        SpatialFn::parse("x").unwrap(),
        None,
        &AuditSamples::default(),
    )
    .unwrap()
}

fn quadratic_problem() -> Problem {
    let g = graph_from_json(SEGMENT_JSON).unwrap();
    let ham = HamiltonianConfig {
        form: "power".into(),
        alpha: Some(2.0),
        a: Some(FunctionSpec::Const(1.0)),
        b: None,
        f: Some(FunctionSpec::Const(0.0)),
        p: None,
        values: None,
        t_horizon: None,
    };
    let spec = ham.to_spec(&g, 1.0).unwrap();
    Problem::from_parts(
        g,
        spec,
        SpatialFn::parse("abs(x - 0.5)").unwrap(),
        None,
        &AuditSamples::default(),
    )
    .unwrap()
}

fn star_problem() -> Problem {
    let g = graph_from_json(STAR_JSON).unwrap();
    let ham = HamiltonianConfig {
        form: "eikonal".into(),
        alpha: None,
        a: None,
        b: None,
        f: Some(FunctionSpec::Formula("0.5 + 0.25*x".into())),
        p: None,
        values: None,
        t_horizon: None,
    };
    let spec = ham.to_spec(&g, 1.0).unwrap();
    Problem::from_parts(
        g,
        spec,
        SpatialFn::parse("0.3*x").unwrap(),
        None,
        &AuditSamples::default(),
    )
    .unwrap()
}

fn offset(g: &MetricGraph, p: &Point) -> f64 {
    g.edge_coords(p).unwrap().1
}

/// Exact solution of the transport problem: the initial profile `x` eaten
/// at unit speed from the left.
fn transport_oracle(g: &MetricGraph, p: &Point, t: f64) -> f64 {
    (offset(g, p) - t).max(0.0)
}

/// Exact solution of the quadratic-cost problem by one-dimensional
/// minimization: per convex branch of `|y - 1/2| + (x - y)^2 / (4 t)` the
/// interior stationary point is clamped to its branch, and the kink and
/// domain boundaries complete the candidate set.
fn quadratic_oracle(x: f64, t: f64) -> f64 {
    if t == 0.0 {
        return (x - 0.5).abs();
    }
    let obj = |y: f64| (y - 0.5).abs() + (x - y) * (x - y) / (4.0 * t);
    let candidates = [
        (x - 2.0 * t).clamp(0.5, 1.0),
        (x + 2.0 * t).clamp(0.0, 0.5),
        0.5,
        0.0,
        1.0,
    ];
    candidates.iter().map(|&y| obj(y)).fold(f64::INFINITY, f64::min)
}

fn max_error_against<F>(case: &SolvedCase, g: &MetricGraph, oracle: F) -> f64
where
    F: Fn(&MetricGraph, &Point, f64) -> f64,
{
    let field = case.field();
    let mut worst = 0.0f64;
    for i in 0..case.grid.n_slices() {
        let t = case.grid.time(i);
        for (j, p) in case.mesh.points.iter().enumerate() {
            worst = worst.max((field.value(i, j) - oracle(g, p, t)).abs());
        }
    }
    worst
}

#[test]
fn criterion_01_transport_oracle() {
    // Oracle verification: enumerate every unit-speed move sequence on a
    // coarse grid and compare the resulting minimum with the closed form.
    let n_coarse = 10usize;
    let offsets: Vec<f64> = (0..=n_coarse).map(|j| j as f64 / n_coarse as f64).collect();
    fn brute(offsets: &[f64], j: usize, depth: usize) -> f64 {
        if depth == 0 {
            return offsets[j];
        }
        let mut best = f64::INFINITY;
        let lo = j.saturating_sub(1);
        let hi = (j + 1).min(offsets.len() - 1);
        for nj in lo..=hi {
            best = best.min(brute(offsets, nj, depth - 1));
        }
        best
    }
    for j in 0..=n_coarse {
        for depth in 0..=4usize {
            let t = depth as f64 / n_coarse as f64;
            let expect = (offsets[j] - t).max(0.0);
            let got = brute(&offsets, j, depth);
            assert!(
                (got - expect).abs() <= 1e-12,
                "brute-force enumeration disagrees with the closed form at j = {j}, depth = {depth}"
            );
        }
    }

    let problem = transport_problem();
    let start = Instant::now();
    let case = SolvedCase::solve(&problem, grid(200), SolveConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let worst = max_error_against(&case, &problem.graph, transport_oracle);
    let tol = 2.0 * (case.params.h + case.params.dt);
    let pass = worst <= tol && elapsed.as_secs_f64() < 10.0;
    verdict_line(
        1,
        pass,
        &format!("max error {worst:.3e} <= {tol} in {elapsed:?}"),
    );
    assert!(worst <= tol, "max error {worst} exceeds {tol}");
    assert!(elapsed.as_secs_f64() < 10.0, "solve took {elapsed:?}");
}

#[test]
fn criterion_02_quadratic_oracle() {
    let problem = quadratic_problem();

    // The closed-form minimization agrees with the direct formula on a
    // refined mesh.
    let fine = sample_mesh(&problem.graph, 1.0 / 1600.0).unwrap();
    for &x in &[0.1, 0.31, 0.5, 0.66, 0.9] {
        for &t in &[0.05, 0.25, 0.6, 0.95] {
            let p = Point::on_edge(0, x);
            let direct = hopflax_direct(&problem.view, &problem.graph, &fine, &problem.u0, &p, t)
                .unwrap();
            let closed = quadratic_oracle(x, t);
            assert!(
                (direct - closed).abs() <= 2e-3,
                "direct formula {direct} vs closed form {closed} at ({x}, {t})"
            );
        }
    }

    let start = Instant::now();
    let case = SolvedCase::solve(&problem, grid(200), SolveConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let worst = max_error_against(&case, &problem.graph, |g, p, t| {
        quadratic_oracle(offset(g, p), t)
    });
    let pass = worst <= 0.02 && elapsed.as_secs_f64() < 30.0;
    verdict_line(
        2,
        pass,
        &format!("max error {worst:.3e} <= 0.02 in {elapsed:?}"),
    );
    assert!(worst <= 0.02, "max error {worst} exceeds 0.02");
    assert!(elapsed.as_secs_f64() < 30.0, "solve took {elapsed:?}");
}

#[test]
fn criterion_03_convergence_rates() {
    let grids = [grid(50), grid(100), grid(200)];

    let problem = transport_problem();
    let oracle = Oracle::Closed(Arc::new(transport_oracle));
    let table = convergence_study(&problem, &oracle, &grids, SolveConfig::default()).unwrap();
    let transport_ok = match table.rate {
        None => table.rows.iter().all(|r| r.max_error <= 1e-12),
        Some(rate) => rate >= 0.8,
    };
    let transport_desc = match table.rate {
        None => "transport exact on every grid".to_string(),
        Some(rate) => format!("transport rate {rate:.3}"),
    };

    let problem = quadratic_problem();
    let oracle = Oracle::Closed(Arc::new(|g: &MetricGraph, p: &Point, t: f64| {
        quadratic_oracle(offset(g, p), t)
    }));
    let table2 = convergence_study(&problem, &oracle, &grids, SolveConfig::default()).unwrap();
    let rate2 = table2.rate.expect("quadratic problem has nonzero errors");

    let pass = transport_ok && rate2 >= 0.8;
    verdict_line(
        3,
        pass,
        &format!("{transport_desc}; quadratic rate {rate2:.3}"),
    );
    assert!(transport_ok, "{transport_desc}; rows {:?}", table.rows);
    assert!(rate2 >= 0.8, "quadratic rate {rate2} below 0.8; rows {:?}", table2.rows);
}

#[test]
fn criterion_04_monge_certification() {
    let grids = [grid(50), grid(100), grid(200)];
    let mut pass = true;
    let mut detail = String::new();
    for (name, problem) in [
        ("transport", transport_problem()),
        ("quadratic", quadratic_problem()),
    ] {
        let mut medians = Vec::new();
        let mut maxima = Vec::new();
        for params in &grids {
            let case = SolvedCase::solve(&problem, *params, SolveConfig::default()).unwrap();
            let (verdict, residuals) = monge_verdict(&problem, &case, 0.1, 0.3).unwrap();
            pass &= verdict.pass;
            medians.push(residuals.aggregate.median_abs);
            maxima.push(residuals.aggregate.max_abs);
        }
        for w in medians.windows(2) {
            pass &= w[1] <= w[0] + 1e-12;
        }
        for w in maxima.windows(2) {
            pass &= w[1] <= w[0] + 1e-12;
        }
        let fmt = |v: &[f64]| {
            v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ")
        };
        detail.push_str(&format!(
            "{name} medians [{}] maxima [{}]; ",
            fmt(&medians),
            fmt(&maxima)
        ));
        assert!(
            medians.iter().all(|&m| m <= 0.1),
            "{name} medians {medians:?}"
        );
        assert!(maxima.iter().all(|&m| m <= 0.3), "{name} maxima {maxima:?}");
        assert!(
            medians.windows(2).all(|w| w[1] <= w[0] + 1e-12),
            "{name} medians not shrinking: {medians:?}"
        );
        assert!(
            maxima.windows(2).all(|w| w[1] <= w[0] + 1e-12),
            "{name} maxima not shrinking: {maxima:?}"
        );
    }
    verdict_line(4, pass, detail.trim_end_matches("; "));
    assert!(pass);
}

#[test]
fn criterion_05_bound_sandwiches() {
    let mut pass = true;
    // Quadratic problem: L0 = 0, so inf u0 <= u <= u0 exactly.
    let problem = quadratic_problem();
    let case = SolvedCase::solve(&problem, grid(100), SolveConfig::default()).unwrap();
    let rep = check_bounds(&problem, &case);
    pass &= rep.pass;
    assert!(rep.pass, "quadratic sandwich: {:?}", rep.witnesses);

    // Eikonal problems: sup |u| <= sup |u0| + T sup |f| exactly.
    for problem in [transport_problem(), star_problem()] {
        let case = SolvedCase::solve(&problem, grid(100), SolveConfig::default()).unwrap();
        let rep = check_bounds(&problem, &case);
        pass &= rep.pass;
        assert!(rep.pass, "eikonal bound: {:?}", rep.witnesses);
    }

    // Unit forcing from zero data grows exactly linearly, inside T sup|f|.
    let g = graph_from_json(SEGMENT_JSON).unwrap();
    let ham = HamiltonianConfig {
        form: "eikonal".into(),
        alpha: None,
        a: None,
        b: None,
        f: Some(FunctionSpec::Const(1.0)),
        p: None,
        values: None,
        t_horizon: None,
    };
    let spec = ham.to_spec(&g, 1.0).unwrap();
    let problem =
        Problem::from_parts(g, spec, SpatialFn::constant(0.0), None, &AuditSamples::default())
            .unwrap();
    let case = SolvedCase::solve(&problem, grid(100), SolveConfig::default()).unwrap();
    let rep = check_bounds(&problem, &case);
    pass &= rep.pass;
    assert!(rep.pass, "forced growth bound: {:?}", rep.witnesses);

    verdict_line(5, pass, "sandwiches hold with no tolerance on all four problems");
    assert!(pass);
}

#[test]
fn criterion_06_initial_layer() {
    let mut pass = true;
    let mut detail = String::new();
    for (name, problem) in [
        ("transport", transport_problem()),
        ("quadratic", quadratic_problem()),
        ("star", star_problem()),
    ] {
        let case = SolvedCase::solve(&problem, grid(100), SolveConfig::default()).unwrap();
        let rep = check_initial_layer(&problem, &case);
        pass &= rep.pass;
        detail.push_str(&format!(
            "{name} K_meas {:.3} <= 1.5 K_pred {:.3}; ",
            rep.measurements["k_meas"].as_f64().unwrap(),
            rep.measurements["k_pred"].as_f64().unwrap()
        ));
        assert!(rep.pass, "{name}: {:?}", rep.witnesses);
    }
    verdict_line(6, pass, detail.trim_end_matches("; "));
    assert!(pass);
}

#[test]
fn criterion_07_dpp_residual() {
    let mut pass = true;
    let mut detail = String::new();

    let problem = transport_problem();
    let case = SolvedCase::solve(&problem, grid(200), SolveConfig::default()).unwrap();
    let samples = random_grid_samples(case.mesh.n_points(), case.grid.n_slices(), 1000, 1, 2024);
    let report = dpp_residual_eikonal(
        &problem.graph,
        &case.mesh,
        problem.eikonal_f.as_ref().unwrap(),
        case.field(),
        &case.cfg,
        &samples,
    )
    .unwrap();
    pass &= report.max_residual <= 1e-12;
    detail.push_str(&format!("transport max {:.3e}; ", report.max_residual));
    assert!(report.max_residual <= 1e-12, "{}", report.max_residual);

    let problem = quadratic_problem();
    let case = SolvedCase::solve(&problem, grid(200), SolveConfig::default()).unwrap();
    let samples = random_grid_samples(case.mesh.n_points(), case.grid.n_slices(), 1000, 1, 4048);
    let report = dpp_residual_general(
        &problem.graph,
        &case.mesh,
        &problem.view,
        case.field(),
        &case.cfg,
        case.result.r_factor.unwrap(),
        &samples,
    )
    .unwrap();
    pass &= report.max_residual <= 1e-12;
    detail.push_str(&format!("quadratic max {:.3e}", report.max_residual));
    assert!(report.max_residual <= 1e-12, "{}", report.max_residual);

    verdict_line(7, pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_08_comparison() {
    let mut pass = true;
    for (name, problem) in [
        ("transport", transport_problem()),
        ("quadratic", quadratic_problem()),
    ] {
        let rep =
            comparison_experiment(&problem, grid(100), SolveConfig::default(), &[0.0, 0.25])
                .unwrap();
        pass &= rep.pass;
        assert!(rep.pass, "{name}: {:?}", rep.witnesses);
        assert_eq!(
            rep.measurements["monotonicity_violations"].as_u64(),
            Some(0),
            "{name} has ordering violations"
        );
        assert!(
            rep.measurements["max_perturbation_error"].as_f64().unwrap() <= 1e-9,
            "{name} perturbation error too large"
        );
    }
    verdict_line(8, pass, "ordered data and exact epsilon drops on both problems");
    assert!(pass);
}

#[test]
fn criterion_09_curve_crosscheck() {
    let mut pass = true;
    let mut detail = String::new();
    for (name, problem) in [
        ("transport", transport_problem()),
        ("quadratic", quadratic_problem()),
    ] {
        let case = SolvedCase::solve(&problem, grid(200), SolveConfig::default()).unwrap();
        let rep = curve_residual(&problem, &case, 1000, 99, None).unwrap();
        pass &= rep.pass;
        detail.push_str(&format!(
            "{name} sub slack {:.3e}, chain gap {:.3e}; ",
            rep.measurements["max_sub_slack"].as_f64().unwrap(),
            rep.measurements["max_chain_gap"].as_f64().unwrap()
        ));
        assert!(rep.pass, "{name}: {:?}", rep.witnesses);
    }
    verdict_line(9, pass, detail.trim_end_matches("; "));
    assert!(pass);
}

#[test]
fn criterion_10_legendre_duality() {
    let g = graph_from_json(SEGMENT_JSON).unwrap();
    let x = Point::on_edge(0, 0.5);
    let samples = AuditSamples::default();
    let mut specs: Vec<(String, HamiltonianSpec)> = Vec::new();
    for alpha in [1.5, 2.0, 3.0] {
        specs.push((
            format!("power alpha={alpha}"),
            HamiltonianSpec::power(
                SpatialFn::constant(1.0),
                alpha,
                SpatialFn::constant(0.3),
                1.0,
            ),
        ));
    }
    specs.push((
        "quadlin".into(),
        HamiltonianConfig {
            form: "quadlin".into(),
            alpha: Some(2.0),
            a: Some(FunctionSpec::Const(1.0)),
            b: Some(FunctionSpec::Const(0.5)),
            f: Some(FunctionSpec::Const(0.2)),
            p: None,
            values: None,
            t_horizon: None,
        }
        .to_spec(&g, 1.0)
        .unwrap(),
    ));

    let mut worst_roundtrip = 0.0f64;
    for (name, spec) in &specs {
        let view = LagrangianView::from_spec(spec, &g, &samples).unwrap();
        for i in 0..=200 {
            let p = 10.0 * i as f64 / 200.0;
            let back = legendre_h_back(&view, &g, &x, 0.5, p).unwrap();
            let direct = spec.eval_h(&g, &x, 0.5, p).unwrap();
            let err = (back - direct).abs();
            worst_roundtrip = worst_roundtrip.max(err);
            assert!(err <= 1e-6, "{name}: round trip off by {err} at p = {p}");
        }
    }

    // Fenchel-Young on random momentum and speed samples.
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let mut checked = 0usize;
    while checked < 10_000 {
        let (_, spec) = &specs[rng.random_range(0..specs.len())];
        let p: f64 = rng.random_range(0.0..10.0);
        let q: f64 = rng.random_range(0.0..10.0);
        let h = spec.eval_h(&g, &x, 0.5, p).unwrap();
        let l = spec.lagrangian(&g, &x, 0.5, q).unwrap();
        if l.is_finite() {
            assert!(
                p * q <= h + l + 1e-9,
                "Fenchel-Young fails at p = {p}, q = {q}: {} > {} + {}",
                p * q,
                h,
                l
            );
            checked += 1;
        }
    }

    verdict_line(
        10,
        true,
        &format!("round trip sup error {worst_roundtrip:.3e}; 10^4 duality samples hold"),
    );
}

#[test]
fn criterion_11_assumption_audit() {
    let g = graph_from_json(SEGMENT_JSON).unwrap();
    let samples = AuditSamples::default();

    for alpha in [1.5, 2.0, 3.0] {
        let spec = HamiltonianSpec::power(
            SpatialFn::constant(1.0),
            alpha,
            SpatialFn::constant(0.1),
            1.0,
        );
        let audit = audit_assumptions(&spec, &g, &samples).unwrap();
        for c in &audit.conditions {
            assert!(c.pass, "alpha = {alpha}: condition {} failed: {}", c.name, c.detail);
        }
    }

    // The eikonal spec resolves to the eikonal solver.
    let problem = transport_problem();
    assert_eq!(problem.route, Route::Eikonal);

    // A concave dip in a tabulated Hamiltonian fails convexity with a
    // witness triple.
    let tab = TabulatedH::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 2.0, 0.5, 3.0]).unwrap();
    let spec = HamiltonianSpec {
        form: hjgraph_core::hamiltonian::HamiltonianForm::Tabulated(tab),
        t_horizon: 1.0,
    };
    let audit = audit_assumptions(&spec, &g, &samples).unwrap();
    let convex = audit.condition("h1_convex").unwrap();
    assert!(!convex.pass);
    let w = convex.witness.as_ref().expect("failure carries a witness");
    assert_eq!(w.values.len(), 4);

    verdict_line(
        11,
        true,
        "power specs pass, eikonal routes to the eikonal solver, dip fails with witness",
    );
}
