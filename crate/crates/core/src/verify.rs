//! Executable experiments over solved fields: bound sandwiches, initial
//! layer and Lipschitz estimates, comparison and monotonicity checks,
//! curve-based inequalities along random admissible curves and the
//! solver's own optimal chains, certificate cross-checks on refining
//! grids, and grid-convergence studies against oracles.
//!
//! Every failing verdict carries a machine-checkable witness.

use crate::config::{GridParams, Problem, Route, SolvedCase};
use crate::error::{Error, Result};
use crate::field::TimeGrid;
use crate::func::{SpaceTimeFn, SpatialFn};
use crate::graph::{ball, Mesh, MetricGraph, Point};
use crate::hash::Fnv64;
use crate::monge::{
    default_delta_steps, estimate_k, lagrangian_subslope, monge_residual_eikonal,
    monge_residual_general, shift_v, subslope, MongeResidualReport,
};
use crate::solver::{
    hopflax_direct, mesh_lipschitz, solve_eikonal, solve_general, trapezoid_cost, EikonalPrep,
    GeneralPrep, SolveConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::sync::Arc;

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub point: String,
    pub t: f64,
    pub values: Vec<f64>,
    pub detail: String,
}

/// Outcome of one experiment, serializable as the verdict JSON.
#[derive(Debug, Serialize)]
pub struct VerdictReport {
    pub kind: String,
    pub pass: bool,
    pub measurements: Map<String, Value>,
    pub witnesses: Vec<Witness>,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl VerdictReport {
    fn new(kind: &str, problem: &Problem, params: &GridParams) -> VerdictReport {
        let mut h = Fnv64::new();
        h.write_u64(problem.problem_hash())
            .write_f64(params.h)
            .write_f64(params.dt)
            .write_f64(params.t_horizon);
        VerdictReport {
            kind: kind.to_string(),
            pass: true,
            measurements: Map::new(),
            witnesses: Vec::new(),
            config_hash: h.finish_hex(),
            seed: None,
        }
    }

    fn set(&mut self, key: &str, value: Value) {
        self.measurements.insert(key.to_string(), value);
    }

    fn fail(&mut self, w: Witness) {
        self.pass = false;
        if self.witnesses.len() < 16 {
            self.witnesses.push(w);
        }
    }
}

fn point_label(g: &MetricGraph, mesh: &Mesh, idx: usize) -> String {
    match g.canonical(&mesh.points[idx]) {
        Ok(Point::Vertex(v)) => format!("point {idx} (vertex {})", g.vertex_name(v)),
        Ok(Point::OnEdge { edge, offset }) => {
            format!("point {idx} (edge {} offset {offset:.6})", edge.0)
        }
        Err(_) => format!("point {idx}"),
    }
}

/// Predicted time-Lipschitz constant of the solution for the problem's
/// route, from the audited constants and the measured data regularity.
pub fn predicted_time_lipschitz(problem: &Problem, case: &SolvedCase) -> f64 {
    let g = &problem.graph;
    let mesh = &case.mesh;
    let grid = &case.grid;
    let u0_vals: Vec<f64> = mesh.points.iter().map(|p| problem.u0.eval(g, p)).collect();
    let c0 = mesh_lipschitz(mesh, &u0_vals);
    match problem.route {
        Route::Eikonal => {
            let f = problem.eikonal_f.as_ref().expect("eikonal route has forcing");
            let mut sup_f = 0.0f64;
            let mut lf_space = 0.0f64;
            let mut lf_time = 0.0f64;
            for i in 0..grid.n_slices() {
                let t = grid.time(i);
                for (j, p) in mesh.points.iter().enumerate() {
                    let v = f.eval(g, p, t);
                    sup_f = sup_f.max(v.abs());
                    for &(nb, gap) in &mesh.adjacency[j] {
                        if gap > 0.0 {
                            let w = f.eval(g, &mesh.points[nb], t);
                            lf_space = lf_space.max((v - w).abs() / gap);
                        }
                    }
                    if i + 1 < grid.n_slices() {
                        let w = f.eval(g, p, grid.time(i + 1));
                        lf_time = lf_time.max((v - w).abs() / grid.dt());
                    }
                }
            }
            c0 + 2.0 * sup_f + grid.t_horizon * lf_space.min(lf_time)
        }
        Route::General => {
            let r = case.result.r_factor.unwrap_or(2.0);
            let mut sup_m = 0.0f64;
            for i in 0..=64 {
                let q = r * (i as f64) / 64.0;
                sup_m = sup_m.max(problem.view.envelope.eval(q).abs());
            }
            problem.view.l0
                + c0 * r
                + sup_m
                + grid.t_horizon * problem.audit.constants.time_lipschitz
        }
    }
}

/// Predicted space-Lipschitz constant: the time constant plus the bound on
/// `|L(., ., 1)|` for the general route.
pub fn predicted_space_lipschitz(problem: &Problem, case: &SolvedCase) -> f64 {
    let k = predicted_time_lipschitz(problem, case);
    match problem.route {
        Route::Eikonal => k,
        Route::General => k + problem.view.l1,
    }
}

/// Exact bound sandwich on the solved field: on the general route
/// `-L0 t + inf u0 <= u <= L0 t + u0`, on the eikonal route
/// `sup |u| <= sup |u0| + T sup |f|`. No tolerance is applied.
pub fn check_bounds(problem: &Problem, case: &SolvedCase) -> VerdictReport {
    let mut report = VerdictReport::new("bounds", problem, &case.params);
    let g = &problem.graph;
    let mesh = &case.mesh;
    let field = case.field();
    let u0_vals: Vec<f64> = mesh.points.iter().map(|p| problem.u0.eval(g, p)).collect();
    match problem.route {
        Route::Eikonal => {
            let f = problem.eikonal_f.as_ref().expect("eikonal route has forcing");
            let sup_u0 = u0_vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut sup_f = 0.0f64;
            for i in 0..field.grid.n_slices() {
                let t = field.grid.time(i);
                for p in &mesh.points {
                    sup_f = sup_f.max(f.eval(g, p, t).abs());
                }
            }
            let bound = sup_u0 + field.grid.t_horizon * sup_f;
            let mut sup_u = 0.0f64;
            for (i, s) in field.slices.iter().enumerate() {
                for (j, &v) in s.iter().enumerate() {
                    sup_u = sup_u.max(v.abs());
                    if v.abs() > bound {
                        report.fail(Witness {
                            point: point_label(g, mesh, j),
                            t: field.grid.time(i),
                            values: vec![v, bound],
                            detail: format!("|u| = {} exceeds sup|u0| + T sup|f| = {}", v.abs(), bound),
                        });
                    }
                }
            }
            report.set("sup_abs_u", json!(sup_u));
            report.set("bound", json!(bound));
        }
        Route::General => {
            let l0 = problem.view.l0;
            let inf_u0 = u0_vals.iter().cloned().fold(f64::INFINITY, f64::min);
            for (i, s) in field.slices.iter().enumerate() {
                let t = field.grid.time(i);
                let lower = -l0 * t + inf_u0;
                for (j, &v) in s.iter().enumerate() {
                    let upper = l0 * t + u0_vals[j];
                    if v < lower || v > upper {
                        report.fail(Witness {
                            point: point_label(g, mesh, j),
                            t,
                            values: vec![lower, v, upper],
                            detail: "value escapes the sandwich -L0 t + inf u0 <= u <= L0 t + u0"
                                .into(),
                        });
                    }
                }
            }
            report.set("l0", json!(l0));
            report.set("inf_u0", json!(inf_u0));
        }
    }
    report
}

/// Initial-layer estimate: `sup_x |u(., t) - u0|` must stay below
/// `K_meas t` with the measured constant at most 1.5 times the predicted
/// one.
pub fn check_initial_layer(problem: &Problem, case: &SolvedCase) -> VerdictReport {
    let mut report = VerdictReport::new("initial", problem, &case.params);
    let g = &problem.graph;
    let mesh = &case.mesh;
    let field = case.field();
    let u0_vals: Vec<f64> = mesh.points.iter().map(|p| problem.u0.eval(g, p)).collect();
    let mut k_meas = 0.0f64;
    let mut worst: Option<(usize, usize, f64)> = None;
    for i in 1..field.grid.n_slices() {
        let t = field.grid.time(i);
        for (j, &v) in field.slices[i].iter().enumerate() {
            let ratio = (v - u0_vals[j]).abs() / t;
            if ratio > k_meas {
                k_meas = ratio;
                worst = Some((j, i, v - u0_vals[j]));
            }
        }
    }
    let k_pred = predicted_time_lipschitz(problem, case);
    report.set("k_meas", json!(k_meas));
    report.set("k_pred", json!(k_pred));
    if k_meas > 1.5 * k_pred + 1e-12 {
        let (j, i, dev) = worst.unwrap();
        report.fail(Witness {
            point: point_label(g, mesh, j),
            t: field.grid.time(i),
            values: vec![dev, k_meas, k_pred],
            detail: format!("initial layer grows at rate {k_meas}, predicted at most {k_pred}"),
        });
    }
    report
}

/// Measured space and time Lipschitz constants of the field against the
/// predicted ones, with a factor 1.5 of slack for discretization.
pub fn check_lipschitz(problem: &Problem, case: &SolvedCase) -> VerdictReport {
    let mut report = VerdictReport::new("lipschitz", problem, &case.params);
    let mesh = &case.mesh;
    let field = case.field();
    let dt = field.grid.dt();
    let mut meas_space = 0.0f64;
    for s in &field.slices {
        meas_space = meas_space.max(mesh_lipschitz(mesh, s));
    }
    let mut meas_time = 0.0f64;
    for w in field.slices.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            meas_time = meas_time.max((b - a).abs() / dt);
        }
    }
    let pred_time = predicted_time_lipschitz(problem, case);
    let pred_space = predicted_space_lipschitz(problem, case);
    report.set("measured_time", json!(meas_time));
    report.set("measured_space", json!(meas_space));
    report.set("predicted_time", json!(pred_time));
    report.set("predicted_space", json!(pred_space));
    if meas_time > 1.5 * pred_time + 1e-12 {
        report.fail(Witness {
            point: "grid".into(),
            t: 0.0,
            values: vec![meas_time, pred_time],
            detail: "time Lipschitz constant exceeds prediction".into(),
        });
    }
    if meas_space > 1.5 * pred_space + 1e-12 {
        report.fail(Witness {
            point: "grid".into(),
            t: 0.0,
            values: vec![meas_space, pred_space],
            detail: "space Lipschitz constant exceeds prediction".into(),
        });
    }
    report
}

/// Deterministic sample set for residual reports: strided mesh points
/// crossed with a handful of interior times, away from both ends of the
/// time interval.
pub fn monge_sample_points(
    mesh: &Mesh,
    grid: &TimeGrid,
    max_points: usize,
    delta_steps: &[usize],
) -> Vec<(usize, usize)> {
    let margin = 0.1f64.min(0.25 * grid.t_horizon);
    let dt = grid.dt();
    let max_step = delta_steps.iter().copied().max().unwrap_or(1);
    let lo = ((margin / dt).ceil() as usize).max(max_step);
    let hi = (((grid.t_horizon - margin) / dt).floor() as usize).min(grid.n_slices() - 1);
    if lo > hi {
        return Vec::new();
    }
    let n_times = 5.min(hi - lo + 1);
    let stride = (mesh.n_points() / max_points.max(1)).max(1);
    let mut out = Vec::new();
    for ti in 0..n_times {
        let i = lo + (hi - lo) * ti / (n_times - 1).max(1);
        for x in (0..mesh.n_points()).step_by(stride) {
            out.push((x, i));
        }
    }
    out
}

/// Pointwise residual verdict for the problem's route, with the default
/// radius sweep and sample set.
pub fn monge_verdict(
    problem: &Problem,
    case: &SolvedCase,
    median_tol: f64,
    max_tol: f64,
) -> Result<(VerdictReport, MongeResidualReport)> {
    let mut report = VerdictReport::new("monge", problem, &case.params);
    let g = &problem.graph;
    let mesh = &case.mesh;
    let deltas = default_delta_steps(mesh, &case.grid);
    if deltas.is_empty() {
        return Err(Error::Config("no usable radius sweep: mesh too coarse".into()));
    }
    let samples = monge_sample_points(mesh, &case.grid, 60, &deltas);
    let residuals = match problem.route {
        Route::Eikonal => {
            let f = problem.eikonal_f.as_ref().expect("eikonal route has forcing");
            monge_residual_eikonal(g, mesh, case.field(), f, &samples, &deltas, None)?
        }
        Route::General => monge_residual_general(
            g,
            mesh,
            case.field(),
            &problem.view,
            &samples,
            &deltas,
            None,
        )?,
    };
    report.set("median_abs", json!(residuals.aggregate.median_abs));
    report.set("max_abs", json!(residuals.aggregate.max_abs));
    report.set("median_tol", json!(median_tol));
    report.set("max_tol", json!(max_tol));
    report.set("n_points", json!(residuals.points.len()));
    report.set("k", json!(residuals.k));
    if residuals.aggregate.median_abs > median_tol || residuals.aggregate.max_abs > max_tol {
        let worst = residuals
            .points
            .iter()
            .max_by(|a, b| a.residual.abs().total_cmp(&b.residual.abs()));
        if let Some(p) = worst {
            report.fail(Witness {
                point: point_label(g, mesh, p.id),
                t: p.t,
                values: vec![p.estimate, p.target, p.residual],
                detail: format!(
                    "residual aggregate exceeds tolerance: median {} vs {}, max {} vs {}",
                    residuals.aggregate.median_abs,
                    median_tol,
                    residuals.aggregate.max_abs,
                    max_tol
                ),
            });
        }
    }
    Ok((report, residuals))
}

/// Comparison and monotonicity experiment.
///
/// (a) Perturbation: subtracting `eps * t` from the shifted field lowers
/// every subslope estimate by exactly `eps` and the perturbed field sits
/// below the original.
///
/// (b) Data monotonicity: raising the forcing and the initial data yields
/// a field that dominates the original pointwise with zero violations.
pub fn comparison_experiment(
    problem: &Problem,
    params: GridParams,
    cfg: SolveConfig,
    epsilons: &[f64],
) -> Result<VerdictReport> {
    let mut report = VerdictReport::new("comparison", problem, &params);
    let g = &problem.graph;
    let case = SolvedCase::solve(problem, params, cfg)?;
    let mesh = &case.mesh;
    let field = case.field();
    let deltas = default_delta_steps(mesh, &case.grid);
    let samples = monge_sample_points(mesh, &case.grid, 24, &deltas);

    // (a) Perturbation.
    let k = match problem.route {
        Route::Eikonal => estimate_k(g, mesh, field, problem.eikonal_f.as_ref()).k,
        Route::General => estimate_k(g, mesh, field, None).k,
    };
    let v = shift_v(field, k)?;
    let mut max_drop_err = 0.0f64;
    for &eps in epsilons {
        if eps < 0.0 {
            return Err(Error::Domain(format!("epsilon must be nonnegative, got {eps}")));
        }
        let v_eps = crate::field::SpaceTimeField {
            grid: v.grid,
            slices: v
                .slices
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let t = v.grid.time(i);
                    s.iter().map(|u| u - eps * t).collect()
                })
                .collect(),
            k_shift: v.k_shift,
            mesh_hash: v.mesh_hash,
            problem_hash: v.problem_hash,
        };
        // The perturbed field never rises above the original.
        for (i, (a, b)) in v.slices.iter().zip(&v_eps.slices).enumerate() {
            for (j, (x, y)) in a.iter().zip(b).enumerate() {
                if y > x {
                    report.fail(Witness {
                        point: point_label(g, mesh, j),
                        t: v.grid.time(i),
                        values: vec![*x, *y],
                        detail: format!("perturbed field exceeds the original for eps = {eps}"),
                    });
                }
            }
        }
        for &(x, i) in &samples {
            let (a, b) = match problem.route {
                Route::Eikonal => (
                    subslope(g, mesh, &v, x, i, &deltas)?.reported,
                    subslope(g, mesh, &v_eps, x, i, &deltas)?.reported,
                ),
                Route::General => (
                    lagrangian_subslope(g, mesh, &v, &problem.view, x, i, &deltas)?.reported,
                    lagrangian_subslope(g, mesh, &v_eps, &problem.view, x, i, &deltas)?.reported,
                ),
            };
            let drop_err = ((a - b) - eps).abs();
            max_drop_err = max_drop_err.max(drop_err);
            if drop_err > 1e-9 {
                report.fail(Witness {
                    point: point_label(g, mesh, x),
                    t: v.grid.time(i),
                    values: vec![a, b, eps],
                    detail: format!("estimate dropped by {} instead of {eps}", a - b),
                });
            }
        }
    }
    report.set("max_perturbation_error", json!(max_drop_err));

    // (b) Data monotonicity.
    let grid = case.grid;
    let u0_hi = {
        let u0 = problem.u0.clone();
        SpatialFn::native(move |g, p| u0.eval(g, p) + 0.25)
    };
    let (lo_field, hi_field) = match problem.route {
        Route::Eikonal => {
            let f = problem.eikonal_f.as_ref().expect("eikonal route has forcing");
            let f_hi = {
                let f = f.clone();
                SpaceTimeFn::native(move |g, p, t| f.eval(g, p, t) + 0.5)
            };
            let lo = solve_eikonal(g, mesh, f, &problem.u0, &grid, &cfg)?;
            let hi = solve_eikonal(g, mesh, &f_hi, &u0_hi, &grid, &cfg)?;
            (lo.field, hi.field)
        }
        Route::General => {
            let lo = solve_general(g, mesh, &problem.view, &problem.audit, &problem.u0, &grid, &cfg)?;
            let hi = solve_general(g, mesh, &problem.view, &problem.audit, &u0_hi, &grid, &cfg)?;
            (lo.field, hi.field)
        }
    };
    let mut violations = 0usize;
    for (i, (a, b)) in lo_field.slices.iter().zip(&hi_field.slices).enumerate() {
        for (j, (x, y)) in a.iter().zip(b).enumerate() {
            if x > y {
                violations += 1;
                report.fail(Witness {
                    point: point_label(g, mesh, j),
                    t: grid.time(i),
                    values: vec![*x, *y],
                    detail: "ordered data produced unordered fields".into(),
                });
            }
        }
    }
    report.set("monotonicity_violations", json!(violations));
    Ok(report)
}

/// Curve-based inequalities. The subsolution side runs seeded random
/// piecewise-geodesic, piecewise-constant-speed curves and checks the
/// running-cost inequality within `tol_curve`; the supersolution side
/// replays the solver's own argmin chains, which are tight by construction.
pub fn curve_residual(
    problem: &Problem,
    case: &SolvedCase,
    n_curves: usize,
    seed: u64,
    tol_curve: Option<f64>,
) -> Result<VerdictReport> {
    let mut report = VerdictReport::new("curve", problem, &case.params);
    report.seed = Some(seed);
    let g = &problem.graph;
    let mesh = &case.mesh;
    let field = case.field();
    let grid = &case.grid;
    let dt = grid.dt();
    let tol = tol_curve.unwrap_or(3.0 * (case.params.h + case.params.dt));
    let cap = match problem.route {
        Route::Eikonal => 1.0,
        Route::General => case.result.r_factor.unwrap_or(2.0),
    };
    let quad_gap = case.cfg.quad_gap.unwrap_or(mesh.spacing);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let eik_prep = match problem.route {
        Route::Eikonal => Some(EikonalPrep::build(g, mesh, grid, &case.cfg)?),
        Route::General => None,
    };
    let gen_prep = match problem.route {
        Route::General => Some(GeneralPrep::build(
            g,
            mesh,
            grid,
            &case.cfg,
            case.result.r_factor.unwrap_or(2.0),
        )?),
        Route::Eikonal => None,
    };

    // Subsolution side: random admissible curves.
    let mut max_sub_violation = f64::NEG_INFINITY;
    for _ in 0..n_curves {
        let n_seg = rng.random_range(3..=8usize);
        let mut durations: Vec<usize> = (0..n_seg).map(|_| rng.random_range(1..=4usize)).collect();
        let mut total: usize = durations.iter().sum();
        while total + 1 >= grid.n_slices() && durations.len() > 1 {
            total -= durations.pop().unwrap();
        }
        if total + 1 >= grid.n_slices() {
            return Err(Error::Config(
                "time grid too coarse for curve experiments".into(),
            ));
        }
        let start_i = rng.random_range(total + 1..grid.n_slices());
        let start_x = rng.random_range(0..mesh.n_points());

        let mut cur = start_x;
        let mut idx = start_i;
        let mut cost = 0.0f64;
        for &steps in &durations {
            let tau = steps as f64 * dt;
            let speed: f64 = rng.random_range(0.0..=cap);
            let target = speed * tau;
            let reach = ball(g, mesh, &mesh.points[cur], cap * tau)?;
            let mut best = (cur, f64::INFINITY);
            for &(j, d) in &reach {
                let miss = (d - target).abs();
                if miss < best.1 {
                    best = (j, miss);
                }
            }
            let y = best.0;
            let d = g.distance(&mesh.points[cur], &mesh.points[y])?;
            let t_cur = grid.time(idx);
            cost += match problem.route {
                Route::Eikonal => {
                    let f = problem.eikonal_f.as_ref().expect("eikonal route has forcing");
                    let geo = if y == cur {
                        vec![mesh.points[cur]]
                    } else {
                        g.geodesic_path(&mesh.points[cur], &mesh.points[y], quad_gap)?
                    };
                    trapezoid_cost(g, f, &geo, t_cur, tau)
                }
                Route::General => tau * problem.view.eval(g, &mesh.points[cur], t_cur, d / tau),
            };
            cur = y;
            idx -= steps;
        }
        let lhs = field.value(start_i, start_x);
        let rhs = cost + field.value(idx, cur);
        let violation = lhs - rhs - tol;
        max_sub_violation = max_sub_violation.max(lhs - rhs);
        if violation > 0.0 {
            report.fail(Witness {
                point: point_label(g, mesh, start_x),
                t: grid.time(start_i),
                values: vec![lhs, rhs, tol],
                detail: "running-cost inequality fails along a random admissible curve".into(),
            });
        }
    }
    report.set("n_curves", json!(n_curves));
    report.set("max_sub_slack", json!(max_sub_violation));
    report.set("tol_curve", json!(tol));

    // Supersolution side: replay argmin chains from sampled points.
    let deltas = default_delta_steps(mesh, grid);
    let samples = monge_sample_points(mesh, grid, 24, &deltas);
    let mut max_super_gap = 0.0f64;
    for &(x, i) in &samples {
        let mut cur = x;
        let mut idx = i;
        let mut cost = 0.0f64;
        for _hop in 0..8 {
            if idx == 0 {
                break;
            }
            let t_new = grid.time(idx);
            match problem.route {
                Route::Eikonal => {
                    let prep = eik_prep.as_ref().unwrap();
                    let f = problem.eikonal_f.as_ref().expect("eikonal route has forcing");
                    let (_, y) = prep.step_argmin(g, f, &field.slices[idx - 1], cur, t_new);
                    let geo = &prep.candidates[cur]
                        .iter()
                        .find(|c| c.0 == y)
                        .expect("argmin candidate present")
                        .2;
                    cost += trapezoid_cost(g, f, geo, t_new, dt);
                    cur = y;
                    idx -= 1;
                }
                Route::General => {
                    let prep = gen_prep.as_ref().unwrap();
                    let (_, choice) =
                        prep.step_argmin(g, mesh, &problem.view, &field.slices[..idx], idx, cur, t_new);
                    let tau = choice.n_steps as f64 * dt;
                    cost += tau
                        * problem
                            .view
                            .eval(g, &mesh.points[cur], t_new, choice.dist / tau);
                    cur = choice.y_idx;
                    idx -= choice.n_steps;
                }
            }
        }
        let lhs = field.value(i, x);
        let rhs = cost + field.value(idx, cur);
        let gap = (lhs - rhs).abs();
        max_super_gap = max_super_gap.max(gap);
        if lhs < rhs - tol {
            report.fail(Witness {
                point: point_label(g, mesh, x),
                t: grid.time(i),
                values: vec![lhs, rhs, tol],
                detail: "argmin chain is not near-optimal".into(),
            });
        }
    }
    report.set("max_chain_gap", json!(max_super_gap));
    Ok(report)
}

/// Runs the pointwise residual certificate and the curve certificate on
/// each grid and flags divergence between the two; residual aggregates must
/// shrink (within round-off) across refining grids.
pub fn equivalence_crosscheck(
    problem: &Problem,
    grids: &[GridParams],
    cfg: SolveConfig,
    seed: u64,
    n_curves: usize,
) -> Result<VerdictReport> {
    if grids.is_empty() {
        return Err(Error::Config("equivalence check needs at least one grid".into()));
    }
    let mut report = VerdictReport::new("equivalence", problem, &grids[grids.len() - 1]);
    report.seed = Some(seed);
    let mut medians = Vec::new();
    let mut maxima = Vec::new();
    let mut rows = Vec::new();
    for params in grids {
        let case = SolvedCase::solve(problem, *params, cfg)?;
        let (monge_rep, residuals) = monge_verdict(problem, &case, 0.1, 0.3)?;
        let curve_rep = curve_residual(problem, &case, n_curves, seed, None)?;
        if monge_rep.pass != curve_rep.pass {
            report.fail(Witness {
                point: "grid".into(),
                t: 0.0,
                values: vec![params.h, params.dt],
                detail: format!(
                    "certificates diverge on h = {}, dt = {}: residual pass = {}, curve pass = {}",
                    params.h, params.dt, monge_rep.pass, curve_rep.pass
                ),
            });
        }
        if !monge_rep.pass || !curve_rep.pass {
            report.pass = false;
        }
        medians.push(residuals.aggregate.median_abs);
        maxima.push(residuals.aggregate.max_abs);
        rows.push(json!({
            "h": params.h,
            "dt": params.dt,
            "monge_median": residuals.aggregate.median_abs,
            "monge_max": residuals.aggregate.max_abs,
            "monge_pass": monge_rep.pass,
            "curve_pass": curve_rep.pass,
        }));
    }
    for w in medians.windows(2) {
        if w[1] > w[0] + 1e-12 {
            report.fail(Witness {
                point: "grids".into(),
                t: 0.0,
                values: w.to_vec(),
                detail: "median residual fails to shrink across refining grids".into(),
            });
        }
    }
    for w in maxima.windows(2) {
        if w[1] > w[0] + 1e-12 {
            report.fail(Witness {
                point: "grids".into(),
                t: 0.0,
                values: w.to_vec(),
                detail: "max residual fails to shrink across refining grids".into(),
            });
        }
    }
    report.set("grids", Value::Array(rows));
    Ok(report)
}

/// Closed-form reference evaluator.
pub type ClosedOracle = Arc<dyn Fn(&MetricGraph, &Point, f64) -> f64 + Send + Sync>;

/// Reference solution for convergence studies.
pub enum Oracle {
    /// Closed-form solution evaluated directly.
    Closed(ClosedOracle),
    /// Direct one-shot minimization on a mesh refined by the given factor;
    /// needs a Lagrangian independent of the base point and time.
    HopfLaxFine { refine: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub dt: f64,
    pub max_error: f64,
}

#[derive(Debug, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares order in `h + dt`; `None` when the errors sit at
    /// round-off on every grid.
    pub rate: Option<f64>,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,dt,max_error\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.16e}\n", r.h, r.dt, r.max_error));
        }
        out
    }
}

/// Solves the problem on each grid and measures the max error against the
/// oracle over all mesh points and every time slice.
pub fn convergence_study(
    problem: &Problem,
    oracle: &Oracle,
    grids: &[GridParams],
    cfg: SolveConfig,
) -> Result<ConvergenceTable> {
    if let Oracle::HopfLaxFine { .. } = oracle {
        if !problem.view.xt_independent() {
            return Err(Error::NoOracle(
                "direct-formula oracle needs a Lagrangian independent of the base point and time"
                    .into(),
            ));
        }
    }
    let g = &problem.graph;
    let mut rows = Vec::with_capacity(grids.len());
    for params in grids {
        let case = SolvedCase::solve(problem, *params, cfg)?;
        let field = case.field();
        let mesh = &case.mesh;
        let max_error = match oracle {
            Oracle::Closed(f) => (0..field.grid.n_slices())
                .into_par_iter()
                .map(|i| {
                    let t = field.grid.time(i);
                    let mut worst = 0.0f64;
                    for (j, p) in mesh.points.iter().enumerate() {
                        worst = worst.max((field.value(i, j) - f(g, p, t)).abs());
                    }
                    worst
                })
                .reduce(|| 0.0, f64::max),
            Oracle::HopfLaxFine { refine } => {
                let fine = crate::graph::sample_mesh(g, params.h / (*refine).max(1) as f64)?;
                (0..field.grid.n_slices())
                    .into_par_iter()
                    .map(|i| {
                        let t = field.grid.time(i);
                        let mut worst = 0.0f64;
                        for (j, p) in mesh.points.iter().enumerate() {
                            let reference = hopflax_direct(&problem.view, g, &fine, &problem.u0, p, t)
                                .expect("oracle feasibility checked above");
                            worst = worst.max((field.value(i, j) - reference).abs());
                        }
                        worst
                    })
                    .reduce(|| 0.0, f64::max)
            }
        };
        rows.push(ConvergenceRow {
            h: params.h,
            dt: params.dt,
            max_error,
        });
    }
    // Least-squares order in (h + dt) over rows above round-off.
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.max_error > 1e-12)
        .map(|r| ((r.h + r.dt).ln(), r.max_error.ln()))
        .collect();
    let rate = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        if den > 0.0 {
            Some(num / den)
        } else {
            None
        }
    } else {
        None
    };
    Ok(ConvergenceTable { rows, rate })
}

/// Seeded random grid samples `(point index, time index)` with time indices
/// at least `min_time_idx`.
pub fn random_grid_samples(
    n_points: usize,
    n_slices: usize,
    count: usize,
    min_time_idx: usize,
    seed: u64,
) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (
                rng.random_range(0..n_points),
                rng.random_range(min_time_idx..n_slices),
            )
        })
        .collect()
}
