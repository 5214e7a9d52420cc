//! Pointwise certification of computed fields.
//!
//! The checks revolve around the shifted field `v = u + k t`, nondecreasing
//! in time once `k` dominates the largest observed decrease rate. Backward
//! difference quotients of `v` over shrinking space-time balls estimate the
//! subslope `|D- v|` (eikonal route) or its Lagrangian-corrected variant
//! `|D-_L v|` (general route), which are then compared against their target
//! values `f + k` and `k`.
//!
//! The vanishing-radius limit is approximated by a finite sweep of radii
//! (multiples of `dt`), reported through a plateau rule: the value is the
//! max over the two smallest radii, and a trend diagnostic flags points
//! whose sweep has not settled.

use crate::error::{Error, Result};
use crate::field::{SpaceTimeField, TimeGrid};
use crate::func::SpaceTimeFn;
use crate::graph::{ball, Mesh, MetricGraph, Point};
use crate::hamiltonian::LagrangianView;
use crate::solver::max_decrease_rate;
use serde::Serialize;

/// Estimated decrease-rate class of a field.
#[derive(Debug, Clone, Copy)]
pub struct SkEstimate {
    /// Shift that makes `u + k t` nondecreasing, with headroom.
    pub k: f64,
    /// Largest observed `(u(x, s) - u(x, t)) / (t - s)` over grid pairs.
    pub measured_rate: f64,
    /// `k + inf f` when the forcing was supplied (eikonal route); must be
    /// nonnegative for the certification to make sense.
    pub margin: Option<f64>,
}

/// Estimates the smallest admissible time shift: the largest one-step
/// decrease rate with 5% headroom, raised further so that `k + inf f >= 0`
/// when the forcing is given. Nondecreasing fields report `k = 0` exactly.
pub fn estimate_k(
    g: &MetricGraph,
    mesh: &Mesh,
    field: &SpaceTimeField,
    f: Option<&SpaceTimeFn>,
) -> SkEstimate {
    let measured = max_decrease_rate(field);
    let mut k = if measured > 0.0 {
        (measured * 1.05).max(measured + 1e-12)
    } else {
        0.0
    };
    let margin = f.map(|f| {
        let mut inf_f = f64::INFINITY;
        for i in 0..field.grid.n_slices() {
            let t = field.grid.time(i);
            for p in &mesh.points {
                inf_f = inf_f.min(f.eval(g, p, t));
            }
        }
        if k + inf_f < 0.0 {
            k = -inf_f;
        }
        k + inf_f
    });
    SkEstimate {
        k,
        measured_rate: measured,
        margin,
    }
}

/// Applies the shift `v = u + k t` and verifies that the result is
/// nondecreasing in time on every grid pair. A `k` below the measured
/// requirement is rejected with the witnessing grid point.
pub fn shift_v(field: &SpaceTimeField, k: f64) -> Result<SpaceTimeField> {
    if k < 0.0 {
        return Err(Error::Domain(format!("shift must be nonnegative, got {k}")));
    }
    let v = field.shifted(k);
    for i in 0..v.slices.len().saturating_sub(1) {
        for j in 0..v.slices[i].len() {
            if v.slices[i + 1][j] < v.slices[i][j] {
                return Err(Error::Domain(format!(
                    "k = {k} is below the measured requirement: v decreases at point {j} \
                     between t = {} and t = {} ({} -> {})",
                    v.grid.time(i),
                    v.grid.time(i + 1),
                    v.slices[i][j],
                    v.slices[i + 1][j]
                )));
            }
        }
    }
    Ok(v)
}

/// One subslope estimate at a grid point.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeEstimate {
    pub point_idx: usize,
    pub time_idx: usize,
    /// Radii in time steps, descending.
    pub delta_steps: Vec<usize>,
    /// Supremum value per radius.
    pub per_delta: Vec<f64>,
    /// Max over the two smallest radii.
    pub reported: f64,
    /// Least-squares slope of value against radius; near zero once the
    /// sweep has plateaued.
    pub trend_slope: f64,
    pub plateau_ok: bool,
}

fn finish_estimate(
    point_idx: usize,
    time_idx: usize,
    delta_steps: Vec<usize>,
    per_delta: Vec<f64>,
    dt: f64,
) -> SlopeEstimate {
    let n = per_delta.len();
    let reported = if n >= 2 {
        per_delta[n - 1].max(per_delta[n - 2])
    } else {
        per_delta[n - 1]
    };
    let plateau_ok = if n >= 2 {
        (per_delta[n - 1] - per_delta[n - 2]).abs() <= 0.05 * reported.abs().max(1.0)
    } else {
        true
    };
    // Least squares of value against the radius in time units.
    let trend_slope = if n >= 2 {
        let xs: Vec<f64> = delta_steps.iter().map(|&s| s as f64 * dt).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = per_delta.iter().sum::<f64>() / n as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, y) in xs.iter().zip(&per_delta) {
            num += (x - mx) * (y - my);
            den += (x - mx) * (x - mx);
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    } else {
        0.0
    };
    SlopeEstimate {
        point_idx,
        time_idx,
        delta_steps,
        per_delta,
        reported,
        trend_slope,
        plateau_ok,
    }
}

/// Default radius sweep `{8, 4, 2, 1} * dt`, restricted to radii that the
/// mesh resolves (`delta >= h`).
pub fn default_delta_steps(mesh: &Mesh, grid: &TimeGrid) -> Vec<usize> {
    let dt = grid.dt();
    [8usize, 4, 2, 1]
        .into_iter()
        .filter(|&s| s as f64 * dt >= mesh.spacing * (1.0 - 1e-9))
        .collect()
}

fn validate_deltas(
    mesh: &Mesh,
    grid: &TimeGrid,
    time_idx: usize,
    delta_steps: &[usize],
) -> Result<Vec<usize>> {
    if delta_steps.is_empty() {
        return Err(Error::Config("empty radius sweep".into()));
    }
    let mut steps = delta_steps.to_vec();
    steps.sort_unstable();
    steps.dedup();
    steps.reverse();
    let dt = grid.dt();
    for &s in &steps {
        if s == 0 {
            return Err(Error::Config("radius of zero steps is not on the grid".into()));
        }
        if s > time_idx {
            return Err(Error::Config(format!(
                "radius {s} steps reaches below t = 0 from time index {time_idx}"
            )));
        }
        if (s as f64) * dt < mesh.spacing * (1.0 - 1e-9) {
            return Err(Error::Config(format!(
                "radius {s} steps is below the mesh spacing; the ball is not representative"
            )));
        }
    }
    Ok(steps)
}

/// Backward difference-quotient estimate of the subslope at a grid point:
/// per radius `delta`, the sup over mesh points within `delta` of
/// `(v(x, t) - v(y, t - delta)) / delta`. Meaningful for fields
/// nondecreasing in time, where the stay-put term keeps it nonnegative.
pub fn subslope(
    g: &MetricGraph,
    mesh: &Mesh,
    v: &SpaceTimeField,
    point_idx: usize,
    time_idx: usize,
    delta_steps: &[usize],
) -> Result<SlopeEstimate> {
    let steps = validate_deltas(mesh, &v.grid, time_idx, delta_steps)?;
    let dt = v.grid.dt();
    let x = &mesh.points[point_idx];
    let here = v.value(time_idx, point_idx);
    let mut per_delta = Vec::with_capacity(steps.len());
    for &s in &steps {
        let delta = s as f64 * dt;
        let mut sup = f64::NEG_INFINITY;
        for (j, _d) in ball(g, mesh, x, delta)? {
            let q = (here - v.value(time_idx - s, j)) / delta;
            sup = sup.max(q);
        }
        per_delta.push(sup);
    }
    Ok(finish_estimate(point_idx, time_idx, steps, per_delta, dt))
}

/// Box variant of the subslope: positive-part numerator, the past time
/// ranging over the whole box `0 <= t - s <= delta`. Agrees with
/// [`subslope`] on fields nondecreasing in time.
pub fn subslope_boxed(
    g: &MetricGraph,
    mesh: &Mesh,
    v: &SpaceTimeField,
    point_idx: usize,
    time_idx: usize,
    delta_steps: &[usize],
) -> Result<SlopeEstimate> {
    let steps = validate_deltas(mesh, &v.grid, time_idx, delta_steps)?;
    let dt = v.grid.dt();
    let x = &mesh.points[point_idx];
    let here = v.value(time_idx, point_idx);
    let mut per_delta = Vec::with_capacity(steps.len());
    for &s in &steps {
        let delta = s as f64 * dt;
        let mut sup = 0.0f64;
        for (j, _d) in ball(g, mesh, x, delta)? {
            for back in 0..=s {
                let q = (here - v.value(time_idx - back, j)).max(0.0) / delta;
                sup = sup.max(q);
            }
        }
        per_delta.push(sup);
    }
    Ok(finish_estimate(point_idx, time_idx, steps, per_delta, dt))
}

/// Interval-refinement count for the continuum spatial sup: grows like
/// `1 / sqrt(dt)` so that the representable speed set densifies while the
/// grid refines. Mirrors the solver's hop refinement policy.
fn speed_refinement(dt: f64) -> usize {
    ((1.12 / dt.sqrt()).ceil() as usize).clamp(8, 24)
}

/// Lagrangian-corrected subslope estimate: per radius `delta`, the sup over
/// positions within `delta` and past grid times `s` with
/// `dt <= t - s <= delta` of
/// `(v(x, t) - v(y, s)) / (t - s) - L(x, t, d(x, y) / (t - s))`,
/// including the stay-put column which pays `L(x, t, 0)`.
///
/// The spatial sup ranges over mesh points plus interval subsamples whose
/// field values interpolate linearly between mesh neighbors; mesh-only
/// candidates quantize the achievable speeds at a grid-independent
/// granularity, which freezes the estimator's deficiency and hides the
/// refinement of the field itself.
pub fn lagrangian_subslope(
    g: &MetricGraph,
    mesh: &Mesh,
    v: &SpaceTimeField,
    view: &LagrangianView,
    point_idx: usize,
    time_idx: usize,
    delta_steps: &[usize],
) -> Result<SlopeEstimate> {
    let steps = validate_deltas(mesh, &v.grid, time_idx, delta_steps)?;
    let dt = v.grid.dt();
    let x = &mesh.points[point_idx];
    let t = v.grid.time(time_idx);
    let here = v.value(time_idx, point_idx);
    let n_sub = speed_refinement(dt);
    let delta_max = steps[0] as f64 * dt;
    let slack = crate::graph::ball_slack(delta_max);

    // Candidate positions: every mesh point in the largest ball plus
    // interpolation nodes on edge intervals that intersect it. Each entry
    // carries the distance to x and per-slice value weights (i1, i2, w):
    // value = (1 - w) v[i1] + w v[i2].
    let mut candidates: Vec<(f64, usize, usize, f64)> = Vec::new();
    for (j, d) in ball(g, mesh, x, delta_max)? {
        candidates.push((d, j, j, 0.0));
    }
    for e in 0..g.n_edges() {
        let chain = mesh.edge_chain(g, crate::graph::EdgeId(e));
        for w in chain.windows(2) {
            let (i1, i2) = (w[0], w[1]);
            let d1 = g.distance(x, &mesh.points[i1])?;
            let d2 = g.distance(x, &mesh.points[i2])?;
            let o1 = mesh.offset_on_edge(g, i1, crate::graph::EdgeId(e));
            let o2 = mesh.offset_on_edge(g, i2, crate::graph::EdgeId(e));
            let gap = (o2 - o1).abs();
            if d1.min(d2) > delta_max + gap {
                continue;
            }
            for k in 1..n_sub {
                let w_frac = k as f64 / n_sub as f64;
                let y = Point::OnEdge {
                    edge: crate::graph::EdgeId(e),
                    offset: o1 + (o2 - o1) * w_frac,
                };
                let d = g.distance(x, &y)?;
                if d <= delta_max + slack {
                    candidates.push((d, i1, i2, w_frac));
                }
            }
        }
    }

    let mut per_delta = Vec::with_capacity(steps.len());
    for &s in &steps {
        let delta = s as f64 * dt;
        let in_slack = crate::graph::ball_slack(delta);
        let mut sup = f64::NEG_INFINITY;
        for &(d, i1, i2, w_frac) in &candidates {
            if d > delta + in_slack {
                continue;
            }
            for back in 1..=s {
                let tau = back as f64 * dt;
                let speed = if d == 0.0 { 0.0 } else { d / tau };
                let l = view.eval(g, x, t, speed);
                if !l.is_finite() {
                    continue;
                }
                let past = &v.slices[time_idx - back];
                let val = past[i1] * (1.0 - w_frac) + past[i2] * w_frac;
                let q = (here - val) / tau - l;
                sup = sup.max(q);
            }
        }
        per_delta.push(sup);
    }
    Ok(finish_estimate(point_idx, time_idx, steps, per_delta, dt))
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualPoint {
    pub id: usize,
    pub t: f64,
    pub estimate: f64,
    pub target: f64,
    /// Signed `estimate - target`: nonpositive means the subsolution side
    /// holds, nonnegative the supersolution side.
    pub residual: f64,
    pub plateau_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualAggregate {
    pub max_abs: f64,
    pub median_abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MongeResidualReport {
    pub route: String,
    pub k: f64,
    pub points: Vec<ResidualPoint>,
    pub aggregate: ResidualAggregate,
    /// Sample points skipped because their time sits below the largest
    /// radius of the sweep.
    pub skipped_boundary: usize,
}

fn aggregate(points: &[ResidualPoint]) -> ResidualAggregate {
    let mut abs: Vec<f64> = points.iter().map(|p| p.residual.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let max_abs = abs.last().copied().unwrap_or(0.0);
    let median_abs = if abs.is_empty() {
        0.0
    } else if abs.len() % 2 == 1 {
        abs[abs.len() / 2]
    } else {
        0.5 * (abs[abs.len() / 2 - 1] + abs[abs.len() / 2])
    };
    ResidualAggregate { max_abs, median_abs }
}

/// Eikonal-route residual report: the raw field is shifted with the
/// estimated (or given) `k` and the subslope is compared against `f + k`
/// at the sampled grid points. Points too close to `t = 0` for the sweep
/// are excluded and counted.
pub fn monge_residual_eikonal(
    g: &MetricGraph,
    mesh: &Mesh,
    field: &SpaceTimeField,
    f: &SpaceTimeFn,
    sample_points: &[(usize, usize)],
    delta_steps: &[usize],
    k: Option<f64>,
) -> Result<MongeResidualReport> {
    let k = match k {
        Some(k) => k,
        None => estimate_k(g, mesh, field, Some(f)).k,
    };
    let v = shift_v(field, k)?;
    let max_step = delta_steps.iter().copied().max().unwrap_or(1);
    let mut points = Vec::new();
    let mut skipped = 0usize;
    for &(x, i) in sample_points {
        if i < max_step {
            skipped += 1;
            continue;
        }
        let est = subslope(g, mesh, &v, x, i, delta_steps)?;
        let t = v.grid.time(i);
        let target = f.eval(g, &mesh.points[x], t) + k;
        points.push(ResidualPoint {
            id: x,
            t,
            estimate: est.reported,
            target,
            residual: est.reported - target,
            plateau_ok: est.plateau_ok,
        });
    }
    let aggregate = aggregate(&points);
    Ok(MongeResidualReport {
        route: "eikonal".into(),
        k,
        points,
        aggregate,
        skipped_boundary: skipped,
    })
}

/// General-route residual report: the Lagrangian-corrected subslope of the
/// shifted field is compared against the constant target `k`.
pub fn monge_residual_general(
    g: &MetricGraph,
    mesh: &Mesh,
    field: &SpaceTimeField,
    view: &LagrangianView,
    sample_points: &[(usize, usize)],
    delta_steps: &[usize],
    k: Option<f64>,
) -> Result<MongeResidualReport> {
    let k = match k {
        Some(k) => k,
        None => estimate_k(g, mesh, field, None).k,
    };
    let v = shift_v(field, k)?;
    let max_step = delta_steps.iter().copied().max().unwrap_or(1);
    let mut points = Vec::new();
    let mut skipped = 0usize;
    for &(x, i) in sample_points {
        if i < max_step {
            skipped += 1;
            continue;
        }
        let est = lagrangian_subslope(g, mesh, &v, view, x, i, delta_steps)?;
        points.push(ResidualPoint {
            id: x,
            t: v.grid.time(i),
            estimate: est.reported,
            target: k,
            residual: est.reported - k,
            plateau_ok: est.plateau_ok,
        });
    }
    let aggregate = aggregate(&points);
    Ok(MongeResidualReport {
        route: "general".into(),
        k,
        points,
        aggregate,
        skipped_boundary: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::SpatialFn;
    use crate::graph::{sample_mesh, Point};
    use crate::hamiltonian::{audit_assumptions, AuditSamples, Envelope, HamiltonianSpec};
    use crate::solver::{solve_eikonal, solve_general, SolveConfig};

    fn segment() -> MetricGraph {
        MetricGraph::new(vec!["a".into(), "b".into()], vec![(0, 1, 1.0)]).unwrap()
    }

    fn manual_field(
        g: &MetricGraph,
        mesh: &Mesh,
        grid: TimeGrid,
        f: impl Fn(&MetricGraph, &Point, f64) -> f64,
    ) -> SpaceTimeField {
        let slices = (0..grid.n_slices())
            .map(|i| {
                let t = grid.time(i);
                mesh.points.iter().map(|p| f(g, p, t)).collect()
            })
            .collect();
        SpaceTimeField {
            grid,
            slices,
            k_shift: 0.0,
            mesh_hash: mesh.content_hash(g),
            problem_hash: 0,
        }
    }

    #[test]
    fn estimate_k_cases() {
        let g = segment();
        let mesh = sample_mesh(&g, 0.1).unwrap();
        let grid = TimeGrid::new(1.0, 10).unwrap();

        let rising = manual_field(&g, &mesh, grid, |_, _, t| t);
        let est = estimate_k(&g, &mesh, &rising, None);
        assert_eq!(est.k, 0.0);

        let falling = manual_field(&g, &mesh, grid, |_, _, t| -2.0 * t);
        let est = estimate_k(&g, &mesh, &falling, None);
        assert!((est.k - 2.1).abs() < 1e-9, "{}", est.k);
        assert!((est.measured_rate - 2.0).abs() < 1e-9);

        // Forcing raises k to keep the margin nonnegative.
        let f = SpaceTimeFn::constant(-3.0);
        let est = estimate_k(&g, &mesh, &rising, Some(&f));
        assert!((est.k - 3.0).abs() < 1e-12);
        assert!(est.margin.unwrap().abs() < 1e-12);
    }

    #[test]
    fn estimate_k_from_solver_field() {
        let g = segment();
        let mesh = sample_mesh(&g, 0.1).unwrap();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let f = SpaceTimeFn::constant(1.0);
        let res = solve_eikonal(&g, &mesh, &f, &SpatialFn::constant(0.0), &grid, &SolveConfig::default())
            .unwrap();
        let est = estimate_k(&g, &mesh, &res.field, Some(&f));
        assert_eq!(est.k, 0.0);
        assert!((est.margin.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shift_v_validates_monotonicity() {
        let g = segment();
        let mesh = sample_mesh(&g, 0.1).unwrap();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let falling = manual_field(&g, &mesh, grid, |_, _, t| -2.0 * t);

        let v = shift_v(&falling, 2.1).unwrap();
        assert_eq!(v.k_shift, 2.1);
        for i in 0..v.slices.len() - 1 {
            for j in 0..v.slices[i].len() {
                assert!(v.slices[i + 1][j] >= v.slices[i][j]);
            }
        }

        // Too small a shift is rejected with a witness.
        match shift_v(&falling, 1.0) {
            Err(Error::Domain(msg)) => assert!(msg.contains("point")),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn subslope_of_linear_time_field() {
        let g = segment();
        let mesh = sample_mesh(&g, 0.05).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let v = manual_field(&g, &mesh, grid, |_, _, t| t);
        let deltas = default_delta_steps(&mesh, &grid);
        let x = mesh.index_of(&g, &Point::on_edge(0, 0.5)).unwrap();
        let est = subslope(&g, &mesh, &v, x, 10, &deltas).unwrap();
        assert!((est.reported - 1.0).abs() < 1e-12, "{}", est.reported);
        assert!(est.plateau_ok);

        let c = manual_field(&g, &mesh, grid, |_, _, _| 4.0);
        let est = subslope(&g, &mesh, &c, x, 10, &deltas).unwrap();
        assert!(est.reported.abs() < 1e-12);
    }

    #[test]
    fn subslope_of_transport_profile_vanishes() {
        let g = segment();
        let n = 100;
        let mesh = sample_mesh(&g, 1.0 / n as f64).unwrap();
        let grid = TimeGrid::new(1.0, n).unwrap();
        // Exact transported profile; k = 0 and zero forcing target 0.
        let v = manual_field(&g, &mesh, grid, |g, p, t| {
            let (_, off, _) = g.edge_coords(p).unwrap();
            (off - t).max(0.0)
        });
        let x = mesh.index_of(&g, &Point::on_edge(0, 0.8)).unwrap();
        let i = 30; // t = 0.3
        let est = subslope(&g, &mesh, &v, x, i, &default_delta_steps(&mesh, &grid)).unwrap();
        assert!(est.reported.abs() <= 1e-12, "{}", est.reported);
    }

    #[test]
    fn boxed_form_agrees_on_monotone_fields() {
        let g = segment();
        let mesh = sample_mesh(&g, 0.05).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let f = SpaceTimeFn::parse("0.5 + 0.25*x").unwrap();
        let res = solve_eikonal(&g, &mesh, &f, &SpatialFn::parse("0.3*x").unwrap(), &grid, &SolveConfig::default())
            .unwrap();
        let k = estimate_k(&g, &mesh, &res.field, Some(&f)).k;
        let v = shift_v(&res.field, k).unwrap();
        let deltas = default_delta_steps(&mesh, &grid);
        for x in (0..mesh.n_points()).step_by(3) {
            for i in [8, 12, 19] {
                let a = subslope(&g, &mesh, &v, x, i, &deltas).unwrap();
                let b = subslope_boxed(&g, &mesh, &v, x, i, &deltas).unwrap();
                for (p, q) in a.per_delta.iter().zip(&b.per_delta) {
                    assert!((p - q).abs() <= 1e-9, "{p} vs {q}");
                }
            }
        }
    }

    #[test]
    fn k_independence_shifts_estimates_linearly() {
        let g = segment();
        let mesh = sample_mesh(&g, 0.05).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let f = SpaceTimeFn::constant(0.0);
        let res = solve_eikonal(&g, &mesh, &f, &SpatialFn::parse("x").unwrap(), &grid, &SolveConfig::default())
            .unwrap();
        let k1 = estimate_k(&g, &mesh, &res.field, Some(&f)).k;
        let k2 = k1 + 1.0;
        let v1 = shift_v(&res.field, k1).unwrap();
        let v2 = shift_v(&res.field, k2).unwrap();
        let deltas = default_delta_steps(&mesh, &grid);
        for x in (0..mesh.n_points()).step_by(5) {
            for i in [8, 15] {
                let a = subslope(&g, &mesh, &v1, x, i, &deltas).unwrap();
                let b = subslope(&g, &mesh, &v2, x, i, &deltas).unwrap();
                assert!(
                    ((b.reported - a.reported) - (k2 - k1)).abs() <= 1e-9,
                    "{} vs {}",
                    a.reported,
                    b.reported
                );
            }
        }
    }

    #[test]
    fn lagrangian_subslope_trivial_cases() {
        let g = segment();
        let mesh = sample_mesh(&g, 0.05).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let deltas = default_delta_steps(&mesh, &grid);
        let x = mesh.index_of(&g, &Point::on_edge(0, 0.5)).unwrap();

        // Zero Lagrangian: the estimate of v = t is the time slope 1.
        let zero_l = LagrangianView::from_fn(
            |_, _, _, _| 0.0,
            None,
            Envelope::Hull(vec![(0.0, 0.0), (1.0, 0.0)]),
            0.0,
            0.0,
            true,
        );
        let v = manual_field(&g, &mesh, grid, |_, _, t| t);
        let est = lagrangian_subslope(&g, &mesh, &v, &zero_l, x, 10, &deltas).unwrap();
        assert!((est.reported - 1.0).abs() < 1e-12, "{}", est.reported);

        // Quadratic Lagrangian on the zero field: the best quotient is 0.
        let spec = HamiltonianSpec::power(
            SpatialFn::constant(1.0),
            2.0,
            SpatialFn::constant(0.0),
            1.0,
        );
        let view = LagrangianView::from_spec(&spec, &g, &AuditSamples::default()).unwrap();
        let zero = manual_field(&g, &mesh, grid, |_, _, _| 0.0);
        let est = lagrangian_subslope(&g, &mesh, &zero, &view, x, 10, &deltas).unwrap();
        assert!(est.reported.abs() < 1e-12, "{}", est.reported);
    }

    #[test]
    fn residual_vanishes_on_linear_growth() {
        let g = segment();
        let mesh = sample_mesh(&g, 0.05).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let f = SpaceTimeFn::constant(1.0);
        let res = solve_eikonal(&g, &mesh, &f, &SpatialFn::constant(0.0), &grid, &SolveConfig::default())
            .unwrap();
        let samples: Vec<(usize, usize)> = (0..mesh.n_points()).map(|x| (x, 12)).collect();
        let deltas = default_delta_steps(&mesh, &grid);
        let report =
            monge_residual_eikonal(&g, &mesh, &res.field, &f, &samples, &deltas, None).unwrap();
        assert!(report.aggregate.max_abs < 1e-9, "{}", report.aggregate.max_abs);
    }

    #[test]
    fn residual_detects_frozen_field() {
        let g = segment();
        let mesh = sample_mesh(&g, 0.05).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let f = SpaceTimeFn::constant(1.0);
        let frozen = manual_field(&g, &mesh, grid, |_, _, _| 0.5);
        let x = mesh.index_of(&g, &Point::on_edge(0, 0.5)).unwrap();
        let report = monge_residual_eikonal(
            &g,
            &mesh,
            &frozen,
            &f,
            &[(x, 12)],
            &default_delta_steps(&mesh, &grid),
            None,
        )
        .unwrap();
        // Flat field: estimate 0 against target 1.
        assert!((report.points[0].residual + 1.0).abs() < 1e-12);
    }

    #[test]
    fn general_residual_small_on_solver_output() {
        let g = segment();
        let n = 50;
        let mesh = sample_mesh(&g, 1.0 / n as f64).unwrap();
        let grid = TimeGrid::new(1.0, n).unwrap();
        let spec = HamiltonianSpec::power(
            SpatialFn::constant(1.0),
            2.0,
            SpatialFn::constant(0.0),
            1.0,
        );
        let samples_cfg = AuditSamples::default();
        let view = LagrangianView::from_spec(&spec, &g, &samples_cfg).unwrap();
        let audit = audit_assumptions(&spec, &g, &samples_cfg).unwrap();
        let u0 = SpatialFn::parse("abs(x - 0.5)").unwrap();
        let res = solve_general(&g, &mesh, &view, &audit, &u0, &grid, &SolveConfig::default()).unwrap();
        let deltas = default_delta_steps(&mesh, &grid);
        let samples: Vec<(usize, usize)> = (0..mesh.n_points())
            .step_by(2)
            .flat_map(|x| [(x, 15), (x, 30), (x, 45)])
            .collect();
        let report =
            monge_residual_general(&g, &mesh, &res.field, &view, &samples, &deltas, None).unwrap();
        assert!(
            report.aggregate.max_abs <= 0.1,
            "max residual {}",
            report.aggregate.max_abs
        );
    }

    #[test]
    fn boundary_points_are_skipped() {
        let g = segment();
        let mesh = sample_mesh(&g, 0.05).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let f = SpaceTimeFn::constant(0.0);
        let res = solve_eikonal(&g, &mesh, &f, &SpatialFn::constant(0.0), &grid, &SolveConfig::default())
            .unwrap();
        let report = monge_residual_eikonal(
            &g,
            &mesh,
            &res.field,
            &f,
            &[(0, 3), (0, 12)],
            &default_delta_steps(&mesh, &grid),
            None,
        )
        .unwrap();
        assert_eq!(report.skipped_boundary, 1);
        assert_eq!(report.points.len(), 1);
    }

    #[test]
    fn delta_validation_errors() {
        let g = segment();
        let mesh = sample_mesh(&g, 0.05).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let v = manual_field(&g, &mesh, grid, |_, _, t| t);
        assert!(subslope(&g, &mesh, &v, 0, 10, &[]).is_err());
        assert!(subslope(&g, &mesh, &v, 0, 10, &[0]).is_err());
        assert!(subslope(&g, &mesh, &v, 0, 2, &[4]).is_err());
    }

    #[test]
    fn perturbation_lowers_estimates_by_epsilon() {
        let g = segment();
        let mesh = sample_mesh(&g, 0.05).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let f = SpaceTimeFn::constant(0.5);
        let res = solve_eikonal(&g, &mesh, &f, &SpatialFn::parse("x").unwrap(), &grid, &SolveConfig::default())
            .unwrap();
        let k = estimate_k(&g, &mesh, &res.field, Some(&f)).k;
        let v = shift_v(&res.field, k).unwrap();
        let eps = 0.125;
        // v - eps t realized directly on the slices.
        let v_eps = SpaceTimeField {
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
        let deltas = default_delta_steps(&mesh, &grid);
        for x in (0..mesh.n_points()).step_by(4) {
            let a = subslope(&g, &mesh, &v, x, 16, &deltas).unwrap();
            let b = subslope(&g, &mesh, &v_eps, x, 16, &deltas).unwrap();
            assert!(
                ((a.reported - b.reported) - eps).abs() <= 1e-9,
                "{} vs {}",
                a.reported,
                b.reported
            );
        }
    }
}
