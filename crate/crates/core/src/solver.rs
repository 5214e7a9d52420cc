//! Dynamic-programming solvers for the two Hamiltonian routes.
//!
//! Both solvers iterate an explicit min-plus step over mesh points reading
//! only the previous slices, so each step is a pure map and runs on any
//! number of workers. Min-plus steps cannot amplify, so the iteration is
//! unconditionally stable; accuracy dictates `h <= dt`.
//!
//! Eikonal route: speeds are capped at 1, the step searches the radius-`dt`
//! ball and pays the running cost integral of `f` along a sampled geodesic,
//! with the time argument wound back linearly across the step.
//!
//! General route: the step searches balls of radius `R * n * dt` for hop
//! durations `n * dt`, paying `n * dt * L(x, t, d / (n * dt))` with the
//! Lagrangian evaluated at the point being updated and the updated time.
//! Multi-step hop durations (up to [`SolveConfig::max_hop_steps`]) keep the
//! achievable speed set dense enough that the scheme stays first-order even
//! when `h = dt`; single-step hops quantize speeds to multiples of `h/dt`,
//! which stalls convergence for strictly convex Lagrangians.

use crate::error::{Error, Result};
use crate::field::{SpaceTimeField, TimeGrid};
use crate::func::{SpaceTimeFn, SpatialFn};
use crate::graph::{ball, Mesh, MetricGraph, Point};
use crate::hamiltonian::{search_radius, AssumptionAudit, LagrangianView};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub struct SolveConfig {
    /// Longest hop duration in time steps for the general route. `None`
    /// scales the duration with the grid so that the speed set refines as
    /// `dt` shrinks; fixing it freezes the achievable speeds and stalls
    /// convergence once the quantization floor is reached.
    pub max_hop_steps: Option<usize>,
    /// Arc-length gap for running-cost quadrature; defaults to the mesh
    /// spacing.
    pub quad_gap: Option<f64>,
    /// Re-solve attempts when the measured Lipschitz bound outgrows the
    /// search radius.
    pub radius_retries: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_hop_steps: None,
            quad_gap: None,
            radius_retries: 3,
        }
    }
}

impl SolveConfig {
    /// Resolved hop bound: at least 8 so the certification sweep radii are
    /// hop-reachable, growing like `1/sqrt(dt)` so the speed-quantization
    /// error stays first order in `dt`.
    pub fn hop_steps(&self, dt: f64) -> usize {
        match self.max_hop_steps {
            Some(n) => n,
            None => ((1.12 / dt.sqrt()).ceil() as usize).clamp(8, 24),
        }
    }

    fn validate(&self, mesh: &Mesh, grid: &TimeGrid) -> Result<()> {
        if self.max_hop_steps == Some(0) {
            return Err(Error::Config("max_hop_steps must be at least 1".into()));
        }
        let (h, dt) = (mesh.spacing, grid.dt());
        if h > dt * (1.0 + 1e-9) {
            return Err(Error::Config(format!(
                "mesh spacing h = {h} must not exceed the time step dt = {dt}"
            )));
        }
        Ok(())
    }
}

/// Output of a solve: the field plus the constants the run settled on.
pub struct SolveResult {
    pub field: SpaceTimeField,
    /// Radius factor `R` for the general route; `None` on the eikonal route
    /// whose radius is exactly `dt`.
    pub r_factor: Option<f64>,
    /// Lipschitz bound the radius was certified against.
    pub lip_bound: f64,
}

/// Precomputed candidate set for the eikonal step: for each mesh point, the
/// radius-`dt` ball with exact distances and sampled geodesics.
pub struct EikonalPrep {
    /// candidates[x] = (y index, distance, geodesic samples x -> y).
    pub candidates: Vec<Vec<(usize, f64, Vec<Point>)>>,
    pub dt: f64,
}

impl EikonalPrep {
    pub fn build(g: &MetricGraph, mesh: &Mesh, grid: &TimeGrid, cfg: &SolveConfig) -> Result<EikonalPrep> {
        cfg.validate(mesh, grid)?;
        let dt = grid.dt();
        let gap = cfg.quad_gap.unwrap_or(mesh.spacing);
        let candidates = (0..mesh.n_points())
            .into_par_iter()
            .map(|i| {
                let x = &mesh.points[i];
                let b = ball(g, mesh, x, dt)?;
                b.into_iter()
                    .map(|(j, d)| {
                        let geo = if j == i {
                            vec![*x]
                        } else {
                            g.geodesic_path(x, &mesh.points[j], gap)?
                        };
                        Ok((j, d, geo))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EikonalPrep { candidates, dt })
    }

    /// Trapezoid integral of `f` along the sampled geodesic, the time
    /// argument running from `t_new` back to `t_new - dt`.
    fn running_cost(&self, g: &MetricGraph, f: &SpaceTimeFn, geo: &[Point], t_new: f64) -> f64 {
        trapezoid_cost(g, f, geo, t_new, self.dt)
    }

    /// One-step value at mesh point `x_idx` and the new time, reading the
    /// previous slice. Shared by the solver and the residual recomputation.
    pub fn step_value(
        &self,
        g: &MetricGraph,
        f: &SpaceTimeFn,
        prev: &[f64],
        x_idx: usize,
        t_new: f64,
    ) -> f64 {
        self.step_argmin(g, f, prev, x_idx, t_new).0
    }

    pub fn step_argmin(
        &self,
        g: &MetricGraph,
        f: &SpaceTimeFn,
        prev: &[f64],
        x_idx: usize,
        t_new: f64,
    ) -> (f64, usize) {
        let mut best = f64::INFINITY;
        let mut best_y = x_idx;
        for (j, _d, geo) in &self.candidates[x_idx] {
            let cost = self.running_cost(g, f, geo, t_new);
            let v = prev[*j] + cost;
            if v < best {
                best = v;
                best_y = *j;
            }
        }
        (best, best_y)
    }
}

/// Solves the eikonal route: unit speed cap, running cost `f` integrated
/// along geodesics. The initial slice is `u0` on the mesh.
pub fn solve_eikonal(
    g: &MetricGraph,
    mesh: &Mesh,
    f: &SpaceTimeFn,
    u0: &SpatialFn,
    grid: &TimeGrid,
    cfg: &SolveConfig,
) -> Result<SolveResult> {
    let prep = EikonalPrep::build(g, mesh, grid, cfg)?;
    let mut slices = Vec::with_capacity(grid.n_slices());
    let first: Vec<f64> = mesh.points.iter().map(|p| u0.eval(g, p)).collect();
    if first.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("initial data is not finite on the mesh".into()));
    }
    slices.push(first);
    for i in 1..grid.n_slices() {
        let t_new = grid.time(i);
        let prev = &slices[i - 1];
        let next: Vec<f64> = (0..mesh.n_points())
            .into_par_iter()
            .map(|x| prep.step_value(g, f, prev, x, t_new))
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "running cost produced non-finite values at t = {t_new}; f must be bounded"
            )));
        }
        slices.push(next);
    }
    let lip = field_lipschitz(mesh, &slices, grid.dt());
    Ok(SolveResult {
        field: SpaceTimeField {
            grid: *grid,
            slices,
            k_shift: 0.0,
            mesh_hash: mesh.content_hash(g),
            problem_hash: 0,
        },
        r_factor: None,
        lip_bound: lip,
    })
}

/// Precomputed candidate set for the general step: for each hop duration
/// `n in 1..=max_hop_steps`, the radius `R * n * dt` ball per mesh point.
pub struct GeneralPrep {
    /// candidates[n - 1][x] = (y index, distance).
    pub candidates: Vec<Vec<Vec<(usize, f64)>>>,
    pub r_factor: f64,
    pub dt: f64,
    pub max_hop_steps: usize,
}

impl GeneralPrep {
    pub fn build(
        g: &MetricGraph,
        mesh: &Mesh,
        grid: &TimeGrid,
        cfg: &SolveConfig,
        r_factor: f64,
    ) -> Result<GeneralPrep> {
        cfg.validate(mesh, grid)?;
        let dt = grid.dt();
        let max_hop = cfg.hop_steps(dt);
        let mut candidates = Vec::with_capacity(max_hop);
        for n in 1..=max_hop {
            let radius = r_factor * (n as f64) * dt;
            let per_point = (0..mesh.n_points())
                .into_par_iter()
                .map(|i| ball(g, mesh, &mesh.points[i], radius))
                .collect::<Result<Vec<_>>>()?;
            candidates.push(per_point);
        }
        Ok(GeneralPrep {
            candidates,
            r_factor,
            dt,
            max_hop_steps: max_hop,
        })
    }

    /// Value of the step at slice `i`, mesh point `x_idx`, reading all
    /// earlier slices. Also reports the chosen hop.
    #[allow(clippy::too_many_arguments)]
    pub fn step_argmin(
        &self,
        g: &MetricGraph,
        mesh: &Mesh,
        view: &LagrangianView,
        slices: &[Vec<f64>],
        i: usize,
        x_idx: usize,
        t_new: f64,
    ) -> (f64, HopChoice) {
        let x = &mesh.points[x_idx];
        let mut best = f64::INFINITY;
        let mut choice = HopChoice {
            n_steps: 1,
            y_idx: x_idx,
            dist: 0.0,
        };
        let max_n = self.max_hop_steps.min(i);
        for n in 1..=max_n {
            let tau = (n as f64) * self.dt;
            let prev = &slices[i - n];
            for &(j, d) in &self.candidates[n - 1][x_idx] {
                let l = view.eval(g, x, t_new, d / tau);
                if !l.is_finite() {
                    continue;
                }
                let v = prev[j] + tau * l;
                if v < best {
                    best = v;
                    choice = HopChoice {
                        n_steps: n,
                        y_idx: j,
                        dist: d,
                    };
                }
            }
        }
        (best, choice)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn step_value(
        &self,
        g: &MetricGraph,
        mesh: &Mesh,
        view: &LagrangianView,
        slices: &[Vec<f64>],
        i: usize,
        x_idx: usize,
        t_new: f64,
    ) -> f64 {
        self.step_argmin(g, mesh, view, slices, i, x_idx, t_new).0
    }
}

/// The hop a general step settled on.
#[derive(Debug, Clone, Copy)]
pub struct HopChoice {
    pub n_steps: usize,
    pub y_idx: usize,
    pub dist: f64,
}

/// Solves the general route. Refuses to run unless the audit passed every
/// structural condition. The search radius is seeded from the initial
/// data's Lipschitz constant and re-certified each step; growth triggers a
/// re-solve with a wider radius, up to [`SolveConfig::radius_retries`].
pub fn solve_general(
    g: &MetricGraph,
    mesh: &Mesh,
    view: &LagrangianView,
    audit: &AssumptionAudit,
    u0: &SpatialFn,
    grid: &TimeGrid,
    cfg: &SolveConfig,
) -> Result<SolveResult> {
    if !audit.general_route_ok() {
        let failed: Vec<&str> = audit
            .conditions
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        return Err(Error::Audit(format!(
            "general route refused; failed conditions: {}",
            failed.join(", ")
        )));
    }
    cfg.validate(mesh, grid)?;

    let first: Vec<f64> = mesh.points.iter().map(|p| u0.eval(g, p)).collect();
    if first.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("initial data is not finite on the mesh".into()));
    }
    let mut lip = mesh_lipschitz(mesh, &first);

    for _attempt in 0..=cfg.radius_retries {
        let r_factor = search_radius(view, lip)?;
        let prep = GeneralPrep::build(g, mesh, grid, cfg, r_factor)?;
        let mut slices = Vec::with_capacity(grid.n_slices());
        slices.push(first.clone());
        let mut grew: Option<f64> = None;
        for i in 1..grid.n_slices() {
            let t_new = grid.time(i);
            let next: Vec<f64> = (0..mesh.n_points())
                .into_par_iter()
                .map(|x| prep.step_value(g, mesh, view, &slices, i, x, t_new))
                .collect();
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!(
                    "general step produced non-finite values at t = {t_new}"
                )));
            }
            let space = mesh_lipschitz(mesh, &next);
            let time = slice_rate(&slices[i - 1], &next, grid.dt());
            let measured = space.max(time);
            if measured > lip * 1.001 + 1e-12 {
                grew = Some(measured);
            }
            slices.push(next);
        }
        match grew {
            None => {
                let lip_final = field_lipschitz(mesh, &slices, grid.dt());
                return Ok(SolveResult {
                    field: SpaceTimeField {
                        grid: *grid,
                        slices,
                        k_shift: 0.0,
                        mesh_hash: mesh.content_hash(g),
                        problem_hash: 0,
                    },
                    r_factor: Some(r_factor),
                    lip_bound: lip_final.max(lip),
                });
            }
            Some(measured) => {
                lip = measured;
            }
        }
    }
    Err(Error::Config(format!(
        "radius policy unresolvable: Lipschitz bound kept growing past {lip} after {} retries",
        cfg.radius_retries
    )))
}

/// Direct one-shot evaluation of `min_y (u0(y) + t L(d(x, y) / t))` over
/// every mesh point, valid when the Lagrangian does not depend on the base
/// point or time. At `t = 0` it returns `u0(x)`.
pub fn hopflax_direct(
    view: &LagrangianView,
    g: &MetricGraph,
    mesh: &Mesh,
    u0: &SpatialFn,
    x: &Point,
    t: f64,
) -> Result<f64> {
    if !view.xt_independent() {
        return Err(Error::NoOracle(
            "direct formula needs a Lagrangian independent of the base point and time".into(),
        ));
    }
    if t < 0.0 {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(u0.eval(g, x));
    }
    let mut best = f64::INFINITY;
    for y in &mesh.points {
        let d = g.distance(x, y)?;
        let l = view.eval(g, x, t, d / t);
        if !l.is_finite() {
            continue;
        }
        let v = u0.eval(g, y) + t * l;
        if v < best {
            best = v;
        }
    }
    Ok(best)
}

/// Trapezoid rule for the running cost of a constant-speed traversal of a
/// uniformly sampled polyline over a time span `tau`, the time argument
/// running from `t_start` back to `t_start - tau`.
pub fn trapezoid_cost(
    g: &MetricGraph,
    f: &SpaceTimeFn,
    geo: &[Point],
    t_start: f64,
    tau: f64,
) -> f64 {
    if geo.len() < 2 {
        let a = f.eval(g, &geo[0], t_start);
        let b = f.eval(g, &geo[0], t_start - tau);
        return tau * 0.5 * (a + b);
    }
    let m = geo.len();
    let mut acc = 0.0;
    for (j, p) in geo.iter().enumerate() {
        let sigma = tau * (j as f64) / ((m - 1) as f64);
        let w = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
        acc += w * f.eval(g, p, t_start - sigma);
    }
    tau * acc / ((m - 1) as f64)
}

/// Largest along-edge difference quotient of one slice.
pub fn mesh_lipschitz(mesh: &Mesh, values: &[f64]) -> f64 {
    let mut lip = 0.0f64;
    for (i, nb) in mesh.adjacency.iter().enumerate() {
        for &(j, gap) in nb {
            if gap > 0.0 {
                lip = lip.max((values[i] - values[j]).abs() / gap);
            }
        }
    }
    lip
}

fn slice_rate(prev: &[f64], next: &[f64], dt: f64) -> f64 {
    prev.iter()
        .zip(next)
        .map(|(a, b)| (b - a).abs() / dt)
        .fold(0.0, f64::max)
}

/// Max of the space and time difference quotients over the whole field.
pub fn field_lipschitz(mesh: &Mesh, slices: &[Vec<f64>], dt: f64) -> f64 {
    let mut lip = 0.0f64;
    for s in slices {
        lip = lip.max(mesh_lipschitz(mesh, s));
    }
    for w in slices.windows(2) {
        lip = lip.max(slice_rate(&w[0], &w[1], dt));
    }
    lip
}

/// Largest decrease rate `(u(x, t) - u(x, t + dt)) / dt` over the grid.
pub fn max_decrease_rate(field: &SpaceTimeField) -> f64 {
    let dt = field.grid.dt();
    let mut rate = f64::NEG_INFINITY;
    for w in field.slices.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            rate = rate.max((a - b) / dt);
        }
    }
    if rate == f64::NEG_INFINITY {
        0.0
    } else {
        rate
    }
}

/// Report of recomputing the dynamic-programming step on sampled grid
/// points of an existing field.
#[derive(Debug)]
pub struct DppReport {
    /// `(point index, time index, |field - recomputed step|)`.
    pub samples: Vec<(usize, usize, f64)>,
    pub max_residual: f64,
}

/// Recomputes the eikonal step at the sampled `(point, time)` pairs and
/// reports the absolute mismatch. Fields produced by [`solve_eikonal`]
/// reproduce to round-off because the identical step code runs.
pub fn dpp_residual_eikonal(
    g: &MetricGraph,
    mesh: &Mesh,
    f: &SpaceTimeFn,
    field: &SpaceTimeField,
    cfg: &SolveConfig,
    samples: &[(usize, usize)],
) -> Result<DppReport> {
    let prep = EikonalPrep::build(g, mesh, &field.grid, cfg)?;
    let mut out = Vec::with_capacity(samples.len());
    let mut max_res = 0.0f64;
    for &(x, i) in samples {
        if i == 0 || i >= field.slices.len() {
            return Err(Error::Config(format!("time index {i} has no predecessor slice")));
        }
        let t_new = field.grid.time(i);
        let recomputed = prep.step_value(g, f, &field.slices[i - 1], x, t_new);
        let res = (field.value(i, x) - recomputed).abs();
        max_res = max_res.max(res);
        out.push((x, i, res));
    }
    Ok(DppReport {
        samples: out,
        max_residual: max_res,
    })
}

/// General-route counterpart of [`dpp_residual_eikonal`]; `r_factor` must be
/// the radius factor the field was solved with.
pub fn dpp_residual_general(
    g: &MetricGraph,
    mesh: &Mesh,
    view: &LagrangianView,
    field: &SpaceTimeField,
    cfg: &SolveConfig,
    r_factor: f64,
    samples: &[(usize, usize)],
) -> Result<DppReport> {
    let prep = GeneralPrep::build(g, mesh, &field.grid, cfg, r_factor)?;
    let mut out = Vec::with_capacity(samples.len());
    let mut max_res = 0.0f64;
    for &(x, i) in samples {
        if i == 0 || i >= field.slices.len() {
            return Err(Error::Config(format!("time index {i} has no predecessor slice")));
        }
        let t_new = field.grid.time(i);
        let recomputed = prep.step_value(g, mesh, view, &field.slices[..i], i, x, t_new);
        let res = (field.value(i, x) - recomputed).abs();
        max_res = max_res.max(res);
        out.push((x, i, res));
    }
    Ok(DppReport {
        samples: out,
        max_residual: max_res,
    })
}
