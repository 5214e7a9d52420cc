//! Problem configuration: JSON schemas for graphs, Hamiltonians and whole
//! problems, route resolution against the assumption audit, and the solved
//! bundle the verification experiments run on.
//!
//! Graph file:
//!
//! ```json
//! { "vertices": ["a", "b"], "edges": [{ "u": "a", "v": "b", "len": 1.0 }] }
//! ```
//!
//! Function specs are a bare number (constant), an expression string over
//! `x` (edge offset), `t`, `len` and `e`, or `{ "table": { "vertex": value } }`
//! interpolated linearly along edges.

use crate::error::{Error, Result};
use crate::field::TimeGrid;
use crate::func::{SpaceTimeFn, SpatialFn};
use crate::graph::{sample_mesh, Mesh, MetricGraph};
use crate::hamiltonian::{
    audit_assumptions, AssumptionAudit, AuditSamples, HamiltonianForm, HamiltonianSpec,
    LagrangianView, TabulatedH,
};
use crate::hash::Fnv64;
use crate::solver::{solve_eikonal, solve_general, SolveConfig, SolveResult};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Deserialize)]
pub struct GraphFile {
    pub vertices: Vec<String>,
    pub edges: Vec<GraphEdgeSpec>,
}

#[derive(Debug, Deserialize)]
pub struct GraphEdgeSpec {
    pub u: String,
    pub v: String,
    pub len: f64,
}

pub fn graph_from_json(json: &str) -> Result<MetricGraph> {
    let file: GraphFile = serde_json::from_str(json)?;
    let index = |name: &str| -> Result<usize> {
        file.vertices
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::InvalidGraph(format!("edge references unknown vertex `{name}`")))
    };
    let edges = file
        .edges
        .iter()
        .map(|e| Ok((index(&e.u)?, index(&e.v)?, e.len)))
        .collect::<Result<Vec<_>>>()?;
    MetricGraph::new(file.vertices, edges)
}

pub fn load_graph(path: &Path) -> Result<MetricGraph> {
    graph_from_json(&std::fs::read_to_string(path)?)
}

/// A scalar function given as a constant, an expression string, or a
/// per-vertex table.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum FunctionSpec {
    Const(f64),
    Formula(String),
    Detailed {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expr: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        table: Option<BTreeMap<String, f64>>,
    },
}

impl FunctionSpec {
    pub fn to_spatial(&self, g: &MetricGraph) -> Result<SpatialFn> {
        match self {
            FunctionSpec::Const(c) => Ok(SpatialFn::constant(*c)),
            FunctionSpec::Formula(src) => SpatialFn::parse(src),
            FunctionSpec::Detailed { expr, table } => match (expr, table) {
                (Some(src), None) => SpatialFn::parse(src),
                (None, Some(t)) => {
                    let entries: Vec<(String, f64)> =
                        t.iter().map(|(k, v)| (k.clone(), *v)).collect();
                    SpatialFn::from_vertex_table(g, &entries)
                }
                _ => Err(Error::Config(
                    "function spec needs exactly one of `expr` or `table`".into(),
                )),
            },
        }
    }

    pub fn to_spacetime(&self, g: &MetricGraph) -> Result<SpaceTimeFn> {
        match self {
            FunctionSpec::Const(c) => Ok(SpaceTimeFn::constant(*c)),
            FunctionSpec::Formula(src) => SpaceTimeFn::parse(src),
            FunctionSpec::Detailed { expr, table } => match (expr, table) {
                (Some(src), None) => SpaceTimeFn::parse(src),
                (None, Some(t)) => {
                    let entries: Vec<(String, f64)> =
                        t.iter().map(|(k, v)| (k.clone(), *v)).collect();
                    SpaceTimeFn::from_vertex_table(g, &entries)
                }
                _ => Err(Error::Config(
                    "function spec needs exactly one of `expr` or `table`".into(),
                )),
            },
        }
    }

}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct HamiltonianConfig {
    pub form: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<FunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<FunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FunctionSpec>,
    /// Knots and values for the tabulated form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_horizon: Option<f64>,
}

impl HamiltonianConfig {
    pub fn to_spec(&self, g: &MetricGraph, t_horizon: f64) -> Result<HamiltonianSpec> {
        let f_or_zero = |spec: &Option<FunctionSpec>| -> Result<SpatialFn> {
            match spec {
                Some(s) => s.to_spatial(g),
                None => Ok(SpatialFn::constant(0.0)),
            }
        };
        let form = match self.form.as_str() {
            "eikonal" => {
                let f = match &self.f {
                    Some(s) => s.to_spacetime(g)?,
                    None => SpaceTimeFn::constant(0.0),
                };
                HamiltonianForm::Eikonal { f }
            }
            "power" => {
                let alpha = self
                    .alpha
                    .ok_or_else(|| Error::Config("power form needs `alpha`".into()))?;
                if !(alpha > 1.0) {
                    return Err(Error::Config(format!("power form needs alpha > 1, got {alpha}")));
                }
                let a = match &self.a {
                    Some(s) => s.to_spatial(g)?,
                    None => SpatialFn::constant(1.0),
                };
                HamiltonianForm::Power {
                    a,
                    alpha,
                    f: f_or_zero(&self.f)?,
                }
            }
            "quadlin" => {
                let alpha = self
                    .alpha
                    .ok_or_else(|| Error::Config("quadlin form needs `alpha`".into()))?;
                if !(alpha > 1.0) {
                    return Err(Error::Config(format!("quadlin form needs alpha > 1, got {alpha}")));
                }
                let a = match &self.a {
                    Some(s) => s.to_spatial(g)?,
                    None => SpatialFn::constant(1.0),
                };
                let b = match &self.b {
                    Some(s) => s.to_spatial(g)?,
                    None => SpatialFn::constant(0.0),
                };
                HamiltonianForm::QuadLin {
                    a,
                    b,
                    alpha,
                    f: f_or_zero(&self.f)?,
                }
            }
            "tabulated" => {
                let p = self
                    .p
                    .clone()
                    .ok_or_else(|| Error::Config("tabulated form needs `p` knots".into()))?;
                let values = self
                    .values
                    .clone()
                    .ok_or_else(|| Error::Config("tabulated form needs `values`".into()))?;
                HamiltonianForm::Tabulated(TabulatedH::new(p, values)?)
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown Hamiltonian form `{other}`; expected eikonal, power, quadlin or tabulated"
                )))
            }
        };
        Ok(HamiltonianSpec { form, t_horizon })
    }

}

/// Discretization parameters: mesh spacing, time step and horizon. The
/// horizon must be an integer number of steps.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
pub struct GridParams {
    pub h: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_horizon: f64,
}

impl GridParams {
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !(self.t_horizon > 0.0) || !(self.h > 0.0) {
            return Err(Error::Config(format!(
                "grid parameters must be positive: h = {}, dt = {}, T = {}",
                self.h, self.dt, self.t_horizon
            )));
        }
        let n = (self.t_horizon / self.dt).round();
        if n < 1.0 || ((n * self.dt) - self.t_horizon).abs() > 1e-9 * self.t_horizon.max(1.0) {
            return Err(Error::Config(format!(
                "horizon T = {} is not an integer number of steps dt = {}",
                self.t_horizon, self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_horizon, self.n_steps()?)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct ProblemConfig {
    /// Path to the graph JSON file, relative to the config file.
    pub graph: String,
    pub hamiltonian: HamiltonianConfig,
    pub u0: FunctionSpec,
    pub grid: GridParams,
    /// `eikonal`, `general`, or `auto` (default).
    #[serde(default)]
    pub route: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Eikonal,
    General,
}

impl Route {
    pub fn as_str(&self) -> &'static str {
        match self {
            Route::Eikonal => "eikonal",
            Route::General => "general",
        }
    }
}

/// A fully resolved problem: graph, Hamiltonian with its audit and
/// Lagrangian view, initial data, and the route the solver will take.
pub struct Problem {
    pub graph: MetricGraph,
    pub spec: HamiltonianSpec,
    pub u0: SpatialFn,
    pub route: Route,
    pub audit: AssumptionAudit,
    pub view: LagrangianView,
    /// The forcing of the eikonal form, when that route is taken.
    pub eikonal_f: Option<SpaceTimeFn>,
    config_hash: u64,
}

impl Problem {
    /// Resolves a problem from parsed parts. `auto` routes eikonal forms to
    /// the eikonal solver and everything else through the general-route
    /// audit; explicit routes are validated against the form and the audit.
    pub fn from_parts(
        graph: MetricGraph,
        spec: HamiltonianSpec,
        u0: SpatialFn,
        requested_route: Option<&str>,
        samples: &AuditSamples,
    ) -> Result<Problem> {
        let audit = audit_assumptions(&spec, &graph, samples)?;
        let view = LagrangianView::from_spec(&spec, &graph, samples)?;
        let route = match requested_route.unwrap_or("auto") {
            "eikonal" => {
                if !spec.is_eikonal() {
                    return Err(Error::Hypothesis(
                        "eikonal route requires the eikonal Hamiltonian form".into(),
                    ));
                }
                if !audit.eikonal_route_ok() {
                    return Err(Error::Audit("eikonal route conditions failed".into()));
                }
                Route::Eikonal
            }
            "general" => {
                if !audit.general_route_ok() {
                    let failed: Vec<&str> = audit
                        .conditions
                        .iter()
                        .filter(|c| !c.pass)
                        .map(|c| c.name.as_str())
                        .collect();
                    return Err(Error::Audit(format!(
                        "general route refused (coercivity or regularity): failed {}",
                        failed.join(", ")
                    )));
                }
                Route::General
            }
            "auto" => {
                if spec.is_eikonal() {
                    Route::Eikonal
                } else if audit.general_route_ok() {
                    Route::General
                } else {
                    let failed: Vec<&str> = audit
                        .conditions
                        .iter()
                        .filter(|c| !c.pass)
                        .map(|c| c.name.as_str())
                        .collect();
                    return Err(Error::Audit(format!(
                        "no admissible route: failed {}",
                        failed.join(", ")
                    )));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown route `{other}`; expected eikonal, general or auto"
                )))
            }
        };
        let eikonal_f = match &spec.form {
            HamiltonianForm::Eikonal { f } => Some(f.clone()),
            _ => None,
        };
        let mut h = Fnv64::new();
        h.write_u64(graph.content_hash());
        spec.hash_into(&mut h);
        u0.hash_into(&mut h);
        h.write_str(route.as_str());
        let config_hash = h.finish();
        Ok(Problem {
            graph,
            spec,
            u0,
            route,
            audit,
            view,
            eikonal_f,
            config_hash,
        })
    }

    /// Loads the graph relative to `base_dir` and resolves the full problem.
    pub fn from_config(cfg: &ProblemConfig, base_dir: &Path) -> Result<Problem> {
        let graph = load_graph(&base_dir.join(&cfg.graph))?;
        let spec = cfg.hamiltonian.to_spec(&graph, cfg.grid.t_horizon)?;
        let u0 = cfg.u0.to_spatial(&graph)?;
        Problem::from_parts(graph, spec, u0, cfg.route.as_deref(), &AuditSamples::default())
    }

    pub fn problem_hash(&self) -> u64 {
        self.config_hash
    }
}

/// A problem solved on one discretization: the mesh, the grid and the
/// resulting field, ready for the checker and verifier machinery.
pub struct SolvedCase {
    pub params: GridParams,
    pub cfg: SolveConfig,
    pub mesh: Mesh,
    pub grid: TimeGrid,
    pub result: SolveResult,
}

impl SolvedCase {
    pub fn solve(problem: &Problem, params: GridParams, cfg: SolveConfig) -> Result<SolvedCase> {
        let mesh = sample_mesh(&problem.graph, params.h)?;
        let grid = params.time_grid()?;
        let mut result = match problem.route {
            Route::Eikonal => {
                let f = problem
                    .eikonal_f
                    .as_ref()
                    .ok_or_else(|| Error::Hypothesis("eikonal route without forcing".into()))?;
                solve_eikonal(&problem.graph, &mesh, f, &problem.u0, &grid, &cfg)?
            }
            Route::General => solve_general(
                &problem.graph,
                &mesh,
                &problem.view,
                &problem.audit,
                &problem.u0,
                &grid,
                &cfg,
            )?,
        };
        result.field.problem_hash = problem.problem_hash();
        Ok(SolvedCase {
            params,
            cfg,
            mesh,
            grid,
            result,
        })
    }

    pub fn field(&self) -> &crate::field::SpaceTimeField {
        &self.result.field
    }
}
