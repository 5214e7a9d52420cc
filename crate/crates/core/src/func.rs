//! Scalar functions on a metric graph, with or without time dependence.
//!
//! Three backings are supported: constants, parsed expressions over edge
//! coordinates, and per-vertex tables interpolated linearly along edges.
//! A native closure backing exists for oracles and tests.

use crate::error::{Error, Result};
use crate::expr::{EvalCtx, Expression};
use crate::graph::{MetricGraph, Point};
use crate::hash::Fnv64;
use std::sync::Arc;

type NativeFn = Arc<dyn Fn(&MetricGraph, &Point, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Backing {
    Const(f64),
    Expr(Expression),
    /// Per-vertex values, interpolated linearly along each edge.
    VertexTable(Vec<f64>),
    Native(NativeFn),
}

impl std::fmt::Debug for Backing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backing::Const(c) => write!(f, "Const({c})"),
            Backing::Expr(e) => write!(f, "Expr({})", e.source()),
            Backing::VertexTable(v) => write!(f, "VertexTable({} entries)", v.len()),
            Backing::Native(_) => write!(f, "Native"),
        }
    }
}

/// A function of a graph point and time.
#[derive(Debug, Clone)]
pub struct SpaceTimeFn {
    backing: Backing,
}

/// A function of a graph point only.
#[derive(Debug, Clone)]
pub struct SpatialFn {
    backing: Backing,
}

fn eval_backing(b: &Backing, g: &MetricGraph, p: &Point, t: f64) -> f64 {
    match b {
        Backing::Const(c) => *c,
        Backing::Expr(e) => {
            let (edge, offset, len) = g
                .edge_coords(p)
                .expect("points are validated before evaluation");
            e.eval(&EvalCtx {
                x: offset,
                t,
                len,
                e: edge.0 as f64,
            })
        }
        Backing::VertexTable(vals) => {
            let p = g.canonical(p).expect("points are validated before evaluation");
            match p {
                Point::Vertex(v) => vals[v.0],
                Point::OnEdge { edge, offset } => {
                    let e = g.edge(edge);
                    let s = offset / e.len;
                    vals[e.u.0] * (1.0 - s) + vals[e.v.0] * s
                }
            }
        }
        Backing::Native(f) => f(g, p, t),
    }
}

fn hash_backing(b: &Backing, h: &mut Fnv64) {
    match b {
        Backing::Const(c) => {
            h.write_str("const").write_f64(*c);
        }
        Backing::Expr(e) => {
            h.write_str("expr").write_str(e.source());
        }
        Backing::VertexTable(vals) => {
            h.write_str("table");
            for v in vals {
                h.write_f64(*v);
            }
        }
        Backing::Native(_) => {
            h.write_str("native");
        }
    }
}

impl SpaceTimeFn {
    pub fn constant(c: f64) -> SpaceTimeFn {
        SpaceTimeFn {
            backing: Backing::Const(c),
        }
    }

    pub fn parse(src: &str) -> Result<SpaceTimeFn> {
        Ok(SpaceTimeFn {
            backing: Backing::Expr(Expression::parse(src)?),
        })
    }

    pub fn from_vertex_table(g: &MetricGraph, table: &[(String, f64)]) -> Result<SpaceTimeFn> {
        Ok(SpaceTimeFn {
            backing: vertex_table(g, table)?,
        })
    }

    pub fn native<F>(f: F) -> SpaceTimeFn
    where
        F: Fn(&MetricGraph, &Point, f64) -> f64 + Send + Sync + 'static,
    {
        SpaceTimeFn {
            backing: Backing::Native(Arc::new(f)),
        }
    }

    pub fn eval(&self, g: &MetricGraph, p: &Point, t: f64) -> f64 {
        eval_backing(&self.backing, g, p, t)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.backing, Backing::Const(_))
    }

    pub fn hash_into(&self, h: &mut Fnv64) {
        hash_backing(&self.backing, h);
    }
}

impl SpatialFn {
    pub fn constant(c: f64) -> SpatialFn {
        SpatialFn {
            backing: Backing::Const(c),
        }
    }

    /// Parses an expression that must not read the time variable.
    pub fn parse(src: &str) -> Result<SpatialFn> {
        let e = Expression::parse(src)?;
        if e.uses_time() {
            return Err(Error::Expr(format!(
                "spatial function `{src}` must not reference t"
            )));
        }
        Ok(SpatialFn {
            backing: Backing::Expr(e),
        })
    }

    pub fn from_vertex_table(g: &MetricGraph, table: &[(String, f64)]) -> Result<SpatialFn> {
        Ok(SpatialFn {
            backing: vertex_table(g, table)?,
        })
    }

    pub fn native<F>(f: F) -> SpatialFn
    where
        F: Fn(&MetricGraph, &Point) -> f64 + Send + Sync + 'static,
    {
        SpatialFn {
            backing: Backing::Native(Arc::new(move |g, p, _| f(g, p))),
        }
    }

    pub fn eval(&self, g: &MetricGraph, p: &Point) -> f64 {
        eval_backing(&self.backing, g, p, 0.0)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.backing, Backing::Const(_))
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self.backing {
            Backing::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn hash_into(&self, h: &mut Fnv64) {
        hash_backing(&self.backing, h);
    }

    /// Lifts to a time-independent space-time function.
    pub fn lift(&self) -> SpaceTimeFn {
        SpaceTimeFn {
            backing: self.backing.clone(),
        }
    }
}

fn vertex_table(g: &MetricGraph, table: &[(String, f64)]) -> Result<Backing> {
    let mut vals = vec![f64::NAN; g.n_vertices()];
    for (name, v) in table {
        let id = g
            .vertex_index(name)
            .ok_or_else(|| Error::Input(format!("table references unknown vertex `{name}`")))?;
        vals[id.0] = *v;
    }
    if let Some(i) = vals.iter().position(|v| v.is_nan()) {
        return Err(Error::Input(format!(
            "table is missing a value for vertex `{}`",
            g.vertex_name(crate::graph::VertexId(i))
        )));
    }
    Ok(Backing::VertexTable(vals))
}
