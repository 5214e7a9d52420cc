//! Metric graphs: finite weighted graphs whose edges are intervals, so that
//! points may sit anywhere along an edge and distances are intrinsic
//! shortest-path lengths.
//!
//! A connected metric graph is a compact geodesic space, which makes every
//! distance, ball and geodesic query here exact up to floating-point
//! rounding: vertex-to-vertex distances come from an all-pairs table built
//! once at construction, and on-edge points are handled by closed-form
//! corrections against that table.

use crate::error::{Error, Result};
use crate::hash::Fnv64;
use serde::{Deserialize, Serialize};

/// Inclusion tolerance for metric balls. Mesh offsets and radii are both
/// rounded floats, so boundary membership is decided with a small relative
/// slack rather than an exact comparison.
pub fn ball_slack(r: f64) -> f64 {
    1e-9 * (1.0 + r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VertexId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

#[derive(Debug, Clone)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub len: f64,
}

/// A location on the graph: either a vertex or an interior position along
/// an edge. Offsets equal to `0` or the full edge length canonicalize to
/// the corresponding vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    Vertex(VertexId),
    OnEdge { edge: EdgeId, offset: f64 },
}

impl Point {
    pub fn vertex(i: usize) -> Point {
        Point::Vertex(VertexId(i))
    }

    pub fn on_edge(e: usize, offset: f64) -> Point {
        Point::OnEdge {
            edge: EdgeId(e),
            offset,
        }
    }
}

/// A point of the space-time cylinder `graph x [0, T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimePoint {
    pub x: Point,
    pub t: f64,
}

pub struct MetricGraph {
    vertex_names: Vec<String>,
    edges: Vec<Edge>,
    incident: Vec<Vec<EdgeId>>,
    dist_vv: Vec<Vec<f64>>,
    /// next_vv[i][j]: first intermediate vertex on a shortest path i -> j.
    next_vv: Vec<Vec<usize>>,
    /// Cheapest direct edge between a vertex pair, when one exists.
    best_edge: Vec<Vec<Option<EdgeId>>>,
}

impl std::fmt::Debug for MetricGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricGraph")
            .field("n_vertices", &self.vertex_names.len())
            .field(
                "edges",
                &self
                    .edges
                    .iter()
                    .map(|e| (e.u.0, e.v.0, e.len))
                    .collect::<Vec<_>>(),
            )
            .finish()
    }
}

impl MetricGraph {
    /// Builds a graph and its all-pairs distance table.
    ///
    /// Fails on empty vertex sets, nonpositive edge lengths, unknown edge
    /// endpoints and disconnected graphs.
    pub fn new(vertex_names: Vec<String>, edges: Vec<(usize, usize, f64)>) -> Result<MetricGraph> {
        let n = vertex_names.len();
        if n == 0 {
            return Err(Error::InvalidGraph("no vertices".into()));
        }
        let mut es = Vec::with_capacity(edges.len());
        for (idx, &(u, v, len)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {idx} references unknown vertex"
                )));
            }
            if !(len > 0.0) || !len.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "edge {idx} has nonpositive length {len}"
                )));
            }
            es.push(Edge {
                u: VertexId(u),
                v: VertexId(v),
                len,
            });
        }

        let mut incident = vec![Vec::new(); n];
        for (i, e) in es.iter().enumerate() {
            incident[e.u.0].push(EdgeId(i));
            if e.v != e.u {
                incident[e.v.0].push(EdgeId(i));
            }
        }

        // Floyd-Warshall over vertices with next-hop reconstruction.
        let inf = f64::INFINITY;
        let mut dist = vec![vec![inf; n]; n];
        let mut next = vec![vec![usize::MAX; n]; n];
        let mut best_edge = vec![vec![None; n]; n];
        for i in 0..n {
            dist[i][i] = 0.0;
            next[i][i] = i;
        }
        for (idx, e) in es.iter().enumerate() {
            let (a, b) = (e.u.0, e.v.0);
            if a == b {
                continue;
            }
            if e.len < dist[a][b] {
                dist[a][b] = e.len;
                dist[b][a] = e.len;
                next[a][b] = b;
                next[b][a] = a;
                best_edge[a][b] = Some(EdgeId(idx));
                best_edge[b][a] = Some(EdgeId(idx));
            }
        }
        for k in 0..n {
            for i in 0..n {
                if dist[i][k] == inf {
                    continue;
                }
                for j in 0..n {
                    let via = dist[i][k] + dist[k][j];
                    if via < dist[i][j] {
                        dist[i][j] = via;
                        next[i][j] = next[i][k];
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if dist[i][j] == inf {
                    return Err(Error::InvalidGraph(format!(
                        "graph is disconnected: no path from `{}` to `{}`",
                        vertex_names[i], vertex_names[j]
                    )));
                }
            }
        }

        Ok(MetricGraph {
            vertex_names,
            edges: es,
            incident,
            dist_vv: dist,
            next_vv: next,
            best_edge,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_names.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertex_names[v.0]
    }

    pub fn vertex_index(&self, name: &str) -> Option<VertexId> {
        self.vertex_names.iter().position(|n| n == name).map(VertexId)
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_distance(&self, a: VertexId, b: VertexId) -> f64 {
        self.dist_vv[a.0][b.0]
    }

    /// Deterministic content hash over names, topology and lengths.
    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write_usize(self.vertex_names.len());
        for name in &self.vertex_names {
            h.write_str(name);
        }
        h.write_usize(self.edges.len());
        for e in &self.edges {
            h.write_usize(e.u.0).write_usize(e.v.0).write_f64(e.len);
        }
        h.finish()
    }

    /// Validates a point and snaps endpoint offsets to the incident vertex.
    pub fn canonical(&self, p: &Point) -> Result<Point> {
        match *p {
            Point::Vertex(v) => {
                if v.0 >= self.n_vertices() {
                    return Err(Error::InvalidPoint(format!("vertex {} out of range", v.0)));
                }
                Ok(Point::Vertex(v))
            }
            Point::OnEdge { edge, offset } => {
                if edge.0 >= self.edges.len() {
                    return Err(Error::InvalidPoint(format!("edge {} out of range", edge.0)));
                }
                let len = self.edges[edge.0].len;
                if !offset.is_finite() || offset < -1e-12 || offset > len + 1e-12 {
                    return Err(Error::InvalidPoint(format!(
                        "offset {offset} outside [0, {len}] on edge {}",
                        edge.0
                    )));
                }
                if offset <= 0.0 {
                    Ok(Point::Vertex(self.edges[edge.0].u))
                } else if offset >= len {
                    Ok(Point::Vertex(self.edges[edge.0].v))
                } else {
                    Ok(Point::OnEdge { edge, offset })
                }
            }
        }
    }

    /// Edge coordinates `(edge, offset, len)` of a canonical point. A vertex
    /// reports coordinates on its lowest-indexed incident edge.
    pub fn edge_coords(&self, p: &Point) -> Result<(EdgeId, f64, f64)> {
        match self.canonical(p)? {
            Point::OnEdge { edge, offset } => Ok((edge, offset, self.edges[edge.0].len)),
            Point::Vertex(v) => {
                let e = self
                    .incident[v.0]
                    .first()
                    .copied()
                    .ok_or_else(|| Error::InvalidPoint(format!("isolated vertex {}", v.0)))?;
                let edge = &self.edges[e.0];
                let offset = if edge.u == v { 0.0 } else { edge.len };
                Ok((e, offset, edge.len))
            }
        }
    }

    /// Intrinsic shortest-path distance between two points.
    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        let p = self.canonical(p)?;
        let q = self.canonical(q)?;
        let d = self.route(&p, &q)?.0;
        if !d.is_finite() {
            return Err(Error::InfiniteDistance);
        }
        Ok(d)
    }

    /// Max-metric distance on the space-time cylinder.
    pub fn spacetime_distance(&self, z1: &SpaceTimePoint, z2: &SpaceTimePoint) -> Result<f64> {
        let dx = self.distance(&z1.x, &z2.x)?;
        Ok(dx.max((z1.t - z2.t).abs()))
    }

    /// Shortest route between canonical points: total length plus the choice
    /// of exit/entry vertices (`None` means the direct along-edge segment).
    fn route(&self, p: &Point, q: &Point) -> Result<(f64, Option<(VertexId, VertexId)>)> {
        // Candidate exits: (cost to reach vertex, vertex).
        let exits = |pt: &Point| -> Vec<(f64, VertexId)> {
            match *pt {
                Point::Vertex(v) => vec![(0.0, v)],
                Point::OnEdge { edge, offset } => {
                    let e = &self.edges[edge.0];
                    vec![(offset, e.u), (e.len - offset, e.v)]
                }
            }
        };
        let mut best = f64::INFINITY;
        let mut via = None;
        if let (Point::OnEdge { edge: e1, offset: o1 }, Point::OnEdge { edge: e2, offset: o2 }) =
            (p, q)
        {
            if e1 == e2 {
                best = (o1 - o2).abs();
            }
        }
        if p == q {
            return Ok((0.0, None));
        }
        for &(c1, a) in &exits(p) {
            for &(c2, b) in &exits(q) {
                let d = c1 + self.dist_vv[a.0][b.0] + c2;
                if d < best {
                    best = d;
                    via = Some((a, b));
                }
            }
        }
        Ok((best, via))
    }

    /// Vertex sequence of a shortest path between two vertices.
    fn vertex_path(&self, a: VertexId, b: VertexId) -> Vec<VertexId> {
        let mut path = vec![a];
        let mut cur = a.0;
        while cur != b.0 {
            cur = self.next_vv[cur][b.0];
            path.push(VertexId(cur));
        }
        path
    }

    /// Samples a shortest path from `p` to `q` at arc-length gaps at most
    /// `step`. The returned polyline starts at `p`, ends at `q`, and its
    /// total arc length equals `distance(p, q)`.
    pub fn geodesic_path(&self, p: &Point, q: &Point, step: f64) -> Result<Vec<Point>> {
        if !(step > 0.0) {
            return Err(Error::Domain(format!("geodesic step must be positive, got {step}")));
        }
        let p = self.canonical(p)?;
        let q = self.canonical(q)?;
        if p == q {
            return Ok(vec![p]);
        }
        let (total, via) = self.route(&p, &q)?;
        if !total.is_finite() {
            return Err(Error::InfiniteDistance);
        }

        // Assemble directed segments (edge, from_offset, to_offset).
        let mut segments: Vec<(EdgeId, f64, f64)> = Vec::new();
        match via {
            None => {
                if let (Point::OnEdge { edge, offset: o1 }, Point::OnEdge { offset: o2, .. }) =
                    (&p, &q)
                {
                    segments.push((*edge, *o1, *o2));
                } else {
                    return Err(Error::InvalidPoint("degenerate direct route".into()));
                }
            }
            Some((a, b)) => {
                if let Point::OnEdge { edge, offset } = p {
                    let e = &self.edges[edge.0];
                    let target = if a == e.u { 0.0 } else { e.len };
                    segments.push((edge, offset, target));
                }
                let vpath = self.vertex_path(a, b);
                for w in vpath.windows(2) {
                    let (x, y) = (w[0], w[1]);
                    let eid = self.best_edge[x.0][y.0].ok_or_else(|| {
                        Error::InvalidGraph(format!(
                            "no direct edge on shortest path {} -> {}",
                            x.0, y.0
                        ))
                    })?;
                    let e = &self.edges[eid.0];
                    if e.u == x {
                        segments.push((eid, 0.0, e.len));
                    } else {
                        segments.push((eid, e.len, 0.0));
                    }
                }
                if let Point::OnEdge { edge, offset } = q {
                    let e = &self.edges[edge.0];
                    let source = if b == e.u { 0.0 } else { e.len };
                    segments.push((edge, source, offset));
                }
            }
        }

        // Cumulative arc positions of segment boundaries.
        let seg_lens: Vec<f64> = segments.iter().map(|&(_, a, b)| (b - a).abs()).collect();
        let arc_total: f64 = seg_lens.iter().sum();

        let n_samples = ((total / step) - 1e-9).ceil().max(1.0) as usize;
        let mut pts = Vec::with_capacity(n_samples + 1);
        pts.push(p);
        for j in 1..n_samples {
            let s = arc_total * (j as f64) / (n_samples as f64);
            pts.push(self.point_at_arc(&segments, &seg_lens, s));
        }
        pts.push(q);
        Ok(pts)
    }

    fn point_at_arc(&self, segments: &[(EdgeId, f64, f64)], seg_lens: &[f64], s: f64) -> Point {
        let mut acc = 0.0;
        for (i, &(edge, from, to)) in segments.iter().enumerate() {
            let l = seg_lens[i];
            if s <= acc + l || i == segments.len() - 1 {
                let local = (s - acc).clamp(0.0, l);
                let offset = if to >= from { from + local } else { from - local };
                return self
                    .canonical(&Point::OnEdge { edge, offset })
                    .expect("segment offsets stay within the edge");
            }
            acc += l;
        }
        unreachable!("arc position beyond path end")
    }
}

/// A finite sample of the graph: all vertices plus equally spaced interior
/// points on every edge, with along-edge gaps at most `spacing`.
pub struct Mesh {
    pub points: Vec<Point>,
    pub spacing: f64,
    /// Along-edge neighbors of each mesh point with their exact gaps.
    pub adjacency: Vec<Vec<(usize, f64)>>,
    vertex_idx: Vec<usize>,
    per_edge: Vec<EdgeSample>,
}

struct EdgeSample {
    n_intervals: usize,
    /// Mesh indices of interior points in offset order.
    interior: Vec<usize>,
}

impl Mesh {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn vertex_index(&self, v: VertexId) -> usize {
        self.vertex_idx[v.0]
    }

    /// Mesh index of a canonical point, when the point is on the mesh.
    pub fn index_of(&self, g: &MetricGraph, p: &Point) -> Option<usize> {
        let p = g.canonical(p).ok()?;
        match p {
            Point::Vertex(v) => Some(self.vertex_idx[v.0]),
            Point::OnEdge { edge, offset } => {
                let es = &self.per_edge[edge.0];
                let len = g.edge(edge).len;
                let step = len / es.n_intervals as f64;
                let j = (offset / step).round() as usize;
                if j == 0 || j >= es.n_intervals {
                    return None;
                }
                let idx = es.interior[j - 1];
                if let Point::OnEdge { offset: o, .. } = self.points[idx] {
                    if (o - offset).abs() <= 1e-9 * (1.0 + len) {
                        return Some(idx);
                    }
                }
                None
            }
        }
    }

    pub fn content_hash(&self, g: &MetricGraph) -> u64 {
        let mut h = Fnv64::new();
        h.write_u64(g.content_hash());
        h.write_f64(self.spacing);
        h.write_usize(self.points.len());
        h.finish()
    }

    /// Mesh indices along one edge in offset order, endpoints included.
    pub fn edge_chain(&self, g: &MetricGraph, edge: EdgeId) -> Vec<usize> {
        let e = g.edge(edge);
        std::iter::once(self.vertex_idx[e.u.0])
            .chain(self.per_edge[edge.0].interior.iter().copied())
            .chain(std::iter::once(self.vertex_idx[e.v.0]))
            .collect()
    }

    /// Offset of a mesh point along the given edge; vertices map to the
    /// edge ends.
    pub fn offset_on_edge(&self, g: &MetricGraph, idx: usize, edge: EdgeId) -> f64 {
        let e = g.edge(edge);
        match self.points[idx] {
            Point::Vertex(v) => {
                if v == e.u {
                    0.0
                } else {
                    e.len
                }
            }
            Point::OnEdge { offset, .. } => offset,
        }
    }
}

/// Samples a mesh with along-edge gap at most `h`. Each edge is split into
/// `ceil(len / h)` equal intervals, so the construction is deterministic
/// and refines stably as `h` decreases.
pub fn sample_mesh(g: &MetricGraph, h: f64) -> Result<Mesh> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("mesh spacing must be positive, got {h}")));
    }
    let mut points = Vec::new();
    let mut vertex_idx = Vec::with_capacity(g.n_vertices());
    for v in 0..g.n_vertices() {
        vertex_idx.push(points.len());
        points.push(Point::Vertex(VertexId(v)));
    }
    let mut per_edge = Vec::with_capacity(g.n_edges());
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); points.len()];
    for (ei, e) in g.edges().iter().enumerate() {
        let n = ((e.len / h) - 1e-9).ceil().max(1.0) as usize;
        let mut interior = Vec::with_capacity(n.saturating_sub(1));
        for j in 1..n {
            let offset = e.len * (j as f64) / (n as f64);
            interior.push(points.len());
            points.push(Point::OnEdge {
                edge: EdgeId(ei),
                offset,
            });
            adjacency.push(Vec::new());
        }
        // Chain u - interior... - v with exact offset gaps.
        let chain: Vec<usize> = std::iter::once(vertex_idx[e.u.0])
            .chain(interior.iter().copied())
            .chain(std::iter::once(vertex_idx[e.v.0]))
            .collect();
        let offset_of = |idx: usize| -> f64 {
            match points[idx] {
                Point::Vertex(v) => {
                    if v == e.u {
                        0.0
                    } else {
                        e.len
                    }
                }
                Point::OnEdge { offset, .. } => offset,
            }
        };
        for w in chain.windows(2) {
            let gap = (offset_of(w[1]) - offset_of(w[0])).abs();
            adjacency[w[0]].push((w[1], gap));
            adjacency[w[1]].push((w[0], gap));
        }
        per_edge.push(EdgeSample {
            n_intervals: n,
            interior,
        });
    }
    Ok(Mesh {
        points,
        spacing: h,
        adjacency,
        vertex_idx,
        per_edge,
    })
}

/// All mesh points within distance `r` of `p`, each with its exact distance,
/// in mesh-index order. Membership uses a small relative slack so that
/// rounded mesh gaps sitting exactly on the radius stay included.
pub fn ball(g: &MetricGraph, mesh: &Mesh, p: &Point, r: f64) -> Result<Vec<(usize, f64)>> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("ball radius must be nonnegative, got {r}")));
    }
    let p = g.canonical(p)?;
    let slack = ball_slack(r);
    let mut out = Vec::new();
    for (i, q) in mesh.points.iter().enumerate() {
        let d = g.distance(&p, q)?;
        if d <= r + slack {
            out.push((i, d));
        }
    }
    Ok(out)
}
