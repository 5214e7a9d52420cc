//! Hamiltonians `H(x, t, p)`, their Lagrangians via the Legendre transform,
//! and a numerical audit of the structural assumptions the solvers rely on:
//! monotone convex dependence on the momentum, superlinear coercivity, a
//! convex coercive lower envelope for the Lagrangian, bounded `L(.,.,0)`
//! and `L(.,.,1)`, and continuity moduli in space and time.

use crate::error::{Error, Result};
use crate::func::{SpaceTimeFn, SpatialFn};
use crate::graph::{MetricGraph, Point};
use crate::hash::Fnv64;
use serde::Serialize;
use std::sync::Arc;

/// Supported Hamiltonian shapes.
///
/// All forms act on the modulus of the gradient, so the momentum `p` is a
/// nonnegative scalar:
///
/// - `Eikonal`: `H = p - f(x, t)`, the prototype with unit-speed transport.
/// - `Power`: `H = a(x) p^alpha - f(x)` for `alpha > 1`, `inf a > 0`.
/// - `QuadLin`: `H = a(x) p^alpha + b(x) p - f(x)` with `b >= 0`.
/// - `Tabulated`: `H(p)` sampled at knots, constant in `(x, t)`,
///   interpolated linearly after a lower convex hull repair.
#[derive(Debug, Clone)]
pub enum HamiltonianForm {
    Eikonal {
        f: SpaceTimeFn,
    },
    Power {
        a: SpatialFn,
        alpha: f64,
        f: SpatialFn,
    },
    QuadLin {
        a: SpatialFn,
        b: SpatialFn,
        alpha: f64,
        f: SpatialFn,
    },
    Tabulated(TabulatedH),
}

#[derive(Debug, Clone)]
pub struct TabulatedH {
    pub p_knots: Vec<f64>,
    pub raw: Vec<f64>,
    repaired: Vec<f64>,
    /// Knot indices whose values were lifted onto the convex hull.
    pub repairs: Vec<usize>,
}

impl TabulatedH {
    pub fn new(p_knots: Vec<f64>, values: Vec<f64>) -> Result<TabulatedH> {
        if p_knots.len() != values.len() || p_knots.len() < 2 {
            return Err(Error::Input(
                "tabulated Hamiltonian needs at least two knots with matching values".into(),
            ));
        }
        if p_knots[0] != 0.0 {
            return Err(Error::Input("tabulated knots must start at p = 0".into()));
        }
        for w in p_knots.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Input("tabulated knots must be strictly increasing".into()));
            }
        }
        let repaired = lower_convex_hull_values(&p_knots, &values);
        let repairs = (0..values.len())
            .filter(|&i| (repaired[i] - values[i]).abs() > 1e-12 * (1.0 + values[i].abs()))
            .collect();
        Ok(TabulatedH {
            p_knots,
            raw: values,
            repaired,
            repairs,
        })
    }

    /// Linear interpolation of the repaired values; beyond the last knot the
    /// final segment slope extrapolates.
    pub fn eval(&self, p: f64) -> f64 {
        let n = self.p_knots.len();
        if p >= self.p_knots[n - 1] {
            let slope =
                (self.repaired[n - 1] - self.repaired[n - 2]) / (self.p_knots[n - 1] - self.p_knots[n - 2]);
            return self.repaired[n - 1] + slope * (p - self.p_knots[n - 1]);
        }
        let j = match self.p_knots.binary_search_by(|k| k.total_cmp(&p)) {
            Ok(j) => return self.repaired[j],
            Err(j) => j,
        };
        let (p0, p1) = (self.p_knots[j - 1], self.p_knots[j]);
        let s = (p - p0) / (p1 - p0);
        self.repaired[j - 1] * (1.0 - s) + self.repaired[j] * s
    }

    pub fn raw_at(&self, i: usize) -> f64 {
        self.raw[i]
    }

    /// Linear interpolation of the raw values, used by the audit so that
    /// declared data is judged as given rather than after hull repair.
    fn eval_raw(&self, p: f64) -> f64 {
        let n = self.p_knots.len();
        if p >= self.p_knots[n - 1] {
            let slope = (self.raw[n - 1] - self.raw[n - 2]) / (self.p_knots[n - 1] - self.p_knots[n - 2]);
            return self.raw[n - 1] + slope * (p - self.p_knots[n - 1]);
        }
        let j = match self.p_knots.binary_search_by(|k| k.total_cmp(&p)) {
            Ok(j) => return self.raw[j],
            Err(j) => j,
        };
        let (p0, p1) = (self.p_knots[j - 1], self.p_knots[j]);
        let s = (p - p0) / (p1 - p0);
        self.raw[j - 1] * (1.0 - s) + self.raw[j] * s
    }
}

/// Replaces the sampled values by their greatest convex minorant at the knots.
fn lower_convex_hull_values(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    // Monotone chain over the (x, y) points, keeping lower-hull vertices.
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut out = vec![0.0; xs.len()];
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        for i in a..=b {
            let s = if b == a { 0.0 } else { (xs[i] - xs[a]) / (xs[b] - xs[a]) };
            out[i] = ys[a] * (1.0 - s) + ys[b] * s;
        }
    }
    if let Some(&last) = hull.last() {
        out[last] = ys[last];
    }
    out
}

/// A Hamiltonian together with the time horizon it is posed on.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    pub form: HamiltonianForm,
    pub t_horizon: f64,
}

/// Exponent of the conjugate power law: `beta = alpha / (alpha - 1)`.
fn conjugate_beta(alpha: f64) -> f64 {
    alpha / (alpha - 1.0)
}

/// Coefficient of the conjugate power law for `H = a p^alpha`:
/// `L = c(a, alpha) q^beta` with
/// `c = (alpha - 1) alpha^(-alpha/(alpha-1)) a^(-1/(alpha-1))`.
pub fn power_conjugate_coeff(a: f64, alpha: f64) -> f64 {
    (alpha - 1.0) * alpha.powf(-alpha / (alpha - 1.0)) * a.powf(-1.0 / (alpha - 1.0))
}

impl HamiltonianSpec {
    pub fn eikonal(f: SpaceTimeFn, t_horizon: f64) -> HamiltonianSpec {
        HamiltonianSpec {
            form: HamiltonianForm::Eikonal { f },
            t_horizon,
        }
    }

    pub fn power(a: SpatialFn, alpha: f64, f: SpatialFn, t_horizon: f64) -> HamiltonianSpec {
        HamiltonianSpec {
            form: HamiltonianForm::Power { a, alpha, f },
            t_horizon,
        }
    }

    pub fn is_eikonal(&self) -> bool {
        matches!(self.form, HamiltonianForm::Eikonal { .. })
    }

    /// Evaluates `H(x, t, p)` for `p >= 0`.
    pub fn eval_h(&self, g: &MetricGraph, x: &Point, t: f64, p: f64) -> Result<f64> {
        if p < 0.0 {
            return Err(Error::Domain(format!("momentum must be nonnegative, got {p}")));
        }
        Ok(match &self.form {
            HamiltonianForm::Eikonal { f } => p - f.eval(g, x, t),
            HamiltonianForm::Power { a, alpha, f } => a.eval(g, x) * p.powf(*alpha) - f.eval(g, x),
            HamiltonianForm::QuadLin { a, b, alpha, f } => {
                a.eval(g, x) * p.powf(*alpha) + b.eval(g, x) * p - f.eval(g, x)
            }
            HamiltonianForm::Tabulated(tab) => tab.eval(p),
        })
    }

    /// Evaluates the Lagrangian `L(x, t, q) = sup_{p >= 0} (pq - H(x, t, p))`
    /// for `q >= 0`. Closed forms are used for the analytic shapes; the
    /// tabulated shape takes the exact conjugate of its piecewise-linear
    /// interpolant. The eikonal wall returns `+inf` for speeds above 1; a
    /// genuinely diverging supremum (bounded-slope Hamiltonian asked for a
    /// faster speed) is a coercivity error.
    pub fn lagrangian(&self, g: &MetricGraph, x: &Point, t: f64, q: f64) -> Result<f64> {
        if q < 0.0 {
            return Err(Error::Domain(format!("speed must be nonnegative, got {q}")));
        }
        let v = self.lagrangian_unchecked(g, x, t, q);
        if !v.is_finite() && !self.is_eikonal() {
            return Err(Error::Coercivity(format!(
                "conjugate supremum diverges at speed {q}: the Hamiltonian slope is bounded"
            )));
        }
        Ok(v)
    }

    pub(crate) fn lagrangian_unchecked(&self, g: &MetricGraph, x: &Point, t: f64, q: f64) -> f64 {
        match &self.form {
            HamiltonianForm::Eikonal { f } => {
                if q <= 1.0 {
                    f.eval(g, x, t)
                } else {
                    f64::INFINITY
                }
            }
            HamiltonianForm::Power { a, alpha, f } => {
                let av = a.eval(g, x);
                power_conjugate_coeff(av, *alpha) * q.powf(conjugate_beta(*alpha)) + f.eval(g, x)
            }
            HamiltonianForm::QuadLin { a, b, alpha, f } => {
                let av = a.eval(g, x);
                let bv = b.eval(g, x);
                let excess = (q - bv).max(0.0);
                power_conjugate_coeff(av, *alpha) * excess.powf(conjugate_beta(*alpha))
                    + f.eval(g, x)
            }
            HamiltonianForm::Tabulated(tab) => {
                // Beyond the final slope the supremum runs away along the
                // extrapolated tail; within it, the conjugate of a convex
                // piecewise-linear function is attained at a knot.
                let n = tab.p_knots.len();
                let last_slope = (tab.repaired[n - 1] - tab.repaired[n - 2])
                    / (tab.p_knots[n - 1] - tab.p_knots[n - 2]);
                if q > last_slope * (1.0 + 1e-12) + 1e-15 {
                    return f64::INFINITY;
                }
                tab.p_knots
                    .iter()
                    .zip(&tab.repaired)
                    .map(|(&p, &h)| p * q - h)
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// Evaluates the Hamiltonian as declared, before any hull repair.
    fn eval_h_raw(&self, g: &MetricGraph, x: &Point, t: f64, p: f64) -> Result<f64> {
        match &self.form {
            HamiltonianForm::Tabulated(tab) => {
                if p < 0.0 {
                    return Err(Error::Domain(format!("momentum must be nonnegative, got {p}")));
                }
                Ok(tab.eval_raw(p))
            }
            _ => self.eval_h(g, x, t, p),
        }
    }

    pub fn hash_into(&self, h: &mut Fnv64) {
        match &self.form {
            HamiltonianForm::Eikonal { f } => {
                h.write_str("eikonal");
                f.hash_into(h);
            }
            HamiltonianForm::Power { a, alpha, f } => {
                h.write_str("power").write_f64(*alpha);
                a.hash_into(h);
                f.hash_into(h);
            }
            HamiltonianForm::QuadLin { a, b, alpha, f } => {
                h.write_str("quadlin").write_f64(*alpha);
                a.hash_into(h);
                b.hash_into(h);
                f.hash_into(h);
            }
            HamiltonianForm::Tabulated(tab) => {
                h.write_str("tabulated");
                for (&p, &v) in tab.p_knots.iter().zip(&tab.raw) {
                    h.write_f64(p).write_f64(v);
                }
            }
        }
        h.write_f64(self.t_horizon);
    }
}

/// Convex lower envelope `m(q)` of the Lagrangian over all `(x, t)`.
#[derive(Debug, Clone, Serialize)]
pub enum Envelope {
    /// `m(q) = c * max(q - shift, 0)^beta + offset`.
    PowerLaw {
        c: f64,
        beta: f64,
        shift: f64,
        offset: f64,
    },
    /// Lower convex hull points, interpolated linearly and extrapolated
    /// with the final slope.
    Hull(Vec<(f64, f64)>),
}

impl Envelope {
    pub fn eval(&self, q: f64) -> f64 {
        match self {
            Envelope::PowerLaw { c, beta, shift, offset } => {
                c * (q - shift).max(0.0).powf(*beta) + offset
            }
            Envelope::Hull(pts) => {
                let n = pts.len();
                if n == 1 {
                    return pts[0].1;
                }
                if q >= pts[n - 1].0 {
                    let slope = (pts[n - 1].1 - pts[n - 2].1) / (pts[n - 1].0 - pts[n - 2].0);
                    return pts[n - 1].1 + slope * (q - pts[n - 1].0);
                }
                if q <= pts[0].0 {
                    return pts[0].1;
                }
                let mut j = 1;
                while pts[j].0 < q {
                    j += 1;
                }
                let (q0, m0) = pts[j - 1];
                let (q1, m1) = pts[j];
                let s = (q - q0) / (q1 - q0);
                m0 * (1.0 - s) + m1 * s
            }
        }
    }

    /// Derivative from the right, used to certify that a linear bound stays
    /// below the envelope past a scan point.
    fn slope_at(&self, q: f64) -> f64 {
        match self {
            Envelope::PowerLaw { c, beta, shift, .. } => {
                let e = (q - shift).max(0.0);
                if e == 0.0 {
                    0.0
                } else {
                    c * beta * e.powf(beta - 1.0)
                }
            }
            Envelope::Hull(pts) => {
                let n = pts.len();
                if n < 2 {
                    return 0.0;
                }
                let mut j = 1;
                while j < n - 1 && pts[j].0 < q {
                    j += 1;
                }
                (pts[j].1 - pts[j - 1].1) / (pts[j].0 - pts[j - 1].0)
            }
        }
    }
}

type CustomL = Arc<dyn Fn(&MetricGraph, &Point, f64, f64) -> f64 + Send + Sync>;

enum ViewBacking {
    Spec(HamiltonianSpec),
    Custom(CustomL),
}

/// A Lagrangian ready for the solvers: an evaluator, the finiteness
/// boundary of the speed domain, the convex lower envelope and the audited
/// constants bounding `|L(.,.,0)|` and `|L(.,.,1)|`.
pub struct LagrangianView {
    backing: ViewBacking,
    /// `Some(q_max)` when `L = +inf` for `q > q_max` (eikonal: 1).
    pub q_sup: Option<f64>,
    pub envelope: Envelope,
    pub l0: f64,
    pub l1: f64,
    xt_independent: bool,
}

impl LagrangianView {
    /// Builds the view from a spec, sampling the graph to bound constants
    /// and to fit the envelope. Sample density: all vertices plus
    /// `AuditSamples::x_interior_per_edge` interior points per edge, and
    /// `AuditSamples::n_times` interior times.
    pub fn from_spec(spec: &HamiltonianSpec, g: &MetricGraph, samples: &AuditSamples) -> Result<LagrangianView> {
        samples.validate()?;
        let xs = sample_points(g, samples.x_interior_per_edge);
        let ts = sample_times(spec.t_horizon, samples.n_times);

        let mut l0 = 0.0f64;
        let mut l1 = 0.0f64;
        let mut inf_f = f64::INFINITY;
        for x in &xs {
            for &t in &ts {
                let v0 = spec.lagrangian_unchecked(g, x, t, 0.0);
                if !v0.is_finite() {
                    return Err(Error::Input("L(x, t, 0) is not finite".into()));
                }
                l0 = l0.max(v0.abs());
                let v1 = spec.lagrangian_unchecked(g, x, t, 1.0);
                if v1.is_finite() {
                    l1 = l1.max(v1.abs());
                }
                inf_f = inf_f.min(v0);
            }
        }

        let (q_sup, envelope, xt_independent) = match &spec.form {
            HamiltonianForm::Eikonal { f } => (
                Some(1.0),
                Envelope::Hull(vec![(0.0, inf_f), (1.0, inf_f)]),
                f.is_constant(),
            ),
            HamiltonianForm::Power { a, alpha, f } => {
                let sup_a = xs
                    .iter()
                    .map(|x| a.eval(g, x))
                    .fold(f64::NEG_INFINITY, f64::max);
                if !(sup_a > 0.0) {
                    return Err(Error::Input("power form needs a > 0".into()));
                }
                (
                    None,
                    Envelope::PowerLaw {
                        c: power_conjugate_coeff(sup_a, *alpha),
                        beta: conjugate_beta(*alpha),
                        shift: 0.0,
                        offset: inf_f,
                    },
                    a.is_constant() && f.is_constant(),
                )
            }
            HamiltonianForm::QuadLin { a, b, alpha, f } => {
                let sup_a = xs
                    .iter()
                    .map(|x| a.eval(g, x))
                    .fold(f64::NEG_INFINITY, f64::max);
                let sup_b = xs
                    .iter()
                    .map(|x| b.eval(g, x))
                    .fold(f64::NEG_INFINITY, f64::max);
                if !(sup_a > 0.0) {
                    return Err(Error::Input("quadlin form needs a > 0".into()));
                }
                (
                    None,
                    Envelope::PowerLaw {
                        c: power_conjugate_coeff(sup_a, *alpha),
                        beta: conjugate_beta(*alpha),
                        shift: sup_b,
                        offset: inf_f,
                    },
                    a.is_constant() && b.is_constant() && f.is_constant(),
                )
            }
            HamiltonianForm::Tabulated(_) => {
                // The conjugate is x,t-independent; sample its finite part
                // into a hull.
                let anchor = &xs[0];
                let mut pts = Vec::new();
                let mut q = 0.0;
                while q <= 64.0 {
                    let l = spec.lagrangian_unchecked(g, anchor, ts[0], q);
                    if l.is_finite() {
                        pts.push((q, l));
                    }
                    q += 0.5;
                }
                if pts.len() < 2 {
                    pts.push((0.0, spec.lagrangian_unchecked(g, anchor, ts[0], 0.0)));
                    pts.push((0.5, spec.lagrangian_unchecked(g, anchor, ts[0], 0.0)));
                }
                (None, Envelope::Hull(pts), true)
            }
        };

        Ok(LagrangianView {
            backing: ViewBacking::Spec(spec.clone()),
            q_sup,
            envelope,
            l0,
            l1,
            xt_independent,
        })
    }

    /// Wraps an arbitrary Lagrangian evaluator; used by tests and custom
    /// experiments.
    pub fn from_fn<F>(
        f: F,
        q_sup: Option<f64>,
        envelope: Envelope,
        l0: f64,
        l1: f64,
        xt_independent: bool,
    ) -> LagrangianView
    where
        F: Fn(&MetricGraph, &Point, f64, f64) -> f64 + Send + Sync + 'static,
    {
        LagrangianView {
            backing: ViewBacking::Custom(Arc::new(f)),
            q_sup,
            envelope,
            l0,
            l1,
            xt_independent,
        }
    }

    /// Evaluates the Lagrangian; `+inf` beyond the finiteness boundary.
    /// The boundary comparison carries a relative slack of one part in
    /// 1e12 so that speeds formed from rounded mesh distances do not fall
    /// off the admissible set.
    pub fn eval(&self, g: &MetricGraph, x: &Point, t: f64, q: f64) -> f64 {
        if let Some(q_max) = self.q_sup {
            if q > q_max * (1.0 + 1e-12) {
                return f64::INFINITY;
            }
            let q = q.min(q_max);
            return match &self.backing {
                ViewBacking::Spec(spec) => spec.lagrangian_unchecked(g, x, t, q),
                ViewBacking::Custom(f) => f(g, x, t, q),
            };
        }
        match &self.backing {
            ViewBacking::Spec(spec) => spec.lagrangian_unchecked(g, x, t, q),
            ViewBacking::Custom(f) => f(g, x, t, q),
        }
    }

    pub fn xt_independent(&self) -> bool {
        self.xt_independent
    }
}

/// Recovers `H(x, t, p) = sup_{q >= 0} (pq - L(x, t, q))` numerically: a
/// geometric coarse scan brackets the concave maximum and a ternary search
/// polishes it.
pub fn legendre_h_back(
    view: &LagrangianView,
    g: &MetricGraph,
    x: &Point,
    t: f64,
    p: f64,
) -> Result<f64> {
    if p < 0.0 {
        return Err(Error::Domain(format!("momentum must be nonnegative, got {p}")));
    }
    let objective = |q: f64| -> f64 {
        let l = view.eval(g, x, t, q);
        if l.is_finite() {
            p * q - l
        } else {
            f64::NEG_INFINITY
        }
    };

    let q_hi = match view.q_sup {
        Some(q_max) => q_max,
        None => {
            // Grow until the envelope guarantees a decreasing tail.
            let mut q = 16.0f64;
            loop {
                if view.envelope.eval(q) / q >= p + 1.0 {
                    break q;
                }
                q *= 2.0;
                if q > 1e12 {
                    return Err(Error::Coercivity(
                        "Lagrangian growth too slow to close the conjugate sup".into(),
                    ));
                }
            }
        }
    };

    // Coarse scan: {0} plus a geometric ladder.
    let n = 512;
    let q_lo = 1e-3f64.min(q_hi / 2.0);
    let ratio = (q_hi / q_lo).powf(1.0 / (n as f64 - 1.0));
    let mut grid = Vec::with_capacity(n + 1);
    grid.push(0.0);
    let mut q = q_lo;
    for _ in 0..n {
        grid.push(q.min(q_hi));
        q *= ratio;
    }
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, &qq) in grid.iter().enumerate() {
        let v = objective(qq);
        if v > best {
            best = v;
            best_i = i;
        }
    }

    // Ternary polish on the bracketing cell; the objective is concave in q.
    let lo = if best_i == 0 { 0.0 } else { grid[best_i - 1] };
    let hi = if best_i + 1 < grid.len() {
        grid[best_i + 1]
    } else {
        grid[best_i]
    };
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        if hi - lo < 1e-13 * (1.0 + hi) {
            break;
        }
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if objective(m1) < objective(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    Ok(best.max(objective(0.5 * (lo + hi))))
}

/// Sampling density for audits and view construction.
#[derive(Debug, Clone, Copy)]
pub struct AuditSamples {
    pub x_interior_per_edge: usize,
    pub n_times: usize,
    pub n_pq: usize,
}

impl Default for AuditSamples {
    fn default() -> Self {
        AuditSamples {
            x_interior_per_edge: 3,
            n_times: 9,
            n_pq: 64,
        }
    }
}

impl AuditSamples {
    fn validate(&self) -> Result<()> {
        if self.x_interior_per_edge < 3 || self.n_times < 3 || self.n_pq < 3 {
            return Err(Error::Config(
                "audit sample counts must be at least 3 per axis".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn sample_points(g: &MetricGraph, interior_per_edge: usize) -> Vec<Point> {
    let mut pts: Vec<Point> = (0..g.n_vertices()).map(Point::vertex).collect();
    for (ei, e) in g.edges().iter().enumerate() {
        for j in 1..=interior_per_edge {
            let offset = e.len * (j as f64) / (interior_per_edge as f64 + 1.0);
            pts.push(Point::on_edge(ei, offset));
        }
    }
    pts
}

pub(crate) fn sample_times(t_horizon: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| t_horizon * (j as f64 + 0.5) / (n as f64))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditWitness {
    pub point: String,
    pub t: f64,
    pub arg: f64,
    pub values: Vec<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub witness: Option<AuditWitness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditConstants {
    #[serde(rename = "L0")]
    pub l0: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    pub time_lipschitz: f64,
    /// Search radius for a unit Lipschitz bound, when the general route
    /// applies.
    #[serde(rename = "R")]
    pub search_radius_unit: Option<f64>,
}

/// Sampled verdicts for the structural assumptions. Verdicts are evidence,
/// not proofs: the sampled region is part of the report.
#[derive(Debug, Serialize)]
pub struct AssumptionAudit {
    pub conditions: Vec<ConditionReport>,
    /// `(R, inf over samples with p >= R of H/p)`.
    pub coercivity_profile: Vec<(f64, f64)>,
    pub constants: AuditConstants,
    pub eikonal_route_required: bool,
    pub repairs: Vec<String>,
    pub sampled_region: String,
}

impl AssumptionAudit {
    pub fn condition(&self, name: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn general_route_ok(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    /// The eikonal route only needs monotone convex dependence on `p` and
    /// bounded data, which the eikonal form has by shape.
    pub fn eikonal_route_ok(&self) -> bool {
        ["h1_monotone", "h1_convex", "h3_l0_bounded"]
            .iter()
            .all(|n| self.condition(n).map(|c| c.pass).unwrap_or(false))
    }
}

fn describe_point(g: &MetricGraph, p: &Point) -> String {
    match g.canonical(p) {
        Ok(Point::Vertex(v)) => format!("vertex {}", g.vertex_name(v)),
        Ok(Point::OnEdge { edge, offset }) => format!("edge {} offset {:.6}", edge.0, offset),
        Err(_) => "invalid point".into(),
    }
}

/// Checks (sampled) that `p -> H` is nondecreasing and midpoint-convex and
/// superlinearly coercive, that the Lagrangian admits a convex coercive
/// lower envelope and bounded values at `q = 0` and `q = 1`, and estimates
/// continuity moduli in space and time. Failures carry witnesses.
pub fn audit_assumptions(
    spec: &HamiltonianSpec,
    g: &MetricGraph,
    samples: &AuditSamples,
) -> Result<AssumptionAudit> {
    samples.validate()?;
    let xs = sample_points(g, samples.x_interior_per_edge);
    let ts = sample_times(spec.t_horizon, samples.n_times);
    let p_grid = momentum_grid(samples.n_pq, 32.0);

    let mut conditions = Vec::new();

    // Monotone and midpoint-convex in p.
    let mut mono = ConditionReport {
        name: "h1_monotone".into(),
        pass: true,
        detail: "p -> H nondecreasing on sampled grid".into(),
        witness: None,
    };
    let mut convex = ConditionReport {
        name: "h1_convex".into(),
        pass: true,
        detail: "p -> H midpoint-convex on sampled grid".into(),
        witness: None,
    };
    'outer: for x in &xs {
        for &t in &ts {
            let hv: Vec<f64> = p_grid
                .iter()
                .map(|&p| spec.eval_h_raw(g, x, t, p))
                .collect::<Result<_>>()?;
            for w in 0..p_grid.len() - 1 {
                let tol = 1e-9 * (1.0 + hv[w].abs());
                if hv[w + 1] < hv[w] - tol {
                    mono.pass = false;
                    mono.witness = Some(AuditWitness {
                        point: describe_point(g, x),
                        t,
                        arg: p_grid[w + 1],
                        values: vec![hv[w], hv[w + 1]],
                        detail: format!(
                            "H decreases from {} to {} between p = {} and p = {}",
                            hv[w],
                            hv[w + 1],
                            p_grid[w],
                            p_grid[w + 1]
                        ),
                    });
                }
            }
            for w in 0..p_grid.len() - 2 {
                let mid = 0.5 * (p_grid[w] + p_grid[w + 2]);
                let h_mid = spec.eval_h_raw(g, x, t, mid)?;
                let chord = 0.5 * (hv[w] + hv[w + 2]);
                let tol = 1e-9 * (1.0 + chord.abs());
                if h_mid > chord + tol {
                    convex.pass = false;
                    convex.witness = Some(AuditWitness {
                        point: describe_point(g, x),
                        t,
                        arg: mid,
                        values: vec![p_grid[w], p_grid[w + 2], h_mid, chord],
                        detail: format!(
                            "H({mid}) = {h_mid} exceeds the chord value {chord} over [{}, {}]",
                            p_grid[w],
                            p_grid[w + 2]
                        ),
                    });
                }
            }
            if !(mono.pass && convex.pass) {
                break 'outer;
            }
        }
    }

    // Superlinear coercivity profile: inf over samples of H/p for p >= R.
    let mut profile = Vec::new();
    for k in 0..=10 {
        let r = (1u64 << k) as f64;
        let mut inf = f64::INFINITY;
        for x in &xs {
            for &t in &ts {
                for mult in [1.0, 1.5, 2.0, 3.0] {
                    let p = r * mult;
                    let h = spec.eval_h(g, x, t, p)?;
                    inf = inf.min(h / p);
                }
            }
        }
        profile.push((r, inf));
    }
    let half = profile.len() / 2;
    let (r_mid, prof_mid) = profile[half];
    let (r_hi, prof_hi) = profile[profile.len() - 1];
    let growth_slope = if prof_mid > 0.0 && prof_hi > 0.0 {
        (prof_hi / prof_mid).ln() / (r_hi / r_mid).ln()
    } else if prof_hi > prof_mid {
        1.0
    } else {
        0.0
    };
    let coercive_pass = growth_slope >= 0.05 && prof_hi >= 1.5;
    conditions.push(mono);
    conditions.push(convex);
    conditions.push(ConditionReport {
        name: "h1_coercive".into(),
        pass: coercive_pass,
        detail: format!(
            "inf H/p over p >= R: {:.4} at R = {} rising to {:.4} at R = {} (log-log slope {:.4})",
            prof_mid, r_mid, prof_hi, r_hi, growth_slope
        ),
        witness: if coercive_pass {
            None
        } else {
            Some(AuditWitness {
                point: "all samples".into(),
                t: 0.0,
                arg: r_hi,
                values: vec![prof_mid, prof_hi],
                detail: "profile of inf H/p stays flat; superlinear growth not observed".into(),
            })
        },
    });

    // Envelope and its coercivity.
    let view = LagrangianView::from_spec(spec, g, samples)?;
    let q_grid = momentum_grid(samples.n_pq, 32.0);
    let mut h2 = ConditionReport {
        name: "h2_envelope".into(),
        pass: true,
        detail: "L >= m on verification grid; envelope superlinear".into(),
        witness: None,
    };
    for x in &xs {
        for &t in &ts {
            for &q in &q_grid {
                let l = view.eval(g, x, t, q);
                if !l.is_finite() {
                    continue;
                }
                let m = view.envelope.eval(q);
                if l < m - 1e-9 * (1.0 + m.abs()) {
                    h2.pass = false;
                    h2.witness = Some(AuditWitness {
                        point: describe_point(g, x),
                        t,
                        arg: q,
                        values: vec![l, m],
                        detail: format!("L = {l} dips below the envelope m = {m} at q = {q}"),
                    });
                }
            }
        }
    }
    if h2.pass {
        // m(q)/q must grow; compare tail slopes of the envelope.
        let s_lo = view.envelope.slope_at(4.0);
        let s_hi = view.envelope.slope_at(256.0);
        let coercive_env = view.q_sup.is_none() && s_hi > s_lo.max(0.0) + 0.5;
        if view.q_sup.is_some() {
            h2.pass = false;
            h2.detail = "Lagrangian is infinite beyond the unit speed; no finite coercive envelope"
                .into();
            h2.witness = Some(AuditWitness {
                point: "all samples".into(),
                t: 0.0,
                arg: 2.0,
                values: vec![f64::INFINITY],
                detail: "L(x, t, 2) = +inf".into(),
            });
        } else if !coercive_env {
            h2.pass = false;
            h2.detail = format!(
                "envelope slope {:.4} at q = 4 vs {:.4} at q = 256: m(q)/q growth not observed",
                s_lo, s_hi
            );
            h2.witness = Some(AuditWitness {
                point: "all samples".into(),
                t: 0.0,
                arg: 256.0,
                values: vec![s_lo, s_hi],
                detail: "envelope slopes do not grow".into(),
            });
        }
    }
    conditions.push(h2);

    // Bounded L at q = 0.
    conditions.push(ConditionReport {
        name: "h3_l0_bounded".into(),
        pass: view.l0.is_finite(),
        detail: format!("sup |L(x, t, 0)| = {} on samples", view.l0),
        witness: None,
    });

    // Space-time modulus of L scaled by 1 + |m(q)|.
    let mut h4_ratio_small = 0.0f64;
    let mut h4_ratio_large = 0.0f64;
    let scales = [0.05, 0.2];
    for x in &xs {
        for &t in &ts {
            for &q in &q_grid {
                let l = view.eval(g, x, t, q);
                if !l.is_finite() {
                    continue;
                }
                let weight = 1.0 + view.envelope.eval(q).abs();
                for (si, &dt) in scales.iter().enumerate() {
                    let t2 = (t + dt * spec.t_horizon).min(spec.t_horizon * 0.999);
                    let l2 = view.eval(g, x, t2, q);
                    if (t2 - t).abs() > 1e-12 && l2.is_finite() {
                        let ratio = (l - l2).abs() / ((t2 - t).abs() * weight);
                        if si == 0 {
                            h4_ratio_small = h4_ratio_small.max(ratio);
                        } else {
                            h4_ratio_large = h4_ratio_large.max(ratio);
                        }
                    }
                }
            }
        }
    }
    // Spatial part of the modulus over adjacent sample pairs.
    for w in xs.windows(2) {
        let d = g.distance(&w[0], &w[1])?;
        if d <= 0.0 {
            continue;
        }
        for &t in &ts {
            for &q in &q_grid {
                let l1v = view.eval(g, &w[0], t, q);
                let l2v = view.eval(g, &w[1], t, q);
                if l1v.is_finite() && l2v.is_finite() {
                    let weight = 1.0 + view.envelope.eval(q).abs();
                    let ratio = (l1v - l2v).abs() / (d * weight);
                    h4_ratio_large = h4_ratio_large.max(ratio);
                }
            }
        }
    }
    let h4_pass = h4_ratio_small.is_finite() && h4_ratio_large.is_finite();
    conditions.push(ConditionReport {
        name: "h4_modulus".into(),
        pass: h4_pass,
        detail: format!(
            "scaled variation of L per unit space-time distance: {:.6} (small scale), {:.6} (larger scales)",
            h4_ratio_small, h4_ratio_large
        ),
        witness: None,
    });

    // Time Lipschitz constant of L.
    let mut c_t = 0.0f64;
    for x in &xs {
        for w in ts.windows(2) {
            for &q in &q_grid {
                let l1v = view.eval(g, x, w[0], q);
                let l2v = view.eval(g, x, w[1], q);
                if l1v.is_finite() && l2v.is_finite() {
                    c_t = c_t.max((l1v - l2v).abs() / (w[1] - w[0]));
                }
            }
        }
    }
    conditions.push(ConditionReport {
        name: "h5_time_lipschitz".into(),
        pass: c_t.is_finite(),
        detail: format!("sampled time Lipschitz constant of L: {c_t:.6}"),
        witness: None,
    });

    let eikonal_route_required = spec.is_eikonal() || !coercive_pass;
    let search_radius_unit = if view.q_sup.is_none() && conditions.iter().all(|c| c.pass) {
        search_radius(&view, 1.0).ok()
    } else {
        None
    };
    let repairs = match &spec.form {
        HamiltonianForm::Tabulated(tab) => tab
            .repairs
            .iter()
            .map(|&i| {
                format!(
                    "knot {} at p = {} lifted from {} to convex hull",
                    i, tab.p_knots[i], tab.raw[i]
                )
            })
            .collect(),
        _ => Vec::new(),
    };

    Ok(AssumptionAudit {
        conditions,
        coercivity_profile: profile,
        constants: AuditConstants {
            l0: view.l0,
            l1: view.l1,
            time_lipschitz: c_t,
            search_radius_unit,
        },
        eikonal_route_required,
        repairs,
        sampled_region: format!(
            "{} spatial points, {} times in (0, {}), {} momentum samples up to 96",
            xs.len(),
            ts.len(),
            spec.t_horizon,
            q_grid.len()
        ),
    })
}

fn momentum_grid(n: usize, top: f64) -> Vec<f64> {
    let lo = 1e-3f64;
    let ratio = (top / lo).powf(1.0 / (n as f64 - 1.0));
    let mut grid = Vec::with_capacity(n + 1);
    grid.push(0.0);
    let mut p = lo;
    for _ in 0..n {
        grid.push(p);
        p *= ratio;
    }
    grid
}

/// Smallest tabulated `R > 1` such that `C (q + 1) <= m(q)` for all
/// `q >= R`, multiplied by a safety factor of 2. The envelope must be
/// superlinear; eikonal-type views are rejected since their natural search
/// radius is the unit speed.
pub fn search_radius(view: &LagrangianView, c: f64) -> Result<f64> {
    if view.q_sup.is_some() {
        return Err(Error::Coercivity(
            "eikonal-type Lagrangian: use unit radius".into(),
        ));
    }
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("Lipschitz bound must be nonnegative, got {c}")));
    }
    // Find a tail point where the envelope slope dominates c, so the
    // predicate is monotone past it.
    let mut q_hi = 16.0f64;
    loop {
        if view.envelope.slope_at(q_hi) >= 2.0 * c + 1.0 {
            break;
        }
        q_hi *= 2.0;
        if q_hi > 1e9 {
            return Err(Error::Coercivity(
                "envelope slope never dominates the Lipschitz bound; Lagrangian not superlinear"
                    .into(),
            ));
        }
    }
    if c * (q_hi + 1.0) - view.envelope.eval(q_hi) > 0.0 {
        // Predicate not yet true at the slope-dominating point; walk further.
        loop {
            q_hi *= 2.0;
            if c * (q_hi + 1.0) - view.envelope.eval(q_hi) <= 0.0 {
                break;
            }
            if q_hi > 1e9 {
                return Err(Error::Coercivity(
                    "linear bound never falls below the envelope".into(),
                ));
            }
        }
    }
    // Suffix scan on a fine grid over [1, q_hi].
    let step = 1e-3;
    let n = ((q_hi - 1.0) / step).ceil() as usize;
    let mut r0 = q_hi;
    for i in (0..=n).rev() {
        let q = 1.0 + step * i as f64;
        if c * (q + 1.0) - view.envelope.eval(q) <= 0.0 {
            r0 = q;
        } else {
            break;
        }
    }
    Ok(2.0 * r0.max(1.0))
}
