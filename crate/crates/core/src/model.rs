//! Types, type distributions and the per-type value surfaces `u ↦ V(T, u)`.
//!
//! A type is an index into an ordered chain; index order is set-inclusion
//! order of the underlying technology sets. Every type carries a concave
//! frontier giving the principal's best payoff for each agent payoff the
//! principal can deliver with that type's technologies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for hull collinearity and interval membership.
pub const HULL_TOL: f64 = 1e-9;

/// Absolute tolerance on the weight sum of a [`TypeChain`].
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TypeChain {
    labels: Vec<f64>,
    weights: Vec<f64>,
}

impl TypeChain {
    pub fn new(labels: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("type chain needs at least one type".into()));
        }
        if labels.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} type labels but {} weights",
                labels.len(),
                weights.len()
            )));
        }
        if labels.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("type labels must be finite".into()));
        }
        if let Some(i) = labels.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "type labels must be strictly increasing (positions {} and {})",
                i,
                i + 1
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { labels, weights })
    }

    /// Equal weight on every label.
    pub fn uniform(labels: Vec<f64>) -> Result<Self> {
        let n = labels.len().max(1);
        let weights = vec![1.0 / n as f64; labels.len()];
        Self::new(labels, weights)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.labels.clone(), weights)
    }
}

/// `V(u) = height - curvature * (u - peak)^2` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub height: f64,
    pub peak: f64,
    pub curvature: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Quadratic {
    pub fn new(height: f64, peak: f64, curvature: f64, lo: f64, hi: f64) -> Result<Self> {
        let q = Self { height, peak, curvature, lo, hi };
        q.check()?;
        Ok(q)
    }

    fn check(&self) -> Result<()> {
        let all = [self.height, self.peak, self.curvature, self.lo, self.hi];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("quadratic frontier has non-finite parameters".into()));
        }
        if self.curvature < 0.0 {
            return Err(Error::InvalidInput(format!(
                "curvature {} is negative; frontier would not be concave",
                self.curvature
            )));
        }
        if self.lo > self.hi {
            return Err(Error::InvalidInput(format!(
                "empty feasible interval [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    fn value(&self, u: f64) -> f64 {
        let d = u - self.peak;
        self.height - self.curvature * d * d
    }
}

/// Upper concave frontier given by its vertices, sorted by strictly
/// increasing agent payoff. Values between vertices are linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    vertices: Vec<(f64, f64)>,
}

impl Polyline {
    /// Upper concave hull of an arbitrary finite point cloud.
    pub fn hull(points: &[(f64, f64)]) -> Result<Self> {
        check_points(points)?;
        Ok(Self { vertices: upper_hull(points) })
    }

    /// Takes breakpoints that must already describe a concave function.
    pub fn from_breakpoints(points: &[(f64, f64)]) -> Result<Self> {
        check_points(points)?;
        let mut sorted = points.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = sorted.windows(2).find(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidInput(format!(
                "breakpoints must have distinct agent payoffs (repeated u = {})",
                w[0].0
            )));
        }
        for w in sorted.windows(3) {
            if cross(w[0], w[1], w[2]) > HULL_TOL {
                return Err(Error::InvalidInput(format!(
                    "breakpoints are not concave around u = {}",
                    w[1].0
                )));
            }
        }
        Ok(Self { vertices: upper_hull(&sorted) })
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    fn value(&self, u: f64) -> f64 {
        let vs = &self.vertices;
        if vs.len() == 1 || u <= vs[0].0 {
            return vs[0].1;
        }
        let last = vs[vs.len() - 1];
        if u >= last.0 {
            return last.1;
        }
        // first vertex with abscissa > u
        let k = vs.partition_point(|p| p.0 <= u);
        let (u0, v0) = vs[k - 1];
        let (u1, v1) = vs[k];
        if u == u0 {
            return v0;
        }
        v0 + (v1 - v0) * ((u - u0) / (u1 - u0))
    }

    /// Index `k` such that `u` lies on the edge `[k, k + 1]`, or the vertex
    /// index itself when `u` is a vertex abscissa.
    pub(crate) fn locate(&self, u: f64) -> Location {
        let vs = &self.vertices;
        if let Some(k) = vs.iter().position(|p| p.0 == u) {
            return Location::Vertex(k);
        }
        if u < vs[0].0 {
            return Location::Vertex(0);
        }
        if u > vs[vs.len() - 1].0 {
            return Location::Vertex(vs.len() - 1);
        }
        Location::Edge(vs.partition_point(|p| p.0 <= u) - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Location {
    Vertex(usize),
    Edge(usize),
}

/// One type's frontier `u ↦ V(T, u)` on its feasible interval.
#[derive(Debug, Clone, PartialEq)]
pub enum Frontier {
    Quadratic(Quadratic),
    Polyline(Polyline),
}

impl Frontier {
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        Polyline::hull(points).map(Frontier::Polyline)
    }

    pub fn interval(&self) -> (f64, f64) {
        match self {
            Frontier::Quadratic(q) => (q.lo, q.hi),
            Frontier::Polyline(p) => (p.vertices[0].0, p.vertices[p.vertices.len() - 1].0),
        }
    }

    pub fn lo(&self) -> f64 {
        self.interval().0
    }

    pub fn hi(&self) -> f64 {
        self.interval().1
    }

    /// `V(u)`; payoffs within [`HULL_TOL`] of the interval are clamped in.
    pub fn value_at(&self, u: f64) -> Option<f64> {
        let (lo, hi) = self.interval();
        if !u.is_finite() || u < lo - HULL_TOL || u > hi + HULL_TOL {
            return None;
        }
        let u = u.clamp(lo, hi);
        Some(match self {
            Frontier::Quadratic(q) => q.value(u),
            Frontier::Polyline(p) => p.value(u),
        })
    }

    /// Smallest maximizer of the frontier and the maximal value.
    ///
    /// Values within [`HULL_TOL`] of the maximum count as ties.
    pub fn peak(&self) -> (f64, f64) {
        match self {
            Frontier::Quadratic(q) => {
                let u = if q.curvature > 0.0 { q.peak.clamp(q.lo, q.hi) } else { q.lo };
                (u, q.value(u))
            }
            Frontier::Polyline(p) => {
                let vmax = p.vertices.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
                *p.vertices.iter().find(|v| v.1 >= vmax - HULL_TOL).expect("nonempty frontier")
            }
        }
    }

    /// Abscissae where the frontier should be probed when comparing it
    /// against another frontier on `[lo, hi]`.
    pub(crate) fn probe_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            Frontier::Quadratic(q) => out.push(q.peak),
            Frontier::Polyline(p) => out.extend(p.vertices.iter().map(|v| v.0)),
        }
        out.retain(|u| *u >= lo && *u <= hi);
        out
    }
}

/// Concave frontiers for every type of the chain plus the default
/// frontier describing the principal's options without any disclosure.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    frontiers: Vec<Frontier>,
    default: Frontier,
}

impl ValueSurface {
    pub fn new(frontiers: Vec<Frontier>, default: Frontier) -> Result<Self> {
        if frontiers.is_empty() {
            return Err(Error::InvalidInput("surface needs at least one type".into()));
        }
        for f in frontiers.iter().chain(std::iter::once(&default)) {
            if let Frontier::Quadratic(q) = f {
                q.check()?;
            }
        }
        Ok(Self { frontiers, default })
    }

    pub fn len(&self) -> usize {
        self.frontiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frontiers.is_empty()
    }

    pub fn frontiers(&self) -> &[Frontier] {
        &self.frontiers
    }

    pub fn frontier(&self, i: usize) -> &Frontier {
        &self.frontiers[i]
    }

    pub fn default_frontier(&self) -> &Frontier {
        &self.default
    }

    pub fn interval(&self, i: usize) -> (f64, f64) {
        self.frontiers[i].interval()
    }

    pub fn with_default(&self, default: Frontier) -> Result<Self> {
        Self::new(self.frontiers.clone(), default)
    }

    pub fn with_frontiers(&self, frontiers: Vec<Frontier>) -> Result<Self> {
        Self::new(frontiers, self.default.clone())
    }
}

/// Principal payoff `V(T_i, u)`.
pub fn eval_surface(surface: &ValueSurface, i: usize, u: f64) -> Result<f64> {
    let frontier = surface
        .frontiers
        .get(i)
        .ok_or_else(|| Error::InvalidInput(format!("type index {i} out of range")))?;
    frontier.value_at(u).ok_or_else(|| {
        let (lo, hi) = frontier.interval();
        Error::InfeasiblePromise { index: i, u, lo, hi }
    })
}

/// Builds a surface from raw per-type payoff pairs.
///
/// Each type's cloud is united with the default points and every smaller
/// type's points before convexification, so the result is nested by
/// construction.
pub fn build_surface(
    points_by_type: &[Vec<(f64, f64)>],
    default_points: &[(f64, f64)],
) -> Result<ValueSurface> {
    if points_by_type.is_empty() {
        return Err(Error::InvalidInput("no types given".into()));
    }
    let default = Polyline::hull(default_points)?;
    let mut carried: Vec<(f64, f64)> = default.vertices.clone();
    let mut frontiers = Vec::with_capacity(points_by_type.len());
    for (i, pts) in points_by_type.iter().enumerate() {
        check_points(pts).map_err(|e| Error::InvalidInput(format!("type {i}: {e}")))?;
        carried.extend_from_slice(pts);
        let hull = Polyline::hull(&carried)?;
        carried = hull.vertices.clone();
        frontiers.push(Frontier::Polyline(hull));
    }
    ValueSurface::new(frontiers, Frontier::Polyline(default))
}

fn check_points(points: &[(f64, f64)]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidInput("empty point list".into()));
    }
    if points.iter().any(|(u, v)| !u.is_finite() || !v.is_finite()) {
        return Err(Error::InvalidInput("point coordinates must be finite".into()));
    }
    Ok(())
}

/// z-component of `(b - a) × (c - a)`; negative when `b` lies above the
/// chord from `a` to `c`.
fn cross(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Relative cross-product tolerance below which three points count as
/// collinear in [`upper_hull`].
const COLLINEAR_TOL: f64 = 1e-12;

/// `b` lies on or below the chord from `a` to `c`, up to a tolerance
/// relative to the edge lengths.
fn not_above(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> bool {
    let scale = (b.0 - a.0).hypot(b.1 - a.1) * (c.0 - a.0).hypot(c.1 - a.1);
    cross(a, b, c) >= -COLLINEAR_TOL * scale
}

/// Upper concave hull by monotone chain. Collinear vertices are dropped.
pub fn upper_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    pts.dedup_by(|b, a| a.0 == b.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 && not_above(hull[hull.len() - 2], hull[hull.len() - 1], p) {
            hull.pop();
        }
        hull.push(p);
    }
    hull
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NestingViolation {
    /// Type `index - 1`'s interval is not inside type `index`'s.
    Interval { index: usize, inner: (f64, f64), outer: (f64, f64) },
    /// `V_{index-1}(u) > V_index(u)`.
    Pointwise { index: usize, u: f64, lower_type_value: f64, value: f64 },
    /// Default interval not inside type `index`'s interval.
    DefaultInterval { index: usize, default: (f64, f64), outer: (f64, f64) },
    /// Default frontier above type `index`'s frontier at `u`.
    DefaultPointwise { index: usize, u: f64, default_value: f64, value: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NestingReport {
    pub violations: Vec<NestingViolation>,
}

impl NestingReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

const PROBE_STEPS: usize = 200;

/// Abscissae on `[lo, hi]` where two frontiers are compared.
fn probes(a: &Frontier, b: &Frontier, lo: f64, hi: f64) -> Vec<f64> {
    let mut us: Vec<f64> = (0..=PROBE_STEPS)
        .map(|k| lo + (hi - lo) * k as f64 / PROBE_STEPS as f64)
        .collect();
    us.extend(a.probe_points(lo, hi));
    us.extend(b.probe_points(lo, hi));
    us.sort_by(f64::total_cmp);
    us.dedup();
    us
}

fn interval_inside(inner: (f64, f64), outer: (f64, f64)) -> bool {
    inner.0 >= outer.0 - HULL_TOL && inner.1 <= outer.1 + HULL_TOL
}

/// Lists every violation of interval nesting, pointwise monotonicity in
/// type, and containment of the default frontier.
pub fn validate_nesting(surface: &ValueSurface) -> NestingReport {
    let mut report = NestingReport::default();
    let def = surface.default_frontier();
    let def_iv = def.interval();
    for (i, f) in surface.frontiers().iter().enumerate() {
        let outer = f.interval();
        if !interval_inside(def_iv, outer) {
            report.violations.push(NestingViolation::DefaultInterval { index: i, default: def_iv, outer });
        }
        let (lo, hi) = (def_iv.0.max(outer.0), def_iv.1.min(outer.1));
        if lo <= hi {
            for u in probes(def, f, lo, hi) {
                let (dv, v) = (def.value_at(u).unwrap(), f.value_at(u).unwrap());
                if dv > v + HULL_TOL {
                    report.violations.push(NestingViolation::DefaultPointwise {
                        index: i,
                        u,
                        default_value: dv,
                        value: v,
                    });
                }
            }
        }
        if i == 0 {
            continue;
        }
        let prev = surface.frontier(i - 1);
        let inner = prev.interval();
        if !interval_inside(inner, outer) {
            report.violations.push(NestingViolation::Interval { index: i, inner, outer });
        }
        let (lo, hi) = (inner.0.max(outer.0), inner.1.min(outer.1));
        if lo > hi {
            continue;
        }
        for u in probes(prev, f, lo, hi) {
            let (pv, v) = (prev.value_at(u).unwrap(), f.value_at(u).unwrap());
            if pv > v + HULL_TOL {
                report.violations.push(NestingViolation::Pointwise {
                    index: i,
                    u,
                    lower_type_value: pv,
                    value: v,
                });
            }
        }
    }
    report
}

/// Agent payoffs promised to each type of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PromisedUtility(pub Vec<f64>);

impl PromisedUtility {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_monotone(&self, tol: f64) -> bool {
        self.0.windows(2).all(|w| w[1] >= w[0] - tol)
    }
}

impl From<Vec<f64>> for PromisedUtility {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(h: f64, p: f64, a: f64, lo: f64, hi: f64) -> Frontier {
        Frontier::Quadratic(Quadratic::new(h, p, a, lo, hi).unwrap())
    }

    #[test]
    fn triangle_hull_has_peak_at_apex() {
        let s = build_surface(&[vec![(0.0, 0.0), (2.0, 0.0), (1.0, 1.0)]], &[(0.0, 0.0)]).unwrap();
        let f = s.frontier(0);
        assert_eq!(f.interval(), (0.0, 2.0));
        assert_eq!(f.peak(), (1.0, 1.0));
    }

    #[test]
    fn singleton_cloud_is_degenerate() {
        let s = build_surface(&[vec![(0.5, 3.0)]], &[(0.5, 3.0)]).unwrap();
        assert_eq!(s.interval(0), (0.5, 0.5));
        assert_eq!(eval_surface(&s, 0, 0.5).unwrap(), 3.0);
    }

    #[test]
    fn clouds_are_united_with_smaller_types() {
        let s = build_surface(&[vec![(0.0, 1.0)], vec![(0.0, 0.0), (1.0, 2.0)]], &[(0.0, 0.0)]).unwrap();
        assert_eq!(eval_surface(&s, 1, 0.0).unwrap(), 1.0);
        assert_eq!(eval_surface(&s, 1, 1.0).unwrap(), 2.0);
        assert!((eval_surface(&s, 1, 0.25).unwrap() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_empty_and_nan_points() {
        assert!(matches!(build_surface(&[vec![]], &[(0.0, 0.0)]), Err(Error::InvalidInput(_))));
        assert!(matches!(
            build_surface(&[vec![(f64::NAN, 0.0)]], &[(0.0, 0.0)]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(build_surface(&[vec![(0.0, 0.0)]], &[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn quadratic_evaluation() {
        let s = ValueSurface::new(
            vec![quad(1.0, 1.0, 1.0, 0.0, 2.0), quad(2.0, 0.0, 0.25, 0.0, 2.0)],
            Frontier::from_points(&[(0.0, 0.0)]).unwrap(),
        )
        .unwrap();
        assert_eq!(eval_surface(&s, 0, 1.0).unwrap(), 1.0);
        assert!((eval_surface(&s, 1, 0.8).unwrap() - 1.84).abs() < 1e-15);
    }

    #[test]
    fn edge_midpoint_on_point_cloud() {
        let s = build_surface(&[vec![(0.0, 1.0), (1.0, 2.0)]], &[(0.0, 0.0)]).unwrap();
        assert_eq!(eval_surface(&s, 0, 0.5).unwrap(), 1.5);
    }

    #[test]
    fn out_of_interval_is_infeasible() {
        let s = build_surface(&[vec![(0.0, 1.0), (1.0, 2.0)]], &[(0.0, 0.0)]).unwrap();
        assert!(matches!(
            eval_surface(&s, 0, 1.5),
            Err(Error::InfeasiblePromise { index: 0, .. })
        ));
    }

    #[test]
    fn flat_top_peak_is_smallest_maximizer() {
        let f = Frontier::from_points(&[(0.0, 0.0), (1.0, 2.0), (3.0, 2.0), (4.0, 0.0)]).unwrap();
        assert_eq!(f.peak(), (1.0, 2.0));
        let flat = quad(3.0, 1.0, 0.0, -1.0, 2.0);
        assert_eq!(flat.peak(), (-1.0, 3.0));
    }

    #[test]
    fn breakpoints_must_be_concave() {
        assert!(Polyline::from_breakpoints(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.5)]).is_err());
        let p = Polyline::from_breakpoints(&[(0.0, 0.0), (1.0, 1.0), (2.0, 1.5)]).unwrap();
        assert_eq!(p.vertices().len(), 3);
    }

    #[test]
    fn nested_quadratics_are_valid() {
        let s = ValueSurface::new(
            vec![
                quad(1.0, 1.0, 1.0, 0.0, 2.0),
                quad(2.0, 0.0, 0.25, 0.0, 2.0),
                quad(4.0, 2.0, 0.25, 0.0, 2.0),
            ],
            Frontier::from_points(&[(0.0, 0.0)]).unwrap(),
        )
        .unwrap();
        assert!(validate_nesting(&s).is_valid());
    }

    #[test]
    fn identical_frontiers_are_valid() {
        let f = quad(1.0, 1.0, 1.0, 0.0, 2.0);
        let s = ValueSurface::new(vec![f.clone(), f], Frontier::from_points(&[(0.0, 0.0)]).unwrap()).unwrap();
        assert!(validate_nesting(&s).is_valid());
    }

    #[test]
    fn shrinking_interval_is_reported_once() {
        let s = ValueSurface::new(
            vec![quad(1.0, 1.0, 1.0, 0.0, 2.0), quad(5.0, 1.0, 1.0, 0.0, 1.0)],
            Frontier::from_points(&[(0.0, -1.0)]).unwrap(),
        )
        .unwrap();
        let report = validate_nesting(&s);
        assert_eq!(report.violations.len(), 1, "{report:?}");
        assert!(matches!(report.violations[0], NestingViolation::Interval { index: 1, .. }));
    }

    #[test]
    fn pointwise_drop_is_reported() {
        let s = ValueSurface::new(
            vec![quad(2.0, 1.0, 1.0, 0.0, 2.0), quad(1.0, 1.0, 1.0, 0.0, 2.0)],
            Frontier::from_points(&[(0.0, -5.0)]).unwrap(),
        )
        .unwrap();
        let report = validate_nesting(&s);
        assert!(!report.is_valid());
        assert!(report
            .violations
            .iter()
            .all(|v| matches!(v, NestingViolation::Pointwise { index: 1, .. })));
    }

    #[test]
    fn default_above_frontier_is_reported() {
        let s = ValueSurface::new(
            vec![quad(1.0, 1.0, 1.0, 0.0, 2.0)],
            Frontier::from_points(&[(0.0, 5.0)]).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            validate_nesting(&s).violations[0],
            NestingViolation::DefaultPointwise { index: 0, .. }
        ));
    }
}
