//! Optimal monotone promised utility on a discretized utility grid.
//!
//! The grid program maximizes `Σ f_i V_i(U_i)` over weakly increasing
//! grid-valued promises inside the monotone envelope of the
//! complete-information curve, with `U_0 >= ubar`. [`Problem::solve_dp`]
//! solves it exactly, [`Problem::brute_force`] enumerates it, and
//! [`Problem::structural_solve`] searches continuous promises that follow the
//! curve or stay flat, with at most `K` flat pieces.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::complete_info::CompleteInfoProfile;
use crate::error::{Error, Result};
use crate::model::{eval_surface, Frontier, PromisedUtility, ValueSurface};
use crate::scenario::Scenario;

/// Default tolerance for segment labeling on exact grids.
pub const SEGMENT_TOL: f64 = 1e-7;

/// Grid levels closer than this are merged.
pub const GRID_MERGE_TOL: f64 = 1e-12;

/// Slack on envelope and floor membership of grid levels.
pub const ENVELOPE_EPS: f64 = 1e-12;

/// Largest number of sequences [`Problem::brute_force`] will enumerate.
pub const BRUTE_FORCE_BUDGET: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SegmentLabel {
    FollowCurve,
    Constant,
}

/// Inclusive, 0-based index range with a label. `level` is the promise at
/// `from`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: usize,
    pub to: usize,
    pub label: SegmentLabel,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub promise: PromisedUtility,
    pub value: f64,
    pub segments: Vec<Segment>,
    #[serde(rename = "K_used")]
    pub k_used: usize,
}

impl Solution {
    pub fn follow_count(&self) -> usize {
        self.segments.iter().filter(|s| s.label == SegmentLabel::FollowCurve).count()
    }

    fn new(promise: Vec<f64>, value: f64, segments: Vec<Segment>) -> Self {
        let k_used = segments.iter().filter(|s| s.label == SegmentLabel::Constant).count();
        Self { promise: PromisedUtility(promise), value, segments, k_used }
    }
}

/// Sorted union of `grid`, the curve values and `ubar`. Levels within
/// [`GRID_MERGE_TOL`] of a curve value are replaced by it.
pub fn augment_grid(grid: &[f64], profile: &CompleteInfoProfile) -> Vec<f64> {
    let mut tagged: Vec<(f64, bool)> = grid.iter().map(|&u| (u, false)).collect();
    tagged.extend(profile.u_c.iter().map(|&u| (u, true)));
    tagged.push((profile.ubar, true));
    merge_levels(tagged)
}

/// Sorted union of several grids with near-duplicates merged.
pub fn union_grid(grids: &[&[f64]]) -> Vec<f64> {
    merge_levels(grids.iter().flat_map(|g| g.iter().map(|&u| (u, false))).collect())
}

fn merge_levels(mut tagged: Vec<(f64, bool)>) -> Vec<f64> {
    tagged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, bool)> = Vec::with_capacity(tagged.len());
    for (u, pinned) in tagged {
        match out.last_mut() {
            Some(last) if (u - last.0).abs() <= GRID_MERGE_TOL => {
                if pinned && !last.1 {
                    *last = (u, true);
                }
            }
            _ => out.push((u, pinned)),
        }
    }
    out.into_iter().map(|(u, _)| u).collect()
}

/// `Σ f_i V_i(U_i)` summed from the last type backwards.
pub fn objective(weights: &[f64], surface: &ValueSurface, promise: &[f64]) -> Result<f64> {
    if promise.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "promise has {} entries, expected {}",
            promise.len(),
            weights.len()
        )));
    }
    let mut acc = 0.0;
    for i in (0..promise.len()).rev() {
        let term = weights[i] * eval_surface(surface, i, promise[i])?;
        acc = if i + 1 == promise.len() { term } else { term + acc };
    }
    Ok(acc)
}

/// A discretized instance: weights, surface, profile and augmented grid.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    weights: &'a [f64],
    surface: &'a ValueSurface,
    profile: &'a CompleteInfoProfile,
    grid: Vec<f64>,
    /// Admissible grid index range per type, inclusive.
    ranges: Vec<(usize, usize)>,
    /// `f_i V_i(u_j)` for admissible `j`, indexed `[i][j - ranges[i].0]`.
    terms: Vec<Vec<f64>>,
}

impl<'a> Problem<'a> {
    pub fn new(
        weights: &'a [f64],
        surface: &'a ValueSurface,
        profile: &'a CompleteInfoProfile,
        grid: &[f64],
    ) -> Result<Self> {
        let n = weights.len();
        if surface.len() != n || profile.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} weights, {} frontiers, {} curve values",
                n,
                surface.len(),
                profile.len()
            )));
        }
        if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("utility grid must be nonempty and strictly increasing".into()));
        }
        let grid = augment_grid(grid, profile);
        let mut ranges = Vec::with_capacity(n);
        let mut terms = Vec::with_capacity(n);
        for i in 0..n {
            let (lo, hi) = surface.interval(i);
            let mut floor = profile.lower_closure[i].max(lo);
            if i == 0 {
                floor = floor.max(profile.ubar);
            }
            let ceil = profile.upper_closure[i].min(hi);
            let a = grid.partition_point(|&u| u < floor - ENVELOPE_EPS);
            let b = grid.partition_point(|&u| u <= ceil + ENVELOPE_EPS);
            if a >= b {
                return Err(Error::InfeasibleGrid { index: i });
            }
            let row = (a..b)
                .map(|j| eval_surface(surface, i, grid[j]).map(|v| weights[i] * v))
                .collect::<Result<Vec<_>>>()?;
            ranges.push((a, b - 1));
            terms.push(row);
        }
        Ok(Self { weights, surface, profile, grid, ranges, terms })
    }

    pub fn from_scenario(scenario: &'a Scenario, profile: &'a CompleteInfoProfile) -> Result<Self> {
        Self::new(scenario.weights(), &scenario.surface, profile, &scenario.u_grid)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn profile(&self) -> &CompleteInfoProfile {
        self.profile
    }

    fn term(&self, i: usize, j: usize) -> f64 {
        self.terms[i][j - self.ranges[i].0]
    }

    fn len(&self) -> usize {
        self.weights.len()
    }

    fn finish(&self, idx: &[usize], value: f64) -> Result<Solution> {
        let mut promise: Vec<f64> = idx.iter().map(|&j| self.grid[j]).collect();
        self.fill_weightless(&mut promise);
        let segments = extract_segments(&PromisedUtility(promise.clone()), &self.profile.u_c, SEGMENT_TOL)?;
        Ok(Solution::new(promise, value, segments))
    }

    /// Types with zero weight do not affect the objective. Each maximal run
    /// of them gets the curve clamped between its neighbors' promises, then
    /// a running maximum, so they track the curve wherever possible.
    fn fill_weightless(&self, promise: &mut [f64]) {
        let n = promise.len();
        let mut i = 0;
        while i < n {
            if self.weights[i] != 0.0 {
                i += 1;
                continue;
            }
            let mut j = i;
            while j + 1 < n && self.weights[j + 1] == 0.0 {
                j += 1;
            }
            let lb = if i == 0 { self.profile.ubar } else { promise[i - 1] };
            let ub = if j + 1 < n { promise[j + 1] } else { f64::INFINITY };
            let mut run = lb;
            for t in i..=j {
                run = run.max(self.profile.u_c[t].min(ub));
                promise[t] = run;
            }
            i = j + 1;
        }
    }

    /// Exact grid optimum; among optimal promises the first one found by
    /// taking the lowest optimal level type by type.
    pub fn solve_dp(&self) -> Result<Solution> {
        let n = self.len();
        // best[i][j - a_i]: value of types i.. when U_i = grid[j], and the
        // first index attaining the suffix maximum of row i + 1 from j on.
        let mut best: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut next: Vec<Vec<usize>> = vec![Vec::new(); n];
        best[n - 1] = self.terms[n - 1].clone();
        for i in (0..n - 1).rev() {
            let (a, b) = self.ranges[i];
            let (na, nb) = self.ranges[i + 1];
            // suffix maxima of row i + 1 with first argmax
            let len = nb - na + 1;
            let mut suf = vec![(f64::NEG_INFINITY, usize::MAX); len + 1];
            for t in (0..len).rev() {
                let v = best[i + 1][t];
                suf[t] = if v >= suf[t + 1].0 { (v, na + t) } else { suf[t + 1] };
            }
            let mut row = Vec::with_capacity(b - a + 1);
            let mut arg = Vec::with_capacity(b - a + 1);
            for j in a..=b {
                let t = j.max(na) - na;
                let (m, k) = if t < len { suf[t] } else { (f64::NEG_INFINITY, usize::MAX) };
                if k == usize::MAX {
                    row.push(f64::NEG_INFINITY);
                } else {
                    row.push(self.term(i, j) + m);
                }
                arg.push(k);
            }
            best[i] = row;
            next[i] = arg;
        }
        let (a0, _) = self.ranges[0];
        let mut top = (f64::NEG_INFINITY, usize::MAX);
        for (t, &v) in best[0].iter().enumerate() {
            if v > top.0 {
                top = (v, a0 + t);
            }
        }
        if top.1 == usize::MAX {
            return Err(Error::InfeasibleGrid { index: 0 });
        }
        let mut idx = vec![top.1];
        for i in 0..n - 1 {
            let j = idx[i];
            idx.push(next[i][j - self.ranges[i].0]);
        }
        self.finish(&idx, top.0)
    }

    /// Number of weakly increasing index sequences of length n over the
    /// augmented grid, an upper bound on the enumeration size.
    pub fn enumeration_size(&self) -> u128 {
        let n = self.len() as u128;
        let m = self.grid.len() as u128;
        // C(n + m - 1, n), saturating
        let mut c: u128 = 1;
        for k in 1..=n {
            c = match c.checked_mul(m - 1 + k) {
                Some(x) => x / k,
                None => return u128::MAX,
            };
        }
        c
    }

    /// Enumerates every admissible promise in lexicographic order and keeps
    /// the first one with the largest objective.
    pub fn brute_force(&self, budget: u128) -> Result<Solution> {
        let required = self.enumeration_size();
        if required > budget {
            return Err(Error::BudgetExceeded { required, budget });
        }
        let n = self.len();
        let mut idx: Vec<usize> = Vec::with_capacity(n);
        let mut best: Option<(f64, Vec<usize>)> = None;
        self.enumerate(&mut idx, &mut best);
        match best {
            Some((v, seq)) => self.finish(&seq, v),
            None => Err(Error::InfeasibleGrid { index: 0 }),
        }
    }

    fn enumerate(&self, idx: &mut Vec<usize>, best: &mut Option<(f64, Vec<usize>)>) {
        let i = idx.len();
        if i == self.len() {
            let mut acc = self.term(i - 1, idx[i - 1]);
            for s in (0..i - 1).rev() {
                acc += self.term(s, idx[s]);
            }
            if best.as_ref().is_none_or(|(v, _)| acc > *v) {
                *best = Some((acc, idx.clone()));
            }
            return;
        }
        let (a, b) = self.ranges[i];
        let start = idx.last().map_or(a, |&j| j.max(a));
        for j in start..=b {
            idx.push(j);
            self.enumerate(idx, best);
            idx.pop();
        }
    }

    /// Continuous search over promises that follow the curve or are flat,
    /// with at most `K` flat pieces. Flat levels are exact maximizers of the
    /// pooled objective on the admissible slice.
    pub fn structural_solve(&self) -> Result<Solution> {
        Structural::new(self.weights, self.surface, self.profile)?.solve()
    }
}

pub fn solve_dp(scenario: &Scenario, profile: &CompleteInfoProfile) -> Result<Solution> {
    Problem::from_scenario(scenario, profile)?.solve_dp()
}

pub fn brute_force(scenario: &Scenario, profile: &CompleteInfoProfile) -> Result<Solution> {
    Problem::from_scenario(scenario, profile)?.brute_force(BRUTE_FORCE_BUDGET)
}

pub fn structural_solve(scenario: &Scenario, profile: &CompleteInfoProfile) -> Result<Solution> {
    Structural::new(scenario.weights(), &scenario.surface, profile)?.solve()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    On,
    Above,
    Below,
}

/// Splits a promise into maximal runs that track the curve and runs that
/// are flat.
///
/// Indices within `tol` of the curve are on the curve. Off-curve indices
/// are grouped into maximal runs on the same side of the curve; each run
/// must be flat within `tol`. Adjacent flat runs at the same level are
/// merged, also across on-curve indices strictly inside them.
pub fn extract_segments(promise: &PromisedUtility, u_c: &[f64], tol: f64) -> Result<Vec<Segment>> {
    let u = promise.values();
    let n = u.len();
    if n != u_c.len() {
        return Err(Error::InvalidInput(format!("promise has {n} entries, curve has {}", u_c.len())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if let Some(i) = u.windows(2).position(|w| w[1] < w[0] - tol) {
        return Err(Error::StructureViolation {
            from: i,
            to: i + 1,
            reason: "promise decreases".into(),
        });
    }
    let marks: Vec<Mark> = (0..n)
        .map(|i| {
            if (u[i] - u_c[i]).abs() <= tol {
                Mark::On
            } else if u[i] > u_c[i] {
                Mark::Above
            } else {
                Mark::Below
            }
        })
        .collect();

    // (from, to, is_flat)
    let mut runs: Vec<(usize, usize, bool)> = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && marks[j + 1] == marks[i] {
            j += 1;
        }
        if marks[i] == Mark::On {
            runs.push((i, j, false));
        } else {
            let (lo, hi) = min_max(&u[i..=j]);
            if hi - lo > tol {
                return Err(Error::StructureViolation {
                    from: i,
                    to: j,
                    reason: format!("off-curve run varies by {}", hi - lo),
                });
            }
            runs.push((i, j, true));
        }
        i = j + 1;
    }

    // merge flat runs with flat runs (possibly across an on-curve gap) when
    // the union stays flat
    let flat_ok = |a: usize, b: usize| {
        let (lo, hi) = min_max(&u[a..=b]);
        hi - lo <= tol
    };
    let mut merged: Vec<(usize, usize, bool)> = Vec::new();
    let mut k = 0;
    while k < runs.len() {
        let mut cur = runs[k];
        k += 1;
        if cur.2 {
            loop {
                if k < runs.len() && runs[k].2 && flat_ok(cur.0, runs[k].1) {
                    cur.1 = runs[k].1;
                    k += 1;
                } else if k + 1 < runs.len() && !runs[k].2 && runs[k + 1].2 && flat_ok(cur.0, runs[k + 1].1) {
                    cur.1 = runs[k + 1].1;
                    k += 2;
                } else {
                    break;
                }
            }
        }
        merged.push(cur);
    }

    Ok(merged
        .into_iter()
        .map(|(from, to, flat)| Segment {
            from,
            to,
            label: if flat { SegmentLabel::Constant } else { SegmentLabel::FollowCurve },
            level: u[from],
        })
        .collect())
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn check_range(n: usize, range: (usize, usize)) -> Result<()> {
    if range.0 > range.1 || range.1 >= n {
        return Err(Error::InvalidProjection(format!(
            "index range {}..={} is not inside 0..{n}",
            range.0, range.1
        )));
    }
    Ok(())
}

const PROJECTION_EPS: f64 = 1e-12;

/// Replaces the promise on `range` by the running maximum of the curve,
/// floored at `anchor` (default: the promise at the left end).
///
/// Requires the promise to be weakly increasing and weakly above the curve
/// on the range, and `anchor` not above the promise at the left end.
pub fn project_running_max(
    promise: &PromisedUtility,
    u_c: &[f64],
    range: (usize, usize),
    anchor: Option<f64>,
) -> Result<PromisedUtility> {
    let u = promise.values();
    if u.len() != u_c.len() {
        return Err(Error::InvalidProjection("promise and curve lengths differ".into()));
    }
    check_range(u.len(), range)?;
    let (a, b) = range;
    if u[a..=b].windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidProjection("promise is not increasing on the range".into()));
    }
    if let Some(i) = (a..=b).find(|&i| u[i] < u_c[i] - PROJECTION_EPS) {
        return Err(Error::InvalidProjection(format!("promise is below the curve at index {i}")));
    }
    let anchor = anchor.unwrap_or(u[a]);
    if anchor > u[a] + PROJECTION_EPS {
        return Err(Error::InvalidProjection(format!("anchor {anchor} exceeds the promise {} at index {a}", u[a])));
    }
    let mut out = u.to_vec();
    let mut run = f64::NEG_INFINITY;
    for i in a..=b {
        run = run.max(u_c[i]);
        out[i] = anchor.max(run);
    }
    Ok(PromisedUtility(out))
}

/// Mirror image of [`project_running_max`]: the running minimum of the
/// curve from the right, capped at `anchor` (default: the promise at the
/// right end).
pub fn project_running_min(
    promise: &PromisedUtility,
    u_c: &[f64],
    range: (usize, usize),
    anchor: Option<f64>,
) -> Result<PromisedUtility> {
    let u = promise.values();
    if u.len() != u_c.len() {
        return Err(Error::InvalidProjection("promise and curve lengths differ".into()));
    }
    check_range(u.len(), range)?;
    let (a, b) = range;
    if u[a..=b].windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidProjection("promise is not increasing on the range".into()));
    }
    if let Some(i) = (a..=b).find(|&i| u[i] > u_c[i] + PROJECTION_EPS) {
        return Err(Error::InvalidProjection(format!("promise is above the curve at index {i}")));
    }
    let anchor = anchor.unwrap_or(u[b]);
    if anchor < u[b] - PROJECTION_EPS {
        return Err(Error::InvalidProjection(format!("anchor {anchor} is below the promise {} at index {b}", u[b])));
    }
    let mut out = u.to_vec();
    let mut run = f64::INFINITY;
    for i in (a..=b).rev() {
        run = run.min(u_c[i]);
        out[i] = anchor.min(run);
    }
    Ok(PromisedUtility(out))
}

/// Reassigns each type the promise of the lower type with the best interim
/// principal payoff so far (largest such type on ties).
pub fn monotonize_principal_payoff(surface: &ValueSurface, promise: &PromisedUtility) -> Result<PromisedUtility> {
    let u = promise.values();
    let vals = u
        .iter()
        .enumerate()
        .map(|(i, &x)| eval_surface(surface, i, x))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(u.len());
    let mut arg = 0;
    for i in 0..u.len() {
        if vals[i] >= vals[arg] {
            arg = i;
        }
        out.push(u[arg]);
    }
    Ok(PromisedUtility(out))
}

// ---------------------------------------------------------------------------
// structural search

const GOLDEN_ITERS: usize = 200;
const FOLLOW_TOL: f64 = 1e-9;

/// Pooled argmax keyed by block `(i, j)` and the bit patterns of its bounds.
type PoolCache = HashMap<(usize, usize, u64, u64), Option<f64>>;

/// Flat-piece solution of a block: promises, piece count and value.
type BlockSolution = Option<(Vec<f64>, usize, f64)>;

struct Structural<'a> {
    weights: &'a [f64],
    surface: &'a ValueSurface,
    profile: &'a CompleteInfoProfile,
    /// Admissible interval per type: feasible interval ∩ envelope.
    boxes: Vec<(f64, f64)>,
    pooled: std::cell::RefCell<PoolCache>,
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Follow,
    /// Flat block over `[i, j]` followed by a curve-following index (if any).
    Block(usize),
}

impl<'a> Structural<'a> {
    fn new(weights: &'a [f64], surface: &'a ValueSurface, profile: &'a CompleteInfoProfile) -> Result<Self> {
        let n = weights.len();
        if surface.len() != n || profile.len() != n {
            return Err(Error::InvalidInput("weights, surface and profile sizes differ".into()));
        }
        let boxes = (0..n)
            .map(|i| {
                let (lo, hi) = surface.interval(i);
                (lo.max(profile.lower_closure[i]), hi.min(profile.upper_closure[i]))
            })
            .collect();
        Ok(Self { weights, surface, profile, boxes, pooled: Default::default() })
    }

    fn value(&self, i: usize, u: f64) -> f64 {
        self.weights[i] * eval_surface(self.surface, i, u).unwrap_or(f64::NEG_INFINITY)
    }

    fn pooled_value(&self, a: usize, b: usize, c: f64) -> f64 {
        let mut acc = 0.0;
        for i in (a..=b).rev() {
            acc += self.value(i, c);
        }
        acc
    }

    /// Smallest maximizer of the pooled objective over types `a..=b` on `[lo, hi]`.
    fn pooled_argmax(&self, a: usize, b: usize, lo: f64, hi: f64) -> Option<f64> {
        if lo > hi {
            return None;
        }
        let key = (a, b, lo.to_bits(), hi.to_bits());
        if let Some(r) = self.pooled.borrow().get(&key) {
            return *r;
        }
        let fs = &self.surface.frontiers()[a..=b];
        let w = &self.weights[a..=b];
        let mut candidates = vec![lo, hi];
        if fs.iter().all(|f| matches!(f, Frontier::Quadratic(_))) {
            let (mut num, mut den) = (0.0, 0.0);
            for (f, &wi) in fs.iter().zip(w) {
                if let Frontier::Quadratic(q) = f {
                    num += wi * q.curvature * q.peak;
                    den += wi * q.curvature;
                }
            }
            if den > 0.0 {
                candidates.push((num / den).clamp(lo, hi));
            }
        } else if fs.iter().all(|f| matches!(f, Frontier::Polyline(_))) {
            for f in fs {
                if let Frontier::Polyline(p) = f {
                    candidates.extend(p.vertices().iter().map(|v| v.0).filter(|&u| u > lo && u < hi));
                }
            }
        } else {
            candidates.push(golden_section(|c| self.pooled_value(a, b, c), lo, hi));
        }
        candidates.sort_by(f64::total_cmp);
        let mut best: Option<(f64, f64)> = None;
        for c in candidates {
            let v = self.pooled_value(a, b, c);
            if best.is_none_or(|(bv, _)| v > bv + 1e-15 * bv.abs().max(1.0)) {
                best = Some((v, c));
            }
        }
        let r = best.map(|b| b.1);
        self.pooled.borrow_mut().insert(key, r);
        r
    }

    /// Best weakly increasing promise on `a..=b` with values in `[lb, ub]`
    /// and each type's box, by pooling adjacent violators.
    fn isotonic_block(&self, a: usize, b: usize, lb: f64, ub: f64) -> Option<Vec<f64>> {
        // pools: (start, end, level)
        let mut pools: Vec<(usize, usize, f64)> = Vec::new();
        for i in a..=b {
            let (lo, hi) = self.boxes[i];
            let mut cur = (i, i, self.pooled_argmax(i, i, lo.max(lb), hi.min(ub))?);
            while let Some(&last) = pools.last() {
                if last.2 <= cur.2 {
                    break;
                }
                pools.pop();
                let (lo, hi) = self.pool_box(last.0, cur.1, lb, ub);
                cur = (last.0, cur.1, self.pooled_argmax(last.0, cur.1, lo, hi)?);
            }
            pools.push(cur);
        }
        let mut out = Vec::with_capacity(b - a + 1);
        for (s, e, c) in pools {
            out.extend(std::iter::repeat_n(c, e - s + 1));
        }
        Some(out)
    }

    fn pool_box(&self, a: usize, b: usize, lb: f64, ub: f64) -> (f64, f64) {
        let lo = self.boxes[a..=b].iter().map(|x| x.0).fold(lb, f64::max);
        let hi = self.boxes[a..=b].iter().map(|x| x.1).fold(ub, f64::min);
        (lo, hi)
    }

    fn solve(&self) -> Result<Solution> {
        let n = self.weights.len();
        let u_c = &self.profile.u_c;
        let k_max = self.profile.k;
        if k_max == 0 {
            let value = objective(self.weights, self.surface, u_c)?;
            let segments = extract_segments(&PromisedUtility(u_c.clone()), u_c, SEGMENT_TOL)?;
            return Ok(Solution::new(u_c.clone(), value, segments));
        }
        let lb_at = |i: usize| if i == 0 { self.profile.ubar } else { u_c[i - 1] };

        // blocks[(i, j)]: flat-piece solution on i..=j with its piece count
        let mut blocks: HashMap<(usize, usize), BlockSolution> = HashMap::new();
        let mut block = |i: usize, j: usize| -> BlockSolution {
            blocks
                .entry((i, j))
                .or_insert_with(|| {
                    let ub = if j + 1 < n { u_c[j + 1] } else { f64::INFINITY };
                    let levels = self.isotonic_block(i, j, lb_at(i), ub)?;
                    let pieces = 1 + levels.windows(2).filter(|w| w[1] != w[0]).count();
                    let mut v = 0.0;
                    for t in (0..levels.len()).rev() {
                        v += self.value(i + t, levels[t]);
                    }
                    Some((levels, pieces, v))
                })
                .clone()
        };

        // best[i][k]: best value of types i.. given that U_{i-1} follows the
        // curve (or i == 0) and k flat pieces are still allowed
        let mut best = vec![vec![None::<(f64, Step)>; k_max + 1]; n + 1];
        for k in 0..=k_max {
            best[n][k] = Some((0.0, Step::Follow));
        }
        for i in (0..n).rev() {
            for k in 0..=k_max {
                let mut cand: Option<(f64, Step)> = None;
                let offer = |v: f64, s: Step, cand: &mut Option<(f64, Step)>| {
                    if cand.is_none_or(|(bv, _)| v > bv) {
                        *cand = Some((v, s));
                    }
                };
                if u_c[i] >= lb_at(i) - FOLLOW_TOL {
                    if let Some((rest, _)) = best[i + 1][k] {
                        offer(self.value(i, u_c[i]) + rest, Step::Follow, &mut cand);
                    }
                }
                for j in i..n {
                    let Some((_, pieces, v)) = block(i, j) else { continue };
                    if pieces > k {
                        continue;
                    }
                    let total = if j + 1 < n {
                        match best[j + 2][k - pieces] {
                            Some((rest, _)) => v + self.value(j + 1, u_c[j + 1]) + rest,
                            None => continue,
                        }
                    } else {
                        v
                    };
                    offer(total, Step::Block(j), &mut cand);
                }
                best[i][k] = cand;
            }
        }

        let Some((value, _)) = best[0][k_max] else {
            return Err(Error::InfeasibleGrid { index: 0 });
        };
        let mut promise = Vec::with_capacity(n);
        let mut segments = Vec::new();
        let (mut i, mut k) = (0, k_max);
        while i < n {
            let (_, step) = best[i][k].expect("reachable state");
            match step {
                Step::Follow => {
                    push_follow(&mut segments, i, u_c[i]);
                    promise.push(u_c[i]);
                    i += 1;
                }
                Step::Block(j) => {
                    let (levels, pieces, _) = block(i, j).expect("feasible block");
                    let mut s = i;
                    for t in i..=j {
                        if t == j || levels[t + 1 - i] != levels[t - i] {
                            segments.push(Segment { from: s, to: t, label: SegmentLabel::Constant, level: levels[s - i] });
                            s = t + 1;
                        }
                    }
                    promise.extend_from_slice(&levels);
                    k -= pieces;
                    if j + 1 < n {
                        push_follow(&mut segments, j + 1, u_c[j + 1]);
                        promise.push(u_c[j + 1]);
                    }
                    i = j + 2;
                }
            }
        }
        let _ = value;
        let value = objective(self.weights, self.surface, &promise)?;
        Ok(Solution::new(promise, value, segments))
    }
}

fn push_follow(segments: &mut Vec<Segment>, i: usize, level: f64) {
    if let Some(last) = segments.last_mut() {
        if last.label == SegmentLabel::FollowCurve && last.to + 1 == i {
            last.to = i;
            return;
        }
    }
    segments.push(Segment { from: i, to: i, label: SegmentLabel::FollowCurve, level });
}

/// Maximizer of a concave function on `[lo, hi]` by golden-section search.
pub fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERS {
        if b - a <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complete_info::complete_info_curve;
    use crate::model::{Quadratic, TypeChain};

    fn e1_surface() -> ValueSurface {
        let q = |h, p, a| Frontier::Quadratic(Quadratic::new(h, p, a, 0.0, 2.0).unwrap());
        ValueSurface::new(
            vec![q(1.0, 1.0, 1.0), q(2.0, 0.0, 0.25), q(4.0, 2.0, 0.25)],
            Frontier::from_points(&[(0.0, 0.0)]).unwrap(),
        )
        .unwrap()
    }

    fn three_types(grid: Vec<f64>) -> Scenario {
        let chain = TypeChain::uniform(vec![1.0, 2.0, 3.0]).unwrap();
        Scenario::new(chain, e1_surface(), grid).unwrap()
    }

    fn step_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
        (0..=steps).map(|k| lo + (hi - lo) * k as f64 / steps as f64).collect()
    }

    #[test]
    fn e1_dp_solution() {
        let s = three_types(step_grid(0.0, 2.0, 10));
        let p = complete_info_curve(&s.surface);
        let sol = solve_dp(&s, &p).unwrap();
        let u = sol.promise.values();
        assert!((u[0] - 0.8).abs() < 1e-12 && (u[1] - 0.8).abs() < 1e-12 && u[2] == 2.0, "{u:?}");
        assert!((sol.value - 34.0 / 15.0).abs() < 1e-9);
        assert_eq!(sol.segments.len(), 2);
        assert_eq!(sol.segments[0].label, SegmentLabel::Constant);
        assert_eq!((sol.segments[0].from, sol.segments[0].to), (0, 1));
        assert_eq!(sol.segments[1].label, SegmentLabel::FollowCurve);
        assert_eq!(sol.k_used, 1);
    }

    #[test]
    fn e1_brute_force_matches_bitwise() {
        let s = three_types(vec![0.0, 0.4, 0.8, 1.2, 1.6, 2.0]);
        let p = complete_info_curve(&s.surface);
        let dp = solve_dp(&s, &p).unwrap();
        let bf = brute_force(&s, &p).unwrap();
        assert_eq!(dp.value.to_bits(), bf.value.to_bits());
        assert_eq!(dp.promise, bf.promise);
    }

    #[test]
    fn e1_structural_agrees() {
        let s = three_types(step_grid(0.0, 2.0, 10));
        let p = complete_info_curve(&s.surface);
        let st = structural_solve(&s, &p).unwrap();
        let u = st.promise.values();
        assert!((u[0] - 0.8).abs() < 1e-12 && (u[1] - 0.8).abs() < 1e-12 && u[2] == 2.0, "{u:?}");
        assert!((st.value - 34.0 / 15.0).abs() < 1e-9);
    }

    #[test]
    fn monotone_curve_is_optimal() {
        let q = |h, p| Frontier::Quadratic(Quadratic::new(h, p, 1.0, 0.0, 2.0).unwrap());
        let surface =
            ValueSurface::new(vec![q(1.0, 0.0), q(2.0, 1.0), q(3.0, 2.0)], Frontier::from_points(&[(0.0, -10.0)]).unwrap())
                .unwrap();
        let s = Scenario::new(TypeChain::new(vec![0.0, 1.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap(), surface, step_grid(0.0, 2.0, 7))
            .unwrap();
        let p = complete_info_curve(&s.surface);
        let sol = solve_dp(&s, &p).unwrap();
        assert_eq!(sol.promise.values(), &[0.0, 1.0, 2.0]);
        assert!((sol.value - (0.2 + 1.0 + 0.9)).abs() < 1e-12);
        assert_eq!(sol.segments.len(), 1);
    }

    #[test]
    fn single_type_gets_its_curve_value() {
        let surface = ValueSurface::new(
            vec![Frontier::Quadratic(Quadratic::new(1.0, 0.7, 2.0, 0.0, 1.0).unwrap())],
            Frontier::from_points(&[(0.0, 0.0)]).unwrap(),
        )
        .unwrap();
        let s = Scenario::new(TypeChain::uniform(vec![0.0]).unwrap(), surface, step_grid(0.0, 1.0, 4)).unwrap();
        let p = complete_info_curve(&s.surface);
        assert_eq!(solve_dp(&s, &p).unwrap().promise.values(), &[0.7]);
        assert_eq!(brute_force(&s, &p).unwrap().promise.values(), &[0.7]);
    }

    #[test]
    fn budget_is_enforced() {
        let s = three_types(step_grid(0.0, 2.0, 1000));
        let p = complete_info_curve(&s.surface);
        let prob = Problem::from_scenario(&s, &p).unwrap();
        assert!(matches!(prob.brute_force(1000), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn augmentation_pins_curve_values() {
        let p = CompleteInfoProfile::from_curve(0.0, vec![0.3 + 1e-13, 1.0]).unwrap();
        let g = augment_grid(&[0.0, 0.3, 0.6], &p);
        assert_eq!(g, vec![0.0, 0.3 + 1e-13, 0.6, 1.0]);
    }

    #[test]
    fn segments_of_three_types() {
        let segs = extract_segments(&PromisedUtility(vec![0.8, 0.8, 2.0]), &[1.0, 0.0, 2.0], 1e-7).unwrap();
        assert_eq!(
            segs,
            vec![
                Segment { from: 0, to: 1, label: SegmentLabel::Constant, level: 0.8 },
                Segment { from: 2, to: 2, label: SegmentLabel::FollowCurve, level: 2.0 },
            ]
        );
    }

    #[test]
    fn segments_on_curve_and_ties() {
        let segs = extract_segments(&PromisedUtility(vec![0.0, 1.0, 2.0]), &[0.0, 1.0, 2.0], 1e-7).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].label, SegmentLabel::FollowCurve);
        let segs = extract_segments(&PromisedUtility(vec![0.5; 3]), &[0.5; 3], 1e-7).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].label, SegmentLabel::FollowCurve);
    }

    #[test]
    fn flat_run_crossing_the_curve_is_one_segment() {
        let segs = extract_segments(&PromisedUtility(vec![1.0; 3]), &[2.0, 1.0, 0.0], 1e-7).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].label, SegmentLabel::Constant);
    }

    #[test]
    fn varying_off_curve_run_is_rejected() {
        let r = extract_segments(&PromisedUtility(vec![0.5, 0.6]), &[0.0, 0.0], 1e-7);
        assert!(matches!(r, Err(Error::StructureViolation { from: 0, to: 1, .. })));
    }

    #[test]
    fn running_max_examples() {
        let p = project_running_max(&PromisedUtility(vec![1.8, 1.8]), &[1.0, 0.0], (0, 1), Some(1.2)).unwrap();
        assert_eq!(p.values(), &[1.2, 1.2]);
        let p = project_running_max(&PromisedUtility(vec![1.5, 1.9]), &[1.0, 1.7], (0, 1), Some(1.5)).unwrap();
        assert_eq!(p.values(), &[1.5, 1.7]);
        let fixed = PromisedUtility(vec![2.0, 2.0]);
        assert_eq!(project_running_max(&fixed, &[1.0, 2.0], (0, 1), None).unwrap(), fixed);
        assert!(project_running_max(&PromisedUtility(vec![0.5, 2.0]), &[1.0, 0.0], (0, 1), None).is_err());
        assert!(project_running_max(&fixed, &[1.0, 0.0], (0, 1), Some(3.0)).is_err());
    }

    #[test]
    fn running_min_examples() {
        let p = project_running_min(&PromisedUtility(vec![0.1, 0.2]), &[1.0, 2.0], (0, 1), Some(0.2)).unwrap();
        assert_eq!(p.values(), &[0.2, 0.2]);
        let p = project_running_min(&PromisedUtility(vec![0.5, 0.6]), &[0.55, 2.0], (0, 1), Some(0.6)).unwrap();
        assert_eq!(p.values(), &[0.55, 0.6]);
        let fixed = PromisedUtility(vec![0.5, 0.5]);
        assert_eq!(project_running_min(&fixed, &[0.5, 0.7], (0, 1), None).unwrap(), fixed);
        assert!(project_running_min(&PromisedUtility(vec![0.5, 0.6]), &[0.4, 2.0], (0, 1), None).is_err());
    }

    #[test]
    fn monotonize_examples() {
        let s = e1_surface();
        let u = PromisedUtility(vec![0.8, 0.8, 2.0]);
        assert_eq!(monotonize_principal_payoff(&s, &u).unwrap(), u);
        let q = |h| Frontier::Quadratic(Quadratic::new(h, 0.0, 1.0, 0.0, 2.0).unwrap());
        let s = ValueSurface::new(vec![q(5.0), q(6.0)], Frontier::from_points(&[(0.0, 0.0)]).unwrap()).unwrap();
        let m = monotonize_principal_payoff(&s, &PromisedUtility(vec![0.0, 2.0])).unwrap();
        assert_eq!(m.values(), &[0.0, 0.0]);
        assert_eq!(eval_surface(&s, 1, 0.0).unwrap(), 6.0);
    }

    #[test]
    fn golden_section_finds_quadratic_peak() {
        let c = golden_section(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0);
        assert!((c - 0.3).abs() < 1e-7);
    }
}
