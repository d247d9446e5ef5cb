//! From promised utilities to mechanisms and back.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{eval_surface, Frontier, Location, PromisedUtility, Quadratic, ValueSurface};
use crate::solver::{extract_segments, SegmentLabel, SEGMENT_TOL};

/// Slack allowed on monotonicity and the punishment floor.
pub const IC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcVerdict {
    /// Adjacent pairs `(i, i + 1)` where the promise drops.
    pub violations: Vec<(usize, usize)>,
    pub floor_ok: bool,
    pub pass: bool,
}

/// Truthful reporting is optimal iff the promise is weakly increasing and
/// the lowest type gets at least the default punishment.
pub fn check_ic(promise: &PromisedUtility, ubar: f64) -> IcVerdict {
    let u = promise.values();
    let violations: Vec<(usize, usize)> = u
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] < w[0] - IC_TOL)
        .map(|(i, _)| (i, i + 1))
        .collect();
    let floor_ok = u.first().is_none_or(|&u0| u0 >= ubar - IC_TOL);
    let pass = violations.is_empty() && floor_ok;
    IcVerdict { violations, floor_ok, pass }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub u: f64,
    pub v: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub agent_payoff: f64,
    pub principal_payoff: f64,
    pub support: Vec<SupportPoint>,
}

/// Frontier point at `promise` written as a lottery over at most two
/// extreme points of the type's payoff set.
pub fn implement_allocation(surface: &ValueSurface, i: usize, promise: f64) -> Result<Allocation> {
    let v = eval_surface(surface, i, promise)?;
    let support = match surface.frontier(i) {
        Frontier::Quadratic(_) => vec![SupportPoint { u: promise, v, weight: 1.0 }],
        Frontier::Polyline(p) => {
            let vs = p.vertices();
            match p.locate(promise) {
                Location::Vertex(k) => vec![SupportPoint { u: vs[k].0, v: vs[k].1, weight: 1.0 }],
                Location::Edge(k) => {
                    let ((u0, v0), (u1, v1)) = (vs[k], vs[k + 1]);
                    let t = (promise - u0) / (u1 - u0);
                    vec![
                        SupportPoint { u: u0, v: v0, weight: 1.0 - t },
                        SupportPoint { u: u1, v: v1, weight: t },
                    ]
                }
            }
        }
    };
    Ok(Allocation { agent_payoff: promise, principal_payoff: v, support })
}

fn candidate_segments(u_c: &[f64], candidate: &PromisedUtility, tol: f64) -> Result<Vec<crate::solver::Segment>> {
    if u_c.len() != candidate.len() {
        return Err(Error::NotACandidate(format!(
            "candidate has {} entries, curve has {}",
            candidate.len(),
            u_c.len()
        )));
    }
    if !candidate.is_monotone(tol) {
        return Err(Error::NotACandidate("candidate is not weakly increasing".into()));
    }
    extract_segments(candidate, u_c, tol).map_err(|e| Error::NotACandidate(e.to_string()))
}

/// Type weights under which `candidate` is optimal: uniform on the indices
/// where it follows the curve, zero elsewhere.
pub fn rationalize_by_distribution(u_c: &[f64], candidate: &PromisedUtility) -> Result<Vec<f64>> {
    rationalize_by_distribution_tol(u_c, candidate, SEGMENT_TOL)
}

pub fn rationalize_by_distribution_tol(u_c: &[f64], candidate: &PromisedUtility, tol: f64) -> Result<Vec<f64>> {
    let segments = candidate_segments(u_c, candidate, tol)?;
    let mut on = vec![false; u_c.len()];
    for s in segments.iter().filter(|s| s.label == SegmentLabel::FollowCurve) {
        on[s.from..=s.to].iter_mut().for_each(|x| *x = true);
    }
    let count = on.iter().filter(|&&x| x).count();
    if count == 0 {
        return Err(Error::NotACandidate("candidate never follows the curve".into()));
    }
    let w = 1.0 / count as f64;
    Ok(on.into_iter().map(|x| if x { w } else { 0.0 }).collect())
}

/// Quadratic surface under which `candidate` is optimal for the given
/// weights: unit curvature peaked on the curve where the candidate follows
/// it, flat frontiers where it is constant.
///
/// All frontiers live on `[min u_c, max u_c]`; heights step up by
/// `1 + D^2` (with `D` the interval length) so each type dominates the one
/// below everywhere. The default is the single point `(min u_c, 0)`.
pub fn rationalize_by_technology(u_c: &[f64], candidate: &PromisedUtility, weights: &[f64]) -> Result<ValueSurface> {
    rationalize_by_technology_tol(u_c, candidate, weights, SEGMENT_TOL)
}

pub fn rationalize_by_technology_tol(
    u_c: &[f64],
    candidate: &PromisedUtility,
    weights: &[f64],
    tol: f64,
) -> Result<ValueSurface> {
    if weights.len() != u_c.len() {
        return Err(Error::InvalidInput("weights and curve lengths differ".into()));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidInput("weights must be strictly positive".into()));
    }
    let segments = candidate_segments(u_c, candidate, tol)?;
    let lo = u_c.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = u_c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let step = 1.0 + (hi - lo) * (hi - lo);
    let mut curvature = vec![0.0; u_c.len()];
    for s in segments.iter().filter(|s| s.label == SegmentLabel::FollowCurve) {
        curvature[s.from..=s.to].iter_mut().for_each(|a| *a = 1.0);
    }
    let frontiers = u_c
        .iter()
        .zip(&curvature)
        .enumerate()
        .map(|(i, (&p, &a))| {
            Quadratic::new(step * (i + 1) as f64, p, a, lo, hi).map(Frontier::Quadratic)
        })
        .collect::<Result<Vec<_>>>()?;
    ValueSurface::new(frontiers, Frontier::from_points(&[(lo, 0.0)])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complete_info::complete_info_curve;
    use crate::model::{build_surface, validate_nesting, TypeChain};
    use crate::scenario::Scenario;
    use crate::solver::solve_dp;

    #[test]
    fn ic_verdicts() {
        assert!(check_ic(&PromisedUtility(vec![0.8, 0.8, 2.0]), 0.0).pass);
        let v = check_ic(&PromisedUtility(vec![1.0, 0.5]), 0.0);
        assert_eq!(v.violations, vec![(0, 1)]);
        assert!(v.floor_ok && !v.pass);
        let v = check_ic(&PromisedUtility(vec![-0.1, 0.2]), 0.0);
        assert!(!v.floor_ok && v.violations.is_empty());
    }

    #[test]
    fn allocation_on_hull_edge() {
        let s = build_surface(&[vec![(0.0, 1.0), (1.0, 2.0)]], &[(0.0, 0.0)]).unwrap();
        let a = implement_allocation(&s, 0, 0.25).unwrap();
        assert_eq!(a.principal_payoff, 1.25);
        assert_eq!(a.support.len(), 2);
        assert_eq!((a.support[0].weight, a.support[1].weight), (0.75, 0.25));
        let a = implement_allocation(&s, 0, 1.0).unwrap();
        assert_eq!(a.support, vec![SupportPoint { u: 1.0, v: 2.0, weight: 1.0 }]);
        assert!(implement_allocation(&s, 0, 1.5).is_err());
    }

    #[test]
    fn distribution_weights() {
        let w = rationalize_by_distribution(&[0.0, 1.0, 2.0], &PromisedUtility(vec![0.0, 1.0, 2.0])).unwrap();
        assert_eq!(w, vec![1.0 / 3.0; 3]);
        let w = rationalize_by_distribution(&[1.0, 0.0, 2.0], &PromisedUtility(vec![0.8, 0.8, 2.0])).unwrap();
        assert_eq!(w, vec![0.0, 0.0, 1.0]);
        assert!(matches!(
            rationalize_by_distribution(&[2.0, 1.5, 1.0], &PromisedUtility(vec![1.2; 3])),
            Err(Error::NotACandidate(_))
        ));
    }

    #[test]
    fn technology_surface_reproduces_candidate() {
        let u_c = [1.0, 0.0, 2.0];
        let cand = PromisedUtility(vec![0.8, 0.8, 2.0]);
        let weights = vec![1.0 / 3.0; 3];
        let surface = rationalize_by_technology(&u_c, &cand, &weights).unwrap();
        assert!(validate_nesting(&surface).is_valid());
        let curv: Vec<f64> = surface
            .frontiers()
            .iter()
            .map(|f| match f {
                Frontier::Quadratic(q) => q.curvature,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(curv, vec![0.0, 0.0, 1.0]);
        let s = Scenario::new(TypeChain::uniform(vec![0.0, 1.0, 2.0]).unwrap(), surface, vec![0.0, 0.8, 2.0]).unwrap();
        let sol = solve_dp(&s, &complete_info_curve(&s.surface)).unwrap();
        assert_eq!(sol.promise.values()[2], 2.0);
    }

    #[test]
    fn technology_single_type() {
        let surface = rationalize_by_technology(&[0.4], &PromisedUtility(vec![0.4]), &[1.0]).unwrap();
        assert_eq!(surface.frontier(0).peak(), (0.4, 1.0));
    }
}
