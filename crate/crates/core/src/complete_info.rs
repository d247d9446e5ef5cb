//! The complete-information benchmark: worst punishment, the agent payoff
//! curve when the principal knows the type, its monotone closures, and the
//! shoot-the-agent mechanism that implements it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{eval_surface, ValueSurface};

/// Default tolerance for counting strictly decreasing runs.
pub const SEGMENT_COUNT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompleteInfoProfile {
    pub ubar: f64,
    pub u_c: Vec<f64>,
    /// Running maximum from the left.
    pub upper_closure: Vec<f64>,
    /// Running minimum from the right, `min_{j >= i} u_c[j]`; the envelope floor.
    pub lower_closure: Vec<f64>,
    /// Running minimum from the left, `min_{j <= i} u_c[j]`.
    pub lower_closure_literal: Vec<f64>,
    #[serde(rename = "K")]
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Closures {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub lower_literal: Vec<f64>,
}

/// Smallest agent payoff the principal can impose with the default options.
pub fn default_min_utility(surface: &ValueSurface) -> f64 {
    surface.default_frontier().lo()
}

pub fn complete_info_curve(surface: &ValueSurface) -> CompleteInfoProfile {
    let ubar = default_min_utility(surface);
    let u_c: Vec<f64> = surface.frontiers().iter().map(|f| f.peak().0.max(ubar)).collect();
    let closures = monotone_closures(&u_c).expect("surface has at least one type");
    let k = decreasing_segment_count(&u_c, SEGMENT_COUNT_TOL);
    CompleteInfoProfile {
        ubar,
        u_c,
        upper_closure: closures.upper,
        lower_closure: closures.lower,
        lower_closure_literal: closures.lower_literal,
        k,
    }
}

impl CompleteInfoProfile {
    /// Profile for a bare curve and floor, without a surface.
    pub fn from_curve(ubar: f64, u_c: Vec<f64>) -> Result<Self> {
        let closures = monotone_closures(&u_c)?;
        let k = decreasing_segment_count(&u_c, SEGMENT_COUNT_TOL);
        Ok(Self {
            ubar,
            u_c,
            upper_closure: closures.upper,
            lower_closure: closures.lower,
            lower_closure_literal: closures.lower_literal,
            k,
        })
    }

    pub fn len(&self) -> usize {
        self.u_c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_c.is_empty()
    }
}

pub fn monotone_closures(u_c: &[f64]) -> Result<Closures> {
    if u_c.is_empty() {
        return Err(Error::InvalidInput("empty complete-information curve".into()));
    }
    if u_c.iter().any(|u| !u.is_finite()) {
        return Err(Error::InvalidInput("complete-information curve must be finite".into()));
    }
    let scan = |it: &mut dyn Iterator<Item = &f64>, pick: fn(f64, f64) -> f64| -> Vec<f64> {
        let mut acc: Option<f64> = None;
        it.map(|&u| {
            let next = acc.map_or(u, |a| pick(a, u));
            acc = Some(next);
            next
        })
        .collect()
    };
    let upper = scan(&mut u_c.iter(), f64::max);
    let lower_literal = scan(&mut u_c.iter(), f64::min);
    let mut lower = scan(&mut u_c.iter().rev(), f64::min);
    lower.reverse();
    Ok(Closures { upper, lower, lower_literal })
}

/// Number of maximal runs of indices with `u_c[i + 1] < u_c[i] - tol`.
pub fn decreasing_segment_count(u_c: &[f64], tol: f64) -> usize {
    let drops: Vec<bool> = u_c.windows(2).map(|w| w[1] < w[0] - tol).collect();
    drops
        .iter()
        .enumerate()
        .filter(|&(i, &d)| d && (i == 0 || !drops[i - 1]))
        .count()
}

/// Allocation `(u, v)` of the complete-information mechanism designed for
/// `true_type` when the agent reports `report`.
///
/// A truthful report gets the principal's favorite point subject to the
/// punishment floor; any withheld technology is punished with the reported
/// type's lowest agent payoff.
pub fn shoot_the_agent(surface: &ValueSurface, true_type: usize, report: usize) -> Result<(f64, f64)> {
    if true_type >= surface.len() {
        return Err(Error::InvalidInput(format!("type index {true_type} out of range")));
    }
    if report > true_type {
        return Err(Error::IllegalReport { true_type, report });
    }
    if report == true_type {
        let ubar = default_min_utility(surface);
        let u = surface.frontier(true_type).peak().0.max(ubar);
        return Ok((u, eval_surface(surface, true_type, u)?));
    }
    let u = surface.frontier(report).lo();
    Ok((u, eval_surface(surface, report, u)?))
}
