//! Comparative statics: technology expansions, stochastic dominance of the
//! type distribution, and larger default option sets.

use serde::Serialize;

use crate::complete_info::{complete_info_curve, CompleteInfoProfile};
use crate::error::{Error, Result};
use crate::model::{eval_surface, validate_nesting, Frontier, PromisedUtility, HULL_TOL};
use crate::scenario::Scenario;
use crate::solver::{augment_grid, monotonize_principal_payoff, objective, solve_dp, union_grid, Problem, Solution};

/// Tolerance on every weak inequality checked here.
pub const COMPARE_TOL: f64 = 1e-9;

/// Tolerance on CDF comparisons.
pub const CDF_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Expansion {
    /// Type `i` ends up with the technologies of type `map[i] >= i`.
    OnChain { map: Vec<usize> },
    /// Type `i` ends up with a new set whose frontier is `frontiers[i]`;
    /// `projection[i] >= i` is the largest chain type contained in it.
    OffChain { frontiers: Vec<Frontier>, projection: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
}

fn check(name: &str, pass: bool) -> Check {
    Check { name: name.to_string(), pass }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub base_opt: f64,
    /// Value of running the base mechanism on the expanded types.
    pub bound: f64,
    /// Optimum re-solved on the expanded instance, when it is a chain.
    pub resolved_opt: Option<f64>,
    pub checks: Vec<Check>,
}

impl ExpansionReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn solved(base: &Scenario) -> Result<(CompleteInfoProfile, Solution)> {
    let profile = complete_info_curve(&base.surface);
    let sol = solve_dp(base, &profile)?;
    Ok((profile, sol))
}

fn interim_values(base: &Scenario, promise: &PromisedUtility) -> Result<Vec<f64>> {
    promise.values().iter().enumerate().map(|(i, &u)| eval_surface(&base.surface, i, u)).collect()
}

fn validate_expansion(n: usize, exp: &Expansion, base: &Scenario) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidExpansion(msg));
    match exp {
        Expansion::OnChain { map } => {
            if map.len() != n {
                return bad(format!("map has {} entries, expected {n}", map.len()));
            }
            if let Some(i) = (0..n).find(|&i| map[i] < i || map[i] >= n) {
                return bad(format!("type {i} maps to {}, which is not a larger chain type", map[i]));
            }
        }
        Expansion::OffChain { frontiers, projection } => {
            if frontiers.len() != n || projection.len() != n {
                return bad("off-chain expansion needs one frontier and one projection per type".into());
            }
            for i in 0..n {
                let p = projection[i];
                if p < i || p >= n {
                    return bad(format!("projection of type {i} is {p}, not a larger chain type"));
                }
                let (lo, hi) = base.surface.interval(p);
                let (nlo, nhi) = frontiers[i].interval();
                if nlo > lo + HULL_TOL || nhi < hi - HULL_TOL {
                    return bad(format!("new frontier {i} does not cover the interval of chain type {p}"));
                }
                let base_f = base.surface.frontier(p);
                let probes = (0..=200).map(|k| lo + (hi - lo) * k as f64 / 200.0);
                for u in probes {
                    let (nv, bv) = (frontiers[i].value_at(u).unwrap(), base_f.value_at(u).unwrap());
                    if nv < bv - HULL_TOL {
                        return bad(format!("new frontier {i} is below chain type {p} at u = {u}"));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Checks that an expansion of every type's technologies cannot hurt the
/// principal.
///
/// The bound runs the base optimum, after monotonizing its interim payoff,
/// on each expanded type's projection. When the expansion stays on the
/// chain, or the new frontiers are themselves nested, the expanded instance
/// is also re-solved on the same grid.
pub fn verify_expansion_dominance(base: &Scenario, exp: &Expansion) -> Result<ExpansionReport> {
    let n = base.len();
    validate_expansion(n, exp, base)?;
    let (profile, sol) = solved(base)?;
    let mono = monotonize_principal_payoff(&base.surface, &sol.promise)?;
    let interim = interim_values(base, &mono)?;
    let f = base.weights();
    let u = mono.values();
    let mut checks = vec![check("interim principal payoff increasing", interim.windows(2).all(|w| w[1] >= w[0] - COMPARE_TOL))];
    let (bound, resolved_opt) = match exp {
        Expansion::OnChain { map } => {
            let mut bound = 0.0;
            for i in (0..n).rev() {
                bound += f[i] * interim[map[i]];
            }
            let mut w = vec![0.0; n];
            for i in 0..n {
                w[map[i]] += f[i];
            }
            let problem = Problem::new(&w, &base.surface, &profile, &base.u_grid)?;
            (bound, Some(problem.solve_dp()?.value))
        }
        Expansion::OffChain { frontiers, projection } => {
            let mut bound = 0.0;
            for i in (0..n).rev() {
                let v = frontiers[i].value_at(u[projection[i]]).ok_or(Error::InfeasiblePromise {
                    index: i,
                    u: u[projection[i]],
                    lo: frontiers[i].lo(),
                    hi: frontiers[i].hi(),
                })?;
                bound += f[i] * v;
            }
            let surface = base.surface.with_frontiers(frontiers.clone())?;
            let resolved = if validate_nesting(&surface).is_valid() {
                let grid = union_grid(&[&augment_grid(&base.u_grid, &profile), &base.u_grid]);
                let expanded = base.with_surface(surface)?.with_grid(grid)?;
                let p = complete_info_curve(&expanded.surface);
                Some(solve_dp(&expanded, &p)?.value)
            } else {
                None
            };
            (bound, resolved)
        }
    };
    checks.push(check("bound >= base optimum", bound >= sol.value - COMPARE_TOL));
    if let Some(r) = resolved_opt {
        checks.push(check("expanded optimum >= base optimum", r >= sol.value - COMPARE_TOL));
    }
    Ok(ExpansionReport { base_opt: sol.value, bound, resolved_opt, checks })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingMass {
    pub from: usize,
    pub to: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FosdReport {
    pub base_opt: f64,
    pub alt_opt: f64,
    pub base_agent_welfare: f64,
    pub alt_agent_welfare: f64,
    /// Quantile coupling moving base mass up the chain onto the alternative.
    pub coupling: Vec<CouplingMass>,
    pub checks: Vec<Check>,
}

impl FosdReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn cdf(w: &[f64]) -> Vec<f64> {
    w.iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Monotone coupling of two distributions on the chain by matching
/// quantiles; every mass moves weakly up when `alt` dominates `base`.
pub fn quantile_coupling(base: &[f64], alt: &[f64]) -> Vec<CouplingMass> {
    let (mut i, mut j) = (0, 0);
    let (mut left_i, mut left_j) = (base[0], alt[0]);
    let mut out = Vec::new();
    loop {
        let m = left_i.min(left_j);
        if m > 0.0 {
            out.push(CouplingMass { from: i, to: j, mass: m });
        }
        left_i -= m;
        left_j -= m;
        if left_i <= CDF_TOL {
            i += 1;
            if i == base.len() {
                break;
            }
            left_i += base[i];
        }
        if left_j <= CDF_TOL {
            j += 1;
            if j == alt.len() {
                break;
            }
            left_j += alt[j];
        }
    }
    out
}

/// Re-solves under type weights that first-order dominate the base.
pub fn fosd_compare(base: &Scenario, alt_weights: &[f64]) -> Result<FosdReport> {
    let n = base.len();
    if alt_weights.len() != n {
        return Err(Error::InvalidInput(format!("{} alternative weights for {n} types", alt_weights.len())));
    }
    let (fb, fa) = (cdf(base.weights()), cdf(alt_weights));
    if let Some(i) = (0..n).find(|&i| fa[i] > fb[i] + CDF_TOL) {
        return Err(Error::NotDominant(format!(
            "CDF at type {i} is {} under the alternative and {} under the base",
            fa[i], fb[i]
        )));
    }
    let alt = base.with_weights(alt_weights.to_vec())?;
    let profile = complete_info_curve(&base.surface);
    let sb = solve_dp(base, &profile)?;
    let sa = solve_dp(&alt, &profile)?;
    let welfare = |w: &[f64], u: &PromisedUtility| -> f64 { w.iter().zip(u.values()).map(|(a, b)| a * b).sum() };
    let coupling = quantile_coupling(base.weights(), alt_weights);
    let checks = vec![
        check("coupling moves mass up", coupling.iter().all(|c| c.to >= c.from)),
        check("optimum weakly increases", sa.value >= sb.value - COMPARE_TOL),
    ];
    Ok(FosdReport {
        base_opt: sb.value,
        alt_opt: sa.value,
        base_agent_welfare: welfare(base.weights(), &sb.promise),
        alt_agent_welfare: welfare(alt_weights, &sa.promise),
        coupling,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatLevelPoint {
    pub q: f64,
    pub level: f64,
    pub value: f64,
}

/// Two-type instance with weight `1 - q` on the low type and `q` on the
/// high type: the optimal promise for each `q` on `qs`, solved by the
/// structural search. When the curve drops, the promise is flat.
pub fn binary_flat_level_sweep(base: &Scenario, qs: &[f64]) -> Result<Vec<FlatLevelPoint>> {
    if base.len() != 2 {
        return Err(Error::InvalidInput("the flat-level sweep needs exactly two types".into()));
    }
    let profile = complete_info_curve(&base.surface);
    qs.iter()
        .map(|&q| {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidInput(format!("q = {q} is not a probability")));
            }
            let w = [1.0 - q, q];
            let sol = Problem::new(&w, &base.surface, &profile, &base.u_grid)?.structural_solve()?;
            Ok(FlatLevelPoint { q, level: sol.promise.values()[0], value: sol.value })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefaultExpansionReport {
    pub ubar_small: f64,
    pub ubar_big: f64,
    pub opt_small: f64,
    pub opt_big: f64,
    pub promise_small: PromisedUtility,
    pub promise_big: PromisedUtility,
    pub spliced: PromisedUtility,
    pub spliced_value: f64,
    pub checks: Vec<Check>,
}

impl DefaultExpansionReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Takes `small` up to the first type where it falls below `big`, and `big`
/// from there on.
pub fn splice_promises(small: &PromisedUtility, big: &PromisedUtility) -> Result<PromisedUtility> {
    if small.len() != big.len() {
        return Err(Error::InvalidInput("promises have different lengths".into()));
    }
    let (s, b) = (small.values(), big.values());
    let cross = (0..s.len()).find(|&i| s[i] < b[i]).unwrap_or(s.len());
    Ok(PromisedUtility(s[..cross].iter().chain(&b[cross..]).copied().collect()))
}

fn default_contains(big: &Frontier, small: &Frontier) -> std::result::Result<(), String> {
    let (lo, hi) = small.interval();
    let (blo, bhi) = big.interval();
    if blo > lo + HULL_TOL || bhi < hi - HULL_TOL {
        return Err(format!("interval [{blo}, {bhi}] does not contain [{lo}, {hi}]"));
    }
    for k in 0..=200 {
        let u = lo + (hi - lo) * k as f64 / 200.0;
        let (bv, sv) = (big.value_at(u).unwrap(), small.value_at(u).unwrap());
        if bv < sv - HULL_TOL {
            return Err(format!("frontier drops below the base default at u = {u}"));
        }
    }
    Ok(())
}

/// Compares the base instance with the same frontiers under a larger
/// default option set (a weakly lower punishment).
pub fn default_expansion_compare(base: &Scenario, bigger_default: &Frontier) -> Result<DefaultExpansionReport> {
    default_contains(bigger_default, base.surface.default_frontier()).map_err(Error::NotAnExpansion)?;
    let big = base.with_default(bigger_default.clone())?;
    let ps = complete_info_curve(&base.surface);
    let pb = complete_info_curve(&big.surface);
    let grid = union_grid(&[&augment_grid(&base.u_grid, &ps), &augment_grid(&base.u_grid, &pb)]);
    let w = base.weights();
    let ss = Problem::new(w, &base.surface, &ps, &grid)?.solve_dp()?;
    let sb = Problem::new(w, &big.surface, &pb, &grid)?.solve_dp()?;
    let spliced = splice_promises(&ss.promise, &sb.promise)?;
    let spliced_value = objective(w, &base.surface, spliced.values())?;
    let ic = crate::mechanism::check_ic(&spliced, ps.ubar);
    let checks = vec![
        check("punishment weakly lower", pb.ubar <= ps.ubar),
        check("optimum weakly higher with the larger default", sb.value >= ss.value - COMPARE_TOL),
        check("spliced promise incentive compatible for the smaller default", ic.pass),
        check("spliced promise optimal for the smaller default", (spliced_value - ss.value).abs() <= COMPARE_TOL),
        check(
            "spliced promise dominates the larger-default optimum",
            spliced.values().iter().zip(sb.promise.values()).all(|(a, b)| a >= b),
        ),
    ];
    Ok(DefaultExpansionReport {
        ubar_small: ps.ubar,
        ubar_big: pb.ubar,
        opt_small: ss.value,
        opt_big: sb.value,
        promise_small: ss.promise,
        promise_big: sb.promise,
        spliced,
        spliced_value,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Quadratic, TypeChain, ValueSurface};

    fn e1_with(lo: f64, default: &[(f64, f64)]) -> Scenario {
        let q = |h, p, a| Frontier::Quadratic(Quadratic::new(h, p, a, lo, 2.0).unwrap());
        let surface = ValueSurface::new(
            vec![q(1.0, 1.0, 1.0), q(2.0, 0.0, 0.25), q(4.0, 2.0, 0.25)],
            Frontier::from_points(default).unwrap(),
        )
        .unwrap();
        let grid = (0..=10).map(|k| k as f64 * 0.2).collect();
        Scenario::new(TypeChain::uniform(vec![1.0, 2.0, 3.0]).unwrap(), surface, grid).unwrap()
    }

    fn three_types() -> Scenario {
        e1_with(0.0, &[(0.0, 0.0)])
    }

    #[test]
    fn identity_expansion_keeps_optimum() {
        let r = verify_expansion_dominance(&three_types(), &Expansion::OnChain { map: vec![0, 1, 2] }).unwrap();
        assert!(r.pass(), "{r:?}");
        assert!((r.resolved_opt.unwrap() - r.base_opt).abs() < 1e-12);
    }

    #[test]
    fn shifted_expansion_improves() {
        let r = verify_expansion_dominance(&three_types(), &Expansion::OnChain { map: vec![1, 2, 2] }).unwrap();
        assert!(r.pass());
        assert!(r.resolved_opt.unwrap() >= 34.0 / 15.0 - 1e-9);
    }

    #[test]
    fn uniform_shift_off_chain() {
        let base = three_types();
        let frontiers = base
            .surface
            .frontiers()
            .iter()
            .map(|f| match f {
                Frontier::Quadratic(q) => Frontier::Quadratic(Quadratic { height: q.height + 0.5, ..*q }),
                _ => unreachable!(),
            })
            .collect();
        let r = verify_expansion_dominance(&base, &Expansion::OffChain { frontiers, projection: vec![0, 1, 2] }).unwrap();
        assert!(r.pass());
        assert!((r.resolved_opt.unwrap() - r.base_opt - 0.5).abs() < 1e-12);
        assert!((r.bound - r.base_opt - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_map_is_rejected() {
        let r = verify_expansion_dominance(&three_types(), &Expansion::OnChain { map: vec![0, 0, 2] });
        assert!(matches!(r, Err(Error::InvalidExpansion(_))));
    }

    #[test]
    fn fosd_checks() {
        let base = three_types();
        let r = fosd_compare(&base, base.weights()).unwrap();
        assert_eq!(r.base_opt, r.alt_opt);
        let r = fosd_compare(&base, &[0.0, 0.0, 1.0]).unwrap();
        assert!(r.pass());
        assert!((r.alt_opt - 4.0).abs() < 1e-12);
        assert!(matches!(fosd_compare(&base, &[1.0, 0.0, 0.0]), Err(Error::NotDominant(_))));
    }

    #[test]
    fn coupling_matches_quantiles() {
        let c = quantile_coupling(&[0.5, 0.5], &[0.25, 0.75]);
        assert_eq!(
            c,
            vec![
                CouplingMass { from: 0, to: 0, mass: 0.25 },
                CouplingMass { from: 0, to: 1, mass: 0.25 },
                CouplingMass { from: 1, to: 1, mass: 0.5 },
            ]
        );
    }

    #[test]
    fn binary_flat_level_falls_with_q() {
        let q = |h, p| Frontier::Quadratic(Quadratic::new(h, p, 1.0, 0.0, 1.0).unwrap());
        let surface = ValueSurface::new(vec![q(1.0, 0.8), q(2.0, 0.2)], Frontier::from_points(&[(0.0, -1.0)]).unwrap()).unwrap();
        let s = Scenario::new(TypeChain::uniform(vec![0.0, 1.0]).unwrap(), surface, vec![0.0, 1.0]).unwrap();
        let pts = binary_flat_level_sweep(&s, &[0.3, 0.6]).unwrap();
        assert!((pts[0].level - 0.62).abs() < 1e-12 && (pts[1].level - 0.44).abs() < 1e-12, "{pts:?}");
        assert!(pts[1].value >= pts[0].value);
    }

    #[test]
    fn splice_examples() {
        let p = |v: &[f64]| PromisedUtility(v.to_vec());
        assert_eq!(splice_promises(&p(&[1.0, 1.0, 1.0]), &p(&[0.5, 1.2, 1.3])).unwrap(), p(&[1.0, 1.2, 1.3]));
        assert_eq!(splice_promises(&p(&[2.0, 2.0]), &p(&[1.0, 1.0])).unwrap(), p(&[2.0, 2.0]));
        assert_eq!(splice_promises(&p(&[0.3, 0.4]), &p(&[0.3, 0.4])).unwrap(), p(&[0.3, 0.4]));
    }

    #[test]
    fn lower_punishment_helps_principal() {
        let base = e1_with(-0.5, &[(0.0, 0.0)]);
        let bigger = Frontier::from_points(&[(-0.5, -1.25), (0.0, 0.0)]).unwrap();
        let r = default_expansion_compare(&base, &bigger).unwrap();
        assert!(r.pass(), "{r:?}");
        assert_eq!((r.ubar_small, r.ubar_big), (0.0, -0.5));
        let same = default_expansion_compare(&base, base.surface.default_frontier()).unwrap();
        assert_eq!(same.opt_small, same.opt_big);
        assert!(matches!(
            default_expansion_compare(&base, &Frontier::from_points(&[(0.5, 0.0)]).unwrap()),
            Err(Error::NotAnExpansion(_))
        ));
    }

    #[test]
    fn high_floor_clamps_every_promise() {
        let base = three_types();
        let bigger = Frontier::from_points(&[(0.0, 0.0), (2.0, 0.0)]).unwrap();
        // the larger default cannot raise the punishment; use it as the base
        let high = base.with_default(Frontier::from_points(&[(2.0, 0.0)]).unwrap()).unwrap();
        let p = complete_info_curve(&high.surface);
        assert_eq!(p.u_c, vec![2.0, 2.0, 2.0]);
        let sol = solve_dp(&high, &p).unwrap();
        assert_eq!(sol.promise.values(), &[2.0, 2.0, 2.0]);
        let expect = objective(high.weights(), &high.surface, &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(sol.value, expect);
        let r = default_expansion_compare(&high, &bigger).unwrap();
        assert!(r.pass(), "{r:?}");
    }
}
