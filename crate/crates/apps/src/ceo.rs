//! Board contracting with a CEO who privately knows how far he can improve
//! a risky business strategy. The board designs nonnegative wages on the
//! profit outcomes and decides whether to permit the improved strategy.

use chainscreen::error::{Error, Result};
use chainscreen::model::TypeChain;
use chainscreen::scenario::{DefaultSpec, GridSpec, Scenario, ScenarioFile, SurfaceSpec};
use serde::Serialize;

use crate::lp::{minimize, Constraint};

/// Profit outcomes.
pub const OUTCOMES: [f64; 4] = [-4.0, 0.0, 1.0, 2.0];
pub const SHIRK_SUCCESS: f64 = 0.1;
pub const SAFE_SUCCESS: f64 = 0.3;
pub const EFFORT_COST: f64 = 0.1;

/// Obedience slack tolerated in LP solutions.
pub const OBEDIENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    Shirk,
    Safe,
    /// Risky strategy improved by `improvement` (0 is the baseline).
    Risky { improvement: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    /// Probabilities of [`OUTCOMES`].
    pub distribution: [f64; 4],
    pub cost: f64,
}

impl Strategy {
    pub fn shirk() -> Self {
        Self { kind: StrategyKind::Shirk, distribution: [0.0, 1.0 - SHIRK_SUCCESS, SHIRK_SUCCESS, 0.0], cost: 0.0 }
    }

    pub fn safe() -> Self {
        Self { kind: StrategyKind::Safe, distribution: [0.0, 1.0 - SAFE_SUCCESS, SAFE_SUCCESS, 0.0], cost: EFFORT_COST }
    }

    /// Loses 4 or gains 1 with probability `0.5 - s` each, gains 2 otherwise.
    pub fn risky(s: f64) -> Self {
        let p = 0.5 - s;
        Self { kind: StrategyKind::Risky { improvement: s }, distribution: [p, 0.0, p, 2.0 * s], cost: EFFORT_COST }
    }

    pub fn expected_profit(&self) -> f64 {
        self.distribution.iter().zip(OUTCOMES).map(|(p, y)| p * y).sum()
    }

    fn expected(&self, wages: &[f64]) -> f64 {
        self.distribution.iter().zip(wages).map(|(p, w)| p * w).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WageContract {
    pub strategy: Strategy,
    pub wages: [f64; 4],
    pub agent_utility: f64,
    pub principal_payoff: f64,
}

impl WageContract {
    /// Smallest obedience slack against `alternatives`.
    pub fn obedience_slack(&self, alternatives: &[Strategy]) -> f64 {
        let own = self.strategy.expected(&self.wages) - self.strategy.cost;
        alternatives
            .iter()
            .map(|a| own - (a.expected(&self.wages) - a.cost))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Cheapest nonnegative wages that make `target` the CEO's best response
/// among `target` and `alternatives`, optionally at a fixed CEO utility.
pub fn solve_wage_lp(target: &Strategy, alternatives: &[Strategy], utility: Option<f64>) -> Option<WageContract> {
    let obedience: Vec<Constraint> = alternatives
        .iter()
        .map(|a| {
            let row = (0..4).map(|k| target.distribution[k] - a.distribution[k]).collect();
            Constraint::new(row, target.cost - a.cost)
        })
        .collect();
    let eq: Vec<Constraint> = utility
        .map(|u| vec![Constraint::new(target.distribution.to_vec(), u + target.cost)])
        .unwrap_or_default();
    let x = minimize(&target.distribution, &obedience, &eq)?;
    let mut wages = [x[0], x[1], x[2], x[3]];
    // Pay on outcomes the target never produces only tempts deviators.
    for (w, &p) in wages.iter_mut().zip(&target.distribution) {
        if p == 0.0 {
            *w = 0.0;
        }
    }
    let pay = target.expected(&wages);
    Some(WageContract {
        strategy: *target,
        wages,
        agent_utility: pay - target.cost,
        principal_payoff: target.expected_profit() - pay,
    })
}

/// Closed-form CEO payoff when the board knows the type.
pub fn reference_curve(t: f64) -> f64 {
    if t < 3.0 / 22.0 {
        0.0
    } else if t < 0.2 {
        (5.0 - 18.0 * t) / (20.0 * (1.0 + 2.0 * t))
    } else if t < 0.25 {
        0.05
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CeoConfig {
    pub types: Vec<f64>,
    pub weights: Vec<f64>,
    /// Largest CEO utility offered; wage schedules can always be shifted up.
    pub u_max: f64,
    pub u_steps: usize,
}

impl CeoConfig {
    /// `n` evenly spaced types on `[0, 0.5]` with equal weights.
    pub fn evenly_spaced(n: usize) -> Self {
        let types = (0..n).map(|k| if n == 1 { 0.0 } else { 0.5 * k as f64 / (n - 1) as f64 }).collect();
        Self { types, weights: vec![1.0 / n as f64; n], u_max: 1.0, u_steps: 1000 }
    }

    fn validate(&self) -> Result<()> {
        if self.types.is_empty() || self.types.len() != self.weights.len() {
            return Err(Error::InvalidConfig("need one weight per type and at least one type".into()));
        }
        if self.types.iter().any(|&t| !(0.0..=0.5).contains(&t)) {
            return Err(Error::InvalidConfig("CEO types must lie in [0, 0.5]".into()));
        }
        if !(self.u_max > 0.0) || self.u_steps == 0 {
            return Err(Error::InvalidConfig("u_max must be positive and u_steps nonzero".into()));
        }
        Ok(())
    }
}

/// A contract on a type's frontier: which strategy is incentivized and
/// whether the improved risky strategy is permitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CeoLabel {
    pub strategy: StrategyKind,
    pub permitted_improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledContract {
    pub u: f64,
    pub v: f64,
    pub label: CeoLabel,
    pub contract: WageContract,
}

#[derive(Debug, Clone)]
pub struct CeoScenario {
    pub scenario: Scenario,
    pub reference_u_c: Vec<f64>,
    /// Contracts behind each type's own payoff points.
    pub contracts: Vec<Vec<LabeledContract>>,
}

/// Frontier endpoints for every strategy the board can incentivize when
/// the available strategies are `available`.
fn contracts_for(available: &[Strategy], permitted: Option<f64>, u_max: f64) -> Vec<LabeledContract> {
    let mut out = Vec::new();
    for (k, target) in available.iter().enumerate() {
        let alternatives: Vec<Strategy> =
            available.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, s)| *s).collect();
        let label = CeoLabel { strategy: target.kind, permitted_improvement: permitted };
        let Some(cheapest) = solve_wage_lp(target, &alternatives, None) else { continue };
        let mut ends = vec![cheapest];
        if cheapest.agent_utility < u_max {
            if let Some(rich) = solve_wage_lp(target, &alternatives, Some(u_max)) {
                ends.push(rich);
            }
        }
        for c in ends {
            out.push(LabeledContract { u: c.agent_utility, v: c.principal_payoff, label, contract: c });
        }
    }
    out
}

pub fn ceo_scenario(config: &CeoConfig) -> Result<CeoScenario> {
    config.validate()?;
    let baseline = [Strategy::shirk(), Strategy::safe(), Strategy::risky(0.0)];
    let default = contracts_for(&baseline, None, config.u_max);
    let mut contracts = Vec::with_capacity(config.types.len());
    for &t in &config.types {
        let improved = [Strategy::shirk(), Strategy::safe(), Strategy::risky(t)];
        let mut own = default.clone();
        own.extend(contracts_for(&improved, Some(t), config.u_max));
        contracts.push(own);
    }
    let points: Vec<Vec<(f64, f64)>> =
        contracts.iter().map(|cs| cs.iter().map(|c| (c.u, c.v)).collect()).collect();
    let default_points: Vec<(f64, f64)> = default.iter().map(|c| (c.u, c.v)).collect();
    let chain = TypeChain::new(config.types.clone(), config.weights.clone())?;
    let reference_u_c: Vec<f64> = config.types.iter().map(|&t| reference_curve(t)).collect();
    let as_pairs = |ps: &[(f64, f64)]| ps.iter().map(|&(u, v)| [u, v]).collect::<Vec<_>>();
    let file = ScenarioFile {
        types: chain.labels().to_vec(),
        weights: chain.weights().to_vec(),
        u_grid: GridSpec::Uniform { min: 0.0, max: config.u_max, steps: config.u_steps },
        surface: SurfaceSpec::Points { points: points.iter().map(|p| as_pairs(p)).collect() },
        default: DefaultSpec::Points(as_pairs(&default_points)),
        metadata: [("application".to_string(), serde_json::json!("ceo"))].into_iter().collect(),
        reference_u_c: Some(reference_u_c.clone()),
    };
    let scenario = Scenario::from_file(file)?;
    Ok(CeoScenario { scenario, reference_u_c, contracts })
}

impl CeoScenario {
    /// Contracts mixed to deliver `u` to type `i`, by matching the hull
    /// support points against the labeled contracts of types `0..=i`.
    pub fn decode(&self, i: usize, u: f64) -> Result<Vec<(LabeledContract, f64)>> {
        let alloc = chainscreen::mechanism::implement_allocation(&self.scenario.surface, i, u)?;
        alloc
            .support
            .iter()
            .map(|sp| {
                self.contracts[..=i]
                    .iter()
                    .rev()
                    .flatten()
                    .find(|c| c.u == sp.u && c.v == sp.v)
                    .map(|c| (c.clone(), sp.weight))
                    .ok_or_else(|| Error::InvalidInput(format!("no contract behind support point ({}, {})", sp.u, sp.v)))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shirking_needs_no_pay() {
        let c = solve_wage_lp(&Strategy::shirk(), &[Strategy::safe(), Strategy::risky(0.1)], None).unwrap();
        assert_eq!(c.wages, [0.0; 4]);
        assert_eq!(c.agent_utility, 0.0);
        assert!((c.principal_payoff - 0.1).abs() < 1e-15);
    }

    #[test]
    fn safe_action_wages_match_closed_form() {
        for t in [0.0, 0.05, 0.1, 0.15, 0.19] {
            let alts = [Strategy::shirk(), Strategy::risky(t)];
            let c = solve_wage_lp(&Strategy::safe(), &alts, None).unwrap();
            let w0 = (0.2 - t) / (1.0 + 2.0 * t);
            assert!((c.wages[1] - w0).abs() < 1e-12, "t={t}: {:?}", c.wages);
            assert!((c.wages[2] - w0 - 0.5).abs() < 1e-12);
            assert!((c.agent_utility - (w0 + 0.05)).abs() < 1e-12);
            assert!(c.obedience_slack(&alts) >= -OBEDIENCE_TOL);
            assert!(c.wages.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn risky_action_extracts_everything() {
        let c = solve_wage_lp(&Strategy::risky(0.3), &[Strategy::shirk(), Strategy::safe()], None).unwrap();
        assert!(c.agent_utility.abs() < 1e-12);
        assert!((c.principal_payoff - (-1.6 + 7.0 * 0.3)).abs() < 1e-12);
    }

    #[test]
    fn reference_curve_values() {
        assert_eq!(reference_curve(0.1), 0.0);
        assert!((reference_curve(3.0 / 22.0) - 0.1).abs() < 1e-15);
        assert!((reference_curve(0.15) - 2.3 / 26.0).abs() < 1e-15);
        assert_eq!(reference_curve(0.2), 0.05);
        assert_eq!(reference_curve(0.25), 0.0);
    }

    #[test]
    fn generated_curve_matches_reference() {
        let cfg = CeoConfig::evenly_spaced(50);
        let ceo = ceo_scenario(&cfg).unwrap();
        let p = chainscreen::complete_info_curve(&ceo.scenario.surface);
        assert_eq!(p.ubar, 0.0);
        for (i, &t) in cfg.types.iter().enumerate() {
            assert!((p.u_c[i] - reference_curve(t)).abs() < 1e-9, "t={t}: {} vs {}", p.u_c[i], reference_curve(t));
        }
    }
}
