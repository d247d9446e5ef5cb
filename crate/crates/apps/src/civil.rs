//! Civil service reform: a politician with a private signal about the
//! state can only reform with the servant's know-how. The servant privately
//! knows how radical a reform he can carry out and dislikes change.

use chainscreen::error::{Error, Result};
use chainscreen::model::{upper_hull, Frontier, Polyline, TypeChain, ValueSurface};
use chainscreen::scenario::Scenario;
use serde::Serialize;

const WEIGHT_SUM_TOL: f64 = 1e-12;
const DECODE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CivilConfig {
    /// Posterior probabilities of the good state, one per signal.
    pub signals: Vec<f64>,
    pub signal_weights: Vec<f64>,
    /// Servant's distaste for change per unit of radicalness.
    pub bias: f64,
    /// Politician's cost of fighting the servants.
    pub politician_fight_cost: f64,
    /// Servant's cost of being fought; at least 1.
    pub servant_fight_cost: f64,
    /// Largest reform radicalness each type can carry out, in `[0, 1]`.
    pub types: Vec<f64>,
    pub weights: Vec<f64>,
    pub u_steps: usize,
}

impl CivilConfig {
    /// Uniform signal distribution on `points` equally spaced posteriors,
    /// with trapezoid weights, and `n_types` equally weighted types on
    /// `[0, 1]`.
    pub fn uniform(points: usize, bias: f64, n_types: usize) -> Self {
        let signals: Vec<f64> = (0..points).map(|k| k as f64 / (points - 1) as f64).collect();
        let h = 1.0 / (points - 1) as f64;
        let signal_weights = (0..points).map(|k| if k == 0 || k == points - 1 { h / 2.0 } else { h }).collect();
        let types = (0..n_types).map(|k| if n_types == 1 { 1.0 } else { k as f64 / (n_types - 1) as f64 }).collect();
        Self {
            signals,
            signal_weights,
            bias,
            politician_fight_cost: 1.0,
            servant_fight_cost: 1.0,
            types,
            weights: vec![1.0 / n_types as f64; n_types],
            u_steps: 400,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.signals.is_empty() || self.signals.len() != self.signal_weights.len() {
            return bad("need one weight per signal and at least one signal".into());
        }
        if self.signals.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return bad("posteriors must lie in [0, 1]".into());
        }
        if self.signal_weights.iter().any(|w| !(*w >= 0.0)) {
            return bad("signal weights must be nonnegative".into());
        }
        let total: f64 = self.signal_weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return bad(format!("signal weights sum to {total}, not 1"));
        }
        if !(self.servant_fight_cost >= 1.0) {
            return bad("servant fight cost must be at least 1".into());
        }
        if !(self.politician_fight_cost >= 0.0) || !self.bias.is_finite() {
            return bad("fight cost must be nonnegative and bias finite".into());
        }
        if self.types.is_empty() || self.types.len() != self.weights.len() {
            return bad("need one weight per type and at least one type".into());
        }
        if self.types.iter().any(|t| !(0.0..=1.0).contains(t)) || self.types.windows(2).any(|w| w[1] <= w[0]) {
            return bad("types must be strictly increasing in [0, 1]".into());
        }
        if self.u_steps == 0 {
            return bad("u_steps must be nonzero".into());
        }
        Ok(())
    }

    /// Politician's payoff from acting on her signal with the most radical
    /// reform of unit size.
    pub fn politician_capability(&self) -> f64 {
        self.signals.iter().zip(&self.signal_weights).map(|(s, g)| g * (2.0 * s - 1.0).abs()).sum()
    }

    pub fn reference_curve(&self) -> Vec<f64> {
        let c = self.politician_capability();
        self.types.iter().map(|t| (c - self.bias) * t).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CivilAction {
    StatusQuo,
    Fight,
    /// Most radical reform toward the state the signal favors.
    ReformWithSignal,
    ReformAgainstSignal,
}

impl CivilAction {
    pub fn is_reform(self) -> bool {
        matches!(self, CivilAction::ReformWithSignal | CivilAction::ReformAgainstSignal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SignalHull {
    /// Vertices scaled by the signal weight, increasing in `u`.
    vertices: Vec<(f64, f64, CivilAction)>,
}

/// One edge of a per-signal hull, in the order the sup-convolution uses.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Edge {
    signal: usize,
    du: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct TypeFrontier {
    hulls: Vec<SignalHull>,
    edges: Vec<Edge>,
    start_u: f64,
}

fn signal_hull(config: &CivilConfig, s: f64, g: f64, d: f64) -> SignalHull {
    let gain = d * (2.0 * s - 1.0).abs();
    let (m, n) = (config.politician_fight_cost, config.servant_fight_cost);
    // the reform that matches the posterior gains, the other one loses
    let labeled = [
        (0.0, 0.0, CivilAction::StatusQuo),
        (-n, -m, CivilAction::Fight),
        (gain - config.bias * d, gain, CivilAction::ReformWithSignal),
        (-gain - config.bias * d, -gain, CivilAction::ReformAgainstSignal),
    ];
    let pts: Vec<(f64, f64)> = labeled.iter().map(|&(u, v, _)| (u, v)).collect();
    let vertices = upper_hull(&pts)
        .into_iter()
        .map(|(u, v)| {
            let a = labeled.iter().find(|p| p.0 == u && p.1 == v).expect("hull vertices are input points").2;
            (g * u, g * v, a)
        })
        .collect();
    SignalHull { vertices }
}

fn type_frontier(config: &CivilConfig, d: f64) -> TypeFrontier {
    let hulls: Vec<SignalHull> = config
        .signals
        .iter()
        .zip(&config.signal_weights)
        .map(|(&s, &g)| signal_hull(config, s, g, d))
        .collect();
    let mut edges: Vec<(f64, Edge)> = Vec::new();
    for (j, h) in hulls.iter().enumerate() {
        for w in h.vertices.windows(2) {
            let du = w[1].0 - w[0].0;
            if du > 0.0 {
                edges.push(((w[1].1 - w[0].1) / du, Edge { signal: j, du }));
            }
        }
    }
    // steepest first; a stable sort keeps signal order and hull order on ties
    edges.sort_by(|a, b| b.0.total_cmp(&a.0));
    let start_u = hulls.iter().map(|h| h.vertices[0].0).sum();
    TypeFrontier { hulls, edges: edges.into_iter().map(|(_, e)| e).collect(), start_u }
}

impl TypeFrontier {
    fn breakpoints(&self) -> Vec<(f64, f64)> {
        let mut pos: Vec<usize> = vec![0; self.hulls.len()];
        let mut u = self.start_u;
        let mut v: f64 = self.hulls.iter().map(|h| h.vertices[0].1).sum();
        let mut out = vec![(u, v)];
        for e in &self.edges {
            let h = &self.hulls[e.signal].vertices;
            let k = pos[e.signal];
            u += e.du;
            v += h[k + 1].1 - h[k].1;
            pos[e.signal] += 1;
            out.push((u, v));
        }
        out
    }

    /// Per-signal lotteries delivering total agent payoff `u`.
    fn decompose(&self, u: f64) -> Vec<Vec<(CivilAction, f64)>> {
        let mut pos: Vec<usize> = vec![0; self.hulls.len()];
        let mut partial: Option<(usize, f64)> = None;
        let mut at = self.start_u;
        for e in &self.edges {
            if at + e.du <= u + DECODE_TOL {
                at += e.du;
                pos[e.signal] += 1;
            } else {
                partial = Some((e.signal, ((u - at) / e.du).clamp(0.0, 1.0)));
                break;
            }
        }
        self.hulls
            .iter()
            .enumerate()
            .map(|(j, h)| {
                let k = pos[j];
                match partial {
                    Some((sig, t)) if sig == j && t > 0.0 => vec![(h.vertices[k].2, 1.0 - t), (h.vertices[k + 1].2, t)],
                    _ => vec![(h.vertices[k].2, 1.0)],
                }
            })
            .collect()
    }
}

/// How a promise is carried out for one type.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CivilImplementation {
    /// Lottery over actions after each signal.
    pub per_signal: Vec<Vec<(CivilAction, f64)>>,
    pub reform_probability: f64,
    pub fight_probability: f64,
    pub status_quo_probability: f64,
}

#[derive(Debug, Clone)]
pub struct CivilScenario {
    pub config: CivilConfig,
    pub scenario: Scenario,
    pub reference_u_c: Vec<f64>,
    pub politician_capability: f64,
    frontiers: Vec<TypeFrontier>,
}

pub fn civil_servant_scenario(config: &CivilConfig) -> Result<CivilScenario> {
    config.validate()?;
    let frontiers: Vec<TypeFrontier> = config.types.iter().map(|&d| type_frontier(config, d)).collect();
    let polylines = frontiers
        .iter()
        .map(|f| Polyline::from_breakpoints(&f.breakpoints()).map(Frontier::Polyline))
        .collect::<Result<Vec<_>>>()?;
    let (m, n) = (config.politician_fight_cost, config.servant_fight_cost);
    let default = Frontier::Polyline(Polyline::from_breakpoints(&[(-n, -m), (0.0, 0.0)])?);
    let surface = ValueSurface::new(polylines, default)?;
    let top = surface.interval(surface.len() - 1).1;
    let grid: Vec<f64> = (0..=config.u_steps)
        .map(|k| if k == config.u_steps { top } else { -n + (top + n) * k as f64 / config.u_steps as f64 })
        .collect();
    let chain = TypeChain::new(config.types.clone(), config.weights.clone())?;
    let mut scenario = Scenario::new(chain, surface, grid)?;
    let reference_u_c = config.reference_curve();
    let capability = config.politician_capability();
    scenario.reference_u_c = Some(reference_u_c.clone());
    scenario.metadata.insert("application".into(), serde_json::json!("civil"));
    scenario.metadata.insert("bias".into(), serde_json::json!(config.bias));
    scenario.metadata.insert("politician_capability".into(), serde_json::json!(capability));
    Ok(CivilScenario {
        config: config.clone(),
        scenario,
        reference_u_c,
        politician_capability: capability,
        frontiers,
    })
}

impl CivilScenario {
    /// Action lotteries that deliver payoff `u` to type `i` on its frontier.
    pub fn implement(&self, i: usize, u: f64) -> Result<CivilImplementation> {
        let (lo, hi) = self.scenario.surface.interval(i);
        if i >= self.frontiers.len() || !(u >= lo - DECODE_TOL && u <= hi + DECODE_TOL) {
            return Err(Error::InfeasiblePromise { index: i, u, lo, hi });
        }
        let per_signal = self.frontiers[i].decompose(u);
        let mass = |pred: fn(CivilAction) -> bool| -> f64 {
            per_signal
                .iter()
                .zip(&self.config.signal_weights)
                .map(|(lot, g)| g * lot.iter().filter(|(a, _)| pred(*a)).map(|(_, p)| p).sum::<f64>())
                .sum::<f64>()
                + 0.0
        };
        Ok(CivilImplementation {
            reform_probability: mass(CivilAction::is_reform),
            fight_probability: mass(|a| a == CivilAction::Fight),
            status_quo_probability: mass(|a| a == CivilAction::StatusQuo),
            per_signal,
        })
    }
}
