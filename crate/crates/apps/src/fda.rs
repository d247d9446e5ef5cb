//! Drug approval: a firm privately knows which tests it can run, each test
//! trading false positives against false negatives along a convex curve.
//! The regulator commits to an approval policy and the firm wants approval.

use chainscreen::error::{Error, Result};
use chainscreen::mechanism::implement_allocation;
use chainscreen::scenario::{DefaultSpec, GridSpec, Scenario, ScenarioFile, SurfaceSpec};
use serde::Serialize;

const BISECT_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdaConfig {
    /// Prior probability that the drug works.
    pub q: f64,
    /// Regulator's loss from approving a drug that does not work.
    pub loss: f64,
    /// Tradeoff curve `β = (1 - α^{1/k})^k`; `k = 2` gives `1 - 2√α + α`.
    pub tradeoff_order: f64,
    pub types: Vec<f64>,
    pub weights: Vec<f64>,
    /// Smallest reachable false positive rate per type.
    pub alpha_lo: Vec<f64>,
    /// Largest reachable false positive rate per type.
    pub alpha_hi: Vec<f64>,
    /// Tests sampled per type range, besides the regulator's favorites.
    pub alpha_steps: usize,
    pub u_steps: usize,
}

/// Which part of the test curve the regulator's favorite test lies in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FdaCase {
    /// Every type can run the favorite test.
    OptimumAccessible,
    /// The favorite test is too lax for the weakest types.
    OptimumAboveRange,
    /// The favorite test is too strict for the weakest types.
    OptimumBelowRange,
}

impl FdaConfig {
    /// `n` equally weighted types whose reachable ranges widen linearly
    /// from `lo.0..hi.0` to `lo.1..hi.1`.
    pub fn linear(n: usize, lo: (f64, f64), hi: (f64, f64)) -> Self {
        let t = |k: usize| if n <= 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
        Self {
            q: 0.4,
            loss: 1.0,
            tradeoff_order: 2.0,
            types: (0..n).map(t).collect(),
            weights: vec![1.0 / n as f64; n],
            alpha_lo: (0..n).map(|k| lo.0 + (lo.1 - lo.0) * t(k)).collect(),
            alpha_hi: (0..n).map(|k| hi.0 + (hi.1 - hi.0) * t(k)).collect(),
            alpha_steps: 200,
            u_steps: 200,
        }
    }

    pub fn case(case: FdaCase, n: usize) -> Self {
        match case {
            FdaCase::OptimumAccessible => Self::linear(n, (0.1, 0.05), (0.3, 0.5)),
            FdaCase::OptimumAboveRange => Self::linear(n, (0.01, 0.0), (0.05, 0.3)),
            FdaCase::OptimumBelowRange => Self::linear(n, (0.8, 0.3), (0.9, 1.0)),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.q > 0.0 && self.q < 1.0) {
            return bad("prior q must lie in (0, 1)");
        }
        if !(self.loss > 0.0) {
            return bad("loss must be positive");
        }
        if self.q - (1.0 - self.q) * self.loss >= 0.0 {
            return bad("the regulator must prefer rejection under the prior");
        }
        if !(self.tradeoff_order > 1.0) || !self.tradeoff_order.is_finite() {
            return bad("tradeoff order must be finite and above 1");
        }
        let n = self.types.len();
        if n == 0 || self.weights.len() != n || self.alpha_lo.len() != n || self.alpha_hi.len() != n {
            return bad("types, weights and alpha ranges must have the same nonzero length");
        }
        for i in 0..n {
            let (a, b) = (self.alpha_lo[i], self.alpha_hi[i]);
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
                return bad(&format!("type {i}: alpha range [{a}, {b}] is not inside [0, 1]"));
            }
            if i > 0 && (a > self.alpha_lo[i - 1] || b < self.alpha_hi[i - 1]) {
                return bad(&format!("type {i}: alpha range does not contain the previous type's"));
            }
        }
        if self.alpha_steps == 0 || self.u_steps == 0 {
            return bad("grid resolutions must be nonzero");
        }
        Ok(())
    }

    /// False negative rate of the test with false positive rate `alpha`.
    pub fn psi(&self, alpha: f64) -> f64 {
        let k = self.tradeoff_order;
        (1.0 - alpha.powf(1.0 / k)).max(0.0).powf(k)
    }

    pub fn psi_slope(&self, alpha: f64) -> f64 {
        let k = self.tradeoff_order;
        let r = alpha.powf(1.0 / k);
        -(1.0 - r).max(0.0).powf(k - 1.0) * r / alpha
    }

    /// Regulator payoff from approving exactly on a positive result.
    pub fn approval_value(&self, alpha: f64) -> f64 {
        self.q * (1.0 - self.psi(alpha)) - (1.0 - self.q) * alpha * self.loss
    }

    /// Probability of a positive result.
    pub fn positive_rate(&self, alpha: f64) -> f64 {
        self.q * (1.0 - self.psi(alpha)) + (1.0 - self.q) * alpha
    }

    /// Approval probability when the regulator follows the test only if
    /// doing so beats rejecting outright.
    pub fn approval_probability(&self, alpha: f64) -> f64 {
        if alpha <= self.alpha_break_even() {
            self.positive_rate(alpha)
        } else {
            0.0
        }
    }

    /// Favorite false positive rate: the slope of the tradeoff equals
    /// `-(1 - q) L / q`.
    pub fn alpha_star(&self) -> f64 {
        let target = -(1.0 - self.q) * self.loss / self.q;
        bisect(0.0, 1.0, |a| self.psi_slope(a) - target)
    }

    /// Interior rate at which following a positive result breaks even.
    pub fn alpha_break_even(&self) -> f64 {
        bisect(self.alpha_star(), 1.0, |a| -self.approval_value(a))
    }

    /// Test the regulator picks for type `i` under full information.
    pub fn preferred_alpha(&self, i: usize) -> f64 {
        self.alpha_star().clamp(self.alpha_lo[i], self.alpha_hi[i])
    }

    pub fn reference_curve(&self) -> Vec<f64> {
        (0..self.types.len()).map(|i| self.approval_probability(self.preferred_alpha(i))).collect()
    }

    fn alpha_samples(&self, i: usize) -> Vec<f64> {
        let (a, b) = (self.alpha_lo[i], self.alpha_hi[i]);
        let mut xs: Vec<f64> = (0..=self.alpha_steps)
            .map(|k| if k == self.alpha_steps { b } else { a + (b - a) * k as f64 / self.alpha_steps as f64 })
            .collect();
        xs.extend([self.alpha_star(), self.alpha_break_even()].into_iter().filter(|x| (a..=b).contains(x)));
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }
}

/// Root of an increasing-through-zero `f` on `[lo, hi]`.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Pure approval policies; every frontier vertex is one of these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum FdaPolicy {
    RejectAlways,
    ApproveOnPositive { alpha: f64 },
    ApproveOnNegative { alpha: f64 },
    ApproveAlways,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabeledPoint {
    pub u: f64,
    pub v: f64,
    pub policy: FdaPolicy,
}

#[derive(Debug, Clone)]
pub struct FdaScenario {
    pub config: FdaConfig,
    pub scenario: Scenario,
    pub reference_u_c: Vec<f64>,
    pub alpha_star: f64,
    pub alpha_break_even: f64,
    pub points: Vec<Vec<LabeledPoint>>,
    pub default_points: Vec<LabeledPoint>,
}

fn default_points(config: &FdaConfig) -> Vec<LabeledPoint> {
    let q = config.q;
    vec![
        LabeledPoint { u: 0.0, v: 0.0, policy: FdaPolicy::RejectAlways },
        LabeledPoint { u: 1.0, v: q - (1.0 - q) * config.loss, policy: FdaPolicy::ApproveAlways },
    ]
}

fn type_points(config: &FdaConfig, i: usize) -> Vec<LabeledPoint> {
    let (q, l) = (config.q, config.loss);
    let mut pts = default_points(config);
    for alpha in config.alpha_samples(i) {
        let beta = config.psi(alpha);
        pts.push(LabeledPoint {
            u: config.positive_rate(alpha),
            v: config.approval_value(alpha),
            policy: FdaPolicy::ApproveOnPositive { alpha },
        });
        pts.push(LabeledPoint {
            u: q * beta + (1.0 - q) * (1.0 - alpha),
            v: q * beta - (1.0 - q) * (1.0 - alpha) * l,
            policy: FdaPolicy::ApproveOnNegative { alpha },
        });
    }
    pts
}

pub fn fda_scenario(config: &FdaConfig) -> Result<FdaScenario> {
    config.validate()?;
    let points: Vec<Vec<LabeledPoint>> = (0..config.types.len()).map(|i| type_points(config, i)).collect();
    let defaults = default_points(config);
    let reference_u_c = config.reference_curve();
    let raw = |ps: &[LabeledPoint]| ps.iter().map(|p| [p.u, p.v]).collect::<Vec<_>>();
    let file = ScenarioFile {
        types: config.types.clone(),
        weights: config.weights.clone(),
        u_grid: GridSpec::Uniform { min: 0.0, max: 1.0, steps: config.u_steps },
        surface: SurfaceSpec::Points { points: points.iter().map(|p| raw(p)).collect() },
        default: DefaultSpec::Points(raw(&defaults)),
        metadata: [
            ("application".to_string(), serde_json::json!("fda")),
            ("q".to_string(), serde_json::json!(config.q)),
            ("loss".to_string(), serde_json::json!(config.loss)),
            ("alpha_star".to_string(), serde_json::json!(config.alpha_star())),
            ("alpha_break_even".to_string(), serde_json::json!(config.alpha_break_even())),
        ]
        .into_iter()
        .collect(),
        reference_u_c: Some(reference_u_c.clone()),
    };
    Ok(FdaScenario {
        config: config.clone(),
        scenario: Scenario::from_file(file)?,
        reference_u_c,
        alpha_star: config.alpha_star(),
        alpha_break_even: config.alpha_break_even(),
        points,
        default_points: defaults,
    })
}

impl FdaScenario {
    /// Policies mixed to deliver approval probability `u` to type `i`.
    pub fn decode(&self, i: usize, u: f64) -> Result<Vec<(FdaPolicy, f64)>> {
        let alloc = implement_allocation(&self.scenario.surface, i, u)?;
        alloc
            .support
            .iter()
            .map(|sp| {
                self.points[..=i]
                    .iter()
                    .flatten()
                    .chain(&self.default_points)
                    .find(|p| p.u == sp.u && p.v == sp.v)
                    .map(|p| (p.policy, sp.weight))
                    .ok_or_else(|| Error::InvalidInput(format!("no policy behind support point ({}, {})", sp.u, sp.v)))
            })
            .collect()
    }
}
