//! Random nested instances for property tests and sweeps.

use rand::Rng;

use crate::model::{Frontier, Quadratic, TypeChain, ValueSurface};
use crate::scenario::Scenario;

/// Evenly spaced levels `k / (m - 1)` on `[0, 1]`.
pub fn unit_grid(m: usize) -> Vec<f64> {
    if m <= 1 {
        return vec![0.0];
    }
    (0..m).map(|k| k as f64 / (m - 1) as f64).collect()
}

/// Weights drawn uniformly from `[0.05, 1]` and normalized.
pub fn random_weights<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Concave quadratic frontiers on `[0, 1]` with peaks on the grid, heights
/// raised until every frontier dominates the one below, and a single
/// default point on the grid below every frontier.
pub fn random_quadratic_scenario<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Scenario {
    let grid = unit_grid(m);
    let (lo, hi) = (0.0, 1.0);
    let mut frontiers: Vec<Quadratic> = Vec::with_capacity(n);
    for i in 0..n {
        let peak = grid[rng.gen_range(0..grid.len())];
        let curvature = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.2..3.0) };
        let mut height = rng.gen_range(0.0..1.0);
        if i > 0 {
            let prev = frontiers[i - 1];
            let cand = Quadratic { height, peak, curvature, lo, hi };
            // the gap prev - cand is quadratic; its maximum sits at an
            // endpoint or at its vertex
            let gap = |u: f64| prev.height - prev.curvature * (u - prev.peak).powi(2) - (cand.height - cand.curvature * (u - cand.peak).powi(2));
            let mut worst = gap(lo).max(gap(hi));
            let lead = cand.curvature - prev.curvature;
            if lead != 0.0 {
                let vertex = (cand.curvature * cand.peak - prev.curvature * prev.peak) / lead;
                if vertex > lo && vertex < hi {
                    worst = worst.max(gap(vertex));
                }
            }
            if worst > 0.0 {
                height += worst;
            }
            if rng.gen_bool(0.7) {
                height += rng.gen_range(0.0..0.5);
            }
        }
        frontiers.push(Quadratic { height, peak, curvature, lo, hi });
    }
    let floor = if rng.gen_bool(0.25) { grid[rng.gen_range(0..grid.len().div_ceil(2))] } else { lo };
    let first = frontiers[0];
    let default_v = first.height - first.curvature * (floor - first.peak).powi(2) - 1.0;
    let surface = ValueSurface::new(
        frontiers.into_iter().map(Frontier::Quadratic).collect(),
        Frontier::from_points(&[(floor, default_v)]).expect("finite point"),
    )
    .expect("valid quadratics");
    let labels = (0..n).map(|i| i as f64).collect();
    let chain = TypeChain::new(labels, random_weights(rng, n)).expect("normalized weights");
    Scenario::new(chain, surface, grid).expect("consistent sizes")
}
