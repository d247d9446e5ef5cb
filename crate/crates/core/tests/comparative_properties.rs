use chainscreen::comparative::{
    default_expansion_compare, fosd_compare, verify_expansion_dominance, Expansion,
};
use chainscreen::model::{Frontier, Quadratic};
use chainscreen::random::{random_quadratic_scenario, random_weights};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn check_expansions(seed: u64, n: usize, m: usize) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = random_quadratic_scenario(&mut rng, n, m);
    let map = (0..n).map(|i| rng.gen_range(i..n)).collect();
    let r = verify_expansion_dominance(&s, &Expansion::OnChain { map }).unwrap();
    prop_assert!(r.pass(), "{:?}", r);
    let mut shift = 0.0;
    let frontiers = s.surface.frontiers().iter().map(|f| {
        shift += rng.gen_range(0.0..0.3);
        match f {
            Frontier::Quadratic(q) => Frontier::Quadratic(Quadratic { height: q.height + shift, ..*q }),
            Frontier::Polyline(_) => unreachable!(),
        }
    }).collect();
    let r = verify_expansion_dominance(&s, &Expansion::OffChain { frontiers, projection: (0..n).collect() }).unwrap();
    prop_assert!(r.pass(), "{:?}", r);
    prop_assert!(r.resolved_opt.is_some());
    Ok(())
}

// Interim payoffs of a monotonized promise can tie up to rounding.
#[test]
fn expansion_with_rounding_ties() {
    check_expansions(7126638192653485112, 4, 2).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn expansions_never_hurt(seed in any::<u64>(), n in 1usize..=6, m in 2usize..=8) {
        check_expansions(seed, n, m)?;
    }

    #[test]
    fn dominating_weights_never_hurt(seed in any::<u64>(), n in 1usize..=6, m in 2usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_quadratic_scenario(&mut rng, n, m);
        // move a random share of each type's mass to a random higher type
        let mut alt = s.weights().to_vec();
        for i in 0..n {
            let j = rng.gen_range(i..n);
            let moved = alt[i] * rng.gen_range(0.0..1.0);
            alt[i] -= moved;
            alt[j] += moved;
        }
        let total: f64 = alt.iter().sum();
        alt.iter_mut().for_each(|w| *w /= total);
        if let Ok(r) = fosd_compare(&s, &alt) {
            prop_assert!(r.pass(), "{:?}", r);
        }
        let _ = random_weights(&mut rng, 1);
    }

    #[test]
    fn larger_defaults_never_hurt(seed in any::<u64>(), n in 1usize..=6, m in 2usize..=8, drop in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_quadratic_scenario(&mut rng, n, m);
        let Frontier::Polyline(d) = s.surface.default_frontier() else { unreachable!() };
        let (u0, v0) = d.vertices()[0];
        let lower = u0 * (1.0 - drop);
        let bigger = Frontier::from_points(&[(lower, v0 - 1.0), (u0, v0)]).unwrap();
        let r = default_expansion_compare(&s, &bigger).unwrap();
        prop_assert!(r.pass(), "{:?}", r);
    }
}
