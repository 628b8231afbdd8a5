mod common;

use iab_core::action_filter::FilterConfig;
use iab_core::checker::check_state;
use iab_core::greedy::{brute_force_optimum, greedy_plan, Optimum};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn greedy_is_valid_deterministic_and_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::random_scenario(&mut rng, 8);
        let filter = FilterConfig::default();
        let a = greedy_plan(&s, &filter, 1.0);
        let b = greedy_plan(&s, &filter, 1.0);
        prop_assert_eq!(a.state.deployed(), b.state.deployed());
        prop_assert_eq!(a.state.parents(), b.state.parents());
        prop_assert_eq!(check_state(&s, &a.state), vec![]);
        if a.complete {
            match brute_force_optimum(&s, 1.0, 12).unwrap() {
                Optimum::Feasible(opt) => {
                    prop_assert_eq!(check_state(&s, &opt), vec![]);
                    prop_assert!(opt.coverage_fraction() >= 1.0);
                    prop_assert!(opt.num_nodes() <= a.state.num_nodes());
                    prop_assert!(a.state.num_nodes() <= opt.num_nodes() + s.num_sites());
                }
                Optimum::Infeasible => prop_assert!(false, "greedy found a plan the oracle missed"),
            }
        }
    }
}
