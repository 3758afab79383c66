mod common;

use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generators_preserve_trace_and_hermiticity(c in config()) {
        prop_assert!(check_hygiene(&c).is_ok(), "{:?}", check_hygiene(&c));
    }

    #[test]
    fn readout_states_are_positive(c in config()) {
        prop_assert!(check_readout(&c).is_ok(), "{:?}", check_readout(&c));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn integrator_is_fourth_order(c in config()) {
        prop_assert!(check_order(&c).is_ok(), "{:?}", check_order(&c));
    }

    #[test]
    fn nullspace_agrees_with_longtime(c in config_with(prop_oneof![Just(Kind::ZeroT), Just(Kind::FiniteT), Just(Kind::Driven)])) {
        prop_assert!(check_nullspace_vs_longtime(&c).is_ok(), "{:?}", check_nullspace_vs_longtime(&c));
    }
}
