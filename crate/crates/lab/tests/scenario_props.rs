use proptest::prelude::*;
use rhlab::scenario::{self, ConstantPolicy, Scenario};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn canonical_text_round_trips(
        preset in 0usize..6,
        rho in 0.1f64..4.0,
        p in 3.0f64..8.0,
        horizon in 0.01f64..2.0,
        x0 in 0.0f64..6.0,
        snapshots in 4usize..50,
        seed in any::<u64>(),
        c_in in prop::option::of(1e-3f64..10.0),
    ) {
        let mut s = scenario::preset(scenario::PRESETS[preset].0).unwrap();
        s.rho = rho;
        s.p = p;
        s.horizon = horizon;
        s.x0 = x0;
        s.snapshots = snapshots;
        s.seed = seed;
        s.c_in = c_in.map_or(ConstantPolicy::Fitted, ConstantPolicy::Fixed);
        s.validate().unwrap();
        let back = Scenario::parse(&s.to_text()).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.hash(), s.hash());
    }

    #[test]
    fn invalid_values_are_rejected_by_name(rho in -4.0f64..=0.0, p in 0.0f64..2.99) {
        let mut s = scenario::preset("flat_static").unwrap();
        s.rho = rho;
        let msg = Scenario::parse(&s.to_text()).unwrap_err().to_string();
        prop_assert!(msg.contains("localization.rho"), "{}", msg);
        let mut s = scenario::preset("flat_static").unwrap();
        s.p = p;
        let msg = Scenario::parse(&s.to_text()).unwrap_err().to_string();
        prop_assert!(msg.contains("monitor.p"), "{}", msg);
    }
}
