//! Power allocation invariants over random availabilities and demands.

use proptest::prelude::*;

use fowfsim::farm::allocate_power;
use fowfsim::Error;

const RATED: f64 = 5.0e6;

proptest! {
    #[test]
    fn shares_sum_to_demand_and_respect_caps(
        available in prop::collection::vec(0.0..8.0e6_f64, 1..8),
        fraction in 0.0..=1.0_f64,
    ) {
        let capacity: f64 = available.iter().map(|a| a.min(RATED)).sum();
        let demand = fraction * capacity;
        let shares = allocate_power(&available, demand, RATED).unwrap();
        prop_assert_eq!(shares.len(), available.len());
        let total: f64 = shares.iter().sum();
        prop_assert!((total - demand).abs() <= 1e-9 * demand.max(1.0));
        for (s, a) in shares.iter().zip(&available) {
            let cap = a.min(RATED);
            prop_assert!(*s >= -1e-9 * RATED && *s <= cap + 1e-6, "share {} cap {}", s, cap);
        }
    }

    #[test]
    fn demand_above_capacity_is_a_shortfall(
        available in prop::collection::vec(0.0..8.0e6_f64, 1..8),
        excess in 1.0..1.0e6_f64,
    ) {
        let capacity: f64 = available.iter().map(|a| a.min(RATED)).sum();
        let err = allocate_power(&available, capacity + excess, RATED).unwrap_err();
        let is_shortfall = matches!(err, Error::PowerShortfall { .. });
        prop_assert!(is_shortfall);
    }
}
