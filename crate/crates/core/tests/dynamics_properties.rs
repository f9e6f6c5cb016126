mod common;

use amod_core::model::{step, validate_control, validate_state, ArrivalBatch, VehicleAction, VehicleStatus};
use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, ..ProptestConfig::default() })]

    #[test]
    fn feasible_pairs_step_to_feasible_states(
        seed in any::<u64>(),
        n in 1usize..=6,
        m in 0usize..=10,
        charged in any::<bool>(),
        with_arrivals in any::<bool>(),
    ) {
        let mut r = rng(seed);
        let net = random_network(&mut r, n, 4);
        let cp = charged.then(|| random_charge_params(&mut r));
        let state = random_state(&mut r, &net, m, 4, cp.as_ref());
        let arrivals = if with_arrivals { random_arrivals(&mut r, n, 0, 2) } else { ArrivalBatch::zero(n, 0) };
        let ctrl = random_control(&mut r, &state, &arrivals, &net, cp.as_ref());
        prop_assert!(validate_state(&state, &net).unwrap().is_empty());
        prop_assert!(validate_control(&state, &arrivals, &ctrl, &net, cp.as_ref(), None).unwrap().is_empty());

        let next = step(&state, &ctrl, &arrivals, &net, cp.as_ref()).unwrap();
        prop_assert!(validate_state(&next, &net).unwrap().is_empty());
        prop_assert_eq!(next.fleet_size(), m);
        prop_assert_eq!(next.time, state.time + 1);

        // customers: waiting + arrived - picked up
        let picked = ctrl.actions.iter().filter(|a| matches!(a, VehicleAction::Pickup { .. })).count() as i64;
        prop_assert_eq!(next.total_waiting(), state.total_waiting() + arrivals.total() as i64 - picked);

        for (k, a) in ctrl.actions.iter().enumerate() {
            let expected = match (*a, state.vehicles[k]) {
                (VehicleAction::Hold, VehicleStatus::Waiting { station }) => VehicleStatus::Waiting { station },
                (VehicleAction::Hold, VehicleStatus::EnRoute { dest, remaining: 0 }) => VehicleStatus::Waiting { station: dest },
                (VehicleAction::Hold, VehicleStatus::EnRoute { dest, remaining }) => {
                    VehicleStatus::EnRoute { dest, remaining: remaining - 1 }
                }
                (VehicleAction::Pickup { from, to } | VehicleAction::Rebalance { from, to }, _) => {
                    VehicleStatus::EnRoute { dest: to, remaining: net.travel_time(from, to) - 1 }
                }
            };
            prop_assert_eq!(next.vehicles[k], expected);
        }
    }

    #[test]
    fn charge_stays_in_the_unit_interval_over_many_steps(seed in any::<u64>(), n in 2usize..=5, m in 1usize..=6) {
        let mut r = rng(seed);
        let net = random_network(&mut r, n, 3);
        let cp = random_charge_params(&mut r);
        let mut state = random_state(&mut r, &net, m, 3, Some(&cp));
        for t in 0..30 {
            let arrivals = random_arrivals(&mut r, n, t, 1);
            let ctrl = random_control(&mut r, &state, &arrivals, &net, Some(&cp));
            state = step(&state, &ctrl, &arrivals, &net, Some(&cp)).unwrap();
            prop_assert!(state.charges.as_ref().unwrap().iter().all(|q| q.is_unit_interval()));
        }
    }
}
