use proptest::prelude::*;

use wptsim::offline::{
    kp_to_mnc, kp_to_mnl, kp_to_mnl_with_order, default_mnc_range, solve_kp, solve_mnc_bruteforce, solve_mnc_dp,
    solve_mnl_bruteforce, AgentRound, BatteryMode, BudgetRule, Contact, KnapsackInstance, OfflineInstance,
    OfflineRound, Problem,
};

fn kp_strategy(max_items: usize, max_value: u64, max_weight: u64, max_cap: u64) -> impl Strategy<Value = KnapsackInstance> {
    (
        prop::collection::vec((1..=max_value, 1..=max_weight), 1..=max_items),
        0..=max_cap,
    )
        .prop_map(|(items, cap)| KnapsackInstance::new(&items, cap))
}

#[test]
fn theorem_one_example() {
    let kp = KnapsackInstance::new(&[(1, 1), (2, 3)], 3);
    let sol = solve_mnc_bruteforce(&kp_to_mnc(&kp, default_mnc_range(&kp)).unwrap()).unwrap();
    assert_eq!(sol.objective, 2);
    assert_eq!(solve_kp(&kp).unwrap(), 2);
}

#[test]
fn theorem_two_example() {
    let kp = KnapsackInstance::new(&[(2, 1)], 1);
    let inst = kp_to_mnl(&kp, 1.0).unwrap();
    assert_eq!(inst.horizon(), 3);
    // Buying the only charge keeps the agent alive for its two-round block;
    // skipping it leaves the agent empty throughout.
    assert_eq!(inst.evaluate(&[1, 0, 0]).unwrap().alive_rounds, 2);
    assert_eq!(inst.evaluate(&[0, 0, 0]).unwrap().alive_rounds, 0);
    assert_eq!(solve_mnl_bruteforce(&inst).unwrap().objective, 2);
}

#[test]
fn single_range_dp_is_greedy() {
    // One range: every round is served while the budget lasts.
    let round = |m: f64| OfflineRound {
        agents: vec![AgentRound {
            agent: 0,
            consumption: vec![0.0],
            contacts: vec![Some(Contact {
                entry_distance: 2.0 / m.sqrt(),
                in_range_time: 1.0,
                entry_time: 0.0,
            })],
        }],
    };
    let inst = OfflineInstance {
        ranges: vec![2.0],
        charger_energy: 10.0,
        battery_capacity: 10.0,
        initial_levels: vec![0.0],
        battery_mode: BatteryMode::ResetEachRound,
        budget_rule: BudgetRule::PerAgent,
        energy_denominator: None,
        rounds: vec![round(3.0), round(4.0), round(2.0), round(5.0)],
    };
    let mut budget = 10.0;
    let mut greedy = 0;
    for cost in [3.0, 4.0, 2.0, 5.0] {
        if cost <= budget {
            budget -= cost;
            greedy += 1;
        }
    }
    assert_eq!(solve_mnc_dp(&inst).unwrap().objective, greedy);
}

#[test]
fn reduced_instance_round_trips_through_json() {
    let kp = KnapsackInstance::new(&[(3, 7), (2, 2), (4, 1)], 6);
    for inst in [kp_to_mnc(&kp, default_mnc_range(&kp)).unwrap(), kp_to_mnl(&kp, 2.0).unwrap()] {
        let back = OfflineInstance::from_json_str(&serde_json::to_string(&inst).unwrap()).unwrap();
        assert_eq!(back, inst);
        assert_eq!(
            solve_mnc_bruteforce(&back).unwrap().objective,
            solve_mnc_bruteforce(&inst).unwrap().objective
        );
        assert_eq!(
            solve_mnl_bruteforce(&back).unwrap().objective,
            solve_mnl_bruteforce(&inst).unwrap().objective
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mnc_reduction_matches_kp(kp in kp_strategy(8, 6, 8, 20)) {
        let inst = kp_to_mnc(&kp, default_mnc_range(&kp)).unwrap();
        let brute = solve_mnc_bruteforce(&inst).unwrap();
        prop_assert_eq!(brute.objective, solve_kp(&kp).unwrap());
        prop_assert!(brute.energy_spent <= kp.capacity as f64 + 1e-9);
        // The reduction's costs are integral over lcm(values).
        prop_assert_eq!(solve_mnc_dp(&inst).unwrap().objective, brute.objective);
    }

    #[test]
    fn mnl_reduction_matches_kp(kp in kp_strategy(5, 4, 8, 12)) {
        let sol = solve_mnl_bruteforce(&kp_to_mnl(&kp, 1.5).unwrap()).unwrap();
        prop_assert_eq!(sol.objective, solve_kp(&kp).unwrap());
    }

    #[test]
    fn mnl_optimum_ignores_item_order(kp in kp_strategy(4, 4, 6, 10), seed in any::<u64>()) {
        let mut order: Vec<usize> = (0..kp.items.len()).collect();
        // Deterministic shuffle from the seed.
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let a = solve_mnl_bruteforce(&kp_to_mnl(&kp, 1.0).unwrap()).unwrap().objective;
        let b = solve_mnl_bruteforce(&kp_to_mnl_with_order(&kp, 1.0, &order).unwrap()).unwrap().objective;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn solutions_replay_to_their_claims(kp in kp_strategy(6, 5, 8, 15)) {
        for (inst, problem) in [
            (kp_to_mnc(&kp, default_mnc_range(&kp)).unwrap(), Problem::Mnc),
            (kp_to_mnl(&kp, 1.0).unwrap(), Problem::Mnl),
        ] {
            let sol = match problem {
                Problem::Mnc => solve_mnc_bruteforce(&inst).unwrap(),
                Problem::Mnl => solve_mnl_bruteforce(&inst).unwrap(),
            };
            let eval = inst.evaluate(&sol.choices).unwrap();
            prop_assert_eq!(eval.objective(problem), sol.objective);
            prop_assert_eq!(eval.energy_spent, sol.energy_spent);
            prop_assert!(sol.energy_spent <= inst.charger_energy + 1e-9);
        }
    }
}
