mod common;

use std::collections::BTreeSet;

use common::{oracle_minimal_plans, small_locomotion, small_manipulation};
use hybridplan::domains::locomotion::move_cm;
use hybridplan::domains::{generate_suite, parse_instance, print_instance, Leg, LocomotionInstance, ManipulationInstance, SuiteProfile};
use hybridplan::strategies::run_int;
use hybridplan::{CheckCache, DomainKind, EnumerationConfig, Instance, Status};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_instances_parse_back(seed in any::<u64>(), loco in any::<bool>()) {
        let inst = if loco {
            Instance::Locomotion(small_locomotion(seed))
        } else {
            Instance::Manipulation(small_manipulation(seed))
        };
        let text = print_instance(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(print_instance(&back), text);
    }

    #[test]
    fn sampled_instances_validate_and_build(seed in any::<u64>()) {
        for inst in [Instance::Locomotion(small_locomotion(seed)), Instance::Manipulation(small_manipulation(seed))] {
            prop_assert!(inst.validate().is_ok());
            let hp = inst.build().unwrap();
            prop_assert_eq!(hp.modules.len(), 2);
        }
    }
}

#[test]
fn generated_suites_are_solvable_and_printable() {
    for kind in [DomainKind::Locomotion, DomainKind::Manipulation] {
        let profile = SuiteProfile::small(kind);
        let suite = generate_suite(kind, 3, 5, &profile).unwrap();
        assert_eq!(suite.len(), 3);
        for g in &suite {
            assert_eq!(g.instance.kind(), kind);
            assert!(g.meta.plan_len >= profile.min_plan_len);
            assert!(g.meta.plan_len <= profile.horizon);
            assert_eq!(parse_instance(&print_instance(&g.instance)).unwrap(), g.instance);
        }
        let names: std::collections::BTreeSet<_> = suite.iter().map(|g| g.name.clone()).collect();
        assert_eq!(names.len(), 3);
    }
}

fn int_all(inst: &Instance, horizon: usize) -> hybridplan::RunOutcome {
    let cfg = EnumerationConfig {
        horizon_max: Some(horizon),
        ..EnumerationConfig::all()
    };
    run_int(&inst.build().unwrap(), &cfg, &CheckCache::new()).unwrap()
}

#[test]
fn adjacent_goal_takes_one_cm_move() {
    let leg = |x, y| Leg { pos: (x, y), attached: true };
    let inst = Instance::Locomotion(LocomotionInstance {
        grid: 4,
        seed: 0,
        occupied: BTreeSet::new(),
        legs: [leg(0, 0), leg(2, 0), leg(0, 2), leg(2, 2)],
        cm: (1, 1),
        goal: (1, 2),
        reach: 2.5,
    });
    let oracle = oracle_minimal_plans(&inst, &inst.build().unwrap().problem, 2);
    assert!(oracle.iter().all(|p| p.len() == 1));
    assert!(oracle.contains(&vec![vec![move_cm((1, 2))]]));
    let out = int_all(&inst, 2);
    assert_eq!(out.plans.len(), oracle.len());
    assert_eq!(out.plans[0].len(), 1);
}

fn corridor(obstacles: &[(i32, i32)]) -> Instance {
    Instance::Manipulation(ManipulationInstance {
        grid: 5,
        seed: 0,
        obstacles: obstacles.iter().copied().collect(),
        bases: [(-1, 2), (5, 2)],
        payloads: vec![[(0, 3), (2, 3)]],
        goal: vec![[(2, 3), (4, 3)]],
        link_len: 3.5,
    })
}

#[test]
fn open_corridor_needs_chebyshev_distance_plus_two() {
    let inst = corridor(&[]);
    let oracle = oracle_minimal_plans(&inst, &inst.build().unwrap().problem, 6);
    assert!(!oracle.is_empty());
    assert!(oracle.iter().all(|p| p.len() == 2 + 2));
    let out = int_all(&inst, 6);
    assert_eq!(out.plans.len(), oracle.len());
}

#[test]
fn obstacle_wall_leaves_no_plan() {
    let inst = Instance::Manipulation(ManipulationInstance {
        grid: 7,
        seed: 0,
        obstacles: (0..7).map(|y| (3, y)).collect(),
        bases: [(-1, 3), (7, 3)],
        payloads: vec![[(0, 3), (2, 3)]],
        goal: vec![[(4, 3), (6, 3)]],
        link_len: 4.0,
    });
    assert!(oracle_minimal_plans(&inst, &inst.build().unwrap().problem, 6).is_empty());
    let out = int_all(&inst, 10);
    assert_eq!(out.status, Status::NoPlanExists);
}
