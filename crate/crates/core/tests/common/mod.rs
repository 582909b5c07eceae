//! Test support: small random instances and a brute-force plan oracle that
//! evaluates feasibility straight from the states, bypassing check modules
//! and the planner.

#![allow(dead_code)]

pub mod geom;

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use hybridplan::checks::{l_leg, l_pay, l_rob};
use hybridplan::domains::locomotion::{ATTACHED, CM_AT, LEG_AT, PLACE};
use hybridplan::domains::manipulation::{ENDPOINT_AT, MOVE_PAYLOAD, PICKUP};
use hybridplan::domains::{Leg, LocomotionInstance, ManipulationInstance, Pose};
use hybridplan::geometry::Point;
use hybridplan::model::{apply, canonical_step, ActionSchema};
use hybridplan::{ActionInstance, Instance, PlanningProblem, State, Step};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Cell = (i32, i32);

/// Random locomotion instance on at most a 4x4 grid.
pub fn small_locomotion(seed: u64) -> LocomotionInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let grid = rng.gen_range(3..=4);
        let cm = (rng.gen_range(0..grid), rng.gen_range(0..grid));
        let mut around: Vec<Cell> = (-1..=1)
            .flat_map(|dx| (-1..=1).map(move |dy| (cm.0 + dx, cm.1 + dy)))
            .filter(|&(x, y)| x >= 0 && y >= 0 && x < grid && y < grid)
            .collect();
        if around.len() < 4 {
            continue;
        }
        around.shuffle(&mut rng);
        let legs: Vec<Leg> = around[..4].iter().map(|&pos| Leg { pos, attached: true }).collect();
        let goals: Vec<Cell> = (0..grid)
            .flat_map(|x| (0..grid).map(move |y| (x, y)))
            .filter(|c| (c.0 - cm.0).abs() + (c.1 - cm.1).abs() == 2)
            .collect();
        let goal = *goals.choose(&mut rng).expect("grid has cells near the cm");
        let mut occupied = BTreeSet::new();
        for x in 0..grid {
            for y in 0..grid {
                let c = (x, y);
                if c != cm && c != goal && !around[..4].contains(&c) && rng.gen_bool(0.15) {
                    occupied.insert(c);
                }
            }
        }
        let inst = LocomotionInstance {
            grid,
            seed,
            occupied,
            legs: [legs[0], legs[1], legs[2], legs[3]],
            cm,
            goal,
            reach: [1.5, 2.0, 2.5][rng.gen_range(0..3)],
        };
        if inst.validate().is_ok() {
            return inst;
        }
    }
}

/// Random single-payload manipulation instance on a 4x4 grid.
pub fn small_manipulation(seed: u64) -> ManipulationInstance {
    use hybridplan::domains::manipulation::{all_poses, moves};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = 4;
    let poses = all_poses(grid);
    loop {
        let start = *poses.choose(&mut rng).expect("grid has poses");
        let mut goal = start;
        for _ in 0..rng.gen_range(2..=3) {
            let next: Vec<Pose> = moves(&goal).into_iter().filter(|p| poses.contains(p)).collect();
            goal = *next.choose(&mut rng).expect("some move stays on the grid");
        }
        let mut obstacles = BTreeSet::new();
        for x in 0..grid {
            for y in 0..grid {
                if rng.gen_bool(0.2) {
                    obstacles.insert((x, y));
                }
            }
        }
        let inst = ManipulationInstance {
            grid,
            seed,
            obstacles,
            bases: [(-1, 2), (grid, 2)],
            payloads: vec![start],
            goal: vec![goal],
            link_len: [2.5, 3.0, 3.5][rng.gen_range(0..3)],
        };
        if goal != start && inst.validate().is_ok() {
            return inst;
        }
    }
}

/// Closed containment of `p` in the hull of `pts`, by trying every triple.
fn in_some_triangle(pts: &[Cell], p: Cell) -> bool {
    let cross = |o: Cell, a: Cell, b: Cell| -> i64 {
        (a.0 - o.0) as i64 * (b.1 - o.1) as i64 - (a.1 - o.1) as i64 * (b.0 - o.0) as i64
    };
    for &a in pts {
        for &b in pts {
            for &c in pts {
                let d = [cross(a, b, p), cross(b, c, p), cross(c, a, p)];
                let inside = d.iter().all(|&v| v >= 0) || d.iter().all(|&v| v <= 0);
                let xs = [a.0, b.0, c.0];
                let ys = [a.1, b.1, c.1];
                let boxed = (*xs.iter().min().unwrap()..=*xs.iter().max().unwrap()).contains(&p.0)
                    && (*ys.iter().min().unwrap()..=*ys.iter().max().unwrap()).contains(&p.1);
                if inside && boxed {
                    return true;
                }
            }
        }
    }
    false
}

fn fluent_cell(s: &State, name: &str, prefix: &[i32]) -> Option<Cell> {
    s.iter()
        .find(|f| f.name == name && f.args.starts_with(prefix))
        .map(|f| (f.args[prefix.len()], f.args[prefix.len() + 1]))
}

fn center(c: Cell) -> Point {
    Point::new(c.0 as f64 + 0.5, c.1 as f64 + 0.5)
}

/// Direct geometric feasibility of one transition.
pub fn transition_feasible(inst: &Instance, pre: &State, step: &[ActionInstance], post: &State) -> bool {
    match inst {
        Instance::Locomotion(l) => {
            let Some(cm) = fluent_cell(post, CM_AT, &[]) else { return false };
            let grounded: Vec<Cell> = post
                .iter()
                .filter(|f| f.name == ATTACHED)
                .filter_map(|f| fluent_cell(post, LEG_AT, &[f.args[0]]))
                .collect();
            if !in_some_triangle(&grounded, cm) {
                return false;
            }
            let pre_cm = fluent_cell(pre, CM_AT, &[]).expect("cm is always known");
            step.iter().filter(|a| a.name == PLACE).all(|a| {
                let leg = Point::new(a.args[1] as f64, a.args[2] as f64);
                l_leg(leg, Point::new(pre_cm.0 as f64, pre_cm.1 as f64), l.reach)
            })
        }
        Instance::Manipulation(m) => {
            let obstacles: Vec<(i64, i64)> = m.obstacles.iter().map(|&(x, y)| (x as i64, y as i64)).collect();
            let rob = |a: Cell, b: Cell| l_rob(center(a), center(b), center(m.bases[0]), center(m.bases[1]), m.link_len);
            step.iter().all(|a| match a.name {
                MOVE_PAYLOAD => {
                    let (p, q) = ((a.args[1], a.args[2]), (a.args[3], a.args[4]));
                    let seg = (center(p), center(q));
                    l_pay(seg, seg, &obstacles, 0) && rob(p, q)
                }
                PICKUP => {
                    let o = a.args[0];
                    match (fluent_cell(pre, ENDPOINT_AT, &[o, 0]), fluent_cell(pre, ENDPOINT_AT, &[o, 1])) {
                        (Some(p), Some(q)) => rob(p, q),
                        _ => false,
                    }
                }
                _ => true,
            })
        }
    }
}

/// Every nonempty step applicable in `state`, built from all groundings.
fn all_steps(state: &State, schemas: &[Arc<dyn ActionSchema>]) -> Vec<Step> {
    let mut acts: Vec<ActionInstance> = schemas
        .iter()
        .flat_map(|s| s.groundings().into_iter().filter(|a| s.precondition(state, a)))
        .collect();
    acts.sort();
    acts.dedup();
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<ActionInstance>, usize)> = vec![(Vec::new(), 0)];
    while let Some((chosen, from)) = stack.pop() {
        for (j, a) in acts.iter().enumerate().skip(from) {
            let mut next = chosen.clone();
            next.push(a.clone());
            if apply(state, &next, schemas).is_ok() {
                out.push(canonical_step(next.clone()));
                stack.push((next, j + 1));
            }
        }
    }
    out
}

/// All valid plans of the shortest length at which any exists, up to
/// `horizon` steps.
pub fn oracle_minimal_plans(inst: &Instance, problem: &PlanningProblem, horizon: usize) -> HashSet<Vec<Step>> {
    fn go(
        inst: &Instance,
        problem: &PlanningProblem,
        state: &State,
        left: usize,
        path: &mut Vec<Step>,
        out: &mut HashSet<Vec<Step>>,
    ) {
        if left == 0 {
            if problem.is_goal(state) {
                out.insert(path.clone());
            }
            return;
        }
        for step in all_steps(state, &problem.schemas) {
            let post = apply(state, &step, &problem.schemas).expect("step was validated");
            if !transition_feasible(inst, state, &step, &post) {
                continue;
            }
            path.push(step);
            go(inst, problem, &post, left - 1, path, out);
            path.pop();
        }
    }
    for h in 0..=horizon {
        let mut out = HashSet::new();
        go(inst, problem, &problem.initial, h, &mut Vec::new(), &mut out);
        if !out.is_empty() {
            return out;
        }
    }
    HashSet::new()
}

/// Strategies compared against the oracle for each domain.
pub fn strategy_matrix(inst: &Instance) -> Vec<hybridplan::StrategySpec> {
    let (pre, mixed) = match inst {
        Instance::Locomotion(_) => ("pre+int", [("int", "bal=repl,leg=pre"), ("filt", "bal=int,leg=repl")]),
        Instance::Manipulation(_) => ("pre", [("int", "pay=pre,rob=repl"), ("repl", "pay=filt,rob=int")]),
    };
    let mut out: Vec<hybridplan::StrategySpec> = [pre, "int", "filt", "repl", "batchrepl:1", "batchrepl:2", "batchrepl:8"]
        .iter()
        .map(|s| s.parse().expect("valid strategy"))
        .collect();
    for (base, assign) in mixed {
        let spec: hybridplan::StrategySpec = base.parse().expect("valid strategy");
        out.push(spec.with_assignments(assign).expect("valid assignment"));
    }
    out
}
