//! Seeded instance suites. Each instance is valid and has a plan under an
//! in-search check within the profile's budget.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::checks::CheckCache;
use crate::model::Transition;
use crate::planner::{search, Deadline, EnumerationConfig, SearchEnd, Verdict};

use super::locomotion::{Leg, LocomotionInstance, LEGS};
use super::manipulation::{all_poses, cells, is_bar, moves, ManipulationInstance, PayloadCheck, Pose, RobotCheck};
use super::{DomainError, DomainKind, HybridProblem, Instance};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteProfile {
    pub grid: i32,
    /// Probability that a free cell becomes an obstacle.
    pub obstacle_density: f64,
    /// Inclusive range: CM Manhattan distance (locomotion) or, per moved
    /// payload, the number of feasible moves to its goal (manipulation).
    pub goal_distance: (u32, u32),
    pub payloads: (usize, usize),
    pub reach: f64,
    pub link_len: f64,
    /// Budget for the solvability filter.
    pub horizon: usize,
    /// Instances whose shortest feasible plan is shorter are discarded.
    pub min_plan_len: usize,
    pub solve_timeout: Duration,
    pub max_attempts: usize,
}

impl SuiteProfile {
    /// Full-size suites: 10x10 walking grids, 11x11 manipulation grids.
    pub fn standard(kind: DomainKind) -> Self {
        match kind {
            DomainKind::Locomotion => SuiteProfile {
                grid: 10,
                obstacle_density: 0.1,
                goal_distance: (2, 3),
                payloads: (0, 0),
                reach: 2.5,
                link_len: 6.0,
                horizon: 10,
                min_plan_len: 1,
                solve_timeout: Duration::from_secs(30),
                max_attempts: 100,
            },
            DomainKind::Manipulation => SuiteProfile {
                grid: 11,
                obstacle_density: 0.15,
                goal_distance: (3, 6),
                payloads: (1, 2),
                reach: 2.5,
                link_len: 6.0,
                horizon: 14,
                min_plan_len: 1,
                solve_timeout: Duration::from_secs(30),
                max_attempts: 100,
            },
        }
    }

    /// Desk-scale suites whose runs finish in seconds under every strategy.
    pub fn small(kind: DomainKind) -> Self {
        match kind {
            DomainKind::Locomotion => SuiteProfile {
                grid: 5,
                goal_distance: (2, 2),
                horizon: 8,
                min_plan_len: 4,
                solve_timeout: Duration::from_secs(10),
                ..SuiteProfile::standard(kind)
            },
            DomainKind::Manipulation => SuiteProfile {
                grid: 7,
                obstacle_density: 0.2,
                goal_distance: (3, 5),
                payloads: (1, 1),
                link_len: 3.5,
                horizon: 10,
                solve_timeout: Duration::from_secs(10),
                ..SuiteProfile::standard(kind)
            },
        }
    }
}

/// Difficulty proxies recorded alongside each generated instance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceMeta {
    pub grid: i32,
    pub obstacles: usize,
    pub obstacle_density: f64,
    pub goal_distance: u32,
    pub payloads: usize,
    pub attempts: usize,
    /// Steps in the plan found by the solvability filter.
    pub plan_len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedInstance {
    pub name: String,
    pub instance: Instance,
    pub meta: InstanceMeta,
}

fn instance_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index as u64
}

pub fn generate_suite(
    kind: DomainKind,
    count: usize,
    seed: u64,
    profile: &SuiteProfile,
) -> Result<Vec<GeneratedInstance>, DomainError> {
    (0..count).map(|i| generate_one(kind, seed, i, profile)).collect()
}

fn generate_one(kind: DomainKind, seed: u64, index: usize, profile: &SuiteProfile) -> Result<GeneratedInstance, DomainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let iseed = instance_seed(seed, index);
    for attempt in 1..=profile.max_attempts {
        let drafted = match kind {
            DomainKind::Locomotion => draft_locomotion(&mut rng, iseed, profile),
            DomainKind::Manipulation => draft_manipulation(&mut rng, iseed, profile),
        };
        let Some((instance, goal_distance)) = drafted else { continue };
        let Ok(hp) = instance.build() else { continue };
        let Some(plan_len) = solvable(&hp, profile)? else { continue };
        if plan_len < profile.min_plan_len {
            continue;
        }
        let (obstacles, payloads) = match &instance {
            Instance::Locomotion(l) => (l.occupied.len(), 0),
            Instance::Manipulation(m) => (m.obstacles.len(), m.payloads.len()),
        };
        let cells = (profile.grid * profile.grid) as f64;
        let prefix = match kind {
            DomainKind::Locomotion => "loco",
            DomainKind::Manipulation => "manip",
        };
        return Ok(GeneratedInstance {
            name: format!("{prefix}-{seed}-{index:03}"),
            meta: InstanceMeta {
                grid: profile.grid,
                obstacles,
                obstacle_density: obstacles as f64 / cells,
                goal_distance,
                payloads,
                attempts: attempt,
                plan_len,
            },
            instance,
        });
    }
    Err(DomainError::GenerationExhausted {
        kind,
        index,
        attempts: profile.max_attempts,
    })
}

/// Length of the first plan found with every check applied in-search.
fn solvable(hp: &HybridProblem, profile: &SuiteProfile) -> Result<Option<usize>, DomainError> {
    let cache = CheckCache::new();
    let modules = &hp.modules;
    let mut hook = |t: &Transition<'_>| {
        for m in modules {
            for key in m.extract_keys(t) {
                if !cache.query(m.as_ref(), &key)?.feasible {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    };
    let config = EnumerationConfig {
        horizon_max: Some(profile.horizon),
        timeout: profile.solve_timeout,
        ..EnumerationConfig::default()
    };
    let deadline = Deadline::after(profile.solve_timeout);
    let mut len = None;
    let out = search(&hp.problem, &config, Some(&mut hook), &deadline, &mut |h| {
        len = Some(h.len());
        Verdict::Accept
    })?;
    Ok(match out.end {
        SearchEnd::Timeout => None,
        _ => len,
    })
}

fn obstacles(rng: &mut ChaCha8Rng, grid: i32, density: f64, reserved: &BTreeSet<(i32, i32)>) -> BTreeSet<(i32, i32)> {
    let mut out = BTreeSet::new();
    for x in 0..grid {
        for y in 0..grid {
            if !reserved.contains(&(x, y)) && rng.gen_bool(density.clamp(0.0, 1.0)) {
                out.insert((x, y));
            }
        }
    }
    out
}

fn draft_locomotion(rng: &mut ChaCha8Rng, seed: u64, p: &SuiteProfile) -> Option<(Instance, u32)> {
    let g = p.grid;
    if g < 3 {
        return None;
    }
    let cm = (rng.gen_range(1..g - 1), rng.gen_range(1..g - 1));
    let offsets = [(-1, -1), (1, -1), (-1, 1), (1, 1)];
    let legs: [Leg; LEGS] = offsets.map(|d| Leg {
        pos: (cm.0 + d.0, cm.1 + d.1),
        attached: true,
    });
    let mut reserved: BTreeSet<_> = legs.iter().map(|l| l.pos).collect();
    reserved.insert(cm);
    let occupied = obstacles(rng, g, p.obstacle_density, &reserved);
    let goals: Vec<((i32, i32), u32)> = (0..g)
        .flat_map(|x| (0..g).map(move |y| (x, y)))
        .filter(|c| !occupied.contains(c))
        .map(|c| (c, c.0.abs_diff(cm.0) + c.1.abs_diff(cm.1)))
        .filter(|&(_, d)| (p.goal_distance.0..=p.goal_distance.1).contains(&d))
        .collect();
    let &(goal, dist) = goals.choose(rng)?;
    let inst = LocomotionInstance {
        grid: g,
        seed,
        occupied,
        legs,
        cm,
        goal,
        reach: p.reach,
    };
    Some((Instance::Locomotion(inst), dist))
}

fn draft_manipulation(rng: &mut ChaCha8Rng, seed: u64, p: &SuiteProfile) -> Option<(Instance, u32)> {
    let g = p.grid;
    if g < 3 {
        return None;
    }
    let bases = [(-1, g / 2), (g, g / 2)];
    let obstacles = obstacles(rng, g, p.obstacle_density, &BTreeSet::new());
    let pay = PayloadCheck {
        grid: g,
        objects: 0,
        obstacles: obstacles.iter().map(|&(x, y)| (x as i64, y as i64)).collect(),
    };
    let rob = RobotCheck {
        grid: g,
        objects: 0,
        bases,
        link_len: p.link_len,
    };
    let in_grid = |c: &(i32, i32)| (0..g).contains(&c.0) && (0..g).contains(&c.1);
    let usable = |pose: &Pose, taken: &BTreeSet<(i32, i32)>| {
        is_bar(pose)
            && cells(pose).iter().all(|c| in_grid(c) && !taken.contains(c))
            && pay.pose_clear(pose)
            && rob.reachable(pose)
    };

    let n = rng.gen_range(p.payloads.0.max(1)..=p.payloads.1.max(1));
    let mut taken = BTreeSet::new();
    let mut payloads = Vec::new();
    for _ in 0..n {
        let options: Vec<Pose> = all_poses(g)
            .into_iter()
            .filter(|pose| usable(pose, &taken))
            .collect();
        let pose = *options.choose(rng)?;
        taken.extend(cells(&pose));
        payloads.push(pose);
    }

    // Goals are chosen by feasible move distance from the start pose. Each
    // payload keeps clear of every other payload's start and goal cells.
    let (lo, hi) = (p.goal_distance.0.max(1), p.goal_distance.1.max(1));
    let mut goal = payloads.clone();
    let mut total = 0;
    let mover = rng.gen_range(0..n);
    for o in 0..n {
        if o != mover && rng.gen_bool(0.5) {
            continue;
        }
        let others: BTreeSet<_> = (0..n)
            .filter(|&j| j != o)
            .flat_map(|j| cells(&payloads[j]).into_iter().chain(cells(&goal[j])))
            .collect();
        let mut dist: HashMap<Pose, u32> = HashMap::from([(payloads[o], 0)]);
        let mut queue = VecDeque::from([payloads[o]]);
        while let Some(q) = queue.pop_front() {
            let d = dist[&q];
            if d == hi {
                continue;
            }
            for r in moves(&q) {
                if usable(&r, &others) && !dist.contains_key(&r) {
                    dist.insert(r, d + 1);
                    queue.push_back(r);
                }
            }
        }
        let mut options: Vec<(Pose, u32)> = dist.into_iter().filter(|&(_, d)| d >= lo).collect();
        options.sort();
        let &(q, d) = options.choose(rng)?;
        goal[o] = q;
        total += d;
    }
    if goal == payloads {
        return None;
    }
    let inst = ManipulationInstance {
        grid: g,
        seed,
        obstacles,
        bases,
        payloads,
        goal,
        link_len: p.link_len,
    };
    Some((Instance::Manipulation(inst), total))
}
