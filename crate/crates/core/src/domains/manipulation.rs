//! Two planar arms carrying rigid bar-shaped payloads across a grid with
//! obstacles. Payload sweep (`pay`) and arm kinematics (`rob`) are the
//! low-level checks.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::checks::{l_pay, l_rob, CheckError, CheckKey, CheckModule};
use crate::geometry::Point;
use crate::model::{ActionInstance, ActionSchema, Constraint, Effect, Fluent, PlanningProblem, State, Transition};

use super::locomotion::grid4;
use super::{DomainError, HybridProblem, DEFAULT_HORIZON};

pub const ENDPOINT_AT: &str = "endpoint_at";
pub const CARRIED: &str = "carried";
pub const FREE: &str = "free";

pub const PICKUP: &str = "pickup";
pub const MOVE_PAYLOAD: &str = "move_payload";
pub const PUTDOWN: &str = "putdown";

pub const PAY: &str = "pay";
pub const ROB: &str = "rob";

pub const DEFAULT_LINK_LEN: f64 = 6.0;

pub type Cell = (i32, i32);

/// Ordered endpoints of a payload.
pub type Pose = [Cell; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct ManipulationInstance {
    pub grid: i32,
    pub seed: u64,
    pub obstacles: BTreeSet<Cell>,
    pub bases: [Cell; 2],
    pub payloads: Vec<Pose>,
    pub goal: Vec<Pose>,
    pub link_len: f64,
}

/// Endpoint offsets of length-2 payloads, counter-clockwise from +x.
const RING: [Cell; 8] = [(2, 0), (2, 2), (0, 2), (-2, 2), (-2, 0), (-2, -2), (0, -2), (2, -2)];

const KING: [Cell; 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

pub fn is_bar(p: &Pose) -> bool {
    RING.contains(&(p[1].0 - p[0].0, p[1].1 - p[0].1))
}

pub fn midpoint(p: &Pose) -> Cell {
    ((p[0].0 + p[1].0) / 2, (p[0].1 + p[1].1) / 2)
}

/// Cells a payload covers: both endpoints and the midpoint.
pub fn cells(p: &Pose) -> [Cell; 3] {
    [p[0], midpoint(p), p[1]]
}

/// The eight translations and two 45-degree rotations about the midpoint.
pub fn moves(p: &Pose) -> Vec<Pose> {
    let mut out: Vec<Pose> = KING
        .iter()
        .map(|d| [(p[0].0 + d.0, p[0].1 + d.1), (p[1].0 + d.0, p[1].1 + d.1)])
        .collect();
    let off = (p[1].0 - p[0].0, p[1].1 - p[0].1);
    if let Some(k) = RING.iter().position(|&r| r == off) {
        let m = midpoint(p);
        for turn in [1, 7] {
            let r = RING[(k + turn) % 8];
            out.push([(m.0 - r.0 / 2, m.1 - r.1 / 2), (m.0 + r.0 / 2, m.1 + r.1 / 2)]);
        }
    }
    out
}

/// Every bar pose lying inside the grid, in both endpoint orders.
pub fn all_poses(grid: i32) -> Vec<Pose> {
    let mut out = Vec::new();
    for x in 0..grid {
        for y in 0..grid {
            for r in RING {
                let p = [(x, y), (x + r.0, y + r.1)];
                if in_grid(grid, p[1]) {
                    out.push(p);
                }
            }
        }
    }
    out
}

fn in_grid(grid: i32, (x, y): Cell) -> bool {
    (0..grid).contains(&x) && (0..grid).contains(&y)
}

fn center((x, y): Cell) -> Point {
    Point::new(x as f64 + 0.5, y as f64 + 0.5)
}

pub fn endpoint_at(obj: usize, k: usize, (x, y): Cell) -> Fluent {
    Fluent::new(ENDPOINT_AT, &[obj as i32, k as i32, x, y])
}

pub fn carried(obj: usize) -> Fluent {
    Fluent::new(CARRIED, &[obj as i32])
}

pub fn free() -> Fluent {
    Fluent::new(FREE, &[])
}

pub fn pickup(obj: usize) -> ActionInstance {
    ActionInstance::new(PICKUP, &[obj as i32])
}

pub fn putdown(obj: usize) -> ActionInstance {
    ActionInstance::new(PUTDOWN, &[obj as i32])
}

pub fn move_payload(obj: usize, p: &Pose) -> ActionInstance {
    ActionInstance::new(MOVE_PAYLOAD, &[obj as i32, p[0].0, p[0].1, p[1].0, p[1].1])
}

/// Current pose of every object, indexed by object.
pub fn poses(s: &State, n: usize) -> Vec<Option<Pose>> {
    let mut out = vec![[None, None]; n];
    for f in s.named(ENDPOINT_AT) {
        let (obj, k) = (f.args[0] as usize, f.args[1] as usize);
        if obj < n && k < 2 {
            out[obj][k] = Some((f.args[2], f.args[3]));
        }
    }
    out.into_iter()
        .map(|e| match e {
            [Some(a), Some(b)] => Some([a, b]),
            _ => None,
        })
        .collect()
}

fn action_pose(a: &ActionInstance) -> Pose {
    [(a.args[1], a.args[2]), (a.args[3], a.args[4])]
}

struct Pickup {
    n: usize,
}

impl ActionSchema for Pickup {
    fn name(&self) -> &'static str {
        PICKUP
    }
    fn groundings(&self) -> Vec<ActionInstance> {
        (0..self.n).map(pickup).collect()
    }
    fn precondition(&self, s: &State, _: &ActionInstance) -> bool {
        s.contains(&free())
    }
    fn effect(&self, _: &State, a: &ActionInstance) -> Effect {
        Effect {
            add: vec![carried(a.args[0] as usize)],
            del: vec![free()],
        }
    }
    fn concurrent_with(&self, _: &str) -> bool {
        false
    }
    fn conflicts(&self, _: &ActionInstance, _: &ActionInstance) -> bool {
        true
    }
}

struct Putdown {
    n: usize,
}

impl ActionSchema for Putdown {
    fn name(&self) -> &'static str {
        PUTDOWN
    }
    fn groundings(&self) -> Vec<ActionInstance> {
        (0..self.n).map(putdown).collect()
    }
    fn precondition(&self, s: &State, a: &ActionInstance) -> bool {
        s.contains(&carried(a.args[0] as usize))
    }
    fn effect(&self, _: &State, a: &ActionInstance) -> Effect {
        Effect {
            add: vec![free()],
            del: vec![carried(a.args[0] as usize)],
        }
    }
    fn concurrent_with(&self, _: &str) -> bool {
        false
    }
    fn conflicts(&self, _: &ActionInstance, _: &ActionInstance) -> bool {
        true
    }
}

struct MovePayload {
    grid: i32,
    n: usize,
}

impl MovePayload {
    fn target_ok(&self, s: &State, obj: usize, to: &Pose) -> bool {
        let all = poses(s, self.n);
        let Some(cur) = all[obj] else { return false };
        if !is_bar(to) || !moves(&cur).contains(to) || !cells(to).iter().all(|&c| in_grid(self.grid, c)) {
            return false;
        }
        let mine = cells(to);
        all.iter()
            .enumerate()
            .filter(|&(o, _)| o != obj)
            .filter_map(|(_, p)| p.as_ref())
            .all(|p| cells(p).iter().all(|c| !mine.contains(c)))
    }
}

impl ActionSchema for MovePayload {
    fn name(&self) -> &'static str {
        MOVE_PAYLOAD
    }
    fn groundings(&self) -> Vec<ActionInstance> {
        let poses = all_poses(self.grid);
        (0..self.n)
            .flat_map(|obj| poses.iter().map(move |p| move_payload(obj, p)))
            .collect()
    }
    fn precondition(&self, s: &State, a: &ActionInstance) -> bool {
        let obj = a.args[0] as usize;
        obj < self.n && s.contains(&carried(obj)) && self.target_ok(s, obj, &action_pose(a))
    }
    fn effect(&self, s: &State, a: &ActionInstance) -> Effect {
        let obj = a.args[0] as usize;
        let to = action_pose(a);
        let del = match poses(s, self.n)[obj] {
            Some(cur) => vec![endpoint_at(obj, 0, cur[0]), endpoint_at(obj, 1, cur[1])],
            None => Vec::new(),
        };
        Effect {
            add: vec![endpoint_at(obj, 0, to[0]), endpoint_at(obj, 1, to[1])],
            del,
        }
    }
    fn candidates(&self, s: &State) -> Vec<ActionInstance> {
        let all = poses(s, self.n);
        let mut out = Vec::new();
        for f in s.named(CARRIED) {
            let obj = f.args[0] as usize;
            if let Some(Some(cur)) = all.get(obj) {
                for to in moves(cur) {
                    if self.target_ok(s, obj, &to) {
                        out.push(move_payload(obj, &to));
                    }
                }
            }
        }
        out
    }
    fn concurrent_with(&self, _: &str) -> bool {
        false
    }
    fn conflicts(&self, _: &ActionInstance, _: &ActionInstance) -> bool {
        true
    }
}

fn pose_key(module: &'static str, p: &Pose) -> CheckKey {
    CheckKey::new(module, &[p[0].0, p[0].1, p[1].0, p[1].1])
}

fn decode(key: &CheckKey) -> Result<Pose, CheckError> {
    match key.values.as_slice() {
        &[a, b, c, d] => Ok([(a, b), (c, d)]),
        _ => Err(CheckError::unavailable(key, "malformed pose key")),
    }
}

/// Payload clear of obstacles at the pose reached by a move.
/// Key: `x1, y1, x2, y2`.
pub struct PayloadCheck {
    pub grid: i32,
    pub objects: usize,
    pub obstacles: Vec<(i64, i64)>,
}

impl PayloadCheck {
    pub fn pose_clear(&self, p: &Pose) -> bool {
        let seg = (center(p[0]), center(p[1]));
        l_pay(seg, seg, &self.obstacles, 0)
    }
}

impl CheckModule for PayloadCheck {
    fn id(&self) -> &'static str {
        PAY
    }
    fn extract_keys(&self, t: &Transition<'_>) -> Vec<CheckKey> {
        t.step
            .iter()
            .filter(|a| a.name == MOVE_PAYLOAD)
            .map(|a| pose_key(PAY, &action_pose(a)))
            .collect()
    }
    fn evaluate(&self, key: &CheckKey) -> Result<bool, CheckError> {
        Ok(self.pose_clear(&decode(key)?))
    }
    fn input_space(&self) -> Option<Box<dyn Iterator<Item = CheckKey> + Send + '_>> {
        Some(grid4(self.grid, PAY))
    }
    fn constraints_for(&self, key: &CheckKey) -> Vec<Constraint> {
        let Ok(p) = decode(key) else { return Vec::new() };
        (0..self.objects)
            .map(|o| Constraint::new(Vec::new(), vec![move_payload(o, &p)]))
            .collect()
    }
}

/// Both arms can hold the payload at its endpoints without their links
/// touching. Checked when grasping and after every move.
pub struct RobotCheck {
    pub grid: i32,
    pub objects: usize,
    pub bases: [Cell; 2],
    pub link_len: f64,
}

impl RobotCheck {
    pub fn reachable(&self, p: &Pose) -> bool {
        l_rob(center(p[0]), center(p[1]), center(self.bases[0]), center(self.bases[1]), self.link_len)
    }
}

impl CheckModule for RobotCheck {
    fn id(&self) -> &'static str {
        ROB
    }
    fn extract_keys(&self, t: &Transition<'_>) -> Vec<CheckKey> {
        let mut out = Vec::new();
        for a in t.step {
            match a.name {
                MOVE_PAYLOAD => out.push(pose_key(ROB, &action_pose(a))),
                PICKUP => {
                    if let Some(Some(p)) = poses(t.pre, self.objects).get(a.args[0] as usize) {
                        out.push(pose_key(ROB, p));
                    }
                }
                _ => {}
            }
        }
        out
    }
    fn evaluate(&self, key: &CheckKey) -> Result<bool, CheckError> {
        Ok(self.reachable(&decode(key)?))
    }
    fn input_space(&self) -> Option<Box<dyn Iterator<Item = CheckKey> + Send + '_>> {
        Some(grid4(self.grid, ROB))
    }
    fn constraints_for(&self, key: &CheckKey) -> Vec<Constraint> {
        let Ok(p) = decode(key) else { return Vec::new() };
        let mut out = Vec::new();
        for o in 0..self.objects {
            out.push(Constraint::new(Vec::new(), vec![move_payload(o, &p)]));
            out.push(Constraint::new(
                vec![endpoint_at(o, 0, p[0]), endpoint_at(o, 1, p[1])],
                vec![pickup(o)],
            ));
        }
        out
    }
}

impl ManipulationInstance {
    pub fn initial_state(&self) -> State {
        let mut fl = vec![free()];
        for (o, p) in self.payloads.iter().enumerate() {
            fl.push(endpoint_at(o, 0, p[0]));
            fl.push(endpoint_at(o, 1, p[1]));
        }
        State::new(fl)
    }

    fn payload_check(&self) -> PayloadCheck {
        PayloadCheck {
            grid: self.grid,
            objects: self.payloads.len(),
            obstacles: self.obstacles.iter().map(|&(x, y)| (x as i64, y as i64)).collect(),
        }
    }

    fn robot_check(&self) -> RobotCheck {
        RobotCheck {
            grid: self.grid,
            objects: self.payloads.len(),
            bases: self.bases,
            link_len: self.link_len,
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |m: String| Err(DomainError::InvalidInstance(m));
        if self.grid < 3 {
            return bad(format!("grid {} is too small", self.grid));
        }
        if self.payloads.is_empty() {
            return bad("no payloads".into());
        }
        if self.goal.len() != self.payloads.len() {
            return bad(format!("{} payloads but {} goal poses", self.payloads.len(), self.goal.len()));
        }
        if !(self.link_len > 0.0 && self.link_len.is_finite()) {
            return bad(format!("link length must be positive, got {}", self.link_len));
        }
        let pay = self.payload_check();
        let rob = self.robot_check();
        for (what, set) in [("payload", &self.payloads), ("goal", &self.goal)] {
            let mut used = BTreeSet::new();
            for (o, p) in set.iter().enumerate() {
                if !is_bar(p) {
                    return bad(format!("{what} {o} is not a length-2 bar: {p:?}"));
                }
                for c in cells(p) {
                    if !in_grid(self.grid, c) {
                        return bad(format!("{what} {o} leaves the grid at {c:?}"));
                    }
                    if !used.insert(c) {
                        return bad(format!("{what} {o} overlaps another payload at {c:?}"));
                    }
                }
                if !pay.pose_clear(p) {
                    return bad(format!("{what} {o} intersects an obstacle"));
                }
                if !rob.reachable(p) {
                    return bad(format!("{what} {o} cannot be held by both arms"));
                }
            }
        }
        Ok(())
    }
}

/// Builds the planning problem and its `pay`/`rob` check modules.
pub fn build_manipulation(inst: &ManipulationInstance) -> Result<HybridProblem, DomainError> {
    inst.validate()?;
    let n = inst.payloads.len();
    let target = inst.goal.clone();
    let goal = Arc::new(move |s: &State| {
        s.contains(&free())
            && target
                .iter()
                .enumerate()
                .all(|(o, p)| s.contains(&endpoint_at(o, 0, p[0])) && s.contains(&endpoint_at(o, 1, p[1])))
    });
    let schemas: Vec<Arc<dyn ActionSchema>> = vec![
        Arc::new(MovePayload { grid: inst.grid, n }),
        Arc::new(Pickup { n }),
        Arc::new(Putdown { n }),
    ];
    let problem = PlanningProblem::new(inst.initial_state(), goal, schemas, DEFAULT_HORIZON);
    Ok(HybridProblem {
        problem,
        modules: vec![Arc::new(inst.payload_check()), Arc::new(inst.robot_check())],
    })
}
