//! Four-legged robot on a grid: detach and place legs, shift the center of
//! mass. Balance (`bal`) and leg reachability (`leg`) are low-level checks.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::checks::{l_bal, l_leg, CheckError, CheckKey, CheckModule};
use crate::geometry::Point;
use crate::model::{ActionInstance, ActionSchema, Constraint, Effect, Fluent, PlanningProblem, State, Transition};

use super::{DomainError, HybridProblem, DEFAULT_HORIZON};

pub const LEGS: usize = 4;

pub const LEG_AT: &str = "leg_at";
pub const ATTACHED: &str = "attached";
pub const LIFTED: &str = "lifted";
pub const CM_AT: &str = "cm_at";

pub const DETACH: &str = "detach";
pub const PLACE: &str = "place";
pub const MOVE_CM: &str = "move_cm";

pub const BAL: &str = "bal";
pub const LEG: &str = "leg";

pub type Cell = (i32, i32);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Leg {
    pub pos: Cell,
    pub attached: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocomotionInstance {
    pub grid: i32,
    pub seed: u64,
    pub occupied: BTreeSet<Cell>,
    pub legs: [Leg; LEGS],
    pub cm: Cell,
    pub goal: Cell,
    pub reach: f64,
}

pub const DEFAULT_REACH: f64 = 2.5;

#[derive(Debug)]
struct Terrain {
    grid: i32,
    blocked: Vec<bool>,
}

impl Terrain {
    fn new(grid: i32, occupied: &BTreeSet<Cell>) -> Self {
        let mut blocked = vec![false; (grid * grid).max(0) as usize];
        for &(x, y) in occupied {
            if in_grid(grid, (x, y)) {
                blocked[(y * grid + x) as usize] = true;
            }
        }
        Terrain { grid, blocked }
    }

    fn free(&self, c: Cell) -> bool {
        in_grid(self.grid, c) && !self.blocked[(c.1 * self.grid + c.0) as usize]
    }
}

fn in_grid(grid: i32, (x, y): Cell) -> bool {
    (0..grid).contains(&x) && (0..grid).contains(&y)
}

fn ipt((x, y): Cell) -> Point<i64> {
    Point::new(x as i64, y as i64)
}

fn fpt((x, y): Cell) -> Point<f64> {
    Point::new(x as f64, y as f64)
}

pub fn leg_at(i: usize, (x, y): Cell) -> Fluent {
    Fluent::new(LEG_AT, &[i as i32, x, y])
}

pub fn attached(i: usize) -> Fluent {
    Fluent::new(ATTACHED, &[i as i32])
}

pub fn lifted(i: usize) -> Fluent {
    Fluent::new(LIFTED, &[i as i32])
}

pub fn cm_at((x, y): Cell) -> Fluent {
    Fluent::new(CM_AT, &[x, y])
}

pub fn detach(i: usize) -> ActionInstance {
    ActionInstance::new(DETACH, &[i as i32])
}

pub fn place(i: usize, (x, y): Cell) -> ActionInstance {
    ActionInstance::new(PLACE, &[i as i32, x, y])
}

pub fn move_cm((x, y): Cell) -> ActionInstance {
    ActionInstance::new(MOVE_CM, &[x, y])
}

/// Positions of all legs, indexed by leg.
fn leg_positions(s: &State) -> [Option<Cell>; LEGS] {
    let mut out = [None; LEGS];
    for f in s.named(LEG_AT) {
        if let Some(slot) = out.get_mut(f.args[0] as usize) {
            *slot = Some((f.args[1], f.args[2]));
        }
    }
    out
}

fn grounded(s: &State) -> Vec<(usize, Cell)> {
    let pos = leg_positions(s);
    s.named(ATTACHED)
        .filter_map(|f| {
            let i = f.args[0] as usize;
            pos.get(i).copied().flatten().map(|p| (i, p))
        })
        .collect()
}

fn cm(s: &State) -> Option<Cell> {
    s.named(CM_AT).next().map(|f| (f.args[0], f.args[1]))
}

struct Detach;

impl ActionSchema for Detach {
    fn name(&self) -> &'static str {
        DETACH
    }
    fn groundings(&self) -> Vec<ActionInstance> {
        (0..LEGS).map(detach).collect()
    }
    fn precondition(&self, s: &State, a: &ActionInstance) -> bool {
        s.contains(&attached(a.args[0] as usize)) && s.named(ATTACHED).count() >= 3
    }
    fn effect(&self, _: &State, a: &ActionInstance) -> Effect {
        let i = a.args[0] as usize;
        Effect {
            add: vec![lifted(i)],
            del: vec![attached(i)],
        }
    }
    fn concurrent_with(&self, other: &str) -> bool {
        other == MOVE_CM
    }
    fn conflicts(&self, _: &ActionInstance, _: &ActionInstance) -> bool {
        false
    }
}

struct Place {
    terrain: Arc<Terrain>,
}

impl Place {
    fn target_ok(&self, s: &State, leg: usize, c: Cell) -> bool {
        self.terrain.free(c) && !grounded(s).iter().any(|&(j, p)| j != leg && p == c)
    }
}

impl ActionSchema for Place {
    fn name(&self) -> &'static str {
        PLACE
    }
    fn groundings(&self) -> Vec<ActionInstance> {
        let g = self.terrain.grid;
        (0..LEGS)
            .flat_map(|i| (0..g).flat_map(move |x| (0..g).map(move |y| place(i, (x, y)))))
            .collect()
    }
    fn precondition(&self, s: &State, a: &ActionInstance) -> bool {
        let i = a.args[0] as usize;
        s.contains(&lifted(i)) && self.target_ok(s, i, (a.args[1], a.args[2]))
    }
    fn effect(&self, s: &State, a: &ActionInstance) -> Effect {
        let i = a.args[0] as usize;
        let mut del = vec![lifted(i)];
        if let Some(old) = leg_positions(s)[i] {
            del.push(leg_at(i, old));
        }
        Effect {
            add: vec![leg_at(i, (a.args[1], a.args[2])), attached(i)],
            del,
        }
    }
    fn candidates(&self, s: &State) -> Vec<ActionInstance> {
        let g = self.terrain.grid;
        let mut out = Vec::new();
        for f in s.named(LIFTED) {
            let i = f.args[0] as usize;
            for x in 0..g {
                for y in 0..g {
                    if self.target_ok(s, i, (x, y)) {
                        out.push(place(i, (x, y)));
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
        false
    }
}

struct MoveCm {
    terrain: Arc<Terrain>,
}

const NEIGHBORS: [Cell; 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];

impl ActionSchema for MoveCm {
    fn name(&self) -> &'static str {
        MOVE_CM
    }
    fn groundings(&self) -> Vec<ActionInstance> {
        let g = self.terrain.grid;
        (0..g).flat_map(|x| (0..g).map(move |y| move_cm((x, y)))).collect()
    }
    fn precondition(&self, s: &State, a: &ActionInstance) -> bool {
        let to = (a.args[0], a.args[1]);
        match cm(s) {
            Some(c) => (c.0 - to.0).abs() + (c.1 - to.1).abs() == 1 && self.terrain.free(to),
            None => false,
        }
    }
    fn effect(&self, s: &State, a: &ActionInstance) -> Effect {
        Effect {
            add: vec![cm_at((a.args[0], a.args[1]))],
            del: cm(s).map(cm_at).into_iter().collect(),
        }
    }
    fn candidates(&self, s: &State) -> Vec<ActionInstance> {
        let Some(c) = cm(s) else { return Vec::new() };
        NEIGHBORS
            .iter()
            .map(|d| (c.0 + d.0, c.1 + d.1))
            .filter(|&n| self.terrain.free(n))
            .map(move_cm)
            .collect()
    }
    fn concurrent_with(&self, other: &str) -> bool {
        other == DETACH
    }
    fn conflicts(&self, _: &ActionInstance, _: &ActionInstance) -> bool {
        false
    }
}

/// Balance of the post-transition configuration. Key: `cm_x, cm_y` followed
/// by the grounded leg positions sorted lexicographically.
pub struct BalanceCheck;

impl BalanceCheck {
    pub fn key(grounded: &[Cell], cm: Cell) -> CheckKey {
        let mut legs = grounded.to_vec();
        legs.sort();
        let mut v = vec![cm.0, cm.1];
        for (x, y) in legs {
            v.push(x);
            v.push(y);
        }
        CheckKey::new(BAL, &v)
    }

    fn decode(key: &CheckKey) -> Option<(Cell, Vec<Cell>)> {
        let v = &key.values;
        if v.len() < 2 || !v.len().is_multiple_of(2) {
            return None;
        }
        let legs = v[2..].chunks(2).map(|c| (c[0], c[1])).collect();
        Some(((v[0], v[1]), legs))
    }
}

/// Ordered selections of `m` distinct legs.
fn leg_assignments(m: usize) -> Vec<Vec<usize>> {
    fn rec(m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in 0..LEGS {
            if !cur.contains(&i) {
                cur.push(i);
                rec(m, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    if m <= LEGS {
        rec(m, &mut Vec::new(), &mut out);
    }
    out
}

impl CheckModule for BalanceCheck {
    fn id(&self) -> &'static str {
        BAL
    }

    fn extract_keys(&self, t: &Transition<'_>) -> Vec<CheckKey> {
        let legs: Vec<Cell> = grounded(t.post).into_iter().map(|(_, p)| p).collect();
        match cm(t.post) {
            Some(c) => vec![Self::key(&legs, c)],
            None => Vec::new(),
        }
    }

    fn evaluate(&self, key: &CheckKey) -> Result<bool, CheckError> {
        let (c, legs) = Self::decode(key).ok_or_else(|| CheckError::unavailable(key, "malformed balance key"))?;
        if legs.is_empty() {
            return Ok(false);
        }
        let pts: Vec<Point<i64>> = legs.into_iter().map(ipt).collect();
        Ok(l_bal(&pts, ipt(c)))
    }

    /// Every way a step can end in the keyed configuration: the grounded
    /// legs are pinned down by index, every other leg is lifted, and the
    /// step is one of move_cm, detach, detach+move_cm or place.
    fn constraints_for(&self, key: &CheckKey) -> Vec<Constraint> {
        let Some((c, legs)) = Self::decode(key) else { return Vec::new() };
        let mut out = Vec::new();
        for assign in leg_assignments(legs.len()) {
            let others: Vec<usize> = (0..LEGS).filter(|i| !assign.contains(i)).collect();
            let ground: Vec<Fluent> = assign
                .iter()
                .zip(&legs)
                .flat_map(|(&j, &p)| [leg_at(j, p), attached(j)])
                .collect();
            let lifted_except = |skip: Option<usize>| -> Vec<Fluent> {
                others.iter().filter(|&&o| Some(o) != skip).map(|&o| lifted(o)).collect()
            };

            let mut ctx = ground.clone();
            ctx.extend(lifted_except(None));
            out.push(Constraint::new(ctx, vec![move_cm(c)]));

            for &o in &others {
                let mut ctx = ground.clone();
                ctx.push(attached(o));
                ctx.extend(lifted_except(Some(o)));
                out.push(Constraint::new(ctx.clone(), vec![detach(o), move_cm(c)]));
                ctx.push(cm_at(c));
                out.push(Constraint::new(ctx, vec![detach(o)]));
            }

            for (k, &j) in assign.iter().enumerate() {
                let mut ctx: Vec<Fluent> = assign
                    .iter()
                    .zip(&legs)
                    .enumerate()
                    .filter(|&(idx, _)| idx != k)
                    .flat_map(|(_, (&jj, &p))| [leg_at(jj, p), attached(jj)])
                    .collect();
                ctx.push(lifted(j));
                ctx.extend(lifted_except(None));
                ctx.push(cm_at(c));
                out.push(Constraint::new(ctx, vec![place(j, legs[k])]));
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Reach of a newly placed leg from the CM. Key: `leg_x, leg_y, cm_x, cm_y`.
pub struct LegReachCheck {
    pub grid: i32,
    pub reach: f64,
}

impl CheckModule for LegReachCheck {
    fn id(&self) -> &'static str {
        LEG
    }

    fn extract_keys(&self, t: &Transition<'_>) -> Vec<CheckKey> {
        let Some(c) = cm(t.pre) else { return Vec::new() };
        t.step
            .iter()
            .filter(|a| a.name == PLACE)
            .map(|a| CheckKey::new(LEG, &[a.args[1], a.args[2], c.0, c.1]))
            .collect()
    }

    fn evaluate(&self, key: &CheckKey) -> Result<bool, CheckError> {
        let v = &key.values;
        if v.len() != 4 {
            return Err(CheckError::unavailable(key, "malformed reach key"));
        }
        Ok(l_leg(fpt((v[0], v[1])), fpt((v[2], v[3])), self.reach))
    }

    fn input_space(&self) -> Option<Box<dyn Iterator<Item = CheckKey> + Send + '_>> {
        Some(grid4(self.grid, LEG))
    }

    fn constraints_for(&self, key: &CheckKey) -> Vec<Constraint> {
        let v = &key.values;
        (0..LEGS)
            .map(|i| Constraint::new(vec![cm_at((v[2], v[3]))], vec![place(i, (v[0], v[1]))]))
            .collect()
    }
}

/// All `(a, b, c, d)` in `[0, g)^4`, lexicographically.
pub(crate) fn grid4(g: i32, module: &'static str) -> Box<dyn Iterator<Item = CheckKey> + Send> {
    Box::new((0..g).flat_map(move |a| {
        (0..g).flat_map(move |b| (0..g).flat_map(move |c| (0..g).map(move |d| CheckKey::new(module, &[a, b, c, d]))))
    }))
}

impl LocomotionInstance {
    pub fn initial_state(&self) -> State {
        let mut fl = vec![cm_at(self.cm)];
        for (i, leg) in self.legs.iter().enumerate() {
            fl.push(leg_at(i, leg.pos));
            fl.push(if leg.attached { attached(i) } else { lifted(i) });
        }
        State::new(fl)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |m: String| Err(DomainError::InvalidInstance(m));
        if self.grid < 2 {
            return bad(format!("grid {} is too small", self.grid));
        }
        if !(self.reach > 0.0 && self.reach.is_finite()) {
            return bad(format!("reach must be positive, got {}", self.reach));
        }
        let terrain = Terrain::new(self.grid, &self.occupied);
        for (i, leg) in self.legs.iter().enumerate() {
            if !terrain.free(leg.pos) {
                return bad(format!("leg {i} at {:?} is off-grid or on an occupied cell", leg.pos));
            }
        }
        for i in 0..LEGS {
            for j in i + 1..LEGS {
                if self.legs[i].attached && self.legs[j].attached && self.legs[i].pos == self.legs[j].pos {
                    return bad(format!("legs {i} and {j} share cell {:?}", self.legs[i].pos));
                }
            }
        }
        if !terrain.free(self.cm) {
            return bad(format!("center of mass at {:?} is off-grid or occupied", self.cm));
        }
        if !terrain.free(self.goal) {
            return bad(format!("goal cell {:?} is off-grid or occupied", self.goal));
        }
        let ground: Vec<Point<i64>> = self.legs.iter().filter(|l| l.attached).map(|l| ipt(l.pos)).collect();
        if ground.is_empty() || !l_bal(&ground, ipt(self.cm)) {
            return bad("initial configuration is not balanced".into());
        }
        for (i, leg) in self.legs.iter().enumerate() {
            if leg.attached && !l_leg(fpt(leg.pos), fpt(self.cm), self.reach) {
                return bad(format!("leg {i} is out of reach of the center of mass"));
            }
        }
        Ok(())
    }
}

/// Builds the planning problem and its `bal`/`leg` check modules.
pub fn build_locomotion(inst: &LocomotionInstance) -> Result<HybridProblem, DomainError> {
    inst.validate()?;
    let terrain = Arc::new(Terrain::new(inst.grid, &inst.occupied));
    let goal_cell = inst.goal;
    let reach = inst.reach;
    let goal = Arc::new(move |s: &State| {
        s.contains(&cm_at(goal_cell))
            && s.named(LIFTED).next().is_none()
            && s.named(LEG_AT).all(|f| l_leg(fpt((f.args[1], f.args[2])), fpt(goal_cell), reach))
    });
    let schemas: Vec<Arc<dyn ActionSchema>> = vec![
        Arc::new(Detach),
        Arc::new(MoveCm { terrain: terrain.clone() }),
        Arc::new(Place { terrain }),
    ];
    let problem = PlanningProblem::new(inst.initial_state(), goal, schemas, DEFAULT_HORIZON);
    Ok(HybridProblem {
        problem,
        modules: vec![
            Arc::new(BalanceCheck),
            Arc::new(LegReachCheck {
                grid: inst.grid,
                reach: inst.reach,
            }),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::apply;

    pub(crate) fn square(grid: i32, goal: Cell) -> LocomotionInstance {
        LocomotionInstance {
            grid,
            seed: 0,
            occupied: BTreeSet::new(),
            legs: [
                Leg { pos: (0, 0), attached: true },
                Leg { pos: (2, 0), attached: true },
                Leg { pos: (0, 2), attached: true },
                Leg { pos: (2, 2), attached: true },
            ],
            cm: (1, 1),
            goal,
            reach: DEFAULT_REACH,
        }
    }

    #[test]
    fn occupied_goal_is_invalid() {
        let mut inst = square(4, (1, 2));
        inst.occupied.insert((1, 2));
        assert!(matches!(build_locomotion(&inst), Err(DomainError::InvalidInstance(_))));
    }

    #[test]
    fn unbalanced_start_is_invalid() {
        let mut inst = square(4, (1, 2));
        inst.legs[1].attached = false;
        inst.legs[2].attached = false;
        // Remaining legs (0,0) and (2,2): CM (1,1) lies on that diagonal.
        assert!(build_locomotion(&inst).is_ok());
        inst.cm = (2, 1);
        assert!(matches!(build_locomotion(&inst), Err(DomainError::InvalidInstance(_))));
    }

    #[test]
    fn detach_with_move_applies_both_effects() {
        let hp = build_locomotion(&square(4, (1, 2))).unwrap();
        let s0 = &hp.problem.initial;
        let step = vec![detach(0), move_cm((1, 2))];
        let joint = apply(s0, &step, &hp.problem.schemas).unwrap();
        let ab = apply(&apply(s0, &step[..1], &hp.problem.schemas).unwrap(), &step[1..], &hp.problem.schemas).unwrap();
        let ba = apply(&apply(s0, &step[1..], &hp.problem.schemas).unwrap(), &step[..1], &hp.problem.schemas).unwrap();
        assert_eq!(joint, ab);
        assert_eq!(joint, ba);
        assert!(joint.contains(&lifted(0)) && joint.contains(&cm_at((1, 2))));
    }

    #[test]
    fn two_leg_actions_conflict() {
        let hp = build_locomotion(&square(4, (1, 2))).unwrap();
        let err = apply(&hp.problem.initial, &[detach(0), detach(1)], &hp.problem.schemas);
        assert!(err.is_err());
    }

    #[test]
    fn balance_key_is_permutation_invariant() {
        let a = BalanceCheck::key(&[(2, 0), (0, 0), (0, 2)], (1, 1));
        let b = BalanceCheck::key(&[(0, 2), (2, 0), (0, 0)], (1, 1));
        assert_eq!(a, b);
    }

    #[test]
    fn leg_input_space_size() {
        assert_eq!(LegReachCheck { grid: 10, reach: 2.5 }.input_space().unwrap().count(), 10_000);
        assert_eq!(LegReachCheck { grid: 2, reach: 2.5 }.input_space().unwrap().count(), 16);
        assert!(BalanceCheck.input_space().is_none());
    }

    #[test]
    fn candidates_match_filtered_groundings() {
        let hp = build_locomotion(&square(4, (3, 3))).unwrap();
        let s = apply(&hp.problem.initial, &[detach(1), move_cm((1, 2))], &hp.problem.schemas).unwrap();
        for schema in &hp.problem.schemas {
            let mut a = schema.candidates(&s);
            let mut b: Vec<_> = schema.groundings().into_iter().filter(|x| schema.precondition(&s, x)).collect();
            a.sort();
            b.sort();
            assert_eq!(a, b, "{}", schema.name());
        }
    }
}
