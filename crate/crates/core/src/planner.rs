//! Bounded-horizon plan enumeration.
//!
//! Iterative deepening over the horizon; at each node the conflict-free
//! action sets are generated in lexicographic order of their sorted
//! actions, so the plan stream is deterministic. Learned constraints prune
//! transitions, and an optional [`CheckHook`] is consulted before a
//! transition is expanded.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::checks::CheckError;
use crate::model::{pair_conflicts, ActionInstance, ActionSchema, Effect, PlanHistory, PlanningProblem, State, Step, Transition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    First,
    All,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::First => "first",
            Mode::All => "all",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first" => Ok(Mode::First),
            "all" => Ok(Mode::All),
            other => Err(format!("unknown mode `{other}` (expected first|all)")),
        }
    }
}

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    /// The requested enumeration completed.
    Exhausted,
    MaxPlans,
    Timeout,
    NoPlanExists,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Exhausted => "Exhausted",
            Status::MaxPlans => "MaxPlans",
            Status::Timeout => "Timeout",
            Status::NoPlanExists => "NoPlanExists",
        })
    }
}

impl FromStr for Status {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Exhausted" => Ok(Status::Exhausted),
            "MaxPlans" => Ok(Status::MaxPlans),
            "Timeout" => Ok(Status::Timeout),
            "NoPlanExists" => Ok(Status::NoPlanExists),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnumerationConfig {
    /// Overrides the problem's own horizon bound.
    pub horizon_max: Option<usize>,
    /// Cap on plans emitted by the enumerator.
    pub max_plans: usize,
    pub timeout: Duration,
    pub mode: Mode,
    /// Stop after the first horizon at which a plan was accepted.
    pub minimal_only: bool,
    /// Skip `(state, remaining steps)` pairs already known to reach no goal.
    pub memoize: bool,
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        EnumerationConfig {
            horizon_max: None,
            max_plans: 10_000,
            timeout: Duration::from_secs(7200),
            mode: Mode::First,
            minimal_only: true,
            memoize: true,
        }
    }
}

impl EnumerationConfig {
    pub fn all() -> Self {
        EnumerationConfig {
            mode: Mode::All,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Deadline {
    start: Instant,
    limit: Option<Instant>,
}

impl Deadline {
    pub fn after(timeout: Duration) -> Self {
        let start = Instant::now();
        Deadline {
            start,
            limit: start.checked_add(timeout),
        }
    }

    pub fn expired(&self) -> bool {
        self.limit.is_some_and(|l| Instant::now() >= l)
    }

    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }
}

/// In-search feasibility callback, consulted once per candidate transition.
pub trait CheckHook {
    fn check(&mut self, t: &Transition<'_>) -> Result<bool, CheckError>;
}

impl<F> CheckHook for F
where
    F: FnMut(&Transition<'_>) -> Result<bool, CheckError>,
{
    fn check(&mut self, t: &Transition<'_>) -> Result<bool, CheckError> {
        self(t)
    }
}

/// What the consumer of a candidate plan wants next.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Counts as a found plan for `first` mode and `minimal_only`.
    Accept,
    Reject,
    Stop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchEnd {
    Exhausted,
    Stopped,
    MaxPlans,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchOutcome {
    pub end: SearchEnd,
    pub emitted: usize,
    pub accepted: usize,
    pub nodes: u64,
    pub first_accepted_len: Option<usize>,
}

const MEMO_LIMIT: usize = 4_000_000;

enum Flow {
    Continue,
    Halt(SearchEnd),
}

struct Applicable {
    schema: usize,
    action: ActionInstance,
    effect: Effect,
}

struct Search<'a, 'h, 'v> {
    problem: &'a PlanningProblem,
    config: &'a EnumerationConfig,
    hook: Option<&'a mut (dyn CheckHook + 'h)>,
    deadline: &'a Deadline,
    visit: &'a mut (dyn FnMut(&PlanHistory) -> Verdict + 'v),
    concurrent: Vec<Vec<bool>>,
    states: Vec<State>,
    steps: Vec<Step>,
    dead: HashSet<(State, usize)>,
    emitted: usize,
    accepted: usize,
    nodes: u64,
    accepted_this_horizon: bool,
    first_accepted_len: Option<usize>,
}

/// Enumerates candidate plans, handing each to `visit`.
pub fn search<'h, 'v>(
    problem: &PlanningProblem,
    config: &EnumerationConfig,
    hook: Option<&mut (dyn CheckHook + 'h)>,
    deadline: &Deadline,
    visit: &mut (dyn FnMut(&PlanHistory) -> Verdict + 'v),
) -> Result<SearchOutcome, CheckError> {
    let schemas = &problem.schemas;
    let concurrent = schemas
        .iter()
        .map(|a| {
            schemas
                .iter()
                .map(|b| a.concurrent_with(b.name()) && b.concurrent_with(a.name()))
                .collect()
        })
        .collect();
    let mut s = Search {
        problem,
        config,
        hook,
        deadline,
        visit,
        concurrent,
        states: vec![problem.initial.clone()],
        steps: Vec::new(),
        dead: HashSet::new(),
        emitted: 0,
        accepted: 0,
        nodes: 0,
        accepted_this_horizon: false,
        first_accepted_len: None,
    };
    let horizon_max = config.horizon_max.unwrap_or(problem.horizon_max);
    let mut end = SearchEnd::Exhausted;
    if config.max_plans == 0 {
        end = SearchEnd::MaxPlans;
    } else {
        for horizon in 0..=horizon_max {
            s.accepted_this_horizon = false;
            if let (Flow::Halt(e), _) = s.dfs(horizon)? {
                end = e;
                break;
            }
            if config.minimal_only && s.accepted_this_horizon {
                break;
            }
        }
    }
    Ok(SearchOutcome {
        end,
        emitted: s.emitted,
        accepted: s.accepted,
        nodes: s.nodes,
        first_accepted_len: s.first_accepted_len,
    })
}

impl Search<'_, '_, '_> {
    fn state(&self) -> &State {
        self.states.last().expect("path is never empty")
    }

    /// Returns the flow and whether any goal leaf was reached below.
    fn dfs(&mut self, remaining: usize) -> Result<(Flow, bool), CheckError> {
        self.nodes += 1;
        if self.nodes.is_multiple_of(256) && self.deadline.expired() {
            return Ok((Flow::Halt(SearchEnd::Timeout), false));
        }
        if remaining == 0 {
            return Ok(self.leaf());
        }
        let memo = self.config.memoize;
        if memo && self.dead.contains(&(self.state().clone(), remaining)) {
            return Ok((Flow::Continue, false));
        }

        let acts = self.applicable();
        let mut chosen = Vec::with_capacity(2);
        let (flow, reached) = self.expand(&acts, &mut chosen, 0, remaining)?;
        if memo && !reached && matches!(flow, Flow::Continue) && self.dead.len() < MEMO_LIMIT {
            let key = (self.state().clone(), remaining);
            self.dead.insert(key);
        }
        Ok((flow, reached))
    }

    fn leaf(&mut self) -> (Flow, bool) {
        if !self.problem.is_goal(self.state()) {
            return (Flow::Continue, false);
        }
        if self.problem.is_excluded(&self.steps) {
            return (Flow::Continue, true);
        }
        let history = PlanHistory {
            states: self.states.clone(),
            steps: self.steps.clone(),
        };
        self.emitted += 1;
        match (self.visit)(&history) {
            Verdict::Accept => {
                self.accepted += 1;
                self.accepted_this_horizon = true;
                self.first_accepted_len.get_or_insert(history.len());
                if self.config.mode == Mode::First {
                    return (Flow::Halt(SearchEnd::Stopped), true);
                }
            }
            Verdict::Reject => {}
            Verdict::Stop => return (Flow::Halt(SearchEnd::Stopped), true),
        }
        if self.emitted >= self.config.max_plans {
            return (Flow::Halt(SearchEnd::MaxPlans), true);
        }
        (Flow::Continue, true)
    }

    fn applicable(&self) -> Vec<Applicable> {
        let state = self.state();
        let mut acts: Vec<Applicable> = self
            .problem
            .schemas
            .iter()
            .enumerate()
            .flat_map(|(si, schema)| {
                schema.candidates(state).into_iter().map(move |action| Applicable {
                    schema: si,
                    effect: schema.effect(state, &action),
                    action,
                })
            })
            .collect();
        acts.sort_by(|a, b| a.action.cmp(&b.action));
        acts.dedup_by(|a, b| a.action == b.action);
        acts
    }

    fn compatible(&self, acts: &[Applicable], i: usize, j: usize) -> bool {
        let (a, b) = (&acts[i], &acts[j]);
        if !self.concurrent[a.schema][b.schema] {
            return false;
        }
        let sa: &dyn ActionSchema = self.problem.schemas[a.schema].as_ref();
        let sb: &dyn ActionSchema = self.problem.schemas[b.schema].as_ref();
        !pair_conflicts(sa, &a.action, &a.effect, sb, &b.action, &b.effect)
    }

    /// Visits every conflict-free extension of `chosen` using actions from
    /// `start` on, in lexicographic pre-order.
    fn expand(
        &mut self,
        acts: &[Applicable],
        chosen: &mut Vec<usize>,
        start: usize,
        remaining: usize,
    ) -> Result<(Flow, bool), CheckError> {
        let mut reached = false;
        for j in start..acts.len() {
            if !chosen.iter().all(|&c| self.compatible(acts, c, j)) {
                continue;
            }
            chosen.push(j);
            let (flow, r) = self.take_step(acts, chosen, remaining)?;
            reached |= r;
            if let Flow::Halt(e) = flow {
                chosen.pop();
                return Ok((Flow::Halt(e), reached));
            }
            let (flow, r) = self.expand(acts, chosen, j + 1, remaining)?;
            reached |= r;
            chosen.pop();
            if let Flow::Halt(e) = flow {
                return Ok((Flow::Halt(e), reached));
            }
        }
        Ok((Flow::Continue, reached))
    }

    fn take_step(&mut self, acts: &[Applicable], chosen: &[usize], remaining: usize) -> Result<(Flow, bool), CheckError> {
        let step: Step = chosen.iter().map(|&i| acts[i].action.clone()).collect();
        let pre = self.state();
        if self.problem.constraints.blocks(pre, &step) {
            return Ok((Flow::Continue, false));
        }
        let add: Vec<_> = chosen.iter().flat_map(|&i| acts[i].effect.add.iter().cloned()).collect();
        let del: Vec<_> = chosen.iter().flat_map(|&i| acts[i].effect.del.iter().cloned()).collect();
        let post = pre.successor(&add, &del);
        if let Some(hook) = self.hook.as_mut() {
            let t = Transition {
                pre: self.states.last().expect("path is never empty"),
                step: &step,
                post: &post,
            };
            if !hook.check(&t)? {
                return Ok((Flow::Continue, false));
            }
        }
        self.states.push(post);
        self.steps.push(step);
        let out = self.dfs(remaining - 1);
        self.states.pop();
        self.steps.pop();
        out
    }
}

/// A collected plan stream.
#[derive(Clone, Debug)]
pub struct Enumeration {
    pub plans: Vec<PlanHistory>,
    pub status: Status,
    pub nodes: u64,
}

/// Plain enumeration: every goal-reaching history is accepted.
pub fn enumerate_plans(
    problem: &PlanningProblem,
    config: &EnumerationConfig,
    hook: Option<&mut dyn CheckHook>,
) -> Result<Enumeration, CheckError> {
    let deadline = Deadline::after(config.timeout);
    let mut plans = Vec::new();
    let outcome = search(problem, config, hook, &deadline, &mut |h| {
        plans.push(h.clone());
        Verdict::Accept
    })?;
    let status = match outcome.end {
        SearchEnd::Timeout => Status::Timeout,
        SearchEnd::MaxPlans => Status::MaxPlans,
        SearchEnd::Stopped | SearchEnd::Exhausted if plans.is_empty() => Status::NoPlanExists,
        SearchEnd::Stopped | SearchEnd::Exhausted => Status::Exhausted,
    };
    Ok(Enumeration {
        plans,
        status,
        nodes: outcome.nodes,
    })
}

/// Returns `problem` extended with `constraints`, skipping duplicates.
pub fn add_constraints(mut problem: PlanningProblem, constraints: impl IntoIterator<Item = crate::model::Constraint>) -> PlanningProblem {
    problem.extend_constraints(constraints);
    problem
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Constraint, Fluent};
    use std::sync::Arc;

    /// Counter on a line: `inc` and `dec` by one within `0..=max`.
    struct Step1 {
        name: &'static str,
        delta: i32,
        max: i32,
    }
    impl ActionSchema for Step1 {
        fn name(&self) -> &'static str {
            self.name
        }
        fn groundings(&self) -> Vec<ActionInstance> {
            vec![ActionInstance::new(self.name, &[])]
        }
        fn precondition(&self, s: &State, _: &ActionInstance) -> bool {
            let v = s.named("at").next().unwrap().args[0] + self.delta;
            (0..=self.max).contains(&v)
        }
        fn effect(&self, s: &State, _: &ActionInstance) -> Effect {
            let cur = s.named("at").next().unwrap().clone();
            Effect {
                add: vec![Fluent::new("at", &[cur.args[0] + self.delta])],
                del: vec![cur],
            }
        }
        fn conflicts(&self, _: &ActionInstance, _: &ActionInstance) -> bool {
            true
        }
    }

    fn line(start: i32, goal: i32) -> PlanningProblem {
        PlanningProblem::new(
            State::new([Fluent::new("at", &[start])]),
            Arc::new(move |s: &State| s.contains(&Fluent::new("at", &[goal]))),
            vec![
                Arc::new(Step1 { name: "dec", delta: -1, max: 4 }),
                Arc::new(Step1 { name: "inc", delta: 1, max: 4 }),
            ],
            6,
        )
    }

    #[test]
    fn trivial_goal_gives_empty_plan() {
        let e = enumerate_plans(&line(2, 2), &EnumerationConfig::all(), None).unwrap();
        assert_eq!(e.plans.len(), 1);
        assert!(e.plans[0].is_empty());
        assert_eq!(e.status, Status::Exhausted);
    }

    #[test]
    fn minimal_only_versus_all_horizons() {
        let p = line(0, 2);
        let e = enumerate_plans(&p, &EnumerationConfig::all(), None).unwrap();
        assert!(e.plans.iter().all(|h| h.len() == 2));
        let cfg = EnumerationConfig {
            minimal_only: false,
            horizon_max: Some(4),
            ..EnumerationConfig::all()
        };
        let e = enumerate_plans(&p, &cfg, None).unwrap();
        let lens: HashSet<usize> = e.plans.iter().map(|h| h.len()).collect();
        assert_eq!(lens, HashSet::from([2, 4]));
    }

    #[test]
    fn unreachable_goal_reports_no_plan() {
        let e = enumerate_plans(&line(0, 9), &EnumerationConfig::all(), None).unwrap();
        assert_eq!(e.status, Status::NoPlanExists);
    }

    #[test]
    fn max_plans_caps_stream() {
        let cfg = EnumerationConfig {
            max_plans: 1,
            minimal_only: false,
            ..EnumerationConfig::all()
        };
        let e = enumerate_plans(&line(0, 2), &cfg, None).unwrap();
        assert_eq!(e.plans.len(), 1);
        assert_eq!(e.status, Status::MaxPlans);
    }

    #[test]
    fn constraints_prune_and_dedup() {
        let p = line(0, 1);
        let c = Constraint::new(vec![Fluent::new("at", &[0])], vec![ActionInstance::new("inc", &[])]);
        let before = p.constraints.len();
        let q = add_constraints(p, [c.clone(), c]);
        assert_eq!(q.constraints.len(), before + 1);
        let e = enumerate_plans(&q, &EnumerationConfig::all(), None).unwrap();
        assert_eq!(e.status, Status::NoPlanExists);
    }

    #[test]
    fn hook_rejects_transitions() {
        let p = line(2, 2);
        let cfg = EnumerationConfig {
            minimal_only: false,
            horizon_max: Some(2),
            ..EnumerationConfig::all()
        };
        let mut no_four = |t: &Transition<'_>| Ok(!t.post.contains(&Fluent::new("at", &[4])));
        let with: Vec<_> = enumerate_plans(&p, &cfg, Some(&mut no_four)).unwrap().plans;
        let without = enumerate_plans(&p, &cfg, None).unwrap().plans;
        let filtered: Vec<_> = without
            .into_iter()
            .filter(|h| !h.states.iter().any(|s| s.contains(&Fluent::new("at", &[4]))))
            .collect();
        assert_eq!(with, filtered);
    }

    #[test]
    fn memo_does_not_change_streams() {
        for mode in [Mode::First, Mode::All] {
            for (s, g) in [(0, 4), (2, 0), (1, 3)] {
                let p = line(s, g);
                let on = EnumerationConfig { mode, ..Default::default() };
                let off = EnumerationConfig { memoize: false, ..on.clone() };
                let a = enumerate_plans(&p, &on, None).unwrap().plans;
                let b = enumerate_plans(&p, &off, None).unwrap().plans;
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn zero_timeout_stops() {
        let cfg = EnumerationConfig {
            timeout: Duration::ZERO,
            memoize: false,
            minimal_only: false,
            horizon_max: Some(30),
            ..EnumerationConfig::all()
        };
        let e = enumerate_plans(&line(0, 9), &cfg, None).unwrap();
        assert_eq!(e.status, Status::Timeout);
    }
}
