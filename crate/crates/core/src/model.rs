//! Discrete planning model: fluents, states, grounded actions, schemas,
//! learned constraints and plan histories.
//!
//! Time is positional. Neither fluents nor actions carry a step index; the
//! step of a fluent is its position in a [`PlanHistory`]. This keeps check
//! keys and learned constraints valid at every step.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use smallvec::SmallVec;
use thiserror::Error;

pub type Args = SmallVec<[i32; 5]>;

/// A ground atom such as `cm_at(2,3)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Fluent {
    pub name: &'static str,
    pub args: Args,
}

impl Fluent {
    pub fn new(name: &'static str, args: &[i32]) -> Self {
        Fluent {
            name,
            args: SmallVec::from_slice(args),
        }
    }
}

impl fmt::Display for Fluent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_atom(f, self.name, &self.args)
    }
}

/// A grounded action such as `place(1,3,4)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ActionInstance {
    pub name: &'static str,
    pub args: Args,
}

impl ActionInstance {
    pub fn new(name: &'static str, args: &[i32]) -> Self {
        ActionInstance {
            name,
            args: SmallVec::from_slice(args),
        }
    }
}

impl fmt::Display for ActionInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_atom(f, self.name, &self.args)
    }
}

fn write_atom(f: &mut fmt::Formatter<'_>, name: &str, args: &[i32]) -> fmt::Result {
    write!(f, "{name}(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

/// The set of actions executed concurrently in one step, kept sorted.
pub type Step = Vec<ActionInstance>;

/// Sorts and deduplicates a step into canonical form.
pub fn canonical_step(mut actions: Vec<ActionInstance>) -> Step {
    actions.sort();
    actions.dedup();
    actions
}

/// A finite set of fluents, stored sorted for cheap hashing and lookup.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct State {
    fluents: Vec<Fluent>,
}

impl State {
    pub fn new(fluents: impl IntoIterator<Item = Fluent>) -> Self {
        let mut fluents: Vec<Fluent> = fluents.into_iter().collect();
        fluents.sort();
        fluents.dedup();
        State { fluents }
    }

    pub fn contains(&self, f: &Fluent) -> bool {
        self.fluents.binary_search(f).is_ok()
    }

    pub fn contains_all<'a>(&self, fs: impl IntoIterator<Item = &'a Fluent>) -> bool {
        fs.into_iter().all(|f| self.contains(f))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Fluent> {
        self.fluents.iter()
    }

    /// All fluents with the given name, in argument order.
    pub fn named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Fluent> + 'a {
        let start = self.fluents.partition_point(|f| f.name < name);
        self.fluents[start..].iter().take_while(move |f| f.name == name)
    }

    pub fn len(&self) -> usize {
        self.fluents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fluents.is_empty()
    }

    /// `(self \ del) ∪ add`.
    pub fn successor(&self, add: &[Fluent], del: &[Fluent]) -> State {
        let mut out: Vec<Fluent> = self
            .fluents
            .iter()
            .filter(|f| !del.contains(f))
            .cloned()
            .collect();
        out.extend(add.iter().cloned());
        out.sort();
        out.dedup();
        State { fluents: out }
    }

    pub fn without(&self, f: &Fluent) -> State {
        State {
            fluents: self.fluents.iter().filter(|g| *g != f).cloned().collect(),
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, fl) in self.fluents.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{fl}")?;
        }
        f.write_str("}")
    }
}

/// Add and delete lists produced by one action.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Effect {
    pub add: Vec<Fluent>,
    pub del: Vec<Fluent>,
}

impl Effect {
    /// True when one effect adds a fluent the other deletes.
    pub fn clashes_with(&self, other: &Effect) -> bool {
        self.add.iter().any(|f| other.del.contains(f)) || other.add.iter().any(|f| self.del.contains(f))
    }
}

/// A lifted action description.
///
/// `groundings` is the full, state-independent parameter domain. The planner
/// uses `candidates`, which a schema may override with a cheaper generator as
/// long as it returns exactly the applicable groundings.
pub trait ActionSchema: Send + Sync {
    fn name(&self) -> &'static str;

    fn groundings(&self) -> Vec<ActionInstance>;

    fn precondition(&self, state: &State, action: &ActionInstance) -> bool;

    /// Only called on states satisfying the precondition.
    fn effect(&self, state: &State, action: &ActionInstance) -> Effect;

    fn candidates(&self, state: &State) -> Vec<ActionInstance> {
        self.groundings()
            .into_iter()
            .filter(|a| self.precondition(state, a))
            .collect()
    }

    /// Whether actions of this schema may ever share a step with actions of
    /// the schema named `other`. Used to skip pairs cheaply.
    fn concurrent_with(&self, _other: &str) -> bool {
        true
    }

    /// Conflict rule for a pair where `mine` belongs to this schema.
    fn conflicts(&self, mine: &ActionInstance, other: &ActionInstance) -> bool;
}

pub type Goal = Arc<dyn Fn(&State) -> bool + Send + Sync>;

/// A learned nogood: the step whose action set equals `step` is forbidden
/// from any state containing every fluent of `context`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Constraint {
    pub context: Vec<Fluent>,
    pub step: Step,
}

impl Constraint {
    pub fn new(context: Vec<Fluent>, step: Vec<ActionInstance>) -> Self {
        let mut context = context;
        context.sort();
        context.dedup();
        Constraint {
            context,
            step: canonical_step(step),
        }
    }

    pub fn violated_by(&self, pre: &State, step: &[ActionInstance]) -> bool {
        self.step.as_slice() == step && pre.contains_all(&self.context)
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(":- ")?;
        for c in &self.context {
            write!(f, "{c}, ")?;
        }
        f.write_str("step{")?;
        for (i, a) in self.step.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

/// Deduplicated constraint list indexed by forbidden step.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSet {
    list: Vec<Constraint>,
    seen: HashSet<Constraint>,
    by_step: HashMap<Step, Vec<usize>>,
}

impl ConstraintSet {
    /// Returns false if the constraint was already present.
    pub fn insert(&mut self, c: Constraint) -> bool {
        if self.seen.contains(&c) {
            return false;
        }
        let idx = self.list.len();
        self.by_step.entry(c.step.clone()).or_default().push(idx);
        self.seen.insert(c.clone());
        self.list.push(c);
        true
    }

    pub fn blocks(&self, pre: &State, step: &[ActionInstance]) -> bool {
        match self.by_step.get(step) {
            Some(ids) => ids.iter().any(|&i| pre.contains_all(&self.list[i].context)),
            None => false,
        }
    }

    pub fn contains(&self, c: &Constraint) -> bool {
        self.seen.contains(c)
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.list.iter()
    }
}

/// A planning problem instance. With precomputed constraints it plays the
/// role of the augmented instance; with replanning constraints and plan
/// exclusions, the updated instance.
#[derive(Clone)]
pub struct PlanningProblem {
    pub initial: State,
    pub goal: Goal,
    pub schemas: Vec<Arc<dyn ActionSchema>>,
    pub constraints: ConstraintSet,
    /// Exact step sequences that may not be emitted again.
    pub exclusions: HashSet<Vec<Step>>,
    pub horizon_max: usize,
}

impl fmt::Debug for PlanningProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlanningProblem")
            .field("initial", &self.initial)
            .field("schemas", &self.schemas.iter().map(|s| s.name()).collect::<Vec<_>>())
            .field("constraints", &self.constraints.len())
            .field("exclusions", &self.exclusions.len())
            .field("horizon_max", &self.horizon_max)
            .finish()
    }
}

impl PlanningProblem {
    pub fn new(initial: State, goal: Goal, schemas: Vec<Arc<dyn ActionSchema>>, horizon_max: usize) -> Self {
        PlanningProblem {
            initial,
            goal,
            schemas,
            constraints: ConstraintSet::default(),
            exclusions: HashSet::new(),
            horizon_max,
        }
    }

    pub fn schema(&self, name: &str) -> Option<&Arc<dyn ActionSchema>> {
        self.schemas.iter().find(|s| s.name() == name)
    }

    pub fn is_goal(&self, state: &State) -> bool {
        (self.goal)(state)
    }

    /// Adds constraints, skipping duplicates. Returns the number added.
    pub fn extend_constraints(&mut self, constraints: impl IntoIterator<Item = Constraint>) -> usize {
        constraints.into_iter().filter(|c| self.constraints.insert(c.clone())).count()
    }

    pub fn exclude_plan(&mut self, steps: Vec<Step>) -> bool {
        self.exclusions.insert(steps)
    }

    pub fn is_excluded(&self, steps: &[Step]) -> bool {
        !self.exclusions.is_empty() && self.exclusions.contains(steps)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("precondition of {0} violated")]
    PreconditionViolated(ActionInstance),
    #[error("actions {0} and {1} conflict")]
    ConflictingPair(ActionInstance, ActionInstance),
    #[error("no schema named {0}")]
    UnknownAction(String),
}

/// Whether two distinct actions may not share a step, by either schema's
/// conflict rule or because one deletes what the other adds.
pub fn pair_conflicts(
    sa: &dyn ActionSchema,
    a: &ActionInstance,
    ea: &Effect,
    sb: &dyn ActionSchema,
    b: &ActionInstance,
    eb: &Effect,
) -> bool {
    !sa.concurrent_with(sb.name())
        || !sb.concurrent_with(sa.name())
        || sa.conflicts(a, b)
        || sb.conflicts(b, a)
        || ea.clashes_with(eb)
}

/// Applies a set of concurrent actions. Effects combine as the union of adds
/// minus the union of deletes.
pub fn apply(state: &State, actions: &[ActionInstance], schemas: &[Arc<dyn ActionSchema>]) -> Result<State, ModelError> {
    let mut effects = Vec::with_capacity(actions.len());
    let mut owners = Vec::with_capacity(actions.len());
    for a in actions {
        let schema = schemas
            .iter()
            .find(|s| s.name() == a.name)
            .ok_or_else(|| ModelError::UnknownAction(a.name.to_string()))?;
        if !schema.precondition(state, a) {
            return Err(ModelError::PreconditionViolated(a.clone()));
        }
        effects.push(schema.effect(state, a));
        owners.push(schema.as_ref());
    }
    for i in 0..actions.len() {
        for j in i + 1..actions.len() {
            if pair_conflicts(owners[i], &actions[i], &effects[i], owners[j], &actions[j], &effects[j]) {
                return Err(ModelError::ConflictingPair(actions[i].clone(), actions[j].clone()));
            }
        }
    }
    let add: Vec<Fluent> = effects.iter().flat_map(|e| e.add.iter().cloned()).collect();
    let del: Vec<Fluent> = effects.iter().flat_map(|e| e.del.iter().cloned()).collect();
    Ok(state.successor(&add, &del))
}

/// One transition `⟨S_i, A_i, S_{i+1}⟩` of a history.
#[derive(Clone, Copy, Debug)]
pub struct Transition<'a> {
    pub pre: &'a State,
    pub step: &'a [ActionInstance],
    pub post: &'a State,
}

/// The alternating state/step sequence realizing a plan.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct PlanHistory {
    pub states: Vec<State>,
    pub steps: Vec<Step>,
}

impl PlanHistory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn transitions(&self) -> impl Iterator<Item = Transition<'_>> {
        self.steps.iter().enumerate().map(move |(i, step)| Transition {
            pre: &self.states[i],
            step,
            post: &self.states[i + 1],
        })
    }

    pub fn action_count(&self) -> usize {
        self.steps.iter().map(Vec::len).sum()
    }
}

impl fmt::Display for PlanHistory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, step) in self.steps.iter().enumerate() {
            write!(f, "step {i}: {{")?;
            for (j, a) in step.iter().enumerate() {
                if j > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            writeln!(f, "}}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HistoryError {
    #[error("history has {states} states for {steps} steps")]
    Shape { states: usize, steps: usize },
    #[error("initial state differs from the problem's")]
    Initial,
    #[error("step {0}: {1}")]
    Step(usize, ModelError),
    #[error("step {0}: successor state does not match")]
    Transition(usize),
    #[error("step {0}: violates `{1}`")]
    Constraint(usize, Constraint),
    #[error("step {0} is not in canonical form")]
    NonCanonical(usize),
    #[error("final state does not satisfy the goal")]
    Goal,
}

/// Diagnostic form of [`validate_history`].
pub fn check_history(problem: &PlanningProblem, history: &PlanHistory) -> Result<(), HistoryError> {
    if history.states.len() != history.steps.len() + 1 {
        return Err(HistoryError::Shape {
            states: history.states.len(),
            steps: history.steps.len(),
        });
    }
    if history.states[0] != problem.initial {
        return Err(HistoryError::Initial);
    }
    for (i, t) in history.transitions().enumerate() {
        if canonical_step(t.step.to_vec()).as_slice() != t.step {
            return Err(HistoryError::NonCanonical(i));
        }
        let next = apply(t.pre, t.step, &problem.schemas).map_err(|e| HistoryError::Step(i, e))?;
        if &next != t.post {
            return Err(HistoryError::Transition(i));
        }
        if let Some(c) = problem.constraints.iter().find(|c| c.violated_by(t.pre, t.step)) {
            return Err(HistoryError::Constraint(i, c.clone()));
        }
    }
    if !problem.is_goal(history.states.last().expect("nonempty")) {
        return Err(HistoryError::Goal);
    }
    Ok(())
}

pub fn validate_history(problem: &PlanningProblem, history: &PlanHistory) -> bool {
    check_history(problem, history).is_ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("plan line {line}: {message}")]
pub struct PlanParseError {
    pub line: usize,
    pub message: String,
}

/// Reads steps in the format [`PlanHistory`] displays; action names must
/// belong to `schemas`.
pub fn parse_plan(text: &str, schemas: &[Arc<dyn ActionSchema>]) -> Result<Vec<Step>, PlanParseError> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| PlanParseError { line: i + 1, message };
        let body = line
            .split_once(':')
            .map(|(_, b)| b.trim())
            .and_then(|b| b.strip_prefix('{'))
            .and_then(|b| b.strip_suffix('}'))
            .ok_or_else(|| err(format!("expected `step N: {{...}}`, got `{line}`")))?;
        let mut step = Vec::new();
        let mut rest = body.trim();
        while !rest.is_empty() {
            let open = rest.find('(').ok_or_else(|| err(format!("malformed action in `{rest}`")))?;
            let close = rest.find(')').ok_or_else(|| err(format!("unclosed action in `{rest}`")))?;
            let name = rest[..open].trim();
            let schema = schemas
                .iter()
                .find(|s| s.name() == name)
                .ok_or_else(|| err(format!("unknown action `{name}`")))?;
            let inner = rest[open + 1..close].trim();
            let args = if inner.is_empty() {
                Vec::new()
            } else {
                inner
                    .split(',')
                    .map(|a| a.trim().parse::<i32>().map_err(|_| err(format!("bad argument `{a}`"))))
                    .collect::<Result<Vec<_>, _>>()?
            };
            step.push(ActionInstance::new(schema.name(), &args));
            rest = rest[close + 1..].trim_start().trim_start_matches(',').trim_start();
        }
        steps.push(canonical_step(step));
    }
    Ok(steps)
}

/// Executes `steps` from the initial state and checks the result.
pub fn replay(problem: &PlanningProblem, steps: &[Step]) -> Result<PlanHistory, HistoryError> {
    let mut states = vec![problem.initial.clone()];
    for (i, step) in steps.iter().enumerate() {
        let next = apply(states.last().expect("nonempty"), step, &problem.schemas).map_err(|e| HistoryError::Step(i, e))?;
        states.push(next);
    }
    let history = PlanHistory {
        states,
        steps: steps.to_vec(),
    };
    check_history(problem, &history)?;
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Move;
    impl ActionSchema for Move {
        fn name(&self) -> &'static str {
            "move"
        }
        fn groundings(&self) -> Vec<ActionInstance> {
            (0..3).map(|x| ActionInstance::new("move", &[x])).collect()
        }
        fn precondition(&self, s: &State, a: &ActionInstance) -> bool {
            s.named("at").any(|f| (f.args[0] - a.args[0]).abs() == 1)
        }
        fn effect(&self, s: &State, a: &ActionInstance) -> Effect {
            Effect {
                del: s.named("at").cloned().collect(),
                add: vec![Fluent::new("at", &[a.args[0]])],
            }
        }
        fn conflicts(&self, _: &ActionInstance, _: &ActionInstance) -> bool {
            true
        }
    }

    fn toy() -> PlanningProblem {
        PlanningProblem::new(
            State::new([Fluent::new("at", &[0])]),
            Arc::new(|s: &State| s.contains(&Fluent::new("at", &[1]))),
            vec![Arc::new(Move)],
            3,
        )
    }

    #[test]
    fn plan_text_round_trip() {
        let p = toy();
        let h = replay(&p, &[vec![ActionInstance::new("move", &[1])]]).unwrap();
        let text = h.to_string();
        assert_eq!(text, "step 0: {move(1)}\n");
        assert_eq!(parse_plan(&text, &p.schemas).unwrap(), h.steps);
        assert_eq!(parse_plan("step 0: {fly(1)}", &p.schemas).unwrap_err().line, 1);
        assert!(matches!(replay(&p, &[]), Err(HistoryError::Goal)));
    }

    #[test]
    fn empty_step_is_identity() {
        let p = toy();
        assert_eq!(apply(&p.initial, &[], &p.schemas).unwrap(), p.initial);
    }

    #[test]
    fn single_effect() {
        let p = toy();
        let s = apply(&p.initial, &[ActionInstance::new("move", &[1])], &p.schemas).unwrap();
        assert_eq!(s, State::new([Fluent::new("at", &[1])]));
    }

    #[test]
    fn precondition_and_clash_errors() {
        let p = toy();
        let err = apply(&p.initial, &[ActionInstance::new("move", &[2])], &p.schemas).unwrap_err();
        assert_eq!(err, ModelError::PreconditionViolated(ActionInstance::new("move", &[2])));
        let s = State::new([Fluent::new("at", &[1])]);
        let err = apply(
            &s,
            &[ActionInstance::new("move", &[0]), ActionInstance::new("move", &[2])],
            &p.schemas,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::ConflictingPair(..)));
    }

    #[test]
    fn constraint_set_dedups_and_blocks() {
        let mut cs = ConstraintSet::default();
        let c = Constraint::new(vec![Fluent::new("at", &[0])], vec![ActionInstance::new("move", &[1])]);
        assert!(cs.insert(c.clone()));
        assert!(!cs.insert(c.clone()));
        assert_eq!(cs.len(), 1);
        let p = toy();
        assert!(cs.blocks(&p.initial, &[ActionInstance::new("move", &[1])]));
        assert!(!cs.blocks(&State::default(), &[ActionInstance::new("move", &[1])]));
    }

    #[test]
    fn history_checks() {
        let p = toy();
        let step = vec![ActionInstance::new("move", &[1])];
        let post = apply(&p.initial, &step, &p.schemas).unwrap();
        let h = PlanHistory {
            states: vec![p.initial.clone(), post.clone()],
            steps: vec![step.clone()],
        };
        assert!(validate_history(&p, &h));
        let mut broken = h.clone();
        broken.states[1] = State::default();
        assert_eq!(check_history(&p, &broken), Err(HistoryError::Transition(0)));

        let mut constrained = p.clone();
        constrained.extend_constraints([Constraint::new(vec![], step)]);
        assert!(matches!(check_history(&constrained, &h), Err(HistoryError::Constraint(0, _))));
    }

    #[test]
    fn named_finds_range() {
        let s = State::new([Fluent::new("a", &[1]), Fluent::new("b", &[2]), Fluent::new("b", &[1]), Fluent::new("c", &[])]);
        let bs: Vec<_> = s.named("b").map(|f| f.args[0]).collect();
        assert_eq!(bs, vec![1, 2]);
        assert_eq!(s.named("z").count(), 0);
    }
}
