//! The four ways of coupling check modules to the planner, and mixtures.
//!
//! Each module gets a [`Role`]:
//! * `Pre`: its whole input space is evaluated up front and failing keys
//!   become constraints before planning starts.
//! * `Int`: checked on every transition the planner expands.
//! * `Filt`: candidate plans are checked afterwards and rejected.
//! * `Repl`: candidate plans are checked afterwards; failures become
//!   constraints and planning restarts.
//! * `Off`: never consulted, so candidates are the raw stream.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checks::{enumerate_input_space, CheckCache, CheckError, CheckKey, CheckModule, ModuleStats};
use crate::domains::HybridProblem;
use crate::metrics::{peak_rss_kb, ModuleBreakdown, PrecomputeStats, RunReport};
use crate::model::{Constraint, PlanHistory, PlanningProblem, Step, Transition};
use crate::planner::{search, Deadline, EnumerationConfig, Mode, SearchEnd, Status, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Pre,
    Int,
    Filt,
    Repl,
    Off,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Pre => "pre",
            Role::Int => "int",
            Role::Filt => "filt",
            Role::Repl => "repl",
            Role::Off => "off",
        })
    }
}

impl FromStr for Role {
    type Err = StrategyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pre" => Ok(Role::Pre),
            "int" => Ok(Role::Int),
            "filt" => Ok(Role::Filt),
            "repl" => Ok(Role::Repl),
            "off" => Ok(Role::Off),
            other => Err(StrategyError::Parse(format!("unknown role `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("bad strategy: {0}")]
    Parse(String),
    #[error("no check module named `{0}`")]
    UnknownModule(String),
    #[error(transparent)]
    Check(#[from] CheckError),
}

/// A role per module, written as `pre`, `int`, `filt`, `repl`,
/// `batchrepl:K`, or `pre+X` (precompute where possible, `X` elsewhere),
/// optionally refined by per-module overrides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategySpec {
    pub default: Role,
    /// Role for modules without a finite input space when `default` is `Pre`.
    pub fallback: Option<Role>,
    pub overrides: BTreeMap<String, Role>,
    /// Replanning restarts after this many infeasible candidates.
    pub batch: usize,
}

impl StrategySpec {
    pub fn uniform(role: Role) -> Self {
        StrategySpec {
            default: role,
            fallback: None,
            overrides: BTreeMap::new(),
            batch: 1,
        }
    }

    pub fn batch_repl(k: usize) -> Self {
        StrategySpec {
            batch: k.max(1),
            ..Self::uniform(Role::Repl)
        }
    }

    pub fn pre_then(fallback: Role) -> Self {
        StrategySpec {
            fallback: Some(fallback),
            ..Self::uniform(Role::Pre)
        }
    }

    /// Applies `M=R,M=R` overrides.
    pub fn with_assignments(mut self, text: &str) -> Result<Self, StrategyError> {
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (m, r) = part
                .split_once('=')
                .ok_or_else(|| StrategyError::Parse(format!("assignment `{part}` is not module=role")))?;
            self.overrides.insert(m.trim().to_string(), r.trim().parse()?);
        }
        Ok(self)
    }

    /// Role of every module of `hp`, in module order.
    pub fn resolve(&self, hp: &HybridProblem) -> Result<Vec<Role>, StrategyError> {
        let ids = hp.module_ids();
        if let Some(unknown) = self.overrides.keys().find(|k| !ids.contains(&k.as_str())) {
            return Err(StrategyError::UnknownModule(unknown.clone()));
        }
        Ok(hp
            .modules
            .iter()
            .map(|m| {
                if let Some(&r) = self.overrides.get(m.id()) {
                    return r;
                }
                match (self.default, self.fallback) {
                    (Role::Pre, Some(fb)) if m.input_space().is_none() => fb,
                    (r, _) => r,
                }
            })
            .collect())
    }
}

impl FromStr for StrategySpec {
    type Err = StrategyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(k) = s.strip_prefix("batchrepl:") {
            let k: usize = k
                .parse()
                .map_err(|_| StrategyError::Parse(format!("batch size `{k}` is not a positive integer")))?;
            if k == 0 {
                return Err(StrategyError::Parse("batch size must be at least 1".into()));
            }
            return Ok(StrategySpec::batch_repl(k));
        }
        if let Some(rest) = s.strip_prefix("pre+") {
            let fb: Role = rest.parse()?;
            if fb == Role::Pre {
                return Err(StrategyError::Parse("`pre+pre` is not a strategy".into()));
            }
            return Ok(StrategySpec::pre_then(fb));
        }
        Ok(StrategySpec::uniform(s.parse()?))
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.default, self.fallback) {
            (Role::Repl, _) if self.batch > 1 => write!(f, "batchrepl:{}", self.batch)?,
            (Role::Pre, Some(fb)) => write!(f, "pre+{fb}")?,
            (r, _) => write!(f, "{r}")?,
        }
        if !self.overrides.is_empty() {
            let parts: Vec<String> = self.overrides.iter().map(|(m, r)| format!("{m}={r}")).collect();
            write!(f, "[{}]", parts.join(","))?;
        }
        Ok(())
    }
}

/// A restart of the planner after new constraints were learned.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RestartEvent {
    pub pass: usize,
    /// Infeasible candidates seen in the pass that triggered the restart.
    pub infeasible: usize,
    pub new_constraints: usize,
    pub elapsed_s: f64,
}

pub struct RunOutcome {
    pub plans: Vec<PlanHistory>,
    pub status: Status,
    pub report: RunReport,
    /// The problem as last planned: precomputed and learned constraints
    /// plus plan exclusions.
    pub problem: PlanningProblem,
    pub restarts: Vec<RestartEvent>,
}

fn failing_keys(cache: &CheckCache, module: &dyn CheckModule, history: &PlanHistory, all: bool) -> Result<Vec<CheckKey>, CheckError> {
    let mut failed = BTreeSet::new();
    for t in history.transitions() {
        for key in module.extract_keys(&t) {
            if !cache.query(module, &key)?.feasible {
                if !all {
                    return Ok(vec![key]);
                }
                failed.insert(key);
            }
        }
    }
    Ok(failed.into_iter().collect())
}

/// Evaluates a module's input space through `cache` and returns the
/// constraints for its failing keys.
pub fn precompute(cache: &CheckCache, module: &dyn CheckModule) -> Result<(Vec<Constraint>, PrecomputeStats), CheckError> {
    let start = Instant::now();
    let keys: Vec<CheckKey> = enumerate_input_space(module)?.collect();
    let verdicts: Result<Vec<(CheckKey, bool)>, CheckError> = keys
        .into_par_iter()
        .map(|k| cache.query(module, &k).map(|r| (k, r.feasible)))
        .collect();
    let verdicts = verdicts?;
    let failing: Vec<&CheckKey> = verdicts.iter().filter(|(_, ok)| !ok).map(|(k, _)| k).collect();
    let constraints: Vec<Constraint> = failing.iter().flat_map(|k| module.constraints_for(k)).collect();
    let stats = PrecomputeStats {
        keys: verdicts.len() as u64,
        failing: failing.len() as u64,
        constraints: constraints.len() as u64,
        elapsed_s: start.elapsed().as_secs_f64(),
    };
    Ok((constraints, stats))
}

/// Runs the planner with each module in the role `spec` gives it.
pub fn run(hp: &HybridProblem, spec: &StrategySpec, config: &EnumerationConfig, cache: &CheckCache) -> Result<RunOutcome, StrategyError> {
    let roles = spec.resolve(hp)?;
    let start = Instant::now();
    let deadline = Deadline::after(config.timeout);
    let before: HashMap<&'static str, ModuleStats> = cache.stats();
    let with_role = |r: Role| -> Vec<&Arc<dyn CheckModule>> {
        hp.modules.iter().zip(&roles).filter(|(_, &x)| x == r).map(|(m, _)| m).collect()
    };
    let (pre, int, filt, repl) = (with_role(Role::Pre), with_role(Role::Int), with_role(Role::Filt), with_role(Role::Repl));

    let mut problem = hp.problem.clone();
    let mut pre_stats: Option<PrecomputeStats> = None;
    for m in &pre {
        let (cs, st) = precompute(cache, m.as_ref())?;
        cs.into_iter().for_each(|c| {
            problem.constraints.insert(c);
        });
        let acc = pre_stats.get_or_insert_with(PrecomputeStats::default);
        acc.keys += st.keys;
        acc.failing += st.failing;
        acc.constraints += st.constraints;
        acc.elapsed_s += st.elapsed_s;
    }

    let mut hook = |t: &Transition<'_>| -> Result<bool, CheckError> {
        for m in &int {
            for key in m.extract_keys(t) {
                if !cache.query(m.as_ref(), &key)?.feasible {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    };

    let mut plans: Vec<PlanHistory> = Vec::new();
    let mut restarts: Vec<RestartEvent> = Vec::new();
    let mut emitted_total = 0usize;
    let mut n_infeas = 0u64;
    let mut rejected_by: BTreeMap<&'static str, u64> = BTreeMap::new();
    let mut nodes = 0u64;
    let mut horizon_cap = config.horizon_max.unwrap_or(problem.horizon_max);
    let mut status = None;
    if deadline.expired() {
        status = Some(Status::Timeout);
    }

    while status.is_none() {
        let remaining = config.max_plans.saturating_sub(emitted_total);
        if remaining == 0 {
            status = Some(Status::MaxPlans);
            break;
        }
        let pass_config = EnumerationConfig {
            horizon_max: Some(horizon_cap),
            max_plans: remaining,
            ..config.clone()
        };
        let mut pending: Vec<Constraint> = Vec::new();
        let mut exclusions: Vec<Vec<Step>> = Vec::new();
        let mut infeasible = 0usize;
        let mut restart_now = false;
        let mut error: Option<CheckError> = None;
        let mut first_len: Option<usize> = None;

        let mut visit = |h: &PlanHistory| -> Verdict {
            let mut verdict = || -> Result<Verdict, CheckError> {
                for m in &filt {
                    if !failing_keys(cache, m.as_ref(), h, false)?.is_empty() {
                        n_infeas += 1;
                        *rejected_by.entry(m.id()).or_default() += 1;
                        if !repl.is_empty() {
                            exclusions.push(h.steps.clone());
                        }
                        return Ok(Verdict::Reject);
                    }
                }
                let mut learned = Vec::new();
                for m in &repl {
                    for key in failing_keys(cache, m.as_ref(), h, true)? {
                        learned.extend(m.constraints_for(&key));
                    }
                }
                if !learned.is_empty() {
                    n_infeas += 1;
                    infeasible += 1;
                    pending.extend(learned);
                    if infeasible >= spec.batch {
                        restart_now = true;
                        return Ok(Verdict::Stop);
                    }
                    return Ok(Verdict::Reject);
                }
                plans.push(h.clone());
                exclusions.push(h.steps.clone());
                first_len.get_or_insert(h.len());
                Ok(Verdict::Accept)
            };
            match verdict() {
                Ok(v) => v,
                Err(e) => {
                    error = Some(e);
                    Verdict::Stop
                }
            }
        };

        let hook_ref: Option<&mut dyn crate::planner::CheckHook> = if int.is_empty() { None } else { Some(&mut hook) };
        let out = search(&problem, &pass_config, hook_ref, &deadline, &mut visit)?;
        if let Some(e) = error {
            return Err(e.into());
        }
        nodes += out.nodes;
        emitted_total += out.emitted;
        for ex in exclusions {
            problem.exclude_plan(ex);
        }
        if let (true, Some(len)) = (config.minimal_only, first_len) {
            horizon_cap = horizon_cap.min(len);
        }
        let new_constraints = problem.extend_constraints(pending);

        match out.end {
            SearchEnd::Timeout => status = Some(Status::Timeout),
            SearchEnd::Stopped if restart_now => {}
            SearchEnd::Stopped => status = Some(Status::Exhausted),
            SearchEnd::MaxPlans if new_constraints == 0 => status = Some(Status::MaxPlans),
            SearchEnd::Exhausted if new_constraints == 0 => status = Some(Status::Exhausted),
            SearchEnd::MaxPlans | SearchEnd::Exhausted => {}
        }
        if status.is_none() {
            restarts.push(RestartEvent {
                pass: restarts.len() + 1,
                infeasible,
                new_constraints,
                elapsed_s: start.elapsed().as_secs_f64(),
            });
        }
        if status == Some(Status::Exhausted) && plans.is_empty() {
            status = Some(Status::NoPlanExists);
        }
    }
    let status = status.expect("loop ends with a status");

    let after = cache.stats();
    let mut report = RunReport::new(spec.to_string(), config.mode, status);
    for m in &hp.modules {
        let id = m.id();
        let d = after
            .get(id)
            .cloned()
            .unwrap_or_default()
            .since(&before.get(id).cloned().unwrap_or_default());
        report.lowlevel_s += d.time.as_secs_f64();
        report.checks_distinct += d.distinct;
        report.checks_total += d.total;
        let mut breakdown = ModuleBreakdown::from(&d);
        breakdown.rejected = rejected_by.get(id).copied().unwrap_or(0);
        report.modules.insert(id.to_string(), breakdown);
    }
    report.wall_s = start.elapsed().as_secs_f64();
    report.n_feas = plans.len() as u64;
    report.n_infeas = n_infeas;
    report.restarts = restarts.len() as u64;
    report.timeout_s = config.timeout.as_secs_f64();
    report.constraints = problem.constraints.len() as u64;
    report.first_plan_len = plans.first().map(PlanHistory::len);
    report.nodes = nodes;
    report.precompute = pre_stats;
    report.peak_rss_kb = peak_rss_kb();

    Ok(RunOutcome {
        plans,
        status,
        report,
        problem,
        restarts,
    })
}

pub fn run_pre(hp: &HybridProblem, config: &EnumerationConfig, cache: &CheckCache) -> Result<RunOutcome, StrategyError> {
    run(hp, &StrategySpec::uniform(Role::Pre), config, cache)
}

pub fn run_int(hp: &HybridProblem, config: &EnumerationConfig, cache: &CheckCache) -> Result<RunOutcome, StrategyError> {
    run(hp, &StrategySpec::uniform(Role::Int), config, cache)
}

pub fn run_filt(hp: &HybridProblem, config: &EnumerationConfig, cache: &CheckCache) -> Result<RunOutcome, StrategyError> {
    run(hp, &StrategySpec::uniform(Role::Filt), config, cache)
}

pub fn run_repl(hp: &HybridProblem, config: &EnumerationConfig, cache: &CheckCache) -> Result<RunOutcome, StrategyError> {
    run(hp, &StrategySpec::uniform(Role::Repl), config, cache)
}

pub fn run_batch_repl(hp: &HybridProblem, k: usize, config: &EnumerationConfig, cache: &CheckCache) -> Result<RunOutcome, StrategyError> {
    run(hp, &StrategySpec::batch_repl(k), config, cache)
}

/// Default limits for one benchmark run.
pub fn default_config(mode: Mode, timeout: Duration) -> EnumerationConfig {
    EnumerationConfig {
        mode,
        timeout,
        ..EnumerationConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        for s in ["pre", "int", "filt", "repl", "off", "batchrepl:5", "pre+int", "pre+repl"] {
            assert_eq!(s.parse::<StrategySpec>().unwrap().to_string(), s);
        }
        assert_eq!("batchrepl:1".parse::<StrategySpec>().unwrap().to_string(), "repl");
        assert!("batchrepl:0".parse::<StrategySpec>().is_err());
        assert!("pre+pre".parse::<StrategySpec>().is_err());
        assert!("fast".parse::<StrategySpec>().is_err());
        let s = "int".parse::<StrategySpec>().unwrap().with_assignments("leg=pre, bal=repl").unwrap();
        assert_eq!(s.to_string(), "int[bal=repl,leg=pre]");
        assert!(StrategySpec::uniform(Role::Int).with_assignments("leg").is_err());
    }
}
