//! Hybrid task planning: a discrete planner coupled to low-level geometric
//! feasibility checks, with four ways of integrating the two.

pub mod checks;
pub mod domains;
pub mod geometry;
pub mod metrics;
pub mod model;
pub mod planner;
pub mod strategies;

pub use checks::{CheckCache, CheckError, CheckKey, CheckModule, CheckResult};
pub use domains::{DomainError, DomainKind, HybridProblem, Instance};
pub use model::{ActionInstance, Constraint, Fluent, PlanHistory, PlanningProblem, State, Step};
pub use planner::{enumerate_plans, EnumerationConfig, Mode, Status};
pub use metrics::RunReport;
pub use strategies::{run, Role, RunOutcome, StrategySpec};
