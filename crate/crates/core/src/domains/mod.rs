//! The two benchmark domains, their instance format and a seeded generator.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checks::{CheckError, CheckModule};
use crate::model::PlanningProblem;

pub mod generate;
pub mod io;
pub mod locomotion;
pub mod manipulation;

pub use generate::{generate_suite, GeneratedInstance, InstanceMeta, SuiteProfile};
pub use io::{parse_instance, print_instance};
pub use locomotion::{build_locomotion, Leg, LocomotionInstance};
pub use manipulation::{build_manipulation, ManipulationInstance, Pose};

/// Horizon cap given to built problems; strategies may override it.
pub const DEFAULT_HORIZON: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no valid solvable {kind} instance for index {index} after {attempts} attempts")]
    GenerationExhausted { kind: DomainKind, index: usize, attempts: usize },
    #[error(transparent)]
    Check(#[from] CheckError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Locomotion,
    Manipulation,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::Locomotion => "locomotion",
            DomainKind::Manipulation => "manipulation",
        })
    }
}

impl FromStr for DomainKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "locomotion" => Ok(DomainKind::Locomotion),
            "manipulation" => Ok(DomainKind::Manipulation),
            _ => Err(format!("unknown domain `{s}`")),
        }
    }
}

/// A planning problem together with the check modules that judge it.
#[derive(Clone)]
pub struct HybridProblem {
    pub problem: PlanningProblem,
    pub modules: Vec<Arc<dyn CheckModule>>,
}

impl HybridProblem {
    pub fn module(&self, id: &str) -> Option<&Arc<dyn CheckModule>> {
        self.modules.iter().find(|m| m.id() == id)
    }

    pub fn module_ids(&self) -> Vec<&'static str> {
        self.modules.iter().map(|m| m.id()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instance {
    Locomotion(LocomotionInstance),
    Manipulation(ManipulationInstance),
}

impl Instance {
    pub fn kind(&self) -> DomainKind {
        match self {
            Instance::Locomotion(_) => DomainKind::Locomotion,
            Instance::Manipulation(_) => DomainKind::Manipulation,
        }
    }

    pub fn grid(&self) -> i32 {
        match self {
            Instance::Locomotion(i) => i.grid,
            Instance::Manipulation(i) => i.grid,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Instance::Locomotion(i) => i.seed,
            Instance::Manipulation(i) => i.seed,
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        match self {
            Instance::Locomotion(i) => i.validate(),
            Instance::Manipulation(i) => i.validate(),
        }
    }

    pub fn build(&self) -> Result<HybridProblem, DomainError> {
        match self {
            Instance::Locomotion(i) => build_locomotion(i),
            Instance::Manipulation(i) => build_manipulation(i),
        }
    }
}
