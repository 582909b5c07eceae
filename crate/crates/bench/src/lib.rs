//! Shared fixtures for the benchmarks.

use hybridplan::domains::{generate_suite, SuiteProfile};
use hybridplan::{DomainKind, Instance};

/// A few solvable desk-scale instances of `kind`, fixed by seed.
pub fn suite(kind: DomainKind, count: usize) -> Vec<(String, Instance)> {
    generate_suite(kind, count, 42, &SuiteProfile::small(kind))
        .expect("small profiles generate")
        .into_iter()
        .map(|g| (g.name, g.instance))
        .collect()
}

/// Horizon matching the profile the fixtures were generated with.
pub fn horizon(kind: DomainKind) -> usize {
    SuiteProfile::small(kind).horizon
}
