//! Low-level feasibility checks, the uniform module interface the
//! strategies drive, and the counting cache in front of it.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Serialize;
use smallvec::SmallVec;
use thiserror::Error;

use crate::geometry::{convex_hull, point_in_hull, segment_intersects_cell, segments_intersect, Point};
use crate::model::{Constraint, Transition};

/// Static balance: the CM lies in the support polygon of the grounded legs.
pub fn l_bal(grounded: &[Point<i64>], cm: Point<i64>) -> bool {
    match convex_hull(grounded) {
        Ok(hull) => point_in_hull(cm, &hull),
        Err(_) => false,
    }
}

/// Leg reachability: the foothold is at most `reach` from the CM.
pub fn l_leg(leg: Point<f64>, cm: Point<f64>, reach: f64) -> bool {
    let dx = leg.x - cm.x;
    let dy = leg.y - cm.y;
    dx * dx + dy * dy <= reach * reach
}

/// Payload against obstacle cells, swept linearly from `from` to `to`
/// through `k` intermediate poses plus both end poses.
pub fn l_pay(from: (Point, Point), to: (Point, Point), obstacles: &[(i64, i64)], k: usize) -> bool {
    let poses = k + 2;
    (0..poses).all(|j| {
        let t = j as f64 / (poses - 1) as f64;
        let a = from.0.lerp(to.0, t);
        let b = from.1.lerp(to.1, t);
        obstacles.iter().all(|&c| !segment_intersects_cell(a, b, c))
    })
}

/// Elbow position of a planar arm with two links of length `link_len`, or
/// `None` if `grip` is out of reach. Always the counter-clockwise (elbow-up)
/// branch.
pub fn two_link_elbow(base: Point, grip: Point, link_len: f64) -> Option<Point> {
    let d = base.distance(grip);
    if d > 2.0 * link_len {
        return None;
    }
    let heading = (grip.y - base.y).atan2(grip.x - base.x);
    // Law of cosines with equal links: cos(alpha) = d / 2L.
    let alpha = (d / (2.0 * link_len)).clamp(-1.0, 1.0).acos();
    let theta = heading + alpha;
    Some(Point::new(base.x + link_len * theta.cos(), base.y + link_len * theta.sin()))
}

/// Both arms reach their grips and no link of one arm touches a link of
/// the other.
pub fn l_rob(grip1: Point, grip2: Point, base1: Point, base2: Point, link_len: f64) -> bool {
    let (Some(e1), Some(e2)) = (two_link_elbow(base1, grip1, link_len), two_link_elbow(base2, grip2, link_len)) else {
        return false;
    };
    let arm1 = [(base1, e1), (e1, grip1)];
    let arm2 = [(base2, e2), (e2, grip2)];
    arm1.iter()
        .all(|&(a, b)| arm2.iter().all(|&(c, d)| !segments_intersect(a, b, c, d)))
}

pub type KeyValues = SmallVec<[i32; 10]>;

/// Canonical encoding of exactly the inputs one check reads.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CheckKey {
    pub module: &'static str,
    pub values: KeyValues,
}

impl CheckKey {
    pub fn new(module: &'static str, values: &[i32]) -> Self {
        CheckKey {
            module,
            values: SmallVec::from_slice(values),
        }
    }
}

impl fmt::Display for CheckKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.module)?;
        for v in &self.values {
            write!(f, ",{v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckResult {
    pub feasible: bool,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("check module {module} could not evaluate {key}: {reason}")]
    CheckUnavailable { module: String, key: String, reason: String },
    #[error("module {0} has no finite input space; precomputation unsupported")]
    PrecomputationUnsupported(String),
}

impl CheckError {
    pub fn unavailable(key: &CheckKey, reason: impl Into<String>) -> Self {
        CheckError::CheckUnavailable {
            module: key.module.to_string(),
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

/// A low-level reasoning module.
///
/// `constraints_for` renders a failing key as nogoods. The domain guarantees
/// two things: every transition whose keys include a failing key violates
/// one of its constraints, and every transition violating one of them fails
/// some check. Replanning and precomputation rely on both directions.
pub trait CheckModule: Send + Sync {
    fn id(&self) -> &'static str;

    fn extract_keys(&self, t: &Transition<'_>) -> Vec<CheckKey>;

    fn evaluate(&self, key: &CheckKey) -> Result<bool, CheckError>;

    /// Every key this module can produce on the instance, if the space is
    /// small enough to enumerate.
    fn input_space(&self) -> Option<Box<dyn Iterator<Item = CheckKey> + Send + '_>> {
        None
    }

    fn constraints_for(&self, key: &CheckKey) -> Vec<Constraint>;
}

/// Keys of a precomputable module, or `PrecomputationUnsupported`.
pub fn enumerate_input_space(module: &dyn CheckModule) -> Result<Box<dyn Iterator<Item = CheckKey> + Send + '_>, CheckError> {
    module
        .input_space()
        .ok_or_else(|| CheckError::PrecomputationUnsupported(module.id().to_string()))
}

/// Per-module counters kept by the cache.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ModuleStats {
    pub distinct: u64,
    pub total: u64,
    pub failed_distinct: u64,
    pub preloaded: u64,
    #[serde(serialize_with = "ser_secs")]
    pub time: Duration,
}

fn ser_secs<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

impl ModuleStats {
    pub fn since(&self, before: &ModuleStats) -> ModuleStats {
        ModuleStats {
            distinct: self.distinct - before.distinct,
            total: self.total - before.total,
            failed_distinct: self.failed_distinct - before.failed_distinct,
            preloaded: self.preloaded - before.preloaded,
            time: self.time.saturating_sub(before.time),
        }
    }
}

#[derive(Default)]
struct CacheInner {
    verdicts: HashMap<CheckKey, bool>,
    stats: HashMap<&'static str, ModuleStats>,
}

/// Memo of check verdicts keyed by [`CheckKey`], with hit/miss accounting.
///
/// Thread-safe so precomputation can fan out; evaluation happens outside the
/// lock. A disabled cache evaluates every query and stores nothing.
pub struct CheckCache {
    enabled: bool,
    inner: Mutex<CacheInner>,
}

impl Default for CheckCache {
    fn default() -> Self {
        Self::new()
    }
}

impl CheckCache {
    pub fn new() -> Self {
        CheckCache {
            enabled: true,
            inner: Mutex::new(CacheInner::default()),
        }
    }

    pub fn disabled() -> Self {
        CheckCache {
            enabled: false,
            inner: Mutex::new(CacheInner::default()),
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn query(&self, module: &dyn CheckModule, key: &CheckKey) -> Result<CheckResult, CheckError> {
        if self.enabled {
            let mut inner = self.inner.lock().expect("cache poisoned");
            let hit = inner.verdicts.get(key).copied();
            inner.stats.entry(key.module).or_default().total += 1;
            if let Some(feasible) = hit {
                return Ok(CheckResult {
                    feasible,
                    elapsed: Duration::ZERO,
                });
            }
        }

        let start = Instant::now();
        let feasible = module.evaluate(key)?;
        let elapsed = start.elapsed();

        let mut inner = self.inner.lock().expect("cache poisoned");
        let fresh = !self.enabled || !inner.verdicts.contains_key(key);
        if self.enabled && fresh {
            inner.verdicts.insert(key.clone(), feasible);
        }
        let stats = inner.stats.entry(key.module).or_default();
        if !self.enabled {
            stats.total += 1;
        }
        stats.time += elapsed;
        if fresh {
            stats.distinct += 1;
            if !feasible {
                stats.failed_distinct += 1;
            }
        }
        Ok(CheckResult { feasible, elapsed })
    }

    /// Stores a verdict without counting it as an evaluation.
    pub fn preload(&self, key: CheckKey, feasible: bool) {
        if !self.enabled {
            return;
        }
        let mut inner = self.inner.lock().expect("cache poisoned");
        if inner.verdicts.insert(key.clone(), feasible).is_none() {
            inner.stats.entry(key.module).or_default().preloaded += 1;
        }
    }

    pub fn get(&self, key: &CheckKey) -> Option<bool> {
        self.inner.lock().expect("cache poisoned").verdicts.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache poisoned").verdicts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> HashMap<&'static str, ModuleStats> {
        self.inner.lock().expect("cache poisoned").stats.clone()
    }

    pub fn module_stats(&self, module: &str) -> ModuleStats {
        self.inner
            .lock()
            .expect("cache poisoned")
            .stats
            .get(module)
            .cloned()
            .unwrap_or_default()
    }

    /// All stored verdicts of one module, sorted by key.
    pub fn entries(&self, module: &str) -> Vec<(CheckKey, bool)> {
        let inner = self.inner.lock().expect("cache poisoned");
        let mut out: Vec<(CheckKey, bool)> = inner
            .verdicts
            .iter()
            .filter(|(k, _)| k.module == module)
            .map(|(k, &v)| (k.clone(), v))
            .collect();
        out.sort();
        out
    }
}

/// Serializes a check table, one `moduleid,key...,0|1` record per line.
pub fn write_table(entries: &[(CheckKey, bool)]) -> String {
    let mut sorted = entries.to_vec();
    sorted.sort();
    let mut out = String::with_capacity(sorted.len() * 16);
    for (k, v) in &sorted {
        out.push_str(&k.to_string());
        out.push_str(if *v { ",1\n" } else { ",0\n" });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("check table line {line}: {message}")]
pub struct TableError {
    pub line: usize,
    pub message: String,
}

/// Parses a check table. Module ids must be among `modules`.
pub fn read_table(text: &str, modules: &[&'static str]) -> Result<Vec<(CheckKey, bool)>, TableError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| TableError { line: i + 1, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(err("expected module id, key values and verdict".into()));
        }
        let module = modules
            .iter()
            .copied()
            .find(|m| *m == fields[0])
            .ok_or_else(|| err(format!("unknown module `{}`", fields[0])))?;
        let verdict = match *fields.last().unwrap() {
            "1" => true,
            "0" => false,
            other => return Err(err(format!("verdict must be 0 or 1, got `{other}`"))),
        };
        let values = fields[1..fields.len() - 1]
            .iter()
            .map(|v| v.parse::<i32>().map_err(|e| err(format!("bad key value `{v}`: {e}"))))
            .collect::<Result<KeyValues, _>>()?;
        out.push((CheckKey { module, values }, verdict));
    }
    Ok(out)
}
