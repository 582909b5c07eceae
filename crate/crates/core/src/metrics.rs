//! Per-run reports and their aggregation.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checks::ModuleStats;
use crate::planner::{Mode, Status};

/// Column order of report CSV files.
pub const CSV_COLUMNS: [&str; 12] = [
    "instance",
    "domain",
    "strategy",
    "mode",
    "status",
    "wall_s",
    "lowlevel_s",
    "n_feas",
    "n_infeas",
    "checks_distinct",
    "checks_total",
    "restarts",
];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("report header mismatch: expected {expected}, found {found}")]
    Header { expected: String, found: String },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModuleBreakdown {
    pub distinct: u64,
    pub total: u64,
    pub failed_distinct: u64,
    pub preloaded: u64,
    pub time_s: f64,
    /// Candidates this module rejected as a filter.
    #[serde(default)]
    pub rejected: u64,
}

impl From<&ModuleStats> for ModuleBreakdown {
    fn from(s: &ModuleStats) -> Self {
        ModuleBreakdown {
            distinct: s.distinct,
            total: s.total,
            failed_distinct: s.failed_distinct,
            preloaded: s.preloaded,
            time_s: s.time.as_secs_f64(),
            rejected: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrecomputeStats {
    pub keys: u64,
    pub failing: u64,
    pub constraints: u64,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub instance: String,
    pub domain: String,
    pub strategy: String,
    pub mode: Mode,
    pub status: Status,
    pub wall_s: f64,
    pub lowlevel_s: f64,
    pub n_feas: u64,
    pub n_infeas: u64,
    pub checks_distinct: u64,
    pub checks_total: u64,
    pub restarts: u64,
    #[serde(default)]
    pub timeout_s: f64,
    #[serde(default)]
    pub constraints: u64,
    #[serde(default)]
    pub first_plan_len: Option<usize>,
    #[serde(default)]
    pub nodes: u64,
    #[serde(default)]
    pub modules: BTreeMap<String, ModuleBreakdown>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precompute: Option<PrecomputeStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_rss_kb: Option<u64>,
}

impl RunReport {
    pub fn new(strategy: impl Into<String>, mode: Mode, status: Status) -> Self {
        RunReport {
            instance: String::new(),
            domain: String::new(),
            strategy: strategy.into(),
            mode,
            status,
            wall_s: 0.0,
            lowlevel_s: 0.0,
            n_feas: 0,
            n_infeas: 0,
            checks_distinct: 0,
            checks_total: 0,
            restarts: 0,
            timeout_s: 0.0,
            constraints: 0,
            first_plan_len: None,
            nodes: 0,
            modules: BTreeMap::new(),
            precompute: None,
            peak_rss_kb: None,
        }
    }

    pub fn labelled(mut self, instance: impl Into<String>, domain: impl Into<String>) -> Self {
        self.instance = instance.into();
        self.domain = domain.into();
        self
    }

    /// Identity used when resuming a benchmark.
    pub fn run_key(&self) -> (String, String, Mode) {
        (self.instance.clone(), self.strategy.clone(), self.mode)
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    instance: String,
    domain: String,
    strategy: String,
    mode: Mode,
    status: Status,
    wall_s: f64,
    lowlevel_s: f64,
    n_feas: u64,
    n_infeas: u64,
    checks_distinct: u64,
    checks_total: u64,
    restarts: u64,
}

impl From<&RunReport> for CsvRow {
    fn from(r: &RunReport) -> Self {
        CsvRow {
            instance: r.instance.clone(),
            domain: r.domain.clone(),
            strategy: r.strategy.clone(),
            mode: r.mode,
            status: r.status,
            wall_s: r.wall_s,
            lowlevel_s: r.lowlevel_s,
            n_feas: r.n_feas,
            n_infeas: r.n_infeas,
            checks_distinct: r.checks_distinct,
            checks_total: r.checks_total,
            restarts: r.restarts,
        }
    }
}

impl From<CsvRow> for RunReport {
    fn from(c: CsvRow) -> Self {
        RunReport {
            instance: c.instance,
            domain: c.domain,
            wall_s: c.wall_s,
            lowlevel_s: c.lowlevel_s,
            n_feas: c.n_feas,
            n_infeas: c.n_infeas,
            checks_distinct: c.checks_distinct,
            checks_total: c.checks_total,
            restarts: c.restarts,
            ..RunReport::new(c.strategy, c.mode, c.status)
        }
    }
}

/// Writes reports as CSV. With `header` false the rows can be appended to
/// an existing file.
pub fn write_reports_csv<W: Write>(out: W, reports: &[RunReport], header: bool) -> Result<(), MetricsError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    if header {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in reports {
        w.serialize(CsvRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports_csv<R: Read>(input: R) -> Result<Vec<RunReport>, MetricsError> {
    let mut rd = csv::Reader::from_reader(input);
    let found: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if found != CSV_COLUMNS {
        return Err(MetricsError::Header {
            expected: CSV_COLUMNS.join(","),
            found: found.join(","),
        });
    }
    rd.deserialize::<CsvRow>()
        .map(|row| Ok(RunReport::from(row?)))
        .collect()
}

pub fn reports_to_json(reports: &[RunReport]) -> Result<String, MetricsError> {
    Ok(serde_json::to_string_pretty(reports)?)
}

pub fn reports_from_json(text: &str) -> Result<Vec<RunReport>, MetricsError> {
    Ok(serde_json::from_str(text)?)
}

/// Mean and maximum of one per-run quantity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub max: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Summary::default();
        }
        Summary {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub domain: String,
    pub strategy: String,
    pub mode: Mode,
    pub runs: usize,
    pub timeouts: usize,
    pub wall_s: Summary,
    pub lowlevel_s: Summary,
    pub n_feas: Summary,
    pub n_infeas: Summary,
    pub checks_distinct: Summary,
    pub checks_total: Summary,
    pub restarts: Summary,
}

/// Groups runs by domain, strategy and mode. A timed-out run counts as
/// taking the full time limit: its own `timeout_s` if recorded, else
/// `timeout_cap`, else its measured wall time.
pub fn aggregate(reports: &[RunReport], timeout_cap: Option<f64>) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, String, Mode), Vec<&RunReport>> = BTreeMap::new();
    for r in reports {
        groups
            .entry((r.domain.clone(), r.strategy.clone(), r.mode))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((domain, strategy, mode), rs)| {
            let col = |f: &dyn Fn(&RunReport) -> f64| Summary::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            let wall = |r: &RunReport| {
                if r.status == Status::Timeout {
                    let cap = if r.timeout_s > 0.0 { Some(r.timeout_s) } else { timeout_cap };
                    cap.map_or(r.wall_s, |c| c.max(r.wall_s))
                } else {
                    r.wall_s
                }
            };
            AggregateRow {
                runs: rs.len(),
                timeouts: rs.iter().filter(|r| r.status == Status::Timeout).count(),
                wall_s: col(&wall),
                lowlevel_s: col(&|r| r.lowlevel_s),
                n_feas: col(&|r| r.n_feas as f64),
                n_infeas: col(&|r| r.n_infeas as f64),
                checks_distinct: col(&|r| r.checks_distinct as f64),
                checks_total: col(&|r| r.checks_total as f64),
                restarts: col(&|r| r.restarts as f64),
                domain,
                strategy,
                mode,
            }
        })
        .collect()
}

pub fn write_aggregate_csv<W: Write>(out: W, rows: &[AggregateRow]) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    let fields = ["wall_s", "lowlevel_s", "n_feas", "n_infeas", "checks_distinct", "checks_total", "restarts"];
    let mut header = vec!["domain".to_string(), "strategy".into(), "mode".into(), "runs".into(), "timeouts".into()];
    for f in fields {
        header.push(format!("{f}_mean"));
        header.push(format!("{f}_max"));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.domain.clone(),
            r.strategy.clone(),
            r.mode.to_string(),
            r.runs.to_string(),
            r.timeouts.to_string(),
        ];
        for s in [r.wall_s, r.lowlevel_s, r.n_feas, r.n_infeas, r.checks_distinct, r.checks_total, r.restarts] {
            rec.push(s.mean.to_string());
            rec.push(s.max.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Peak resident set size of this process, from `/proc/self/status`.
pub fn peak_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse().ok())
}
