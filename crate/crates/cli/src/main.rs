use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hybridplan::checks::{read_table, write_table, CheckCache};
use hybridplan::domains::{generate_suite, parse_instance, print_instance, DomainKind, HybridProblem, Instance, SuiteProfile};
use hybridplan::metrics::{aggregate, read_reports_csv, reports_to_json, write_aggregate_csv, write_reports_csv, RunReport};
use hybridplan::model::{apply, check_history, parse_plan, PlanHistory};
use hybridplan::planner::{EnumerationConfig, Mode, Status};
use hybridplan::strategies::{precompute, run, StrategySpec};

const EXIT_OK: u8 = 0;
const EXIT_NO_PLAN: u8 = 1;
const EXIT_LIMIT: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "hybridplan", version, about = "Hybrid task planning with low-level feasibility checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one instance with one strategy.
    Solve(SolveArgs),
    /// Run strategies over a suite of instances, appending to a CSV report.
    Bench(BenchArgs),
    /// Generate a seeded instance suite.
    Gen(GenArgs),
    /// Evaluate every check module with a finite input space and store the table.
    Precompute(PrecomputeArgs),
    /// Check an instance file, and optionally a plan against it.
    Validate(ValidateArgs),
}

#[derive(Args, Clone)]
struct Limits {
    #[arg(long, default_value = "first")]
    mode: Mode,
    /// Seconds per run.
    #[arg(long, default_value_t = 7200.0)]
    timeout: f64,
    #[arg(long, default_value_t = 10_000)]
    max_plans: usize,
    #[arg(long)]
    horizon: Option<usize>,
    /// Keep deepening past the first horizon with a plan.
    #[arg(long)]
    all_horizons: bool,
}

impl Limits {
    fn config(&self, mode: Mode) -> Result<EnumerationConfig> {
        if !(self.timeout >= 0.0 && self.timeout.is_finite()) {
            bail!("timeout must be a non-negative number of seconds");
        }
        Ok(EnumerationConfig {
            horizon_max: self.horizon,
            max_plans: self.max_plans,
            timeout: Duration::from_secs_f64(self.timeout),
            mode,
            minimal_only: !self.all_horizons,
            memoize: true,
        })
    }
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, default_value = "int")]
    strategy: String,
    /// Per-module roles, e.g. `bal=int,leg=pre`.
    #[arg(long)]
    assign: Option<String>,
    #[command(flatten)]
    limits: Limits,
    /// Write the run report here: CSV (appended) if the name ends in .csv, JSON otherwise.
    #[arg(long, env = "HYBRIDPLAN_REPORT")]
    report: Option<PathBuf>,
    /// Check table to preload, updated after the run.
    #[arg(long, env = "HYBRIDPLAN_CACHE")]
    cache: Option<PathBuf>,
    /// Only print the summary line.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance files or directories of `.inst` files.
    #[arg(required = true)]
    instances: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "pre+int,int,filt,repl")]
    strategies: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "first,all")]
    modes: Vec<Mode>,
    #[command(flatten)]
    limits: Limits,
    /// CSV report; runs already in it are skipped.
    #[arg(long, env = "HYBRIDPLAN_REPORT", default_value = "results.csv")]
    report: PathBuf,
    /// Full per-run reports as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Aggregate table over every run in the report.
    #[arg(long)]
    aggregate: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    domain: DomainKind,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `standard` or `small`.
    #[arg(long, default_value = "standard")]
    profile: String,
    #[arg(long)]
    grid: Option<i32>,
    #[arg(long)]
    obstacle_density: Option<f64>,
    /// Smallest goal distance (CM Manhattan distance or payload moves).
    #[arg(long)]
    goal_min: Option<u32>,
    #[arg(long)]
    goal_max: Option<u32>,
    #[arg(long)]
    link_len: Option<f64>,
    /// Horizon of the solvability filter.
    #[arg(long)]
    horizon: Option<usize>,
    /// Discard instances whose shortest feasible plan is shorter.
    #[arg(long)]
    min_plan_len: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PrecomputeArgs {
    instance: PathBuf,
    #[arg(long, env = "HYBRIDPLAN_CACHE")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    instance: PathBuf,
    /// Plan in `step N: {a, b}` lines; checked for executability, goal and all checks.
    #[arg(long)]
    plan: Option<PathBuf>,
}

fn load(path: &Path) -> Result<(Instance, HybridProblem)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let inst = parse_instance(&text).with_context(|| format!("parsing {}", path.display()))?;
    let hp = inst.build().with_context(|| format!("building {}", path.display()))?;
    Ok((inst, hp))
}

fn instance_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn load_cache(path: Option<&Path>, hp: &HybridProblem) -> Result<CheckCache> {
    let cache = CheckCache::new();
    if let Some(p) = path.filter(|p| p.exists()) {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        for (k, v) in read_table(&text, &hp.module_ids()).with_context(|| format!("parsing {}", p.display()))? {
            cache.preload(k, v);
        }
    }
    Ok(cache)
}

fn save_cache(path: &Path, cache: &CheckCache, hp: &HybridProblem) -> Result<()> {
    let entries: Vec<_> = hp.module_ids().iter().flat_map(|m| cache.entries(m)).collect();
    fs::write(path, write_table(&entries)).with_context(|| format!("writing {}", path.display()))
}

fn append_csv(path: &Path, reports: &[RunReport]) -> Result<()> {
    let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    write_reports_csv(file, reports, fresh)?;
    Ok(())
}

fn parse_spec(strategy: &str, assign: Option<&str>) -> Result<StrategySpec> {
    let spec: StrategySpec = strategy.parse()?;
    Ok(match assign {
        Some(a) => spec.with_assignments(a)?,
        None => spec,
    })
}

fn solve(args: SolveArgs) -> Result<u8> {
    let (inst, hp) = load(&args.instance)?;
    let spec = parse_spec(&args.strategy, args.assign.as_deref())?;
    let config = args.limits.config(args.limits.mode)?;
    let cache = load_cache(args.cache.as_deref(), &hp)?;
    let out = run(&hp, &spec, &config, &cache)?;
    let report = out.report.labelled(instance_name(&args.instance), inst.kind().to_string());

    println!(
        "status={} plans={} infeasible={} wall_s={:.3} checks_distinct={} checks_total={} restarts={}",
        report.status,
        report.n_feas,
        report.n_infeas,
        report.wall_s,
        report.checks_distinct,
        report.checks_total,
        report.restarts
    );
    if !args.quiet {
        for (i, plan) in out.plans.iter().enumerate() {
            println!("plan {} ({} steps)", i + 1, plan.len());
            print!("{plan}");
        }
    }
    if let Some(path) = &args.report {
        if path.extension().is_some_and(|e| e == "csv") {
            append_csv(path, std::slice::from_ref(&report))?;
        } else {
            fs::write(path, serde_json::to_string_pretty(&report)?)?;
        }
    }
    if let Some(path) = &args.cache {
        save_cache(path, &cache, &hp)?;
    }
    Ok(match (out.plans.is_empty(), out.status) {
        (false, _) => EXIT_OK,
        (true, Status::NoPlanExists) => EXIT_NO_PLAN,
        (true, _) => EXIT_LIMIT,
    })
}

fn collect_instances(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|e| e == "inst"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn bench(args: BenchArgs) -> Result<u8> {
    let specs = args
        .strategies
        .iter()
        .map(|s| parse_spec(s, None))
        .collect::<Result<Vec<_>>>()?;
    let files = collect_instances(&args.instances)?;
    let mut done: HashSet<(String, String, Mode)> = HashSet::new();
    let mut all: Vec<RunReport> = Vec::new();
    if args.report.exists() && fs::metadata(&args.report)?.len() > 0 {
        let existing = read_reports_csv(fs::File::open(&args.report)?)
            .with_context(|| format!("reading {}", args.report.display()))?;
        done.extend(existing.iter().map(RunReport::run_key));
        all.extend(existing);
    }
    let mut fresh = Vec::new();
    for file in &files {
        let (inst, hp) = load(file)?;
        let name = instance_name(file);
        for spec in &specs {
            for &mode in &args.modes {
                let key = (name.clone(), spec.to_string(), mode);
                if done.contains(&key) {
                    continue;
                }
                let config = args.limits.config(mode)?;
                let cache = CheckCache::new();
                let report = match run(&hp, spec, &config, &cache) {
                    Ok(out) => out.report.labelled(&name, inst.kind().to_string()),
                    Err(e) => {
                        eprintln!("{name} {spec} {mode}: {e}");
                        continue;
                    }
                };
                println!(
                    "{name} {} {mode} {} {:.3}s plans={} restarts={}",
                    report.strategy, report.status, report.wall_s, report.n_feas, report.restarts
                );
                std::io::stdout().flush()?;
                append_csv(&args.report, std::slice::from_ref(&report))?;
                done.insert(key);
                fresh.push(report.clone());
                all.push(report);
            }
        }
    }
    if let Some(path) = &args.json {
        fs::write(path, reports_to_json(&fresh)?)?;
    }
    if let Some(path) = &args.aggregate {
        let rows = aggregate(&all, Some(args.limits.timeout));
        write_aggregate_csv(fs::File::create(path)?, &rows)?;
    }
    Ok(EXIT_OK)
}

fn gen(args: GenArgs) -> Result<u8> {
    let mut profile = match args.profile.as_str() {
        "standard" => SuiteProfile::standard(args.domain),
        "small" => SuiteProfile::small(args.domain),
        other => bail!("unknown profile `{other}` (expected standard|small)"),
    };
    if let Some(g) = args.grid {
        profile.grid = g;
    }
    if let Some(d) = args.obstacle_density {
        profile.obstacle_density = d;
    }
    if let Some(m) = args.goal_min {
        profile.goal_distance.0 = m;
    }
    if let Some(m) = args.goal_max {
        profile.goal_distance.1 = m;
    }
    if let Some(l) = args.link_len {
        profile.link_len = l;
    }
    if let Some(h) = args.horizon {
        profile.horizon = h;
    }
    if let Some(m) = args.min_plan_len {
        profile.min_plan_len = m;
    }
    let suite = generate_suite(args.domain, args.count, args.seed, &profile)?;
    fs::create_dir_all(&args.out)?;
    let mut meta = serde_json::Map::new();
    for g in &suite {
        fs::write(args.out.join(format!("{}.inst", g.name)), print_instance(&g.instance))?;
        meta.insert(g.name.clone(), serde_json::to_value(&g.meta)?);
    }
    let index = serde_json::json!({ "profile": profile, "instances": meta });
    fs::write(args.out.join("meta.json"), serde_json::to_string_pretty(&index)?)?;
    println!("wrote {} instances to {}", suite.len(), args.out.display());
    Ok(EXIT_OK)
}

fn precompute_cmd(args: PrecomputeArgs) -> Result<u8> {
    let (_, hp) = load(&args.instance)?;
    let cache = CheckCache::new();
    let mut entries = Vec::new();
    for m in &hp.modules {
        if m.input_space().is_none() {
            println!("{}: no finite input space, skipped", m.id());
            continue;
        }
        let (_, stats) = precompute(&cache, m.as_ref())?;
        println!(
            "{}: {} keys, {} failing, {} constraints, {:.3}s",
            m.id(),
            stats.keys,
            stats.failing,
            stats.constraints,
            stats.elapsed_s
        );
        entries.extend(cache.entries(m.id()));
    }
    fs::write(&args.out, write_table(&entries)).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(EXIT_OK)
}

fn validate(args: ValidateArgs) -> Result<u8> {
    let (_, hp) = load(&args.instance)?;
    let Some(plan_path) = &args.plan else {
        println!("instance ok");
        return Ok(EXIT_OK);
    };
    let text = fs::read_to_string(plan_path).with_context(|| format!("reading {}", plan_path.display()))?;
    let steps = parse_plan(&text, &hp.problem.schemas)?;
    // Executability first, then the checks, then the goal, so the report
    // names the earliest kind of failure.
    let mut states = vec![hp.problem.initial.clone()];
    for (i, step) in steps.iter().enumerate() {
        match apply(states.last().expect("nonempty"), step, &hp.problem.schemas) {
            Ok(next) => states.push(next),
            Err(e) => {
                println!("plan invalid: step {i}: {e}");
                return Ok(EXIT_NO_PLAN);
            }
        }
    }
    let history = PlanHistory { states, steps };
    let cache = CheckCache::disabled();
    for (i, t) in history.transitions().enumerate() {
        for m in &hp.modules {
            for key in m.extract_keys(&t) {
                if !cache.query(m.as_ref(), &key)?.feasible {
                    println!("plan infeasible: step {i} fails {key}");
                    return Ok(EXIT_NO_PLAN);
                }
            }
        }
    }
    if let Err(e) = check_history(&hp.problem, &history) {
        println!("plan invalid: {e}");
        return Ok(EXIT_NO_PLAN);
    }
    println!("plan ok ({} steps)", history.len());
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::from(EXIT_OK),
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::Gen(a) => gen(a),
        Command::Precompute(a) => precompute_cmd(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
