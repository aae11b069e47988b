//! Argument parsing and dispatch for the `surf` command.
//!
//! Every payload (JSON or CSV) goes to `--out` when given and to stdout
//! otherwise; the one-line summary goes to stderr. CSV payloads get a sidecar
//! `<out>.meta.json` with the provenance header. Exit codes: 0 ok, 1 a
//! verification check failed, 2 usage or runtime error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use surf::exact::{self, ExactSeries};
use surf::harness::{self, parse_count, ExperimentConfig, ExperimentReport, DEFAULT_EPSILON, DEFAULT_SEED};
use surf::oracle::{self, DEFAULT_BUDGET};
use surf::trace::Trace;
use surf::{make_dist, Forest, ForestStats, SurfError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Exact,
    Oracle,
    Experiment,
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Exact => "exact",
            Command::Oracle => "oracle",
            Command::Experiment => "experiment",
            Command::Verify => "verify",
        }
    }
}

/// A validated invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandPlan {
    pub command: Command,
    pub spec: Option<String>,
    pub n: Option<u64>,
    pub sizes: Vec<u64>,
    pub seed: u64,
    /// `--seed` was given explicitly (it then overrides a config file).
    pub seed_explicit: bool,
    pub reps: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub threads: Option<usize>,
    pub epsilon: f64,
    pub budget: u64,
    pub config: Option<PathBuf>,
    pub trace_in: Option<PathBuf>,
    pub trace_out: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "surf", version, about = "Subtractive random forests: simulation, exact values, verification")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Args)]
struct Common {
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Worker threads for replications.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Build one realization (or several) and report its statistics.
    Simulate {
        #[arg(long)]
        dist: Option<String>,
        #[arg(long)]
        n: Option<String>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Number of realizations, seeded by derive_seed(seed, r).
        #[arg(long)]
        reps: Option<String>,
        /// Re-analyze a saved trace instead of simulating.
        #[arg(long)]
        trace_in: Option<PathBuf>,
        /// Save the realization's steps as a binary trace.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Exact series r, Rhat, m, EL and E M_n.
    Exact {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        n: String,
        /// Truncation error target for E M_n.
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Exhaustive enumeration for finite-support distributions.
    Oracle {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        n: String,
        /// Maximum number of step sequences.
        #[arg(long)]
        budget: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo experiment from a key = value config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the verification suite.
    Verify {
        #[arg(long)]
        dist: String,
        /// Single size (alternative to --sizes).
        #[arg(long)]
        n: Option<String>,
        /// Comma-separated sizes.
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "200")]
        reps: String,
        #[command(flatten)]
        common: Common,
    },
}

/// Usage error, or help/version text when `exit_code` is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError {
    pub message: String,
    pub exit_code: i32,
}

impl UsageError {
    fn new(message: impl Into<String>) -> Self {
        UsageError { message: message.into(), exit_code: EXIT_ERROR }
    }
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

fn count(flag: &str, raw: &str) -> Result<u64, UsageError> {
    match parse_count(raw) {
        Some(v) if v >= 1 => Ok(v),
        _ => Err(UsageError::new(format!("--{flag} must be a positive integer, got `{raw}`"))),
    }
}

fn check_spec(spec: &str) -> Result<String, UsageError> {
    make_dist(spec).map(|_| spec.to_string()).map_err(|e| UsageError::new(e.to_string()))
}

/// Parses and validates `argv` (without the program name).
pub fn parse_args<I, S>(argv: I) -> Result<CommandPlan, UsageError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args = std::iter::once(std::ffi::OsString::from("surf")).chain(argv.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(args).map_err(|e| {
        let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        UsageError { message: e.render().to_string(), exit_code: code }
    })?;
    let blank = |command, common: Common| CommandPlan {
        command,
        spec: None,
        n: None,
        sizes: Vec::new(),
        seed: DEFAULT_SEED,
        seed_explicit: false,
        reps: None,
        out: common.out,
        format: common.format,
        threads: common.threads,
        epsilon: DEFAULT_EPSILON,
        budget: DEFAULT_BUDGET,
        config: None,
        trace_in: None,
        trace_out: None,
    };
    let plan = match cli.command {
        Sub::Simulate { dist, n, seed, reps, trace_in, trace_out, common } => {
            let mut plan = blank(Command::Simulate, common);
            plan.seed = seed;
            plan.seed_explicit = true;
            plan.reps = reps.map(|r| count("reps", &r)).transpose()?;
            if trace_in.is_some() {
                if dist.is_some() || n.is_some() {
                    return Err(UsageError::new("--trace-in takes spec, seed and n from the trace; drop --dist/--n"));
                }
                if plan.reps.is_some_and(|r| r > 1) {
                    return Err(UsageError::new("--trace-in holds one realization; --reps must be 1"));
                }
            } else {
                let dist = dist.ok_or_else(|| UsageError::new("missing required flag --dist"))?;
                let n = n.ok_or_else(|| UsageError::new("missing required flag --n"))?;
                plan.spec = Some(check_spec(&dist)?);
                plan.n = Some(count("n", &n)?);
            }
            if trace_out.is_some() && plan.reps.is_some_and(|r| r > 1) {
                return Err(UsageError::new("--trace-out saves one realization; --reps must be 1"));
            }
            plan.trace_in = trace_in;
            plan.trace_out = trace_out;
            plan
        }
        Sub::Exact { dist, n, epsilon, common } => {
            let mut plan = blank(Command::Exact, common);
            plan.spec = Some(check_spec(&dist)?);
            plan.n = Some(count("n", &n)?);
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(UsageError::new(format!("--epsilon must be positive, got {epsilon}")));
            }
            plan.epsilon = epsilon;
            plan
        }
        Sub::Oracle { dist, n, budget, common } => {
            let mut plan = blank(Command::Oracle, common);
            plan.spec = Some(check_spec(&dist)?);
            plan.n = Some(count("n", &n)?);
            if let Some(b) = budget {
                plan.budget = count("budget", &b)?;
            }
            if plan.format == Format::Csv {
                return Err(UsageError::new("oracle output is JSON only"));
            }
            plan
        }
        Sub::Experiment { config, seed, reps, common } => {
            let mut plan = blank(Command::Experiment, common);
            plan.config = Some(config);
            if let Some(s) = seed {
                plan.seed = s;
                plan.seed_explicit = true;
            }
            plan.reps = reps.map(|r| count("reps", &r)).transpose()?;
            plan
        }
        Sub::Verify { dist, n, sizes, seed, reps, common } => {
            let mut plan = blank(Command::Verify, common);
            plan.spec = Some(check_spec(&dist)?);
            plan.seed = seed;
            plan.seed_explicit = true;
            plan.reps = Some(count("reps", &reps)?);
            plan.sizes = match (n, sizes) {
                (Some(_), Some(_)) => return Err(UsageError::new("give either --n or --sizes, not both")),
                (None, None) => return Err(UsageError::new("missing required flag --n or --sizes")),
                (Some(n), None) => vec![count("n", &n)?],
                (None, Some(list)) => {
                    list.split(',').map(|s| count("sizes", s.trim())).collect::<Result<Vec<_>, _>>()?
                }
            };
            plan
        }
    };
    if plan.threads == Some(0) {
        return Err(UsageError::new("--threads must be at least 1"));
    }
    if plan.format == Format::Csv && plan.out.is_none() && plan.command != Command::Verify {
        return Err(UsageError::new("--format csv needs --out (metadata goes to a sidecar file)"));
    }
    Ok(plan)
}

fn provenance(spec: &str, seed: Option<u64>, n: Value) -> Value {
    json!({ "tool": "surf", "version": surf::VERSION, "spec": spec, "seed": seed, "n": n })
}

fn stats_json(stats: &ForestStats) -> Value {
    let histogram: serde_json::Map<String, Value> =
        stats.size_histogram().into_iter().map(|(size, count)| (size.to_string(), json!(count))).collect();
    json!({
        "M": stats.num_trees,
        "O": stats.root_hits,
        "H": stats.height,
        "H0": stats.height_of_zero,
        "S0": stats.size_of_zero(),
        "L0": stats.leaves_of_zero,
        "N": stats.last_renewal,
        "N1": stats.renewal_visits,
        "largest_tree": stats.largest_tree(),
        "max_degree": stats.max_degree,
        "profile_of_zero": stats.profile_of_zero,
        "tree_size_histogram": histogram,
    })
}

const STAT_ROWS: [&str; 10] = ["M", "O", "H", "H0", "S0", "L0", "N", "N1", "largest_tree", "max_degree"];

fn open_out(path: &Path) -> Result<Box<dyn Write>, SurfError> {
    Ok(Box::new(BufWriter::new(File::create(path)?)))
}

fn payload_writer(out: &Option<PathBuf>) -> Result<Box<dyn Write>, SurfError> {
    match out {
        Some(p) => open_out(p),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_json(out: &Option<PathBuf>, value: &Value) -> Result<(), SurfError> {
    let mut w = payload_writer(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_sidecar(out: &Path, meta: &Value) -> Result<(), SurfError> {
    write_json(&Some(sidecar(out)), meta)
}

/// Runs a plan and returns the process exit code.
pub fn execute(plan: &CommandPlan) -> i32 {
    let run = || match plan.command {
        Command::Simulate => simulate(plan),
        Command::Exact => exact_cmd(plan),
        Command::Oracle => oracle_cmd(plan),
        Command::Experiment => experiment(plan),
        Command::Verify => verify(plan),
    };
    let result = match plan.threads {
        None => run(),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(SurfError::Config(format!("thread pool: {e}"))),
        },
    };
    match result {
        Ok(code) => code,
        // a closed stdout (e.g. piped into `head`) is not an error
        Err(e) if is_broken_pipe(&e) => EXIT_OK,
        Err(e) => {
            eprintln!("surf {}: error: {e}", plan.command.name());
            EXIT_ERROR
        }
    }
}

fn is_broken_pipe(e: &SurfError) -> bool {
    let kind = match e {
        SurfError::Io(io) => Some(io.kind()),
        SurfError::Json(j) => j.io_error_kind(),
        _ => None,
    };
    kind == Some(std::io::ErrorKind::BrokenPipe)
}

fn simulate(plan: &CommandPlan) -> Result<i32, SurfError> {
    let (spec, seed, realizations) = match &plan.trace_in {
        Some(path) => {
            let trace = Trace::read(std::io::BufReader::new(File::open(path)?))?;
            make_dist(&trace.spec)?;
            let forest = trace.to_forest()?;
            (trace.spec, trace.seed, vec![(trace.seed, forest)])
        }
        None => {
            let spec = plan.spec.clone().expect("validated");
            let d = make_dist(&spec)?;
            let n = plan.n.expect("validated");
            let reps = plan.reps.unwrap_or(1);
            let forests = if reps == 1 {
                vec![(plan.seed, Forest::build(&d, n, plan.seed)?)]
            } else {
                (1..=reps)
                    .map(|r| {
                        let s = surf::rng::derive_seed(plan.seed, r);
                        Forest::build(&d, n, s).map(|f| (s, f))
                    })
                    .collect::<Result<_, _>>()?
            };
            (spec, plan.seed, forests)
        }
    };
    if let Some(path) = &plan.trace_out {
        let (s, forest) = &realizations[0];
        Trace::from_forest(&spec, *s, forest).write(BufWriter::new(File::create(path)?))?;
    }
    let n = realizations[0].1.horizon();
    let stats: Vec<(u64, ForestStats)> = realizations.iter().map(|(s, f)| (*s, f.stats())).collect();
    let head = provenance(&spec, Some(seed), json!(n));
    match plan.format {
        Format::Json => {
            let body = if stats.len() == 1 {
                json!({ "provenance": head, "stats": stats_json(&stats[0].1) })
            } else {
                let list: Vec<Value> =
                    stats.iter().map(|(s, st)| json!({ "seed": s, "stats": stats_json(st) })).collect();
                json!({ "provenance": head, "realizations": list })
            };
            write_json(&plan.out, &body)?;
        }
        Format::Csv => {
            let out = plan.out.as_ref().expect("validated");
            let mut w = open_out(out)?;
            writeln!(w, "seed,{}", STAT_ROWS.join(","))?;
            for (s, st) in &stats {
                let j = stats_json(st);
                let cells: Vec<String> = STAT_ROWS
                    .iter()
                    .map(|k| match k {
                        &"max_degree" => j[k]["over_positive"].to_string(),
                        _ => j[k].to_string(),
                    })
                    .collect();
                writeln!(w, "{s},{}", cells.join(","))?;
            }
            w.flush()?;
            write_sidecar(out, &json!({ "provenance": head, "columns": "max_degree is over vertices 1..n" }))?;
        }
    }
    let first = &stats[0].1;
    eprintln!(
        "simulate {spec} n={n} seed={seed}: M={} O={} H={} largest tree={}",
        first.num_trees,
        first.root_hits,
        first.height,
        first.largest_tree()
    );
    Ok(EXIT_OK)
}

fn exact_cmd(plan: &CommandPlan) -> Result<i32, SurfError> {
    let spec = plan.spec.as_deref().expect("validated");
    let n = plan.n.expect("validated");
    let d = make_dist(spec)?;
    let series = ExactSeries::compute(&d, n);
    let trees = exact::expected_trees(&d, n, plan.epsilon);
    let em = match &trees {
        Ok(t) => json!({ "value": t.em, "error_bound": t.em_error, "roots_summed": t.roots_summed }),
        Err(e) => json!({ "value": null, "error": e.to_string() }),
    };
    let info = d.mean_info();
    let summary = json!({
        "EM": em,
        "EO": series.m[n as usize],
        "VarO": trees.as_ref().ok().map(|t| t.var_o),
        "mean": info,
        "survival_probability": exact::survival_probability(&d),
        "epsilon": plan.epsilon,
    });
    let head = provenance(spec, None, json!(n));
    match plan.format {
        Format::Json => {
            let body = json!({
                "provenance": head,
                "summary": summary,
                "series": { "n": series.n, "r": series.r, "Rhat": series.rhat, "m": series.m, "EL": series.el },
            });
            write_json(&plan.out, &body)?;
        }
        Format::Csv => {
            let out = plan.out.as_ref().expect("validated");
            let mut w = open_out(out)?;
            series.write_csv(&mut w)?;
            w.flush()?;
            write_sidecar(
                out,
                &json!({ "provenance": head, "summary": summary, "columns": ["n", "r", "Rhat", "m", "EL"] }),
            )?;
        }
    }
    let em_text = trees.as_ref().map_or_else(|e| format!("unavailable ({e})"), |t| format!("{:.6}", t.em));
    eprintln!(
        "exact {spec} n={n}: r_n={:.6} Rhat_n={:.6} m_n={:.6} E M_n={em_text}",
        series.r[n as usize], series.rhat[n as usize], series.m[n as usize]
    );
    Ok(EXIT_OK)
}

fn oracle_cmd(plan: &CommandPlan) -> Result<i32, SurfError> {
    let spec = plan.spec.as_deref().expect("validated");
    let n = plan.n.expect("validated");
    let d = make_dist(spec)?;
    let result = oracle::enumerate_exact(&d, n, plan.budget)?;
    let body = json!({ "provenance": provenance(spec, None, json!(n)), "result": result });
    write_json(&plan.out, &body)?;
    eprintln!(
        "oracle {spec} n={n}: {} sequences, E M_n = {}",
        result.sequences,
        result.em.exact_string().unwrap_or_else(|| result.em.value.to_string())
    );
    Ok(EXIT_OK)
}

fn report_json(report: &ExperimentReport) -> Value {
    let head = provenance(&report.spec, Some(report.seed), json!(report.horizons));
    json!({ "provenance": head, "report": report })
}

fn write_report(plan: &CommandPlan, report: &ExperimentReport) -> Result<(), SurfError> {
    match plan.format {
        Format::Json => write_json(&plan.out, &report_json(report)),
        Format::Csv => {
            let out = plan.out.as_ref().expect("validated");
            let mut w = open_out(out)?;
            writeln!(w, "kind,name,n,mean,sd,se,reps,verdict,measured,reference")?;
            let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
            for s in &report.statistics {
                writeln!(w, "statistic,{},{},{},{},{},{},,,", s.statistic, s.n, s.mean, s.sd, s.se, s.reps)?;
            }
            for c in &report.checks {
                let verdict = serde_json::to_value(c.verdict)?;
                writeln!(
                    w,
                    "check,{},{},,,,,{},{},{}",
                    c.name,
                    c.n.map_or(String::new(), |n| n.to_string()),
                    verdict.as_str().unwrap_or(""),
                    opt(c.measured),
                    opt(c.reference)
                )?;
            }
            w.flush()?;
            write_sidecar(out, &report_json(report))
        }
    }
}

fn experiment(plan: &CommandPlan) -> Result<i32, SurfError> {
    let path = plan.config.as_ref().expect("validated");
    let text = std::fs::read_to_string(path)?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if plan.seed_explicit {
        cfg.seed = plan.seed;
    }
    if let Some(r) = plan.reps {
        cfg.reps = r;
    }
    if plan.threads.is_some() {
        cfg.threads = None;
    }
    let report = harness::run_experiment(&cfg)?;
    write_report(plan, &report)?;
    let failed = report.any_failed();
    eprintln!(
        "experiment {}: {} statistics, {} checks{}",
        cfg.spec,
        report.statistics.len(),
        report.checks.len(),
        if failed { ", some checks FAILED" } else { "" }
    );
    Ok(if failed { EXIT_CHECK_FAILED } else { EXIT_OK })
}

fn verify(plan: &CommandPlan) -> Result<i32, SurfError> {
    let spec = plan.spec.as_deref().expect("validated");
    let d = make_dist(spec)?;
    let report = harness::verify_suite(&d, &plan.sizes, plan.seed, plan.reps.expect("validated"))?;
    print!("{}", report.render_table());
    if plan.out.is_some() {
        write_report(plan, &report)?;
    }
    let failed: Vec<&str> =
        report.checks.iter().filter(|c| c.verdict == harness::Verdict::Fail).map(|c| c.name.as_str()).collect();
    let passed = report.checks.iter().filter(|c| c.verdict == harness::Verdict::Pass).count();
    if failed.is_empty() {
        eprintln!("verify {spec}: {passed} passed, none failed");
        Ok(EXIT_OK)
    } else {
        eprintln!("verify {spec}: {passed} passed, failed: {}", failed.join(", "));
        Ok(EXIT_CHECK_FAILED)
    }
}
