//! Command-line front end and the long-format CSV layer.
//!
//! ```text
//! panelcd test     --data panel.csv --model hetero --tests rlm,rlmpe --alpha 0.05
//! panelcd simulate --dgp 1 --T 100 --n 100 --k 2 --errors normal --reps 2000 --seed 42
//! panelcd dump-dgp --dgp 4 --T 50 --n 20 --seed 7 --output panel.csv
//! ```
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cdtest::{run_all, TestConfig, TestKind, DEFAULT_ALPHA};
use crate::dgp::{generate, Alternative, DgpConfig, DgpKind, ErrorDist};
use crate::error::{Error, Result};
use crate::mc::{run_experiment, ExperimentPlan};
use crate::panel::{fit, validate_dataset, ModelSpec, PanelDataset};
use crate::report::{format_battery_table, format_report_table, write_battery_csv, write_report_csv};

pub const WORKERS_ENV: &str = "PANELCD_WORKERS";
/// Loading scale used by the dense alternative when none is given elsewhere.
pub const DEFAULT_H: f64 = 3.0;

#[derive(Debug, Parser)]
#[command(name = "panelcd", version, about = "Cross-sectional independence tests for large panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the test battery on a long-format panel CSV.
    Test(TestArgs),
    /// Run a Monte Carlo size/power experiment.
    Simulate(SimulateArgs),
    /// Write one synthetic panel as long-format CSV.
    DumpDgp(DumpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Hetero,
    Fixed,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AltArg {
    Null,
    Dense,
    Sparse,
    LessSparse,
}

#[derive(Debug, Args)]
struct TestArgs {
    /// Long-format CSV with header unit,time,y,x1,...,xk.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "hetero")]
    model: Model,
    /// Comma-separated test ids (lm, cdlm, cdp, lmbc, lmadj, lmrmt, rlm, rlmpe) or "all".
    #[arg(long, default_value = "all")]
    tests: String,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Do not add a constant regressor.
    #[arg(long)]
    no_intercept: bool,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[arg(long, default_value = "1")]
    dgp: String,
    /// Sample length(s), comma-separated.
    #[arg(long = "T", value_delimiter = ',', required = true)]
    t: Vec<usize>,
    /// Cross-section size(s), comma-separated; paired with --T.
    #[arg(long = "n", value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Regressor count including the intercept (DGP1 and DGP3).
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value = "normal")]
    errors: String,
    #[arg(long, value_enum, default_value = "null")]
    alternative: AltArg,
    /// Dense loading scale; required with --alternative dense.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, default_value_t = 50)]
    burn_in: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value = "all")]
    tests: String,
    /// Worker threads (default: $PANELCD_WORKERS, else all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// A validated command.
#[derive(Debug, Clone, PartialEq)]
pub enum CliConfig {
    Test(TestCommand),
    Simulate(SimulateCommand),
    DumpDgp(DumpCommand),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestCommand {
    pub data: PathBuf,
    pub model: ModelSpec,
    pub add_intercept: bool,
    pub tests: TestConfig,
    pub format: Format,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateCommand {
    pub plan: ExperimentPlan,
    pub format: Format,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DumpCommand {
    pub config: DgpConfig,
    pub output: Option<PathBuf>,
}

/// Rendered usage error (or help/version text) with its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError {
    pub message: String,
    pub code: i32,
}

impl UsageError {
    fn new(msg: impl std::fmt::Display) -> Self {
        UsageError { message: format!("error: {msg}\n\nFor more information, try '--help'.\n"), code: 2 }
    }
}

fn parse_tests(s: &str) -> std::result::Result<Vec<TestKind>, UsageError> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(TestKind::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let kind: TestKind = part.parse().map_err(|e: Error| UsageError::new(e))?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    if out.is_empty() {
        return Err(UsageError::new("--tests is empty"));
    }
    Ok(out)
}

fn test_config(alpha: f64, tests: &str) -> std::result::Result<TestConfig, UsageError> {
    TestConfig::new(alpha, parse_tests(tests)?).map_err(UsageError::new)
}

fn design_cells(d: &DesignArgs) -> std::result::Result<Vec<DgpConfig>, UsageError> {
    let dgp: DgpKind = d.dgp.parse().map_err(UsageError::new)?;
    let dist: ErrorDist = d.errors.parse().map_err(UsageError::new)?;
    let alternative = match (d.alternative, d.h) {
        (AltArg::Dense, None) => {
            return Err(UsageError::new(format!(
                "--alternative dense requires the loading scale --h (the default design uses h = {DEFAULT_H}; pass --h {DEFAULT_H})"
            )))
        }
        (AltArg::Dense, Some(h)) => Alternative::Dense { h },
        (_, Some(_)) => return Err(UsageError::new("--h is only valid with --alternative dense")),
        (AltArg::Null, None) => Alternative::Null,
        (AltArg::Sparse, None) => Alternative::Sparse,
        (AltArg::LessSparse, None) => Alternative::LessSparse,
    };
    let pairs: Vec<(usize, usize)> = match (d.t.len(), d.n.len()) {
        (a, b) if a == b => d.t.iter().copied().zip(d.n.iter().copied()).collect(),
        (1, _) => d.n.iter().map(|&n| (d.t[0], n)).collect(),
        (_, 1) => d.t.iter().map(|&t| (t, d.n[0])).collect(),
        (a, b) => return Err(UsageError::new(format!("--T lists {a} values but --n lists {b}; give equal lengths or a single value"))),
    };
    pairs
        .into_iter()
        .map(|(t, n)| {
            let cfg = DgpConfig::new(dgp, t, n).k(d.k).errors(dist).alternative(alternative).burn_in(d.burn_in).seed(d.seed);
            cfg.validate().map_err(UsageError::new).map(|_| cfg)
        })
        .collect()
}

fn default_workers() -> std::result::Result<usize, UsageError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(w),
            _ => Err(UsageError::new(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Parses `argv` (including the program name) into a validated command.
pub fn parse_args<I, T>(argv: I) -> std::result::Result<CliConfig, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| UsageError { message: e.render().to_string(), code: e.exit_code() })?;
    match cli.command {
        Command::Test(a) => {
            let model = match a.model {
                Model::Hetero => ModelSpec::Heterogeneous,
                Model::Fixed => ModelSpec::FixedEffects,
                Model::Dynamic => ModelSpec::Dynamic { include_intercept: !a.no_intercept },
            };
            Ok(CliConfig::Test(TestCommand {
                data: a.data,
                model,
                add_intercept: !a.no_intercept,
                tests: test_config(a.alpha, &a.tests)?,
                format: a.format,
                output: a.output,
            }))
        }
        Command::Simulate(a) => {
            let cfg = test_config(a.alpha, &a.tests)?;
            if a.reps == 0 {
                return Err(UsageError::new("--reps must be at least 1"));
            }
            let workers = match a.workers {
                Some(0) => return Err(UsageError::new("--workers must be at least 1")),
                Some(w) => w,
                None => default_workers()?,
            };
            let plan = ExperimentPlan {
                cells: design_cells(&a.design)?,
                reps: a.reps,
                alpha: cfg.alpha,
                tests: cfg.tests,
                root_seed: a.design.seed,
                workers,
            };
            Ok(CliConfig::Simulate(SimulateCommand { plan, format: a.format, output: a.output }))
        }
        Command::DumpDgp(a) => {
            let cells = design_cells(&a.design)?;
            if cells.len() != 1 {
                return Err(UsageError::new("dump-dgp takes a single --T and --n"));
            }
            Ok(CliConfig::DumpDgp(DumpCommand { config: cells[0], output: a.output }))
        }
    }
}

/// Sorts labels numerically when every label is a number, otherwise
/// lexicographically.
pub fn sort_labels(labels: &mut [String]) {
    let numeric: Option<Vec<f64>> = labels.iter().map(|l| l.trim().parse::<f64>().ok()).collect();
    match numeric {
        Some(_) => labels.sort_by(|a, b| {
            let (x, y) = (a.trim().parse::<f64>().unwrap(), b.trim().parse::<f64>().unwrap());
            x.total_cmp(&y).then_with(|| a.cmp(b))
        }),
        None => labels.sort(),
    }
}

/// Reads a long-format panel (`unit,time,y,x1,...,xk`, any row order).
///
/// A leading constant regressor is added when `add_intercept` is set.
pub fn load_panel_csv(path: &Path, add_intercept: bool) -> Result<PanelDataset> {
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_panel_csv(file, add_intercept)
}

/// [`load_panel_csv`] over any reader.
pub fn read_panel_csv<R: io::Read>(reader: R, add_intercept: bool) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?.clone();
    let names: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
    if names.len() < 3 || names[0] != "unit" || names[1] != "time" || names[2] != "y" {
        return Err(Error::Parse { line: 1, msg: format!("header must start with unit,time,y; found {:?}", header.iter().collect::<Vec<_>>()) });
    }
    let kx = names.len() - 3;
    let mut rows: Vec<(String, String, Vec<f64>)> = Vec::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line() as usize), msg: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != names.len() {
            return Err(Error::Parse { line, msg: format!("expected {} fields, found {}", names.len(), rec.len()) });
        }
        let (unit, time) = (rec[0].to_string(), rec[1].to_string());
        if unit.is_empty() || time.is_empty() {
            return Err(Error::Parse { line, msg: "empty unit or time label".into() });
        }
        let mut vals = Vec::with_capacity(kx + 1);
        for c in 2..rec.len() {
            let v = rec[c].parse::<f64>().map_err(|_| Error::NonNumeric { line, column: header[c].to_string(), value: rec[c].to_string() })?;
            vals.push(v);
        }
        if let Some(first) = seen.insert((unit.clone(), time.clone()), line) {
            return Err(Error::Parse { line, msg: format!("duplicate observation for unit {unit:?}, time {time:?} (first at line {first})") });
        }
        rows.push((unit, time, vals));
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 2, msg: "no observations".into() });
    }

    let mut units: Vec<String> = rows.iter().map(|r| r.0.clone()).collect();
    units.sort();
    units.dedup();
    sort_labels(&mut units);
    let mut times: Vec<String> = rows.iter().map(|r| r.1.clone()).collect();
    times.sort();
    times.dedup();
    sort_labels(&mut times);
    let (n, t) = (units.len(), times.len());

    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in &rows {
        *counts.entry(r.0.as_str()).or_default() += 1;
    }
    let short: Vec<String> = units
        .iter()
        .filter(|u| counts[u.as_str()] != t)
        .map(|u| format!("unit {u}: expected {t} periods, found {}", counts[u.as_str()]))
        .collect();
    if !short.is_empty() {
        return Err(Error::Unbalanced(short.join("; ")));
    }

    let ui: HashMap<&str, usize> = units.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
    let ti: HashMap<&str, usize> = times.iter().enumerate().map(|(s, u)| (u.as_str(), s)).collect();
    let k = kx + usize::from(add_intercept);
    let off = usize::from(add_intercept);
    let mut y = vec![0.0; n * t];
    let mut x = vec![1.0; n * t * k];
    for (unit, time, vals) in &rows {
        let (i, s) = (ui[unit.as_str()], ti[time.as_str()]);
        y[i * t + s] = vals[0];
        for l in 0..kx {
            x[(i * k + l + off) * t + s] = vals[1 + l];
        }
    }
    PanelDataset::new(n, t, k, y, x, add_intercept)?.with_labels(units, times)
}

/// Writes `panel` in long format; the intercept column is omitted.
pub fn dump_panel_csv<W: Write>(panel: &PanelDataset, w: W) -> io::Result<()> {
    let off = usize::from(panel.has_intercept());
    let mut out = BufWriter::new(w);
    let mut header = String::from("unit,time,y");
    for l in 1..=panel.k() - off {
        header.push_str(&format!(",x{l}"));
    }
    writeln!(out, "{header}")?;
    for i in 0..panel.n() {
        for s in 0..panel.t() {
            write!(out, "{},{},{}", panel.unit_ids()[i], panel.time_ids()[s], panel.y(i, s))?;
            for l in off..panel.k() {
                write!(out, ",{}", panel.x(i, s, l))?;
            }
            writeln!(out)?;
        }
    }
    out.flush()
}

fn open_output(path: &Option<PathBuf>, stdout: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match path {
        None => f(stdout).map_err(|source| Error::Io { path: PathBuf::from("<stdout>"), source }),
        Some(p) => {
            let io_err = |source| Error::Io { path: p.clone(), source };
            let mut file = BufWriter::new(File::create(p).map_err(io_err)?);
            f(&mut file).and_then(|_| file.flush()).map_err(io_err)
        }
    }
}

/// Executes a validated command, writing results to `stdout` unless an
/// output path is set.
pub fn execute(cfg: &CliConfig, stdout: &mut dyn Write) -> Result<()> {
    match cfg {
        CliConfig::Test(c) => {
            let data = load_panel_csv(&c.data, c.add_intercept)?;
            let report = validate_dataset(&data, c.model);
            if !report.is_ok() {
                let msgs: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
                return Err(Error::InvalidInput(format!("{} cannot be fitted as {}: {}", c.data.display(), c.model, msgs.join("; "))));
            }
            let retain = c.tests.tests.contains(&TestKind::LmAdj) && c.model != ModelSpec::FixedEffects;
            let resid = fit(&data, c.model, retain)?;
            let battery = run_all(&resid, &c.tests);
            let title = format!("model={}  n={}  T={}  k={}  alpha={}", c.model, resid.n(), resid.t_eff(), resid.k_eff(), c.tests.alpha);
            open_output(&c.output, stdout, |w| match c.format {
                Format::Csv => write_battery_csv(&battery, w),
                Format::Table => w.write_all(format_battery_table(&battery, &title).as_bytes()),
            })
        }
        CliConfig::Simulate(c) => {
            let report = run_experiment(&c.plan)?;
            open_output(&c.output, stdout, |w| match c.format {
                Format::Csv => write_report_csv(&report, w),
                Format::Table => w.write_all(format_report_table(&report).as_bytes()),
            })
        }
        CliConfig::DumpDgp(c) => {
            let g = generate(&c.config)?;
            open_output(&c.output, stdout, |w| dump_panel_csv(&g.panel, w))
        }
    }
}

/// Full CLI run; returns the process exit code.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match parse_args(argv) {
        Ok(c) => c,
        Err(e) => {
            let sink: &mut dyn Write = if e.code == 0 { stdout } else { stderr };
            let _ = sink.write_all(e.message.as_bytes());
            return e.code;
        }
    };
    match execute(&cfg, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

/// [`run_with`] on the process's arguments and standard streams.
pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock())
}
