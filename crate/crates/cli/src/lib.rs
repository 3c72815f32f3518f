//! Command implementations behind the `seqpinn` binary.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use seqpinn::checkpoint;
use seqpinn::config::{parse_config, RunConfig, Schedule, DEFAULT_PARTITION_M};
use seqpinn::evaluation::{emit_solution_grid, node_smoothness_check, worst_jump, ErrorReport, Truth};
use seqpinn::oracle::{load_grid, save_grid, solve_spectral, ReferenceGrid};
use seqpinn::partition::{adapt_partition, history_table, PinnSolver};
use seqpinn::trainer::{extend, train_sequence, ComposedSolution, PChoice, Precision};
use seqpinn::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_TRAINING: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_ASSERT: i32 = 5;

pub const THREADS_ENV: &str = "SEQPINN_THREADS";
pub const LOCK_FILE: &str = ".seqpinn.lock";

#[derive(Parser, Debug)]
#[command(name = "seqpinn", version, about = "Sequential hard-constrained PINN training for 1D evolution equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a solution over the configured schedule.
    Train(TrainArgs),
    /// Pick a uniform interval length by repeated halving.
    Partition(PartitionArgs),
    /// Score a saved checkpoint.
    Evaluate(EvaluateArgs),
    /// Compute a spectral reference grid.
    Oracle(OracleArgs),
    /// Standard PINN vs fixed-p vs trainable-p on one schedule.
    Compare(CompareArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub precision: Option<Precision>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reference grid for problems without a closed-form solution.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Continue the checkpoint in the output directory instead of starting over.
    #[arg(long)]
    pub extend: bool,
}

#[derive(Args, Debug)]
pub struct PartitionArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long = "T-init", alias = "t-init")]
    pub t_init: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long = "M", alias = "m")]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub precision: Option<Precision>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub nx: usize,
    #[arg(long, default_value_t = 201)]
    pub nt: usize,
    /// Where to write `solution.csv`; defaults to the checkpoint's parent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long = "T", alias = "horizon")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Output grid file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Exit with status 5 unless the trainable-p run beats both baselines.
    #[arg(long = "assert")]
    pub assert: bool,
    /// With `--assert`, also require the trainable-p error to be at most this.
    #[arg(long)]
    pub max_l2: Option<f64>,
}

/// Failure of a command, carrying its exit status.
#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Assertion(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => {
                write!(f, "{e}")?;
                let mut src = std::error::Error::source(e);
                while let Some(s) = src {
                    write!(f, "\n  caused by: {s}")?;
                    src = s.source();
                }
                Ok(())
            }
            Failure::Assertion(m) => write!(f, "acceptance check failed: {m}"),
        }
    }
}

pub fn exit_code(e: &Failure) -> i32 {
    match e {
        Failure::Assertion(_) => EXIT_ASSERT,
        Failure::Core(e) => classify(e),
    }
}

fn classify(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Domain(_)
        | Error::Unsupported(_)
        | Error::NoExactSolution(_)
        | Error::OutOfRange(_) => EXIT_CONFIG,
        Error::Io { .. } | Error::Format { .. } | Error::Coverage(_) => EXIT_IO,
        Error::IntervalTraining { source, .. } | Error::Partition { source, .. } => classify(source),
        _ => EXIT_TRAINING,
    }
}

/// Caps the global worker pool at `SEQPINN_THREADS` when it is set.
pub fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("`{THREADS_ENV}` must be a positive integer (got `{v}`)")))?;
    // a pool may already exist when commands run in-process more than once
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    init_threads()?;
    match cli.command {
        Command::Train(a) => train(a),
        Command::Partition(a) => partition(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Oracle(a) => oracle(a),
        Command::Compare(a) => compare(a),
    }
}

/// Exclusive claim on an output directory, released on drop.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self, Error> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(OutputLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Format {
                path,
                reason: "output directory is locked by another run (remove the lock file if it is stale)".into(),
            }),
            Err(e) => Err(io_err(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn load_run(a: &RunArgs) -> Result<RunConfig, Error> {
    let mut c = parse_config(&a.config)?;
    if let Some(s) = a.seed {
        c.training.seed = s;
    }
    if let Some(p) = a.precision {
        c.training.precision = p;
    }
    if let Some(o) = &a.out {
        c.out = Some(o.clone());
    }
    Ok(c)
}

fn out_dir(c: &RunConfig) -> PathBuf {
    c.out.clone().unwrap_or_else(|| PathBuf::from("seqpinn-out"))
}

/// Owned counterpart of [`Truth`].
pub enum Reference {
    Exact,
    Grid(ReferenceGrid),
}

impl Reference {
    pub fn truth(&self) -> Truth<'_> {
        match self {
            Reference::Exact => Truth::Exact,
            Reference::Grid(g) => Truth::Grid(g),
        }
    }
}

/// The given grid, the exact solution, or a freshly computed (and cached) oracle grid.
fn reference(c: &RunConfig, given: Option<&Path>, cache_dir: &Path) -> Result<Reference, Error> {
    if let Some(p) = given {
        return Ok(Reference::Grid(load_grid(p)?));
    }
    if c.problem.has_exact_solution() {
        return Ok(Reference::Exact);
    }
    let cached = cache_dir.join("reference.grid");
    if let Ok(g) = load_grid(&cached) {
        if g.t_hi >= c.horizon && g.meta("problem") == Some(c.problem.name()) {
            return Ok(Reference::Grid(g));
        }
    }
    log::info!("computing a spectral reference for {} up to t = {}", c.problem.name(), c.horizon);
    let g = solve_spectral(&c.problem, &c.oracle.spectral(c.horizon))?;
    save_grid(&g, &cached)?;
    Ok(Reference::Grid(g))
}

/// Schedule nodes, running the halving search first for adaptive schedules.
fn resolve_nodes(c: &RunConfig, out: &Path) -> Result<Vec<f64>, Error> {
    if let Some(n) = c.schedule.nodes(c.horizon) {
        return Ok(n);
    }
    let Schedule::Adaptive { delta, m } = c.schedule else {
        unreachable!("non-adaptive schedules have nodes")
    };
    let mut solver = PinnSolver {
        problem: c.problem.clone(),
        config: c.training.clone(),
    };
    let outcome = adapt_partition(&mut solver, c.horizon, delta, m, c.training.seed)?;
    let table = history_table(&outcome.history);
    print!("{table}");
    write(&out.join("partition.tsv"), &table)?;
    Ok(outcome.nodes(c.horizon))
}

fn reproducibility(c: &RunConfig, solution: Option<&ComposedSolution>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "version: {}", env!("CARGO_PKG_VERSION"));
    let args: Vec<String> = std::env::args().collect();
    let _ = writeln!(s, "command: {}", args.join(" "));
    let _ = writeln!(s, "threads: {}", rayon::current_num_threads());
    let _ = writeln!(s, "master_seed: {}", c.training.seed);
    let _ = writeln!(s, "precision: {:?}", c.training.precision);
    if let Some(sol) = solution {
        for iv in &sol.intervals {
            let _ = writeln!(s, "interval_{}_seed: {:016x}", iv.index, iv.params.seed);
        }
        let _ = writeln!(s, "solution_hash: {:016x}", seqpinn::evaluation::solution_hash(sol));
    }
    s
}

fn record_run(c: &RunConfig, out: &Path, solution: Option<&ComposedSolution>) -> Result<(), Error> {
    write(&out.join("run.toml"), &c.to_toml())?;
    write(&out.join("reproducibility.txt"), &reproducibility(c, solution))
}

fn smoothness_metadata(solution: &ComposedSolution, report: &mut ErrorReport) -> Result<(), Error> {
    if solution.intervals.len() > 1 {
        let (du, dut) = worst_jump(&node_smoothness_check(solution, 201)?);
        report.metadata.push(("node_jump_u".into(), format!("{du:e}")));
        report.metadata.push(("node_jump_u_t".into(), format!("{dut:e}")));
    }
    Ok(())
}

fn print_report(label: &str, solution: &ComposedSolution, r: &ErrorReport) {
    let ps: Vec<String> = solution
        .intervals
        .iter()
        .filter_map(|iv| iv.p().map(|p| format!("{p:.4}")))
        .collect();
    println!(
        "{label}: intervals={} l2_rel={:.4e} l1={:.4e} linf={:.4e}{}",
        solution.intervals.len(),
        r.norms.l2_rel,
        r.norms.l1,
        r.norms.linf,
        if ps.is_empty() { String::new() } else { format!(" p=[{}]", ps.join(",")) }
    );
}

fn emit(c: &RunConfig, solution: &ComposedSolution, truth: &Reference, path: &Path) -> Result<ErrorReport, Error> {
    let mut report = emit_solution_grid(solution, Some(&truth.truth()), c.eval_grid, path)?
        .expect("truth was supplied");
    smoothness_metadata(solution, &mut report)?;
    report.metadata.push(("seed".into(), c.training.seed.to_string()));
    let summary = seqpinn::evaluation::summary_path(path);
    let mut text = fs::read_to_string(&summary).map_err(|e| io_err(&summary, e))?;
    for (k, v) in report.metadata.iter() {
        let _ = writeln!(text, "{k}: {v}");
    }
    write(&summary, &text)?;
    Ok(report)
}

pub fn train(a: TrainArgs) -> Result<(), Failure> {
    let c = load_run(&a.run)?;
    let out = out_dir(&c);
    let _lock = OutputLock::acquire(&out)?;
    let ckpt = out.join("checkpoint");
    let nodes = resolve_nodes(&c, &out)?;
    let solution = if a.extend && ckpt.join(checkpoint::MANIFEST).exists() {
        let mut sol = checkpoint::load(&ckpt)?;
        if sol.problem.kind != c.problem.kind {
            return Err(Error::Config(format!(
                "checkpoint holds {} but the config asks for {}",
                sol.problem.name(),
                c.problem.name()
            ))
            .into());
        }
        let have = sol.nodes();
        if have.len() > nodes.len() || have.iter().zip(&nodes).any(|(a, b)| a != b) {
            return Err(Error::Config("`schedule` does not continue the saved checkpoint's nodes".into()).into());
        }
        for &t in &nodes[have.len()..] {
            extend(&mut sol, t, &c.training)?;
        }
        sol
    } else {
        train_sequence(&c.problem, &nodes, &c.training)?
    };
    checkpoint::save(&solution, &ckpt)?;
    record_run(&c, &out, Some(&solution))?;
    let truth = reference(&c, a.run.reference.as_deref(), &out)?;
    let report = emit(&c, &solution, &truth, &out.join("solution.csv"))?;
    print_report("train", &solution, &report);
    Ok(())
}

pub fn partition(a: PartitionArgs) -> Result<(), Failure> {
    let mut c = match (&a.config, &a.problem) {
        (Some(path), _) => parse_config(path)?,
        (None, Some(p)) => {
            let t = a.t_init.ok_or_else(|| Error::Config("`--T-init` is required without `--config`".into()))?;
            RunConfig::new(p, t)?
        }
        (None, None) => return Err(Error::Config("give `--config` or `--problem`".into()).into()),
    };
    if let Some(t) = a.t_init {
        if !(t > 0.0) {
            return Err(Error::Config(format!("`--T-init` must be > 0 (got {t})")).into());
        }
        c.horizon = t;
    }
    let (delta, m) = match c.schedule {
        Schedule::Adaptive { delta, m } => (a.delta.unwrap_or(delta), a.m.unwrap_or(m)),
        _ => (
            a.delta.ok_or_else(|| Error::Config("`--delta` is required".into()))?,
            a.m.unwrap_or(DEFAULT_PARTITION_M),
        ),
    };
    if !(delta > 0.0) {
        return Err(Error::Config(format!("`--delta` must be > 0 (got {delta})")).into());
    }
    c.schedule = Schedule::Adaptive { delta, m };
    if let Some(s) = a.seed {
        c.training.seed = s;
    }
    if let Some(p) = a.precision {
        c.training.precision = p;
    }
    if let Some(o) = a.out {
        c.out = Some(o);
    }
    let out = out_dir(&c);
    let _lock = OutputLock::acquire(&out)?;
    let nodes = resolve_nodes(&c, &out)?;
    record_run(&c, &out, None)?;
    println!(
        "partition: {} intervals of length {}",
        nodes.len() - 1,
        nodes.get(1).copied().unwrap_or(c.horizon)
    );
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> Result<(), Failure> {
    let solution = checkpoint::load(&a.checkpoint)?;
    let out = a
        .out
        .clone()
        .or_else(|| a.checkpoint.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    let _lock = OutputLock::acquire(&out)?;
    let mut c = RunConfig::new(solution.problem.name(), solution.end())?;
    c.problem = solution.problem.clone();
    c.eval_grid = (a.nx, a.nt);
    if a.nx < 2 || a.nt < 2 {
        return Err(Error::Config(format!("`--nx`/`--nt` must be at least 2 (got {}x{})", a.nx, a.nt)).into());
    }
    let truth = reference(&c, a.reference.as_deref(), &out)?;
    let report = emit(&c, &solution, &truth, &out.join("solution.csv"))?;
    print_report("evaluate", &solution, &report);
    Ok(())
}

pub fn oracle(a: OracleArgs) -> Result<(), Failure> {
    let mut c = match (&a.config, &a.problem) {
        (Some(path), _) => parse_config(path)?,
        (None, Some(p)) => RunConfig::new(p, a.horizon.unwrap_or(1.0))?,
        (None, None) => return Err(Error::Config("give `--config` or `--problem`".into()).into()),
    };
    if let Some(t) = a.horizon {
        c.horizon = t;
    }
    if let Some(nx) = a.nx {
        c.oracle.nx = nx;
    }
    if let Some(dt) = a.dt {
        c.oracle.dt = dt;
    }
    let grid = solve_spectral(&c.problem, &c.oracle.spectral(c.horizon))?;
    save_grid(&grid, &a.out)?;
    println!(
        "oracle: {} on {}x{} (x by t) up to t = {} -> {}",
        c.problem.name(),
        grid.nx(),
        grid.nt(),
        grid.t_hi,
        a.out.display()
    );
    Ok(())
}

/// One row of the comparison table.
#[derive(Clone, Debug)]
pub struct CompareRow {
    pub method: &'static str,
    pub intervals: usize,
    pub p: Vec<f64>,
    pub report: ErrorReport,
}

pub fn compare_table(rows: &[CompareRow]) -> String {
    let mut s = String::from("method\tintervals\tp\tl2_rel\tl1\tlinf\n");
    for r in rows {
        let p: Vec<String> = r.p.iter().map(|p| format!("{p:.4}")).collect();
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{:.4e}\t{:.4e}\t{:.4e}",
            r.method,
            r.intervals,
            if p.is_empty() { "-".into() } else { p.join(",") },
            r.report.norms.l2_rel,
            r.report.norms.l1,
            r.report.norms.linf
        );
    }
    s
}

/// Checks applied by `compare --assert`.
pub fn check_comparison(rows: &[CompareRow], max_l2: Option<f64>) -> Result<(), String> {
    let get = |m: &str| rows.iter().find(|r| r.method == m).map(|r| r.report.norms.l2_rel);
    let thc = get("thc").ok_or("no trainable-p run")?;
    let mut failed = Vec::new();
    for base in ["standard", "fhc"] {
        if let Some(e) = get(base) {
            if !(thc <= e) {
                failed.push(format!("thc error {thc:.4e} exceeds {base} error {e:.4e}"));
            }
        }
    }
    if let Some(m) = max_l2 {
        if !(thc <= m) {
            failed.push(format!("thc error {thc:.4e} exceeds the bound {m:.4e}"));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(failed.join("; "))
    }
}

pub fn compare(a: CompareArgs) -> Result<(), Failure> {
    let c = load_run(&a.run)?;
    let out = out_dir(&c);
    let _lock = OutputLock::acquire(&out)?;
    let nodes = resolve_nodes(&c, &out)?;
    let truth = reference(&c, a.run.reference.as_deref(), &out)?;
    let fixed = match c.training.p_choice {
        PChoice::Trainable => PChoice::Right,
        other => other,
    };
    let mut rows = Vec::new();
    let runs: [(&'static str, Vec<f64>, PChoice); 3] = [
        ("standard", vec![0.0, c.horizon], PChoice::Trainable),
        ("fhc", nodes.clone(), fixed),
        ("thc", nodes, PChoice::Trainable),
    ];
    for (method, nodes, p_choice) in runs {
        let mut training = c.training.clone();
        training.p_choice = p_choice;
        log::info!("compare: {method} on {} intervals", nodes.len() - 1);
        let sol = train_sequence(&c.problem, &nodes, &training)?;
        let dir = out.join(method);
        checkpoint::save(&sol, &dir.join("checkpoint"))?;
        let report = emit(&c, &sol, &truth, &dir.join("solution.csv"))?;
        print_report(method, &sol, &report);
        rows.push(CompareRow {
            method,
            intervals: sol.intervals.len(),
            p: sol.intervals.iter().filter_map(|iv| iv.p()).collect(),
            report,
        });
    }
    let table = compare_table(&rows);
    print!("{table}");
    write(&out.join("compare.tsv"), &table)?;
    record_run(&c, &out, None)?;
    if a.assert {
        check_comparison(&rows, a.max_l2).map_err(Failure::Assertion)?;
    }
    Ok(())
}
