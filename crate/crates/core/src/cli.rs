//! Command-line interface.
//!
//! Every subcommand writes its artifacts into `--out` under names built from
//! the subcommand and the seed, and embeds the full [`RunConfig`] in each JSON
//! report. Outputs depend only on the arguments.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dimension::{
    dimension_report, reference_reports, reports_text, DimensionReport, REFERENCE_ROWS,
};
use crate::em::{em_fit, finish_fit, seeded_start, EmConfig, FitResult};
use crate::error::{Error, Result};
use crate::geometry::{
    max_minor_residual, profile_loglik_grid, swiss_surface_point_paired, swiss_surface_residual,
    Peak, PeakKind, ProfileAxis, ProfileConfig, SwissPairing,
};
use crate::model::{accounting_map, independence_fit, ModelSpec};
use crate::newton::{newton_fit_traced, NewtonConfig, NewtonOutcome};
use crate::symmetry::{
    bic_with_dimension, multistart_explore, verify_conjecture_with, ConjectureReport, ExploreConfig,
};
use crate::tables::{load_table_file, ContingencyTable};
use crate::{fixtures, symmetry};

/// Verification failure, e.g. a false conjecture verdict under `--assert`.
pub const EXIT_VERIFICATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "lcm",
    version,
    about = "Latent class models for contingency tables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Fit a latent class model by EM and/or modified Newton.
    Fit(FitArgs),
    /// Standard, complete, expected and effective dimensions.
    Dims(DimsArgs),
    /// Profile log-likelihood grid over two conditional coordinates.
    Profile(ProfileArgs),
    /// Sweep the explicit non-identifiable surface of the 4x4 symmetric table.
    Swiss(SwissArgs),
    /// Check the block-diagonal maximizer for constant-diagonal tables.
    Conjecture(ConjectureArgs),
    /// BIC from a stated log-likelihood.
    Bic(BicArgs),
    /// Multistart enumeration of critical points.
    Explore(ExploreArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Dims(_) => "dims",
            Command::Profile(_) => "profile",
            Command::Swiss(_) => "swiss",
            Command::Conjecture(_) => "conjecture",
            Command::Bic(_) => "bic",
            Command::Explore(_) => "explore",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Directory receiving the reports.
    #[arg(long, default_value = "lcm-out")]
    pub out: PathBuf,
    /// Seed for every random choice.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EmArgs {
    #[arg(long, default_value_t = 10_000)]
    pub max_iterations: usize,
    /// Relative log-likelihood change tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
    /// Absolute parameter change tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub param_tol: f64,
}

impl EmArgs {
    fn config(&self, seed: u64) -> Result<EmConfig> {
        let cfg = EmConfig {
            max_iterations: self.max_iterations,
            rel_tol: self.rel_tol,
            param_tol: self.param_tol,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Em,
    Newton,
    /// EM followed by Newton from the EM solution.
    Both,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Table file (JSON `{dims, counts}` or CSV matrix) or a bundled name.
    #[arg(long)]
    pub table: String,
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    #[arg(long, value_enum, default_value_t = Algo::Em)]
    pub algo: Algo,
    /// Random starts; more than one also reports the distinct critical points.
    #[arg(long, default_value_t = 1)]
    pub starts: usize,
    #[command(flatten)]
    pub em: EmArgs,
    /// Newton gradient-norm tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = 500)]
    pub newton_max_iterations: usize,
    /// Also write the per-iteration Newton trace as CSV.
    #[arg(long)]
    pub trace: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DimsArgs {
    /// Run every reference row and compare against the reference values.
    #[arg(long)]
    pub table1: bool,
    /// Category counts, e.g. `4,5` or `2x16` for sixteen binary variables.
    #[arg(long)]
    pub dims: Option<String>,
    #[arg(long)]
    pub r: Option<usize>,
    /// Random Jacobian evaluations per model.
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProfileArgs {
    #[arg(long)]
    pub table: String,
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    /// Fixed coordinate, e.g. `a31=0.2` (variable letter, category, class).
    #[arg(long, default_value = "a31=0.2")]
    pub pin: String,
    /// First grid coordinate.
    #[arg(long, default_value = "a11")]
    pub x: String,
    /// Second grid coordinate.
    #[arg(long, default_value = "a21")]
    pub y: String,
    /// Nodes per axis.
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
    #[arg(long, default_value_t = 1.0 / 60.0)]
    pub lo: f64,
    #[arg(long, default_value_t = 50.0 / 60.0)]
    pub hi: f64,
    /// Seeded EM runs per node.
    #[arg(long, default_value_t = 10)]
    pub starts: usize,
    /// Multiply every count by this factor first.
    #[arg(long, default_value_t = 1)]
    pub scale: u64,
    #[arg(long, default_value_t = 5_000)]
    pub max_iterations: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SwissArgs {
    /// Nodes per axis of the (alpha11, beta11) sweep.
    #[arg(long, default_value_t = 20)]
    pub grid: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConjectureArgs {
    #[arg(long)]
    pub n: usize,
    /// Diagonal count.
    #[arg(long, default_value_t = 4)]
    pub x: u64,
    /// Off-diagonal count.
    #[arg(long, default_value_t = 2)]
    pub y: u64,
    #[arg(long, default_value_t = 2000)]
    pub starts: usize,
    /// Exit with status 4 when the verdict is false.
    #[arg(long)]
    pub assert: bool,
    #[command(flatten)]
    pub em: EmArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BicArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub loglik: f64,
    /// Category counts, e.g. `2x16`.
    #[arg(long)]
    pub dims: String,
    #[arg(long)]
    pub r: usize,
    /// Sample size.
    #[arg(long = "N")]
    pub n: u64,
    /// Use this dimension instead of the standard one.
    #[arg(long)]
    pub dimension: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExploreArgs {
    #[arg(long)]
    pub table: String,
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    #[arg(long, default_value_t = 500)]
    pub starts: usize,
    /// Alternate random starts with block-constant symmetric ones.
    #[arg(long)]
    pub symmetric_starts: bool,
    /// Keep raw EM terminal points without Newton refinement.
    #[arg(long)]
    pub no_polish: bool,
    #[arg(long, default_value_t = 1e-5)]
    pub dedup_tol: f64,
    #[command(flatten)]
    pub em: EmArgs,
    #[command(flatten)]
    pub common: Common,
}

/// Everything needed to rerun a command, embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub seed: u64,
    pub version: String,
    pub args: Command,
}

impl RunConfig {
    pub fn new(command: &Command) -> Self {
        Self {
            subcommand: command.name().to_string(),
            seed: common(command).seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            args: command.clone(),
        }
    }
}

fn common(command: &Command) -> &Common {
    match command {
        Command::Fit(a) => &a.common,
        Command::Dims(a) => &a.common,
        Command::Profile(a) => &a.common,
        Command::Swiss(a) => &a.common,
        Command::Conjecture(a) => &a.common,
        Command::Bic(a) => &a.common,
        Command::Explore(a) => &a.common,
    }
}

/// Outcome of a successful command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    /// Human-readable summary for standard output.
    pub summary: String,
    /// False when a requested verification did not hold.
    pub verified: bool,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    config: &'a RunConfig,
    result: T,
}

struct Writer<'a> {
    dir: &'a Path,
    stem: String,
    config: &'a RunConfig,
    written: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(config: &'a RunConfig, dir: &'a Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir,
            stem: format!("{}-seed{}", config.subcommand, config.seed),
            config,
            written: Vec::new(),
        })
    }

    fn json<T: Serialize>(&mut self, suffix: &str, result: T) -> Result<()> {
        let report = Report {
            config: self.config,
            result,
        };
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        self.file(&format!("{suffix}.json"), &text)
    }

    /// CSV preceded by `#` comment lines carrying the run configuration.
    fn csv(&mut self, suffix: &str, body: &str) -> Result<()> {
        let config = serde_json::to_string(self.config)?;
        let text = format!("# config: {config}\n# seed: {}\n{body}", self.config.seed);
        self.file(&format!("{suffix}.csv"), &text)
    }

    fn file(&mut self, suffix: &str, text: &str) -> Result<()> {
        let name = if suffix.starts_with('.') {
            format!("{}{suffix}", self.stem)
        } else {
            format!("{}-{suffix}", self.stem)
        };
        let path = self.dir.join(name);
        std::fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }

    fn finish(self, summary: String, verified: bool) -> Outcome {
        Outcome {
            written: self.written,
            summary,
            verified,
        }
    }
}

/// Reads a table file, falling back to the bundled tables by name.
pub fn resolve_table(name: &str) -> Result<ContingencyTable> {
    let path = Path::new(name);
    if path.exists() {
        return load_table_file(path);
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(name);
    fixtures::by_name(stem).ok_or_else(|| {
        Error::InvalidArgument(format!("no table file or bundled table named {name:?}"))
    })
}

/// Parses `4,5`, `2x16` or mixtures such as `3,2x4`.
pub fn parse_dims(s: &str) -> Result<Vec<usize>> {
    let bad = || {
        Error::InvalidArgument(format!(
            "cannot parse dims {s:?}; expected e.g. 4,5 or 2x16"
        ))
    };
    let mut dims = Vec::new();
    for part in s.split(',').map(str::trim) {
        let (d, times): (usize, usize) = match part.split_once('x') {
            Some((d, k)) => (
                d.trim().parse().map_err(|_| bad())?,
                k.trim().parse().map_err(|_| bad())?,
            ),
            None => (part.parse().map_err(|_| bad())?, 1usize),
        };
        dims.extend(std::iter::repeat_n(d, times));
    }
    if dims.is_empty() {
        return Err(bad());
    }
    Ok(dims)
}

/// Parses `a31=0.2`.
pub fn parse_pin(s: &str) -> Result<(ProfileAxis, f64)> {
    let (coord, value) = s.split_once('=').ok_or_else(|| {
        Error::InvalidArgument(format!("cannot parse pin {s:?}; expected e.g. a31=0.2"))
    })?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("pin value {value:?} is not a number")))?;
    Ok((ProfileAxis::parse(coord.trim())?, value))
}

/// Runs one parsed command.
pub fn run(command: &Command) -> Result<Outcome> {
    let config = RunConfig::new(command);
    let mut w = Writer::new(&config, &common(command).out)?;
    match command {
        Command::Fit(a) => cmd_fit(a, &mut w),
        Command::Dims(a) => cmd_dims(a, &mut w),
        Command::Profile(a) => cmd_profile(a, &mut w),
        Command::Swiss(a) => cmd_swiss(a, &mut w),
        Command::Conjecture(a) => cmd_conjecture(a, &mut w),
        Command::Bic(a) => cmd_bic(a, &mut w),
        Command::Explore(a) => cmd_explore(a, &mut w),
    }
    .map(|(summary, verified)| w.finish(summary, verified))
}

/// Parses `args` (program name first), runs the command, prints the summary
/// and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for path in &outcome.written {
                println!("wrote {}", path.display());
            }
            if outcome.verified {
                0
            } else {
                eprintln!("verification failed");
                EXIT_VERIFICATION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

type CmdResult = Result<(String, bool)>;

#[derive(Serialize)]
struct FitReport<'a> {
    table: &'a ContingencyTable,
    best: &'a FitResult,
    em: Option<&'a FitResult>,
    newton: Option<&'a FitResult>,
    newton_iterations: Option<usize>,
    /// Distinct critical points when more than one start was used.
    critical_points: Option<&'a symmetry::CriticalPointSet>,
}

fn fitted_csv(t: &ContingencyTable, fit: &FitResult) -> String {
    let mut out = String::new();
    for l in 0..t.n_axes() {
        out.push_str(&format!("x{},", l + 1));
    }
    out.push_str("observed,fitted\n");
    let fitted = fit.fitted_counts(t);
    for (cell, idx) in crate::tables::cells(t.dims()).enumerate() {
        for i in idx {
            out.push_str(&format!("{i},"));
        }
        out.push_str(&format!("{},{}\n", t.counts()[cell], fitted[cell]));
    }
    out
}

fn cmd_fit(a: &FitArgs, w: &mut Writer) -> CmdResult {
    let t = resolve_table(&a.table)?;
    let spec = ModelSpec::for_table(&t, a.r)?;
    let seed = a.common.seed;
    let em_cfg = a.em.config(seed)?;
    let newton_cfg = NewtonConfig {
        max_iterations: a.newton_max_iterations,
        grad_tol: a.grad_tol,
        ..NewtonConfig::default()
    };
    newton_cfg.validate()?;
    if a.starts == 0 {
        return Err(Error::InvalidArgument("need at least one start".into()));
    }
    let set = if a.starts > 1 {
        let cfg = ExploreConfig {
            n_starts: a.starts,
            seed,
            em: em_cfg,
            polish: a.algo != Algo::Em,
            ..ExploreConfig::default()
        };
        Some(multistart_explore(&t, &spec, &cfg)?)
    } else {
        None
    };
    let start = if a.r == 1 {
        independence_fit(&t)
    } else {
        seeded_start(&spec, seed, 0)
    };
    let (em, newton): (Option<FitResult>, Option<NewtonOutcome>) = match (&set, a.algo) {
        (Some(s), _) => (s.best().map(|p| p.representative.clone()), None),
        (None, Algo::Em) => (Some(em_fit(&start, &t, &em_cfg)?), None),
        (None, Algo::Newton) => (None, Some(newton_fit_traced(&start, &t, &newton_cfg)?)),
        (None, Algo::Both) => {
            let em = em_fit(&start, &t, &em_cfg)?;
            let nr = newton_fit_traced(&em.theta, &t, &newton_cfg)?;
            (Some(em), Some(nr))
        }
    };
    let best = match (&em, &newton) {
        (_, Some(nr)) => nr.fit.clone(),
        (Some(em), None) => em.clone(),
        (None, None) => {
            let fallback = finish_fit(start, &t, 0, false)?;
            return Err(Error::InvalidArgument(format!(
                "no start reached a critical point (last loglik {})",
                fallback.loglik
            )));
        }
    };
    w.json(
        "report",
        FitReport {
            table: &t,
            best: &best,
            em: em.as_ref(),
            newton: newton.as_ref().map(|o| &o.fit),
            newton_iterations: newton.as_ref().map(|o| o.trace.len()),
            critical_points: set.as_ref(),
        },
    )?;
    w.csv("fitted", &fitted_csv(&t, &best))?;
    if let (true, Some(nr)) = (a.trace, &newton) {
        w.csv("trace", &nr.trace_csv())?;
    }
    let mut summary = format!(
        "loglik {:.6}  classification {:?}  iterations {}  gradient {:?}\n",
        best.loglik, best.classification, best.iterations, best.gradient_norm
    );
    if let Some(s) = &set {
        summary.push_str(&s.summary_text());
    }
    Ok((summary, true))
}

#[derive(Serialize)]
struct DimsReport {
    reports: Vec<DimensionReport>,
    /// Rows disagreeing with the reference values, for `--table1`.
    mismatches: Vec<usize>,
}

fn cmd_dims(a: &DimsArgs, w: &mut Writer) -> CmdResult {
    let seed = a.common.seed;
    let (reports, mismatches) = if a.table1 {
        let reports = reference_reports(a.samples, seed);
        let mismatches: Vec<usize> = reports
            .iter()
            .zip(REFERENCE_ROWS.iter())
            .enumerate()
            .filter(|(_, (rep, &(_, _, eff, std, comp, def)))| {
                (rep.effective, rep.standard, rep.complete, rep.deficiency) != (eff, std, comp, def)
            })
            .map(|(i, _)| i)
            .collect();
        (reports, mismatches)
    } else {
        let dims = a
            .dims
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("give --table1 or --dims with --r".into()))?;
        let r =
            a.r.ok_or_else(|| Error::InvalidArgument("--dims needs --r".into()))?;
        let spec = ModelSpec::new(parse_dims(dims)?, r)?;
        (vec![dimension_report(&spec, a.samples, seed)], Vec::new())
    };
    let text = reports_text(&reports);
    let mut csv = String::from("dims,r,effective,standard,complete,expected,deficiency\n");
    for rep in &reports {
        let dims: Vec<String> = rep.dims.iter().map(usize::to_string).collect();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            dims.join("x"),
            rep.r,
            rep.effective,
            rep.standard,
            rep.complete,
            rep.expected,
            rep.deficiency
        ));
    }
    w.csv("table", &csv)?;
    let ok = mismatches.is_empty();
    w.json(
        "report",
        DimsReport {
            reports,
            mismatches,
        },
    )?;
    Ok((text, ok))
}

#[derive(Serialize)]
struct ProfileReport {
    config: ProfileConfig,
    max_value: f64,
    global_peaks: usize,
    local_peaks: usize,
    peaks: Vec<Peak>,
}

fn cmd_profile(a: &ProfileArgs, w: &mut Writer) -> CmdResult {
    let t = resolve_table(&a.table)?.scaled(a.scale);
    let spec = ModelSpec::for_table(&t, a.r)?;
    let (fixed, fixed_value) = parse_pin(&a.pin)?;
    let cfg = ProfileConfig {
        x: ProfileAxis::parse(&a.x)?,
        y: ProfileAxis::parse(&a.y)?,
        fixed,
        fixed_value,
        resolution: a.grid,
        lo: a.lo,
        hi: a.hi,
        starts_per_node: a.starts,
        seed: a.common.seed,
        em: EmConfig {
            max_iterations: a.max_iterations,
            ..EmConfig::default()
        },
    };
    let grid = profile_loglik_grid(&t, &spec, &cfg)?;
    let peaks = grid.peaks();
    let count = |k: PeakKind| peaks.iter().filter(|p| p.kind == k).count();
    let (global_peaks, local_peaks) = (count(PeakKind::Global), count(PeakKind::Local));
    let mut summary = format!(
        "{} peaks ({global_peaks} global, {local_peaks} local), max {:.6}\n",
        peaks.len(),
        grid.max_value()
    );
    for p in &peaks {
        summary.push_str(&format!(
            "  ({:.4}, {:.4}) {:.6} {:?}\n",
            p.x, p.y, p.value, p.kind
        ));
    }
    w.csv("grid", &grid.to_csv())?;
    w.json(
        "peaks",
        ProfileReport {
            max_value: grid.max_value(),
            config: cfg,
            global_peaks,
            local_peaks,
            peaks,
        },
    )?;
    Ok((summary, true))
}

#[derive(Serialize)]
struct SwissReport {
    points: usize,
    out_of_domain: usize,
    max_surface_residual: f64,
    max_table_error: f64,
    max_minor_residual: f64,
}

fn cmd_swiss(a: &SwissArgs, w: &mut Writer) -> CmdResult {
    if a.grid < 2 {
        return Err(Error::InvalidArgument(
            "--grid needs at least 2 nodes".into(),
        ));
    }
    let mut csv = String::from(
        "pairing,alpha11,beta11,lambda1,alpha12,beta12,surface_residual,table_error\n",
    );
    let mut report = SwissReport {
        points: 0,
        out_of_domain: 0,
        max_surface_residual: 0.0,
        max_table_error: 0.0,
        max_minor_residual: 0.0,
    };
    let nodes: Vec<f64> = (0..a.grid)
        .map(|i| 0.5 * (i as f64 + 0.5) / a.grid as f64)
        .collect();
    for pairing in SwissPairing::ALL {
        let sigma = pairing.permutation();
        for &x in &nodes {
            for &y in &nodes {
                let Ok(theta) = swiss_surface_point_paired(x, y, pairing) else {
                    report.out_of_domain += 1;
                    continue;
                };
                let base = theta
                    .permute_categories(0, sigma.inverse().images())
                    .permute_categories(1, sigma.inverse().images());
                let residual = swiss_surface_residual(&base).abs();
                let p = accounting_map(&theta, &theta.spec())?;
                let err =
                    p.p.iter()
                        .enumerate()
                        .map(|(c, &v)| {
                            let (i, j) = (sigma.apply(c / 4), sigma.apply(c % 4));
                            let target = if (i < 2) == (j < 2) {
                                3.0 / 40.0
                            } else {
                                2.0 / 40.0
                            };
                            (v - target).abs()
                        })
                        .fold(0.0, f64::max);
                let m = nalgebra::DMatrix::from_row_slice(4, 4, &p.p);
                report.points += 1;
                report.max_surface_residual = report.max_surface_residual.max(residual);
                report.max_table_error = report.max_table_error.max(err);
                report.max_minor_residual =
                    report.max_minor_residual.max(max_minor_residual(&m, 2));
                csv.push_str(&format!(
                    "{:?},{x},{y},{},{},{},{residual:e},{err:e}\n",
                    pairing, base.lambda[0], base.cond[0][1][0], base.cond[1][1][0]
                ));
            }
        }
    }
    let summary = format!(
        "{} surface points ({} nodes out of domain); max residual {:e}, max table error {:e}\n",
        report.points, report.out_of_domain, report.max_surface_residual, report.max_table_error
    );
    w.csv("surface", &csv)?;
    w.json("report", report)?;
    Ok((summary, true))
}

fn cmd_conjecture(a: &ConjectureArgs, w: &mut Writer) -> CmdResult {
    let cfg = ExploreConfig {
        n_starts: a.starts,
        seed: a.common.seed,
        em: a.em.config(a.common.seed)?,
        ..ExploreConfig::default()
    };
    let report: ConjectureReport = verify_conjecture_with(a.n, a.x, a.y, &cfg)?;
    let summary = format!(
        "n {} x {} y {}: verdict {}  best {:.8}  conjectured {:.8}\n",
        a.n, a.x, a.y, report.verdict, report.best_loglik, report.conjecture_loglik
    );
    let verdict = report.verdict;
    w.json("report", report)?;
    Ok((summary, verdict || !a.assert))
}

#[derive(Serialize)]
struct BicReport {
    dims: Vec<usize>,
    r: usize,
    n: u64,
    loglik: f64,
    dimension: usize,
    bic: f64,
}

fn cmd_bic(a: &BicArgs, w: &mut Writer) -> CmdResult {
    let spec = ModelSpec::new(parse_dims(&a.dims)?, a.r)?;
    if a.n == 0 {
        return Err(Error::InvalidArgument("--N must be positive".into()));
    }
    let dimension = a.dimension.unwrap_or_else(|| spec.standard_dimension());
    let bic = bic_with_dimension(a.loglik, dimension, a.n);
    let summary = format!("BIC {bic:.5} (dimension {dimension}, N {})\n", a.n);
    w.json(
        "report",
        BicReport {
            dims: spec.dims.clone(),
            r: a.r,
            n: a.n,
            loglik: a.loglik,
            dimension,
            bic,
        },
    )?;
    Ok((summary, true))
}

fn cmd_explore(a: &ExploreArgs, w: &mut Writer) -> CmdResult {
    let t = resolve_table(&a.table)?;
    let spec = ModelSpec::for_table(&t, a.r)?;
    let cfg = ExploreConfig {
        n_starts: a.starts,
        seed: a.common.seed,
        em: a.em.config(a.common.seed)?,
        polish: !a.no_polish,
        symmetric_starts: a.symmetric_starts,
        dedup_tol: a.dedup_tol,
    };
    let set = multistart_explore(&t, &spec, &cfg)?;
    let mut csv = String::from("rank,loglik,classification,multiplicity,first_run\n");
    for (k, p) in set.points.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{:?},{},{}\n",
            k + 1,
            p.loglik,
            p.classification,
            p.multiplicity,
            p.first_run
        ));
    }
    let summary = set.summary_text();
    w.csv("points", &csv)?;
    w.json("report", &set)?;
    Ok((summary, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_shorthand() {
        assert_eq!(parse_dims("4,5").unwrap(), vec![4, 5]);
        assert_eq!(parse_dims("2x16").unwrap(), vec![2; 16]);
        assert_eq!(parse_dims("3, 2x2").unwrap(), vec![3, 2, 2]);
        assert!(parse_dims("4,,5").is_err());
    }

    #[test]
    fn pins() {
        let (axis, v) = parse_pin("a31=0.2").unwrap();
        assert_eq!(axis, ProfileAxis::new(0, 0, 2));
        assert_eq!(v, 0.2);
        assert!(parse_pin("a31").is_err());
    }

    #[test]
    fn bad_arguments_exit_with_two() {
        assert_eq!(main_with_args(["lcm", "bic", "--loglik", "x"]), 2);
        assert_eq!(main_with_args(["lcm", "fit"]), 2);
    }
}
