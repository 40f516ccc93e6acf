//! The `monocov` command line.
//!
//! Exit codes: 0 all verdicts pass, 1 at least one FAIL, 2 a hypothesis was
//! not met (and nothing failed), 3 bad input or configuration.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::inequality::{
    check_cross_theorem, check_hierarchy, check_main_inequality, check_robertson_schrodinger, CrossDirection,
    HypothesisGrid, InequalityReport, Tolerances, Verdict,
};
use crate::instance::{sample_instance_with, Instance, InstanceFile};
use crate::monotone::{FopSpec, Kernel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

/// Environment variable overriding the default output directory of `sweep`.
pub const OUT_DIR_ENV: &str = "MONOCOV_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "monocov", version, about = "Monotone-metric covariances and determinant uncertainty checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one check on an instance file.
    Compute(ComputeArgs),
    /// Run a check over seeded random instances.
    Sweep(SweepArgs),
    /// Write the random instance a sweep trial would use.
    Sample(SampleArgs),
    /// List the built-in functions, kernels and checks.
    Catalog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckName {
    /// det Cov >= det qCov^s_f >= det qCov^as_f
    Hierarchy,
    /// det G1 >= det G2 + det(G1 - G2) + R for kernels --g1 >= --g2
    Main,
    /// mixed asymmetric/symmetric comparison of --f and --f2
    Cross,
    /// det Cov >= det of the commutator matrix
    Robertson,
    /// Robertson with exactly two observables
    Schrodinger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    AsGeqS,
    SGeqAs,
}

impl From<Direction> for CrossDirection {
    fn from(d: Direction) -> Self {
        match d {
            Direction::AsGeqS => CrossDirection::AsGeqS,
            Direction::SGeqAs => CrossDirection::SGeqAs,
        }
    }
}

/// Options shared by `compute` and `sweep`.
#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[arg(long, value_enum, default_value = "hierarchy")]
    pub check: CheckName,
    /// Function: sld, wy, km, wyd:<beta>, or wyd together with --beta.
    #[arg(long = "f", default_value = "sld")]
    pub f: String,
    /// Second function for the cross check.
    #[arg(long = "f2", default_value = "sld")]
    pub f2: String,
    /// Beta for a bare `wyd` in --f or --f2.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Dominating kernel for the main check: cl, s:<f>, as:<f>, inv:<f>.
    #[arg(long, default_value = "cl")]
    pub g1: String,
    /// Dominated kernel for the main check; defaults to as:<f>.
    #[arg(long)]
    pub g2: Option<String>,
    #[arg(long, value_enum, default_value = "s-geq-as")]
    pub direction: Direction,
    /// Relative determinant tolerance.
    #[arg(long = "tol-det", default_value_t = 1e-9)]
    pub tol_det: f64,
    /// Points in the log grid on [1e-6, 1e6] used for pointwise hypotheses.
    #[arg(long = "grid-points", default_value_t = 200)]
    pub grid_points: usize,
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    /// Instance JSON file.
    pub instance: PathBuf,
    #[command(flatten)]
    pub check: CheckArgs,
    /// Write the JSON-lines reports here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub check: CheckArgs,
    /// Dimension: `3`, `2,3,4` or `2..4` (inclusive).
    #[arg(long = "n", default_value = "2")]
    pub n: String,
    /// Number of observables, same syntax as --n.
    #[arg(long = "N", default_value = "2")]
    pub count: String,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    /// Base seed; trial i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Spectral floor passed to the state sampler.
    #[arg(long = "min-gap", default_value_t = 0.0)]
    pub min_gap: f64,
    /// Output directory for records.jsonl and summary.csv. Without it (and
    /// without MONOCOV_OUT_DIR) records go to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long = "n", default_value_t = 2)]
    pub n: usize,
    #[arg(long = "N", default_value_t = 2)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "min-gap", default_value_t = 0.0)]
    pub min_gap: f64,
}

/// A resolved check, ready to run on any instance.
#[derive(Debug, Clone)]
pub struct CheckPlan {
    pub name: CheckName,
    pub f: FopSpec,
    pub f2: FopSpec,
    pub g1: Kernel,
    pub g2: Kernel,
    pub direction: CrossDirection,
    pub grid: HypothesisGrid,
    pub tol: Tolerances,
}

fn resolve_fop(s: &str, beta: Option<f64>) -> Result<FopSpec, String> {
    if s.trim().eq_ignore_ascii_case("wyd") {
        let beta = beta.ok_or("`wyd` needs --beta or the form wyd:<beta>")?;
        return FopSpec::wyd(beta).map_err(|e| e.to_string());
    }
    s.parse().map_err(|e: crate::Error| e.to_string())
}

impl CheckPlan {
    pub fn from_args(a: &CheckArgs) -> Result<Self, String> {
        let f = resolve_fop(&a.f, a.beta)?;
        let f2 = resolve_fop(&a.f2, a.beta)?;
        let g1: Kernel = a.g1.parse().map_err(|e: crate::Error| e.to_string())?;
        let g2 = match &a.g2 {
            Some(s) => s.parse().map_err(|e: crate::Error| e.to_string())?,
            None => Kernel::AsymmetricF(f),
        };
        if !(a.tol_det > 0.0) {
            return Err(format!("--tol-det must be positive, got {}", a.tol_det));
        }
        Ok(CheckPlan {
            name: a.check,
            f,
            f2,
            g1,
            g2,
            direction: a.direction.into(),
            grid: HypothesisGrid::with_points(a.grid_points),
            tol: Tolerances {
                det_rel: a.tol_det,
                ..Default::default()
            },
        })
    }

    pub fn run(&self, inst: &Instance) -> crate::Result<Vec<InequalityReport>> {
        let (d, obs) = (&inst.density, &inst.observables);
        match self.name {
            CheckName::Hierarchy => check_hierarchy(d, self.f, obs, &self.grid, &self.tol),
            CheckName::Main => Ok(vec![check_main_inequality(d, &self.g1, &self.g2, obs, &self.grid, &self.tol)?]),
            CheckName::Cross => Ok(vec![check_cross_theorem(
                self.f, self.f2, d, obs, self.direction, &self.grid, &self.tol,
            )?]),
            CheckName::Robertson => Ok(vec![check_robertson_schrodinger(d, obs, &self.tol)?]),
            CheckName::Schrodinger => {
                if obs.len() != 2 {
                    return Err(crate::Error::Domain(format!(
                        "the Schrodinger check takes exactly 2 observables, got {}",
                        obs.len()
                    )));
                }
                Ok(vec![check_robertson_schrodinger(d, obs, &self.tol)?])
            }
        }
    }

    fn label(&self) -> String {
        format!("{:?}", self.name).to_lowercase()
    }
}

/// Exit code for a set of verdicts.
pub fn exit_code(verdicts: impl IntoIterator<Item = Verdict>) -> i32 {
    let mut code = EXIT_OK;
    for v in verdicts {
        match v {
            Verdict::Fail => return EXIT_FAIL,
            Verdict::HypothesisNotMet => code = EXIT_HYPOTHESIS,
            Verdict::Pass | Verdict::Warn => {}
        }
    }
    code
}

/// Parses `3`, `2,3,4` or `2..4`.
pub fn parse_range(s: &str) -> Result<Vec<usize>, String> {
    let s = s.trim();
    let bad = || format!("cannot parse `{s}` as a value, list or range");
    let vals: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if vals.is_empty() {
        return Err(bad());
    }
    Ok(vals)
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Compute(a) => cmd_compute(&a, out, err),
        Command::Sweep(a) => cmd_sweep(&a, out, err),
        Command::Sample(a) => cmd_sample(&a, out),
        Command::Catalog => cmd_catalog(out).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INPUT
        }
    }
}

fn cmd_compute(a: &ComputeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, String> {
    let plan = CheckPlan::from_args(&a.check)?;
    let text = fs::read_to_string(&a.instance).map_err(|e| format!("{}: {e}", a.instance.display()))?;
    let inst = InstanceFile::parse(&text)
        .and_then(|f| f.validate())
        .map_err(|e| format!("{}: {e}", a.instance.display()))?;
    let reports = match plan.run(&inst) {
        Ok(r) => r,
        Err(e @ crate::Error::Domain(_)) => return Err(e.to_string()),
        Err(e) => {
            let _ = writeln!(err, "{}: {e}", plan.label());
            return Ok(EXIT_FAIL);
        }
    };
    let mut lines = String::new();
    for r in &reports {
        lines.push_str(&serde_json::to_string(r).map_err(|e| e.to_string())?);
        lines.push('\n');
    }
    match &a.out {
        Some(p) => fs::write(p, &lines).map_err(|e| format!("{}: {e}", p.display()))?,
        None => out.write_all(lines.as_bytes()).map_err(|e| e.to_string())?,
    }
    for r in &reports {
        let _ = writeln!(err, "{}: lhs={:e} rhs={:e} margin={:e} {}", r.check, r.lhs, r.rhs, r.margin, r.verdict);
    }
    Ok(exit_code(reports.iter().map(|r| r.verdict)))
}

/// One JSON line of a sweep: a report, or an error the check raised. FAIL
/// records carry the instance so they can be replayed with `compute`.
#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum SweepRecord {
    Report {
        #[serde(flatten)]
        report: Box<InequalityReport>,
        #[serde(skip_serializing_if = "Option::is_none")]
        instance: Option<InstanceFile>,
    },
    Error {
        check: String,
        n: usize,
        #[serde(rename = "N")]
        count: usize,
        seed: u64,
        error: String,
        verdict: Verdict,
        instance: Option<InstanceFile>,
    },
}

impl SweepRecord {
    pub fn verdict(&self) -> Verdict {
        match self {
            SweepRecord::Report { report, .. } => report.verdict,
            SweepRecord::Error { verdict, .. } => *verdict,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub plan_args: CheckArgs,
    pub dims: Vec<usize>,
    pub counts: Vec<usize>,
    pub trials: u64,
    pub seed: u64,
    pub min_gap: f64,
}

impl SweepConfig {
    pub fn from_args(a: &SweepArgs) -> Result<Self, String> {
        let dims = parse_range(&a.n)?;
        let counts = parse_range(&a.count)?;
        if dims.iter().any(|&n| n < 2) {
            return Err("--n values must be at least 2".into());
        }
        if counts.iter().any(|&c| c < 1) {
            return Err("--N values must be at least 1".into());
        }
        if a.trials < 1 {
            return Err("--trials must be at least 1".into());
        }
        if !(a.min_gap >= 0.0) {
            return Err("--min-gap must be nonnegative".into());
        }
        Ok(SweepConfig {
            plan_args: a.check.clone(),
            dims,
            counts,
            trials: a.trials,
            seed: a.seed,
            min_gap: a.min_gap,
        })
    }

    /// `(n, N, seed)` of trial `i`.
    pub fn trial(&self, i: u64) -> (usize, usize, u64) {
        let nd = self.dims.len() as u64;
        let n = self.dims[(i % nd) as usize];
        let count = self.counts[((i / nd) % self.counts.len() as u64) as usize];
        (n, count, self.seed.wrapping_add(i))
    }
}

/// Runs every trial; records come back in trial order whatever the
/// scheduling.
pub fn run_sweep(cfg: &SweepConfig, plan: &CheckPlan) -> Vec<Vec<SweepRecord>> {
    (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let (n, count, seed) = cfg.trial(i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = match sample_instance_with(&mut rng, n, count, cfg.min_gap) {
                Ok(inst) => inst,
                Err(e) => {
                    return vec![SweepRecord::Error {
                        check: plan.label(),
                        n,
                        count,
                        seed,
                        error: e.to_string(),
                        verdict: Verdict::Fail,
                        instance: None,
                    }]
                }
            };
            let file = || Some(InstanceFile::from_parts(&inst.density, &inst.observables));
            match plan.run(&inst) {
                Ok(reports) => reports
                    .into_iter()
                    .map(|r| {
                        let failed = r.verdict == Verdict::Fail;
                        SweepRecord::Report {
                            report: Box::new(r.with_seed(seed)),
                            instance: if failed { file() } else { None },
                        }
                    })
                    .collect(),
                Err(e) => vec![SweepRecord::Error {
                    check: plan.label(),
                    n,
                    count,
                    seed,
                    error: e.to_string(),
                    verdict: Verdict::Fail,
                    instance: file(),
                }],
            }
        })
        .collect()
}

/// Seventeen significant digits: enough to round-trip any double.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(records: &[SweepRecord], w: W) -> Result<(), String> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["check", "n", "N", "f1", "f2", "seed", "lhs", "rhs", "margin", "verdict"])
        .map_err(|e| e.to_string())?;
    for rec in records {
        let row: Vec<String> = match rec {
            SweepRecord::Report { report: r, .. } => vec![
                r.check.clone(),
                r.n.to_string(),
                r.count.to_string(),
                r.f1.clone().or_else(|| r.g1.clone()).unwrap_or_default(),
                r.f2.clone().or_else(|| r.g2.clone()).unwrap_or_default(),
                r.seed.map(|s| s.to_string()).unwrap_or_default(),
                num(r.lhs),
                num(r.rhs),
                num(r.margin),
                r.verdict.to_string(),
            ],
            SweepRecord::Error {
                check,
                n,
                count,
                seed,
                verdict,
                ..
            } => vec![
                check.clone(),
                n.to_string(),
                count.to_string(),
                String::new(),
                String::new(),
                seed.to_string(),
                String::new(),
                String::new(),
                String::new(),
                verdict.to_string(),
            ],
        };
        wr.write_record(&row).map_err(|e| e.to_string())?;
    }
    wr.flush().map_err(|e| e.to_string())
}

pub fn write_jsonl<W: Write>(records: &[SweepRecord], mut w: W) -> Result<(), String> {
    for rec in records {
        serde_json::to_writer(&mut w, rec).map_err(|e| e.to_string())?;
        w.write_all(b"\n").map_err(|e| e.to_string())?;
    }
    Ok(())
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct SweepSummary {
    pub pass: usize,
    pub fail: usize,
    pub hypothesis_not_met: usize,
    pub warn: usize,
    pub min_margin: Option<(f64, u64)>,
}

impl SweepSummary {
    pub fn of(records: &[SweepRecord]) -> Self {
        let mut s = SweepSummary::default();
        for rec in records {
            match rec.verdict() {
                Verdict::Pass => s.pass += 1,
                Verdict::Fail => s.fail += 1,
                Verdict::HypothesisNotMet => s.hypothesis_not_met += 1,
                Verdict::Warn => s.warn += 1,
            }
            if let SweepRecord::Report { report: r, .. } = rec {
                if r.verdict != Verdict::HypothesisNotMet && s.min_margin.is_none_or(|(m, _)| r.margin < m) {
                    s.min_margin = Some((r.margin, r.seed.unwrap_or_default()));
                }
            }
        }
        s
    }
}

impl std::fmt::Display for SweepSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "pass={} fail={} hypothesis_not_met={} warn={}",
            self.pass, self.fail, self.hypothesis_not_met, self.warn
        )?;
        if let Some((m, seed)) = self.min_margin {
            write!(f, " min_margin={m:e} (seed {seed})")?;
        }
        Ok(())
    }
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, String> {
    let cfg = SweepConfig::from_args(a)?;
    let plan = CheckPlan::from_args(&cfg.plan_args)?;
    if plan.name == CheckName::Schrodinger && cfg.counts != [2] {
        return Err("the schrodinger check needs --N 2".into());
    }
    let records: Vec<SweepRecord> = run_sweep(&cfg, &plan).into_iter().flatten().collect();
    let summary = SweepSummary::of(&records);

    let dir = a.out.clone().or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from));
    let want_json = matches!(a.format, Format::Json | Format::Both);
    let want_csv = matches!(a.format, Format::Csv | Format::Both);
    match dir {
        Some(dir) => {
            fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            if want_json {
                write_file(&dir.join("records.jsonl"), |w| write_jsonl(&records, w))?;
            }
            if want_csv {
                write_file(&dir.join("summary.csv"), |w| write_csv(&records, w))?;
            }
            writeln!(out, "{summary}").map_err(|e| e.to_string())?;
        }
        None => {
            if want_json {
                write_jsonl(&records, &mut *out)?;
            }
            if want_csv {
                write_csv(&records, &mut *out)?;
            }
            writeln!(err, "{summary}").map_err(|e| e.to_string())?;
        }
    }
    Ok(if summary.fail == 0 { EXIT_OK } else { EXIT_FAIL })
}

fn write_file(path: &Path, body: impl FnOnce(&mut std::io::BufWriter<fs::File>) -> Result<(), String>) -> Result<(), String> {
    let f = fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut w = std::io::BufWriter::new(f);
    body(&mut w)?;
    w.flush().map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_sample(a: &SampleArgs, out: &mut dyn Write) -> Result<i32, String> {
    if a.n < 2 || a.count < 1 {
        return Err("need --n >= 2 and --N >= 1".into());
    }
    let inst = crate::instance::sample_instance(a.n, a.count, a.seed, a.min_gap).map_err(|e| e.to_string())?;
    let file = InstanceFile::from_parts(&inst.density, &inst.observables);
    writeln!(out, "{}", file.to_json()).map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}

pub fn cmd_catalog(out: &mut dyn Write) -> Result<(), String> {
    let mut s = String::new();
    s.push_str("functions:\n");
    for (name, formula) in [("sld", "(1 + x) / 2"), ("wy", "(sqrt(x) + 1)^2 / 4"), ("km", "(x - 1) / ln x")] {
        let f: FopSpec = name.parse().map_err(|e: crate::Error| e.to_string())?;
        s.push_str(&format!(
            "  {name:<12} f(0)={:<6} {:<12} {formula}\n",
            f.f_zero(),
            if f.is_regular() { "regular" } else { "non-regular" }
        ));
    }
    s.push_str(
        "  wyd:<beta>   f(0)=beta(1-beta) for beta in (0,1), else 0   \
         beta(1-beta)(x-1)^2 / ((x^beta - 1)(x^(1-beta) - 1)); beta in [-1,2], \
         beta=0,1 taken as the km limit; regular only for beta in (0,1)\n",
    );
    s.push_str("kernels:\n");
    s.push_str("  cl           (x + y) / 2\n");
    s.push_str("  s:<f>        f(0) (x + y)^2 / (2 m_f(x, y))\n");
    s.push_str("  as:<f>       f(0) (x - y)^2 / (2 m_f(x, y))\n");
    s.push_str("  inv:<f>      1 / m_f(x, y)\n");
    s.push_str("checks:\n");
    for c in CheckName::value_variants() {
        let pv = c.to_possible_value().expect("no skipped variants");
        s.push_str(&format!("  {:<12} {}\n", pv.get_name(), pv.get_help().map(|h| h.to_string()).unwrap_or_default()));
    }
    out.write_all(s.as_bytes()).map_err(|e| e.to_string())
}
