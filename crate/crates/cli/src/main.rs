use clap::{Args, Parser, Subcommand};
use conjset::geometry::{metric_from_morse_sturm, verify_geometry, Causal, DEFAULT_FD_STEP};
use conjset::io::{self, MetricFile, ReductionFile, SystemFile};
use conjset::prescribe::{build_prescribed_with, ClosedSetDescriptor, PrescribeOptions};
use conjset::sds::{conjugate_instants_with, to_morse_sturm_report, DetectOptions, MorseSturm, SympDiffSystem};
use conjset::Error;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "conjset", version, about = "Prescribed conjugate sets along semi-Riemannian geodesics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a system whose conjugate instants are the given set, then check it.
    Prescribe {
        #[arg(long, num_args = 2, required = true, value_names = ["A", "B"], allow_negative_numbers = true)]
        interval: Vec<f64>,
        /// Points `x` and intervals `lo:hi`, separated by `;`.
        #[arg(long, default_value = "")]
        set: String,
        #[command(flatten)]
        tol: Tolerances,
        #[arg(long, default_value = "spacelike")]
        causal: Causal,
        #[arg(long, default_value_t = DEFAULT_FD_STEP)]
        fd_step: f64,
        /// Directory for system, reduction, metric, report and trace files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conjugate instants of a system file.
    Detect {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        tol: Tolerances,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduce a system file to Morse–Sturm form.
    Reduce {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conformally flat metric realizing a system file.
    Metric {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "spacelike")]
        causal: Causal,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Christoffel, curvature and inertia checks on a metric file.
    VerifyGeometry {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FD_STEP)]
        fd_step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CSV of `t,d(t)` on the report grid of a system file.
    Trace {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        tol: Tolerances,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Copy)]
struct Tolerances {
    /// Report grid size (prescribe only; files carry their own grid).
    #[arg(long, default_value_t = 4096)]
    grid: usize,
    #[arg(long, default_value_t = DetectOptions::default().zero_tol)]
    tol_zero: f64,
    #[arg(long, default_value_t = DetectOptions::default().rank_tol)]
    rank_tol: f64,
    #[arg(long, default_value_t = DetectOptions::default().t_tol)]
    t_tol: f64,
}

impl Tolerances {
    fn detect(&self) -> Result<DetectOptions, Failure> {
        if self.grid < 64 {
            return Err(Failure::input(format!("--grid must be at least 64, got {}", self.grid)));
        }
        for (name, v) in [("--tol-zero", self.tol_zero), ("--rank-tol", self.rank_tol), ("--t-tol", self.t_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Failure::input(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(DetectOptions { zero_tol: self.tol_zero, rank_tol: self.rank_tol, t_tol: self.t_tol, ..DetectOptions::default() })
    }
}

/// Exit status with its message: 1 verification, 2 input, 3 stage failure.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn input(msg: impl Into<String>) -> Self {
        Failure { code: 2, msg: msg.into() }
    }
    fn verify(msg: impl Into<String>) -> Self {
        Failure { code: 1, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Stage { .. } | Error::Drift { .. } | Error::Residual { .. } | Error::NotFound(_) => 3,
            Error::Singular(_) | Error::Degenerate(_) | Error::NotTransverse(_) | Error::Unavailable(_) => 3,
            _ => 2,
        };
        Failure { code, msg: e.to_string() }
    }
}

/// A system file, or the system inside a reduction file.
fn read_system(path: &Path) -> Result<SympDiffSystem, Failure> {
    let bad = |e: &dyn std::fmt::Display| Failure::input(format!("{}: {e}", path.display()));
    let mut value: serde_json::Value = io::read_json(path).map_err(|e| bad(&e))?;
    if let Some(inner) = value.get_mut("system") {
        value = inner.take();
    }
    let file: SystemFile = serde_json::from_value(value).map_err(|e| bad(&e))?;
    file.to_system().map_err(|e| bad(&e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
        None => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::input(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

fn emit_json<T: serde::Serialize>(out: Option<&Path>, v: &T) -> Result<(), Failure> {
    emit(out, &(io::to_json(v)? + "\n"))
}

/// Morse–Sturm form of a file system: read off directly when it already has it.
fn morse_sturm_of(sys: &SympDiffSystem) -> Result<MorseSturm, Failure> {
    match io::as_morse_sturm(sys) {
        Some(ms) => Ok(ms),
        None => Ok(to_morse_sturm_report(sys).map_err(|e| e.at("to_morse_sturm"))?.morse_sturm),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Prescribe { interval, set, tol, causal, fd_step, out } => {
            let detect = tol.detect()?;
            let (a, b) = (interval[0], interval[1]);
            let set = ClosedSetDescriptor::parse(&set, a, b).map_err(|e| Failure::input(e.to_string()))?;
            if !(fd_step > 0.0) {
                return Err(Failure::input("--fd-step must be positive"));
            }
            let opts = PrescribeOptions { grid_n: tol.grid, detect, ..PrescribeOptions::default() };
            let p = build_prescribed_with(&set, &opts)?;
            let geometry = verify_geometry(&p.reduction.morse_sturm, causal, fd_step).map_err(|e| e.at("geometry"))?;
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
                let metric = metric_from_morse_sturm(&p.reduction.morse_sturm, causal)?;
                io::write_json(&dir.join("system.json"), &SystemFile::from_system(&p.system))?;
                io::write_json(&dir.join("morse_sturm.json"), &ReductionFile::from_reduction(&p.reduction)?)?;
                io::write_json(&dir.join("metric.json"), &MetricFile::from_metric(&metric))?;
                io::write_json(&dir.join("report.json"), &p.report)?;
                std::fs::write(dir.join("trace.csv"), io::trace_csv(&p.report)).map_err(Error::from)?;
            }
            let summary = json!({
                "set": set.to_string(),
                "instants": p.report.instants.iter().map(|i| i.t).collect::<Vec<_>>(),
                "clusters": p.report.clusters.iter().map(|c| [c.lo, c.hi]).collect::<Vec<_>>(),
                "comparison": p.comparison,
                "abstract_index": p.index,
                "geometry": geometry,
            });
            println!("{}", serde_json::to_string_pretty(&summary).map_err(Error::from)?);
            if !p.passed() {
                return Err(Failure::verify(format!(
                    "detected set differs from {set} (edge error {:.2} steps, {} missing, {} spurious)",
                    p.comparison.max_edge_steps,
                    p.comparison.missing.len(),
                    p.comparison.spurious.len()
                )));
            }
            Ok(())
        }
        Command::Detect { input, tol, out } => {
            let sys = read_system(&input)?;
            let report = conjugate_instants_with(&sys, &tol.detect()?).map_err(|e| e.at("conjugate_instants"))?;
            emit_json(out.as_deref(), &report)
        }
        Command::Reduce { input, out } => {
            let sys = read_system(&input)?;
            let r = to_morse_sturm_report(&sys).map_err(|e| e.at("to_morse_sturm"))?;
            emit_json(out.as_deref(), &ReductionFile::from_reduction(&r)?)
        }
        Command::Metric { input, causal, out } => {
            let sys = read_system(&input)?;
            let ms = morse_sturm_of(&sys)?;
            let m = metric_from_morse_sturm(&ms, causal)?;
            emit_json(out.as_deref(), &MetricFile::from_metric(&m))
        }
        Command::VerifyGeometry { input, fd_step, out } => {
            if !(fd_step > 0.0) {
                return Err(Failure::input("--fd-step must be positive"));
            }
            let file: MetricFile = io::read_json(&input).map_err(|e| Failure::input(format!("{}: {e}", input.display())))?;
            let ms = file.to_morse_sturm().map_err(|e| Failure::input(e.to_string()))?;
            file.to_metric().map_err(|e| Failure::input(e.to_string()))?;
            let report = verify_geometry(&ms, file.causal, fd_step).map_err(|e| e.at("geometry"))?;
            emit_json(out.as_deref(), &report)?;
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::verify("geometry checks failed"))
            }
        }
        Command::Trace { input, tol, out } => {
            let sys = read_system(&input)?;
            let report = conjugate_instants_with(&sys, &tol.detect()?).map_err(|e| e.at("conjugate_instants"))?;
            emit(out.as_deref(), &io::trace_csv(&report))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
