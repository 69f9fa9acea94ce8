//! Session logic behind the `ddae` binary: read a system document, run one
//! analysis or synthesis command and write its outputs.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ddae_core::optimize::{stabilization_barrier, stabilization_max, SolveOptions, SynthesisResult};
use ddae_core::{
    compute_roots, spectral_abscissa, strong_stability, AnalysisOptions, DdaeSystem, Error, RootSet,
    StrongStabilityReport, SystemDocument,
};
use serde::Serialize;

pub const EXIT_OK: u8 = 0;
pub const EXIT_NOT_STABILIZED: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_ASSUMPTION: u8 = 3;
pub const EXIT_INFEASIBLE: u8 = 4;

pub const MAX_ORDER: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Roots,
    Abscissa,
    Gamma0,
    StrongStability,
    StabilizeMax,
    StabilizeBarrier,
    ClosedLoopRoots,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Roots,
        Command::Abscissa,
        Command::Gamma0,
        Command::StrongStability,
        Command::StabilizeMax,
        Command::StabilizeBarrier,
        Command::ClosedLoopRoots,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Roots => "roots",
            Command::Abscissa => "abscissa",
            Command::Gamma0 => "gamma0",
            Command::StrongStability => "strong-stability",
            Command::StabilizeMax => "stabilize-max",
            Command::StabilizeBarrier => "stabilize-barrier",
            Command::ClosedLoopRoots => "closed-loop-roots",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<_> = Command::ALL.iter().map(|c| c.name()).collect();
            format!("unknown command `{s}` (expected one of {})", names.join(", "))
        })
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One invocation. `None` fields keep the library defaults.
#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub input: PathBuf,
    pub command: Command,
    pub minimal_real_part: Option<f64>,
    pub n_max: Option<usize>,
    pub seed: Option<u64>,
    pub starts: Option<usize>,
    pub r: Option<f64>,
    pub gamma: Option<f64>,
    pub order: usize,
    pub out: PathBuf,
}

impl SessionConfig {
    pub fn new(input: impl Into<PathBuf>, command: Command) -> Self {
        Self {
            input: input.into(),
            command,
            minimal_real_part: None,
            n_max: None,
            seed: None,
            starts: None,
            r: None,
            gamma: None,
            order: 0,
            out: PathBuf::from("."),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if let Some(m) = self.minimal_real_part {
            if !m.is_finite() {
                return bad(format!("--min-real-part must be finite, got {m}"));
            }
        }
        if let Some(n) = self.n_max {
            if !(5..=5000).contains(&n) {
                return bad(format!("--Nmax must lie in [5, 5000], got {n}"));
            }
        }
        if self.starts == Some(0) {
            return bad("--starts must be at least 1".into());
        }
        if let Some(r) = self.r {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("--r must be positive, got {r}"));
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g <= 1.0) {
                return bad(format!("--gamma must lie in (0, 1], got {g}"));
            }
        }
        if self.order > MAX_ORDER {
            return bad(format!("--order must not exceed {MAX_ORDER}, got {}", self.order));
        }
        Ok(())
    }

    fn analysis(&self) -> AnalysisOptions {
        let mut opts = AnalysisOptions::default();
        opts.roots.minimal_real_part = self.minimal_real_part;
        if let Some(n) = self.n_max {
            opts.roots.n_max = n;
        }
        opts
    }

    fn solve_options(&self) -> SolveOptions {
        let mut opts = SolveOptions {
            analysis: self.analysis(),
            ..SolveOptions::default()
        };
        // the objective needs the rightmost root, wherever it is
        opts.analysis.roots.minimal_real_part = None;
        if let Some(s) = self.seed {
            opts.seed = s;
        }
        if let Some(s) = self.starts {
            opts.starts = s;
        }
        if let Some(r) = self.r {
            opts.barrier_r = r;
        }
        if let Some(g) = self.gamma {
            opts.gamma = g;
        }
        opts
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    Input(String),
    Assumption(String),
    Infeasible(String),
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } | CliError::Input(_) | CliError::Output(_) => EXIT_INPUT,
            CliError::Assumption(_) => EXIT_ASSUMPTION,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Parse { line, column, message } => {
                write!(f, "parse error at line {line}, column {column}: {message}")
            }
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Assumption(m) => write!(f, "{m}"),
            CliError::Infeasible(m) => write!(f, "{m}"),
            CliError::Output(m) => write!(f, "output error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Json(j) => CliError::Parse {
                line: j.line(),
                column: j.column(),
                message: j.to_string(),
            },
            e @ Error::AssumptionViolation { .. } => CliError::Assumption(e.to_string()),
            e @ Error::Infeasible(_) => CliError::Infeasible(e.to_string()),
            e => CliError::Input(e.to_string()),
        }
    }
}

/// Summary of a roots command.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RootsSummary {
    pub count: usize,
    #[serde(with = "ddae_core::document::extended_float")]
    pub abscissa: f64,
    #[serde(rename = "C_D", with = "ddae_core::document::extended_float")]
    pub c_d: f64,
    /// `"C_D>=c"` when the difference part dominates.
    pub warning: Option<String>,
    #[serde(rename = "N")]
    pub n_used: usize,
}

impl RootsSummary {
    fn of(set: &RootSet) -> Self {
        Self {
            count: set.corrected.len(),
            abscissa: set.abscissa(),
            c_d: set.c_d,
            warning: set.cd_warning.then(|| "C_D>=c".to_string()),
            n_used: set.n_used,
        }
    }
}

/// What a finished command produced.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: u8,
    /// Machine-readable record, also printed on stdout.
    pub record: String,
    pub files: Vec<PathBuf>,
}

fn read_document(path: &Path) -> Result<SystemDocument, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(SystemDocument::parse(&text)?)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("records serialize")
}

fn scalar_record(name: &str, value: f64) -> String {
    let v = ddae_core::document::extended_float::serialize(&value, serde_json::value::Serializer)
        .expect("records serialize");
    let mut map = serde_json::Map::new();
    map.insert(name.to_string(), v);
    to_json(&map)
}

pub fn run(config: &SessionConfig) -> Result<Outcome, CliError> {
    config.validate()?;
    let doc = read_document(&config.input)?;
    match config.command {
        Command::Roots => roots(config, &doc.ddae()?),
        Command::ClosedLoopRoots => {
            if doc.controller.is_none() {
                return Err(CliError::Input("closed-loop-roots needs a `controller` block".into()));
            }
            roots(config, &doc.ddae()?)
        }
        Command::Abscissa => {
            let c = spectral_abscissa(&doc.ddae()?, &config.analysis().roots)?;
            Ok(record_only(scalar_record("c", c)))
        }
        Command::Gamma0 => {
            let rep = strong_stability(&doc.ddae()?, &config.analysis())?;
            Ok(record_only(scalar_record("gamma0", rep.gamma0)))
        }
        Command::StrongStability => {
            let rep = strong_stability(&doc.ddae()?, &config.analysis())?;
            Ok(record_only(to_json(&rep)))
        }
        Command::StabilizeMax | Command::StabilizeBarrier => stabilize(config, &doc),
    }
}

fn record_only(record: String) -> Outcome {
    Outcome {
        exit_code: EXIT_OK,
        record,
        files: Vec::new(),
    }
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))
}

fn roots(config: &SessionConfig, system: &DdaeSystem) -> Result<Outcome, CliError> {
    let set = compute_roots(system, &config.analysis().roots)?;
    ensure_out_dir(&config.out)?;
    let csv = config.out.join("roots.csv");
    let mut w = create(&csv)?;
    set.write_csv(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Output(format!("{}: {e}", csv.display())))?;
    let record = to_json(&RootsSummary::of(&set));
    let summary = config.out.join("summary.json");
    write_text(&summary, &format!("{record}\n"))?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        record,
        files: vec![csv, summary],
    })
}

/// Writes `iter,objective` rows.
pub fn write_trace<W: Write>(trace: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "iter,objective")?;
    for (k, v) in trace.iter().enumerate() {
        writeln!(w, "{k},{v:.16e}")?;
    }
    Ok(())
}

fn stabilize(config: &SessionConfig, doc: &SystemDocument) -> Result<Outcome, CliError> {
    let plant = doc
        .plant()?
        .ok_or_else(|| CliError::Input("synthesis needs a `plant` block".into()))?;
    let opts = config.solve_options();
    let result: SynthesisResult = match config.command {
        Command::StabilizeMax => stabilization_max(&plant, config.order, &opts)?,
        _ => stabilization_barrier(&plant, config.order, &opts)?,
    };
    ensure_out_dir(&config.out)?;

    let mut out_doc = SystemDocument::with_plant(&plant, Some(&result.controller));
    out_doc.report = Some(result.report.clone());
    let controller_path = config.out.join("controller.sys");
    write_text(&controller_path, &out_doc.to_json()?)?;

    let record = to_json(&result.report);
    let report_path = config.out.join("report.json");
    write_text(&report_path, &format!("{record}\n"))?;

    let trace_path = config.out.join("trace.csv");
    let mut w = create(&trace_path)?;
    write_trace(&result.trace, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Output(format!("{}: {e}", trace_path.display())))?;

    Ok(Outcome {
        exit_code: exit_code_for(&result.report),
        record,
        files: vec![controller_path, report_path, trace_path],
    })
}

fn exit_code_for(report: &StrongStabilityReport) -> u8 {
    if report.strongly_stable {
        EXIT_OK
    } else {
        EXIT_NOT_STABILIZED
    }
}
