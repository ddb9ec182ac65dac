//! The `deflab` command-line surface.
//!
//! Every subcommand is a plain function taking its parsed arguments and a
//! writer for the human-readable report, so the binary is a thin dispatcher
//! and the commands can be driven in-process.
//!
//! CSV formats:
//!
//! - time series: header `t,V_r,V_i,I_r_gen,I_i_gen,I_r_z,I_i_z,I_r_p,I_i_p`,
//!   one row per sample, currents into each element;
//! - DEF trace: a `# P_bar=<value> window=<seconds>` line, then `t,E_star`;
//! - passivity report: `# verdict <element>=<verdict>` lines, then one row per
//!   grid frequency in rad/s.
//!
//! Floats are written in scientific notation with `DEFLAB_PRECISION`
//! significant digits (default 17, which round-trips every `f64`).

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::def::{self, DefOptions, DefTrace, ElementTimeSeries, DEFAULT_PRE_WINDOW};
use crate::element::{frf_generator, frf_impedance, frf_power_load, ElementModel};
use crate::passivity::{
    classify_default, generator_eig_analytic, log_grid, mean_dissipating_power,
    resistor_power_analytic, PassivityReport,
};
use crate::sim::{run_scenario, ElementKind, Scenario, ScenarioResult};
use crate::{hz_to_rad, Complex64};

pub const TIMESERIES_HEADER: &str = "t,V_r,V_i,I_r_gen,I_i_gen,I_r_z,I_i_z,I_r_p,I_i_p";
pub const DEF_TRACE_HEADER: &str = "t,E_star";
pub const PRECISION_ENV: &str = "DEFLAB_PRECISION";
pub const DEFAULT_PRECISION: usize = 17;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error(transparent)]
    Model(crate::Error),
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Model(e)
    }
}

impl CliError {
    /// 2 for bad configuration or input, 3 for numerical aborts.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

#[derive(Debug, Parser)]
#[command(
    name = "deflab",
    version,
    about = "Dissipating energy flow passivity toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write its time series.
    Simulate(SimulateArgs),
    /// Compute the DEF trace of one element from a time-series CSV.
    Def(DefArgs),
    /// Sweep the passivity eigenvalues of the scenario's elements.
    Passivity(PassivityArgs),
    /// Print the analytic dissipating power of a sinusoidal forcing.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Time-series CSV; overrides `[output] timeseries`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DefArgs {
    /// Time-series CSV written by `simulate`.
    pub input: PathBuf,
    /// gen, z or p (long names accepted).
    #[arg(long)]
    pub element: String,
    /// Forcing period in s; enables whole-period averaging windows.
    #[arg(long)]
    pub period: Option<f64>,
    /// Pre-forcing span for current mean removal, in s.
    #[arg(long, default_value_t = DEFAULT_PRE_WINDOW)]
    pub pre: f64,
    /// Averaging window in s.
    #[arg(long)]
    pub window: Option<f64>,
    /// Trace CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PassivityArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Lowest grid frequency in Hz.
    #[arg(long, default_value_t = 0.01)]
    pub fmin: f64,
    /// Highest grid frequency in Hz.
    #[arg(long, default_value_t = 10.0)]
    pub fmax: f64,
    #[arg(long, default_value_t = 50)]
    pub npts: usize,
    /// Report CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Scenario whose three elements are evaluated at its forcing.
    #[arg(long, conflicts_with = "conductance")]
    pub config: Option<PathBuf>,
    /// Conductance of a bare resistor.
    #[arg(long, requires = "frequency")]
    pub conductance: Option<f64>,
    /// Forcing frequency in Hz.
    #[arg(long)]
    pub frequency: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub amp_r: f64,
    #[arg(long, default_value_t = 0.01)]
    pub amp_i: f64,
    /// θr − θi in rad.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phase_diff: f64,
}

/// Runs a parsed command, writing its report to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    let digits = precision()?;
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a, digits, stdout).map(|_| ()),
        Command::Def(a) => cmd_def(&a, digits, stdout).map(|_| ()),
        Command::Passivity(a) => cmd_passivity(&a, digits, stdout).map(|_| ()),
        Command::Predict(a) => cmd_predict(&a, digits, stdout).map(|_| ()),
    }
}

/// Significant digits for CSV floats, from `DEFLAB_PRECISION`.
pub fn precision() -> CliResult<usize> {
    match std::env::var(PRECISION_ENV) {
        Err(_) => Ok(DEFAULT_PRECISION),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(d) if (1..=17).contains(&d) => Ok(d),
            _ => Err(CliError::Usage(format!(
                "{PRECISION_ENV} must be an integer in 1..=17, got {s:?}"
            ))),
        },
    }
}

/// Formats `x` with `digits` significant digits.
pub fn format_float(x: f64, digits: usize) -> String {
    format!("{:.*e}", digits.max(1) - 1, x)
}

fn push_row(line: &mut String, values: &[f64], digits: usize) {
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            line.push(',');
        }
        line.push_str(&format_float(*v, digits));
    }
    line.push('\n');
}

/// Writes the shared-bus time series of a scenario run.
pub fn write_timeseries(w: &mut dyn Write, res: &ScenarioResult, digits: usize) -> io::Result<()> {
    let (g, z, p) = (&res.generator, &res.impedance, &res.power_load);
    let mut out = String::with_capacity(g.len() * 9 * (digits + 8));
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for k in 0..g.len() {
        push_row(
            &mut out,
            &[
                g.t()[k],
                g.v_r()[k],
                g.v_i()[k],
                g.i_r()[k],
                g.i_i()[k],
                z.i_r()[k],
                z.i_i()[k],
                p.i_r()[k],
                p.i_i()[k],
            ],
            digits,
        );
    }
    w.write_all(out.as_bytes())
}

/// Column data of a time-series CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesTable {
    pub t: Vec<f64>,
    pub v_r: Vec<f64>,
    pub v_i: Vec<f64>,
    /// Current pairs in [`ElementKind::ALL`] order.
    pub currents: [(Vec<f64>, Vec<f64>); 3],
}

impl TimeSeriesTable {
    pub fn element(&self, kind: ElementKind) -> crate::Result<ElementTimeSeries> {
        let idx = ElementKind::ALL
            .iter()
            .position(|k| *k == kind)
            .expect("kind is listed");
        let (i_r, i_i) = &self.currents[idx];
        ElementTimeSeries::new(
            self.t.clone(),
            self.v_r.clone(),
            self.v_i.clone(),
            i_r.clone(),
            i_i.clone(),
        )
    }
}

/// Parses a time-series CSV, checking the header and every row.
pub fn parse_timeseries(text: &str) -> Result<TimeSeriesTable, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == TIMESERIES_HEADER => {}
        Some((_, h)) => return Err(format!("bad header {h:?}, expected {TIMESERIES_HEADER:?}")),
        None => return Err("empty file".into()),
    }
    let mut cols: [Vec<f64>; 9] = Default::default();
    for (idx, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(format!(
                "line {}: expected 9 fields, found {}",
                idx + 1,
                fields.len()
            ));
        }
        for (col, field) in cols.iter_mut().zip(fields) {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| format!("line {}: not a number: {field:?}", idx + 1))?;
            if !x.is_finite() {
                return Err(format!("line {}: non-finite value {field:?}", idx + 1));
            }
            col.push(x);
        }
    }
    if cols[0].len() < 3 {
        return Err(format!("need at least 3 samples, found {}", cols[0].len()));
    }
    let [t, v_r, v_i, ig_r, ig_i, iz_r, iz_i, ip_r, ip_i] = cols;
    Ok(TimeSeriesTable {
        t,
        v_r,
        v_i,
        currents: [(ig_r, ig_i), (iz_r, iz_i), (ip_r, ip_i)],
    })
}

pub fn read_timeseries(path: &Path) -> CliResult<TimeSeriesTable> {
    let text =
        std::fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))?;
    parse_timeseries(&text).map_err(|message| CliError::Schema {
        path: path.to_path_buf(),
        message,
    })
}

pub fn write_def_trace(w: &mut dyn Write, trace: &DefTrace, digits: usize) -> io::Result<()> {
    let mut out = String::with_capacity(trace.t.len() * 2 * (digits + 8));
    let _ = writeln!(
        out,
        "# P_bar={} window={}",
        format_float(trace.p_bar, digits),
        format_float(trace.window, digits)
    );
    out.push_str(DEF_TRACE_HEADER);
    out.push('\n');
    for (t, e) in trace.t.iter().zip(&trace.e_star) {
        push_row(&mut out, &[*t, *e], digits);
    }
    w.write_all(out.as_bytes())
}

/// Parses a DEF trace CSV back into a [`DefTrace`].
pub fn parse_def_trace(text: &str) -> Result<DefTrace, String> {
    let mut lines = text.lines();
    let meta = lines.next().ok_or("empty file")?;
    let mut p_bar = None;
    let mut window = None;
    for item in meta
        .strip_prefix('#')
        .ok_or("missing metadata line")?
        .split_whitespace()
    {
        let (key, value) = item
            .split_once('=')
            .ok_or(format!("bad metadata {item:?}"))?;
        let value: f64 = value
            .parse()
            .map_err(|_| format!("bad metadata {item:?}"))?;
        match key {
            "P_bar" => p_bar = Some(value),
            "window" => window = Some(value),
            _ => return Err(format!("unknown metadata key {key:?}")),
        }
    }
    if lines.next().map(str::trim_end) != Some(DEF_TRACE_HEADER) {
        return Err(format!("expected header {DEF_TRACE_HEADER:?}"));
    }
    let mut t = Vec::new();
    let mut e_star = Vec::new();
    for (idx, line) in lines.enumerate() {
        let (a, b) = line
            .split_once(',')
            .ok_or(format!("line {}: expected 2 fields", idx + 3))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("line {}: bad number", idx + 3))
        };
        t.push(parse(a)?);
        e_star.push(parse(b)?);
    }
    if t.is_empty() {
        return Err("no samples".into());
    }
    Ok(DefTrace {
        t,
        e_star,
        p_bar: p_bar.ok_or("missing P_bar")?,
        window: window.ok_or("missing window")?,
    })
}

fn create(path: &Path) -> CliResult<io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(io::BufWriter::new)
        .map_err(io_err(format!("creating {}", path.display())))
}

/// Sign reading of a dissipating power.
pub fn interpret(p_bar: f64, scale: f64) -> &'static str {
    if p_bar.abs() <= 1e-3 * scale || p_bar.abs() <= 1e-15 {
        "lossless (no net dissipating energy)"
    } else if p_bar > 0.0 {
        "sink (absorbs dissipating energy)"
    } else {
        "source (injects dissipating energy)"
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElementSummary {
    pub kind: ElementKind,
    pub p_bar: f64,
    pub e_end: f64,
    pub window: f64,
}

#[derive(Clone, Debug)]
pub struct SimulateOutcome {
    pub scenario: Scenario,
    pub result: ScenarioResult,
    pub timeseries: PathBuf,
    pub elements: Vec<ElementSummary>,
}

fn format_summary(outcome: &SimulateOutcome, digits: usize) -> String {
    let scale = outcome
        .elements
        .iter()
        .map(|e| e.p_bar.abs())
        .fold(0.0, f64::max);
    let mut s = String::new();
    let f = &outcome.scenario.forcing;
    let _ = writeln!(s, "# timeseries={}", outcome.timeseries.display());
    let _ = writeln!(
        s,
        "# omega={} samples={} step={}",
        format_float(f.omega, digits),
        outcome.result.generator.len(),
        format_float(f.step, digits)
    );
    s.push_str("element,P_bar,E_star_end,window,interpretation\n");
    for e in &outcome.elements {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            e.kind.name(),
            format_float(e.p_bar, digits),
            format_float(e.e_end, digits),
            format_float(e.window, digits),
            interpret(e.p_bar, scale)
        );
    }
    s
}

/// Runs the configured scenario, writes the time series and prints the
/// per-element summary.
pub fn cmd_simulate(
    args: &SimulateArgs,
    digits: usize,
    stdout: &mut dyn Write,
) -> CliResult<SimulateOutcome> {
    let cfg = ScenarioConfig::load(&args.config)?;
    let scenario = cfg.scenario()?;
    let opts = cfg.def_options(&scenario);
    let timeseries = match (&args.out, &cfg.output.timeseries) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => p.clone(),
        (None, None) => {
            let stem = args.config.file_stem().unwrap_or_default();
            PathBuf::from(stem).with_extension("csv")
        }
    };

    let result = run_scenario(&scenario)?;
    let mut elements = Vec::with_capacity(3);
    for kind in ElementKind::ALL {
        let trace = def::def_integral(result.series(kind), &opts)?;
        elements.push(ElementSummary {
            kind,
            p_bar: trace.p_bar,
            e_end: trace.final_energy(),
            window: trace.window,
        });
    }

    let mut w = create(&timeseries)?;
    write_timeseries(&mut w, &result, digits)
        .and_then(|_| w.flush())
        .map_err(io_err(format!("writing {}", timeseries.display())))?;

    let outcome = SimulateOutcome {
        scenario,
        result,
        timeseries,
        elements,
    };
    let summary = format_summary(&outcome, digits);
    if let Some(p) = &cfg.output.summary {
        std::fs::write(p, &summary).map_err(io_err(format!("writing {}", p.display())))?;
    }
    stdout
        .write_all(summary.as_bytes())
        .map_err(io_err("writing summary"))?;
    Ok(outcome)
}

/// Computes the DEF trace of one element of a stored time series.
pub fn cmd_def(args: &DefArgs, digits: usize, stdout: &mut dyn Write) -> CliResult<DefTrace> {
    let kind = ElementKind::parse(&args.element).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown element {:?}; expected gen, z or p",
            args.element
        ))
    })?;
    if let Some(p) = args.period {
        if !(p > 0.0) || !p.is_finite() {
            return Err(CliError::Usage(format!(
                "--period must be positive, got {p}"
            )));
        }
    }
    let table = read_timeseries(&args.input)?;
    let series = table.element(kind).map_err(|e| CliError::Schema {
        path: args.input.clone(),
        message: e.to_string(),
    })?;
    let opts = DefOptions {
        pre_window: args.pre,
        period: args.period,
        window: args.window,
    };
    let trace = def::def_integral(&series, &opts)?;
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            write_def_trace(&mut w, &trace, digits)
                .and_then(|_| w.flush())
                .map_err(io_err(format!("writing {}", path.display())))?;
            writeln!(
                stdout,
                "{}: P_bar={} E_star_end={} window={}",
                kind.name(),
                format_float(trace.p_bar, digits),
                format_float(trace.final_energy(), digits),
                format_float(trace.window, digits)
            )
            .map_err(io_err("writing report"))?;
        }
        None => write_def_trace(stdout, &trace, digits).map_err(io_err("writing trace"))?,
    }
    Ok(trace)
}

/// Passivity reports of the three scenario elements on a common grid.
#[derive(Clone, Debug)]
pub struct PassivityOutcome {
    pub omegas: Vec<f64>,
    pub generator: PassivityReport,
    pub impedance: PassivityReport,
    pub power_load: PassivityReport,
    /// Analytic nonzero generator eigenvalue per grid point.
    pub generator_analytic: Vec<f64>,
    pub conductance: f64,
}

pub fn passivity_reports(scenario: &Scenario, omegas: &[f64]) -> crate::Result<PassivityOutcome> {
    let gen = scenario.generator_equilibrium()?;
    let op = scenario.power_operating_point()?;
    let z = scenario.impedance;
    let generator = classify_default(&ElementModel::Generator(gen), omegas)?;
    let impedance = classify_default(&ElementModel::Impedance(z), omegas)?;
    let power_load = classify_default(&ElementModel::PowerLoad(op), omegas)?;
    let generator_analytic = omegas
        .iter()
        .map(|&w| generator_eig_analytic(&gen, w))
        .collect::<crate::Result<_>>()?;
    Ok(PassivityOutcome {
        omegas: omegas.to_vec(),
        generator,
        impedance,
        power_load,
        generator_analytic,
        conductance: z.conductance,
    })
}

pub fn write_passivity(w: &mut dyn Write, out: &PassivityOutcome, digits: usize) -> io::Result<()> {
    let mut s = String::new();
    for (name, r) in [
        ("generator", &out.generator),
        ("impedance", &out.impedance),
        ("power_load", &out.power_load),
    ] {
        let _ = writeln!(
            s,
            "# verdict {name}={} tolerance={}",
            r.verdict,
            format_float(r.tolerance, digits)
        );
    }
    s.push_str(
        "omega,lambda_min_gen,lambda_max_gen,lambda_gen_analytic,\
         lambda_min_z,lambda_max_z,minus_G_over_omega,plus_G_over_omega,\
         lambda_min_p,lambda_max_p\n",
    );
    for (k, &w_k) in out.omegas.iter().enumerate() {
        let g = out.generator.eigenvalues[k];
        let z = out.impedance.eigenvalues[k];
        let p = out.power_load.eigenvalues[k];
        let gz = out.conductance / w_k;
        push_row(
            &mut s,
            &[
                w_k,
                g.0,
                g.1,
                out.generator_analytic[k],
                z.0,
                z.1,
                -gz,
                gz,
                p.0,
                p.1,
            ],
            digits,
        );
    }
    w.write_all(s.as_bytes())
}

/// Sweeps `K(Ω)` for the three scenario elements over a log-spaced grid.
pub fn cmd_passivity(
    args: &PassivityArgs,
    digits: usize,
    stdout: &mut dyn Write,
) -> CliResult<PassivityOutcome> {
    if !(args.fmin > 0.0 && args.fmax >= args.fmin) || args.npts == 0 {
        return Err(CliError::Usage(format!(
            "need 0 < fmin <= fmax and npts >= 1 (fmin={}, fmax={}, npts={})",
            args.fmin, args.fmax, args.npts
        )));
    }
    let cfg = ScenarioConfig::load(&args.config)?;
    let scenario = cfg.scenario()?;
    let omegas = log_grid(args.fmin, args.fmax, args.npts)?;
    let outcome = passivity_reports(&scenario, &omegas)?;
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            write_passivity(&mut w, &outcome, digits)
                .and_then(|_| w.flush())
                .map_err(io_err(format!("writing {}", path.display())))?;
            writeln!(
                stdout,
                "generator={} impedance={} power_load={}",
                outcome.generator.verdict, outcome.impedance.verdict, outcome.power_load.verdict
            )
            .map_err(io_err("writing report"))?;
        }
        None => write_passivity(stdout, &outcome, digits).map_err(io_err("writing report"))?,
    }
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub element: &'static str,
    /// Quadratic-form power `Re{ṼT†·Y·Γ·ṼT}`.
    pub p_star: f64,
    /// Time average, `P*/2`.
    pub p_bar: f64,
}

/// Analytic predictions for every element of a scenario at its forcing.
pub fn predict_scenario(scenario: &Scenario) -> crate::Result<Vec<Prediction>> {
    let w = scenario.forcing.omega;
    let v: [Complex64; 2] = scenario.forcing_phasors();
    let gen = scenario.generator_equilibrium()?;
    let op = scenario.power_operating_point()?;
    let frfs = [
        ("generator", frf_generator(&gen, w)?),
        ("impedance", frf_impedance(&scenario.impedance)),
        ("power_load", frf_power_load(&op)),
    ];
    frfs.iter()
        .map(|(name, y)| {
            let p_bar = mean_dissipating_power(y, w, v)?;
            Ok(Prediction {
                element: name,
                p_star: 2.0 * p_bar,
                p_bar,
            })
        })
        .collect()
}

/// Prints `P*` and `P̄` for a scenario or for a bare resistor.
pub fn cmd_predict(
    args: &PredictArgs,
    digits: usize,
    stdout: &mut dyn Write,
) -> CliResult<Vec<Prediction>> {
    let predictions = match (&args.config, args.conductance) {
        (Some(path), _) => {
            let cfg = ScenarioConfig::load(path)?;
            predict_scenario(&cfg.scenario()?)?
        }
        (None, Some(g)) => {
            let f = args
                .frequency
                .ok_or_else(|| CliError::Usage("--frequency is required".into()))?;
            if !(f > 0.0) || !f.is_finite() {
                return Err(CliError::Usage(format!(
                    "--frequency must be positive, got {f}"
                )));
            }
            if !g.is_finite() {
                return Err(CliError::Usage(format!(
                    "--conductance must be finite, got {g}"
                )));
            }
            let p_star =
                resistor_power_analytic(g, hz_to_rad(f), args.amp_r, args.amp_i, args.phase_diff);
            vec![Prediction {
                element: "resistor",
                p_star,
                p_bar: 0.5 * p_star,
            }]
        }
        (None, None) => {
            return Err(CliError::Usage(
                "predict needs --config or --conductance/--frequency".into(),
            ))
        }
    };
    let mut s = String::from("element,P_star,P_bar\n");
    for p in &predictions {
        let _ = writeln!(
            s,
            "{},{},{}",
            p.element,
            format_float(p.p_star, digits),
            format_float(p.p_bar, digits)
        );
    }
    stdout
        .write_all(s.as_bytes())
        .map_err(io_err("writing report"))?;
    Ok(predictions)
}
