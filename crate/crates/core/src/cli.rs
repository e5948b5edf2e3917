//! Command-line front end.
//!
//! Settings resolve as flags, then `--config` TOML values, then defaults.
//! Every CSV number is written with 12 significant digits (`{:.11e}`).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Deserialize;

use crate::dynamics::{run_trajectory, scaled_grid, Trajectory};
use crate::entanglement::{
    bipartition_label, concurrence_collective, gme, negativity, pairwise_concurrence, parse_bipartition, QUBIT_A,
    QUBIT_B, QUBIT_C,
};
use crate::error::{Error, Result};
use crate::hamiltonians::Method;
use crate::hilbert::{DensityKind, DensityMatrix, FockSpace, ModelParams, C64};
use crate::sdp::SdpOptions;
use crate::spectrum::{linspace, solve};

pub const DEFAULT_DELTA: f64 = 1.0;
pub const DEFAULT_OMEGA: f64 = 1.0;
pub const DEFAULT_G: f64 = 0.1;
pub const DEFAULT_NMAX: usize = 40;
pub const DEFAULT_TMAX_SCALED: f64 = 3.0;
pub const DEFAULT_STEPS: usize = 400;
pub const DEFAULT_GME_STRIDE: usize = 4;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_LEVELS: usize = 8;
pub const THREADS_ENV: &str = "DICKE3_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dicke3", version, about = "Spectra and entanglement dynamics of three qubits in a cavity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lowest energy levels over a coupling grid.
    Spectrum(SpectrumArgs),
    /// Concurrence, GME, negativity and populations over time.
    Dynamics(DynamicsArgs),
    /// GME estimate of a three-qubit state read from a file.
    Gme(GmeArgs),
    /// Concurrence of a state read from a file.
    Concurrence(StateArgs),
    /// Negativity of a three-qubit state read from a file.
    Negativity(NegativityArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Qubit splitting Δ [default: 1]
    #[arg(long)]
    pub delta: Option<f64>,
    /// Cavity frequency ω [default: 1]
    #[arg(long)]
    pub omega: Option<f64>,
    /// Coupling g, either a number or start:stop:count [default: 0.1]
    #[arg(long)]
    pub g: Option<String>,
    /// Fock truncation n_max [default: 40]
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Method, repeatable: exact, rwa, zeroth, grwa
    #[arg(long = "method", value_parser = parse_method)]
    pub methods: Vec<Method>,
    /// Output CSV path [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with defaults for any of these options
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// SDP tolerance [default: 1e-8]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also write a gnuplot script for the CSV to this path
    #[arg(long)]
    pub plot_script: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of levels per coupling [default: 8]
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DynamicsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Final time in units of 2π/Δ [default: 3]
    #[arg(long)]
    pub tmax_scaled: Option<f64>,
    /// Number of time samples [default: 400]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Solve the GME program on every n-th sample and interpolate between [default: 4]
    #[arg(long)]
    pub gme_stride: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct StateArgs {
    /// Density matrix file (`dim N` then `re,im` entries)
    #[arg(long)]
    pub input: PathBuf,
    /// Report path [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GmeArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// SDP tolerance [default: 1e-8]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Append the optimal witness to the report
    #[arg(long)]
    pub witness: bool,
}

#[derive(Debug, Clone, Args)]
pub struct NegativityArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Bipartition such as A|BC; all three single-qubit cuts when omitted
    #[arg(long)]
    pub bipartition: Option<String>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CouplingValue {
    Number(f64),
    Text(String),
}

/// Keys accepted in a `--config` TOML file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub delta: Option<f64>,
    pub omega: Option<f64>,
    pub g: Option<CouplingValue>,
    pub nmax: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub tmax_scaled: Option<f64>,
    pub steps: Option<usize>,
    pub gme_stride: Option<usize>,
    pub tol: Option<f64>,
    pub levels: Option<usize>,
    pub out: Option<PathBuf>,
    pub plot_script: Option<PathBuf>,
}

impl ConfigFile {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_column(text, s.start))
                .unwrap_or((0, 0));
            Error::Parse { source_name: source_name.into(), line, column, message: e.message().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, &path.display().to_string())
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Parses `0.3` or `start:stop:count`.
pub fn parse_coupling_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::InvalidArgument(format!("bad coupling '{s}': {why}"));
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|_| bad("not a number"));
    let grid = match parts.as_slice() {
        [v] => vec![num(v)?],
        [a, b, n] => {
            let n: usize = n.parse().map_err(|_| bad("count must be a positive integer"))?;
            if n == 0 {
                return Err(bad("count must be a positive integer"));
            }
            linspace(num(a)?, num(b)?, n)
        }
        _ => return Err(bad("expected a number or start:stop:count")),
    };
    if grid.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(bad("couplings must be finite and non-negative"));
    }
    Ok(grid)
}

/// Fully resolved settings for one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub fock: FockSpace,
    pub methods: Vec<Method>,
    pub g_grid: Vec<f64>,
    pub times: Vec<f64>,
    pub gme_stride: usize,
    pub sdp: SdpOptions,
    pub levels: usize,
    pub out: Option<PathBuf>,
    pub plot_script: Option<PathBuf>,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
    }
}

fn positive_count(name: &str, v: usize) -> Result<usize> {
    if v > 0 {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!("{name} must be at least 1")))
    }
}

impl RunConfig {
    fn resolve_model(m: &ModelArgs, file: &ConfigFile, default_methods: &[Method]) -> Result<Self> {
        let delta = m.delta.or(file.delta).unwrap_or(DEFAULT_DELTA);
        let omega = m.omega.or(file.omega).unwrap_or(DEFAULT_OMEGA);
        let g_grid = match (&m.g, &file.g) {
            (Some(s), _) | (None, Some(CouplingValue::Text(s))) => parse_coupling_grid(s)?,
            (None, Some(CouplingValue::Number(v))) => parse_coupling_grid(&v.to_string())?,
            (None, None) => vec![DEFAULT_G],
        };
        let params = ModelParams::new(delta, omega, g_grid[0])?;
        let fock = FockSpace::new(m.nmax.or(file.nmax).unwrap_or(DEFAULT_NMAX))?;
        let methods = if !m.methods.is_empty() {
            m.methods.clone()
        } else if let Some(list) = &file.methods {
            list.iter().map(|s| s.parse::<Method>()).collect::<Result<_>>()?
        } else {
            default_methods.to_vec()
        };
        let tol = positive("tol", m.tol.or(file.tol).unwrap_or(DEFAULT_TOL))?;
        Ok(RunConfig {
            params,
            fock,
            methods: dedup(methods),
            g_grid,
            times: Vec::new(),
            gme_stride: DEFAULT_GME_STRIDE,
            sdp: SdpOptions { tol, ..SdpOptions::default() },
            levels: DEFAULT_LEVELS,
            out: m.out.clone().or_else(|| file.out.clone()),
            plot_script: m.plot_script.clone().or_else(|| file.plot_script.clone()),
        })
    }

    fn config_file(m: &ModelArgs) -> Result<ConfigFile> {
        m.config.as_deref().map(ConfigFile::load).transpose().map(Option::unwrap_or_default)
    }

    pub fn for_spectrum(args: &SpectrumArgs) -> Result<Self> {
        let file = Self::config_file(&args.model)?;
        let mut cfg = Self::resolve_model(&args.model, &file, &Method::ALL)?;
        if !cfg.methods.contains(&Method::Exact) {
            cfg.methods.insert(0, Method::Exact);
        }
        cfg.levels = positive_count("levels", args.levels.or(file.levels).unwrap_or(DEFAULT_LEVELS))?;
        if cfg.levels > cfg.fock.dim() {
            return Err(Error::InvalidArgument(format!("levels must be at most {}", cfg.fock.dim())));
        }
        Ok(cfg)
    }

    pub fn for_dynamics(args: &DynamicsArgs) -> Result<Self> {
        let file = Self::config_file(&args.model)?;
        let mut cfg = Self::resolve_model(&args.model, &file, &[Method::Exact])?;
        if cfg.g_grid.len() != 1 {
            return Err(Error::InvalidArgument("dynamics needs a single coupling value".into()));
        }
        if cfg.params.delta <= 0.0 {
            return Err(Error::InvalidArgument("dynamics needs delta > 0".into()));
        }
        let tmax = positive("tmax-scaled", args.tmax_scaled.or(file.tmax_scaled).unwrap_or(DEFAULT_TMAX_SCALED))?;
        let steps = positive_count("steps", args.steps.or(file.steps).unwrap_or(DEFAULT_STEPS))?;
        cfg.times = scaled_grid(tmax, steps)?;
        cfg.gme_stride = positive_count("gme-stride", args.gme_stride.or(file.gme_stride).unwrap_or(DEFAULT_GME_STRIDE))?;
        Ok(cfg)
    }
}

fn dedup(methods: Vec<Method>) -> Vec<Method> {
    let mut out: Vec<Method> = Vec::with_capacity(methods.len());
    for m in methods {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

/// CSV number format: 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.11e}")
    }
}

/// Parses CSV text into a header and numeric rows.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let parse_err = |line: u64, message: String| Error::Parse {
        source_name: "csv".into(),
        line: line as usize,
        column: 1,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| parse_err(line, format!("'{f}' is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Text produced by a subcommand plus the grid points that failed.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub text: String,
    pub failures: Vec<String>,
}

pub fn spectrum_column(m: Method) -> String {
    format!("energy_{}", m.name())
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Report> {
    let results: Vec<(f64, Result<Vec<Vec<f64>>>)> = cfg
        .g_grid
        .par_iter()
        .map(|&g| {
            let run = || -> Result<Vec<Vec<f64>>> {
                let p = cfg.params.with_g(g)?;
                cfg.methods
                    .iter()
                    .map(|&m| solve(m, &p, cfg.fock).map(|es| es.energies()[..cfg.levels].to_vec()))
                    .collect()
            };
            (g, run())
        })
        .collect();

    let mut report = Report::default();
    let header: Vec<String> = ["g_over_omega".to_string(), "level_index".to_string()]
        .into_iter()
        .chain(cfg.methods.iter().map(|&m| spectrum_column(m)))
        .collect();
    let mut rows = Vec::new();
    for (g, res) in results {
        match res {
            Ok(levels) => {
                for k in 0..cfg.levels {
                    let mut row = vec![fmt_num(g / cfg.params.omega), k.to_string()];
                    row.extend(levels.iter().map(|per_method| fmt_num(per_method[k])));
                    rows.push(row);
                }
            }
            Err(e) => report.failures.push(format!("g = {g}: {e}")),
        }
    }
    report.text = csv_text(&header, &rows)?;
    Ok(report)
}

pub const POPULATION_LABELS: [&str; 4] = ["m-1.5", "m-0.5", "m+0.5", "m+1.5"];

/// Per-sample observables of one trajectory.
#[derive(Debug, Clone)]
pub struct DynamicsSeries {
    pub method: Method,
    pub concurrence: Vec<f64>,
    pub gme: Vec<f64>,
    /// True where `gme` is interpolated rather than solved.
    pub gme_interpolated: Vec<bool>,
    pub negativity_ab_c: Vec<f64>,
    pub populations: Vec<[f64; 4]>,
}

/// Indices where the GME program is solved: every `stride`-th sample plus
/// the last one.
pub fn gme_sample_indices(n: usize, stride: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).step_by(stride.max(1)).collect();
    if n > 0 && idx.last() != Some(&(n - 1)) {
        idx.push(n - 1);
    }
    idx
}

pub fn dynamics_series(traj: &Trajectory, stride: usize, sdp: SdpOptions) -> (DynamicsSeries, Vec<String>) {
    let n = traj.times.len();
    let mut failures = Vec::new();
    let conc: Vec<Result<f64>> = traj.spin_states.par_iter().map(concurrence_collective).collect();
    let neg: Vec<Result<f64>> = traj.reduced_states.par_iter().map(|r| negativity(r, QUBIT_A | QUBIT_B)).collect();
    let idx = gme_sample_indices(n, stride);
    let solved: Vec<Result<f64>> = idx.par_iter().map(|&i| gme(&traj.reduced_states[i], sdp).map(|w| w.value)).collect();

    let mut unwrap = |what: &str, i: usize, r: Result<f64>| {
        r.unwrap_or_else(|e| {
            failures.push(format!("{} t_scaled = {}: {what}: {e}", traj.method, traj.times[i]));
            f64::NAN
        })
    };
    let concurrence: Vec<f64> = conc.into_iter().enumerate().map(|(i, r)| unwrap("concurrence", i, r)).collect();
    let negativity_ab_c: Vec<f64> = neg.into_iter().enumerate().map(|(i, r)| unwrap("negativity", i, r)).collect();
    let mut gme_vals = vec![f64::NAN; n];
    let mut gme_interpolated = vec![true; n];
    for (&i, r) in idx.iter().zip(solved) {
        gme_vals[i] = unwrap("gme", i, r);
        gme_interpolated[i] = false;
    }
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        for i in a + 1..b {
            let s = (traj.times[i] - traj.times[a]) / (traj.times[b] - traj.times[a]);
            gme_vals[i] = gme_vals[a] + s * (gme_vals[b] - gme_vals[a]);
        }
    }
    let series = DynamicsSeries {
        method: traj.method,
        concurrence,
        gme: gme_vals,
        gme_interpolated,
        negativity_ab_c,
        populations: traj.populations.clone(),
    };
    (series, failures)
}

pub fn dynamics_columns(m: Method) -> Vec<String> {
    let name = m.name();
    let mut cols = vec![
        format!("concurrence_{name}"),
        format!("gme_{name}"),
        format!("gme_interp_{name}"),
        format!("negativity_AB_C_{name}"),
    ];
    cols.extend(POPULATION_LABELS.iter().map(|l| format!("P_{l}_{name}")));
    cols
}

pub fn cmd_dynamics(cfg: &RunConfig) -> Result<Report> {
    let mut report = Report::default();
    let mut series = Vec::with_capacity(cfg.methods.len());
    for &m in &cfg.methods {
        let traj = run_trajectory(m, &cfg.params, cfg.fock, &cfg.times)?;
        let (s, failures) = dynamics_series(&traj, cfg.gme_stride, cfg.sdp);
        report.failures.extend(failures);
        series.push(s);
    }
    let mut header = vec!["t_scaled".to_string()];
    for s in &series {
        header.extend(dynamics_columns(s.method));
    }
    let rows: Vec<Vec<String>> = cfg
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut row = vec![fmt_num(t)];
            for s in &series {
                row.push(fmt_num(s.concurrence[i]));
                row.push(fmt_num(s.gme[i]));
                row.push(u8::from(s.gme_interpolated[i]).to_string());
                row.push(fmt_num(s.negativity_ab_c[i]));
                row.extend(s.populations[i].iter().map(|&p| fmt_num(p)));
            }
            row
        })
        .collect();
    report.text = csv_text(&header, &rows)?;
    Ok(report)
}

/// Reads a density matrix: first line `dim N`, then `N²` row-major `re,im`
/// entries separated by whitespace. Blank lines and `#` comments are ignored.
pub fn parse_density(text: &str, source_name: &str) -> Result<DensityMatrix> {
    let err = |line: usize, column: usize, message: String| Error::Parse {
        source_name: source_name.into(),
        line,
        column,
        message,
    };
    let mut dim: Option<usize> = None;
    let mut values: Vec<C64> = Vec::new();
    let mut last_line = 1;
    for (li, raw) in text.lines().enumerate() {
        let line_no = li + 1;
        last_line = line_no;
        let content = raw.split('#').next().unwrap_or("");
        let mut offset = 0;
        for token in content.split_whitespace() {
            let start = content[offset..].find(token).map_or(offset, |p| p + offset);
            offset = start + token.len();
            let column = start + 1;
            match dim {
                None => {
                    if token != "dim" {
                        return Err(err(line_no, column, format!("expected `dim N` header, found '{token}'")));
                    }
                    let rest: Vec<&str> = content[offset..].split_whitespace().collect();
                    let n = rest.first().ok_or_else(|| err(line_no, offset + 1, "missing dimension after `dim`".into()))?;
                    let d: usize = n.parse().map_err(|_| err(line_no, offset + 2, format!("bad dimension '{n}'")))?;
                    if d != 4 && d != 8 {
                        return Err(err(line_no, offset + 2, format!("dimension must be 4 or 8, got {d}")));
                    }
                    if rest.len() > 1 {
                        return Err(err(line_no, offset + 2, "unexpected text after the dimension".into()));
                    }
                    dim = Some(d);
                    break;
                }
                Some(d) => {
                    if values.len() == d * d {
                        return Err(err(line_no, column, format!("more than {} entries", d * d)));
                    }
                    let (re, im) = token
                        .split_once(',')
                        .ok_or_else(|| err(line_no, column, format!("expected `re,im`, found '{token}'")))?;
                    let re: f64 = re.parse().map_err(|_| err(line_no, column, format!("bad real part '{re}'")))?;
                    let im: f64 = im
                        .parse()
                        .map_err(|_| err(line_no, column + token.find(',').unwrap_or(0) + 1, format!("bad imaginary part '{im}'")))?;
                    if !re.is_finite() || !im.is_finite() {
                        return Err(err(line_no, column, "entries must be finite".into()));
                    }
                    values.push(C64::new(re, im));
                }
            }
        }
    }
    let d = dim.ok_or_else(|| err(1, 1, "missing `dim N` header".into()))?;
    if values.len() != d * d {
        return Err(err(last_line, 1, format!("expected {} entries, found {}", d * d, values.len())));
    }
    let kind = if d == 8 { DensityKind::Qubits } else { DensityKind::Spin };
    DensityMatrix::new(kind, DMatrix::from_row_slice(d, d, &values))
}

pub fn load_density(path: &Path) -> Result<DensityMatrix> {
    parse_density(&std::fs::read_to_string(path)?, &path.display().to_string())
}

/// Writes a matrix in the format read by [`parse_density`].
pub fn format_density(m: &DMatrix<C64>) -> String {
    let mut s = format!("dim {}\n", m.nrows());
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{},{}", fmt_num(m[(r, c)].re), fmt_num(m[(r, c)].im))).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn cmd_gme(rho: &DensityMatrix, sdp: SdpOptions, with_witness: bool) -> Result<Report> {
    if rho.kind() != DensityKind::Qubits {
        return Err(Error::InvalidDensity("gme expects `dim 8`".into()));
    }
    let r = gme(rho, sdp)?;
    let mut text = format!(
        "E = {}\nstatus = {}\nrelative_gap = {}\niterations = {}\nwitness_expectation = {}\n",
        fmt_num(r.value),
        r.status,
        fmt_num(r.relative_gap),
        r.iterations,
        fmt_num(r.witness_expectation)
    );
    if with_witness {
        text.push_str("witness:\n");
        text.push_str(&format_density(&r.witness));
    }
    Ok(Report { text, failures: Vec::new() })
}

pub fn cmd_concurrence(rho: &DensityMatrix) -> Result<Report> {
    let text = match rho.kind() {
        DensityKind::Spin => format!("C = {}\n", fmt_num(concurrence_collective(rho)?)),
        DensityKind::Qubits => {
            let mut s = String::new();
            for (i, j, label) in [(0, 1, "AB"), (0, 2, "AC"), (1, 2, "BC")] {
                let _ = writeln!(s, "C_{label} = {}", fmt_num(pairwise_concurrence(rho, i, j)?));
            }
            s
        }
    };
    Ok(Report { text, failures: Vec::new() })
}

pub fn cmd_negativity(rho: &DensityMatrix, bipartition: Option<&str>) -> Result<Report> {
    let masks = match bipartition {
        Some(b) => vec![parse_bipartition(b)?],
        None => vec![QUBIT_A, QUBIT_B, QUBIT_C],
    };
    let mut text = String::new();
    for m in masks {
        let _ = writeln!(text, "N({}) = {}", bipartition_label(m), fmt_num(negativity(rho, m)?));
    }
    Ok(Report { text, failures: Vec::new() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Spectrum,
    Dynamics,
}

fn require_columns<'a>(header: &[String], names: impl IntoIterator<Item = &'a str>) -> Result<()> {
    for n in names {
        if !header.iter().any(|h| h == n) {
            return Err(Error::MissingColumn(n.to_string()));
        }
    }
    Ok(())
}

fn gp_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Gnuplot script for a CSV written by `spectrum` or `dynamics`.
pub fn plot_script(csv_path: &Path, kind: PlotKind) -> Result<String> {
    let text = std::fs::read_to_string(csv_path)?;
    let (header, rows) = read_csv(&text)?;
    let file = gp_quote(&csv_path.display().to_string());
    let mut s = String::from("set datafile separator ','\nset datafile columnheaders\n");
    match kind {
        PlotKind::Spectrum => {
            require_columns(&header, ["g_over_omega", "level_index", "energy_exact"])?;
            let li = header.iter().position(|h| h == "level_index").expect("checked");
            let levels = rows.iter().map(|r| r[li] as usize + 1).max().unwrap_or(1);
            let energy: Vec<&String> = header.iter().filter(|h| h.starts_with("energy_")).collect();
            let _ = writeln!(s, "set xlabel 'g/omega'\nset ylabel 'E/omega'\nset key outside right");
            let _ = writeln!(s, "levels = {levels}");
            let plots: Vec<String> = energy
                .iter()
                .enumerate()
                .map(|(i, col)| {
                    let title = col.trim_start_matches("energy_");
                    format!(
                        "for [k=0:levels-1] {file} every levels::k using 'g_over_omega':'{col}' with lines lc {} dt {} title (k == 0 ? '{title}' : '')",
                        i + 1,
                        i + 1
                    )
                })
                .collect();
            let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
        }
        PlotKind::Dynamics => {
            require_columns(&header, ["t_scaled"])?;
            let methods: Vec<&str> = header.iter().filter_map(|h| h.strip_prefix("concurrence_")).collect();
            if methods.is_empty() {
                return Err(Error::MissingColumn("concurrence_<method>".into()));
            }
            for m in &methods {
                let cols = [format!("gme_{m}"), format!("negativity_AB_C_{m}")];
                require_columns(&header, cols.iter().map(String::as_str))?;
            }
            let _ = writeln!(s, "set multiplot layout 3,1");
            for (quantity, label) in [("concurrence", "C"), ("gme", "E"), ("negativity_AB_C", "N_{AB|C}")] {
                let _ = writeln!(s, "set ylabel '{label}'");
                if quantity == "negativity_AB_C" {
                    let _ = writeln!(s, "set xlabel 'Delta t / 2 pi'");
                }
                let plots: Vec<String> = methods
                    .iter()
                    .map(|m| format!("{file} using 't_scaled':'{quantity}_{m}' with lines title '{m}'"))
                    .collect();
                let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
            }
            let _ = writeln!(s, "unset multiplot");
        }
    }
    Ok(s)
}

/// Rayon pool capped by `DICKE3_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn emit_with_plot(report: &Report, cfg: &RunConfig, kind: PlotKind) -> Result<()> {
    emit(&report.text, cfg.out.as_deref())?;
    if let Some(script) = &cfg.plot_script {
        let csv = cfg
            .out
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("--plot-script needs --out".into()))?;
        std::fs::write(script, plot_script(csv, kind)?)?;
    }
    Ok(())
}

/// Runs one parsed command line; failing grid points are returned in the report.
pub fn run(cli: &Cli) -> Result<Report> {
    let pool = thread_pool()?;
    pool.install(|| match &cli.command {
        Command::Spectrum(a) => {
            let cfg = RunConfig::for_spectrum(a)?;
            let r = cmd_spectrum(&cfg)?;
            emit_with_plot(&r, &cfg, PlotKind::Spectrum)?;
            Ok(r)
        }
        Command::Dynamics(a) => {
            let cfg = RunConfig::for_dynamics(a)?;
            let r = cmd_dynamics(&cfg)?;
            emit_with_plot(&r, &cfg, PlotKind::Dynamics)?;
            Ok(r)
        }
        Command::Gme(a) => {
            let tol = positive("tol", a.tol.unwrap_or(DEFAULT_TOL))?;
            let rho = load_density(&a.state.input)?;
            let r = cmd_gme(&rho, SdpOptions { tol, ..SdpOptions::default() }, a.witness)?;
            emit(&r.text, a.state.out.as_deref())?;
            Ok(r)
        }
        Command::Concurrence(a) => {
            let r = cmd_concurrence(&load_density(&a.input)?)?;
            emit(&r.text, a.out.as_deref())?;
            Ok(r)
        }
        Command::Negativity(a) => {
            let r = cmd_negativity(&load_density(&a.state.input)?, a.bipartition.as_deref())?;
            emit(&r.text, a.state.out.as_deref())?;
            Ok(r)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::{ghz_state, w_state};

    #[test]
    fn coupling_grid_forms() {
        assert_eq!(parse_coupling_grid("0.25").unwrap(), vec![0.25]);
        assert_eq!(parse_coupling_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        for bad in ["", "a", "0:1", "0:1:0", "0:1:x", "-1", "nan"] {
            assert!(parse_coupling_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn number_format_round_trips() {
        for x in [0.0, 1.0, -2.5e-13, 1.0 / 3.0, 123456.789, f64::MIN_POSITIVE] {
            let s = fmt_num(x);
            let y: f64 = s.parse().unwrap();
            assert_eq!(fmt_num(y), s);
            assert!((y - x).abs() <= 1e-11 * x.abs());
        }
        assert_eq!(fmt_num(f64::NAN), "nan");
    }

    #[test]
    fn config_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "delta = 0.5\nnmax = 12\ng = \"0:1:3\"\nmethods = [\"grwa\"]\nlevels = 4\n").unwrap();
        let args = SpectrumArgs {
            model: ModelArgs { config: Some(path.clone()), nmax: Some(20), ..Default::default() },
            levels: None,
        };
        let cfg = RunConfig::for_spectrum(&args).unwrap();
        assert_eq!(cfg.params.delta, 0.5);
        assert_eq!(cfg.params.omega, DEFAULT_OMEGA);
        assert_eq!(cfg.fock.n_max(), 20);
        assert_eq!(cfg.g_grid, vec![0.0, 0.5, 1.0]);
        assert_eq!(cfg.methods, vec![Method::Exact, Method::Grwa]);
        assert_eq!(cfg.levels, 4);
    }

    #[test]
    fn config_rejects_unknown_keys_with_position() {
        let e = ConfigFile::parse("delta = 1.0\nbogus = 2\n", "x.toml").unwrap_err();
        match e {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn invalid_numbers_rejected() {
        let mut a = DynamicsArgs::default();
        a.model.omega = Some(-1.0);
        assert!(RunConfig::for_dynamics(&a).is_err());
        let mut a = DynamicsArgs::default();
        a.steps = Some(0);
        assert!(RunConfig::for_dynamics(&a).is_err());
        let mut a = DynamicsArgs::default();
        a.model.g = Some("0:1:4".into());
        assert!(RunConfig::for_dynamics(&a).is_err());
        let mut a = DynamicsArgs::default();
        a.model.tol = Some(0.0);
        assert!(RunConfig::for_dynamics(&a).is_err());
    }

    #[test]
    fn density_round_trip() {
        let rho = w_state();
        let text = format_density(rho.entries());
        let back = parse_density(&text, "w").unwrap();
        assert!((back.entries() - rho.entries()).camax() < 1e-11);
    }

    #[test]
    fn density_parse_errors_carry_position() {
        let cases = [
            ("dims 8\n", 1, 1),
            ("dim 3\n", 1, 5),
            ("dim 4\n1,0 0,0 0,0 0,0\n0,0 x,0\n", 3, 5),
            ("dim 4\n1,0 0,0 0,0 0,0\n0,0 0;0\n", 3, 5),
            ("# comment\ndim 4\n1,0\n", 3, 1),
        ];
        for (text, line, column) in cases {
            match parse_density(text, "in") {
                Err(Error::Parse { line: l, column: c, .. }) => assert_eq!((l, c), (line, column), "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn non_psd_density_rejected() {
        let text = "dim 4\n1.5,0 0,0 0,0 0,0\n0,0 -0.5,0 0,0 0,0\n0,0 0,0 0,0 0,0\n0,0 0,0 0,0 0,0\n";
        assert!(matches!(parse_density(text, "bad"), Err(Error::InvalidDensity(_))));
    }

    #[test]
    fn gme_report_for_ghz() {
        let r = cmd_gme(&ghz_state(), SdpOptions::default(), true).unwrap();
        assert!(r.text.starts_with("E = 4.99999"));
        assert!(r.text.contains("status = optimal"));
        assert!(r.text.contains("witness:\ndim 8\n"));
    }

    #[test]
    fn negativity_and_concurrence_reports() {
        let r = cmd_negativity(&ghz_state(), Some("AB|C")).unwrap();
        assert_eq!(r.text, "N(AB|C) = 5.00000000000e-1\n");
        assert_eq!(cmd_negativity(&ghz_state(), None).unwrap().text.lines().count(), 3);
        let c = cmd_concurrence(&w_state()).unwrap();
        assert!(c.text.contains("C_AB = 6.66666666667e-1"));
    }

    #[test]
    fn gme_indices_include_last_sample() {
        assert_eq!(gme_sample_indices(10, 4), vec![0, 4, 8, 9]);
        assert_eq!(gme_sample_indices(9, 4), vec![0, 4, 8]);
        assert_eq!(gme_sample_indices(3, 1), vec![0, 1, 2]);
    }

    #[test]
    fn spectrum_csv_layout() {
        let args = SpectrumArgs {
            model: ModelArgs { g: Some("0:0.2:2".into()), nmax: Some(10), methods: vec![Method::Zeroth], ..Default::default() },
            levels: Some(3),
        };
        let cfg = RunConfig::for_spectrum(&args).unwrap();
        let r = cmd_spectrum(&cfg).unwrap();
        assert!(r.failures.is_empty());
        let (header, rows) = read_csv(&r.text).unwrap();
        assert_eq!(header, ["g_over_omega", "level_index", "energy_exact", "energy_zeroth"]);
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[4][0], 0.2);
        assert_eq!(rows[4][1], 1.0);
    }

    #[test]
    fn plot_script_checks_columns() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("s.csv");
        std::fs::write(&good, "g_over_omega,level_index,energy_exact,energy_grwa\n0,0,1,1\n0,1,2,2\n").unwrap();
        let s = plot_script(&good, PlotKind::Spectrum).unwrap();
        assert!(s.contains("levels = 2"));
        assert!(s.contains("'energy_grwa'"));
        assert_eq!(s, plot_script(&good, PlotKind::Spectrum).unwrap());

        let bad = dir.path().join("d.csv");
        std::fs::write(&bad, "t_scaled,concurrence_exact,gme_exact\n0,1,1\n").unwrap();
        match plot_script(&bad, PlotKind::Dynamics) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "negativity_AB_C_exact"),
            other => panic!("{other:?}"),
        }
        match plot_script(&good, PlotKind::Dynamics) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "t_scaled"),
            other => panic!("{other:?}"),
        }
    }
}
