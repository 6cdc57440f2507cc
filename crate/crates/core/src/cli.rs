//! Command-line front end and the CSV/report formats it reads and writes.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 degenerate
//! physics, 4 fit did not converge.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::coupled_mode::{
    find_5050_lengths, first_5050_lengths, sweep_bunching_vs_length, SweepPoint,
};
use crate::error::Error;
use crate::experiment_sim::{simulate, simulate_sequential, CoincidenceRecord};
use crate::fitting::{fit_dip, FitOptions, FitResult, Polarity};

/// Environment variable that overrides the configured RNG seed.
pub const SEED_ENV: &str = "PLASMON_HOM_SEED";

pub const SWEEP_HEADER: &str = "length_um,reflectance,transmittance,throughput,P";
pub const RECORDS_HEADER: &str = "stage_position_um,counts,integration_s";
pub const FIT_CSV_HEADER: &str = "parameter,value,std_error";

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "plasmon-hom", version, about = "Two-photon interference in lossy directional couplers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolarityArg {
    Dip,
    Peak,
}

impl From<PolarityArg> for Polarity {
    fn from(p: PolarityArg) -> Self {
        match p {
            PolarityArg::Dip => Polarity::Dip,
            PolarityArg::Peak => Polarity::Peak,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bunching probability and splitting ratio versus coupling length.
    #[command(group(ArgGroup::new("selection").required(true).args(["lengths", "at_5050_branches"])))]
    SweepCoupler {
        config: PathBuf,
        /// Comma-separated coupling lengths in um.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        lengths: Option<Vec<f64>>,
        /// Use the first N balanced-split lengths.
        #[arg(long = "at-5050-branches")]
        at_5050_branches: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Also write a gnuplot script that plots the CSV.
        #[arg(long)]
        gnuplot: Option<PathBuf>,
    },
    /// Poisson-noise coincidence scan.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Evaluate points on one thread (output is identical).
        #[arg(long)]
        sequential: bool,
        #[arg(long)]
        gnuplot: Option<PathBuf>,
    },
    /// Fit a dip or peak to a coincidence scan.
    Fit {
        data: PathBuf,
        #[arg(long, value_enum)]
        polarity: PolarityArg,
        /// Plain-text report path.
        #[arg(long)]
        out: PathBuf,
        /// CSV report path; defaults to the text report path with a .csv extension.
        #[arg(long)]
        csv_out: Option<PathBuf>,
        /// Run configuration supplying [fit] options.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the balanced-split lengths of the configured coupler.
    FindSplitter {
        config: PathBuf,
        #[arg(long)]
        max_length_um: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            code: if e.is_degenerate() { EXIT_DEGENERATE } else { EXIT_INPUT },
            message: e.to_string(),
        }
    }
}

/// Formats like C's `%.12g`.
pub fn fmt_num(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= DIGITS {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        trim_zeros(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rows of a coupler sweep, ordered by length.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_HEADER);
        out.push('\n');
        for p in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_num(p.length_um),
                fmt_num(p.ratio.reflectance),
                fmt_num(p.ratio.transmittance),
                fmt_num(p.ratio.throughput),
                fmt_num(p.bunching.unwrap_or(f64::NAN)),
            );
        }
        out
    }
}

pub fn records_to_csv(records: &[CoincidenceRecord]) -> String {
    let mut out = String::from(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_num(r.stage_position_um),
            r.counts,
            fmt_num(r.integration_time_s)
        );
    }
    out
}

/// Parses the dataset CSV written by `simulate`. Errors name the
/// offending line (1-based).
pub fn parse_records_csv(text: &str) -> Result<Vec<CoincidenceRecord>, CliError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == RECORDS_HEADER => {}
        Some((_, header)) => {
            return Err(CliError::input(format!(
                "line 1: expected header `{RECORDS_HEADER}`, found `{}`",
                header.trim()
            )))
        }
        None => return Err(CliError::input("line 1: empty file")),
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(CliError::input(format!(
                "line {lineno}: expected 3 fields, found {}",
                fields.len()
            )));
        }
        let bad = |what: &str| CliError::input(format!("line {lineno}: invalid {what} `{line}`"));
        let stage_position_um: f64 = fields[0].parse().map_err(|_| bad("stage position"))?;
        let counts: u64 = fields[1].parse().map_err(|_| bad("counts"))?;
        let integration_time_s: f64 = fields[2].parse().map_err(|_| bad("integration time"))?;
        if !stage_position_um.is_finite() {
            return Err(bad("stage position"));
        }
        if !(integration_time_s.is_finite() && integration_time_s > 0.0) {
            return Err(bad("integration time"));
        }
        records.push(CoincidenceRecord {
            stage_position_um,
            counts,
            integration_time_s,
        });
    }
    Ok(records)
}

pub fn fit_report_text(result: &FitResult, source: &str) -> String {
    let m = &result.model;
    let e = &result.std_errors;
    let (c_max, c_min) = m.extremes();
    let mut out = String::new();
    let _ = writeln!(out, "# plasmon-hom fit report");
    let _ = writeln!(out, "data: {source}");
    let _ = writeln!(
        out,
        "polarity: {}",
        match m.polarity {
            Polarity::Dip => "dip",
            Polarity::Peak => "peak",
        }
    );
    let _ = writeln!(out, "points: {}", result.n_points);
    let _ = writeln!(out, "converged: {}", result.converged);
    let _ = writeln!(out, "iterations: {}", result.iterations);
    for (name, value, err) in [
        ("baseline_C", m.baseline, e.baseline),
        ("visibility_V", m.visibility, e.visibility),
        ("coherence_length_um", m.coherence_length_um, e.coherence_length_um),
        ("center_um", m.center_um, e.center_um),
    ] {
        let _ = writeln!(out, "{name} = {} +/- {}", fmt_num(value), fmt_num(err));
    }
    let _ = writeln!(out, "model_max = {}", fmt_num(c_max));
    let _ = writeln!(out, "model_min = {}", fmt_num(c_min));
    let _ = writeln!(out, "weighted_rss = {}", fmt_num(result.rss));
    out
}

pub fn fit_report_csv(result: &FitResult) -> String {
    let m = &result.model;
    let e = &result.std_errors;
    let (c_max, c_min) = m.extremes();
    let mut out = String::from(FIT_CSV_HEADER);
    out.push('\n');
    for (name, value, err) in [
        ("baseline_C", m.baseline, e.baseline),
        ("visibility_V", m.visibility, e.visibility),
        ("coherence_length_um", m.coherence_length_um, e.coherence_length_um),
        ("center_um", m.center_um, e.center_um),
    ] {
        let _ = writeln!(out, "{name},{},{}", fmt_num(value), fmt_num(err));
    }
    let _ = writeln!(out, "model_max,{},", fmt_num(c_max));
    let _ = writeln!(out, "model_min,{},", fmt_num(c_min));
    let _ = writeln!(out, "weighted_rss,{},", fmt_num(result.rss));
    let _ = writeln!(out, "iterations,{},", result.iterations);
    let _ = writeln!(out, "converged,{},", u8::from(result.converged));
    out
}

fn gnuplot_script(csv: &Path, x_col: usize, y_col: usize, xlabel: &str, ylabel: &str) -> String {
    format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\nplot '{}' using {x_col}:{y_col} with points pt 7\n",
        csv.display()
    )
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    RunConfig::from_path(path).map_err(|e| CliError::input(e.to_string()))
}

fn seed_from_env() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::input(format!("{SEED_ENV} is not an unsigned integer: `{v}`"))),
        Err(_) => Ok(None),
    }
}

pub fn sweep_coupler(
    config: &RunConfig,
    lengths: Option<&[f64]>,
    branches: Option<usize>,
) -> Result<SweepReport, CliError> {
    let (n1, n2, wavelength) = config.coupler_indices().map_err(|e| CliError::input(e.to_string()))?;
    let lengths = match (lengths, branches) {
        (Some(l), None) => l.to_vec(),
        (None, Some(0)) => return Err(CliError::input("--at-5050-branches must be >= 1")),
        (None, Some(n)) => first_5050_lengths(n1, n2, wavelength, n)?,
        _ => return Err(CliError::input("give exactly one of --lengths or --at-5050-branches")),
    };
    let mut rows = sweep_bunching_vs_length(n1, n2, wavelength, &lengths)?;
    rows.sort_by(|a, b| a.length_um.total_cmp(&b.length_um));
    for p in rows.iter().filter(|p| p.bunching.is_none()) {
        log::warn!("no post-selected events at L = {} um", p.length_um);
    }
    Ok(SweepReport { rows })
}

/// Balanced-split table: `(m, L_m, P, throughput)`.
pub fn splitter_table(config: &RunConfig, max_length_um: f64) -> Result<String, CliError> {
    let (n1, n2, wavelength) = config.coupler_indices().map_err(|e| CliError::input(e.to_string()))?;
    let lengths = find_5050_lengths(n1, n2, wavelength, max_length_um)?;
    let mut out = String::from("m,length_um,P,throughput\n");
    if lengths.is_empty() {
        return Ok(out);
    }
    let rows = sweep_bunching_vs_length(n1, n2, wavelength, &lengths)?;
    for (m, p) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{m},{},{},{}",
            fmt_num(p.length_um),
            fmt_num(p.bunching.unwrap_or(f64::NAN)),
            fmt_num(p.ratio.throughput)
        );
    }
    Ok(out)
}

/// Runs one command, writing any console output to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::SweepCoupler {
            config,
            lengths,
            at_5050_branches,
            out,
            gnuplot,
        } => {
            let cfg = load_config(&config)?;
            let report = sweep_coupler(&cfg, lengths.as_deref(), at_5050_branches)?;
            write_file(&out, &report.to_csv())?;
            if let Some(gp) = gnuplot {
                write_file(&gp, &gnuplot_script(&out, 1, 5, "coupling length (um)", "P"))?;
            }
            Ok(())
        }
        Command::Simulate {
            config,
            seed,
            out,
            sequential,
            gnuplot,
        } => {
            let cfg = load_config(&config)?;
            let seed = match seed {
                Some(s) => Some(s),
                None => seed_from_env()?,
            };
            let experiment = cfg
                .experiment_config(seed)
                .map_err(|e| CliError::input(e.to_string()))?;
            let records = if sequential {
                simulate_sequential(&experiment)?
            } else {
                simulate(&experiment)?
            };
            write_file(&out, &records_to_csv(&records))?;
            if let Some(gp) = gnuplot {
                write_file(&gp, &gnuplot_script(&out, 1, 2, "stage position (um)", "coincidences"))?;
            }
            Ok(())
        }
        Command::Fit {
            data,
            polarity,
            out,
            csv_out,
            config,
        } => {
            let options = match config {
                Some(path) => load_config(&path)?
                    .fit_options()
                    .map_err(|e| CliError::input(e.to_string()))?,
                None => FitOptions::default(),
            };
            let text = std::fs::read_to_string(&data)
                .map_err(|e| CliError::input(format!("cannot read {}: {e}", data.display())))?;
            let records = parse_records_csv(&text)?;
            let result = fit_dip(&records, polarity.into(), &options)?;
            let report = fit_report_text(&result, &data.display().to_string());
            write_file(&out, &report)?;
            let csv_path = csv_out.unwrap_or_else(|| out.with_extension("csv"));
            write_file(&csv_path, &fit_report_csv(&result))?;
            let _ = stdout.write_all(report.as_bytes());
            if result.converged {
                Ok(())
            } else {
                Err(CliError {
                    code: EXIT_NOT_CONVERGED,
                    message: format!("fit did not converge after {} iterations", result.iterations),
                })
            }
        }
        Command::FindSplitter {
            config,
            max_length_um,
        } => {
            let cfg = load_config(&config)?;
            let table = splitter_table(&cfg, max_length_um)?;
            let _ = stdout.write_all(table.as_bytes());
            Ok(())
        }
    }
}
