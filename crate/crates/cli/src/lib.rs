//! Command-line front end: parses arguments, runs one subcommand and maps
//! failures to exit codes (1 for invalid input, 2 for usage errors).

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use carpet_spectra::covering::{estimate_spectrum, CoveringOptions, DEFAULT_CAP};
use carpet_spectra::input::parse_carpet;
use carpet_spectra::variational::{maximize_f, OracleOptions};
use carpet_spectra::{
    build_partition, classify_transitions, spectrum, spectrum_grid, summarize, uniform_thetas,
    CarpetSummary, Error, GLCarpet, Parallelism, SpectrumPartition,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub const THREADS_ENV: &str = "CARPET_SPECTRA_THREADS";

#[derive(Debug, Parser)]
#[command(name = "carpet-spectra", version, about = "Assouad spectra of self-affine carpets")]
pub struct Cli {
    /// Write output here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Evaluate grids and oracles on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Input {
    /// Carpet description in JSON.
    pub input: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that the input describes a valid carpet.
    Validate(Input),
    /// Dimension constants as JSON.
    Dims(Input),
    /// Spectrum partition of [t_min, t_max] as JSON rows.
    Partition(Input),
    /// Spectrum on a uniform grid (CSV) or at one θ (JSON).
    Spectrum {
        #[command(flatten)]
        input: Input,
        #[arg(long, conflicts_with = "theta", value_parser = grid_size)]
        grid: Option<usize>,
        #[arg(long, value_parser = open_unit)]
        theta: Option<f64>,
    },
    /// Phase transitions as JSON.
    Transitions(Input),
    /// Numerical cross-checks of the closed form.
    #[command(subcommand)]
    Oracle(Oracle),
    /// CSV of the spectrum for plotting.
    PlotData {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 1000, value_parser = grid_size)]
        grid: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum Oracle {
    /// Maximise the variational functional at θ.
    Variational {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_parser = open_unit)]
        theta: f64,
        /// Random Dirichlet starts.
        #[arg(long, default_value_t = 256)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Count covering squares at scale r.
    Covering {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_parser = open_unit)]
        theta: f64,
        #[arg(long, value_parser = open_unit)]
        scale: f64,
        #[arg(long, default_value_t = DEFAULT_CAP, value_parser = positive)]
        cap: usize,
    },
}

fn open_unit(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(format!("{x} is not in (0, 1)"))
    }
}

fn grid_size(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n >= 2 {
        Ok(n)
    } else {
        Err("grid needs at least 2 points".into())
    }
}

fn positive(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n > 0 {
        Ok(n)
    } else {
        Err("must be positive".into())
    }
}

#[derive(Serialize)]
struct VariationalReport {
    theta: f64,
    value: f64,
    closed_form: f64,
    abs_diff: f64,
    argmax_w: Vec<f64>,
    argmax_v: Vec<f64>,
}

#[derive(Serialize)]
struct CoveringReport {
    theta: f64,
    r: f64,
    estimate: f64,
    closed_form: f64,
    abs_diff: f64,
    capped: bool,
}

/// Failure kinds, mapped to exit codes by [`run`].
enum Failure {
    Invalid(anyhow::Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(anyhow::Error::new(e.clone()).context(e.code()))
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Invalid(e)
    }
}

fn load(input: &Input) -> Result<GLCarpet, Failure> {
    let text = fs::read_to_string(&input.input)
        .with_context(|| format!("cannot read {}", input.input.display()))?;
    Ok(parse_carpet(&text)?)
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serialises");
    s.push('\n');
    s
}

fn csv(carpet: &GLCarpet, summary: &CarpetSummary, n: usize, mode: Parallelism) -> Result<String, Failure> {
    let partition = partition_or_none(carpet, summary)?;
    let pts = spectrum_grid(carpet, summary, partition.as_ref(), &uniform_thetas(n), mode)?;
    let mut s = String::from("theta,dim,case\n");
    for p in pts {
        s.push_str(&format!("{:.16e},{:.16e},{}\n", p.theta, p.value, p.case));
    }
    Ok(s)
}

fn partition_or_none(carpet: &GLCarpet, summary: &CarpetSummary) -> Result<Option<SpectrumPartition>, Failure> {
    if summary.degenerate {
        Ok(None)
    } else {
        Ok(Some(build_partition(carpet, summary)?))
    }
}

fn execute(cli: &Cli, err: &mut dyn Write) -> Result<String, Failure> {
    let mode = if cli.sequential {
        Parallelism::Sequential
    } else {
        Parallelism::Parallel
    };
    let warn = |err: &mut dyn Write, p: &SpectrumPartition| {
        for w in &p.warnings {
            let _ = writeln!(err, "warning: {w}");
        }
    };
    Ok(match &cli.command {
        Command::Validate(input) => {
            let k = load(input)?;
            format!("ok: {} maps in {} columns\n", k.num_maps(), k.num_columns())
        }
        Command::Dims(input) => json(&summarize(&load(input)?)),
        Command::Partition(input) => {
            let k = load(input)?;
            let p = build_partition(&k, &summarize(&k))?;
            warn(err, &p);
            json(&p.parts)
        }
        Command::Spectrum { input, grid, theta } => {
            let k = load(input)?;
            let s = summarize(&k);
            match (grid, theta) {
                (_, Some(theta)) => {
                    let p = partition_or_none(&k, &s)?;
                    if let Some(p) = &p {
                        warn(err, p);
                    }
                    json(&spectrum(&k, &s, p.as_ref(), *theta)?)
                }
                (Some(n), None) => csv(&k, &s, *n, mode)?,
                (None, None) => return Err(Failure::Usage("spectrum needs --grid N or --theta X".into())),
            }
        }
        Command::Transitions(input) => {
            let k = load(input)?;
            let s = summarize(&k);
            match partition_or_none(&k, &s)? {
                // constant spectrum
                None => json(&Vec::<()>::new()),
                Some(p) => {
                    warn(err, &p);
                    json(&classify_transitions(&s, &p)?)
                }
            }
        }
        Command::PlotData { input, grid } => {
            let k = load(input)?;
            csv(&k, &summarize(&k), *grid, mode)?
        }
        Command::Oracle(Oracle::Variational { input, theta, starts, seed }) => {
            let k = load(input)?;
            let s = summarize(&k);
            let opts = OracleOptions {
                random_starts: *starts,
                seed: *seed,
                parallelism: mode,
                ..OracleOptions::default()
            };
            let m = maximize_f(&k, &s, *theta, &opts)?;
            let closed_form = spectrum(&k, &s, None, *theta)?.value;
            json(&VariationalReport {
                theta: *theta,
                value: m.value,
                closed_form,
                abs_diff: (m.value - closed_form).abs(),
                argmax_w: m.w.into_vec(),
                argmax_v: m.v.into_vec(),
            })
        }
        Command::Oracle(Oracle::Covering { input, theta, scale, cap }) => {
            let k = load(input)?;
            let s = summarize(&k);
            let opts = CoveringOptions {
                cap: *cap,
                parallelism: mode,
                ..CoveringOptions::default()
            };
            let e = estimate_spectrum(&k, *theta, *scale, &opts)?;
            if e.capped {
                let _ = writeln!(err, "warning: enumeration capped at {cap} squares");
            }
            let closed_form = spectrum(&k, &s, None, *theta)?.value;
            json(&CoveringReport {
                theta: *theta,
                r: *scale,
                estimate: e.estimate,
                closed_form,
                abs_diff: (e.estimate - closed_form).abs(),
                capped: e.capped,
            })
        }
    })
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    // a second call in the same process (tests) finds the pool already built
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    if let Err(msg) = configure_threads() {
        let _ = writeln!(err, "error: {msg}");
        return 2;
    }
    match execute(&cli, err) {
        Ok(text) => {
            let written = match &cli.output {
                Some(path) => fs::write(path, &text).with_context(|| format!("cannot write {}", path.display())),
                None => out.write_all(text.as_bytes()).context("cannot write output"),
            };
            match written {
                Ok(()) => 0,
                Err(e) => {
                    let _ = writeln!(err, "error: {e:#}");
                    1
                }
            }
        }
        Err(Failure::Invalid(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}
