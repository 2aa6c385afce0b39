//! `ridgeflow` command line: `extract`, `enhance`, `orientation`, `segment`,
//! `synth`, `eval` and `gradcheck`.
//!
//! Exit codes: 0 success, 1 check failure, 2 I/O or parse error, 3 pipeline
//! or domain error.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;

use clap::{Arg, ArgMatches, Command};
use ridgeflow::config::CONFIG_KEYS;
use ridgeflow::{Error, PipelineConfig, PipelineError};

mod commands;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_PIPELINE: i32 = 3;

/// A failed invocation with its exit code.
#[derive(Debug)]
pub enum Failure {
    Check(String),
    Io(String),
    Pipeline(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Check(_) => EXIT_CHECK,
            Failure::Io(_) => EXIT_IO,
            Failure::Pipeline(_) => EXIT_PIPELINE,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Check(m) | Failure::Io(m) | Failure::Pipeline(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } | Error::Parse { .. } | Error::Config(_) => Failure::Io(e.to_string()),
            other => Failure::Pipeline(other.to_string()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e.source {
            Error::Io { .. } | Error::Parse { .. } => Failure::Io(e.to_string()),
            _ => Failure::Pipeline(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

/// Flag mirroring a config key: dots and underscores become dashes.
pub fn flag_name(key: &str) -> String {
    key.replace(['.', '_'], "-")
}

fn config_args(cmd: Command) -> Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("key=value config file; flags override it"),
    );
    CONFIG_KEYS.iter().fold(cmd, |cmd, (key, help)| {
        cmd.arg(
            Arg::new(*key)
                .long(flag_name(key))
                .value_name("VALUE")
                .allow_negative_numbers(true)
                .help(*help)
                .help_heading("Configuration"),
        )
    })
}

fn input_output(cmd: Command, out_help: &'static str) -> Command {
    cmd.arg(Arg::new("input").required(true).value_name("INPUT").help("input PGM"))
        .arg(
            Arg::new("out")
                .long("out")
                .short('o')
                .required(true)
                .value_name("PATH")
                .help(out_help),
        )
}

pub fn command() -> Command {
    Command::new("ridgeflow")
        .about("Fingerprint orientation, segmentation, enhancement and minutiae extraction")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(config_args(
            input_output(
                Command::new("extract").about("Run the full pipeline on a PGM or a directory of PGMs"),
                "output directory",
            )
            .arg(
                Arg::new("jobs")
                    .long("jobs")
                    .short('j')
                    .value_name("N")
                    .value_parser(clap::value_parser!(usize))
                    .help("worker threads for directory input (default: all cores)"),
            ),
        ))
        .subcommand(config_args(input_output(
            Command::new("enhance").about("Write the enhanced ridge pattern cos(E) as a PGM"),
            "output PGM",
        )))
        .subcommand(config_args(
            input_output(
                Command::new("orientation").about("Write the orientation field as text"),
                "output text file",
            )
            .arg(
                Arg::new("stride")
                    .long("stride")
                    .value_name("N")
                    .default_value("8")
                    .value_parser(clap::value_parser!(usize))
                    .help("cell size of the written field"),
            ),
        ))
        .subcommand(config_args(input_output(
            Command::new("segment").about("Write the foreground mask as a {0, 255} PGM"),
            "output PGM",
        )))
        .subcommand(
            Command::new("synth")
                .about("Render a synthetic print with planted minutiae")
                .arg(Arg::new("out").long("out").short('o').required(true).value_name("DIR").help("output directory"))
                .arg(num_arg("width", "256", "image width"))
                .arg(num_arg("height", "256", "image height"))
                .arg(num_arg("minutiae", "5", "number of planted minutiae"))
                .arg(num_arg("min-sep", "40", "minimum distance between minutiae"))
                .arg(num_arg("margin", "40", "minimum distance from the border"))
                .arg(num_arg("noise", "0.2", "Gaussian noise sigma (amplitude 1)"))
                .arg(num_arg("seed", "0", "random seed")),
        )
        .subcommand(
            Command::new("eval")
                .about("Match predicted minutiae against ground truth")
                .arg(Arg::new("pred").required(true).value_name("PRED"))
                .arg(Arg::new("gt").required(true).value_name("GT"))
                .arg(num_arg("dist-thr", "15", "match distance threshold (pixels)"))
                .arg(num_arg("angle-thr", "30", "match direction threshold (degrees)"))
                .arg(Arg::new("curve").long("curve").value_name("CSV").help("write a precision/recall curve"))
                .arg(
                    Arg::new("thresholds")
                        .long("thresholds")
                        .value_name("LIST")
                        .help("comma-separated ascending score thresholds for --curve (default 0, 0.05, ..., 1)"),
                ),
        )
        .subcommand(
            Command::new("gradcheck")
                .about("Check the loss gradients against central finite differences")
                .arg(num_arg("seed", "0", "random seed"))
                .arg(
                    Arg::new("perturb")
                        .long("perturb")
                        .hide(true)
                        .value_name("BIAS")
                        .default_value("0")
                        .value_parser(clap::value_parser!(f64)),
                ),
        )
}

fn num_arg(name: &'static str, default: &'static str, help: &'static str) -> Arg {
    Arg::new(name)
        .long(name)
        .value_name("N")
        .default_value(default)
        .help(help)
}

/// Config file (if any) with flag overrides applied, validated.
pub fn build_config(m: &ArgMatches) -> CliResult<PipelineConfig> {
    let mut cfg = match m.get_one::<String>("config") {
        Some(path) => ridgeflow::load_config(path)?,
        None => PipelineConfig::default(),
    };
    for (key, _) in CONFIG_KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)
                .map_err(|e| Failure::Io(format!("--{}: {e}", flag_name(key))))?;
        }
    }
    cfg.validate().map_err(|e| Failure::Io(e.to_string()))?;
    Ok(cfg)
}

/// Parses `args` (program name first) and runs the subcommand, writing
/// results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            return if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                EXIT_IO
            } else {
                let _ = write!(out, "{}", e.render());
                EXIT_OK
            };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let result = match name {
        "extract" => commands::extract(sub, out),
        "enhance" => commands::enhance(sub, out),
        "orientation" => commands::orientation(sub, out),
        "segment" => commands::segment(sub, out),
        "synth" => commands::synth(sub, out),
        "eval" => commands::eval(sub, out),
        "gradcheck" => commands::gradcheck(sub, out),
        _ => unreachable!("unknown subcommand {name}"),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {f}");
            f.code()
        }
    }
}

/// [`run_with`] on stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let (stdout, stderr) = (std::io::stdout(), std::io::stderr());
    let code = run_with(args, &mut stdout.lock(), &mut stderr.lock());
    let _ = std::io::stdout().flush();
    code
}
