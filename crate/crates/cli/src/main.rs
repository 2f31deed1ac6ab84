use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evlogdp::calibration::Precisions;
use evlogdp::log_io::{read_event_log, write_event_log, CsvColumns, EventLog, LogFormat, SECONDS_PER_DAY};
use evlogdp::metrics::{evaluate, MetricsReport};
use evlogdp::{anonymize, inspect, Error, Execution, Mode, RunParams};

#[derive(Parser)]
#[command(name = "evlogdp", version, about = "Differentially private event-log release")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Release a differentially private copy of an event log.
    Anonymize(AnonymizeArgs),
    /// Compare an original log with a released one.
    Evaluate(EvaluateArgs),
    /// Print log, automaton and contingency-table statistics.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Xes,
    Csv,
}

impl From<FormatArg> for LogFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Xes => LogFormat::Xes,
            FormatArg::Csv => LogFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sample,
    FilterSample,
    Oversample,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sample => Mode::Sample,
            ModeArg::FilterSample => Mode::FilterSample,
            ModeArg::Oversample => Mode::Oversample,
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// Log format; inferred from the file extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// CSV header names as `case,activity,timestamp`.
    #[arg(long, value_name = "CASE,ACTIVITY,TIMESTAMP")]
    columns: Option<String>,
}

#[derive(Args)]
struct AnonymizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    io: InputArgs,
    /// Bound on the attacker's guessing advantage, in (0, 1).
    #[arg(long)]
    delta: f64,
    #[arg(long, value_enum, default_value = "sample")]
    mode: ModeArg,
    #[arg(long, default_value_t = 1.0)]
    start_precision_days: f64,
    #[arg(long, default_value_t = 10.0)]
    time_precision_seconds: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pull released case starts back toward the original timeframe (default).
    #[arg(long, overrides_with = "no_compress")]
    compress: bool,
    #[arg(long, overrides_with = "compress")]
    no_compress: bool,
    /// Divide every ε_t by the longest trace length.
    #[arg(long)]
    scale_by_trace_length: bool,
    /// Where to write the JSON privacy report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially, 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    released: PathBuf,
    #[command(flatten)]
    io: InputArgs,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print a CSV header and row instead of JSON.
    #[arg(long)]
    csv_row: bool,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    io: InputArgs,
    /// Write the automaton in Graphviz DOT format.
    #[arg(long)]
    dot: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_UNRELEASABLE: u8 = 4;
const EXIT_IO: u8 = 5;
const EXIT_INTERNAL: u8 = 1;

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Domain(_) => EXIT_CONFIG,
            Error::Parse { .. } | Error::Validation(_) => EXIT_PARSE,
            Error::Unreleasable { .. } => EXIT_UNRELEASABLE,
            Error::Io(_) => EXIT_IO,
            Error::Unboundable { .. } | Error::Consistency(_) => EXIT_INTERNAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    }
}

impl InputArgs {
    fn format_for(&self, path: &Path) -> Result<LogFormat, Failure> {
        match self.format {
            Some(f) => Ok(f.into()),
            None => LogFormat::from_path(path)
                .ok_or_else(|| config(format!("cannot infer the format of {}; pass --format", path.display()))),
        }
    }

    fn columns(&self) -> Result<Option<CsvColumns>, Failure> {
        let Some(spec) = &self.columns else {
            return Ok(None);
        };
        match spec.split(',').map(str::trim).collect::<Vec<_>>()[..] {
            [case_id, activity, timestamp] if !case_id.is_empty() && !activity.is_empty() && !timestamp.is_empty() => {
                Ok(Some(CsvColumns {
                    case_id: case_id.into(),
                    activity: activity.into(),
                    timestamp: timestamp.into(),
                }))
            }
            _ => Err(config(format!("--columns expects three comma-separated names, got '{spec}'"))),
        }
    }

    fn read(&self, path: &Path) -> Result<EventLog, Failure> {
        let format = self.format_for(path)?;
        read_event_log(path, format, self.columns()?.as_ref()).map_err(|e| match e {
            Error::Io(io) => io_error(path, io),
            Error::Parse { locus, message } => Failure {
                code: EXIT_PARSE,
                message: format!("{}: parse error at {locus}: {message}", path.display()),
            },
            other => Failure::from(other),
        })
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn run_anonymize(args: AnonymizeArgs) -> Result<(), Failure> {
    let exec = match args.workers {
        1 => Execution::Sequential,
        0 => Execution::Parallel,
        n => {
            // read once by the global pool on first use
            std::env::set_var("RAYON_NUM_THREADS", n.to_string());
            Execution::Parallel
        }
    };
    let params = RunParams {
        delta: args.delta,
        mode: args.mode.into(),
        precisions: Precisions {
            start_seconds: args.start_precision_days * SECONDS_PER_DAY as f64,
            time_seconds: args.time_precision_seconds,
        },
        compress: !args.no_compress,
        scale_by_trace_length: args.scale_by_trace_length,
        seed: args.seed,
        exec,
    };
    params.validate()?;
    let output_format = args.io.format_for(&args.output)?;

    let start = Instant::now();
    let log = args.io.read(&args.input)?;
    let (released, report) = anonymize(&log, &params)?;
    let mut out = Vec::new();
    write_event_log(&released.log, output_format, Some(&released.epsilons), &mut out)?;
    let report_json = serde_json::to_vec_pretty(&report).map_err(|e| Failure {
        code: EXIT_INTERNAL,
        message: e.to_string(),
    })?;

    write_file(&args.output, &out)?;
    if let Some(path) = &args.report {
        write_file(path, &report_json)?;
    }
    log::info!(
        "released {} cases ({} events) from {} in {:.3} s; epsilon_d = {:.4}, {} cases filtered",
        report.released.cases,
        report.released.events,
        args.input.display(),
        start.elapsed().as_secs_f64(),
        report.epsilon_d,
        report.filtered_cases
    );
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let original = args.io.read(&args.original)?;
    let released = args.io.read(&args.released)?;
    let report = evaluate(&original, &released)?;
    let text = if args.csv_row {
        format!("{}\n{}\n", MetricsReport::CSV_HEADER, report.csv_row())
    } else {
        serde_json::to_string_pretty(&report).expect("metrics serialize") + "\n"
    };
    match &args.output {
        Some(path) => write_file(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_inspect(args: InspectArgs) -> Result<(), Failure> {
    let log = args.io.read(&args.input)?;
    let (summary, dafsa) = inspect(&log)?;
    if let Some(path) = &args.dot {
        write_file(path, dafsa.to_dot().as_bytes())?;
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        return Ok(());
    }
    println!("traces       {}", summary.size.cases);
    println!("events       {}", summary.size.events);
    println!("variants     {}", summary.size.variants);
    println!("dafsa states {}", summary.dafsa_states);
    println!("transitions  {}", summary.dafsa_transitions);
    println!();
    println!("{:>5}  {:>6}  {:<20}  {:>6}  {:>6}", "id", "source", "label", "target", "count");
    for row in &summary.contingency_table {
        println!(
            "{:>5}  {:>6}  {:<20}  {:>6}  {:>6}",
            row.id, row.source, row.label, row.target, row.count
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Anonymize(args) => run_anonymize(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Inspect(args) => run_inspect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
