use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use protoline_cli::{run, Command, Format, Options};

#[derive(Parser)]
#[command(
    name = "protoline",
    version,
    about = "Classify and draw the singularities of proto-line-fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Zero-search grid per side, or metric samples per side.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Seed for randomly drawn fields.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Value of the scenario's family parameter.
    #[arg(long, global = true, allow_negative_numbers = true)]
    param: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Locate and classify every singularity.
    Classify,
    /// Trace streamlines and separatrices.
    Portrait,
    /// Classify along a one-parameter family.
    Scan,
    /// Line-field indices around singularities or a given loop.
    Index,
    /// Polar blow-up zeros and their types.
    Blowup,
    /// Sample the metric built from bracket frames.
    Metric,
    /// Index sum over a torus.
    TorusCheck,
}

#[derive(ValueEnum, Clone, Copy)]
enum FormatArg {
    Svg,
    Csv,
    Json,
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
    let Some(config) = cli.config else {
        eprintln!("config error: --config is required");
        return ExitCode::from(2);
    };
    let command = match cli.command {
        Cmd::Classify => Command::Classify,
        Cmd::Portrait => Command::Portrait,
        Cmd::Scan => Command::Scan,
        Cmd::Index => Command::Index,
        Cmd::Blowup => Command::Blowup,
        Cmd::Metric => Command::Metric,
        Cmd::TorusCheck => Command::TorusCheck,
    };
    let opts = Options {
        out: cli.out,
        grid: cli.grid,
        seed: cli.seed,
        format: cli.format.map(|f| match f {
            FormatArg::Svg => Format::Svg,
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }),
        param: cli.param,
    };
    match run(command, &config, &opts) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(outcome.status.exit_code())
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
