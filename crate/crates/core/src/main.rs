use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sensor_spectra::cli::config::{parse_config, Format, RunConfig, Workers};
use sensor_spectra::cli::presets::{plan, Preset};
use sensor_spectra::cli::{self, RunRecord};

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_IO: u8 = 3;

/// Frequency-resolved photon spectra of a driven emitter in a phonon bath.
#[derive(Parser)]
#[command(name = "sensor-spectra", version = sensor_spectra::ENGINE_VERSION)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config and the environment).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (overrides the config).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compute one of the figure presets.
    Preset {
        /// fig2, fig3a, fig3b or figS2.
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        /// Also render SVG figures.
        #[arg(long)]
        svg: bool,
    },
    /// Parse and validate a config, then print it with defaults filled in.
    Validate { config: PathBuf },
    /// Print the engine version.
    Version,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

enum Failure {
    Config(String),
    Io(String),
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn workers(flag: Option<usize>, config: Workers) -> Result<usize, Failure> {
    match flag {
        Some(0) => Err(Failure::Config("--workers must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(config.resolve()),
    }
}

fn finish(dir: &Path, files: &[(String, String)], records: &[RunRecord]) -> Result<u8, Failure> {
    let written = cli::write_artifacts(dir, files).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    for path in &written {
        println!("{}", path.display());
    }
    if records.iter().any(RunRecord::failed) {
        log::error!("numerical failures recorded in the manifest");
        return Ok(EXIT_NUMERICAL);
    }
    Ok(0)
}

fn dispatch(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Version => {
            println!("sensor-spectra {}", sensor_spectra::ENGINE_VERSION);
            Ok(0)
        }
        Command::Validate { config } => {
            let c = load(&config)?;
            println!("# config-sha256 = {}", c.hash());
            print!("{}", c.to_toml());
            Ok(0)
        }
        Command::Run { config, out, workers: flag } => {
            let c = load(&config)?;
            let n = workers(flag, c.workers)?;
            let records = cli::execute(&[(c.bath.mode.as_str().to_string(), c.clone())], n);
            let render = c.output.svg.then(|| cli::run_render(&c));
            let files = cli::artifacts(&c.output.name, &c.output.name, &records, c.output.format, render);
            finish(&cli::output_dir(out.as_deref(), c.output.path.as_deref()), &files, &records)
        }
        Command::Preset { name, out, workers: flag, format, svg } => {
            let preset: Preset = name.parse().map_err(Failure::Config)?;
            let p = plan(preset);
            let n = workers(flag, Workers::Auto)?;
            let records = cli::execute(&p.runs, n);
            let files = cli::preset_artifacts(&p, &records, format.into(), svg);
            finish(&cli::output_dir(out.as_deref(), None), &files, &records)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("I/O error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}
