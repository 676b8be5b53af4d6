use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use duality_cli::{
    bundled, canonical_json, parse_model, run_suite, trace_records, ModelFile, Suite, SuiteOptions,
    TraceOptions, BUNDLED,
};
use num_rational::BigRational;

const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "g2dual",
    version,
    about = "Checks (2,3,5)-distributions, cone structures and their duality"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Verify,
    Prolong,
    Duality,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Run a check suite on a model file (or a bundled model name) and emit a report.
    Analyze {
        model: String,
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multiplies the model's sample box half-widths.
        #[arg(long, default_value = "1")]
        box_scale: String,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include per-check wall time (makes reports run-dependent).
        #[arg(long)]
        timings: bool,
    },
    /// List or print the bundled models.
    Models {
        #[command(subcommand)]
        action: ModelsAction,
    },
    /// Integrate a singular bi-extremal and print one JSON record per grid point.
    Trace {
        model: String,
        /// Comma-separated rational start coordinates.
        #[arg(long, value_delimiter = ',')]
        x0: Option<Vec<String>>,
        /// Initial direction: θ₀ for cones, u₂/u₁ for distributions.
        #[arg(long)]
        theta0: Option<String>,
        #[arg(long = "T", default_value_t = 0.5)]
        t: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ModelsAction {
    List,
    Show { name: String },
}

/// Failures that map to the usage exit code.
#[derive(Debug)]
struct Usage(anyhow::Error);

fn usage(e: anyhow::Error) -> Usage {
    Usage(e)
}

fn rational(s: &str) -> Result<BigRational> {
    BigRational::from_str(s.trim()).map_err(|_| anyhow!("`{s}` is not a rational number"))
}

fn load(model: &str) -> Result<ModelFile> {
    let path = PathBuf::from(model);
    let text = if path.exists() {
        fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?
    } else if let Some(b) = bundled(model) {
        b.text.to_string()
    } else {
        return Err(anyhow!("no model file or bundled model named `{model}`"));
    };
    parse_model(&text).with_context(|| format!("parsing {model}"))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8, Usage> {
    match cli.command {
        Command::Analyze {
            model,
            suite,
            seed,
            box_scale,
            format,
            out,
            timings,
        } => {
            let model = load(&model).map_err(usage)?;
            let box_scale = rational(&box_scale).map_err(usage)?;
            if box_scale <= BigRational::from_integer(0.into()) {
                return Err(Usage(anyhow!("--box-scale must be positive")));
            }
            let suite = match suite {
                SuiteArg::Verify => Suite::Verify,
                SuiteArg::Prolong => Suite::Prolong,
                SuiteArg::Duality => Suite::Duality,
                SuiteArg::All => Suite::All,
            };
            let report = run_suite(
                &model,
                &SuiteOptions {
                    suite,
                    seed,
                    box_scale,
                    timings,
                },
            );
            let text = match format {
                Format::Json => report.to_canonical_json(),
                Format::Text => report.to_text(),
            };
            emit(&out, &text).map_err(usage)?;
            Ok(report.exit_code() as u8)
        }
        Command::Models { action } => {
            match action {
                ModelsAction::List => {
                    for b in &BUNDLED {
                        let m = parse_model(b.text).map_err(|e| usage(e.into()))?;
                        println!(
                            "{:<24} {:<16} {}",
                            b.name,
                            m.kind.as_str(),
                            m.description.unwrap_or_default()
                        );
                    }
                }
                ModelsAction::Show { name } => {
                    let b = bundled(&name)
                        .ok_or_else(|| Usage(anyhow!("no bundled model named `{name}`")))?;
                    print!("{}", b.text);
                }
            }
            Ok(0)
        }
        Command::Trace {
            model,
            x0,
            theta0,
            t,
            tol,
            grid,
            out,
        } => {
            let model = load(&model).map_err(usage)?;
            let x0 = x0
                .map(|v| v.iter().map(|s| rational(s)).collect::<Result<Vec<_>>>())
                .transpose()
                .map_err(usage)?;
            let theta0 = theta0.map(|s| rational(&s)).transpose().map_err(usage)?;
            if !(tol > 0.0) || grid == 0 {
                return Err(Usage(anyhow!("--tol must be positive and --grid nonzero")));
            }
            let opts = TraceOptions {
                x0,
                theta0,
                t,
                tol,
                grid,
            };
            match trace_records(&model, &opts) {
                Ok(records) => {
                    let text: String = records.iter().map(|r| canonical_json(r) + "\n").collect();
                    emit(&out, &text).map_err(usage)?;
                    Ok(0)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    Ok(2)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
