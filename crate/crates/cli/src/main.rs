//! `stablewalk`: config-driven runner for the simulation and verification
//! toolkit. Exit status is 0 when every asserted check passes, 1 on a check
//! failure or runtime error, 2 when the configuration is rejected.

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use commands::{CmdResult, Csv};
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "stablewalk", version, about = "Stable limit laws for products of positive random matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; reports go to stdout when neither this nor
    /// `output_dir` in the configuration is set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Decide the contraction condition on the support and report a witness.
    CheckC,
    /// Simulate walk paths.
    Simulate,
    /// Trace the comparison observables along explicit products.
    Observables,
    /// Sample the invariant measure and test its invariance.
    Stationary,
    /// Check the tail conditions and their transfer to the cocycle.
    Tails,
    /// Compare normalized walk values with normalized i.i.d. sums.
    Convergence,
    /// Discretized spectral checks (q = 2, finite support).
    Spectral,
    /// Run the acceptance suite.
    VerifyAll,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::CheckC => "check-c",
            Command::Simulate => "simulate",
            Command::Observables => "observables",
            Command::Stationary => "stationary",
            Command::Tails => "tails",
            Command::Convergence => "convergence",
            Command::Spectral => "spectral",
            Command::VerifyAll => "verify-all",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();

    let mut cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(msg) => return fail(&cli, name, None, "config", &msg, EXIT_CONFIG),
    };
    let sampler = match cfg.build_sampler() {
        Ok(s) => s,
        Err(e) => return fail(&cli, name, None, "config", &e.0, EXIT_CONFIG),
    };
    cfg.resolve(&sampler);
    let config_value = serde_json::to_value(&cfg).expect("config serializes");

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            return fail(&cli, name, Some(&config_value), "config", &e.to_string(), EXIT_CONFIG);
        }
    }

    let run: fn(&ExperimentConfig, &stablewalk::MatrixSampler) -> CmdResult = match cli.command {
        Command::CheckC => commands::check_c,
        Command::Simulate => commands::simulate,
        Command::Observables => commands::observables_cmd,
        Command::Stationary => commands::stationary,
        Command::Tails => commands::tails,
        Command::Convergence => commands::convergence,
        Command::Spectral => commands::spectral,
        Command::VerifyAll => commands::verify_all,
    };
    let outcome = match run(&cfg, &sampler) {
        Ok(o) => o,
        Err(e) => return fail(&cli, name, Some(&config_value), "runtime", &e.to_string(), EXIT_CHECK_FAILED),
    };

    let report = json!({
        "command": name,
        "seed": cfg.seed,
        "passed": outcome.passed,
        "config": config_value,
        "result": outcome.result,
    });
    let out_dir = cli.out.clone().or_else(|| cfg.output_dir.clone());
    if let Err(e) = emit(&cli, name, out_dir.as_deref(), &report, &outcome.csv) {
        eprintln!("{e}");
        return ExitCode::from(EXIT_CHECK_FAILED);
    }
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let path = cli.config.as_ref().ok_or("--config is required")?;
    let mut cfg = ExperimentConfig::load(path).map_err(|e| e.0)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn csv_string(csv: &Csv) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&csv.header).map_err(|e| e.to_string())?;
    for row in &csv.rows {
        w.write_record(row).map_err(|e| e.to_string())?;
    }
    let bytes = w.into_inner().map_err(|e| e.to_string())?;
    String::from_utf8(bytes).map_err(|e| e.to_string())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn emit(cli: &Cli, name: &str, out_dir: Option<&Path>, report: &Value, csv: &Csv) -> Result<(), String> {
    match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            let json_path = dir.join(format!("{name}.json"));
            std::fs::write(&json_path, pretty(report)).map_err(|e| format!("{}: {e}", json_path.display()))?;
            if cli.format == Format::Csv {
                let csv_path = dir.join(format!("{name}.csv"));
                std::fs::write(&csv_path, csv_string(csv)?).map_err(|e| format!("{}: {e}", csv_path.display()))?;
            }
            Ok(())
        }
        None => {
            let text = match cli.format {
                Format::Json => pretty(report),
                Format::Csv => csv_string(csv)?,
            };
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string())
        }
    }
}

/// Writes a structured error report to stderr (and to the output directory
/// when one is given) and returns `code`.
fn fail(cli: &Cli, name: &str, config: Option<&Value>, kind: &str, message: &str, code: u8) -> ExitCode {
    let report = json!({
        "command": name,
        "passed": false,
        "exit_code": code,
        "error": { "kind": kind, "message": message },
        "config": config,
    });
    let text = pretty(&report);
    eprint!("{text}");
    if let Some(dir) = &cli.out {
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = std::fs::write(dir.join(format!("{name}.error.json")), &text);
        }
    }
    ExitCode::from(code)
}
