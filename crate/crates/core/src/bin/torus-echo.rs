use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use torus_echo::config::{parse_config_with, Mode};
use torus_echo::runner::{run, selftest_table, RunError};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    LeCurve,
    LeSweep,
    PurityCurve,
    PuritySweep,
    Predict,
    Selftest,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::LeCurve => Mode::LeCurve,
            ModeArg::LeSweep => Mode::LeSweep,
            ModeArg::PurityCurve => Mode::PurityCurve,
            ModeArg::PuritySweep => Mode::PuritySweep,
            ModeArg::Predict => Mode::Predict,
            ModeArg::Selftest => Mode::Selftest,
        }
    }
}

/// Loschmidt echo and purity decay experiments on the quantized torus.
#[derive(Debug, Parser)]
#[command(name = "torus-echo", version)]
struct Cli {
    mode: ModeArg,
    /// TOML run configuration (not needed for selftest).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. `--set seed=7` or `--set epsilon=[0.1,0.2]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn fail(e: &RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mode = Mode::from(cli.mode);

    if mode == Mode::Selftest && cli.config.is_none() {
        let (table, ok) = selftest_table();
        print!("{table}");
        return if ok { ExitCode::SUCCESS } else { ExitCode::from(2) };
    }

    let Some(path) = cli.config else {
        eprintln!("error: --config <path> is required for {mode}");
        return ExitCode::from(1);
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(1);
        }
    };
    let mut overrides = cli.set;
    if let Some(out) = cli.out {
        overrides.push(format!("out_dir={:?}", out.display().to_string()));
    }
    let config = match parse_config_with(&text, Some(mode), &overrides) {
        Ok(c) => c,
        Err(e) => return fail(&RunError::Config(e)),
    };

    match run(&config) {
        Ok(manifest) => {
            for row in manifest.failed_rows() {
                eprintln!("row {} failed: {}", row.label, row.message.as_deref().unwrap_or("failed"));
            }
            println!("wrote {} files to {}", manifest.outputs.len(), config.out_dir.display());
            ExitCode::from(manifest.exit_code() as u8)
        }
        Err(e) => fail(&e),
    }
}
