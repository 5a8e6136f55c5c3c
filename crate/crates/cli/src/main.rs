//! `neqcasimir --config scenario.json [--out path] [--threads N]`
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 numerical failure
//! (partial results are still written).

mod commands;
mod config;

use clap::Parser;
use commands::{Failure, Output};
use config::{Format, ScenarioConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(version, about = "Thermal radiation, heat transfer and non-equilibrium Casimir forces")]
struct Args {
    /// JSON scenario file
    #[arg(long)]
    config: PathBuf,
    /// output path (overrides output.path)
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads for spectral integrals
    #[arg(long)]
    threads: Option<usize>,
}

fn write(out: &Output, format: Format, path: Option<&Path>) -> std::io::Result<()> {
    let json = serde_json::to_string_pretty(out).expect("output serializes");
    match (format, path) {
        (Format::Json, Some(p)) => std::fs::write(p, json + "\n"),
        (Format::Json, None) => {
            println!("{json}");
            Ok(())
        }
        (Format::Csv, Some(p)) => {
            std::fs::write(p, out.to_csv())?;
            // metadata (method, warnings, summary) next to the table
            let meta = Output {
                rows: Vec::new(),
                ..out.clone()
            };
            let mut mp = p.as_os_str().to_owned();
            mp.push(".meta.json");
            std::fs::write(PathBuf::from(mp), serde_json::to_string_pretty(&meta).expect("output serializes") + "\n")
        }
        (Format::Csv, None) => {
            print!("{}", out.to_csv());
            let meta = Output {
                rows: Vec::new(),
                ..out.clone()
            };
            eprintln!("{}", serde_json::to_string_pretty(&meta).expect("output serializes"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match ScenarioConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let path = args.out.or_else(|| cfg.output.path.as_ref().map(|p| base.join(p)));
    match commands::run(&cfg, &base) {
        Ok(out) => {
            if let Err(e) = write(&out, cfg.output.format, path.as_deref()) {
                eprintln!("error: writing output: {e}");
                return ExitCode::from(3);
            }
            if out.status == "ok" {
                ExitCode::SUCCESS
            } else {
                for e in &out.errors {
                    eprintln!("numerical failure: {e}");
                }
                ExitCode::from(3)
            }
        }
        Err(Failure::Validation(m)) => {
            eprintln!("{m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}
