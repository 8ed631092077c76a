mod args;
mod commands;
mod config;
mod context;
mod error;

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use inkmorph::pgm::Polarity;

use args::Cli;
use config::{RunConfig, RunManifest};
use context::RunContext;
use error::{CliError, CliResult};

fn diagnose(msg: &str) {
    let line = msg
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    eprintln!("inkmorph: {line}");
}

fn load_manifest(path: &std::path::Path) -> CliResult<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Malformed {
        path: path.to_path_buf(),
        detail: format!("not a run manifest: {e}"),
    })
}

/// Resolves the run, executes it, writes the manifest and prints the result.
fn run(cli: &Cli) -> CliResult<Option<String>> {
    let (config, invert, manifest_path): (RunConfig, bool, _) = match args::is_rerun(&cli.command) {
        Some(from) => {
            let m = load_manifest(from)?;
            let path = cli.manifest.clone().unwrap_or(m.manifest);
            (m.run, m.invert || cli.invert, path)
        }
        None => {
            let config = cli.command.resolve()?;
            let path = cli
                .manifest
                .clone()
                .unwrap_or_else(|| config.default_manifest_path());
            (config, cli.invert, path)
        }
    };
    let mut ctx = RunContext::new(Polarity::from_invert(invert));
    let result = commands::execute(&config, &mut ctx).and_then(|outcome| {
        let mut outputs = ctx.outputs().to_vec();
        outputs.push(manifest_path.clone());
        let manifest = RunManifest {
            tool: "inkmorph".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seeds: config.seeds(),
            run: config.clone(),
            invert,
            inputs: ctx.inputs().to_vec(),
            outputs,
            manifest: manifest_path.clone(),
        };
        ctx.write_json(&manifest_path, &manifest)?;
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            out.write_all(outcome.stdout.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io("<stdout>", e))?;
            Ok(outcome.verdict)
        }
        Err(e) => {
            ctx.roll_back();
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            diagnose(first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(verdict)) => {
            diagnose(&verdict);
            ExitCode::from(1)
        }
        Err(e) => {
            diagnose(&e.to_string());
            ExitCode::from(e.exit_code())
        }
    }
}
