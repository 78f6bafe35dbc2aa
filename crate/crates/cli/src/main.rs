use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use endocert::certify::{certify, emit_report, parse_config_with, ParseOptions, ReportFormat};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Text,
}

/// Certify word-hyperbolicity of a multiple HNN extension of a free group
/// by endomorphisms.
///
/// Exit codes: 0 certified, 2 BS(1,d) obstruction, 3 inconclusive or not
/// disjoint, 1 usage or parse error.
#[derive(Debug, Parser)]
#[command(name = "certify", version)]
struct Cli {
    /// JSON config.
    #[arg(long)]
    input: PathBuf,
    /// Report path; stdout if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, value_name = "K")]
    pullback_cap: Option<usize>,
    #[arg(long, value_name = "K")]
    disjointness_cap: Option<usize>,
    #[arg(long, value_name = "K")]
    expansion_cap: Option<usize>,
    /// Sampling seed, overriding the config.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Run the lamination diagnostics.
    #[arg(long)]
    diagnostics: bool,
    /// Warn about unknown config fields instead of failing.
    #[arg(long)]
    lenient: bool,
}

fn run(cli: Cli) -> Result<i32, String> {
    let text = std::fs::read(&cli.input).map_err(|e| format!("{}: {e}", cli.input.display()))?;
    let (mut config, warnings) = parse_config_with(&text, ParseOptions { lenient: cli.lenient })
        .map_err(|e| format!("{}: {e}", cli.input.display()))?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    if let Some(k) = cli.pullback_cap {
        config.caps.pullback = k;
    }
    if let Some(k) = cli.disjointness_cap {
        config.caps.disjointness = k;
    }
    if let Some(k) = cli.expansion_cap {
        config.caps.expansion = k;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    config.diagnostics |= cli.diagnostics;
    config.validate(2).map_err(|e| e.to_string())?;

    let cert = certify(&config).map_err(|e| e.to_string())?;
    let format = match cli.format {
        Format::Json => ReportFormat::Json,
        Format::Text => ReportFormat::Text,
    };
    let bytes = emit_report(&cert, format);
    match &cli.output {
        Some(path) => std::fs::write(path, &bytes).map_err(|e| format!("{}: {e}", path.display()))?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).map_err(|e| e.to_string())?;
        }
    }
    Ok(cert.verdict.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
