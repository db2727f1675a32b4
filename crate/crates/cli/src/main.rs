use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ssprofile_cli::{parse_config_with, run_pipeline, split_overrides, CliError, Command, RunConfig};

/// Self-similar profile solver and shrinker audit.
///
/// Any config key can be overridden as `--section.key=value`.
#[derive(Parser)]
#[command(name = "ssprofile", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the inner fixed point, continue globally, and write profile, residual and report files.
    SolveExpander(Common),
    /// Evaluate the ODE residuals of a profile CSV.
    VerifyResiduals(Common),
    /// Evaluate smallness, the constant chain and the inner solve over a parameter lattice.
    Scan(ScanArgs),
    /// Run the shrinker energy audit on a candidate profile.
    ShrinkerAudit(Common),
    /// Search for bootstrap constants.
    Constants(Common),
}

#[derive(Args)]
struct Common {
    /// Config file of `section.key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: Common,
    /// Lattice points evaluated concurrently.
    #[arg(short, long, default_value_t = 1)]
    jobs: usize,
}

fn load(common: &Common, command: Command, overrides: &[(String, String)]) -> Result<RunConfig, CliError> {
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
        None => String::new(),
    };
    let mut over = vec![("run.command".to_string(), command.name().to_string())];
    if let Ok(dir) = std::env::var("SSPROFILE_OUT") {
        over.push(("output.dir".to_string(), dir));
    }
    // explicit flags win over the environment
    over.extend(overrides.iter().cloned());
    parse_config_with(&text, &over)
}

fn main() -> ExitCode {
    let (args, overrides) = split_overrides(std::env::args());
    let cli = Cli::parse_from(args);
    let (common, command, jobs) = match &cli.command {
        Cmd::SolveExpander(c) => (c, Command::SolveExpander, 1),
        Cmd::VerifyResiduals(c) => (c, Command::VerifyResiduals, 1),
        Cmd::Scan(s) => (&s.common, Command::Scan, s.jobs),
        Cmd::ShrinkerAudit(c) => (c, Command::ShrinkerAudit, 1),
        Cmd::Constants(c) => (c, Command::Constants, 1),
    };
    let mut out_dir = None;
    let result = load(common, command, &overrides).and_then(|cfg| {
        out_dir = Some(cfg.output_dir.clone());
        run_pipeline(&cfg, jobs)
    });
    match result {
        Ok(out) => {
            for v in &out.verdicts {
                let tag = match (v.enabled, v.pass) {
                    (false, _) => "info",
                    (true, true) => "PASS",
                    (true, false) => "FAIL",
                };
                println!("{tag:4}  {}: {}", v.name, v.detail);
            }
            for f in &out.files {
                println!("wrote {f}");
            }
            if out.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let report = e.report();
            let text = serde_json::to_string_pretty(&report).unwrap_or_else(|_| e.to_string());
            eprintln!("{text}");
            if let Some(dir) = out_dir {
                let _ = ssprofile_cli::output::write_json(&dir, "failure.json", &report);
            }
            ExitCode::from(2)
        }
    }
}
