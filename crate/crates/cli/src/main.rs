//! `nbv`: run reconstruction experiments, verify the coverage-gain
//! approximation order and compare reports.
//!
//! Exit codes: 0 on success, 2 for configuration or input-file errors, 1
//! for any other failure (including a run in which every seed failed).
//! `NBV_THREADS` caps the worker pool.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nbv_core::bench::{self, ExperimentConfig, Protocol, RunReport};
use nbv_core::error::NbvError;
use nbv_core::theorem::OrderFit;

#[derive(Parser)]
#[command(name = "nbv", version, about = "Next-best-view planning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML experiment file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set planner.steps=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Root directory for the timestamped output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the protocol named in the config across its seeds.
    Run {
        #[command(flatten)]
        args: ConfigArgs,
        /// Also write an SVG coverage plot.
        #[arg(long)]
        svg: bool,
    },
    /// Fit the convergence order of the volume-integral gap.
    VerifyTheorem {
        #[command(flatten)]
        args: ConfigArgs,
    },
    /// Tabulate mean AUC per mesh and policy with paired-seed tests.
    Compare {
        /// Report JSON files written by `nbv run`.
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        /// Write the table CSV here; tests go next to it with a `_tests` suffix.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(args: &ConfigArgs, forced: Option<Protocol>) -> Result<ExperimentConfig, NbvError> {
    let mut overrides = args.overrides.clone();
    if let Some(p) = forced {
        overrides.insert(0, format!("protocol=\"{}\"", p.name()));
    }
    if let Some(dir) = &args.output_dir {
        overrides.push(format!("output_dir={:?}", dir.display().to_string()));
    }
    match &args.config {
        Some(path) => ExperimentConfig::load(path, &overrides),
        None => ExperimentConfig::from_toml_str("", &overrides, std::path::Path::new("<command line>")),
    }
}

fn exit_code(e: &NbvError) -> u8 {
    match e {
        NbvError::Config { .. } | NbvError::Format { .. } | NbvError::Io { .. } => 2,
        _ => 1,
    }
}

fn cmd_run(args: &ConfigArgs, svg: bool) -> Result<u8, NbvError> {
    let mut cfg = load_config(args, None)?;
    cfg.svg |= svg;
    let (report, dir) = bench::run(&cfg)?;
    println!("output: {}", dir.display());
    if report.protocol == Protocol::VerifyTheorem {
        print_verdict(&report);
        return Ok(0);
    }
    for s in &report.seeds {
        match (&s.auc, &s.error) {
            (Some(a), _) => println!("seed {}: auc {a:.4}", s.seed),
            (None, Some(e)) => eprintln!("seed {}: failed: {e}", s.seed),
            _ => {}
        }
    }
    if let Some(a) = &report.aggregate {
        println!(
            "{} / {}: mean auc {:.4} ± {:.4} over {} seeds",
            report.label,
            report.policy.map(|p| p.name()).unwrap_or("-"),
            a.mean_auc,
            a.std_auc,
            a.n
        );
    }
    Ok(if report.all_failed() { 1 } else { 0 })
}

fn print_verdict(report: &RunReport) {
    let Some(t) = &report.theorem else { return };
    println!("coverage gain {:.6}", t.coverage_gain);
    for m in &t.per_mu {
        println!("mu {:<8} gap {:.4e} sigma {:.2e}", m.mu, m.gap, m.sigma);
    }
    match &t.fit {
        OrderFit::Slope { slope, .. } => println!("slope {slope:.4}"),
        OrderFit::Inconclusive { reason } => println!("inconclusive: {reason}"),
    }
}

fn cmd_verify(args: &ConfigArgs) -> Result<u8, NbvError> {
    let cfg = load_config(args, Some(Protocol::VerifyTheorem))?;
    let (report, dir) = bench::run(&cfg)?;
    println!("output: {}", dir.display());
    print_verdict(&report);
    Ok(0)
}

fn cmd_compare(paths: &[PathBuf], out: Option<&PathBuf>) -> Result<u8, NbvError> {
    let reports = paths.iter().map(|p| RunReport::load(p)).collect::<Result<Vec<_>, _>>()?;
    let table = bench::compare(&reports)?;
    let csv = table.to_csv();
    let tests = table.tests_csv();
    print!("{csv}");
    println!();
    print!("{tests}");
    for n in &table.notes {
        println!("note: {n}");
    }
    if let Some(out) = out {
        fs::write(out, &csv).map_err(|e| NbvError::Io {
            path: out.clone(),
            source: e,
        })?;
        let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let tests_path = out.with_file_name(format!("{stem}_tests.csv"));
        fs::write(&tests_path, &tests).map_err(|e| NbvError::Io {
            path: tests_path.clone(),
            source: e,
        })?;
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("NBV_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let result = match &cli.command {
        Command::Run { args, svg } => cmd_run(args, *svg),
        Command::VerifyTheorem { args } => cmd_verify(args),
        Command::Compare { reports, out } => cmd_compare(reports, out.as_ref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
