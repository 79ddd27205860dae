//! `spinsync` — spin-synchronization simulation harness.
//!
//! Exit codes: 0 success, 1 config/validation error, 2 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spinsync_cli::budget::BudgetFile;
use spinsync_cli::config::{RunConfig, SweepConfig};
use spinsync_cli::presets::{self, PresetKind};
use spinsync_cli::runner::{self, RunError};
use spinsync_cli::{budget, output, sweep};

#[derive(Parser)]
#[command(
    name = "spinsync",
    about = "Many-body spin synchronization in dense alkali vapor: \
             moment, reduced, closed-form, and density-matrix engines",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Config file path or preset name (see `presets list`).
    #[arg(long)]
    config: String,
    /// Override the run seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for artifacts (created if missing).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write trajectory + analysis.
    Run(CommonArgs),
    /// Scan one axis over a grid and write a summary CSV.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Worker threads (overrides the config; 0 = one per core).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Evaluate the vapor relaxation budget.
    Budget {
        /// Optional config file path or preset name (defaults built in).
        #[arg(long)]
        config: Option<String>,
        /// Directory for the JSON report.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Inspect the built-in configurations.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
}

#[derive(Subcommand)]
enum PresetsAction {
    /// List preset names, kinds, and descriptions.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(common) => cmd_run(&common),
        Command::Sweep { common, workers } => cmd_sweep(&common, workers),
        Command::Budget { config, out_dir } => cmd_budget(config.as_deref(), &out_dir),
        Command::Presets { action } => {
            match action {
                PresetsAction::List => cmd_presets_list(),
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(RunError::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
    }
}

fn kind_mismatch(name: &str, found: PresetKind, wanted: &str) -> RunError {
    RunError::Validation(format!(
        "preset '{name}' is a {} config; use the {wanted} subcommand",
        found.name()
    ))
}

fn cmd_run(common: &CommonArgs) -> Result<(), RunError> {
    let (text, kind) = presets::load_config_text(&common.config).map_err(RunError::Validation)?;
    if let Some(k) = kind {
        if k != PresetKind::Run {
            return Err(kind_mismatch(&common.config, k, "matching"));
        }
    }
    let mut cfg = RunConfig::from_toml(&text).map_err(RunError::Validation)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = runner::execute(&cfg)?;
    let paths = runner::write_artifacts(&out, &common.out_dir)?;
    println!("engine: {}", out.analysis.engine);
    println!(
        "samples: {} over t in [0, {}]",
        out.table.rows.len(),
        cfg.numerics.t_end
    );
    println!("initial |<F>|: {:.6}", out.analysis.f_mag_initial);
    if let Some(c) = &out.analysis.conservation {
        println!("mean total-spin drift: {:.3e}", c.max_drift);
    }
    if let Some(m) = &out.analysis.modes {
        println!(
            "dominant mode: R = {:.6e}, Omega = {:.6e} ({} terms fitted)",
            m.dominant_r,
            m.dominant_omega,
            m.modes.len()
        );
    }
    if let Some(s) = &out.analysis.sync {
        match s.time_below_threshold {
            Some(t) => println!(
                "sync spread: {:.4} -> {:.4}, below {} from t = {}",
                s.initial, s.final_spread, s.threshold, t
            ),
            None => println!(
                "sync spread: {:.4} -> {:.4}, never below {}",
                s.initial, s.final_spread, s.threshold
            ),
        }
    }
    println!("wrote {}", paths.trajectory.display());
    println!("wrote {}", paths.analysis.display());
    println!("wrote {}", paths.manifest.display());
    if let Some(d) = paths.densities {
        println!("wrote {}", d.display());
    }
    Ok(())
}

fn cmd_sweep(common: &CommonArgs, workers: Option<usize>) -> Result<(), RunError> {
    let (text, kind) = presets::load_config_text(&common.config).map_err(RunError::Validation)?;
    if let Some(k) = kind {
        if k != PresetKind::Sweep {
            return Err(kind_mismatch(&common.config, k, "matching"));
        }
    }
    let mut cfg = SweepConfig::from_toml(&text).map_err(RunError::Validation)?;
    if let Some(seed) = common.seed {
        cfg.base.seed = seed;
    }
    let outcomes = sweep::execute(&cfg, workers)?;
    let csv = sweep::summary_csv(&cfg.sweep.axis, &outcomes);
    let prefix = &cfg.base.output.prefix;
    let io_err = |e: std::io::Error| RunError::Validation(format!("writing artifacts: {e}"));
    let summary = output::write_text(&common.out_dir, &format!("{prefix}_summary.csv"), &csv)
        .map_err(io_err)?;
    let manifest_text = cfg.to_toml().map_err(RunError::Validation)?;
    let manifest = output::write_text(
        &common.out_dir,
        &format!("{prefix}_sweep_manifest.toml"),
        &manifest_text,
    )
    .map_err(io_err)?;
    let failures = outcomes.iter().filter(|o| o.summary.is_err()).count();
    println!(
        "{} of {} points succeeded over axis '{}'",
        outcomes.len() - failures,
        outcomes.len(),
        cfg.sweep.axis
    );
    for o in outcomes.iter().filter(|o| o.summary.is_err()) {
        if let Err(e) = &o.summary {
            eprintln!("point {} failed: {e}", o.value);
        }
    }
    println!("wrote {}", summary.display());
    println!("wrote {}", manifest.display());
    Ok(())
}

fn cmd_budget(config: Option<&str>, out_dir: &std::path::Path) -> Result<(), RunError> {
    let file = match config {
        Some(arg) => {
            let (text, kind) = presets::load_config_text(arg).map_err(RunError::Validation)?;
            if let Some(k) = kind {
                if k != PresetKind::Budget {
                    return Err(kind_mismatch(arg, k, "matching"));
                }
            }
            BudgetFile::from_toml(&text).map_err(RunError::Validation)?
        }
        None => BudgetFile::default(),
    };
    let report = budget::execute(&file)?;
    print!("{}", report.render_table());
    let io_err = |e: std::io::Error| RunError::Validation(format!("writing artifacts: {e}"));
    let path = output::write_text(out_dir, "budget.json", &report.to_json()).map_err(io_err)?;
    println!("\nwrote {}", path.display());
    Ok(())
}

fn cmd_presets_list() {
    println!("{:<20} {:<7} description", "name", "kind");
    for p in presets::PRESETS {
        println!("{:<20} {:<7} {}", p.name, p.kind.name(), p.description);
    }
    println!("\nusage: spinsync <kind> --config <name> [--out-dir DIR]");
}
