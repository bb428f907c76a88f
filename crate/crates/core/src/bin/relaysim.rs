use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use relay_core::experiment::{self, Sweep};
use relay_core::sim::{SimConfig, SimError};
use relay_core::table::{build_table, PolicyTable, TableError};

#[derive(Parser)]
#[command(name = "relaysim", version, about = "Token-incentivized D2D relaying simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the policy table(s) a config needs and save them.
    BuildTable {
        #[command(flatten)]
        source: Source,
        /// Output file. With two budget classes, `-high` and `-low` are
        /// appended to the file stem.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one simulation and write its CSV artifacts.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        tables: Tables,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a parameter sweep over several seeds.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        tables: Tables,
        /// `param=values`, e.g. `token_supply=0:4000:200`; defaults to the preset's sweep.
        #[arg(long)]
        param: Option<String>,
        /// First seed; seeds are consecutive.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of seeds per sweep value.
        #[arg(long)]
        seeds: Option<u64>,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// List the built-in presets.
    Presets,
}

#[derive(Args)]
struct Source {
    /// Config file of `section.key = value` lines.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long)]
    preset: Option<String>,
    /// Fraction of the full-scale network to simulate (presets only).
    #[arg(long)]
    scale: Option<f64>,
}

#[derive(Args)]
struct Tables {
    /// Policy table file; repeat for several budget classes. Built in
    /// memory when omitted.
    #[arg(long)]
    table: Vec<PathBuf>,
}

/// Error carrying the process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn classify(error: anyhow::Error) -> Failure {
    let code = match error.downcast_ref::<SimError>() {
        Some(SimError::Config(_)) => 2,
        Some(SimError::Table(TableError::NonThresholdPolicy { .. })) => 3,
        Some(SimError::Table(_)) => 2,
        Some(SimError::TableMismatch(_)) => 4,
        Some(SimError::InvariantViolation { .. }) => 5,
        None => match error.downcast_ref::<TableError>() {
            Some(TableError::NonThresholdPolicy { .. }) => 3,
            Some(TableError::InvalidGrid(_)) => 2,
            Some(TableError::Format(_)) => 4,
            None => 1,
        },
    };
    Failure { code, error }
}

struct Resolved {
    config: SimConfig,
    sweep: Option<Sweep>,
}

fn resolve(source: &Source) -> Result<Resolved> {
    let scale = source.scale.unwrap_or(1.0);
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(SimError::Config(format!("--scale {scale} outside (0, 1]")).into());
    }
    match (&source.config, &source.preset) {
        (Some(_), None) if source.scale.is_some() => {
            Err(SimError::Config("--scale only applies to presets".into()).into())
        }
        (Some(path), None) => Ok(Resolved {
            config: SimConfig::load(path)?,
            sweep: None,
        }),
        (None, Some(name)) => {
            let p = experiment::preset(name, scale).ok_or_else(|| {
                SimError::Config(format!(
                    "unknown preset '{name}'; available: {}",
                    experiment::PRESETS.join(", ")
                ))
            })?;
            Ok(Resolved {
                config: p.config,
                sweep: p.sweep,
            })
        }
        _ => Err(SimError::Config("give exactly one of --config or --preset".into()).into()),
    }
}

fn load_tables(paths: &[PathBuf]) -> Result<Option<Vec<Arc<PolicyTable>>>> {
    if paths.is_empty() {
        return Ok(None);
    }
    paths
        .iter()
        .map(|p| {
            PolicyTable::load(p)
                .map(Arc::new)
                .map_err(|e| anyhow::Error::new(e).context(format!("loading {}", p.display())))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn build_tables_cmd(source: &Source, out: &Path) -> Result<()> {
    let cfg = resolve(source)?.config;
    cfg.validate()?;
    let classes = cfg.budget_classes();
    for high in &classes {
        let path = if classes.len() == 1 {
            out.to_path_buf()
        } else {
            let stem = out.file_stem().unwrap_or_default().to_string_lossy();
            let ext = out.extension().map(|e| format!(".{}", e.to_string_lossy()));
            let suffix = if *high { "high" } else { "low" };
            out.with_file_name(format!("{stem}-{suffix}{}", ext.unwrap_or_default()))
        };
        let table = build_table(cfg.param_grid(*high), cfg.grid.tolerance)
            .map_err(SimError::from)?;
        table
            .save(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        let (lo, hi) = table.threshold_range();
        println!(
            "{}: {} entries, p_max {} J, thresholds {lo}..={hi}",
            path.display(),
            table.len(),
            table.grid.space.p_max
        );
    }
    Ok(())
}

fn simulate_cmd(source: &Source, tables: &Tables, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut cfg = resolve(source)?.config;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let tables = load_tables(&tables.table)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.txt"), cfg.to_text())?;
    let report = match experiment::simulate(&cfg, tables) {
        Ok(r) => r,
        Err(e) => {
            if matches!(e, SimError::InvariantViolation { .. }) {
                fs::write(out.join("invariants.log"), format!("FAILED: {e}\n"))?;
            }
            return Err(e.into());
        }
    };
    fs::write(
        out.join("invariants.log"),
        format!(
            "seed {}: token conservation, spending bound, token cap and gain >= 1 held over {} slots\n",
            cfg.seed, report.slots
        ),
    )?;
    experiment::write_ue_csv(create(out, "ues.csv")?, &report.ues).map_err(|e| anyhow!(e))?;
    experiment::write_summary_csv(create(out, "summary.csv")?, &report.classes)
        .map_err(|e| anyhow!(e))?;
    experiment::write_series_csv(create(out, "tokens.csv")?, &report).map_err(|e| anyhow!(e))?;
    println!(
        "{} UEs, {} slots, {} token transfers",
        cfg.n_ues, report.slots, report.transfers
    );
    for c in &report.classes {
        println!(
            "{:>13}: gain {:.4}  lambda {:.4}  rre {:.3}  r-ack {:.3}  utility {:.4}  negative {:.3}",
            c.class,
            c.gain.mean,
            c.lambda.mean,
            c.rre.mean,
            c.rack_rate.mean,
            c.utility.mean,
            c.negative_utility_fraction
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sweep_cmd(
    source: &Source,
    tables: &Tables,
    param: Option<&str>,
    seed: Option<u64>,
    seeds: Option<u64>,
    jobs: usize,
    out: &Path,
) -> Result<()> {
    let resolved = resolve(source)?;
    let mut sweep = match (param, resolved.sweep) {
        (Some(p), _) => Sweep::parse(p, vec![1]).map_err(SimError::Config)?,
        (None, Some(s)) => s,
        (None, None) => bail!(SimError::Config("no sweep given; use --param".into())),
    };
    let first = seed.unwrap_or(sweep.seeds[0]);
    let count = seeds.unwrap_or(sweep.seeds.len() as u64);
    if count == 0 {
        bail!(SimError::Config("--seeds must be at least 1".into()));
    }
    sweep.seeds = (first..first + count).collect();
    let tables = load_tables(&tables.table)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.txt"), resolved.config.to_text())?;
    let rows = experiment::run_sweep(&resolved.config, &sweep, tables, jobs)?;
    experiment::write_sweep_csv(create(out, "sweep.csv")?, sweep.param, &rows)
        .map_err(|e| anyhow!(e))?;
    println!("{:>24}  mean gain over {} seeds", sweep.param.as_str(), count);
    for (v, g) in experiment::mean_by_value(&rows, |r| r.summary.gain.mean) {
        println!("{v:>24}  {g:.5}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::BuildTable { source, out } => build_tables_cmd(source, out),
        Command::Simulate {
            source,
            tables,
            seed,
            out,
        } => simulate_cmd(source, tables, *seed, out),
        Command::Sweep {
            source,
            tables,
            param,
            seed,
            seeds,
            jobs,
            out,
        } => sweep_cmd(source, tables, param.as_deref(), *seed, *seeds, *jobs, out),
        Command::Presets => {
            for name in experiment::PRESETS {
                let p = experiment::preset(name, 1.0).expect("listed preset");
                println!("{name:<16} {}", p.description);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let f = classify(e);
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
