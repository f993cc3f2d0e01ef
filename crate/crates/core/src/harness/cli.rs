use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::config::ExperimentConfig;
use super::run::{prepare_data, run_single_on, run_sweep_on, write_single_outputs, write_sweep_outputs, RunStatus};
use super::snapshot::ModelSnapshot;
use crate::data::{parse_comoda, synth_generate, write_csv, ColumnMapping, RatingScale, SynthSpec};
use crate::error::Error;
use crate::trainers;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "powermat", version, about = "Train and evaluate PowerMat, DotMat and classic MF recommenders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train every configured algorithm once and write reports.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Replace the split, init and shuffle seeds.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every (algorithm, gamma) cell and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict one rating from a saved model snapshot.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        user: String,
        #[arg(long)]
        item: String,
        /// Comma-separated raw context codes, one per context column.
        #[arg(long, allow_hyphen_values = true)]
        context: String,
    },
    /// Write a synthetic dataset in LDOS-CoMoDa CSV layout.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 120)]
        users: usize,
        #[arg(long, default_value_t = 400)]
        items: usize,
        #[arg(long, default_value_t = 2300)]
        events: usize,
        #[arg(long, default_value_t = 1.0)]
        zipf: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Parse a data file and report skipped rows.
    ValidateData {
        path: PathBuf,
        /// Take the column mapping from this experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Toml(_) => EXIT_USAGE,
        e if e.is_divergence() => EXIT_DIVERGED,
        _ => EXIT_DATA,
    }
}

/// Runs the command line and returns the process exit code:
/// 0 success, 1 usage error, 2 data error, 3 numeric divergence.
pub fn cli_main<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            error_code(&e)
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        config.override_seed(s);
    }
    if let Some(o) = out {
        config.output.dir = o;
    }
    Ok(config)
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<i32, Error> {
    match command {
        Command::Train { config, seed, out } => {
            let config = load_config(&config, seed, out)?;
            let data = prepare_data(&config)?;
            let cells = run_single_on(&data, &config)?;
            write_single_outputs(&config.output.dir, &data, &config, &cells)?;
            let mut any_diverged = false;
            for c in &cells {
                let r = &c.record;
                match (&r.status, &r.eval) {
                    (RunStatus::Ok, Some(ev)) => {
                        let _ = writeln!(
                            stdout,
                            "{}: mae={:.4} rmse={:.4} matthew={} n_test={}",
                            r.algorithm,
                            ev.mae,
                            ev.rmse,
                            ev.matthew_degree.map_or("undefined".to_string(), |m| format!("{m:.4}")),
                            ev.n_test
                        );
                    }
                    _ => {
                        any_diverged = true;
                        let _ = writeln!(stdout, "{}: diverged ({})", r.algorithm, r.error.as_deref().unwrap_or(""));
                    }
                }
            }
            let _ = writeln!(stdout, "reports written to {}", config.output.dir.display());
            Ok(if any_diverged { EXIT_DIVERGED } else { EXIT_OK })
        }
        Command::Sweep { config, seed, out } => {
            let config = load_config(&config, seed, out)?;
            let data = prepare_data(&config)?;
            let result = run_sweep_on(&data, &config)?;
            let summary = write_sweep_outputs(&config.output.dir, &config, &result)?;
            for b in &summary.algorithms {
                match (b.best_gamma, b.best_mae) {
                    (Some(g), Some(m)) => {
                        let _ = writeln!(stdout, "{}: best mae {m:.4} at gamma {g} ({} diverged)", b.algorithm, b.diverged_cells);
                    }
                    _ => {
                        let _ = writeln!(stdout, "{}: every cell diverged", b.algorithm);
                    }
                }
            }
            let _ = writeln!(stdout, "sweep written to {}", config.output.dir.join("sweep.csv").display());
            Ok(EXIT_OK)
        }
        Command::Predict { model, user, item, context } => {
            let snap = ModelSnapshot::load(&model)?;
            let codes = context
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<i64>()
                        .map_err(|_| Error::Validation(format!("bad context code `{s}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let c = snap.encoder.encode(&codes)?;
            let raw = trainers::predict(&snap.model, &user, &item, &c)?;
            let cold = !snap.model.users.contains(&user) || !snap.model.items.contains(&item);
            let _ = writeln!(
                stdout,
                "{raw}\t(clipped {}{})",
                snap.scale.clip(raw),
                if cold { ", cold-start" } else { "" }
            );
            Ok(EXIT_OK)
        }
        Command::Synth { out, users, items, events, zipf, seed } => {
            let spec = SynthSpec {
                n_users: users,
                n_items: items,
                n_events: events,
                zipf_exponent: zipf,
                seed,
                ..SynthSpec::default()
            };
            let ds = synth_generate(&spec, RatingScale::default())?;
            let mapping = ColumnMapping {
                context_columns: spec.column_names(),
                ..ColumnMapping::default()
            };
            let file = std::fs::File::create(&out).map_err(|e| Error::io(&out, e))?;
            write_csv(&ds, &mapping, std::io::BufWriter::new(file))?;
            let _ = writeln!(stdout, "wrote {} events to {}", ds.len(), out.display());
            Ok(EXIT_OK)
        }
        Command::ValidateData { path, config } => {
            let mapping = match config {
                Some(c) => ExperimentConfig::load(&c)?.data.columns,
                None => ColumnMapping::default(),
            };
            let outcome = parse_comoda(&path, &mapping)?;
            let ds = &outcome.dataset;
            let _ = writeln!(
                stdout,
                "rows read: {}, loaded: {}, skipped: {}",
                outcome.rows_read,
                ds.len(),
                outcome.rows_skipped()
            );
            let _ = writeln!(
                stdout,
                "users: {}, items: {}, context dimension: {}",
                ds.n_users(),
                ds.n_items(),
                ds.encoder().dim()
            );
            for d in &outcome.diagnostics {
                let _ = writeln!(stdout, "skipped {d}");
            }
            Ok(EXIT_OK)
        }
    }
}
