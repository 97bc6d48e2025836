//! `atbat` command line. Each subcommand writes into the store and prints a
//! JSON summary on stdout. Exit codes: 0 ok, 1 bad input, 2 internal failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::AppConfig;
use crate::game::Count;
use crate::ingest::{export_csv, ColumnMapping};
use crate::pipeline::{
    matchup_key, run_compare, run_ingest, run_simulate, run_train, AppError, SolveOverrides,
    SolveRequest, TrainedModels,
};
use crate::sim::{generate_world, CohortSpec, Roster};
use crate::store::{canonical_json, write_atomic};
use crate::zones::PitchType;

#[derive(Debug, Parser)]
#[command(name = "atbat", version, about = "Equilibrium pitch selection for the at-bat")]
struct Cli {
    /// JSON config file; ATBAT_* environment variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Store directory, overriding the config.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse pitch CSVs into a fresh store.
    Ingest {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Column mapping JSON; defaults to the built-in layout.
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// Roster JSON with player tiers, as written by `generate`.
        #[arg(long)]
        roster: Option<PathBuf>,
    },
    /// Fit control, outcome and patience models.
    Train,
    /// Solve one matchup.
    Solve {
        #[arg(long)]
        pitcher: String,
        #[arg(long)]
        batter: String,
        /// Pitch types to remove from the repertoire, comma separated.
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<PitchType>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        cap: Option<f64>,
        #[arg(long)]
        variance_scale: Option<f64>,
    },
    /// Monte Carlo OBP of equilibrium play from every count.
    Simulate {
        #[arg(long)]
        pitcher: String,
        #[arg(long)]
        batter: String,
        #[arg(long)]
        at_bats: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Equilibrium against behavioral play.
    Compare {
        #[arg(long)]
        pitcher: String,
        #[arg(long)]
        batter: String,
        #[arg(long)]
        at_bats: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Print a table instead of JSON.
        #[arg(long)]
        text: bool,
    },
    /// Write a synthetic cohort: pitches.csv and roster.json.
    Generate {
        /// Cohort spec JSON; defaults apply to missing fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write the ground-truth world parameters here.
        #[arg(long)]
        world: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        port: Option<u32>,
    },
}

fn invalid(e: impl std::fmt::Display) -> AppError {
    AppError::Validation(e.to_string())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn values_by_count(sol: &crate::solver::EquilibriumSolution) -> Value {
    Count::all()
        .map(|c| (c.to_string(), json!(sol.value(c))))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn execute(cli: Cli) -> Result<Value, AppError> {
    let mut config = AppConfig::from_env(cli.config.as_deref()).map_err(invalid)?;
    if let Some(s) = cli.store {
        config.store = s;
    }
    match cli.command {
        Command::Ingest { input, mapping, roster } => {
            if let Some(m) = mapping {
                config.mapping = ColumnMapping::from_json_file(&m).map_err(invalid)?;
            }
            let roster: Option<Roster> = roster.as_ref().map(read_json).transpose()?;
            let summary = run_ingest(&config, &input, roster.as_ref())?;
            Ok(serde_json::to_value(summary).map_err(invalid)?)
        }
        Command::Train => Ok(serde_json::to_value(run_train(&config)?).map_err(invalid)?),
        Command::Solve {
            pitcher,
            batter,
            exclude,
            threshold,
            cap,
            variance_scale,
        } => {
            let models = TrainedModels::load(&config.store)?;
            let req = SolveRequest {
                pitcher_id: pitcher,
                batter_id: batter,
                overrides: SolveOverrides {
                    excluded_pitch_types: exclude,
                    threshold,
                    cap,
                    variance_scale,
                },
            };
            let resp = models.solve(&config, &req)?;
            let path = if req.overrides.is_empty() {
                models.persist(&resp)?;
                let key = matchup_key("solutions", &req.pitcher_id, &req.batter_id);
                Some(models.store.path_of(&key)?)
            } else {
                None
            };
            Ok(json!({
                "pitcher_id": resp.pitcher_id,
                "batter_id": resp.batter_id,
                "values": values_by_count(&resp.solution),
                "provenance": resp.provenance,
                "solve_wall_ms": resp.solve_wall_ms,
                "path": path,
            }))
        }
        Command::Simulate { pitcher, batter, at_bats, seed } => {
            apply_sim(&mut config, at_bats, seed);
            let models = TrainedModels::load(&config.store)?;
            ensure_ids(&models, &pitcher, &batter)?;
            Ok(serde_json::to_value(run_simulate(&models, &config, &pitcher, &batter)?).map_err(invalid)?)
        }
        Command::Compare { pitcher, batter, at_bats, seed, text } => {
            apply_sim(&mut config, at_bats, seed);
            let models = TrainedModels::load(&config.store)?;
            ensure_ids(&models, &pitcher, &batter)?;
            let table = run_compare(&models, &config, &pitcher, &batter)?;
            if text {
                Ok(Value::String(table.to_text()))
            } else {
                Ok(serde_json::to_value(table).map_err(invalid)?)
            }
        }
        Command::Generate { spec, out, world } => {
            let spec: CohortSpec = match spec {
                Some(p) => read_json(&p)?,
                None => CohortSpec::default(),
            };
            let (w, records) = generate_world(&spec).map_err(invalid)?;
            std::fs::create_dir_all(&out).map_err(|e| AppError::Internal(e.to_string()))?;
            let csv_path = out.join("pitches.csv");
            let roster_path = out.join("roster.json");
            let mut buf = Vec::new();
            export_csv(&records, &mut buf).map_err(|e| AppError::Internal(e.to_string()))?;
            let io = |e: crate::store::StoreError| AppError::Internal(e.to_string());
            write_atomic(&csv_path, &buf).map_err(io)?;
            let enc = |e: serde_json::Error| AppError::Internal(e.to_string());
            write_atomic(&roster_path, &canonical_json(&w.roster()).map_err(enc)?).map_err(io)?;
            if let Some(p) = &world {
                write_atomic(p, &canonical_json(&w).map_err(enc)?).map_err(io)?;
            }
            Ok(json!({
                "records": records.len(),
                "pitchers": w.pitchers.len(),
                "batters": w.batters.len(),
                "csv": csv_path,
                "roster": roster_path,
                "world": world,
            }))
        }
        Command::Serve { bind, port } => {
            if let Some(b) = bind {
                config.http.bind = b;
            }
            if let Some(p) = port {
                config.http.port = p;
            }
            config.validate().map_err(invalid)?;
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| AppError::Internal(e.to_string()))?;
            rt.block_on(crate::service::serve(config))?;
            Ok(json!({"status": "stopped"}))
        }
    }
}

fn apply_sim(config: &mut AppConfig, at_bats: Option<usize>, seed: Option<u64>) {
    if let Some(n) = at_bats {
        config.simulation.at_bats = n;
    }
    if let Some(s) = seed {
        config.simulation.seed = s;
    }
}

fn ensure_ids(models: &TrainedModels, pitcher: &str, batter: &str) -> Result<(), AppError> {
    if !models.has_pitcher(pitcher) {
        return Err(invalid(format!("unknown pitcher {pitcher:?}")));
    }
    if !models.has_batter(batter) {
        return Err(invalid(format!("unknown batter {batter:?}")));
    }
    Ok(())
}

/// Run with `argv` (program name first), writing to the given streams.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = write!(stderr, "{}", e.render());
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli) {
        Ok(Value::String(s)) => {
            let _ = write!(stdout, "{s}");
            0
        }
        Ok(v) => {
            let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&v).unwrap_or_default());
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error ({}): {e}", e.code());
            e.exit_code()
        }
    }
}
