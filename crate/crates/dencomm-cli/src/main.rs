//! `dencomm` — seeded experiment runner for the dendritic communication-cost
//! workbench.
//!
//! Every run is a pure function of (config, seed, version): artifacts are
//! byte-identical across reruns and a `manifest.json` with per-output
//! checksums is written next to them.
//!
//! Exit codes: 0 success, 2 config parse/validation error, 3 unknown
//! experiment kind, 4 unwritable output path, 5 invalid grid values,
//! 6 check failure under `--check`.

mod config;
mod experiments;
mod manifest;
mod recipes;

use clap::{Parser, Subcommand};
use config::{ExperimentConfig, Kind, KNOWN_KINDS};
use experiments::{run_experiment, RunError, RunOutput};
use manifest::{sha256_hex, unix_now, OutputRecord, RunManifest};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_UNKNOWN_KIND: u8 = 3;
const EXIT_OUTPUT: u8 = 4;
const EXIT_GRID: u8 = 5;
const EXIT_CHECK: u8 = 6;

#[derive(Parser)]
#[command(name = "dencomm", version, about = "dendritic communication-cost workbench")]
struct Cli {
    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory run artifacts are written into.
    #[arg(long, global = true, default_value = "runs")]
    out_dir: PathBuf,
    /// Exit nonzero if any configured check fails.
    #[arg(long, global = true)]
    check: bool,
    /// Worker threads for independent grid cells (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run any experiment config, dispatching on its `kind`.
    Run {
        /// Path to a TOML experiment config.
        config: PathBuf,
    },
    /// Biological wiring-length estimation (EMST over synapse clouds).
    Wiring(KindArgs),
    /// PE-mesh communication costs, dense map and sparse sweeps.
    Mesh(KindArgs),
    /// Tiled-GEMM global-memory traffic model and cache simulation.
    Gemm(KindArgs),
    /// Architecture complexity table, Psi ratios and memory accounting.
    Complexity(KindArgs),
    /// Verify the sum-entropy identity on random joint distributions.
    Entropy {
        #[command(flatten)]
        source: KindArgs,
        /// Override the number of random joints.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Train small point vs dendritic MLPs on synthetic blobs.
    TrainToy(KindArgs),
    /// List, show or run the built-in reproduction recipes.
    Recipes {
        #[command(subcommand)]
        action: Option<RecipeAction>,
    },
}

#[derive(clap::Args)]
struct KindArgs {
    /// Path to a TOML experiment config.
    #[arg(long, conflicts_with = "recipe")]
    config: Option<PathBuf>,
    /// Name of a built-in recipe to use instead of a file.
    #[arg(long)]
    recipe: Option<String>,
}

#[derive(Subcommand)]
enum RecipeAction {
    /// Print the recipe catalog (default action).
    List,
    /// Print a recipe's TOML to stdout.
    Show { name: String },
    /// Run a recipe by name.
    Run { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(code) => code,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

type Failure = (u8, String);

fn real_main(cli: Cli) -> Result<ExitCode, Failure> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| (EXIT_CONFIG, format!("thread pool: {e}")))?;
    }

    let (text, expect_kind): (String, Option<Kind>) = match &cli.command {
        Command::Run { config } => (read_config(config)?, None),
        Command::Wiring(args) => (resolve_source(args, None)?, Some(Kind::Wiring)),
        Command::Mesh(args) => (resolve_source(args, None)?, Some(Kind::Mesh)),
        Command::Gemm(args) => (resolve_source(args, None)?, Some(Kind::Gemm)),
        Command::Complexity(args) => (
            resolve_source(args, Some("table-b1-complexity"))?,
            Some(Kind::Complexity),
        ),
        Command::Entropy { source, .. } => (
            resolve_source(source, Some("entropy-verify"))?,
            Some(Kind::Entropy),
        ),
        Command::TrainToy(args) => (resolve_source(args, None)?, Some(Kind::TrainToy)),
        Command::Recipes { action } => {
            return match action {
                None | Some(RecipeAction::List) => {
                    print!("{}", recipes::catalog());
                    Ok(ExitCode::SUCCESS)
                }
                Some(RecipeAction::Show { name }) => {
                    let recipe = recipes::find(name)
                        .ok_or((EXIT_CONFIG, format!("no recipe named `{name}`")))?;
                    print!("{}", recipe.toml);
                    Ok(ExitCode::SUCCESS)
                }
                Some(RecipeAction::Run { name }) => {
                    let recipe = recipes::find(name)
                        .ok_or((EXIT_CONFIG, format!("no recipe named `{name}`")))?;
                    let config = parse_config(recipe.toml, None, &cli)?;
                    execute(config, &cli)
                }
            };
        }
    };

    let config = parse_config(&text, expect_kind, &cli)?;
    execute(config, &cli)
}

fn read_config(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| (EXIT_CONFIG, format!("cannot read {}: {e}", path.display())))
}

fn resolve_source(args: &KindArgs, default_recipe: Option<&str>) -> Result<String, Failure> {
    if let Some(path) = &args.config {
        return read_config(path);
    }
    let name = args
        .recipe
        .as_deref()
        .or(default_recipe)
        .ok_or((EXIT_CONFIG, "pass --config PATH or --recipe NAME".to_string()))?;
    let recipe = recipes::find(name).ok_or((
        EXIT_CONFIG,
        format!("no recipe named `{name}`\n{}", recipes::catalog()),
    ))?;
    Ok(recipe.toml.to_string())
}

/// Parse in two steps so an unrecognized `kind` gets its own exit code.
fn parse_config(text: &str, expect: Option<Kind>, cli: &Cli) -> Result<ExperimentConfig, Failure> {
    #[derive(serde::Deserialize)]
    struct KindSniff {
        kind: Option<toml::Value>,
    }
    let sniff: KindSniff = toml::from_str(text)
        .map_err(|e| (EXIT_CONFIG, format!("config parse error: {e}")))?;
    match sniff.kind {
        None => return Err((EXIT_CONFIG, "config is missing `kind`".into())),
        Some(toml::Value::String(s)) if KNOWN_KINDS.contains(&s.as_str()) => {}
        Some(other) => {
            return Err((
                EXIT_UNKNOWN_KIND,
                format!("unknown experiment kind {other}; expected one of {KNOWN_KINDS:?}"),
            ))
        }
    }
    let mut config = ExperimentConfig::from_toml(text).map_err(|e| (EXIT_CONFIG, e))?;
    if let Some(expected) = expect {
        if config.kind != expected {
            return Err((
                EXIT_CONFIG,
                format!(
                    "config has kind `{}` but the subcommand runs `{}`",
                    config.kind.as_str(),
                    expected.as_str()
                ),
            ));
        }
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Command::Entropy {
        trials: Some(trials),
        ..
    } = &cli.command
    {
        if let Some(e) = config.entropy.as_mut() {
            e.trials = *trials;
        }
    }
    config.validate().map_err(|e| (EXIT_CONFIG, e))?;
    Ok(config)
}

fn execute(config: ExperimentConfig, cli: &Cli) -> Result<ExitCode, Failure> {
    let started = unix_now();
    let output: RunOutput = run_experiment(&config).map_err(|e| match e {
        RunError::Config(m) => (EXIT_CONFIG, m),
        RunError::InvalidGrid(m) => (EXIT_GRID, m),
    })?;

    let run_name = config
        .name
        .clone()
        .unwrap_or_else(|| config.kind.as_str().to_string());
    let dir = cli.out_dir.join(&run_name);
    std::fs::create_dir_all(&dir)
        .map_err(|e| (EXIT_OUTPUT, format!("cannot create {}: {e}", dir.display())))?;

    let mut outputs = Vec::new();
    for artifact in &output.artifacts {
        let path = dir.join(&artifact.name);
        std::fs::write(&path, &artifact.bytes)
            .map_err(|e| (EXIT_OUTPUT, format!("cannot write {}: {e}", path.display())))?;
        outputs.push(OutputRecord {
            path: artifact.name.clone(),
            sha256: sha256_hex(&artifact.bytes),
            bytes: artifact.bytes.len() as u64,
        });
    }

    let manifest = RunManifest {
        tool: "dencomm".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: config.kind.as_str().into(),
        name: config.name.clone(),
        seed: config.seed,
        config_sha256: sha256_hex(config.to_toml().as_bytes()),
        started_unix: started,
        finished_unix: unix_now(),
        outputs,
        checks: output.checks.clone(),
    };
    let manifest_path = dir.join("manifest.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(|e| (EXIT_OUTPUT, format!("cannot write manifest: {e}")))?;

    print!("{}", output.report);
    for record in &output.checks {
        println!(
            "[{}] {}: {}",
            if record.passed { "PASS" } else { "FAIL" },
            record.name,
            record.detail
        );
    }
    println!("artifacts written to {}", dir.display());

    if cli.check && output.checks.iter().any(|c| !c.passed) {
        return Err((EXIT_CHECK, "one or more checks failed".into()));
    }
    Ok(ExitCode::SUCCESS)
}
