//! Command-line front end of the universality toolkit.
//!
//! Each subcommand reads a [`config::RunConfig`], runs one computation and
//! writes `<command>.json` (plus an optional `<command>.csv`) into the
//! output directory. Exit codes: 0 pass, 2 inconclusive or budget
//! exhausted, 1 error.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

pub use commands::{CommandKind, Outcome, Status};
use config::RunConfig;

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub prime_ceiling: Option<u64>,
    pub threads: Option<usize>,
}

/// Exit code of a finished run.
pub fn exit_code(status: Status) -> u8 {
    match status {
        Status::Pass => 0,
        Status::Inconclusive => 2,
    }
}

fn envelope(kind: CommandKind, config: &RunConfig, outcome: &Outcome) -> Value {
    let status = match outcome.status {
        Status::Pass => "pass",
        Status::Inconclusive => "inconclusive",
    };
    json!({
        "command": kind.name(),
        "status": status,
        "exit_code": exit_code(outcome.status),
        "seed": config.seed,
        "prime_ceiling": config.prime_ceiling,
        "ledger": outcome.ledger,
        "slack": outcome.slack,
        "result": outcome.result,
        "config": config,
    })
}

fn write(path: PathBuf, contents: &str) -> anyhow::Result<()> {
    std::fs::write(&path, contents).map_err(|e| anyhow::anyhow!("writing {}: {e}", path.display()))
}

fn pretty(value: &Value) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("report serialises");
    out.push('\n');
    out
}

/// Loads the config, applies the flag overrides, runs the subcommand and
/// writes its artifacts. Returns the exit code.
pub fn execute(kind: CommandKind, config_path: &Path, overrides: &Overrides, out: &Path) -> u8 {
    match try_execute(kind, config_path, overrides, out) {
        Ok(code) => code,
        Err(e) => {
            let message = format!("{e:#}");
            eprintln!("error: {message}");
            let report = json!({
                "command": kind.name(),
                "status": "error",
                "exit_code": 1,
                "error": message,
            });
            if std::fs::create_dir_all(out).is_ok() {
                let _ = write(out.join(format!("{}.json", kind.name())), &pretty(&report));
            }
            1
        }
    }
}

fn try_execute(kind: CommandKind, config_path: &Path, overrides: &Overrides, out: &Path) -> anyhow::Result<u8> {
    if let Some(n) = overrides.threads {
        // Results do not depend on the thread count; a pool that already
        // exists (e.g. in tests) is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let mut config = RunConfig::load(config_path)?;
    if let Some(seed) = overrides.seed {
        config.seed = Some(seed);
    }
    if let Some(ceiling) = overrides.prime_ceiling {
        if ceiling < 3 {
            anyhow::bail!("--prime-ceiling must be at least 3");
        }
        config.prime_ceiling = ceiling;
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    let outcome = commands::run(kind, &commands::Run { config: &config, base })?;
    std::fs::create_dir_all(out).map_err(|e| anyhow::anyhow!("creating {}: {e}", out.display()))?;
    write(out.join(format!("{}.json", kind.name())), &pretty(&envelope(kind, &config, &outcome)))?;
    if config.outputs.csv {
        if let Some(csv) = &outcome.csv {
            write(out.join(format!("{}.csv", kind.name())), csv)?;
        }
    }
    for (name, contents) in &outcome.files {
        write(out.join(name), contents)?;
    }
    Ok(exit_code(outcome.status))
}
