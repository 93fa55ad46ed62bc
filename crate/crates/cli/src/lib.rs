//! Command-line front end: assembles a configuration, runs it and writes CSV
//! outputs plus a checksummed manifest.

pub mod args;
pub mod manifest;
pub mod output;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use relaysim_core::engine::{self, RunOutput};
use relaysim_core::{Mode, ScenarioConfig};

pub use args::{Cli, Target};
use manifest::{mismatches, Manifest};
use output::{OutputDir, SystemSummary};

/// Splits `KEY=VALUE` and parses the value as TOML, falling back to a plain
/// string so `--set run.mode=relay` needs no quotes.
pub fn parse_override(s: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = s.split_once('=').with_context(|| format!("override `{s}` is not KEY=VALUE"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Defaults, then `--full-scale`, the config file, `--set` overrides and
/// finally the mode, seed and drop flags.
pub fn build_config(cli: &Cli) -> Result<(ScenarioConfig, Target)> {
    let mut cfg = ScenarioConfig::default();
    if cli.full_scale {
        cfg = cfg.full_scale();
    }
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        cfg.apply_toml_str(&text)?;
    }
    for o in &cli.overrides {
        let (key, value) = parse_override(o)?;
        cfg.set(&key, &value)?;
    }
    let target = cli.mode.unwrap_or(Target::Single(cfg.run.mode));
    if let Target::Single(m) = target {
        cfg = cfg.with_mode(m);
    }
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(d) = cli.drops {
        cfg.run.drops = d;
    }
    cfg.validate()?;
    Ok((cfg, target))
}

/// Files written by one execution and the text meant for stdout.
#[derive(Debug)]
pub struct Executed {
    pub outputs: BTreeMap<String, String>,
    pub report: String,
}

fn system_run(cfg: &ScenarioConfig, mode: Mode, threads: usize, trace: bool) -> Result<engine::SystemRun> {
    eprintln!("running {mode}: {} drops, seed {}", cfg.run.drops, cfg.run.seed);
    Ok(engine::run_system(&cfg.with_mode(mode), threads, trace)?)
}

fn summary_report(out: &OutputDir, rel: &str) -> Result<String> {
    let path = out.root().join(rel);
    fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))
}

/// Runs `target` with `cfg` and writes every output into `dir`.
pub fn execute(cfg: &ScenarioConfig, target: Target, trace: bool, threads: usize, dir: &Path) -> Result<Executed> {
    cfg.validate()?;
    let mut out = OutputDir::create(dir)?;
    let report = match target {
        Target::All => {
            let base_run = system_run(cfg, Mode::Baseline, threads, trace)?;
            let base = SystemSummary::of(&base_run.metrics);
            let mut rows = Vec::new();
            for mode in Target::ALL_MODES {
                let run = if mode == Mode::Baseline {
                    base_run.clone()
                } else {
                    system_run(cfg, mode, threads, trace)?
                };
                let s = output::write_system(&mut out, &format!("{mode}/"), &run, &base, trace)?;
                rows.push((mode.as_str(), s));
            }
            output::write_gains(&mut out, &rows, &base)?;
            summary_report(&out, "gains.csv")?
        }
        Target::Single(mode) if mode.is_system() => {
            let run = system_run(cfg, mode, threads, trace)?;
            let base = if mode == Mode::Baseline {
                SystemSummary::of(&run.metrics)
            } else {
                SystemSummary::of(&system_run(cfg, Mode::Baseline, threads, false)?.metrics)
            };
            output::write_system(&mut out, "", &run, &base, trace)?;
            summary_report(&out, "summary.csv")?
        }
        Target::Single(mode) => {
            eprintln!("running {mode}: {} drops, seed {}", cfg.run.drops, cfg.run.seed);
            match engine::run(&cfg.with_mode(mode), threads, false)? {
                RunOutput::UpperBound(r) => output::write_upper_bound(&mut out, &r)?,
                RunOutput::Snapshot(r) => output::write_snapshot(&mut out, &r)?,
                RunOutput::System(_) => unreachable!("system modes handled above"),
            }
            summary_report(&out, "summary.csv")?
        }
    };
    Ok(Executed {
        outputs: out.checksums,
        report,
    })
}

/// Configuration text stored in the manifest.
pub fn manifest_config(cfg: &ScenarioConfig) -> String {
    cfg.resolved().to_toml_string()
}

/// Runs a scenario and writes its manifest.
pub fn run_scenario(cli: &Cli) -> Result<Executed> {
    let (cfg, target) = build_config(cli)?;
    let done = execute(&cfg, target, cli.trace, cli.threads, &cli.out)?;
    Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        target: target.to_string(),
        seed: cfg.run.seed,
        trace: cli.trace,
        config_toml: manifest_config(&cfg),
        outputs: done.outputs.clone(),
    }
    .write(&cli.out)?;
    eprintln!("wrote {} files to {}", done.outputs.len(), cli.out.display());
    Ok(done)
}

/// Re-runs the scenario recorded in `manifest` into `dir` and fails unless
/// every checksum matches. No manifest is written.
pub fn replay(manifest: &Path, threads: usize, dir: &Path) -> Result<Executed> {
    let m = Manifest::read(manifest)?;
    if m.version != env!("CARGO_PKG_VERSION") {
        eprintln!("warning: manifest from version {}, running {}", m.version, env!("CARGO_PKG_VERSION"));
    }
    let cfg = ScenarioConfig::from_toml_str(&m.config_toml)?;
    let target: Target = m.target.parse().map_err(anyhow::Error::msg)?;
    let done = execute(&cfg, target, m.trace, threads, dir)?;
    let bad = mismatches(&m.outputs, &done.outputs);
    if !bad.is_empty() {
        bail!("replay differs in {} file(s): {}", bad.len(), bad.join(", "));
    }
    eprintln!("replay matches all {} checksums", m.outputs.len());
    Ok(done)
}

/// Entry point shared by the binary and the tests.
pub fn main_with(cli: &Cli) -> Result<Executed> {
    match &cli.replay {
        Some(path) => replay(path, cli.threads, &cli.out),
        None => run_scenario(cli),
    }
}
