use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Parser;
use relaysim_core::Mode;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "RELAYSIM_OUT";

/// What a run executes: one mode, or baseline, relay and relay-im together.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Single(Mode),
    All,
}

impl Target {
    pub const ALL_MODES: [Mode; 3] = [Mode::Baseline, Mode::Relay, Mode::RelayIm];
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            Ok(Target::All)
        } else {
            s.parse().map(Target::Single)
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Single(m) => f.write_str(m.as_str()),
            Target::All => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "relaysim", version, about = "Inband D2D relaying in a 19-site macro network")]
pub struct Cli {
    /// TOML configuration applied over the defaults.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// baseline, relay, relay-im, upper-bound, snapshot or all.
    #[arg(long, value_name = "MODE")]
    pub mode: Option<Target>,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub drops: Option<usize>,

    /// Output directory.
    #[arg(long, value_name = "DIR", env = OUT_ENV, default_value = "relaysim-out")]
    pub out: PathBuf,

    /// Write the per-subframe schedule trace.
    #[arg(long)]
    pub trace: bool,

    /// 500 UEs per sector instead of the desk-scale 120.
    #[arg(long)]
    pub full_scale: bool,

    /// Worker threads for drops; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,

    /// Overrides one configuration key, e.g. `--set relay.prune_margin=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Re-runs the manifest's scenario into `--out` and checks every checksum.
    #[arg(long, value_name = "MANIFEST", conflicts_with_all = ["config", "mode", "seed", "drops", "trace", "full_scale", "overrides"])]
    pub replay: Option<PathBuf>,
}
