//! `manifest.json`: what was run and the checksum of every output file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ARTIFACT: &str = "relaysim";

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub version: String,
    pub target: String,
    pub seed: u64,
    pub trace: bool,
    /// Resolved configuration; parsing it over the defaults reproduces the run.
    pub config_toml: String,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn to_json(&self, output_dir: &Path) -> Value {
        json!({
            "artifact": ARTIFACT,
            "version": self.version,
            "target": self.target,
            "seed": self.seed,
            "trace": self.trace,
            "output_dir": output_dir.display().to_string(),
            "config_toml": self.config_toml,
            "outputs": self.outputs,
        })
    }

    pub fn write(&self, output_dir: &Path) -> Result<()> {
        let path = output_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.to_json(output_dir))? + "\n";
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        if v["artifact"] != ARTIFACT {
            bail!("not a relaysim manifest");
        }
        let text = |k: &str| -> Result<String> {
            v[k].as_str().map(str::to_string).with_context(|| format!("manifest field `{k}` missing or not a string"))
        };
        let outputs = v["outputs"]
            .as_object()
            .context("manifest field `outputs` missing")?
            .iter()
            .map(|(k, h)| Ok((k.clone(), h.as_str().context("checksum is not a string")?.to_string())))
            .collect::<Result<_>>()?;
        Ok(Manifest {
            version: text("version")?,
            target: text("target")?,
            seed: v["seed"].as_u64().context("manifest field `seed` missing")?,
            trace: v["trace"].as_bool().unwrap_or(false),
            config_toml: text("config_toml")?,
            outputs,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let v: Value = serde_json::from_str(&text).with_context(|| format!("{} is not JSON", path.display()))?;
        Self::from_json(&v)
    }
}

/// Files whose checksum differs or that exist on only one side.
pub fn mismatches(expected: &BTreeMap<String, String>, got: &BTreeMap<String, String>) -> Vec<String> {
    let mut bad: Vec<String> = expected
        .iter()
        .filter(|(k, h)| got.get(*k) != Some(h))
        .map(|(k, _)| k.clone())
        .collect();
    bad.extend(got.keys().filter(|k| !expected.contains_key(*k)).cloned());
    bad.sort();
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Manifest {
        Manifest {
            version: "0.1.0".into(),
            target: "relay".into(),
            seed: 7,
            trace: true,
            config_toml: "run.seed = 7\n".into(),
            outputs: BTreeMap::from([("a.csv".into(), "00ff".into())]),
        }
    }

    #[test]
    fn json_round_trip() {
        let m = sample();
        assert_eq!(Manifest::from_json(&m.to_json(Path::new("out"))).unwrap(), m);
    }

    #[test]
    fn foreign_json_is_rejected() {
        assert!(Manifest::from_json(&json!({"artifact": "other"})).is_err());
    }

    #[test]
    fn mismatch_listing() {
        let a = BTreeMap::from([("x".to_string(), "1".to_string()), ("y".to_string(), "2".to_string())]);
        let b = BTreeMap::from([("x".to_string(), "1".to_string()), ("z".to_string(), "3".to_string())]);
        assert_eq!(mismatches(&a, &b), vec!["y", "z"]);
        assert!(mismatches(&a, &a).is_empty());
    }
}
