use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ctstreak::io::write_atomic;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::{with_suffix, Command, ReplayArgs};
use crate::error::usage;

pub const TOOL: &str = "ctstreak";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Every flag after defaults were resolved; replay feeds this back in.
    pub params: Command,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub threads: Option<usize>,
    pub duration_seconds: f64,
    #[serde(default)]
    pub results: Value,
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    with_suffix(primary, ".manifest.json")
}

impl RunManifest {
    pub fn new(params: &Command, threads: Option<usize>, duration_seconds: f64, results: Value) -> Self {
        RunManifest {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: params.name().into(),
            params: params.clone(),
            seeds: params.seeds(),
            inputs: params.inputs(),
            outputs: params.outputs(),
            threads,
            duration_seconds,
            results,
        }
    }

    pub fn write(&self) -> Result<PathBuf> {
        let primary = self.outputs.first().context("command has no outputs")?;
        let path = manifest_path(primary);
        let mut text = serde_json::to_vec_pretty(self)?;
        text.push(b'\n');
        write_atomic(&path, &text)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let m: RunManifest = serde_json::from_slice(&bytes).with_context(|| format!("parsing manifest {}", path.display()))?;
        if m.tool != TOOL {
            bail!("{} was not written by {TOOL}", path.display());
        }
        Ok(m)
    }
}

/// Re-runs the recorded command. With `check`, outputs go to a scratch
/// directory and are compared with the recorded files.
pub fn replay(a: &ReplayArgs, threads: Option<usize>, run: impl Fn(&Command, Option<usize>) -> Result<()>) -> Result<()> {
    let m = RunManifest::read(&a.manifest)?;
    if matches!(m.params, Command::Replay(_)) {
        return Err(usage("a replay manifest cannot be replayed"));
    }
    if !a.check {
        return run(&m.params, threads);
    }
    let scratch = tempfile::tempdir()?;
    let mut cmd = m.params.clone();
    let mut compare = Vec::new();
    for (i, slot) in cmd.outputs_mut().into_iter().enumerate() {
        let name = slot.path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let fresh = scratch.path().join(format!("{i}_{name}"));
        if slot.exact {
            compare.push((slot.path.clone(), fresh.clone()));
        }
        *slot.path = fresh;
    }
    run(&cmd, threads)?;
    let mut differ = Vec::new();
    for (recorded, fresh) in &compare {
        let old = fs::read(recorded).with_context(|| format!("reading recorded output {}", recorded.display()))?;
        let new = fs::read(fresh)?;
        let same = old == new;
        println!("{} {}", if same { "identical" } else { "DIFFERS  " }, recorded.display());
        if !same {
            differ.push(recorded.display().to_string());
        }
    }
    if !differ.is_empty() {
        bail!("replay differs for {}", differ.join(", "));
    }
    println!("replay reproduced {} output(s) bit-exactly", compare.len());
    Ok(())
}
