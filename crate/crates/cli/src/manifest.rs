//! Run directories and manifests.
//!
//! A run directory is named after the experiment and the hash of its
//! resolved configuration. It holds the configuration, copies of every input
//! file, the artifacts and `manifest.json`. The manifest embeds the resolved
//! configuration and the SHA-256 of every file, so a run can be repeated and
//! checked from the manifest alone.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Kind};
use crate::experiments::{execute, Artifacts};

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.json";
const INPUTS: &str = "inputs";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: Kind,
    pub seed: u64,
    pub config_sha256: String,
    /// Resolved configuration; input paths are relative to the run directory.
    pub config: Value,
    pub inputs: Vec<FileHash>,
    pub artifacts: Vec<FileHash>,
    pub jobs: Option<usize>,
    pub started_unix_s: f64,
    pub wall_time_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_file(dir: &Path, name: &str) -> Result<FileHash> {
    let bytes = fs::read(dir.join(name)).with_context(|| format!("reading {name}"))?;
    Ok(FileHash { file: name.to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 })
}

/// Result of a finished run.
#[derive(Debug)]
pub struct Run {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub summary: Map<String, Value>,
}

/// Runs a validated configuration whose input paths are absolute. Output
/// goes to a hidden staging directory that is renamed into place on success
/// and removed on failure.
pub fn run(cfg: &ExperimentConfig, root: &Path, jobs: Option<usize>) -> Result<Run> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let clock = Instant::now();
    let mut recorded = cfg.clone();
    let mut copies = Vec::new();
    for (i, p) in recorded.options.inputs_mut().into_iter().enumerate() {
        let ext = p.extension().and_then(|e| e.to_str()).unwrap_or("dat").to_string();
        let rel = format!("{INPUTS}/{i}.{ext}");
        copies.push((p.clone(), rel.clone()));
        *p = PathBuf::from(rel);
    }
    let config = recorded.to_value();
    let text = serde_json::to_string_pretty(&config)? + "\n";
    let config_sha256 = sha256_hex(text.as_bytes());
    let name = format!("{}-{}", cfg.experiment.name(), &config_sha256[..12]);
    let dir = root.join(&name);
    let staging = root.join(format!(".{name}.partial"));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir_all(&staging).with_context(|| format!("creating {}", staging.display()))?;
    let outcome = (|| -> Result<(Manifest, Map<String, Value>)> {
        fs::write(staging.join(CONFIG), &text)?;
        let mut inputs = Vec::new();
        if !copies.is_empty() {
            fs::create_dir_all(staging.join(INPUTS))?;
        }
        for (src, rel) in &copies {
            fs::copy(src, staging.join(rel)).with_context(|| format!("copying {}", src.display()))?;
            inputs.push(hash_file(&staging, rel)?);
        }
        let mut out = Artifacts::new(&staging);
        let summary = execute(cfg, &mut out)?;
        let artifacts = out.files.iter().map(|f| hash_file(&staging, f)).collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            tool: "r2d".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            experiment: cfg.experiment,
            seed: cfg.seed,
            config_sha256: config_sha256.clone(),
            config: config.clone(),
            inputs,
            artifacts,
            jobs,
            started_unix_s: started,
            wall_time_s: clock.elapsed().as_secs_f64(),
        };
        fs::write(staging.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok((manifest, summary))
    })();
    match outcome {
        Ok((manifest, summary)) => {
            if dir.exists() {
                fs::remove_dir_all(&dir)?;
            }
            fs::rename(&staging, &dir)?;
            Ok(Run { dir, manifest, summary })
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let path = if path.is_dir() { path.join(MANIFEST) } else { path.to_path_buf() };
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Files whose hashes differ between two manifests, or that exist in only
/// one of them.
pub fn differences(a: &Manifest, b: &Manifest) -> Vec<String> {
    let mut out = Vec::new();
    for x in &a.artifacts {
        match b.artifacts.iter().find(|y| y.file == x.file) {
            Some(y) if y.sha256 == x.sha256 => {}
            Some(_) => out.push(format!("{} differs", x.file)),
            None => out.push(format!("{} missing", x.file)),
        }
    }
    for y in &b.artifacts {
        if !a.artifacts.iter().any(|x| x.file == y.file) {
            out.push(format!("{} unexpected", y.file));
        }
    }
    out
}

/// Repeats the run described by a manifest under `root` and compares the
/// artifacts.
pub fn reproduce(path: &Path, root: &Path, jobs: Option<usize>) -> Result<(Run, Vec<String>)> {
    let original = read_manifest(path)?;
    let base = if path.is_dir() { path.to_path_buf() } else { path.parent().map(Path::to_path_buf).unwrap_or_default() };
    for input in &original.inputs {
        let now = hash_file(&base, &input.file)?;
        if now.sha256 != input.sha256 {
            bail!("input {} no longer matches its recorded hash", input.file);
        }
    }
    let mut cfg = ExperimentConfig::from_value(&original.config)
        .map_err(|v| anyhow::anyhow!("manifest configuration is invalid: {}", v.join("; ")))?;
    cfg.resolve_inputs(&base).map_err(|v| anyhow::anyhow!(v.join("; ")))?;
    if root.canonicalize().ok() == base.parent().and_then(|p| p.canonicalize().ok()) {
        bail!("reproduce into a different output root than the original run");
    }
    let again = run(&cfg, root, jobs)?;
    let diffs = differences(&original, &again.manifest);
    Ok((again, diffs))
}
