//! File-based versioned embedding store: publish, list, fetch, and attach
//! benchmark reports.
//!
//! Layout: `root/<name>/v<N>/{payload.bin, manifest.json, report.json}`.
//! There is no separate index; listings are reconstructed by scanning the
//! tree. Publishes stage into a hidden temp directory and rename it into
//! place, so readers never observe partial entries; writers for one name
//! serialize through an exclusive lock file created atomically.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::bench::BenchmarkReport;
use crate::clock::Clock;
use crate::error::{Error, Result};
use crate::io::sha256_hex;

const PAYLOAD_FILE: &str = "payload.bin";
const MANIFEST_FILE: &str = "manifest.json";
const REPORT_FILE: &str = "report.json";
const LOCK_FILE: &str = ".lock";
const TMP_PREFIX: &str = ".tmp-";
const LOCK_RETRIES: usize = 100;
const LOCK_RETRY_DELAY: Duration = Duration::from_millis(10);

/// Caller-supplied manifest fields for a publish; the registry adds name,
/// version, creation time, and payload digest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PublishManifest {
    pub kind: String,
    pub dim: usize,
    pub count: usize,
    pub seed: u64,
    #[serde(default)]
    pub hyperparameters: serde_json::Value,
}

/// Full manifest as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryManifest {
    pub name: String,
    pub version: u64,
    pub dim: usize,
    pub count: usize,
    pub kind: String,
    pub seed: u64,
    pub created_at: String,
    pub digest: String,
    #[serde(default)]
    pub hyperparameters: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistryEntry {
    pub name: String,
    pub version: u64,
    pub created_at: String,
    pub digest: String,
    pub manifest: EntryManifest,
    pub has_report: bool,
}

impl RegistryEntry {
    pub fn dir(&self, root: &Path) -> PathBuf {
        root.join(&self.name).join(format!("v{}", self.version))
    }
}

fn validate_name(name: &str) -> Result<()> {
    if name.is_empty()
        || !name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(Error::InvalidParameter(format!(
            "name '{name}' must match [A-Za-z0-9_-]+"
        )));
    }
    Ok(())
}

/// Exclusive per-name publish lock backed by atomic file creation; removed
/// on drop.
struct PublishLock {
    path: PathBuf,
}

impl PublishLock {
    fn acquire(name_dir: &Path, name: &str) -> Result<Self> {
        let path = name_dir.join(LOCK_FILE);
        for _ in 0..LOCK_RETRIES {
            match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(_) => return Ok(Self { path }),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    std::thread::sleep(LOCK_RETRY_DELAY);
                }
                Err(e) => return Err(Error::io(&path, e)),
            }
        }
        Err(Error::LockContended(name.to_owned()))
    }
}

impl Drop for PublishLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn scan_versions(name_dir: &Path) -> Result<Vec<u64>> {
    let mut versions = Vec::new();
    let entries = match fs::read_dir(name_dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(versions),
        Err(e) => return Err(Error::io(name_dir, e)),
    };
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(name_dir, e))?;
        let file_name = entry.file_name();
        let Some(rest) = file_name.to_str().and_then(|s| s.strip_prefix('v')) else {
            continue;
        };
        if let Ok(v) = rest.parse::<u64>() {
            if entry.path().join(MANIFEST_FILE).exists() {
                versions.push(v);
            }
        }
    }
    versions.sort_unstable();
    Ok(versions)
}

/// Publishes a payload under the next version of `name`. The data is staged
/// in a temp directory, the written payload is re-read and verified against
/// its digest, and only then is the directory renamed into place. Orphaned
/// temp directories from interrupted publishes are cleaned up on the way.
pub fn publish(
    root: &Path,
    name: &str,
    payload: &[u8],
    info: &PublishManifest,
    report: Option<&BenchmarkReport>,
    clock: &Clock,
) -> Result<RegistryEntry> {
    validate_name(name)?;
    let name_dir = root.join(name);
    fs::create_dir_all(&name_dir).map_err(|e| Error::io(&name_dir, e))?;

    let _lock = PublishLock::acquire(&name_dir, name)?;

    // clear leftovers from interrupted publishes
    for entry in fs::read_dir(&name_dir).map_err(|e| Error::io(&name_dir, e))? {
        let entry = entry.map_err(|e| Error::io(&name_dir, e))?;
        if entry
            .file_name()
            .to_str()
            .is_some_and(|s| s.starts_with(TMP_PREFIX))
        {
            let _ = fs::remove_dir_all(entry.path());
        }
    }

    let version = scan_versions(&name_dir)?.last().copied().unwrap_or(0) + 1;
    let digest = sha256_hex(payload);
    let manifest = EntryManifest {
        name: name.to_owned(),
        version,
        dim: info.dim,
        count: info.count,
        kind: info.kind.clone(),
        seed: info.seed,
        created_at: clock.now(),
        digest: digest.clone(),
        hyperparameters: info.hyperparameters.clone(),
    };

    let tmp_dir = name_dir.join(format!("{TMP_PREFIX}v{version}"));
    fs::create_dir_all(&tmp_dir).map_err(|e| Error::io(&tmp_dir, e))?;
    let payload_path = tmp_dir.join(PAYLOAD_FILE);
    fs::write(&payload_path, payload).map_err(|e| Error::io(&payload_path, e))?;
    crate::model_io::write_json(&tmp_dir.join(MANIFEST_FILE), &manifest)?;
    if let Some(report) = report {
        crate::model_io::write_json(&tmp_dir.join(REPORT_FILE), report)?;
    }

    // verify the staged payload before exposing it
    let written = fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
    let written_digest = sha256_hex(&written);
    if written_digest != digest {
        let _ = fs::remove_dir_all(&tmp_dir);
        return Err(Error::Corruption {
            name: name.to_owned(),
            version,
            expected: digest,
            got: written_digest,
        });
    }

    let final_dir = name_dir.join(format!("v{version}"));
    fs::rename(&tmp_dir, &final_dir).map_err(|e| Error::io(&final_dir, e))?;

    Ok(RegistryEntry {
        name: name.to_owned(),
        version,
        created_at: manifest.created_at.clone(),
        digest,
        has_report: report.is_some(),
        manifest,
    })
}

/// Version selector for [`fetch`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VersionSpec {
    #[default]
    Latest,
    Exact(u64),
}

impl std::str::FromStr for VersionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "latest" {
            return Ok(VersionSpec::Latest);
        }
        s.trim_start_matches('v')
            .parse::<u64>()
            .map(VersionSpec::Exact)
            .map_err(|_| Error::InvalidParameter(format!("bad version '{s}'")))
    }
}

fn load_entry(root: &Path, name: &str, version: u64) -> Result<RegistryEntry> {
    let dir = root.join(name).join(format!("v{version}"));
    let manifest: EntryManifest = crate::model_io::read_json(&dir.join(MANIFEST_FILE))?;
    Ok(RegistryEntry {
        name: name.to_owned(),
        version,
        created_at: manifest.created_at.clone(),
        digest: manifest.digest.clone(),
        has_report: dir.join(REPORT_FILE).exists(),
        manifest,
    })
}

/// Fetches a payload, verifying it against the recorded digest first.
pub fn fetch(root: &Path, name: &str, version: VersionSpec) -> Result<(Vec<u8>, RegistryEntry)> {
    validate_name(name)?;
    let versions = scan_versions(&root.join(name))?;
    let version = match version {
        VersionSpec::Latest => *versions
            .last()
            .ok_or_else(|| Error::NotFound(format!("{name} has no versions")))?,
        VersionSpec::Exact(v) => {
            if !versions.contains(&v) {
                return Err(Error::NotFound(format!("{name} v{v}")));
            }
            v
        }
    };
    let entry = load_entry(root, name, version)?;
    let payload_path = entry.dir(root).join(PAYLOAD_FILE);
    let payload = fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
    let got = sha256_hex(&payload);
    if got != entry.digest {
        return Err(Error::Corruption {
            name: name.to_owned(),
            version,
            expected: entry.digest.clone(),
            got,
        });
    }
    Ok((payload, entry))
}

/// Reads the benchmark report attached to an entry, if any.
pub fn fetch_report(root: &Path, entry: &RegistryEntry) -> Result<Option<BenchmarkReport>> {
    let path = entry.dir(root).join(REPORT_FILE);
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(crate::model_io::read_json(&path)?))
}

/// All entries under the root (optionally one name), sorted by
/// (name, version).
pub fn list_entries(root: &Path, name_filter: Option<&str>) -> Result<Vec<RegistryEntry>> {
    let mut names = Vec::new();
    match name_filter {
        Some(name) => {
            validate_name(name)?;
            names.push(name.to_owned());
        }
        None => {
            for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
                let entry = entry.map_err(|e| Error::io(root, e))?;
                if !entry.path().is_dir() {
                    continue;
                }
                if let Some(s) = entry.file_name().to_str() {
                    if validate_name(s).is_ok() {
                        names.push(s.to_owned());
                    }
                }
            }
            names.sort_unstable();
        }
    }
    let mut entries = Vec::new();
    for name in names {
        for version in scan_versions(&root.join(&name))? {
            entries.push(load_entry(root, &name, version)?);
        }
    }
    Ok(entries)
}
