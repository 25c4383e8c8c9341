use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::hex_digest;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance of one command invocation, written as `run_<command>.toml`
/// next to the artifacts it lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config_digest: String,
    pub model_digest: String,
    pub seeds: BTreeMap<String, u64>,
    pub versions: BTreeMap<String, String>,
    pub threads: usize,
    pub fem_calls: usize,
    pub cache_hits: usize,
    pub cache_corrupt: usize,
    /// Wall times in seconds, per phase.
    pub wall_seconds: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<Artifact>,
}

impl RunRecord {
    pub fn new(command: &str, config_digest: String, model_digest: String) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("vscl".into(), env!("CARGO_PKG_VERSION").into());
        RunRecord {
            command: command.into(),
            config_digest,
            model_digest,
            seeds: BTreeMap::new(),
            versions,
            threads: rayon::current_num_threads(),
            fem_calls: 0,
            cache_hits: 0,
            cache_corrupt: 0,
            wall_seconds: BTreeMap::new(),
            warnings: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn file_name(command: &str) -> String {
        format!("run_{}.toml", command.replace(' ', "_"))
    }

    /// Writes `bytes` to `dir/name` atomically and lists it.
    pub fn emit(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        if self.artifacts.iter().any(|a| a.name == name) {
            return Err(CliError::config(format!("artifact {name} emitted twice")));
        }
        let path = dir.join(name);
        write_atomic(&path, bytes)?;
        self.artifacts.push(Artifact { name: name.into(), path: path.clone(), sha256: hex_digest(bytes) });
        Ok(path)
    }

    pub fn save(&self, dir: &Path) -> CliResult<PathBuf> {
        let text = toml::to_string(self).map_err(|e| CliError::config(format!("run record: {e}")))?;
        let path = dir.join(Self::file_name(&self.command));
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(&format!("reading {}", path.display()), e))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let ctx = |e| CliError::io(&format!("writing {}", path.display()), e);
    {
        let mut f = fs::File::create(&tmp).map_err(ctx)?;
        f.write_all(bytes).map_err(ctx)?;
        f.sync_all().map_err(ctx)?;
    }
    fs::rename(&tmp, path).map_err(ctx)
}
