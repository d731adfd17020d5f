//! Run context: configuration, artifact provenance and output placement.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use decomp_core::dp::io::ArtifactHeader;
use decomp_core::systems::config::Config;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

pub struct Context {
    pub config: Config,
    pub out_dir: Option<PathBuf>,
    pub deterministic: bool,
}

impl Context {
    pub fn load(config: Option<&Path>, out_dir: Option<PathBuf>, workers: Option<usize>) -> Result<Self, Failure> {
        let config = match config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
                Config::parse(&text)?
            }
            None => Config::default(),
        };
        if workers == Some(0) {
            return Err(Failure::usage("--workers must be at least 1"));
        }
        Ok(Context {
            config,
            out_dir,
            deterministic: workers == Some(1),
        })
    }

    /// SHA-256 of the canonical configuration text.
    pub fn config_digest(&self) -> String {
        hex::encode(Sha256::digest(self.config.canonical_text().as_bytes()))
    }

    pub fn artifact(&self, seed: Option<u64>) -> ArtifactHeader {
        ArtifactHeader {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_digest: self.config_digest(),
        }
    }

    /// Relative paths land in the output directory when one is set.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        match &self.out_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// Writes `bytes` to `path`, or to stdout without a path.
    pub fn emit(&self, path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
        match path {
            Some(p) => {
                let p = self.resolve(p);
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir)
                        .map_err(|e| Failure::runtime("io", format!("cannot create {}: {e}", dir.display())))?;
                }
                fs::write(&p, bytes).map_err(|e| Failure::runtime("io", format!("cannot write {}: {e}", p.display())))?;
            }
            None => std::io::stdout().write_all(bytes)?,
        }
        Ok(())
    }

    pub fn emit_json<T: Serialize>(&self, path: Option<&Path>, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::runtime("serialize", e.to_string()))?;
        text.push('\n');
        self.emit(path, text.as_bytes())
    }
}

/// A JSON report with the artifact header in front.
#[derive(Serialize)]
pub struct Stamped<'a, T: Serialize> {
    pub header: &'a ArtifactHeader,
    #[serde(flatten)]
    pub body: T,
}
