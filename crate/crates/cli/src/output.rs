//! Output directory with digests and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub struct OutDir {
    root: PathBuf,
    digests: BTreeMap<String, String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            digests: BTreeMap::new(),
        })
    }

    /// Writes `name` (a bare file name) inside the output directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        debug_assert!(!name.contains('/'));
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.digests.insert(name.into(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> gilbertlab_core::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    /// Writes `manifest.json`. Timestamps and worker counts are deliberately
    /// absent so reruns are byte-identical.
    pub fn finish<C: Serialize>(self, subcommand: &str, config: &C, master_seed: u64) -> Result<(), CliError> {
        #[derive(Serialize)]
        #[serde(rename_all = "camelCase")]
        struct Manifest<'a, C> {
            #[serde(rename = "schema_version")]
            schema_version: u32,
            subcommand: &'a str,
            config: &'a C,
            master_seed: u64,
            version: &'a str,
            outputs: &'a BTreeMap<String, String>,
        }
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            subcommand,
            config,
            master_seed,
            version: env!("CARGO_PKG_VERSION"),
            outputs: &self.digests,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.root.join("manifest.json");
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}
