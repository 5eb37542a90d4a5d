//! Provenance record written next to every command's outputs: the full
//! configuration, the digests of every input file read, and the toolkit
//! version. Timestamps and host details are deliberately absent so repeated
//! runs produce byte-identical records.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Serialize)]
struct Provenance<'a> {
    command: &'a str,
    toolkit_version: &'a str,
    config: &'a RunConfig,
    input_digests: BTreeMap<String, String>,
}

pub struct ProvenanceBuilder<'a> {
    command: &'a str,
    config: &'a RunConfig,
    digests: BTreeMap<String, String>,
}

impl<'a> ProvenanceBuilder<'a> {
    pub fn new(command: &'a str, config: &'a RunConfig) -> Self {
        ProvenanceBuilder {
            command,
            config,
            digests: BTreeMap::new(),
        }
    }

    /// Record the sha256 of one input file (and, for raw-backed headers,
    /// callers also pass the data files explicitly).
    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let bytes = fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot digest {}: {e}", path.display())))?;
        let mut h = Sha256::new();
        h.update(&bytes);
        self.digests
            .insert(path.display().to_string(), hex::encode(h.finalize()));
        Ok(())
    }

    /// Digest a JSON header plus its sibling raw file(s).
    pub fn input_with_raw(&mut self, header: &Path, suffixes: &[&str]) -> CliResult<()> {
        self.input(header)?;
        if suffixes.is_empty() {
            self.input(&header.with_extension("raw"))?;
        }
        for s in suffixes {
            let stem = header.file_stem().unwrap_or_default().to_string_lossy();
            let raw: PathBuf = header.with_file_name(format!("{stem}_{s}.raw"));
            self.input(&raw)?;
        }
        Ok(())
    }

    pub fn write(self, out_dir: &Path) -> CliResult<()> {
        let p = Provenance {
            command: self.command,
            toolkit_version: env!("CARGO_PKG_VERSION"),
            config: self.config,
            input_digests: self.digests,
        };
        let text = serde_json::to_string_pretty(&p)
            .map_err(|e| CliError::Config(format!("provenance serialization: {e}")))?;
        let path = out_dir.join("provenance.json");
        fs::write(&path, text + "\n")
            .map_err(|e| CliError::Core(perfquant_core::Error::io(path, e)))?;
        Ok(())
    }
}

pub const MAP_SUFFIXES: [&str; 4] = ["cbv", "cbf", "mtt", "tmax"];
