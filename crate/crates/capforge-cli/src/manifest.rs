//! Run manifests: a record of the resolved command, flags, and seed, written
//! next to each primary output before any work begins. Re-running a command
//! with the flags recorded in a manifest reproduces the outputs byte for
//! byte (everything downstream is seeded and deterministic).

use std::fmt::Display;
use std::path::Path;

use anyhow::{Context, Result};

pub const MANIFEST_VERSION: &str = "capforge v1";

#[derive(Debug, Clone)]
pub struct RunManifest {
    command: String,
    seed: Option<u64>,
    entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> RunManifest {
        RunManifest {
            command: command.to_owned(),
            seed: None,
            entries: Vec::new(),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn arg(mut self, key: &str, value: impl Display) -> Self {
        self.entries.push((key.to_owned(), value.to_string()));
        self
    }

    pub fn render(&self) -> String {
        let mut out = format!("# {MANIFEST_VERSION}\ncommand = {}\n", self.command);
        if let Some(seed) = self.seed {
            out.push_str(&format!("seed = {seed}\n"));
        }
        for (key, value) in &self.entries {
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    /// One-line `# ...` summary placed at the top of output files that have
    /// no format-owned version line of their own.
    pub fn comment_line(&self) -> String {
        let mut line = format!("# {MANIFEST_VERSION} {}", self.command);
        if let Some(seed) = self.seed {
            line.push_str(&format!(" seed={seed}"));
        }
        line
    }

    /// Writes `<output>.manifest`. Called before the command does any work.
    pub fn write_sidecar(&self, output: &Path) -> Result<()> {
        let mut path = output.as_os_str().to_owned();
        path.push(".manifest");
        std::fs::write(&path, self.render())
            .with_context(|| format!("writing manifest {}", Path::new(&path).display()))
    }
}
