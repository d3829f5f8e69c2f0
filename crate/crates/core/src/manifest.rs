//! Run manifests: enough provenance to reproduce any command's outputs.
//!
//! A manifest records the tool version, the command, the resolved
//! configuration, and SHA-256 digests of every input and output file. No
//! timestamps: rerunning a command with the same inputs must reproduce the
//! manifest byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

pub struct Manifest {
    command: String,
    config_text: String,
    inputs: Vec<(PathBuf, String)>,
    outputs: Vec<(PathBuf, String)>,
}

impl Manifest {
    pub fn new(command: &str, config_text: &str) -> Self {
        Self {
            command: command.to_string(),
            config_text: config_text.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> std::io::Result<()> {
        self.inputs.push((path.to_path_buf(), sha256_file(path)?));
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> std::io::Result<()> {
        self.outputs.push((path.to_path_buf(), sha256_file(path)?));
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tool = condrec {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "config_sha256 = {}", sha256_hex(self.config_text.as_bytes()));
        for (path, digest) in &self.inputs {
            let _ = writeln!(s, "input = {} {}", path.display(), digest);
        }
        for (path, digest) in &self.outputs {
            let _ = writeln!(s, "output = {} {}", path.display(), digest);
        }
        let _ = writeln!(s, "--- config ---");
        s.push_str(&self.config_text);
        s
    }

    /// Writes `manifest-<command>.txt` into `dir` and returns the path.
    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(format!("manifest-{}.txt", self.command));
        std::fs::write(&path, self.to_text())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_round_trips_without_timestamps() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, "data").unwrap();
        let mut m = Manifest::new("test", "seed = 1\n");
        m.add_input(&input).unwrap();
        let a = m.to_text();
        let b = m.to_text();
        assert_eq!(a, b);
        assert!(a.contains("command = test"));
        assert!(a.contains("seed = 1"));
    }
}
