//! Run manifests: what was run, on which inputs, producing which outputs.
//!
//! Paths are stored exactly as given on the command line, so a run made with
//! relative paths yields the same manifest bytes from any working directory.

use std::fs;
use std::path::{Path, PathBuf};

use fairvote::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FORMAT: &str = "fairvote-manifest/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(FileDigest {
            path: path.to_string_lossy().into_owned(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub tool_version: String,
    pub command: String,
    /// Arguments after the program name, without `--workers`.
    pub argv: Vec<String>,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new<P: Serialize>(command: &str, argv: &[String], parameters: &P, seed: Option<u64>) -> Result<Self> {
        Ok(RunManifest {
            format: MANIFEST_FORMAT.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            argv: argv.to_vec(),
            parameters: serde_json::to_value(parameters).map_err(|e| Error::InvalidArgument(e.to_string()))?,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        write_file(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::MalformedFile(format!("{}: {e}", path.display())))?;
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| Error::MalformedFile(format!("{}: {e}", path.display())))?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::MalformedFile(format!("unsupported manifest format `{}`", m.format)));
        }
        Ok(m)
    }

    /// Fails when any recorded file no longer has its recorded digest.
    pub fn verify(files: &[FileDigest], what: &str) -> Result<()> {
        for f in files {
            let now = FileDigest::of(Path::new(&f.path))?;
            if now.sha256 != f.sha256 {
                return Err(Error::InvariantViolation(format!("{what} `{}` differs from the manifest", f.path)));
            }
        }
        Ok(())
    }
}

/// `<out>.manifest.json` next to a file output.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// `<out>.<suffix>`, for secondary outputs of the same run.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Drops `--workers N` / `--workers=N`, which never affects outputs.
pub fn strip_workers(args: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
        } else if a == "--workers" {
            skip = true;
        } else if !a.starts_with("--workers=") {
            out.push(a.clone());
        }
    }
    out
}
