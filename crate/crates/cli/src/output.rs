use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

pub const OUT_DIR_ENV: &str = "ANOSOV_OUT_DIR";

/// Reproducibility header: tool version, echoed configuration, seed and
/// worker count.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: Value,
    pub seed: Option<u64>,
    pub workers: usize,
}

impl Header {
    pub fn comment_lines(&self) -> String {
        format!("# {}\n", serde_json::to_string(self).expect("header serializes"))
    }
}

/// A rendered artifact and where it goes.
pub enum Artifact {
    /// CSV with `#` header lines.
    Csv(String),
    /// JSON document `{"header", "data"}`.
    Json(Value),
    /// Raw bytes; the header goes to stderr.
    Bytes(Vec<u8>),
}

impl Artifact {
    pub fn csv(header: &Header, body: &str) -> Self {
        Artifact::Csv(header.comment_lines() + body)
    }

    pub fn json(header: &Header, data: Value) -> Self {
        Artifact::Json(json!({ "header": header, "data": data }))
    }

    fn into_bytes(self) -> Vec<u8> {
        match self {
            Artifact::Csv(s) => s.into_bytes(),
            Artifact::Json(v) => {
                let mut s = serde_json::to_string_pretty(&v).expect("artifact serializes");
                s.push('\n');
                s.into_bytes()
            }
            Artifact::Bytes(b) => b,
        }
    }
}

pub fn resolve(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// `dir/stem_suffix.ext` for a resolved output path.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{suffix}"),
    };
    path.with_file_name(name)
}

pub fn write(artifact: Artifact, path: Option<&Path>) -> Result<(), CliError> {
    let bytes = artifact.into_bytes();
    match path {
        Some(p) => fs::write(p, &bytes).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(&bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}
