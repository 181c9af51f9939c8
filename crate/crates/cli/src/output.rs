use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

/// Comment header shared by every file the tool writes. It records only the
/// inputs that determine the payload, so equal headers imply equal payloads.
#[derive(Debug, Clone)]
pub struct Header {
    lines: Vec<String>,
}

impl Header {
    pub fn new(command: &str) -> Self {
        Self {
            lines: vec![
                format!("latent-twd {}", latent_twd::VERSION),
                format!("command: {command}"),
            ],
        }
    }

    pub fn with(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        self.lines.push(format!("{key}: {value}"));
        self
    }

    pub fn text(&self) -> String {
        self.lines.join("\n")
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for line in &self.lines {
            writeln!(out, "# {line}")?;
        }
        Ok(())
    }
}

/// Renders the whole payload first, then writes it beside the target and
/// renames it into place, so a failure never leaves a partial file.
pub fn write_atomic(path: &Path, render: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    render(&mut buf).with_context(|| format!("io: rendering {}", path.display()))?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).with_context(|| format!("io: temp file in {}", dir.display()))?;
    tmp.write_all(&buf)
        .and_then(|_| tmp.as_file().sync_all())
        .with_context(|| format!("io: writing {}", path.display()))?;
    tmp.persist(path)
        .with_context(|| format!("io: renaming into {}", path.display()))?;
    Ok(())
}

/// Reads a Newick file, ignoring `#` comment lines.
pub fn read_newick(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path).with_context(|| format!("io: reading {}", path.display()))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n"))
}
