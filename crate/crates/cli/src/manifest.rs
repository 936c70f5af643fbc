//! Artifact bookkeeping: emitted files, checks, warnings and the plain-text
//! manifest written at the end of every run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ergolab::output::{format_f64, Table};

use crate::config::Loaded;
use crate::digest;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    /// Bad configuration, map definition or parameters; also I/O failures.
    Validation = 1,
    /// The run finished but at least one check failed.
    CheckFailed = 2,
    /// All checks passed but something deserves attention.
    Warning = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    /// Human-readable criterion, e.g. `< 0.05`.
    pub criterion: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub config_path: PathBuf,
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_clock: f64,
    pub files: Vec<Artifact>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub cache: Vec<String>,
}

impl RunManifest {
    pub fn status(&self) -> ExitStatus {
        if self.checks.iter().any(|c| !c.pass) {
            ExitStatus::CheckFailed
        } else if !self.warnings.is_empty() {
            ExitStatus::Warning
        } else {
            ExitStatus::Success
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "ergolab {}", self.version);
        let _ = writeln!(s, "command: {}", self.command);
        let _ = writeln!(s, "config: {}", self.config_path.display());
        let _ = writeln!(s, "config_sha256: {}", self.config_hash);
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "threads: {}", self.threads);
        let _ = writeln!(s, "platform: {} {}", std::env::consts::OS, std::env::consts::ARCH);
        let _ = writeln!(s, "wall_clock_seconds: {:.3}", self.wall_clock);
        let _ = writeln!(s, "exit_status: {}", self.status().code());
        let _ = writeln!(s, "\n[checks]");
        for c in &self.checks {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{verdict} {} value={} criterion: {}", c.name, format_f64(c.value), c.criterion);
        }
        let _ = writeln!(s, "\n[warnings]");
        for w in &self.warnings {
            let _ = writeln!(s, "{w}");
        }
        let _ = writeln!(s, "\n[cache]");
        for c in &self.cache {
            let _ = writeln!(s, "{c}");
        }
        let _ = writeln!(s, "\n[files]");
        for f in &self.files {
            let _ = writeln!(s, "{}  {:>10}  {}", f.sha256, f.bytes, f.name);
        }
        s
    }
}

/// Collects what a command emits.
pub struct Run {
    pub out: PathBuf,
    command: String,
    start: Instant,
    files: Vec<Artifact>,
    checks: Vec<Check>,
    warnings: Vec<String>,
    cache: Vec<String>,
}

impl Run {
    pub fn new(command: &str, out: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(out)?;
        Ok(Self {
            out: out.to_path_buf(),
            command: command.to_string(),
            start: Instant::now(),
            files: Vec::new(),
            checks: Vec::new(),
            warnings: Vec::new(),
            cache: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        std::fs::write(self.out.join(name), contents)?;
        self.files.push(Artifact {
            name: name.to_string(),
            sha256: digest(contents.as_bytes()),
            bytes: contents.len(),
        });
        Ok(())
    }

    pub fn table(&mut self, name: &str, table: &Table) -> std::io::Result<()> {
        self.write(name, &table.to_csv())
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, value: f64, criterion: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, value, criterion: criterion.into() });
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn note_cache(&mut self, line: impl Into<String>) {
        self.cache.push(line.into());
    }

    /// Write `manifest-<command>.txt` and return the manifest.
    pub fn finish(self, loaded: &Loaded, threads: usize) -> std::io::Result<RunManifest> {
        let m = RunManifest {
            command: self.command,
            config_path: loaded.path.clone(),
            config_hash: loaded.config.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: loaded.config.stats.seed,
            threads,
            wall_clock: self.start.elapsed().as_secs_f64(),
            files: self.files,
            checks: self.checks,
            warnings: self.warnings,
            cache: self.cache,
        };
        std::fs::write(self.out.join(format!("manifest-{}.txt", m.command)), m.render())?;
        Ok(m)
    }
}
