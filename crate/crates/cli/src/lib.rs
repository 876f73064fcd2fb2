//! Library side of the `qcgla` binary: argument parsing, the check suites
//! and the subcommand implementations.

pub mod args;
pub mod check;
mod commands;
pub mod gen;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use clap::Parser;
use qcgla::machine::MachineConfig;
use serde::Serialize;

use args::{Cli, Format};

/// Checks ran and at least one failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Bad usage, unreadable input or invalid data.
pub const EXIT_USAGE: i32 = 2;

/// Parses `argv` and runs the command, returning the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let mut ctx = Ctx {
        out_path: cli.out.clone(),
        format: cli.format,
        stdout,
        stderr,
    };
    match commands::dispatch(&cli, &mut ctx) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(ctx.stderr, "error: {e:#}");
            EXIT_USAGE
        }
    }
}

/// Defaults, then the config file, then flag overrides.
pub fn resolve_config(cli: &Cli) -> anyhow::Result<MachineConfig> {
    let mut cfg = MachineConfig::default();
    if let Some(path) = &cli.config {
        let text = read_text(path)?;
        cfg.apply_text(&text).with_context(|| format!("config {}", path.display()))?;
    }
    if let Some(f) = cli.freq {
        cfg.freq_hz = f;
    }
    if let Some(l) = cli.lanes {
        cfg.lanes = l as usize;
    }
    if let Some(h) = cli.host_cores {
        cfg.host_cores = h;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub(crate) fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Where records and human summaries go.
///
/// Records are written to `--out` when given, else to stdout. Summaries take
/// whichever of stdout/stderr the records leave free.
pub(crate) struct Ctx<'a> {
    pub out_path: Option<PathBuf>,
    pub format: Format,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

impl Ctx<'_> {
    pub fn emit(&mut self, data: &[u8]) -> anyhow::Result<()> {
        match &self.out_path {
            Some(p) => std::fs::write(p, data).with_context(|| format!("writing {}", p.display())),
            None => self.stdout.write_all(data).context("writing stdout"),
        }
    }

    pub fn summary(&mut self, text: &str) -> anyhow::Result<()> {
        let w: &mut dyn Write = if self.out_path.is_some() { &mut *self.stdout } else { &mut *self.stderr };
        w.write_all(text.as_bytes()).context("writing summary")
    }

    pub fn warn(&mut self, text: &str) {
        let _ = writeln!(self.stderr, "warning: {text}");
    }
}

/// CSV with an explicit header, so an empty table still has one.
pub fn to_csv<T: Serialize>(header: &[&str], rows: &[T]) -> anyhow::Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?)
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}
