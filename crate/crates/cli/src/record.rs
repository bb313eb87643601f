//! The run record: a self-describing JSON envelope around every command's
//! results, carrying the build id and the fully resolved inputs so any run
//! can be reproduced bit-for-bit from its own record.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::{CliResult, Overrides};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub build: &'static str,
    pub invocation: Invocation,
    pub results: Value,
    /// Raw CSVs written beside the summary (empty without `--raw`).
    pub raw_files: Vec<String>,
}

#[derive(Serialize)]
pub struct Invocation {
    pub subcommand: String,
    pub params: Value,
}

/// One raw CSV to drop beside the summary.
pub struct RawFile {
    pub name: &'static str,
    pub header: &'static str,
    pub rows: String,
}

/// Collects a command's outputs and writes them where the flags point.
pub struct Sink<'a> {
    out: Option<&'a Path>,
    raw: bool,
}

impl<'a> Sink<'a> {
    pub fn new(overrides: &'a Overrides) -> Self {
        Sink { out: overrides.out.as_deref(), raw: overrides.raw }
    }

    /// Path for an auxiliary artifact `<out-stem>-<name>`; next to the
    /// summary when `--out` is set, in the working directory otherwise.
    pub fn sibling(&self, name: &str) -> PathBuf {
        match self.out {
            Some(out) => {
                let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
                out.with_file_name(format!("{stem}-{name}"))
            }
            None => PathBuf::from(name),
        }
    }

    /// Write the record (and any raw files) and hand back the exit code.
    pub fn finish<P: Serialize, R: Serialize>(
        &self,
        subcommand: String,
        params: &P,
        results: &R,
        raw: Vec<RawFile>,
        exit: u8,
    ) -> CliResult<u8> {
        let mut raw_files = Vec::new();
        if self.raw {
            for file in &raw {
                let path = self.sibling(&format!("{}.csv", file.name));
                let mut text =
                    String::with_capacity(file.header.len() + file.rows.len() + 1);
                text.push_str(file.header);
                text.push('\n');
                text.push_str(&file.rows);
                fs::write(&path, text)?;
                raw_files.push(path.display().to_string());
            }
        }
        let record = RunRecord {
            schema_version: SCHEMA_VERSION,
            build: env!("BUILD_ID"),
            invocation: Invocation { subcommand, params: serde_json::to_value(params)? },
            results: serde_json::to_value(results)?,
            raw_files,
        };
        let mut text = serde_json::to_string_pretty(&record)?;
        text.push('\n');
        match self.out {
            Some(path) => fs::write(path, text)?,
            None => print!("{text}"),
        }
        Ok(exit)
    }
}
