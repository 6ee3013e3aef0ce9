//! Response records and the line-delimited JSON response log.
//!
//! A log file starts with one header object carrying run metadata, followed
//! by one [`ResponseRecord`] per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::parse::Parsed;
use crate::backends::GenerationParams;
use crate::error::{Error, Result};

/// Format tag written into every log header.
pub const LOG_FORMAT: &str = "compass-response-log/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseRecord {
    pub proposition_id: String,
    pub language: String,
    pub paraphrase_id: usize,
    pub raw_text: String,
    pub parsed: Parsed,
    pub backend_id: String,
    pub generation_params_id: String,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    pub log_format: String,
    pub run_id: String,
    pub backend_id: String,
    pub backend_kind: String,
    pub language: String,
    pub generation_params_id: String,
    pub generation_params: GenerationParams,
    /// Whether the seed reached the backend; `None` when it was recorded only.
    pub seed_sent: Option<bool>,
    pub questionnaire_sha256: String,
    pub created: String,
}

/// Append-only writer; one writer per file.
pub struct LogWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl LogWriter {
    pub fn create(path: &Path, header: &LogHeader) -> Result<Self> {
        let file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut w = LogWriter { out: BufWriter::new(file), path: path.to_path_buf() };
        w.write_line(header)?;
        Ok(w)
    }

    pub fn append(&mut self, record: &ResponseRecord) -> Result<()> {
        self.write_line(record)
    }

    fn write_line<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let line = serde_json::to_string(value).expect("log values serialize");
        writeln!(self.out, "{line}")
            .and_then(|()| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        self.out.get_ref().sync_all().map_err(|e| Error::io(&self.path, e))
    }
}

/// Reads a complete log file.
pub fn read_log(path: &Path) -> Result<(LogHeader, Vec<ResponseRecord>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_log(BufReader::new(file), &path.display().to_string())
}

pub fn parse_log(reader: impl BufRead, origin: &str) -> Result<(LogHeader, Vec<ResponseRecord>)> {
    let mut lines = reader.lines().enumerate();
    let bad = |n: usize, why: String| Error::MalformedLog(format!("{origin}:{}: {why}", n + 1));
    let header: LogHeader = match lines.next() {
        Some((n, line)) => {
            let line = line.map_err(|e| bad(n, e.to_string()))?;
            serde_json::from_str(&line).map_err(|e| bad(n, format!("header: {e}")))?
        }
        None => return Err(Error::MalformedLog(format!("{origin}: empty log"))),
    };
    if header.log_format != LOG_FORMAT {
        return Err(bad(0, format!("unsupported log format `{}`", header.log_format)));
    }
    let mut records = Vec::new();
    for (n, line) in lines {
        let line = line.map_err(|e| bad(n, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| bad(n, e.to_string()))?);
    }
    Ok((header, records))
}
