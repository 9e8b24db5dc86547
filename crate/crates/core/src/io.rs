//! CSV and file helpers shared by the serializers.
//!
//! Every CSV written by this crate starts with `# key = value` metadata lines
//! followed by an ordinary header row. Floats are written with Rust's shortest
//! round-trip formatting.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Write `contents` to `path` through a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        file_name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(contents).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Builder for the metadata-plus-table CSV layout.
#[derive(Debug, Default)]
pub struct CsvDoc {
    out: String,
}

impl CsvDoc {
    pub fn new() -> Self {
        CsvDoc::default()
    }

    pub fn meta(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.out.push_str(&format!("# {key} = {value}\n"));
        self
    }

    pub fn row<I, S>(&mut self, fields: I) -> &mut Self
    where
        I: IntoIterator<Item = S>,
        S: std::fmt::Display,
    {
        let line: Vec<String> = fields.into_iter().map(|f| f.to_string()).collect();
        self.out.push_str(&line.join(","));
        self.out.push('\n');
        self
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// A parsed CSV: metadata lines and records keyed by header name.
#[derive(Debug)]
pub struct ParsedCsv {
    pub meta: BTreeMap<String, String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    context: String,
}

impl ParsedCsv {
    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let mut meta = BTreeMap::new();
        for line in text.lines() {
            let Some(rest) = line.strip_prefix('#') else {
                continue;
            };
            if let Some((k, v)) = rest.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::parse(context, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::parse(context, e.to_string()))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(ParsedCsv {
            meta,
            header,
            rows,
            context: context.to_string(),
        })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(&self.context, format!("missing column `{name}`")))
    }

    pub fn require_columns(&self, names: &[&str]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.column(n)).collect()
    }

    pub fn meta_value<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .meta
            .get(key)
            .ok_or_else(|| Error::parse(&self.context, format!("missing metadata `{key}`")))?;
        raw.parse()
            .map_err(|_| Error::parse(&self.context, format!("bad value for `{key}`: {raw}")))
    }

    pub fn field<T: std::str::FromStr>(&self, row: usize, col: usize) -> Result<T> {
        let raw = &self.rows[row][col];
        raw.parse().map_err(|_| {
            Error::parse(
                &self.context,
                format!(
                    "row {}: cannot parse `{raw}` in column `{}`",
                    row + 1,
                    self.header[col]
                ),
            )
        })
    }
}

/// Parse a 0/1 or true/false flag.
pub fn parse_flag(raw: &str) -> Option<bool> {
    match raw {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}
