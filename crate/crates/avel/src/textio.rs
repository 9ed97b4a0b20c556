//! Helpers for the line-delimited text formats used by every artifact
//! file. All formats start with a `"<magic> <version>"` header line;
//! floats are written with the shortest decimal representation that
//! round-trips exactly, so save/load is the identity on `f64` values.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// File position carried into parse errors.
#[derive(Debug, Clone)]
pub struct FileCtx {
    pub path: String,
    pub line: usize,
}

impl FileCtx {
    pub fn err(&self, msg: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line,
            msg,
        }
    }
}

/// Reads a text artifact line by line, tracking positions for error
/// messages. Blank lines and `#` comment lines are skipped.
#[derive(Debug)]
pub struct LineReader {
    path: String,
    lines: Vec<String>,
    next: usize,
}

impl LineReader {
    pub fn open(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        Ok(LineReader {
            path: path.display().to_string(),
            lines: text.lines().map(str::to_string).collect(),
            next: 0,
        })
    }

    pub fn context(&self) -> FileCtx {
        FileCtx {
            path: self.path.clone(),
            line: self.next, // 1-based index of the line just read
        }
    }

    pub fn error(&self, msg: String) -> Error {
        self.context().err(msg)
    }

    /// Next meaningful line, or `None` at end of file.
    pub fn try_next_line(&mut self) -> Result<Option<String>> {
        while self.next < self.lines.len() {
            let line = self.lines[self.next].clone();
            self.next += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Ok(Some(line));
        }
        Ok(None)
    }

    /// Next meaningful line; errors if the file ends first.
    pub fn next_line(&mut self) -> Result<String> {
        self.try_next_line()?
            .ok_or_else(|| self.error("unexpected end of file".into()))
    }

    /// Consumes and checks the `"<magic> <version>"` header line.
    pub fn expect_header(&mut self, magic: &str, version: &str) -> Result<()> {
        let line = self.next_line()?;
        let mut fields = line.split_whitespace();
        let found_magic = fields.next().unwrap_or_default();
        let found_version = fields.next().unwrap_or_default();
        if found_magic != magic {
            return Err(self.error(format!(
                "not a {magic} file (header starts with {found_magic:?})"
            )));
        }
        if found_version != version {
            return Err(Error::Version {
                path: self.path.clone(),
                found: found_version.to_string(),
                expected: version.to_string(),
            });
        }
        Ok(())
    }

    /// Parses one whitespace-separated field, naming it in errors.
    pub fn parse_field<T: FromStr>(&self, field: Option<&str>, name: &str) -> Result<T> {
        let raw = field.ok_or_else(|| self.error(format!("missing field {name}")))?;
        raw.parse()
            .map_err(|_| self.error(format!("cannot parse field {name} from {raw:?}")))
    }

    /// Parses exactly `n` floats from the remainder of an iterator.
    pub fn parse_floats<'a>(
        &self,
        fields: impl Iterator<Item = &'a str>,
        n: usize,
        what: &str,
    ) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for raw in fields {
            let v: f64 = raw
                .parse()
                .map_err(|_| self.error(format!("cannot parse float {raw:?} in {what}")))?;
            out.push(v);
        }
        if out.len() != n {
            return Err(self.error(format!("{what}: expected {n} values, found {}", out.len())));
        }
        Ok(out)
    }
}

/// `key=value` pairs parsed from a tagged line such as
/// `"params tau=0.05 n=4"`.
pub struct KvLine(BTreeMap<String, String>);

impl KvLine {
    pub fn get_parsed<T: FromStr>(&self, key: &str, ctx: &FileCtx) -> Result<T> {
        let raw = self
            .0
            .get(key)
            .ok_or_else(|| ctx.err(format!("missing key {key}")))?;
        raw.parse()
            .map_err(|_| ctx.err(format!("cannot parse {key}={raw:?}")))
    }
}

pub fn parse_kv_line(line: &str, expected_tag: &str, ctx: &FileCtx) -> Result<KvLine> {
    let mut fields = line.split_whitespace();
    let tag = fields.next().unwrap_or_default();
    if tag != expected_tag {
        return Err(ctx.err(format!("expected {expected_tag:?} line, found {tag:?}")));
    }
    let mut map = BTreeMap::new();
    for field in fields {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| ctx.err(format!("expected key=value, found {field:?}")))?;
        map.insert(k.to_string(), v.to_string());
    }
    Ok(KvLine(map))
}

/// Appends floats to a line using the shortest round-trip representation.
pub fn push_floats(out: &mut String, values: &[f64]) {
    for v in values {
        out.push(' ');
        out.push_str(&format!("{v}"));
    }
}
