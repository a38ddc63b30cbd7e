//! Line-oriented structured text used by every artifact file.
//!
//! ```text
//! #resvr <kind> v1
//! hash = <16 hex digits over everything below this line>
//! key = value
//! ...
//! ---
//! record tokens ...
//! ```
//!
//! Floats are written with the shortest exponent form that round-trips, so a
//! file parsed and re-rendered is byte-identical to the original.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::{Error, Result};

const SEPARATOR: &str = "---";

pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

pub fn fmt_f64_list(xs: &[f64]) -> String {
    let mut s = String::with_capacity(xs.len() * 24);
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{x:e}").unwrap();
    }
    s
}

pub fn parse_num<T: FromStr>(tok: &str, what: &str) -> Result<T> {
    tok.parse::<T>()
        .map_err(|_| Error::parse(what, format!("bad number `{tok}`")))
}

pub fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split_whitespace().map(|t| parse_num(t, what)).collect()
}

/// First 16 hex digits of the SHA-256 of `data`.
pub fn content_hash(data: &str) -> String {
    let digest = Sha256::digest(data.as_bytes());
    let mut out = String::with_capacity(16);
    for b in digest.iter().take(8) {
        write!(out, "{b:02x}").unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub kind: String,
    pub header: Vec<(String, String)>,
    pub records: Vec<String>,
}

impl Document {
    pub fn new(kind: &str) -> Self {
        Document {
            kind: kind.to_string(),
            header: Vec::new(),
            records: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.header.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, record: String) {
        self.records.push(record);
    }

    fn body(&self) -> String {
        let mut body = String::new();
        for (k, v) in &self.header {
            body.push_str(k);
            body.push_str(" = ");
            body.push_str(v);
            body.push('\n');
        }
        body.push_str(SEPARATOR);
        body.push('\n');
        for r in &self.records {
            body.push_str(r);
            body.push('\n');
        }
        body
    }

    /// Hash of the document content (kind, header and records).
    pub fn hash(&self) -> String {
        content_hash(&format!("{}\n{}", self.kind, self.body()))
    }

    pub fn render(&self) -> String {
        let body = self.body();
        let hash = content_hash(&format!("{}\n{}", self.kind, body));
        format!("#resvr {} v1\nhash = {}\n{}", self.kind, hash, body)
    }

    /// Parses a rendered document, checking the kind and the embedded hash.
    pub fn parse(text: &str, kind: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().unwrap_or_default();
        let expected_first = format!("#resvr {kind} v1");
        if first != expected_first {
            return Err(Error::parse(kind, format!("bad magic line `{first}`")));
        }
        let hash_line = lines.next().unwrap_or_default();
        let stored = hash_line
            .strip_prefix("hash = ")
            .ok_or_else(|| Error::parse(kind, "missing hash line"))?
            .to_string();
        let mut doc = Document::new(kind);
        let mut in_records = false;
        for line in lines {
            if in_records {
                doc.records.push(line.to_string());
            } else if line == SEPARATOR {
                in_records = true;
            } else {
                let (k, v) = line
                    .split_once(" = ")
                    .ok_or_else(|| Error::parse(kind, format!("bad header line `{line}`")))?;
                doc.header.push((k.to_string(), v.to_string()));
            }
        }
        if !in_records {
            return Err(Error::parse(kind, "missing record separator"));
        }
        let found = doc.hash();
        if found != stored {
            return Err(Error::HashMismatch {
                what: kind.to_string(),
                expected: stored,
                found,
            });
        }
        Ok(doc)
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::parse(&self.kind, format!("missing header key `{key}`")))
    }

    pub fn get_num<T: FromStr>(&self, key: &str) -> Result<T> {
        parse_num(self.get(key)?, &self.kind)
    }

    pub fn write_to(&self, path: &Path) -> Result<String> {
        let text = self.render();
        std::fs::write(path, &text).map_err(|e| Error::io(path, e))?;
        Ok(self.hash())
    }

    pub fn read_from(path: &Path, kind: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Document::parse(&text, kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_is_identity() {
        let mut d = Document::new("demo");
        d.set("alpha", fmt_f64(0.1 + 0.2)).set("n", 3);
        d.push(fmt_f64_list(&[1.0, -2.5e-300, f64::MIN_POSITIVE, 1.0 / 3.0]));
        let text = d.render();
        let back = Document::parse(&text, "demo").unwrap();
        assert_eq!(back, d);
        assert_eq!(back.render(), text);
        let xs = parse_f64_list(&back.records[0], "demo").unwrap();
        assert_eq!(xs[3].to_bits(), (1.0f64 / 3.0).to_bits());
    }

    #[test]
    fn tampered_file_is_rejected() {
        let mut d = Document::new("demo");
        d.set("k", 1);
        d.push("1 2 3".into());
        let text = d.render().replace("1 2 3", "1 2 4");
        assert!(matches!(
            Document::parse(&text, "demo"),
            Err(Error::HashMismatch { .. })
        ));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let d = Document::new("a");
        assert!(Document::parse(&d.render(), "b").is_err());
    }
}
